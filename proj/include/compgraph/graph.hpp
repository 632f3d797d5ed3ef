/**
 * @file graph.hpp
 * @brief Computation graphs: values, primitive ops, construction, validation
 *        and the complexity metrics (layer numbers, depth, width, average
 *        parallelism).
 *
 * A graph records one run of an algorithm. Every node carries a value and the
 * primitive that produced it from its (ordered) parents. Node ids are
 * canonical addresses chosen by the task that built the graph, so the same
 * address denotes the same step across instances of equal shape.
 */
#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <boost/rational.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace compgraph {

using BigInt = boost::multiprecision::cpp_int;

enum class TaskKind { Multiplication, DynamicProgramming, Puzzle };

std::string_view to_string(TaskKind kind);
TaskKind task_kind_from_string(std::string_view name);

// ---------------------------------------------------------------------------
// Values

struct Integer {
    BigInt value;
    friend bool operator==(const Integer&, const Integer&) = default;
};

struct Boolean {
    bool value = false;
    friend bool operator==(const Boolean&, const Boolean&) = default;
};

struct Digit {
    std::uint8_t value = 0;  // 0..9
    friend bool operator==(const Digit&, const Digit&) = default;
};

struct DigitSeq {
    std::vector<std::uint8_t> digits;
    friend bool operator==(const DigitSeq&, const DigitSeq&) = default;
};

struct CellAssignment {
    int house = 1;  // 1-based
    std::string attribute;
    std::string value;
    friend auto operator<=>(const CellAssignment&, const CellAssignment&) = default;
};

/// Set of cell assignments, kept sorted by (house, attribute, value).
struct PartialTable {
    std::vector<CellAssignment> cells;

    void insert(CellAssignment cell);
    /// Replaces any assignment at the same (house, attribute).
    void assign(CellAssignment cell);
    const CellAssignment* find(int house, std::string_view attribute) const;
    friend bool operator==(const PartialTable&, const PartialTable&) = default;
};

/// Free-form text payload (puzzle clue sources).
struct Text {
    std::string value;
    friend bool operator==(const Text&, const Text&) = default;
};

using NodeValue = std::variant<Integer, Boolean, Digit, DigitSeq, CellAssignment, PartialTable, Text>;

std::string_view value_kind(const NodeValue& v);
/// Compact human-readable rendering, used in diagnostics and CSV output.
std::string describe(const NodeValue& v);
/// Numeric view of Integer or Digit values.
std::optional<BigInt> as_number(const NodeValue& v);
std::optional<bool> as_bool(const NodeValue& v);

/// Decimal text (optional leading '-') to BigInt. Leading zeros are plain
/// zeros here, unlike cpp_int's own string constructor.
std::optional<BigInt> parse_decimal(std::string_view text);

inline NodeValue make_int(const BigInt& v) { return Integer{v}; }
inline NodeValue make_digit(int v) { return Digit{static_cast<std::uint8_t>(v)}; }
inline NodeValue make_bool(bool v) { return Boolean{v}; }

// ---------------------------------------------------------------------------
// Primitive operations

enum class Op {
    Source,
    DigitMul,      // one-digit multiplication
    Add,           // sum of two numbers
    Mod10,         // last digit
    CarryOver,     // floor(t / 10)
    ConcatDigits,  // decimal concatenation, most significant parent first
    ShiftedSum,    // sum_i parent_i * 10^i
    MaxZero,       // max(parents..., 0)
    Equals,
    And,
    Not,
    Indicator,     // true -> 1, false -> 2
    ConcatList,    // parents -> digit sequence
    Eliminate,     // puzzle elimination step; evaluated by the puzzle module
};

std::string_view to_string(Op op);
Op op_from_string(std::string_view name);

/// Arity constraint of an op: exact count, or a minimum when variadic.
struct Arity {
    std::size_t count;
    bool variadic;
};
Arity arity_of(Op op);

/// Evaluates a primitive over argument values. Returns nullopt when the
/// arguments have the wrong kinds or the op is not handled.
using OpEvaluator = std::function<std::optional<NodeValue>(Op, std::span<const NodeValue>)>;

/// Evaluates every op except Eliminate.
std::optional<NodeValue> evaluate_primitive(Op op, std::span<const NodeValue> args);

// ---------------------------------------------------------------------------
// Graph

struct Node {
    std::string id;
    NodeValue value;
    Op op = Op::Source;
    std::vector<std::string> parents;
};

class GraphError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Immutable computation graph. Node storage order is the insertion order
/// used by the builder, which task modules keep equal to the scratchpad order.
class ComputationGraph {
public:
    ComputationGraph() = default;

    TaskKind task() const { return task_; }
    const std::string& sink() const { return sink_; }
    std::size_t size() const { return nodes_.size(); }
    const std::vector<Node>& nodes() const { return nodes_; }

    bool contains(std::string_view id) const;
    const Node& node(std::string_view id) const;
    std::size_t index_of(std::string_view id) const;
    /// Parent indices of node i, in argument order.
    const std::vector<std::size_t>& parent_indices(std::size_t i) const { return parent_index_[i]; }
    const std::vector<std::size_t>& child_indices(std::size_t i) const { return child_index_[i]; }

private:
    friend class GraphBuilder;
    friend ComputationGraph relabel(const ComputationGraph&, const std::function<std::string(const std::string&)>&);

    void index();

    TaskKind task_ = TaskKind::Multiplication;
    std::string sink_;
    std::vector<Node> nodes_;
    std::unordered_map<std::string, std::size_t> by_id_;
    std::vector<std::vector<std::size_t>> parent_index_;
    std::vector<std::vector<std::size_t>> child_index_;
};

/// Accumulates nodes, then freezes them into a ComputationGraph. Parents may
/// be referenced before they are added; dangling references are reported by
/// validate() rather than rejected here.
class GraphBuilder {
public:
    explicit GraphBuilder(TaskKind task) : task_(task) {}

    GraphBuilder& add(std::string id, NodeValue value, Op op = Op::Source,
                      std::vector<std::string> parents = {});
    /// Adds a node whose value is computed from already-added parents.
    const NodeValue& compute(std::string id, Op op, std::vector<std::string> parents);
    const NodeValue& value_of(std::string_view id) const;
    GraphBuilder& set_sink(std::string id);

    ComputationGraph build() &&;

private:
    TaskKind task_;
    std::string sink_;
    std::vector<Node> nodes_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

/// Copy of the graph with every node id mapped through `f`.
ComputationGraph relabel(const ComputationGraph& graph, const std::function<std::string(const std::string&)>& f);

// ---------------------------------------------------------------------------
// Validation

struct Violation {
    enum class Kind { DanglingParent, Cycle, Arity, SourceMismatch, SinkCount, Unreachable, Evaluation };
    Kind kind;
    std::string node;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool acyclic = true;
    bool single_sink = true;
    bool arity_ok = true;
    bool evaluation_consistent = true;
    std::size_t evaluated_nodes = 0;

    bool ok() const { return violations.empty(); }
};

/// Structural checks. When `evaluator` is given, every non-source node is
/// re-evaluated from its parents and compared against its stored value.
ValidationReport validate(const ComputationGraph& graph, const OpEvaluator* evaluator = nullptr);

// ---------------------------------------------------------------------------
// Metrics

using Rational = boost::rational<std::int64_t>;

struct GraphStats {
    std::size_t node_count = 0;
    int depth = 0;
    int width = 0;
    Rational average_parallelism{0};
};

/// Longest path from any source, per node id. Throws GraphError on cycles.
std::map<std::string, int> layer_numbers(const ComputationGraph& graph);
/// Same as layer_numbers, indexed like graph.nodes().
std::vector<int> layer_vector(const ComputationGraph& graph);
int reasoning_depth(const ComputationGraph& graph);
/// Shortest distance from any source, indexed like graph.nodes().
std::vector<int> source_distances(const ComputationGraph& graph);
/// Mode of the source distances over all nodes; smallest value on ties.
int reasoning_width(const ComputationGraph& graph);
/// |V| / depth, or |V| when the depth is 0.
Rational average_parallelism(const ComputationGraph& graph);
GraphStats compute_stats(const ComputationGraph& graph);

/// Deterministic topological order. Among ready nodes the one that was
/// inserted first wins, so task builders control the canonical order.
std::vector<std::string> linearize(const ComputationGraph& graph);

std::string to_string(const Rational& r);

}  // namespace compgraph
