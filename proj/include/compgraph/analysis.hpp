// Error taxonomy over predicted graphs, per-layer error ratios, relative
// information gain over enumerated task distributions, and surface-pattern
// metrics over answer corpora.
#pragma once

#include "compgraph/graph.hpp"
#include "compgraph/scratchpad.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace compgraph::analysis {

enum class Category { FullyCorrect, LocalError, PropagationError, RestorationError, Absent };
inline constexpr int kCategoryCount = 5;

std::string_view to_string(Category c);

struct NodeClass {
    std::string id;
    Category category = Category::Absent;
    int layer = 0;
    bool value_correct = false;
    bool computation_correct = false;
};

struct NodeClassification {
    std::vector<NodeClass> nodes;  // truth graph order
    std::array<std::size_t, kCategoryCount> counts{};
    bool answer_correct = false;

    const NodeClass* find(std::string_view id) const;
    /// Some node is not fully correct.
    bool has_error() const { return counts[0] != nodes.size(); }
};

/// Compares claimed values and stated computations against the truth graph.
/// `evaluator` defaults to evaluate_primitive; puzzle graphs need the
/// instance evaluator. Throws GraphError when `predicted` names addresses the
/// truth graph lacks or belongs to another task.
NodeClassification classify_nodes(const ComputationGraph& truth, const scratchpad::PredictedGraph& predicted,
                                  const OpEvaluator* evaluator = nullptr);

struct LayerRatio {
    int layer = 0;
    std::size_t present = 0;  // nodes with a category other than absent
    std::size_t absent = 0;
    /// Fractions of present nodes: fully-correct, local, propagation, restoration.
    std::array<double, 4> ratio{};
};

/// Per-layer category ratios over a corpus. Throws on an empty corpus.
std::vector<LayerRatio> layer_error_ratios(const std::vector<NodeClassification>& corpus);

// ---------------------------------------------------------------------------
// Relative information gain

struct DistributionSpec {
    TaskKind task = TaskKind::Multiplication;
    int k1 = 2, k2 = 2;  // multiplication operand lengths
    int n = 2;           // DP list length
    bool exhaustive = true;
    std::uint64_t sample_count = 0;
    std::uint64_t seed = 0;
};

inline constexpr std::uint64_t kMaxExhaustive = 10'000'000;

/// Input and output variables of every instance in the distribution.
/// Multiplication: x1..xk1, y1..yk2 (x1 most significant) and z1..z(k1+k2),
/// the product zero-padded to k1+k2 digits. DP: a1..an and o1..on.
class TaskDistribution {
public:
    explicit TaskDistribution(const DistributionSpec& spec);

    const DistributionSpec& spec() const { return spec_; }
    const std::vector<std::string>& input_labels() const { return inputs_; }
    const std::vector<std::string>& output_labels() const { return outputs_; }
    std::size_t size() const { return rows_; }

    struct Result {
        double value = 0;
        double ci_half_width = 0;  // 0 in exhaustive mode
    };

    /// (H(Y) - H(Y|X)) / H(Y); 1 when H(Y) = 0. Entropies use `log_base`.
    Result relative_ig(const std::vector<std::string>& X, const std::string& Y, double log_base = 2.0) const;

private:
    int column(const std::string& label) const;
    double ig_over(std::size_t begin, std::size_t end, const std::vector<int>& xs, int y, double base) const;

    DistributionSpec spec_;
    std::vector<std::string> inputs_, outputs_;
    std::size_t cols_ = 0, rows_ = 0;
    std::vector<std::int8_t> data_;  // rows_ x cols_, inputs then outputs
};

// ---------------------------------------------------------------------------
// Surface patterns

struct SurfaceSample {
    TaskKind task = TaskKind::Multiplication;
    std::string size;  // bucket label, e.g. "3x2"
    std::optional<NodeValue> predicted;
    NodeValue truth;
    /// Set when a node classification is available for the sample.
    std::optional<bool> internal_error;
};

struct SurfaceRow {
    TaskKind task;
    std::string size;
    std::string metric;
    double value = 0;
    std::size_t count = 0;
};

/// Rows per (task, size bucket, metric), buckets in first-seen order.
/// Metrics: exact_match; multiplication partial metrics; DP o1..on position
/// accuracy; puzzle cell accuracy; and, where classifications exist, the
/// fraction of exactly matched answers whose graph still has an error.
std::vector<SurfaceRow> surface_pattern_report(const std::vector<SurfaceSample>& corpus);

}  // namespace compgraph::analysis
