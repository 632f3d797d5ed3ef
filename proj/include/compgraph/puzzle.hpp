// Einstein-style logic puzzles: K houses, M attributes, one value of each
// attribute per house. Generation over-produces true clues and prunes them
// down to a uniquely solvable set; the greedy elimination solver turns the
// clue set into a computation graph whose nodes are partially filled tables.
//
// Node addresses: clue[i] (source, clue text; only clues the solver cites)
// and step[t] (table after elimination step t; the last step is the sink).
#pragma once

#include "compgraph/graph.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace compgraph::puzzle {

struct ValueDesc {
    std::string id;       // canonical lowercase form, used in cells ("toyota camry")
    std::string display;  // final-table form ("Camry")
    std::string phrase;   // clue form ("the person who owns a Toyota Camry")
};

struct AttributeDesc {
    std::string key;     // cell attribute name ("CarModel")
    std::string header;  // table column label ("Car")
    std::string bullet;  // question bullet prefix ("People own different car models")
    std::vector<ValueDesc> values;
};

/// Seven attributes with seven values each; Name comes first.
const std::vector<AttributeDesc>& default_catalog();

struct PuzzleSpec {
    int K = 3;
    int M = 3;
    std::vector<AttributeDesc> catalog;  // empty means default_catalog()
    std::uint64_t seed = 0;
    bool hard_clues = false;
};

enum class ClueKind { FoundAt, SameHouse, DirectLeft, Besides, NotAt, LeftOf, TwoHouseBetween };

std::string_view to_string(ClueKind k);
ClueKind clue_kind_from_string(std::string_view s);

/// Attribute index and value index into PuzzleInstance::attributes.
struct ValueRef {
    int attr = 0;
    int value = 0;
    friend bool operator==(const ValueRef&, const ValueRef&) = default;
};

struct Clue {
    ClueKind kind = ClueKind::FoundAt;
    ValueRef a;
    ValueRef b;     // unused by FoundAt / NotAt
    int house = 0;  // 1-based; FoundAt / NotAt only
    friend bool operator==(const Clue&, const Clue&) = default;
};

struct PuzzleInstance {
    int K = 0;
    /// The M sampled attributes, each restricted to its K sampled values in
    /// listing order.
    std::vector<AttributeDesc> attributes;
    /// solution[a][h] = value index of attribute a in house h (0-based).
    std::vector<std::vector<int>> solution;
    std::vector<Clue> clues;
    /// Generation attempts needed before the greedy solver succeeded.
    int attempts = 1;

    int M() const { return static_cast<int>(attributes.size()); }
    /// 1-based house holding the referenced value.
    int house_of(const ValueRef& r) const;
};

class SearchLimitExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SolverStuck : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Samples attributes (Name always included), K values each, and a random
/// assignment to houses. Clues are left empty.
PuzzleInstance sample_solution(const PuzzleSpec& spec);

bool clue_holds(const PuzzleInstance& inst, const Clue& clue);
std::string clue_text(const PuzzleInstance& inst, const Clue& clue);

/// Every true clue of the enabled kinds, in a fixed order.
std::vector<Clue> all_true_clues(const PuzzleInstance& inst, bool hard_clues);

/// Over-generates true clues, then visits them in seeded random order and
/// drops each one whose removal keeps the solution unique.
std::vector<Clue> generate_clues(const PuzzleInstance& inst, std::uint64_t seed, bool hard_clues = false);

/// sample_solution + generate_clues, retrying with a derived seed while the
/// greedy solver cannot finish the clue set.
PuzzleInstance generate_puzzle(const PuzzleSpec& spec);

/// Number of tables satisfying the clues, counted up to `cap`.
std::uint64_t count_solutions(const PuzzleInstance& inst, const std::vector<Clue>& clues, std::uint64_t cap,
                              std::uint64_t node_limit = 50'000'000);

struct GreedyStep {
    std::vector<int> clues;                // cited clue indices, in citation order
    std::vector<CellAssignment> cells;     // newly filled, by (house, attribute order)
    bool unique_values = false;            // some column was completed by this step
    PartialTable table;                    // table after the step
};

/// The elimination sequence. Each step uses the smallest clue subset (size
/// 1..3, lowest indices first) that forces at least one unfilled cell.
std::vector<GreedyStep> greedy_trace(const PuzzleInstance& inst);
ComputationGraph greedy_solve(const PuzzleInstance& inst);

/// Cells forced by `clues` on top of `table` that are not yet in it.
std::vector<CellAssignment> forced_cells(const PuzzleInstance& inst, const PartialTable& table,
                                         const std::vector<int>& clues);
/// prev plus the cells forced by the clues.
PartialTable eliminate(const PuzzleInstance& inst, const PartialTable& prev, const std::vector<int>& clues);

/// Evaluator for Eliminate nodes (parents: optional previous table, then
/// clue texts); other ops defer to evaluate_primitive.
OpEvaluator make_evaluator(const PuzzleInstance& inst);

std::string clue_id(int i);
std::string step_id(int t);

CellAssignment make_cell(const PuzzleInstance& inst, int attr, int house, int value);
PartialTable solution_table(const PuzzleInstance& inst);
/// Index of the attribute with the given key, or -1.
int attribute_index(const PuzzleInstance& inst, std::string_view key);
int value_index(const PuzzleInstance& inst, int attr, std::string_view id);

std::string ordinal(int house);
std::string question_text(const PuzzleInstance& inst);
/// "$ House: 1 $ Name: Eric   $ ..." rows for a (possibly partial) table.
std::string format_table(const PuzzleInstance& inst, const PartialTable& table);
std::string answer_text(const PuzzleInstance& inst);

}  // namespace compgraph::puzzle
