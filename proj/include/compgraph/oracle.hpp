// Simulated models over computation graphs: the noisy oracle (each printed
// step corrupted with probability epsilon, recovery with probability c) and
// targeted single-node injections used to build labelled error corpora.
//
// Traces are scratchpad::PredictedGraph values keyed by the truth graph's
// addresses; render_trace turns them into text.
#pragma once

#include "compgraph/graph.hpp"
#include "compgraph/puzzle.hpp"
#include "compgraph/scratchpad.hpp"

#include <random>

namespace compgraph::oracle {

/// Evaluator for the graph's ops (puzzle graphs need the instance).
OpEvaluator evaluator_for(const ComputationGraph& g, const puzzle::PuzzleInstance* inst);

/// A value of the node's codomain other than `current`, drawn uniformly.
/// Booleans flip; DP selections swap 1 and 2; selection lists and puzzle
/// tables change one entry (for tables, a cell new relative to `previous`).
NodeValue random_wrong_value(const ComputationGraph& g, const std::string& id, const NodeValue& current,
                             std::mt19937_64& rng, const puzzle::PuzzleInstance* inst = nullptr,
                             const PartialTable* previous = nullptr);

/// Re-evaluates every strict descendant of `id` from the claimed values.
void recompute_descendants(const ComputationGraph& g, scratchpad::PredictedGraph& trace, const std::string& id,
                           const OpEvaluator& eval);

struct NoisySpec {
    double epsilon = 0.0;
    double c = 0.0;
    /// When set, a node with a wrong parent returns the true value only
    /// through the c channel. Otherwise values computed from wrong parents may
    /// coincide with the truth on their own.
    bool exact_recovery = true;
};

/// Walks the canonical order. A printed node whose parents are all correct is
/// replaced by a uniform wrong value with probability epsilon; a node with a
/// wrong parent emits the true value with probability c and otherwise the
/// value computed from its claimed parents, itself corrupted with probability
/// epsilon. Sources and nodes the scratchpad never prints are not corrupted.
scratchpad::PredictedGraph noisy_trace(const ComputationGraph& g, const NoisySpec& spec, std::uint64_t seed,
                                       const puzzle::PuzzleInstance* inst = nullptr);

/// Scratchpad text of noisy_trace.
std::string noisy_scratchpad(const ComputationGraph& g, const NoisySpec& spec, std::uint64_t seed,
                             const puzzle::PuzzleInstance* inst = nullptr);

/// Nodes a local injection may target: printed, non-source.
std::vector<std::string> injectable_nodes(const ComputationGraph& g, const scratchpad::PredictedGraph& trace);

struct Injection {
    scratchpad::PredictedGraph trace;
    std::string node;  // empty when the graph offers no target
};

/// One printed node gets a wrong value; its descendants follow from it.
Injection inject_local(const ComputationGraph& g, std::mt19937_64& rng, const puzzle::PuzzleInstance* inst = nullptr);

/// One node keeps its true value while the arguments it states are changed
/// so that they no longer produce it.
Injection inject_restoration(const ComputationGraph& g, std::mt19937_64& rng,
                             const puzzle::PuzzleInstance* inst = nullptr);

}  // namespace compgraph::oracle
