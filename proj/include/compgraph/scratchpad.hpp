// Scratchpad text for the three tasks: rendering from a graph (or from a
// possibly corrupted trace over the same addresses) and parsing model text
// back into node-addressed claims.
//
// Some nodes are never printed as values of their own (DP sums and
// comparisons, the one-digit product inside a carry step, the sum of a step
// without carry-in). The parser rebuilds them from the operands written on
// the line and flags them as implied.
#pragma once

#include "compgraph/graph.hpp"
#include "compgraph/puzzle.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace compgraph::scratchpad {

struct PredictedNode {
    bool present = false;
    std::optional<NodeValue> value;
    /// Arguments as the text states them. Empty means "the claimed values of
    /// the graph parents"; a nullopt entry k means "the claimed value of
    /// graph parent k". Puzzle steps may list a different number of clues.
    std::vector<std::optional<NodeValue>> written_parents;
    bool implied = false;
};

struct Diagnostic {
    enum class Severity { Info, Warning, Error };
    Severity severity = Severity::Warning;
    int line = 0;  // 1-based, 0 when not tied to a line
    std::string message;
};

struct PredictedGraph {
    TaskKind task = TaskKind::Multiplication;
    std::map<std::string, PredictedNode> nodes;
    std::optional<NodeValue> final_answer;
    std::vector<Diagnostic> diagnostics;

    const PredictedNode* find(const std::string& id) const;
};

/// Trace with every node present and equal to the graph's value.
PredictedGraph truth_trace(const ComputationGraph& truth);

/// Scratchpad text for the graph's own values. Puzzle graphs need their
/// instance (clue texts, display names).
std::string render(const ComputationGraph& truth, const puzzle::PuzzleInstance* inst = nullptr);
/// Scratchpad text for the claimed values in `trace`, laid out over the
/// addresses of `truth`. Missing nodes fall back to the truth values.
std::string render_trace(const ComputationGraph& truth, const PredictedGraph& trace,
                         const puzzle::PuzzleInstance* inst = nullptr);

/// Whether the node's value is printed as such. Depends on already claimed
/// upstream values (multiplication carry-ins), so `trace` must hold them.
bool printed_explicitly(const ComputationGraph& truth, const PredictedGraph& trace, const std::string& id);

/// Total: malformed or missing lines yield diagnostics and absent nodes.
PredictedGraph parse(std::string_view text, const ComputationGraph& truth,
                     const puzzle::PuzzleInstance* inst = nullptr);

/// Last answer-shaped token sequence in the text: an integer, a list of 1/2
/// selections, or a final puzzle table (needs the instance).
std::optional<NodeValue> extract_final_answer(std::string_view text, TaskKind task,
                                              const puzzle::PuzzleInstance* inst = nullptr);

// Prompt assembly -----------------------------------------------------------

/// The question line, e.g. "What is 35 times 90?".
std::string question(const ComputationGraph& truth, const puzzle::PuzzleInstance* inst = nullptr);

/// Instruction paragraph used before multiplication question-answer prompts.
std::string multiplication_instructions();

struct Exemplar {
    std::string question;
    std::string answer;      // answer text, used by question-answer prompts
    std::string scratchpad;  // used by scratchpad prompts
};

enum class PromptMode { ZeroShot, FewShotQa, FewShotScratchpad };

std::string_view to_string(PromptMode m);
PromptMode prompt_mode_from_string(std::string_view s);

/// Full prompt text for one query.
std::string build_prompt(TaskKind task, PromptMode mode, const std::vector<Exemplar>& exemplars,
                         const std::string& query_question);

}  // namespace compgraph::scratchpad
