#include "compgraph/oracle.hpp"

#include <algorithm>
#include <set>

namespace compgraph::oracle {

namespace sp = scratchpad;

OpEvaluator evaluator_for(const ComputationGraph& g, const puzzle::PuzzleInstance* inst) {
    if (g.task() == TaskKind::Puzzle) {
        if (!inst) throw std::invalid_argument("puzzle graphs need their instance");
        return puzzle::make_evaluator(*inst);
    }
    return [](Op op, std::span<const NodeValue> args) { return evaluate_primitive(op, args); };
}

namespace {

int count_prefix(const ComputationGraph& g, const std::string& prefix) {
    int k = 0;
    while (g.contains(prefix + "[" + std::to_string(k) + "]")) ++k;
    return k;
}

/// Uniform integer in [lo, hi] other than cur.
BigInt uniform_other(std::uint64_t lo, std::uint64_t hi, const BigInt& cur, std::mt19937_64& rng) {
    const bool inside = cur >= lo && cur <= hi;
    const std::uint64_t span = hi - lo + (inside ? 0 : 1);
    if (span == 0) return cur;
    std::uint64_t r = lo + std::uniform_int_distribution<std::uint64_t>(0, span - 1)(rng);
    if (inside && BigInt(r) >= cur) ++r;
    return BigInt(r);
}

std::uint64_t pow10u(int k) {
    std::uint64_t r = 1;
    while (k-- > 0) r *= 10;
    return r;
}

NodeValue numeric(const NodeValue& like, const BigInt& v) {
    if (std::holds_alternative<Digit>(like) && v >= 0 && v <= 9) return make_digit(static_cast<int>(v));
    return make_int(v);
}

PartialTable corrupt_table(const PartialTable& table, const PartialTable* previous, std::mt19937_64& rng,
                           const puzzle::PuzzleInstance& inst) {
    std::vector<std::size_t> fresh;
    for (std::size_t k = 0; k < table.cells.size(); ++k) {
        const auto& c = table.cells[k];
        const auto* old = previous ? previous->find(c.house, c.attribute) : nullptr;
        if (!old || old->value != c.value) fresh.push_back(k);
    }
    if (fresh.empty())
        for (std::size_t k = 0; k < table.cells.size(); ++k) fresh.push_back(k);
    if (fresh.empty() || inst.K < 2) return table;
    const auto& cell = table.cells[fresh[std::uniform_int_distribution<std::size_t>(0, fresh.size() - 1)(rng)]];
    const int a = puzzle::attribute_index(inst, cell.attribute);
    const int v = puzzle::value_index(inst, a, cell.value);
    int w = std::uniform_int_distribution<int>(0, inst.K - 2)(rng);
    if (w >= v) ++w;
    PartialTable out = table;
    out.assign(puzzle::make_cell(inst, a, cell.house, w));
    return out;
}

}  // namespace

NodeValue random_wrong_value(const ComputationGraph& g, const std::string& id, const NodeValue& current,
                             std::mt19937_64& rng, const puzzle::PuzzleInstance* inst, const PartialTable* previous) {
    const Node& n = g.node(id);
    const BigInt cur = as_number(current).value_or(-1);
    switch (n.op) {
        case Op::Source: return current;
        case Op::DigitMul: return make_int(uniform_other(0, 81, cur, rng));
        case Op::Add:
            if (g.task() == TaskKind::DynamicProgramming) {
                const auto n_in = static_cast<std::uint64_t>(count_prefix(g, "input"));
                // values span -5 .. 5n; shift to stay unsigned
                return make_int(uniform_other(0, 5 * n_in + 5, cur + 5, rng) - 5);
            }
            return make_int(uniform_other(0, 90, cur, rng));
        case Op::Mod10:
        case Op::CarryOver: return numeric(current, uniform_other(0, 9, cur, rng));
        case Op::ConcatDigits:
            return make_int(uniform_other(0, pow10u(static_cast<int>(n.parents.size())) - 1, cur, rng));
        case Op::ShiftedSum: {
            const int digits = count_prefix(g, "x") + static_cast<int>(n.parents.size());
            return make_int(uniform_other(0, pow10u(digits) - 1, cur, rng));
        }
        case Op::MaxZero: {
            const auto n_in = static_cast<std::uint64_t>(count_prefix(g, "input"));
            return make_int(uniform_other(0, 5 * std::max<std::uint64_t>(n_in, 1), cur, rng));
        }
        case Op::Equals:
        case Op::And:
        case Op::Not: return make_bool(!as_bool(current).value_or(false));
        case Op::Indicator: return make_digit(cur == 1 ? 2 : 1);
        case Op::ConcatList: {
            auto seq = std::get<DigitSeq>(current);
            if (seq.digits.empty()) return current;
            auto& d = seq.digits[std::uniform_int_distribution<std::size_t>(0, seq.digits.size() - 1)(rng)];
            d = d == 1 ? 2 : 1;
            return NodeValue{seq};
        }
        case Op::Eliminate:
            if (!inst) throw std::invalid_argument("puzzle tables need their instance");
            return corrupt_table(std::get<PartialTable>(current), previous, rng, *inst);
    }
    return current;
}

namespace {

const NodeValue& claimed(const ComputationGraph& g, const sp::PredictedGraph& t, const std::string& id) {
    if (const auto* n = t.find(id); n && n->present && n->value) return *n->value;
    return g.node(id).value;
}

std::vector<NodeValue> claimed_args(const ComputationGraph& g, const sp::PredictedGraph& t, const Node& n) {
    std::vector<NodeValue> args;
    for (const auto& p : n.parents) args.push_back(claimed(g, t, p));
    return args;
}

const PartialTable* previous_table(const ComputationGraph& g, const sp::PredictedGraph& t, const Node& n) {
    if (n.op != Op::Eliminate || n.parents.empty()) return nullptr;
    return std::get_if<PartialTable>(&claimed(g, t, n.parents[0]));
}

}  // namespace

void recompute_descendants(const ComputationGraph& g, sp::PredictedGraph& trace, const std::string& id,
                           const OpEvaluator& eval) {
    std::vector<char> hit(g.size(), 0);
    hit[g.index_of(id)] = 1;
    for (const auto& nid : linearize(g)) {
        const std::size_t i = g.index_of(nid);
        if (hit[i]) continue;
        bool downstream = false;
        for (auto p : g.parent_indices(i)) downstream = downstream || hit[p];
        if (!downstream) continue;
        hit[i] = 1;
        const Node& n = g.node(nid);
        auto args = claimed_args(g, trace, n);
        auto v = eval(n.op, args);
        auto& pn = trace.nodes[nid];
        pn.present = true;
        pn.value = v ? *v : n.value;
        pn.written_parents.clear();
    }
    trace.final_answer = claimed(g, trace, g.sink());
}

sp::PredictedGraph noisy_trace(const ComputationGraph& g, const NoisySpec& spec, std::uint64_t seed,
                               const puzzle::PuzzleInstance* inst) {
    if (spec.epsilon < 0 || spec.epsilon > 1 || spec.c < 0 || spec.c > 1)
        throw std::invalid_argument("epsilon and c must lie in [0, 1]");
    auto trace = sp::truth_trace(g);
    const auto eval = evaluator_for(g, inst);
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution flip(spec.epsilon), recover(spec.c);
    for (const auto& id : linearize(g)) {
        const Node& n = g.node(id);
        if (n.op == Op::Source) continue;
        auto args = claimed_args(g, trace, n);
        bool parents_ok = true;
        for (std::size_t k = 0; k < n.parents.size(); ++k)
            parents_ok = parents_ok && args[k] == g.node(n.parents[k]).value;
        auto f = eval(n.op, args);
        NodeValue v = f ? *f : n.value;
        if (sp::printed_explicitly(g, trace, id)) {
            const auto* prev = previous_table(g, trace, n);
            if (parents_ok) {
                if (flip(rng)) v = random_wrong_value(g, id, v, rng, inst, prev);
            } else if (recover(rng)) {
                v = n.value;
            } else {
                if (flip(rng)) {
                    for (int tries = 0; tries < 64; ++tries) {
                        auto w = random_wrong_value(g, id, v, rng, inst, prev);
                        if (w != n.value || !spec.exact_recovery || tries == 63) {
                            v = w;
                            break;
                        }
                    }
                }
                // Recovery happens only through the c channel.
                if (spec.exact_recovery && v == n.value) v = random_wrong_value(g, id, v, rng, inst, prev);
            }
        }
        trace.nodes[id].value = v;
    }
    trace.final_answer = claimed(g, trace, g.sink());
    return trace;
}

std::string noisy_scratchpad(const ComputationGraph& g, const NoisySpec& spec, std::uint64_t seed,
                             const puzzle::PuzzleInstance* inst) {
    return sp::render_trace(g, noisy_trace(g, spec, seed, inst), inst);
}

std::vector<std::string> injectable_nodes(const ComputationGraph& g, const sp::PredictedGraph& trace) {
    std::vector<std::string> out;
    for (const auto& n : g.nodes())
        if (n.op != Op::Source && sp::printed_explicitly(g, trace, n.id)) out.push_back(n.id);
    return out;
}

Injection inject_local(const ComputationGraph& g, std::mt19937_64& rng, const puzzle::PuzzleInstance* inst) {
    Injection out{sp::truth_trace(g), {}};
    auto targets = injectable_nodes(g, out.trace);
    std::shuffle(targets.begin(), targets.end(), rng);
    for (const auto& id : targets) {
        const Node& n = g.node(id);
        auto v = random_wrong_value(g, id, n.value, rng, inst, previous_table(g, out.trace, n));
        if (v == n.value) continue;
        out.trace.nodes[id].value = v;
        out.node = id;
        recompute_descendants(g, out.trace, id, evaluator_for(g, inst));
        break;
    }
    return out;
}

namespace {

std::optional<std::string> restore_multiplication(const ComputationGraph& g, sp::PredictedGraph& t,
                                                  std::mt19937_64& rng) {
    std::vector<std::string> targets;
    for (const auto& n : g.nodes())
        if ((n.op == Op::DigitMul || n.op == Op::Add || n.op == Op::ShiftedSum) && sp::printed_explicitly(g, t, n.id))
            targets.push_back(n.id);
    if (targets.empty()) return std::nullopt;
    const auto& id = targets[std::uniform_int_distribution<std::size_t>(0, targets.size() - 1)(rng)];
    const Node& n = g.node(id);
    auto& pn = t.nodes[id];
    std::uniform_int_distribution<int> digit(0, 9);
    if (n.op == Op::DigitMul) {
        const BigInt value = *as_number(n.value);
        int a, b;
        do {
            a = digit(rng);
            b = digit(rng);
        } while (BigInt(a * b) == value);
        pn.written_parents = {make_digit(a), make_digit(b)};
    } else if (n.op == Op::Add) {
        const BigInt carry = *as_number(g.node(n.parents[1]).value);
        pn.written_parents = {std::nullopt, make_digit(static_cast<int>(uniform_other(0, 9, carry, rng)))};
    } else {
        const std::size_t k = std::uniform_int_distribution<std::size_t>(0, n.parents.size() - 1)(rng);
        pn.written_parents.assign(n.parents.size(), std::nullopt);
        const BigInt p = *as_number(g.node(n.parents[k]).value);
        pn.written_parents[k] = make_int(p + 1 + std::uniform_int_distribution<int>(0, 8)(rng));
    }
    return id;
}

std::optional<std::string> restore_dp(const ComputationGraph& g, sp::PredictedGraph& t, std::mt19937_64& rng) {
    const int n = count_prefix(g, "input");
    if (n < 2) return std::nullopt;
    // dp[n-1] restates input[n-1] for the first time, so it is not a target.
    const int i = std::uniform_int_distribution<int>(0, n - 2)(rng);
    const std::string id = "dp[" + std::to_string(i) + "]";
    const BigInt v = *as_number(g.node(id).value);
    auto& pn = t.nodes[id];
    if (i == n - 2) pn.written_parents = {std::nullopt, make_int(v + 1)};
    else pn.written_parents = {make_int(v + 1), std::nullopt};
    return id;
}

std::optional<std::string> restore_puzzle(const ComputationGraph& g, sp::PredictedGraph& t, std::mt19937_64& rng,
                                          const puzzle::PuzzleInstance& inst) {
    std::vector<int> steps;
    for (int k = 0; g.contains(puzzle::step_id(k)) && g.node(puzzle::step_id(k)).op == Op::Eliminate; ++k)
        steps.push_back(k);
    std::shuffle(steps.begin(), steps.end(), rng);
    std::vector<int> clues(inst.clues.size());
    for (std::size_t c = 0; c < clues.size(); ++c) clues[c] = static_cast<int>(c);
    for (int k : steps) {
        const Node& n = g.node(puzzle::step_id(k));
        const PartialTable prev = k > 0 ? std::get<PartialTable>(g.node(n.parents[0]).value) : PartialTable{};
        const auto& table = std::get<PartialTable>(n.value);
        std::shuffle(clues.begin(), clues.end(), rng);
        for (int c : clues) {
            if (puzzle::eliminate(inst, prev, {c}) == table) continue;
            auto& pn = t.nodes[n.id];
            pn.written_parents.clear();
            if (k > 0) pn.written_parents.push_back(std::nullopt);
            pn.written_parents.push_back(Text{puzzle::clue_text(inst, inst.clues[c])});
            return n.id;
        }
    }
    return std::nullopt;
}

}  // namespace

Injection inject_restoration(const ComputationGraph& g, std::mt19937_64& rng, const puzzle::PuzzleInstance* inst) {
    Injection out{sp::truth_trace(g), {}};
    std::optional<std::string> id;
    switch (g.task()) {
        case TaskKind::Multiplication: id = restore_multiplication(g, out.trace, rng); break;
        case TaskKind::DynamicProgramming: id = restore_dp(g, out.trace, rng); break;
        case TaskKind::Puzzle:
            if (!inst) throw std::invalid_argument("puzzle graphs need their instance");
            id = restore_puzzle(g, out.trace, rng, *inst);
            break;
    }
    if (id) out.node = *id;
    return out;
}

}  // namespace compgraph::oracle
