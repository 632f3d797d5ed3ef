#include "compgraph/dp.hpp"

#include <algorithm>
#include <stdexcept>

namespace compgraph::dp {

void check_instance(const DpInstance& inst) {
    if (inst.input.empty()) throw std::invalid_argument("empty input list");
    for (int v : inst.input)
        if (v < kMinValue || v > kMaxValue) throw std::invalid_argument("list element outside [-5, 5]");
}

DpSolution solve_dp(const DpInstance& inst) {
    check_instance(inst);
    const auto& a = inst.input;
    const int n = static_cast<int>(a.size());
    DpSolution s;
    s.dp.assign(n, 0);
    s.dp[n - 1] = std::max(a[n - 1], 0);
    if (n >= 2) s.dp[n - 2] = std::max({a[n - 1], a[n - 2], 0});
    for (int i = n - 3; i >= 0; --i) s.dp[i] = std::max({s.dp[i + 1], a[i] + s.dp[i + 2], 0});

    bool can_use = true;
    for (int i = 0; i < n; ++i) {
        bool hit = i < n - 2 ? s.dp[i] == a[i] + s.dp[i + 2] : s.dp[i] == a[i];
        bool chosen = hit && can_use;
        s.output.push_back(chosen ? 1 : 2);
        can_use = !chosen;
    }
    return s;
}

std::vector<int> brute_force_dp(const DpInstance& inst) {
    check_instance(inst);
    const auto n = inst.input.size();
    if (n > 20) throw std::invalid_argument("brute force limited to 20 elements");
    long best_sum = -1;
    std::vector<int> best;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        if (mask & (mask >> 1)) continue;
        long total = 0;
        std::vector<int> sel(n, 2);
        for (std::size_t i = 0; i < n; ++i)
            if (mask >> i & 1) total += inst.input[i], sel[i] = 1;
        if (total > best_sum || (total == best_sum && sel < best)) best_sum = total, best = std::move(sel);
    }
    return best;
}

std::string input_id(int i) { return "input[" + std::to_string(i) + "]"; }
std::string dp_id(int i) { return "dp[" + std::to_string(i) + "]"; }
std::string sum_id(int i) { return "sum[" + std::to_string(i) + "]"; }
std::string eq_id(int i) { return "eq[" + std::to_string(i) + "]"; }
std::string can_id(int i) { return "can[" + std::to_string(i) + "]"; }
std::string choose_id(int i) { return "choose[" + std::to_string(i) + "]"; }
std::string output_id(int i) { return "output[" + std::to_string(i) + "]"; }

ComputationGraph build_graph(const DpInstance& inst) {
    check_instance(inst);
    const int n = static_cast<int>(inst.input.size());
    GraphBuilder b(TaskKind::DynamicProgramming);
    for (int i = 0; i < n; ++i) b.add(input_id(i), make_int(inst.input[i]));

    b.compute(dp_id(n - 1), Op::MaxZero, {input_id(n - 1)});
    if (n >= 2) b.compute(dp_id(n - 2), Op::MaxZero, {input_id(n - 2), input_id(n - 1)});
    for (int i = n - 3; i >= 0; --i) {
        b.compute(sum_id(i), Op::Add, {input_id(i), dp_id(i + 2)});
        b.compute(dp_id(i), Op::MaxZero, {dp_id(i + 1), sum_id(i)});
    }

    std::vector<std::string> outputs;
    for (int i = 0; i < n; ++i) {
        b.compute(eq_id(i), Op::Equals, {dp_id(i), i < n - 2 ? sum_id(i) : input_id(i)});
        if (i == 0) {
            b.compute(choose_id(i), Op::And, {eq_id(i)});
        } else {
            b.compute(can_id(i), Op::Not, {choose_id(i - 1)});
            b.compute(choose_id(i), Op::And, {eq_id(i), can_id(i)});
        }
        b.compute(output_id(i), Op::Indicator, {choose_id(i)});
        outputs.push_back(output_id(i));
    }
    b.compute(kOutputId, Op::ConcatList, outputs);
    b.set_sink(kOutputId);
    return std::move(b).build();
}

std::uint64_t instance_count(int n) {
    if (n < 1 || n > kMaxLength) throw std::invalid_argument("list length must lie in 1..10");
    std::uint64_t c = 1;
    for (int i = 0; i < n; ++i) c *= 11;
    return c;
}

DpInstance instance_at(int n, std::uint64_t index) {
    if (index >= instance_count(n)) throw std::out_of_range("instance index out of range");
    DpInstance inst;
    inst.input.assign(n, 0);
    for (int i = n - 1; i >= 0; --i) {
        inst.input[i] = kMinValue + static_cast<int>(index % 11);
        index /= 11;
    }
    return inst;
}

void enumerate_instances(int n, const std::function<bool(const DpInstance&)>& visit) {
    const auto total = instance_count(n);
    for (std::uint64_t i = 0; i < total; ++i)
        if (!visit(instance_at(n, i))) return;
}

DpInstance sample_instance(int n, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> d(kMinValue, kMaxValue);
    DpInstance inst;
    for (int i = 0; i < n; ++i) inst.input.push_back(d(rng));
    return inst;
}

std::string format_list(const std::vector<int>& values) {
    std::string s = "[";
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(values[i]);
    }
    return s + "]";
}

std::string question_text(const DpInstance& inst) {
    return "Given a sequence of integers, find a subsequence with the highest sum, such that no two numbers in "
           "the subsequence are adjacent in the original sequence.\n\n"
           "Output a list with \"1\" for chosen numbers and \"2\" for unchosen ones. If multiple solutions exist, "
           "select the lexicographically smallest. input = " +
           format_list(inst.input) + ".";
}

std::string answer_text(const DpInstance& inst) { return format_list(solve_dp(inst).output); }

std::vector<int> per_position_accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
    std::vector<int> out(truth.size(), 0);
    for (std::size_t i = 0; i < truth.size() && i < predicted.size(); ++i) out[i] = predicted[i] == truth[i];
    return out;
}

}  // namespace compgraph::dp
