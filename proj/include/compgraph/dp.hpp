// Maximum-sum non-adjacent subsequence over lists with entries in [-5, 5].
//
// Node addresses (n = list length, positions 0-based):
//   input[i]    list element
//   dp[i]       best sum from position i onwards
//   sum[i]      input[i] + dp[i+2]                         (i <= n-3)
//   eq[i]       dp[i] == sum[i]   (dp[i] == input[i] for the last two)
//   can[i]      not choose[i-1]                            (i >= 1)
//   choose[i]   eq[i] and can[i]
//   output[i]   1 when chosen, 2 otherwise
//   output      the selection list
#pragma once

#include "compgraph/graph.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace compgraph::dp {

inline constexpr int kMinValue = -5;
inline constexpr int kMaxValue = 5;
inline constexpr int kMaxLength = 10;

struct DpInstance {
    std::vector<int> input;
};

struct DpSolution {
    std::vector<int> dp;
    std::vector<int> output;  // 1 chosen, 2 not chosen
};

void check_instance(const DpInstance& inst);

/// Listing-style solver: dp recursion, then the fixed reconstruction pass.
DpSolution solve_dp(const DpInstance& inst);
/// Exhaustive oracle over all subsets; lexicographically smallest optimum.
std::vector<int> brute_force_dp(const DpInstance& inst);

ComputationGraph build_graph(const DpInstance& inst);

std::string input_id(int i);
std::string dp_id(int i);
std::string sum_id(int i);
std::string eq_id(int i);
std::string can_id(int i);
std::string choose_id(int i);
std::string output_id(int i);
inline const char* kOutputId = "output";

/// 11^n.
std::uint64_t instance_count(int n);
DpInstance instance_at(int n, std::uint64_t index);
void enumerate_instances(int n, const std::function<bool(const DpInstance&)>& visit);
DpInstance sample_instance(int n, std::mt19937_64& rng);

/// "[3, 2, 1, 5, 2]"
std::string format_list(const std::vector<int>& values);
std::string question_text(const DpInstance& inst);
std::string answer_text(const DpInstance& inst);

/// Elementwise equality; positions past the shorter list score 0. The result
/// has the length of the truth.
std::vector<int> per_position_accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

}  // namespace compgraph::dp
