// Monte Carlo checks of the error-compounding bounds: n parallel noisy
// applications combined by h_n (width), n repeated noisy applications
// (depth), the validity-bit Markov chain, shifted addition, and noisy runs of
// the real task step functions.
//
// Every point is compared against the stated lower bound on the failure
// probability, allowing three binomial standard errors.
#pragma once

#include "compgraph/graph.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace compgraph::theory {

enum class Mode { Width, Depth, StateTransition, ShiftedAddition, TaskStep };
std::string_view to_string(Mode m);
Mode mode_from_string(std::string_view s);

/// How h_n merges n outputs in width mode.
enum class Combiner {
    Injective,   // c_n = 0
    ExactRate,   // an erroneous tuple collides with the truth with probability c_n = min(1, beta * alpha^n)
    ModularSum,  // sum modulo |Im(g)|; collisions emerge and are measured
};
std::string_view to_string(Combiner c);
Combiner combiner_from_string(std::string_view s);

struct SimulationSpec {
    Mode mode = Mode::Width;
    std::vector<int> ns{1};
    double epsilon = 0.1;
    double c = 0.0;  // depth and state-transition modes
    Combiner combiner = Combiner::Injective;
    double alpha = 0.1;
    double beta = 1.0;
    std::uint64_t domain = 10;  // |Im(g)|
    int digits = 1;             // shifted addition: m, digits per summand
    TaskKind task = TaskKind::Multiplication;  // task-step mode
    std::uint64_t trials = 100'000;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

struct Point {
    int n = 0;
    std::uint64_t failures = 0;
    double empirical = 0;
    double half_width = 0;  // 3 binomial standard errors
    double ci_low = 0, ci_high = 0;
    double bound = 0;
    double c_used = 0;  // collision or recovery rate entering the bound
    bool satisfied = false;
};

struct SimulationReport {
    Mode mode = Mode::Width;
    double epsilon = 0, c = 0;
    std::uint64_t trials = 0;
    std::vector<Point> points;

    bool all_satisfied() const;
};

/// Lower bound for width mode: 1 - c_n - (1 - eps)^n (1 - c_n).
double width_bound(double eps, double cn, int n);
/// Lower bound for depth mode: 1 - b^(n-1) (1 - eps - c/(c+eps)) - c/(c+eps), b = 1 - eps - c.
double depth_bound(double eps, double c, int n);
/// min(1, beta * alpha^n).
double collision_rate(double alpha, double beta, int n);

SimulationReport simulate_width(const SimulationSpec& spec);
SimulationReport simulate_depth(const SimulationSpec& spec);
SimulationReport simulate_state_transition(const SimulationSpec& spec);
/// Shifted addition of n summands with `digits` digits each, using the
/// collision rate min(1, 10^digits * 0.1^n).
SimulationReport simulate_shifted_addition(const SimulationSpec& spec);
/// Noisy runs of the real graphs. ns are sizes: m for m x 1 multiplication,
/// list length for DP, houses (= attributes) for puzzles. The bound uses the
/// task's step count and the measured collision rate.
SimulationReport simulate_task_step(const SimulationSpec& spec);
SimulationReport simulate(const SimulationSpec& spec);

/// Success probabilities s_n from a depth or state-transition report.
bool recursion_holds(const SimulationReport& report, double eps, double c);

/// R^2 of log(1 - failure) against n; for c = 0 regimes.
double log_linear_r2(const SimulationReport& report);

struct CollisionReport {
    double measured = 0;
    double expected = 0;  // eps / |Im(g)|
    double half_width = 0;
    std::uint64_t trials = 0;
    bool satisfied = false;
};

/// Wrong-input estimator whose errors land uniformly on Im(g): measures how
/// often it still returns the true output.
CollisionReport empirical_collision_check(const SimulationSpec& spec);

/// CSV rows: mode,n,epsilon,c,trials,empirical,ci_low,ci_high,bound,satisfied
std::string csv_header();
std::string to_csv_rows(const SimulationReport& report);

}  // namespace compgraph::theory
