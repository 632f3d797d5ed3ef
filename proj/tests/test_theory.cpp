#include <doctest.h>

#include "compgraph/theory.hpp"

#include <cmath>
#include <numeric>

using namespace compgraph;
using namespace compgraph::theory;

namespace {

std::vector<int> range(int lo, int hi) {
    std::vector<int> v(hi - lo + 1);
    std::iota(v.begin(), v.end(), lo);
    return v;
}

SimulationSpec spec(Mode m, std::vector<int> ns, double eps, double c = 0, std::uint64_t trials = 100'000) {
    SimulationSpec s;
    s.mode = m;
    s.ns = std::move(ns);
    s.epsilon = eps;
    s.c = c;
    s.trials = trials;
    s.seed = 42;
    return s;
}

// Closed-form failure of the exact-c chain, computed by iterating the recursion.
double chain_failure(double eps, double c, int n) {
    double s = 1 - eps;
    for (int k = 2; k <= n; ++k) s = (1 - eps - c) * s + c;
    return 1 - s;
}

}  // namespace

TEST_CASE("bound formulas") {
    CHECK(width_bound(0.1, 0, 1) == doctest::Approx(0.1));
    CHECK(width_bound(0.05, 0, 40) == doctest::Approx(1 - std::pow(0.95, 40)));
    CHECK(depth_bound(0.1, 0, 5) == doctest::Approx(1 - std::pow(0.9, 5)));
    for (int n : {1, 2, 7, 50}) CHECK(depth_bound(0.1, 0.03, n) == doctest::Approx(chain_failure(0.1, 0.03, n)));
    CHECK(depth_bound(0.1, 0.01, 100000) == doctest::Approx(1 - 0.01 / 0.11));
    CHECK(collision_rate(0.1, 1, 2) == doctest::Approx(0.01));
    CHECK(collision_rate(0.1, 1000, 2) == 1.0);
}

TEST_CASE("width mode") {
    auto zero = simulate_width(spec(Mode::Width, range(1, 10), 0.0, 0, 2000));
    for (const auto& p : zero.points) CHECK(p.empirical == 0);

    auto one = simulate_width(spec(Mode::Width, {1}, 0.2));
    CHECK(std::abs(one.points[0].empirical - 0.2) <= one.points[0].half_width);

    auto inj = simulate_width(spec(Mode::Width, range(1, 40), 0.05));
    CHECK(inj.all_satisfied());
    for (const auto& p : inj.points)
        CHECK(std::abs(p.empirical - (1 - std::pow(0.95, p.n))) <= 4.0 / 3 * p.half_width + 1e-9);
    CHECK(inj.points.back().empirical > 0.85);
    CHECK(log_linear_r2(inj) >= 0.98);

    auto s = spec(Mode::Width, range(1, 8), 0.1);
    s.combiner = Combiner::ExactRate;
    s.alpha = 0.5;
    auto exact = simulate_width(s);
    CHECK(exact.all_satisfied());
    for (const auto& p : exact.points) CHECK(p.c_used == doctest::Approx(collision_rate(0.5, 1, p.n)));

    s.combiner = Combiner::ModularSum;
    s.domain = 3;
    auto mod = simulate_width(s);
    CHECK(mod.all_satisfied());
    CHECK(mod.points.back().c_used > 0.1);  // collisions are frequent in a 3-value codomain

    auto bad = spec(Mode::Width, {1}, 1.5);
    CHECK_THROWS(simulate_width(bad));
}

TEST_CASE("depth mode") {
    auto geo = simulate_depth(spec(Mode::Depth, range(1, 30), 0.1));
    CHECK(geo.all_satisfied());
    for (const auto& p : geo.points) CHECK(std::abs((1 - p.empirical) - std::pow(0.9, p.n)) <= 4.0 / 3 * p.half_width + 1e-9);
    CHECK(log_linear_r2(geo) >= 0.98);
    CHECK(recursion_holds(geo, 0.1, 0));

    auto rec = simulate_depth(spec(Mode::Depth, {1, 2, 3, 10, 50, 100, 200}, 0.1, 0.01));
    CHECK(rec.all_satisfied());
    CHECK(std::abs(rec.points[0].empirical - 0.1) <= rec.points[0].half_width);
    const auto& last = rec.points.back();
    CHECK(last.empirical >= 1 - 0.01 / 0.11 - last.half_width);
    // Exact recovery makes the recursion an equality.
    for (const auto& p : rec.points) CHECK(std::abs(p.empirical - chain_failure(0.1, 0.01, p.n)) <= 4.0 / 3 * p.half_width + 1e-9);

    CHECK_THROWS(simulate_depth(spec(Mode::Depth, {1}, 0.5, 0.5)));
}

TEST_CASE("state transition chain") {
    auto geo = simulate_state_transition(spec(Mode::StateTransition, range(1, 20), 0.2));
    for (const auto& p : geo.points) CHECK(std::abs(p.empirical - (1 - std::pow(0.8, p.n))) <= 4.0 / 3 * p.half_width + 1e-9);
    CHECK(log_linear_r2(geo) >= 0.98);

    auto half = simulate_state_transition(spec(Mode::StateTransition, {100, 300}, 0.1, 0.1));
    for (const auto& p : half.points) CHECK(std::abs(p.empirical - 0.5) <= p.half_width);

    // Stationary invalidity of the two-state chain.
    for (auto [e, c] : {std::pair{0.05, 0.2}, std::pair{0.3, 0.1}}) {
        auto r = simulate_state_transition(spec(Mode::StateTransition, {400}, e, c, 50'000));
        CHECK(std::abs(r.points[0].empirical - e / (e + c)) <= r.points[0].half_width);
        CHECK(r.all_satisfied());
        CHECK(recursion_holds(r, e, c));
    }
}

TEST_CASE("shifted addition") {
    for (int m : {1, 2}) {
        auto s = spec(Mode::ShiftedAddition, range(1, 12), 0.05, 0, 50'000);
        s.digits = m;
        auto r = simulate_shifted_addition(s);
        CHECK(r.all_satisfied());
        CHECK(r.points[0].empirical == doctest::Approx(0.05).epsilon(0.2));
    }
}

TEST_CASE("collision check") {
    auto s = spec(Mode::Width, {1}, 0.1, 0, 200'000);
    s.domain = 10;
    auto r10 = empirical_collision_check(s);
    CHECK(r10.expected == doctest::Approx(0.01));
    CHECK(r10.satisfied);
    s.domain = 2;
    auto r2 = empirical_collision_check(s);
    CHECK(r2.expected == doctest::Approx(0.05));
    CHECK(r2.satisfied);
    s.epsilon = 0;
    CHECK(empirical_collision_check(s).measured == 0);
}

TEST_CASE("task step") {
    auto s = spec(Mode::TaskStep, range(1, 6), 0.0, 0, 300);
    s.task = TaskKind::Multiplication;
    for (const auto& p : simulate_task_step(s).points) CHECK(p.empirical == 0);

    s.epsilon = 0.05;
    s.trials = 3000;
    auto m = simulate_task_step(s);
    CHECK(m.all_satisfied());

    auto d = spec(Mode::TaskStep, range(3, 10), 0.05, 0, 3000);
    d.task = TaskKind::DynamicProgramming;
    auto dr = simulate_task_step(d);
    CHECK(dr.all_satisfied());
    for (std::size_t k = 1; k < dr.points.size(); ++k)
        CHECK(dr.points[k].empirical + dr.points[k].half_width + dr.points[k - 1].half_width >=
              dr.points[k - 1].empirical);

    auto pz = spec(Mode::TaskStep, {2, 3}, 0.05, 0, 300);
    pz.task = TaskKind::Puzzle;
    CHECK(simulate_task_step(pz).all_satisfied());
    pz.ns = {9};
    CHECK_THROWS(simulate_task_step(pz));
}

TEST_CASE("determinism across thread counts") {
    for (auto mode : {Mode::Width, Mode::Depth, Mode::StateTransition}) {
        auto s = spec(mode, range(1, 10), 0.1, 0.02, 20'000);
        auto a = simulate(s);
        s.threads = 8;
        auto b = simulate(s);
        CHECK(to_csv_rows(a) == to_csv_rows(b));
    }
    auto t = spec(Mode::TaskStep, {2, 3}, 0.1, 0, 500);
    auto a = simulate(t);
    t.threads = 4;
    CHECK(to_csv_rows(a) == to_csv_rows(simulate(t)));
    CHECK(csv_header().rfind("mode,n,epsilon", 0) == 0);
    CHECK(mode_from_string("state-transition") == Mode::StateTransition);
    CHECK_THROWS(mode_from_string("nope"));
}
