#include "compgraph/theory.hpp"

#include "compgraph/dp.hpp"
#include "compgraph/multiplication.hpp"
#include "compgraph/oracle.hpp"
#include "compgraph/puzzle.hpp"
#include "compgraph/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

namespace compgraph::theory {

std::string_view to_string(Mode m) {
    switch (m) {
        case Mode::Width: return "width";
        case Mode::Depth: return "depth";
        case Mode::StateTransition: return "state-transition";
        case Mode::ShiftedAddition: return "shifted-addition";
        case Mode::TaskStep: return "task-step";
    }
    return "unknown";
}

Mode mode_from_string(std::string_view s) {
    for (auto m : {Mode::Width, Mode::Depth, Mode::StateTransition, Mode::ShiftedAddition, Mode::TaskStep})
        if (to_string(m) == s) return m;
    throw std::invalid_argument("unknown simulation mode: " + std::string(s));
}

std::string_view to_string(Combiner c) {
    switch (c) {
        case Combiner::Injective: return "injective";
        case Combiner::ExactRate: return "exact-rate";
        case Combiner::ModularSum: return "modular-sum";
    }
    return "unknown";
}

Combiner combiner_from_string(std::string_view s) {
    for (auto c : {Combiner::Injective, Combiner::ExactRate, Combiner::ModularSum})
        if (to_string(c) == s) return c;
    throw std::invalid_argument("unknown combiner: " + std::string(s));
}

bool SimulationReport::all_satisfied() const {
    return std::all_of(points.begin(), points.end(), [](const Point& p) { return p.satisfied; });
}

double width_bound(double eps, double cn, int n) { return 1 - cn - std::pow(1 - eps, n) * (1 - cn); }

double depth_bound(double eps, double c, int n) {
    if (c + eps <= 0) return 0;
    const double limit = c / (c + eps);
    return 1 - std::pow(1 - eps - c, n - 1) * (1 - eps - limit) - limit;
}

double collision_rate(double alpha, double beta, int n) { return std::min(1.0, beta * std::pow(alpha, n)); }

namespace {

void check_common(const SimulationSpec& s) {
    if (s.epsilon < 0 || s.epsilon >= 1) throw std::invalid_argument("epsilon must lie in [0, 1)");
    if (s.trials == 0) throw std::invalid_argument("trials must be positive");
    if (s.ns.empty()) throw std::invalid_argument("no sizes given");
    for (int n : s.ns)
        if (n < 1) throw std::invalid_argument("sizes must be positive");
}

void check_recovery(const SimulationSpec& s) {
    if (s.c < 0 || s.c + s.epsilon >= 1) throw std::invalid_argument("need c >= 0 and c + epsilon < 1");
}

/// Runs fn(trial, rng, counters) over all trials, split into contiguous
/// blocks per thread; counters are summed, so the result does not depend on
/// the thread count.
template <class Fn>
std::vector<std::uint64_t> run_trials(const SimulationSpec& s, std::size_t width, Fn fn) {
    const unsigned threads = std::max(1u, std::min<unsigned>(s.threads, static_cast<unsigned>(s.trials)));
    std::vector<std::vector<std::uint64_t>> partial(threads, std::vector<std::uint64_t>(width, 0));
    auto work = [&](unsigned t) {
        const std::uint64_t lo = s.trials * t / threads, hi = s.trials * (t + 1) / threads;
        for (std::uint64_t k = lo; k < hi; ++k) {
            std::mt19937_64 rng(derive_seed(s.seed, k));
            fn(k, rng, partial[t]);
        }
    };
    if (threads == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
        for (auto& th : pool) th.join();
    }
    std::vector<std::uint64_t> total(width, 0);
    for (const auto& p : partial)
        for (std::size_t i = 0; i < width; ++i) total[i] += p[i];
    return total;
}

Point make_point(int n, std::uint64_t failures, std::uint64_t trials, double bound, double c_used) {
    Point p;
    p.n = n;
    p.failures = failures;
    p.empirical = static_cast<double>(failures) / static_cast<double>(trials);
    p.half_width = 3 * std::sqrt(p.empirical * (1 - p.empirical) / static_cast<double>(trials));
    p.ci_low = std::max(0.0, p.empirical - p.half_width);
    p.ci_high = std::min(1.0, p.empirical + p.half_width);
    p.bound = bound;
    p.c_used = c_used;
    p.satisfied = p.empirical >= bound - p.half_width - 1e-12;
    return p;
}

SimulationReport report_of(const SimulationSpec& s) {
    SimulationReport r;
    r.mode = s.mode;
    r.epsilon = s.epsilon;
    r.c = s.c;
    r.trials = s.trials;
    return r;
}

/// Uniform value in [0, m) other than `v`.
std::uint64_t wrong(std::uint64_t v, std::uint64_t m, std::mt19937_64& rng) {
    std::uint64_t w = std::uniform_int_distribution<std::uint64_t>(0, m - 2)(rng);
    return w >= v ? w + 1 : w;
}

/// Fixed random permutation of the domain, playing the role of g.
std::vector<std::uint64_t> random_function(std::uint64_t m, std::uint64_t seed) {
    std::vector<std::uint64_t> g(m);
    std::iota(g.begin(), g.end(), 0);
    std::mt19937_64 rng(derive_seed(seed, 0x6a09e667f3bcc908ULL));
    std::shuffle(g.begin(), g.end(), rng);
    return g;
}

}  // namespace

SimulationReport simulate_width(const SimulationSpec& s) {
    check_common(s);
    if (s.domain < 2) throw std::invalid_argument("domain must have at least two values");
    if (s.combiner == Combiner::ExactRate && (s.alpha <= 0 || s.alpha >= 1 || s.beta <= 0))
        throw std::invalid_argument("need alpha in (0, 1) and beta > 0");
    const auto g = random_function(s.domain, s.seed);
    const std::size_t K = s.ns.size();
    const int max_n = *std::max_element(s.ns.begin(), s.ns.end());
    // counters: failures per n, then erroneous tuples per n, then collisions per n
    auto counts = run_trials(s, 3 * K, [&](std::uint64_t, std::mt19937_64& rng, std::vector<std::uint64_t>& out) {
        // One sequence of noisy outputs per trial; size n uses its first n.
        std::uniform_int_distribution<std::uint64_t> pick(0, s.domain - 1);
        std::bernoulli_distribution flip(s.epsilon);
        std::vector<std::uint64_t> ys(max_n), yhs(max_n);
        for (int i = 0; i < max_n; ++i) {
            ys[i] = g[pick(rng)];
            yhs[i] = flip(rng) ? wrong(ys[i], s.domain, rng) : ys[i];
        }
        for (std::size_t k = 0; k < K; ++k) {
            const int n = s.ns[k];
            bool any_error = false;
            std::uint64_t sum_true = 0, sum_est = 0;
            for (int i = 0; i < n; ++i) {
                any_error = any_error || yhs[i] != ys[i];
                sum_true = (sum_true + ys[i]) % s.domain;
                sum_est = (sum_est + yhs[i]) % s.domain;
            }
            bool fail = false;
            switch (s.combiner) {
                case Combiner::Injective: fail = any_error; break;
                case Combiner::ExactRate:
                    fail = any_error && !std::bernoulli_distribution(collision_rate(s.alpha, s.beta, n))(rng);
                    break;
                case Combiner::ModularSum: fail = sum_true != sum_est; break;
            }
            out[k] += fail;
            out[K + k] += any_error;
            out[2 * K + k] += any_error && !fail;
        }
    });
    auto r = report_of(s);
    for (std::size_t k = 0; k < K; ++k) {
        const int n = s.ns[k];
        double cn = 0;
        if (s.combiner == Combiner::ExactRate) cn = collision_rate(s.alpha, s.beta, n);
        if (s.combiner == Combiner::ModularSum)
            cn = counts[K + k] ? static_cast<double>(counts[2 * K + k]) / static_cast<double>(counts[K + k]) : 0.0;
        r.points.push_back(make_point(n, counts[k], s.trials, width_bound(s.epsilon, cn, n), cn));
    }
    return r;
}

namespace {

/// Shared driver for the two chains: `step(correct, rng)` returns whether the
/// state after one more application is still correct.
template <class Step>
SimulationReport run_chain(const SimulationSpec& s, Step step) {
    const int max_n = *std::max_element(s.ns.begin(), s.ns.end());
    std::vector<int> slot(max_n + 1, -1);
    for (std::size_t k = 0; k < s.ns.size(); ++k) slot[s.ns[k]] = static_cast<int>(k);
    auto counts = run_trials(s, s.ns.size(), [&](std::uint64_t, std::mt19937_64& rng, std::vector<std::uint64_t>& out) {
        bool ok = true;
        for (int n = 1; n <= max_n; ++n) {
            ok = step(ok, rng);
            if (slot[n] >= 0 && !ok) ++out[slot[n]];
        }
    });
    auto r = report_of(s);
    for (std::size_t k = 0; k < s.ns.size(); ++k)
        r.points.push_back(make_point(s.ns[k], counts[k], s.trials, depth_bound(s.epsilon, s.c, s.ns[k]), s.c));
    return r;
}

}  // namespace

SimulationReport simulate_depth(const SimulationSpec& s) {
    check_common(s);
    check_recovery(s);
    if (s.domain < 3) throw std::invalid_argument("depth mode needs a domain of at least three values");
    const auto g = random_function(s.domain, s.seed);
    // Value-level iteration: the chain carries the true x and the estimate.
    struct State {
        std::uint64_t x = 0, xh = 0;
    };
    const int max_n = *std::max_element(s.ns.begin(), s.ns.end());
    std::vector<int> slot(max_n + 1, -1);
    for (std::size_t k = 0; k < s.ns.size(); ++k) slot[s.ns[k]] = static_cast<int>(k);
    auto counts = run_trials(s, s.ns.size(), [&](std::uint64_t, std::mt19937_64& rng, std::vector<std::uint64_t>& out) {
        std::bernoulli_distribution flip(s.epsilon), recover(s.c);
        State st;
        st.x = st.xh = std::uniform_int_distribution<std::uint64_t>(0, s.domain - 1)(rng);
        for (int n = 1; n <= max_n; ++n) {
            const auto y = g[st.x];
            if (st.xh == st.x)
                st.xh = flip(rng) ? wrong(y, s.domain, rng) : y;
            else
                st.xh = recover(rng) ? y : g[st.xh];  // g is a bijection, so g[xh] != y
            st.x = y;
            if (slot[n] >= 0 && st.xh != st.x) ++out[slot[n]];
        }
    });
    auto r = report_of(s);
    for (std::size_t k = 0; k < s.ns.size(); ++k)
        r.points.push_back(make_point(s.ns[k], counts[k], s.trials, depth_bound(s.epsilon, s.c, s.ns[k]), s.c));
    return r;
}

SimulationReport simulate_state_transition(const SimulationSpec& s) {
    check_common(s);
    check_recovery(s);
    return run_chain(s, [&](bool ok, std::mt19937_64& rng) {
        const double u = std::uniform_real_distribution<double>(0, 1)(rng);
        return ok ? u >= s.epsilon : u < s.c;
    });
}

SimulationReport simulate_shifted_addition(const SimulationSpec& s) {
    check_common(s);
    if (s.digits < 1 || s.digits > 9) throw std::invalid_argument("digits per summand must lie in 1..9");
    std::int64_t modulus = 1;
    for (int i = 0; i < s.digits; ++i) modulus *= 10;
    const std::size_t K = s.ns.size();
    auto counts = run_trials(s, K, [&](std::uint64_t, std::mt19937_64& rng, std::vector<std::uint64_t>& out) {
        std::uniform_int_distribution<std::int64_t> pick(0, modulus - 1);
        std::bernoulli_distribution flip(s.epsilon);
        for (std::size_t k = 0; k < K; ++k) {
            // Summand i is shifted by i places; the estimate differs from the
            // truth iff sum_i d_i 10^i != 0, checked digit by digit.
            std::int64_t carry = 0;
            bool differs = false;
            for (int i = 0; i < s.ns[k]; ++i) {
                const auto a = pick(rng);
                std::int64_t d = 0;
                if (flip(rng)) d = static_cast<std::int64_t>(wrong(a, modulus, rng)) - a;
                if (differs) continue;
                const auto t = carry + d;
                differs = t % 10 != 0;
                carry = t / 10;
            }
            differs = differs || carry != 0;
            out[k] += differs;
        }
    });
    auto r = report_of(s);
    for (std::size_t k = 0; k < K; ++k) {
        const int n = s.ns[k];
        const double cn = collision_rate(0.1, static_cast<double>(modulus), n);
        r.points.push_back(make_point(n, counts[k], s.trials, width_bound(s.epsilon, cn, n), cn));
    }
    return r;
}

namespace {

struct TaskCase {
    ComputationGraph graph;
    std::optional<puzzle::PuzzleInstance> inst;
    int steps = 0;
};

/// m-digit times 1-digit operands. Sampled here because the dataset
/// specs stop at five digits while the step simulation goes further.
mult::MultInstance sample_m_by_1(int m, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> lead(1, 9), digit(0, 9);
    BigInt x = lead(rng);
    for (int i = 1; i < m; ++i) x = x * 10 + digit(rng);
    return {x, BigInt(lead(rng))};
}

TaskCase task_case(TaskKind task, int n, std::mt19937_64& rng, const std::vector<TaskCase>* pool) {
    switch (task) {
        case TaskKind::Multiplication:
            return {mult::build_graph(sample_m_by_1(n, rng)), std::nullopt, n};
        case TaskKind::DynamicProgramming:
            return {dp::build_graph(dp::sample_instance(n, rng)), std::nullopt, std::max(1, n - 2)};
        case TaskKind::Puzzle:
            return (*pool)[std::uniform_int_distribution<std::size_t>(0, pool->size() - 1)(rng)];
    }
    throw std::invalid_argument("unsupported task");
}

}  // namespace

SimulationReport simulate_task_step(const SimulationSpec& s) {
    check_common(s);
    for (int n : s.ns) {
        if (s.task == TaskKind::Multiplication && n > 12) throw std::invalid_argument("multiplication size must be <= 12");
        if (s.task == TaskKind::DynamicProgramming && n > 30) throw std::invalid_argument("dp size must be <= 30");
        if (s.task == TaskKind::Puzzle && (n < 2 || n > 4)) throw std::invalid_argument("puzzle size must lie in 2..4");
    }
    // Puzzles are expensive to generate, so each size draws from a fixed pool.
    std::map<int, std::vector<TaskCase>> pools;
    if (s.task == TaskKind::Puzzle)
        for (int n : s.ns) {
            auto& pool = pools[n];
            for (std::uint64_t i = 0; i < 32; ++i) {
                puzzle::PuzzleSpec ps;
                ps.K = ps.M = n;
                ps.seed = derive_seed(s.seed ^ 0x70757a7aULL, static_cast<std::uint64_t>(n) * 1000 + i);
                auto inst = puzzle::generate_puzzle(ps);
                const int steps = static_cast<int>(puzzle::greedy_trace(inst).size());
                pool.push_back({puzzle::greedy_solve(inst), inst, steps});
            }
        }
    const std::size_t K = s.ns.size();
    // failures, corrupted runs, corrupted runs with a correct sink
    auto counts = run_trials(s, 3 * K, [&](std::uint64_t, std::mt19937_64& rng, std::vector<std::uint64_t>& out) {
        for (std::size_t k = 0; k < K; ++k) {
            const auto* pool = s.task == TaskKind::Puzzle ? &pools.at(s.ns[k]) : nullptr;
            auto tc = task_case(s.task, s.ns[k], rng, pool);
            const auto* inst = tc.inst ? &*tc.inst : nullptr;
            auto trace = oracle::noisy_trace(tc.graph, {s.epsilon, 0.0, false}, rng(), inst);
            bool corrupted = false;
            for (const auto& node : tc.graph.nodes()) {
                const auto* pn = trace.find(node.id);
                if (!pn || !pn->value || !(*pn->value == node.value)) corrupted = true;
            }
            const auto* sink = trace.find(tc.graph.sink());
            const bool sink_ok = sink && sink->value && *sink->value == tc.graph.node(tc.graph.sink()).value;
            out[k] += !sink_ok;
            out[K + k] += corrupted;
            out[2 * K + k] += corrupted && sink_ok;
        }
    });
    auto r = report_of(s);
    for (std::size_t k = 0; k < K; ++k) {
        const int n = s.ns[k];
        int steps = 0;
        if (s.task == TaskKind::Multiplication) steps = n;
        if (s.task == TaskKind::DynamicProgramming) steps = std::max(1, n - 2);
        if (s.task == TaskKind::Puzzle) {
            steps = std::numeric_limits<int>::max();
            for (const auto& tc : pools.at(n)) steps = std::min(steps, tc.steps);
        }
        const double ch = counts[K + k] ? static_cast<double>(counts[2 * K + k]) / static_cast<double>(counts[K + k]) : 0.0;
        r.points.push_back(make_point(n, counts[k], s.trials, width_bound(s.epsilon, ch, steps), ch));
    }
    return r;
}

SimulationReport simulate(const SimulationSpec& s) {
    switch (s.mode) {
        case Mode::Width: return simulate_width(s);
        case Mode::Depth: return simulate_depth(s);
        case Mode::StateTransition: return simulate_state_transition(s);
        case Mode::ShiftedAddition: return simulate_shifted_addition(s);
        case Mode::TaskStep: return simulate_task_step(s);
    }
    throw std::invalid_argument("unknown mode");
}

bool recursion_holds(const SimulationReport& r, double eps, double c) {
    // s_1 <= 1 - eps and s_n <= (1 - eps - c) s_{n-1} + c, each within 3 sigma.
    for (std::size_t k = 0; k < r.points.size(); ++k) {
        const auto& p = r.points[k];
        const double sn = 1 - p.empirical;
        if (p.n == 1 && sn > 1 - eps + p.half_width + 1e-12) return false;
        if (k > 0 && r.points[k - 1].n == p.n - 1) {
            const auto& q = r.points[k - 1];
            const double prev = 1 - q.empirical;
            if (sn > (1 - eps - c) * prev + c + p.half_width + q.half_width + 1e-12) return false;
        }
    }
    return true;
}

double log_linear_r2(const SimulationReport& r) {
    std::vector<double> xs, ys;
    for (const auto& p : r.points)
        if (p.empirical < 1) {
            xs.push_back(p.n);
            ys.push_back(std::log(1 - p.empirical));
        }
    if (xs.size() < 3) return 1.0;
    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n, my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (syy == 0) return 1.0;
    return sxy * sxy / (sxx * syy);
}

CollisionReport empirical_collision_check(const SimulationSpec& s) {
    if (s.epsilon < 0 || s.epsilon >= 1) throw std::invalid_argument("epsilon must lie in [0, 1)");
    if (s.domain < 2) throw std::invalid_argument("domain must have at least two values");
    if (s.trials == 0) throw std::invalid_argument("trials must be positive");
    const auto g = random_function(s.domain, s.seed);
    auto counts = run_trials(s, 1, [&](std::uint64_t, std::mt19937_64& rng, std::vector<std::uint64_t>& out) {
        std::uniform_int_distribution<std::uint64_t> pick(0, s.domain - 1);
        const auto x = pick(rng);
        const auto xh = wrong(x, s.domain, rng);
        // With probability eps the output is uniform over Im(g); otherwise g(xh).
        const auto y = std::bernoulli_distribution(s.epsilon)(rng) ? g[pick(rng)] : g[xh];
        out[0] += y == g[x];
    });
    CollisionReport cr;
    cr.trials = s.trials;
    cr.measured = static_cast<double>(counts[0]) / static_cast<double>(s.trials);
    cr.expected = s.epsilon / static_cast<double>(s.domain);
    const double p = cr.expected;
    cr.half_width = 3 * std::sqrt(p * (1 - p) / static_cast<double>(s.trials));
    cr.satisfied = std::abs(cr.measured - cr.expected) <= std::max(cr.half_width, 1e-12);
    return cr;
}

std::string csv_header() { return "mode,n,epsilon,c,trials,empirical,ci_low,ci_high,bound,satisfied\n"; }

std::string to_csv_rows(const SimulationReport& r) {
    std::ostringstream out;
    out.precision(6);
    out << std::fixed;
    for (const auto& p : r.points)
        out << to_string(r.mode) << ',' << p.n << ',' << r.epsilon << ',' << p.c_used << ',' << r.trials << ','
            << p.empirical << ',' << p.ci_low << ',' << p.ci_high << ',' << p.bound << ','
            << (p.satisfied ? "true" : "false") << '\n';
    return out.str();
}

}  // namespace compgraph::theory
