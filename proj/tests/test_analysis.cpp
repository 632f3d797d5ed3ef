#include <doctest.h>

#include "compgraph/analysis.hpp"
#include "compgraph/dp.hpp"
#include "compgraph/multiplication.hpp"
#include "compgraph/oracle.hpp"
#include "fixtures.hpp"

#include <cmath>
#include <map>
#include <random>

using namespace compgraph;
using namespace compgraph::analysis;
namespace sp = compgraph::scratchpad;

namespace {

// Independent plug-in estimate: conditional entropy by explicit grouping, log2.
double oracle_ig(const std::vector<std::pair<std::vector<int>, int>>& rows) {
    std::map<int, double> py;
    std::map<std::vector<int>, std::map<int, double>> pxy;
    for (const auto& [x, y] : rows) {
        py[y] += 1;
        pxy[x][y] += 1;
    }
    const double N = static_cast<double>(rows.size());
    double hy = 0;
    for (auto [_, c] : py) hy -= c / N * std::log2(c / N);
    double hyx = 0;
    for (const auto& [x, ys] : pxy) {
        double nx = 0;
        for (auto [_, c] : ys) nx += c;
        for (auto [_, c] : ys) hyx -= c / N * std::log2(c / nx);
    }
    return hy == 0 ? 1.0 : (hy - hyx) / hy;
}

std::vector<int> padded_digits(const BigInt& v, int width) {
    auto d = mult::digits_of(v);
    std::vector<int> out(width - d.size(), 0);
    out.insert(out.end(), d.begin(), d.end());
    return out;
}

struct Case {
    ComputationGraph g;
    std::optional<puzzle::PuzzleInstance> inst;
    const puzzle::PuzzleInstance* ip() const { return inst ? &*inst : nullptr; }
};

Case random_case(int task, std::mt19937_64& rng) {
    Case c;
    if (task == 0) {
        c.g = mult::build_graph(mult::sample_instance({1 + int(rng() % 4), 1 + int(rng() % 4)}, rng));
    } else if (task == 1) {
        c.g = dp::build_graph(dp::sample_instance(2 + int(rng() % 7), rng));
    } else {
        puzzle::PuzzleSpec spec;
        spec.K = 2 + int(rng() % 3);
        spec.M = 2 + int(rng() % 2);
        spec.seed = rng();
        c.inst = puzzle::generate_puzzle(spec);
        c.g = puzzle::greedy_solve(*c.inst);
    }
    return c;
}

NodeClassification classify_text(const Case& c, const std::string& text) {
    auto p = sp::parse(text, c.g, c.ip());
    auto eval = oracle::evaluator_for(c.g, c.ip());
    return classify_nodes(c.g, p, &eval);
}

}  // namespace

TEST_CASE("relative information gain, multiplication") {
    TaskDistribution d22({TaskKind::Multiplication, 2, 2});
    CHECK(d22.size() == 8100);
    CHECK(d22.relative_ig({"x2"}, "z4").value == doctest::Approx(0.223).epsilon(0.0015));
    CHECK(d22.relative_ig({"x2", "y2"}, "z4").value == doctest::Approx(1.0));
    CHECK(d22.relative_ig({"x1"}, "z1").value == doctest::Approx(0.198).epsilon(0.003));
    CHECK(d22.relative_ig({"x1", "y1"}, "z1").value == doctest::Approx(0.788).epsilon(0.0015));

    // Independent grouping oracle over the same enumeration.
    std::vector<std::pair<std::vector<int>, int>> rows;
    mult::enumerate_instances({2, 2}, [&](const mult::MultInstance& m) {
        auto z = padded_digits(m.product(), 4);
        rows.push_back({{mult::digits_of(m.x)[0], mult::digits_of(m.y)[1]}, z[1]});
        return true;
    });
    CHECK(d22.relative_ig({"x1", "y2"}, "z2").value == doctest::Approx(oracle_ig(rows)).epsilon(1e-9));

    // Symmetry of x and y, monotonicity, all inputs.
    CHECK(d22.relative_ig({"x1"}, "z2").value == doctest::Approx(d22.relative_ig({"y1"}, "z2").value));
    for (const auto& y : d22.output_labels()) {
        double prev = 0;
        std::vector<std::string> X;
        for (const auto& x : d22.input_labels()) {
            X.push_back(x);
            double v = d22.relative_ig(X, y).value;
            CHECK(v >= prev - 1e-12);
            CHECK(v <= 1.0);
            prev = v;
        }
        CHECK(prev == doctest::Approx(1.0));
    }
    // Any log base gives the same ratio.
    CHECK(d22.relative_ig({"x2"}, "z3", 10.0).value == doctest::Approx(d22.relative_ig({"x2"}, "z3", 2.0).value));
    CHECK_THROWS(d22.relative_ig({"w1"}, "z1"));
}

TEST_CASE("relative information gain, DP") {
    TaskDistribution d2({TaskKind::DynamicProgramming, 0, 0, 2});
    CHECK(d2.relative_ig({"a1"}, "o1").value == doctest::Approx(0.64).epsilon(0.01));
    CHECK(d2.relative_ig({"a1"}, "o2").value == doctest::Approx(0.15).epsilon(0.03));
    TaskDistribution d3({TaskKind::DynamicProgramming, 0, 0, 3});
    CHECK(d3.relative_ig({"a1"}, "o1").value == doctest::Approx(0.71).epsilon(0.01));

    std::vector<std::pair<std::vector<int>, int>> rows;
    dp::enumerate_instances(3, [&](const dp::DpInstance& inst) {
        rows.push_back({{inst.input[1], inst.input[2]}, dp::solve_dp(inst).output[0]});
        return true;
    });
    CHECK(d3.relative_ig({"a2", "a3"}, "o1").value == doctest::Approx(oracle_ig(rows)).epsilon(1e-9));
}

TEST_CASE("relative information gain edge cases") {
    DistributionSpec one{TaskKind::Multiplication, 2, 2, 0, false, 1, 3};
    TaskDistribution d(one);
    CHECK(d.relative_ig({"x1"}, "z1").value == 1.0);  // constant output

    DistributionSpec sampled{TaskKind::Multiplication, 2, 2, 0, false, 200'000, 5};
    auto r = TaskDistribution(sampled).relative_ig({"x2"}, "z4");
    CHECK(r.ci_half_width > 0);
    CHECK(std::abs(r.value - 0.223) < 0.01);

    CHECK_THROWS(TaskDistribution({TaskKind::Multiplication, 4, 4}));
    CHECK_THROWS(TaskDistribution({TaskKind::Puzzle}));
}

TEST_CASE("classification of the rendered truth") {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 60; ++t) {
        auto c = random_case(t % 3, rng);
        auto cls = classify_text(c, sp::render(c.g, c.ip()));
        CHECK(cls.counts[0] == c.g.size());
        CHECK(cls.answer_correct);
        CHECK_FALSE(cls.has_error());
    }
}

TEST_CASE("classification of injected errors") {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 300; ++t) {
        auto c = random_case(t % 3, rng);
        const bool local = (t / 3) % 2 == 0;
        auto inj = local ? oracle::inject_local(c.g, rng, c.ip()) : oracle::inject_restoration(c.g, rng, c.ip());
        if (inj.node.empty()) continue;
        auto cls = classify_text(c, sp::render_trace(c.g, inj.trace, c.ip()));
        const auto* nc = cls.find(inj.node);
        REQUIRE(nc);
        CHECK_MESSAGE(nc->category == (local ? Category::LocalError : Category::RestorationError), inj.node);

        const auto layers = layer_numbers(c.g);
        for (const auto& n : cls.nodes) {
            const auto& claimed = *inj.trace.find(n.id)->value;
            if (n.id != inj.node && claimed != c.g.node(n.id).value)
                CHECK_MESSAGE(n.category == Category::PropagationError, n.id);
            // Nothing upstream of the injection is touched.
            if (n.category == Category::FullyCorrect) CHECK(n.value_correct);
        }
    }
}

TEST_CASE("classification rules on hand-made predictions") {
    auto g = mult::build_graph({35, 90});
    auto trace = sp::truth_trace(g);
    trace.nodes[mult::digitmult_id(0, 1)].value = make_int(46);
    auto cls = classify_nodes(g, trace);
    CHECK(cls.find(mult::digitmult_id(0, 1))->category == Category::LocalError);
    // digit keeps the true 5 although 46 mod 10 = 6
    CHECK(cls.find(mult::digit_id(0, 1))->category == Category::RestorationError);
    // floor(46/10) is still 4: right value, right computation, wrong lineage.
    const auto* carry = cls.find(mult::carry_id(0, 1));
    CHECK(carry->value_correct);
    CHECK(carry->computation_correct);
    CHECK(carry->category == Category::PropagationError);
    CHECK(cls.find(mult::digitmult_id(0, 0))->category == Category::FullyCorrect);

    // Correct value stated as the result of a wrong restatement.
    auto restored = sp::truth_trace(g);
    restored.nodes[mult::digitmult_id(0, 1)].written_parents = {make_digit(5), make_digit(8)};
    auto c1 = classify_nodes(g, restored);
    CHECK(c1.find(mult::digitmult_id(0, 1))->category == Category::RestorationError);
    CHECK(c1.find(mult::digit_id(0, 1))->category == Category::PropagationError);

    auto partial = sp::truth_trace(g);
    partial.nodes[mult::partial_id(0)].present = false;
    auto c2 = classify_nodes(g, partial);
    CHECK(c2.find(mult::partial_id(0))->category == Category::Absent);
    // an absent argument cannot support the stated value
    CHECK(c2.find(mult::kProductId)->category == Category::RestorationError);
    CHECK(c2.counts[static_cast<int>(Category::Absent)] == 1);

    auto bad = sp::truth_trace(g);
    bad.nodes["nowhere"];
    CHECK_THROWS_AS(classify_nodes(g, bad), GraphError);
    bad = sp::truth_trace(g);
    bad.task = TaskKind::Puzzle;
    CHECK_THROWS_AS(classify_nodes(g, bad), GraphError);
}

TEST_CASE("fully-correct closure and layer ratios") {
    std::mt19937_64 rng(3);
    std::vector<NodeClassification> corpus;
    for (int t = 0; t < 90; ++t) {
        auto c = random_case(t % 3, rng);
        auto text = oracle::noisy_scratchpad(c.g, {0.1, 0.01}, rng(), c.ip());
        auto cls = classify_text(c, text);
        for (std::size_t i = 0; i < c.g.size(); ++i)
            if (cls.nodes[i].category == Category::FullyCorrect)
                for (auto p : c.g.parent_indices(i)) CHECK(cls.nodes[p].category == Category::FullyCorrect);
        corpus.push_back(cls);
    }
    for (const auto& r : layer_error_ratios(corpus)) {
        double sum = 0;
        for (double x : r.ratio) sum += x;
        if (r.present) CHECK(sum == doctest::Approx(1.0));
    }
    CHECK_THROWS(layer_error_ratios({}));
}

TEST_CASE("errors injected at one layer") {
    // Corrupt only layer-2 nodes of 2x2 products whose parents are correct.
    std::mt19937_64 rng(4);
    std::vector<NodeClassification> corpus;
    for (int t = 0; t < 50; ++t) {
        auto g = mult::build_graph(mult::sample_instance({2, 2}, rng));
        auto layers = layer_numbers(g);
        auto trace = sp::truth_trace(g);
        for (const auto& n : g.nodes())
            if (layers[n.id] == 2 && sp::printed_explicitly(g, trace, n.id))
                trace.nodes[n.id].value = oracle::random_wrong_value(g, n.id, n.value, rng);
        auto cls = classify_nodes(g, trace);
        corpus.push_back(cls);
    }
    for (const auto& r : layer_error_ratios(corpus)) {
        if (r.layer < 2) CHECK(r.ratio[0] == 1.0);
        if (r.layer == 2) CHECK(r.ratio[1] + r.ratio[0] == doctest::Approx(1.0));
        if (r.layer == 2) CHECK(r.ratio[1] > 0);
    }
}

TEST_CASE("noisy corpora decay with depth") {
    std::mt19937_64 rng(5);
    std::vector<NodeClassification> corpus;
    for (int t = 0; t < 400; ++t) {
        auto g = mult::build_graph(mult::sample_instance({3, 3}, rng));
        corpus.push_back(classify_nodes(g, sp::parse(oracle::noisy_scratchpad(g, {0.1, 0.0}, rng()), g)));
    }
    auto ratios = layer_error_ratios(corpus);
    for (std::size_t k = 1; k < ratios.size() && ratios[k].layer <= 5; ++k)
        CHECK(ratios[k].ratio[0] <= ratios[k - 1].ratio[0] + 1e-9);
}

TEST_CASE("surface pattern report") {
    std::vector<SurfaceSample> all_correct;
    std::mt19937_64 rng(6);
    for (int t = 0; t < 30; ++t) {
        auto m = mult::sample_instance({2, 3}, rng);
        all_correct.push_back({TaskKind::Multiplication, "2x3", make_int(m.product()), make_int(m.product()), false});
        auto d = dp::sample_instance(4, rng);
        auto out = dp::build_graph(d).node(dp::kOutputId).value;
        all_correct.push_back({TaskKind::DynamicProgramming, "4", out, out, false});
    }
    auto inst = fixtures::three_house_puzzle();
    NodeValue table = puzzle::solution_table(inst);
    all_correct.push_back({TaskKind::Puzzle, "3x3", table, table, std::nullopt});
    for (const auto& row : surface_pattern_report(all_correct)) {
        if (row.metric == "correct_with_internal_error") CHECK(row.value == 0.0);
        else CHECK_MESSAGE(row.value == 1.0, row.metric);
    }

    // Noisy oracle: the last digit depends on fewer steps than the full answer.
    std::vector<SurfaceSample> noisy;
    for (int t = 0; t < 400; ++t) {
        auto g = mult::build_graph(mult::sample_instance({3, 3}, rng));
        auto p = sp::parse(oracle::noisy_scratchpad(g, {0.1, 0.0}, rng()), g);
        noisy.push_back({TaskKind::Multiplication, "3x3", p.final_answer, g.node(g.sink()).value,
                         classify_nodes(g, p).has_error()});
    }
    double exact = 0, last = 0;
    for (const auto& row : surface_pattern_report(noisy)) {
        if (row.metric == "exact_match") exact = row.value;
        if (row.metric == "last_digit") last = row.value;
    }
    CHECK(last >= exact);

    // Restoration-bearing corpus: final answers right despite internal errors.
    std::vector<SurfaceSample> restored;
    for (int t = 0; t < 40; ++t) {
        auto g = dp::build_graph(dp::sample_instance(5, rng));
        auto inj = oracle::inject_restoration(g, rng);
        auto p = sp::parse(sp::render_trace(g, inj.trace), g);
        restored.push_back({TaskKind::DynamicProgramming, "5", p.final_answer, g.node(g.sink()).value,
                            classify_nodes(g, p).has_error()});
    }
    bool found = false;
    for (const auto& row : surface_pattern_report(restored))
        if (row.metric == "correct_with_internal_error") found = row.value > 0;
    CHECK(found);
}
