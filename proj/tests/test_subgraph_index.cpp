#include <doctest.h>

#include "compgraph/dp.hpp"
#include "compgraph/multiplication.hpp"
#include "compgraph/serialize.hpp"
#include "compgraph/subgraph_index.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

using namespace compgraph;
using namespace compgraph::fc;

namespace {

// Independent canonical form: nested text of op, value and ordered children.
std::string canonical(const ComputationGraph& g, const std::string& id, bool values) {
    const auto& n = g.node(id);
    std::string s = std::string(to_string(n.op)) + "(" + (values ? value_to_json(n.value).dump() : "") + ")[";
    for (const auto& p : n.parents) s += canonical(g, p, values) + ",";
    return s + "]";
}

std::vector<ComputationGraph> all_1x1() {
    std::vector<ComputationGraph> out;
    mult::enumerate_instances({1, 1}, [&](const mult::MultInstance& m) {
        out.push_back(mult::build_graph(m));
        return true;
    });
    return out;
}

}  // namespace

TEST_CASE("full computation sets") {
    auto g = mult::build_graph({35, 90});
    CHECK(full_computation(g, mult::x_id(0)) == std::vector<std::string>{mult::x_id(0)});
    CHECK(full_computation(g, mult::kProductId).size() == g.size());
    auto p = full_computation(g, mult::partial_id(1));
    std::set<std::string> got(p.begin(), p.end());
    std::set<std::string> want{"x[0]",           "x[1]",         "y[1]",         "digitmult[0][1]",
                               "digitmult[1][1]", "sum[1][1]",    "digit[0][1]",  "carry[0][1]",
                               "digit[1][1]",     "carry[1][1]",  "partial[1]"};
    CHECK(got == want);
    CHECK_THROWS_AS(full_computation(g, "missing"), GraphError);
}

TEST_CASE("fingerprints") {
    auto g = mult::build_graph({35, 90});
    auto r = relabel(g, [](const std::string& id) { return "n_" + id; });
    CHECK(fingerprints(g) == fingerprints(r));

    auto g2 = mult::build_graph({35, 80});
    CHECK(fingerprint(g, mult::y_id(1)) != fingerprint(g2, mult::y_id(1)));
    CHECK(fingerprint(g, mult::x_id(1)) == fingerprint(g2, mult::x_id(1)));
    CHECK(fingerprint(g, mult::kProductId) != fingerprint(g2, mult::kProductId));
    CHECK(fingerprint(g, mult::kProductId, MatchMode::OpsOnly) == fingerprint(g2, mult::kProductId, MatchMode::OpsOnly));

    // 7 x 9 inside 7 x 49.
    auto small = mult::build_graph({7, 9}), big = mult::build_graph({7, 49});
    CHECK(fingerprint(small, mult::digitmult_id(0, 0)) == fingerprint(big, mult::digitmult_id(0, 0)));
    CHECK(fingerprint(small, mult::partial_id(0)) == fingerprint(big, mult::partial_id(0)));
    CHECK(fingerprint(small, mult::kProductId) != fingerprint(big, mult::kProductId));

    // Depth equals the layer number.
    auto layers = layer_vector(big);
    auto fps = fingerprints(big);
    for (std::size_t i = 0; i < big.size(); ++i) CHECK(fps[i].depth == layers[i]);
}

TEST_CASE("hash equality matches structural equality") {
    std::mt19937_64 rng(3);
    std::vector<ComputationGraph> graphs;
    for (int t = 0; t < 200; ++t) graphs.push_back(mult::build_graph(mult::sample_instance({2, 2}, rng)));
    for (int t = 0; t < 100; ++t) graphs.push_back(dp::build_graph(dp::sample_instance(3, rng)));
    for (bool values : {true, false}) {
        std::map<std::uint64_t, std::string> seen;
        FingerprintIndex idx(values ? MatchMode::ValuesAndOps : MatchMode::OpsOnly);
        for (const auto& g : graphs) {
            auto fps = fingerprints(g, values ? MatchMode::ValuesAndOps : MatchMode::OpsOnly);
            for (std::size_t i = 0; i < g.size(); ++i) {
                auto c = canonical(g, g.nodes()[i].id, values);
                auto [it, fresh] = seen.emplace(fps[i].hash, c);
                CHECK(it->second == c);
            }
            idx.add_graph(g);
        }
        CHECK(idx.collisions() == 0);
        std::set<std::string> distinct;
        for (const auto& [_, c] : seen) distinct.insert(c);
        CHECK(idx.distinct() == distinct.size());
    }
}

TEST_CASE("index building and queries") {
    auto g = mult::build_graph({35, 90});
    FingerprintIndex one;
    one.add_graph(g);
    CHECK(one.total() == g.size());
    CHECK(one.distinct() <= g.size());
    for (auto c : one.query(g)) CHECK(c >= 1);

    // Every 1x1 graph indexed; a 2x2 graph hits its one-digit products only.
    FingerprintIndex idx(MatchMode::ValuesAndOps, "mult-1x1");
    for (const auto& s : all_1x1()) idx.add_graph(s);
    auto q = mult::build_graph({47, 36});
    auto counts = idx.query(q);
    for (std::size_t i = 0; i < q.size(); ++i) {
        const auto& n = q.nodes()[i];
        if (n.op == Op::DigitMul) CHECK(counts[i] >= 1);
        if (n.op == Op::Add || n.op == Op::ConcatDigits || n.op == Op::ShiftedSum) CHECK(counts[i] == 0);
    }

    // Disjoint op sets.
    FingerprintIndex dps;
    dps.add_graph(dp::build_graph({{1, -2, 3}}));
    for (auto c : dps.query(q)) CHECK(c == 0);

    // Merging shards equals one sequential build.
    FingerprintIndex a, b, all;
    auto graphs = all_1x1();
    for (std::size_t k = 0; k < graphs.size(); ++k) {
        (k % 2 ? a : b).add_graph(graphs[k]);
        all.add_graph(graphs[k]);
    }
    a.merge(b);
    CHECK(a.total() == all.total());
    CHECK(a.distinct() == all.distinct());
    CHECK(a.query(q) == all.query(q));
    CHECK_THROWS(a.merge(FingerprintIndex(MatchMode::OpsOnly)));
}

TEST_CASE("index persistence") {
    FingerprintIndex idx(MatchMode::ValuesAndOps, "corpus-7");
    for (const auto& s : all_1x1()) idx.add_graph(s);
    const auto path = (std::filesystem::temp_directory_path() / "fc_index_test.bin").string();
    idx.save(path);
    auto back = FingerprintIndex::load(path);
    CHECK(back.corpus_id() == "corpus-7");
    CHECK(back.distinct() == idx.distinct());
    auto q = mult::build_graph({47, 36});
    CHECK(back.query(q) == idx.query(q));
    {
        std::ofstream out(path, std::ios::binary);
        out << "garbage";
    }
    CHECK_THROWS(FingerprintIndex::load(path));
    std::filesystem::remove(path);
}

TEST_CASE("frequency by depth vanishes beyond the training depth") {
    FingerprintIndex idx;
    int train_depth = 0;
    for (int k1 = 1; k1 <= 2; ++k1)
        for (int k2 = 1; k2 <= 2; ++k2)
            mult::enumerate_instances({k1, k2}, [&](const mult::MultInstance& m) {
                auto g = mult::build_graph(m);
                train_depth = std::max(train_depth, reasoning_depth(g));
                idx.add_graph(g);
                return true;
            });
    std::mt19937_64 rng(9);
    FrequencyAggregator agg;
    for (int t = 0; t < 50; ++t) {
        auto g = mult::build_graph(mult::sample_instance({3, 1}, rng));
        agg.add(g, idx.query(g), t % 2 == 0);
    }
    bool beyond = false;
    for (const auto& r : agg.rows()) {
        if (r.depth == 0) CHECK(r.mean_frequency >= 1);
        if (r.depth > train_depth) {
            beyond = true;
            CHECK(r.mean_frequency == 0);
        }
    }
    CHECK(beyond);
}
