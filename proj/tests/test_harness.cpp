#include <doctest.h>

#include "compgraph/harness.hpp"
#include "compgraph/oracle.hpp"
#include "compgraph/rng.hpp"

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

using namespace compgraph;
using namespace compgraph::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    auto p = fs::temp_directory_path() / ("compgraph_harness_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

DatasetConfig mult_config(std::vector<std::pair<int, int>> sizes, std::uint64_t seed = 1) {
    DatasetConfig c;
    c.task = TaskKind::Multiplication;
    for (auto [a, b] : sizes) c.sizes.push_back({{a, b}, true, 0});
    c.seed = seed;
    return c;
}

std::map<Split, std::size_t> tally(const std::vector<DatasetRecord>& rs) {
    std::map<Split, std::size_t> m;
    for (const auto& r : rs) ++m[r.split];
    return m;
}

ModelSpec oracle_spec(double eps, double c = 0.0, std::uint64_t seed = 5) {
    ModelSpec m;
    m.id = "oracle-" + std::to_string(eps);
    m.epsilon = eps;
    m.c = c;
    m.seed = seed;
    return m;
}

/// Counts calls to the wrapped model.
class CountingModel : public Model {
public:
    explicit CountingModel(std::unique_ptr<Model> inner) : inner_(std::move(inner)) {}
    ModelReply complete(const std::string& p, const DatasetRecord& r, scratchpad::PromptMode m) override {
        ++calls;
        return inner_->complete(p, r, m);
    }
    std::atomic<int> calls{0};

private:
    std::unique_ptr<Model> inner_;
};

std::vector<std::string> csv_lines(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    for (std::string line; std::getline(ss, line);) out.push_back(line);
    return out;
}

}  // namespace

TEST_CASE("split plan") {
    auto p = split_plan(81, 0.8, 0.1, 0.1, 3);
    std::map<Split, int> m;
    for (auto s : p) ++m[s];
    CHECK(m[Split::Train] == 65);
    CHECK(m[Split::Valid] == 8);
    CHECK(m[Split::Test] == 8);

    auto big = split_plan(177'155, 0.8, 0.1, 0.1, 3);
    CHECK(std::count(big.begin(), big.end(), Split::Train) == 141'724);

    CHECK_THROWS_AS(split_plan(10, 0.8, 0.1, 0.2, 0), std::invalid_argument);
    CHECK_THROWS_AS(split_plan(10, 1.1, -0.1, 0.0, 0), std::invalid_argument);
    CHECK(split_plan(81, 0.8, 0.1, 0.1, 3) == p);
    CHECK(split_plan(81, 0.8, 0.1, 0.1, 4) != p);
}

TEST_CASE("multiplication dataset") {
    auto cfg = mult_config({{1, 1}});
    cfg.ood_sizes.push_back({{2, 1}, false, 20});
    auto ds = build_dataset(cfg);
    REQUIRE(ds.size() == 101);
    auto t = tally(ds);
    CHECK(t[Split::Train] == 65);
    CHECK(t[Split::Valid] == 8);
    CHECK(t[Split::Test] == 8);
    CHECK(t[Split::Ood] == 20);
    std::set<std::string> ids;
    for (const auto& r : ds) {
        ids.insert(r.id);
        if (r.size.k1 == 2) CHECK(r.split == Split::Ood);
        if (r.split == Split::Ood) CHECK(r.size.k1 == 2);
    }
    CHECK(ids.size() == ds.size());
    CHECK(ds[0].id == "mult-1x1");
    CHECK(ds[0].question == "What is 1 times 1?");
    CHECK(ds[0].answer == "1");
    CHECK(ds[0].stats.node_count == ds[0].graph.size());

    // Persistence: byte-stable and lossless.
    auto dir = scratch_dir("mult");
    write_dataset((dir / "a.jsonl").string(), ds);
    write_dataset((dir / "b.jsonl").string(), build_dataset(cfg));
    CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
    auto back = read_dataset((dir / "a.jsonl").string());
    REQUIRE(back.size() == ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) CHECK(record_to_json(back[i]) == record_to_json(ds[i]));

    auto overlap = cfg;
    overlap.ood_sizes = {{{1, 1}, true, 0}};
    CHECK_THROWS(build_dataset(overlap));
}

TEST_CASE("dp and puzzle datasets") {
    DatasetConfig d;
    d.task = TaskKind::DynamicProgramming;
    d.sizes = {{{0, 0, 2}, true, 0}, {{0, 0, 4}, false, 50}};
    auto ds = build_dataset(d);
    CHECK(ds.size() == 121 + 50);
    CHECK(ds.front().id == "dp--5,-5");
    CHECK(ds.front().answer == "[2, 2]");  // all-negative lists select nothing

    DatasetConfig p;
    p.task = TaskKind::Puzzle;
    p.sizes = {{{0, 0, 0, 3, 3}, false, 6}, {{0, 0, 0, 4, 4}, false, 3}};
    p.seed = 11;
    auto ps = build_dataset(p);
    REQUIRE(ps.size() == 9);
    for (const auto& r : ps) {
        REQUIRE(r.puzzle);
        CHECK(puzzle::count_solutions(*r.puzzle, r.puzzle->clues, 2) == 1);
        CHECK(r.graph.node(r.graph.sink()).value == NodeValue{puzzle::solution_table(*r.puzzle)});
        auto back = record_from_json(Json::parse(record_to_json(r).dump()));
        CHECK(scratchpad::render(back.graph, back.instance()) == r.scratchpad);
    }
}

TEST_CASE("split by graph stat") {
    DatasetConfig d;
    d.task = TaskKind::DynamicProgramming;
    for (int n = 1; n <= 7; ++n) d.sizes.push_back({{0, 0, n}, false, 30});
    auto ds = build_dataset(d);
    auto same = ds;
    split_by_graph_stat(same, GraphStat::Depth, std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < ds.size(); ++i) CHECK(same[i].split == ds[i].split);

    auto zero = ds;
    split_by_graph_stat(zero, GraphStat::Depth, 0);
    for (const auto& r : zero) CHECK(r.split == Split::Ood);

    // Threshold at the depth of size-5 graphs keeps sizes up to 5 in domain.
    int depth5 = 0;
    for (const auto& r : ds)
        if (r.size.n == 5) depth5 = r.stats.depth;
    auto cut = ds;
    split_by_graph_stat(cut, GraphStat::Depth, depth5);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds[i].size.n <= 5) CHECK(cut[i].split == ds[i].split);
        else CHECK(cut[i].split == Split::Ood);
    }
    auto by_size = ds;
    split_by_graph_stat(by_size, GraphStat::Size, 3);
    for (const auto& r : by_size) CHECK((r.split == Split::Ood) == (r.size.n > 3));
    CHECK_THROWS(graph_stat_from_string("height"));
}

TEST_CASE("noisy oracle end to end") {
    auto ds = build_dataset(mult_config({{1, 1}, {2, 2}}));
    EvalConfig ec;
    ec.splits = {Split::Train, Split::Valid, Split::Test};
    ec.sample_per_size = 60;
    for (auto mode : {scratchpad::PromptMode::ZeroShot, scratchpad::PromptMode::FewShotQa,
                      scratchpad::PromptMode::FewShotScratchpad}) {
        ec.mode = mode;
        auto ms = oracle_spec(0.0);
        auto model = make_model(ms);
        auto recs = evaluate(*model, ms, ds, ec);
        CHECK(recs.size() == 120);
        for (const auto& r : recs) {
            CHECK(r.error.empty());
            CHECK(r.exact_match);
            if (mode == scratchpad::PromptMode::FewShotScratchpad) {
                REQUIRE(r.classification);
                CHECK_FALSE(r.classification->has_error());
            } else {
                CHECK_FALSE(r.classification);
            }
        }
    }

    // epsilon = 0: the emitted text is the rendered truth.
    auto model = make_model(oracle_spec(0.0));
    CHECK(model->complete("", ds[5], scratchpad::PromptMode::FewShotScratchpad).text == ds[5].scratchpad);
}

TEST_CASE("noisy oracle at epsilon 0.1 feeds classification cleanly") {
    DatasetConfig d;
    d.task = TaskKind::DynamicProgramming;
    d.sizes = {{{0, 0, 3}, false, 400}};
    auto dsd = build_dataset(d);
    auto dsm = build_dataset(mult_config({{2, 2}}));
    DatasetConfig p;
    p.task = TaskKind::Puzzle;
    p.sizes = {{{0, 0, 0, 3, 3}, false, 20}};
    auto dsp = build_dataset(p);
    EvalConfig ec;
    ec.splits = {Split::Train, Split::Valid, Split::Test};
    ec.sample_per_size = 0;
    ec.exemplars = 1;
    auto ms = oracle_spec(0.1);
    auto model = make_model(ms);
    std::size_t total = 0, wrong = 0, errors = 0;
    for (const auto* ds : {&dsd, &dsm, &dsp}) {
        auto sub = *ds;
        if (sub.size() > 600) sub.resize(600);
        for (const auto& r : evaluate(*model, ms, sub, ec)) {
            ++total;
            CHECK(r.error.empty());
            REQUIRE(r.classification);
            wrong += !r.exact_match;
            errors += r.classification->has_error();
            CHECK(r.classification->answer_correct == r.exact_match);
        }
    }
    CHECK(total >= 1000);
    CHECK(wrong > 0);
    CHECK(errors >= wrong);
}

TEST_CASE("epsilon 1 corrupts every printed step") {
    auto ds = build_dataset(mult_config({{2, 2}}));
    for (std::size_t i = 0; i < ds.size(); i += 500) {
        const auto& g = ds[i].graph;
        auto trace = oracle::noisy_trace(g, {1.0, 0.0}, 7);
        auto layers = layer_vector(g);
        for (std::size_t k = 0; k < g.size(); ++k) {
            const auto& n = g.nodes()[k];
            if (layers[k] == 0 || !scratchpad::printed_explicitly(g, trace, n.id)) continue;
            CHECK_FALSE(*trace.find(n.id)->value == n.value);
        }
    }
}

TEST_CASE("response cache and worker determinism") {
    auto ds = build_dataset(mult_config({{1, 2}}));
    auto dir = scratch_dir("cache");
    EvalConfig ec;
    ec.sample_per_size = 100;
    ec.splits = {Split::Train, Split::Test};
    ec.cache_path = (dir / "cache.jsonl").string();
    auto ms = oracle_spec(0.2);
    CountingModel first(make_model(ms));
    auto a = evaluate(first, ms, ds, ec);
    CHECK(first.calls == 100);
    CountingModel second(make_model(ms));
    ec.workers = 8;
    auto b = evaluate(second, ms, ds, ec);
    CHECK(second.calls == 0);
    for (const auto& r : b) CHECK(r.cached);
    write_evals((dir / "a.jsonl").string(), a);
    write_evals((dir / "b.jsonl").string(), b);
    CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));

    ec.cache_path.clear();
    auto c1 = evaluate(*make_model(ms), ms, ds, ec);
    ec.workers = 1;
    auto c8 = evaluate(*make_model(ms), ms, ds, ec);
    write_evals((dir / "c1.jsonl").string(), c1);
    write_evals((dir / "c8.jsonl").string(), c8);
    CHECK(slurp(dir / "c1.jsonl") == slurp(dir / "c8.jsonl"));
    CHECK(slurp(dir / "c1.jsonl") == slurp(dir / "a.jsonl"));

    // Stored records round-trip and re-score to the same values.
    auto back = read_evals((dir / "a.jsonl").string());
    classify(back, ds, 4);
    write_evals((dir / "d.jsonl").string(), back);
    CHECK(slurp(dir / "d.jsonl") == slurp(dir / "a.jsonl"));

    // A torn trailing cache line is ignored.
    {
        std::ofstream out(dir / "cache.jsonl", std::ios::app);
        out << "{\"key\": \"trunc";
    }
    ResponseCache reopened((dir / "cache.jsonl").string());
    CHECK(reopened.size() == 100);
}

TEST_CASE("exemplar selection") {
    auto ds = build_dataset(mult_config({{1, 1}}));
    auto e = select_exemplars(ds, 5, 3);
    CHECK(e.size() == 5);
    std::set<std::string> train;
    for (const auto& r : ds)
        if (r.split == Split::Train) train.insert(r.question);
    for (const auto& x : e) CHECK(train.count(x.question));
    CHECK(select_exemplars(ds, 5, 3)[0].question == e[0].question);
}

TEST_CASE("http model") {
    httplib::Server server;
    std::atomic<int> hits{0};
    std::string seen_auth, seen_body;
    std::mutex mu;
    server.Post("/v1/chat", [&](const httplib::Request& req, httplib::Response& res) {
        if (hits++ == 0) {
            res.status = 503;
            return;
        }
        {
            std::lock_guard lock(mu);
            seen_auth = req.get_header_value("Authorization");
            seen_body = req.body;
        }
        auto body = Json::parse(req.body);
        const auto prompt = body["messages"][0]["content"].get<std::string>();
        res.set_content(Json{{"choices", {{{"message", {{"content", " 42 " + std::to_string(prompt.size())}}}}}}}.dump(),
                        "application/json");
    });
    server.Post("/denied", [](const httplib::Request&, httplib::Response& res) { res.status = 401; });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    setenv("COMPGRAPH_TEST_TOKEN", "sekret", 1);
    ModelSpec ms;
    ms.kind = ModelKind::Http;
    ms.id = "fake";
    ms.model_name = "fake-model";
    ms.url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat";
    ms.token_env = "COMPGRAPH_TEST_TOKEN";
    ms.retry_backoff_ms = 1;
    ms.timeout_s = 5;
    auto model = make_model(ms);
    DatasetRecord dummy;
    auto reply = model->complete("hello", dummy, scratchpad::PromptMode::ZeroShot);
    CHECK(reply.error.empty());
    CHECK(reply.attempts == 2);
    CHECK(reply.text == " 42 5");
    CHECK(seen_auth == "Bearer sekret");
    auto body = Json::parse(seen_body);
    CHECK(body["model"] == "fake-model");
    CHECK(body["top_p"] == 0.7);
    CHECK(body["temperature"] == 1.0);
    CHECK(body["messages"][0]["role"] == "user");

    ms.url = "http://127.0.0.1:" + std::to_string(port) + "/denied";
    auto denied = make_model(ms)->complete("x", dummy, scratchpad::PromptMode::ZeroShot);
    CHECK(denied.error == "http status 401");
    CHECK(denied.attempts == 1);

    // Transport failures are recorded, never thrown, in evaluate.
    ms.url = "http://127.0.0.1:1/none";
    ms.max_retries = 1;
    auto ds = build_dataset(mult_config({{1, 1}}));
    EvalConfig ec;
    ec.sample_per_size = 3;
    ec.mode = scratchpad::PromptMode::ZeroShot;
    auto dead = make_model(ms);
    auto recs = evaluate(*dead, ms, ds, ec);
    CHECK(recs.size() == 3);
    for (const auto& r : recs) {
        CHECK(r.error.rfind("transport", 0) == 0);
        CHECK_FALSE(r.exact_match);
    }

    server.stop();
    th.join();
    CHECK_THROWS(model_spec_from_json(Json{{"kind", "http"}}));
}

TEST_CASE("rate limiter") {
    RateLimiter lim(40);
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < 60; ++i) lim.acquire();
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(s >= 0.4);
    RateLimiter off(0);
    off.acquire();
}

TEST_CASE("report bundle") {
    auto dir = scratch_dir("report");
    auto files = write_report((dir / "empty").string(), {}, {});
    CHECK(files.size() == 4);
    for (const auto& f : files) CHECK(csv_lines(slurp(f)).size() == 1);

    DatasetConfig d;
    d.task = TaskKind::DynamicProgramming;
    for (int n = 1; n <= 5; ++n) d.sizes.push_back({{0, 0, n}, false, 500});
    auto ds = build_dataset(d);
    EvalConfig ec;
    ec.splits = {Split::Train, Split::Valid, Split::Test};
    ec.exemplars = 2;

    auto perfect = oracle_spec(0.0);
    auto recs0 = evaluate(*make_model(perfect), perfect, ds, ec);
    write_report((dir / "perfect").string(), ds, recs0);
    auto heat0 = csv_lines(slurp(dir / "perfect" / "heatmap.csv"));
    CHECK(heat0.size() == 6);
    for (std::size_t i = 1; i < heat0.size(); ++i) CHECK(heat0[i].substr(heat0[i].rfind(',') + 1) == "1.000000");

    auto noisy = oracle_spec(0.1);
    auto recs = evaluate(*make_model(noisy), noisy, ds, ec);
    fc::FingerprintIndex idx;
    for (const auto& r : ds)
        if (r.split == Split::Train) idx.add_graph(r.graph);
    auto out = write_report((dir / "noisy").string(), ds, recs, &idx);
    CHECK(out.size() == 5);
    auto heat = csv_lines(slurp(dir / "noisy" / "heatmap.csv"));
    REQUIRE(heat.size() == 6);
    std::vector<double> acc;
    std::vector<std::size_t> count;
    for (std::size_t i = 1; i < heat.size(); ++i) {
        auto last = heat[i].rfind(',');
        acc.push_back(std::stod(heat[i].substr(last + 1)));
        auto prev = heat[i].rfind(',', last - 1);
        count.push_back(std::stoul(heat[i].substr(prev + 1, last - prev - 1)));
    }
    for (std::size_t i = 1; i < acc.size(); ++i) {
        const double se = std::sqrt(acc[i] * (1 - acc[i]) / count[i] + acc[i - 1] * (1 - acc[i - 1]) / count[i - 1]);
        CHECK(acc[i] < acc[i - 1]);
        CHECK(acc[i - 1] - acc[i] > -3 * se);
    }
    auto layers = csv_lines(slurp(dir / "noisy" / "error_layers.csv"));
    CHECK(layers.size() > 2);
    CHECK(csv_lines(slurp(dir / "noisy" / "surface.csv")).size() > 5);
    CHECK(csv_lines(slurp(dir / "noisy" / "fc_frequency.csv")).size() > 2);
}
