#include "compgraph/harness.hpp"

#include "compgraph/dp.hpp"
#include "compgraph/multiplication.hpp"
#include "compgraph/oracle.hpp"
#include "compgraph/rng.hpp"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

namespace compgraph::harness {

std::string_view to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Valid: return "valid";
        case Split::Test: return "test";
        case Split::Ood: return "ood";
    }
    return "unknown";
}

Split split_from_string(std::string_view s) {
    for (auto x : {Split::Train, Split::Valid, Split::Test, Split::Ood})
        if (to_string(x) == s) return x;
    throw std::invalid_argument("unknown split: " + std::string(s));
}

std::string size_label(TaskKind task, const SizeParams& s) {
    switch (task) {
        case TaskKind::Multiplication: return std::to_string(s.k1) + "x" + std::to_string(s.k2);
        case TaskKind::DynamicProgramming: return std::to_string(s.n);
        case TaskKind::Puzzle: return std::to_string(s.K) + "x" + std::to_string(s.M);
    }
    return "?";
}

int problem_size(TaskKind task, const SizeParams& s) {
    switch (task) {
        case TaskKind::Multiplication: return s.k1 * s.k2;
        case TaskKind::DynamicProgramming: return s.n;
        case TaskKind::Puzzle: return s.K * s.M;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

Json size_to_json(TaskKind task, const SizeParams& s) {
    switch (task) {
        case TaskKind::Multiplication: return {{"k1", s.k1}, {"k2", s.k2}};
        case TaskKind::DynamicProgramming: return {{"n", s.n}};
        case TaskKind::Puzzle: return {{"K", s.K}, {"M", s.M}};
    }
    return Json::object();
}

SizeParams size_from_json(const Json& j) {
    SizeParams s;
    s.k1 = j.value("k1", 0);
    s.k2 = j.value("k2", 0);
    s.n = j.value("n", 0);
    s.K = j.value("K", 0);
    s.M = j.value("M", 0);
    return s;
}

Json value_desc_to_json(const puzzle::ValueDesc& v) { return {v.id, v.display, v.phrase}; }

Json ref_to_json(const puzzle::ValueRef& r) { return {r.attr, r.value}; }
puzzle::ValueRef ref_from_json(const Json& j) { return {j.at(0).get<int>(), j.at(1).get<int>()}; }

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[i] = digits[v & 15];
    return s;
}

std::string fixed(double v, int precision = 6) {
    std::ostringstream out;
    out.precision(precision);
    out << std::fixed << v;
    return out.str();
}

}  // namespace

Json puzzle_to_json(const puzzle::PuzzleInstance& inst) {
    Json attrs = Json::array();
    for (const auto& a : inst.attributes) {
        Json values = Json::array();
        for (const auto& v : a.values) values.push_back(value_desc_to_json(v));
        attrs.push_back({{"key", a.key}, {"header", a.header}, {"bullet", a.bullet}, {"values", values}});
    }
    Json clues = Json::array();
    for (const auto& c : inst.clues)
        clues.push_back({{"kind", puzzle::to_string(c.kind)}, {"a", ref_to_json(c.a)}, {"b", ref_to_json(c.b)},
                         {"house", c.house}});
    return {{"K", inst.K}, {"attributes", attrs}, {"solution", inst.solution}, {"clues", clues},
            {"attempts", inst.attempts}};
}

puzzle::PuzzleInstance puzzle_from_json(const Json& j) {
    puzzle::PuzzleInstance inst;
    inst.K = j.at("K").get<int>();
    for (const auto& a : j.at("attributes")) {
        puzzle::AttributeDesc d{a.at("key"), a.at("header"), a.at("bullet"), {}};
        for (const auto& v : a.at("values")) d.values.push_back({v.at(0), v.at(1), v.at(2)});
        inst.attributes.push_back(std::move(d));
    }
    inst.solution = j.at("solution").get<std::vector<std::vector<int>>>();
    for (const auto& c : j.at("clues"))
        inst.clues.push_back({puzzle::clue_kind_from_string(c.at("kind").get<std::string>()), ref_from_json(c.at("a")),
                              ref_from_json(c.at("b")), c.at("house").get<int>()});
    inst.attempts = j.value("attempts", 1);
    return inst;
}

Json record_to_json(const DatasetRecord& r) {
    Json j{{"id", r.id},
           {"task", compgraph::to_string(r.task)},
           {"size", size_to_json(r.task, r.size)},
           {"question", r.question},
           {"answer", r.answer},
           {"scratchpad", r.scratchpad},
           {"graph", graph_to_json(r.graph)},
           {"stats",
            {{"nodes", r.stats.node_count},
             {"depth", r.stats.depth},
             {"width", r.stats.width},
             {"average_parallelism", compgraph::to_string(r.stats.average_parallelism)}}},
           {"split", to_string(r.split)}};
    if (r.puzzle) j["puzzle"] = puzzle_to_json(*r.puzzle);
    return j;
}

DatasetRecord record_from_json(const Json& j) {
    DatasetRecord r;
    r.id = j.at("id").get<std::string>();
    r.task = task_kind_from_string(j.at("task").get<std::string>());
    r.size = size_from_json(j.at("size"));
    r.question = j.at("question").get<std::string>();
    r.answer = j.at("answer").get<std::string>();
    r.scratchpad = j.at("scratchpad").get<std::string>();
    r.graph = graph_from_json(j.at("graph"));
    if (j.contains("puzzle")) r.puzzle = puzzle_from_json(j.at("puzzle"));
    r.stats = compute_stats(r.graph);
    r.split = split_from_string(j.at("split").get<std::string>());
    return r;
}

// ---------------------------------------------------------------------------
// Dataset construction

namespace {

SizeSpec size_spec_from_json(const Json& j) {
    SizeSpec s;
    s.params = size_from_json(j);
    s.exhaustive = j.value("exhaustive", !j.contains("count"));
    s.count = j.value("count", std::uint64_t{0});
    return s;
}

std::uint64_t population(TaskKind task, const SizeParams& p) {
    switch (task) {
        case TaskKind::Multiplication: return mult::instance_count({p.k1, p.k2});
        case TaskKind::DynamicProgramming: return dp::instance_count(p.n);
        case TaskKind::Puzzle: return std::numeric_limits<std::uint64_t>::max();
    }
    return 0;
}

std::uint64_t records_for(TaskKind task, const SizeSpec& s) {
    if (task == TaskKind::Puzzle) {
        if (s.params.K < 2 || s.params.M < 2) throw std::invalid_argument("puzzle sizes need K, M >= 2");
        return s.count;
    }
    const auto pop = population(task, s.params);
    return s.exhaustive ? pop : std::min(pop, s.count);
}

/// Instance indices for one size: all of them, or a sorted seeded sample.
std::vector<std::uint64_t> pick_indices(TaskKind task, const SizeSpec& s, std::uint64_t seed) {
    const auto pop = population(task, s.params);
    const auto want = records_for(task, s);
    std::vector<std::uint64_t> out;
    if (want == pop) {
        out.resize(pop);
        std::iota(out.begin(), out.end(), 0);
        return out;
    }
    std::mt19937_64 rng(derive_seed(seed, hash_string("sample-" + size_label(task, s.params))));
    std::uniform_int_distribution<std::uint64_t> pick(0, pop - 1);
    std::set<std::uint64_t> chosen;
    while (chosen.size() < want) chosen.insert(pick(rng));
    return {chosen.begin(), chosen.end()};
}

DatasetRecord make_record(const ComputationGraph& g, const puzzle::PuzzleInstance* inst, std::string id,
                          TaskKind task, const SizeParams& size, std::string answer, Split split) {
    DatasetRecord r;
    r.id = std::move(id);
    r.task = task;
    r.size = size;
    r.graph = g;
    if (inst) r.puzzle = *inst;
    r.question = scratchpad::question(g, inst);
    r.answer = std::move(answer);
    r.scratchpad = scratchpad::render(g, inst);
    r.stats = compute_stats(g);
    r.split = split;
    return r;
}

template <class Sink>
void emit_size(const DatasetConfig& cfg, const SizeSpec& s, Sink&& sink) {
    const auto label = size_label(cfg.task, s.params);
    if (cfg.task == TaskKind::Puzzle) {
        for (std::uint64_t i = 0; i < s.count; ++i) {
            const auto id = "puzzle-" + label + "-" + std::to_string(i);
            puzzle::PuzzleSpec ps;
            ps.K = s.params.K;
            ps.M = s.params.M;
            ps.seed = derive_seed(cfg.seed, hash_string(id));
            ps.hard_clues = cfg.hard_clues;
            auto inst = puzzle::generate_puzzle(ps);
            auto g = puzzle::greedy_solve(inst);
            sink(make_record(g, &inst, id, cfg.task, s.params, puzzle::answer_text(inst), Split::Train));
        }
        return;
    }
    for (auto idx : pick_indices(cfg.task, s, cfg.seed)) {
        if (cfg.task == TaskKind::Multiplication) {
            auto m = mult::instance_at({s.params.k1, s.params.k2}, idx);
            sink(make_record(mult::build_graph(m), nullptr, "mult-" + m.x.str() + "x" + m.y.str(), cfg.task, s.params,
                             mult::answer_text(m), Split::Train));
        } else {
            auto d = dp::instance_at(s.params.n, idx);
            std::string id = "dp-";
            for (std::size_t i = 0; i < d.input.size(); ++i) id += (i ? "," : "") + std::to_string(d.input[i]);
            sink(make_record(dp::build_graph(d), nullptr, id, cfg.task, s.params, dp::answer_text(d), Split::Train));
        }
    }
}

}  // namespace

DatasetConfig dataset_config_from_json(const Json& j) {
    DatasetConfig c;
    c.task = task_kind_from_string(j.at("task").get<std::string>());
    for (const auto& s : j.value("sizes", Json::array())) c.sizes.push_back(size_spec_from_json(s));
    for (const auto& s : j.value("ood_sizes", Json::array())) c.ood_sizes.push_back(size_spec_from_json(s));
    if (j.contains("fractions")) {
        const auto& f = j.at("fractions");
        c.train = f.at(0).get<double>();
        c.valid = f.at(1).get<double>();
        c.test = f.at(2).get<double>();
    }
    c.seed = j.value("seed", std::uint64_t{0});
    c.hard_clues = j.value("hard_clues", false);
    return c;
}

std::vector<Split> split_plan(std::size_t n, double train, double valid, double test, std::uint64_t seed) {
    if (train < 0 || valid < 0 || test < 0 || std::abs(train + valid + test - 1) > 1e-9)
        throw std::invalid_argument("split fractions must be non-negative and sum to 1");
    const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train));
    const auto n_valid = std::min(n - n_train, static_cast<std::size_t>(std::llround(static_cast<double>(n) * valid)));
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(derive_seed(seed, hash_string("split")));
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Split> out(n, Split::Test);
    for (std::size_t k = 0; k < n; ++k)
        out[perm[k]] = k < n_train ? Split::Train : k < n_train + n_valid ? Split::Valid : Split::Test;
    return out;
}

void build_dataset(const DatasetConfig& cfg, const std::function<void(DatasetRecord&&)>& sink) {
    std::set<std::string> labels;
    for (const auto& s : cfg.sizes) labels.insert(size_label(cfg.task, s.params));
    for (const auto& s : cfg.ood_sizes)
        if (labels.count(size_label(cfg.task, s.params)))
            throw std::invalid_argument("size " + size_label(cfg.task, s.params) + " is both in-domain and ood");
    std::uint64_t total = 0;
    for (const auto& s : cfg.sizes) total += records_for(cfg.task, s);
    const auto plan = split_plan(total, cfg.train, cfg.valid, cfg.test, cfg.seed);
    std::size_t k = 0;
    for (const auto& s : cfg.sizes)
        emit_size(cfg, s, [&](DatasetRecord&& r) {
            r.split = plan[k++];
            sink(std::move(r));
        });
    for (const auto& s : cfg.ood_sizes)
        emit_size(cfg, s, [&](DatasetRecord&& r) {
            r.split = Split::Ood;
            sink(std::move(r));
        });
}

std::vector<DatasetRecord> build_dataset(const DatasetConfig& cfg) {
    std::vector<DatasetRecord> out;
    build_dataset(cfg, [&](DatasetRecord&& r) { out.push_back(std::move(r)); });
    return out;
}

void write_jsonl(const std::string& path, const std::vector<Json>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& r : rows) out << r.dump() << '\n';
}

std::vector<Json> read_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::vector<Json> rows;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) continue;
        try {
            rows.push_back(Json::parse(line));
        } catch (const Json::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(number) + ": " + e.what());
        }
    }
    return rows;
}

void write_dataset(const std::string& path, const std::vector<DatasetRecord>& records) {
    std::vector<Json> rows;
    rows.reserve(records.size());
    for (const auto& r : records) rows.push_back(record_to_json(r));
    write_jsonl(path, rows);
}

std::vector<DatasetRecord> read_dataset(const std::string& path) {
    std::vector<DatasetRecord> out;
    for (const auto& j : read_jsonl(path)) out.push_back(record_from_json(j));
    return out;
}

GraphStat graph_stat_from_string(std::string_view s) {
    if (s == "size") return GraphStat::Size;
    if (s == "depth") return GraphStat::Depth;
    if (s == "width") return GraphStat::Width;
    throw std::invalid_argument("unknown graph stat: " + std::string(s));
}

void split_by_graph_stat(std::vector<DatasetRecord>& records, GraphStat stat, double threshold) {
    for (auto& r : records) {
        double v = 0;
        switch (stat) {
            case GraphStat::Size: v = problem_size(r.task, r.size); break;
            case GraphStat::Depth: v = r.stats.depth; break;
            case GraphStat::Width: v = r.stats.width; break;
        }
        if (v > threshold) r.split = Split::Ood;
    }
}

// ---------------------------------------------------------------------------
// Models

ModelSpec model_spec_from_json(const Json& j) {
    ModelSpec m;
    const auto kind = j.value("kind", std::string("noisy-oracle"));
    if (kind == "http") m.kind = ModelKind::Http;
    else if (kind == "noisy-oracle") m.kind = ModelKind::NoisyOracle;
    else throw std::invalid_argument("unknown model kind: " + kind);
    m.id = j.value("id", m.kind == ModelKind::Http ? std::string("http") : std::string("oracle"));
    m.url = j.value("url", m.url);
    m.model_name = j.value("model", m.model_name);
    m.token_env = j.value("token_env", m.token_env);
    m.response_path = j.value("response_path", m.response_path);
    m.temperature = j.value("temperature", m.temperature);
    m.top_p = j.value("top_p", m.top_p);
    m.max_retries = j.value("max_retries", m.max_retries);
    m.retry_backoff_ms = j.value("retry_backoff_ms", m.retry_backoff_ms);
    m.timeout_s = j.value("timeout_s", m.timeout_s);
    m.concurrency = j.value("concurrency", m.concurrency);
    m.requests_per_second = j.value("requests_per_second", m.requests_per_second);
    m.epsilon = j.value("epsilon", m.epsilon);
    m.c = j.value("c", m.c);
    m.seed = j.value("seed", m.seed);
    if (m.kind == ModelKind::Http && m.url.empty()) throw std::invalid_argument("http model needs a url");
    if (m.epsilon < 0 || m.epsilon > 1 || m.c < 0 || m.c > 1) throw std::invalid_argument("epsilon and c lie in [0, 1]");
    return m;
}

namespace {

std::string answer_of(const ComputationGraph& g, const NodeValue& v, const puzzle::PuzzleInstance* inst) {
    if (const auto* n = std::get_if<Integer>(&v)) return n->value.str();
    if (const auto* s = std::get_if<DigitSeq>(&v)) return dp::format_list({s->digits.begin(), s->digits.end()});
    if (const auto* t = std::get_if<PartialTable>(&v); t && inst) return puzzle::format_table(*inst, *t);
    (void)g;
    return describe(v);
}

class OracleModel : public Model {
public:
    explicit OracleModel(ModelSpec spec) : spec_(std::move(spec)) {}

    ModelReply complete(const std::string&, const DatasetRecord& rec, scratchpad::PromptMode mode) override {
        const oracle::NoisySpec ns{spec_.epsilon, spec_.c};
        const auto seed = derive_seed(spec_.seed, hash_string(rec.id));
        ModelReply r;
        r.attempts = 1;
        auto trace = oracle::noisy_trace(rec.graph, ns, seed, rec.instance());
        if (mode == scratchpad::PromptMode::FewShotScratchpad) {
            r.text = scratchpad::render_trace(rec.graph, trace, rec.instance());
        } else {
            const auto* sink = trace.find(rec.graph.sink());
            r.text = " " + answer_of(rec.graph, sink && sink->value ? *sink->value : rec.graph.node(rec.graph.sink()).value,
                                     rec.instance());
        }
        return r;
    }

private:
    ModelSpec spec_;
};

class HttpModel : public Model {
public:
    explicit HttpModel(ModelSpec spec) : spec_(std::move(spec)), limiter_(spec_.requests_per_second) {
        static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
        std::smatch m;
        if (!std::regex_match(spec_.url, m, url_re)) throw std::invalid_argument("bad endpoint url: " + spec_.url);
        base_ = m[1];
        path_ = m[2].matched ? std::string(m[2]) : std::string("/");
    }

    ModelReply complete(const std::string& prompt, const DatasetRecord&, scratchpad::PromptMode) override {
        const Json body{{"model", spec_.model_name.empty() ? spec_.id : spec_.model_name},
                        {"messages", Json::array({{{"role", "user"}, {"content", prompt}}})},
                        {"temperature", spec_.temperature},
                        {"top_p", spec_.top_p}};
        httplib::Headers headers;
        if (const char* token = std::getenv(spec_.token_env.c_str()); token && *token)
            headers.emplace("Authorization", std::string("Bearer ") + token);
        ModelReply reply;
        const auto start = std::chrono::steady_clock::now();
        for (int attempt = 0; attempt <= spec_.max_retries; ++attempt) {
            if (attempt > 0)
                std::this_thread::sleep_for(std::chrono::milliseconds(spec_.retry_backoff_ms * (1 << (attempt - 1))));
            limiter_.acquire();
            reply.attempts = attempt + 1;
            httplib::Client cli(base_);
            cli.set_connection_timeout(spec_.timeout_s, 0);
            cli.set_read_timeout(spec_.timeout_s, 0);
            auto res = cli.Post(path_, headers, body.dump(), "application/json");
            if (!res) {
                reply.error = "transport: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status == 429 || res->status >= 500) {
                reply.error = "http status " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200) {
                reply.error = "http status " + std::to_string(res->status);
                break;
            }
            try {
                const auto j = Json::parse(res->body);
                const auto& v = j.at(Json::json_pointer(spec_.response_path));
                reply.text = v.is_string() ? v.get<std::string>() : v.dump();
                reply.error.clear();
            } catch (const std::exception& e) {
                reply.error = std::string("bad response: ") + e.what();
            }
            break;
        }
        reply.latency_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        return reply;
    }

private:
    ModelSpec spec_;
    std::string base_, path_;
    RateLimiter limiter_;
};

}  // namespace

std::unique_ptr<Model> make_model(const ModelSpec& spec) {
    if (spec.kind == ModelKind::Http) return std::make_unique<HttpModel>(spec);
    return std::make_unique<OracleModel>(spec);
}

RateLimiter::RateLimiter(double per_second)
    : rate_(per_second), tokens_(std::max(1.0, per_second)), last_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
    if (rate_ <= 0) return;
    for (;;) {
        std::chrono::duration<double> wait{0};
        {
            std::lock_guard lock(mu_);
            const auto now = std::chrono::steady_clock::now();
            tokens_ = std::min(std::max(1.0, rate_),
                               tokens_ + std::chrono::duration<double>(now - last_).count() * rate_);
            last_ = now;
            if (tokens_ >= 1) {
                tokens_ -= 1;
                return;
            }
            wait = std::chrono::duration<double>((1 - tokens_) / rate_);
        }
        std::this_thread::sleep_for(wait);
    }
}

ResponseCache::ResponseCache(std::string path) : path_(std::move(path)) {
    if (path_.empty() || !std::filesystem::exists(path_)) return;
    std::ifstream in(path_, std::ios::binary);
    std::string line;
    while (std::getline(in, line)) {
        // A torn last line from an interrupted run is skipped.
        try {
            auto j = Json::parse(line);
            entries_[j.at("key").get<std::string>()] = j.at("response").get<std::string>();
        } catch (const Json::exception&) {
        }
    }
}

std::string ResponseCache::key(const std::string& model_id, const std::string& prompt) {
    return model_id + ":" + hex64(hash_string(prompt));
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void ResponseCache::put(const std::string& key, const std::string& response) {
    std::lock_guard lock(mu_);
    if (!entries_.emplace(key, response).second) return;
    if (path_.empty()) return;
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    out << Json{{"key", key}, {"response", response}}.dump() << '\n';
}

std::size_t ResponseCache::size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
}

// ---------------------------------------------------------------------------
// Evaluation

EvalConfig eval_config_from_json(const Json& j) {
    EvalConfig c;
    if (j.contains("mode")) c.mode = scratchpad::prompt_mode_from_string(j.at("mode").get<std::string>());
    c.exemplars = j.value("exemplars", c.exemplars);
    if (j.contains("splits")) {
        c.splits.clear();
        for (const auto& s : j.at("splits")) c.splits.push_back(split_from_string(s.get<std::string>()));
    }
    c.sample_per_size = j.value("sample_per_size", c.sample_per_size);
    c.workers = j.value("workers", c.workers);
    c.cache_path = j.value("cache", c.cache_path);
    c.seed = j.value("seed", c.seed);
    return c;
}

namespace {

const char* kCategoryKeys[] = {"fully-correct", "local", "propagation", "restoration", "absent"};

analysis::Category category_from_string(std::string_view s) {
    for (int k = 0; k < analysis::kCategoryCount; ++k)
        if (analysis::to_string(static_cast<analysis::Category>(k)) == s) return static_cast<analysis::Category>(k);
    throw std::invalid_argument("unknown category: " + std::string(s));
}

}  // namespace

Json eval_to_json(const EvalRecord& r) {
    Json j{{"id", r.id},
           {"model", r.model_id},
           {"task", compgraph::to_string(r.task)},
           {"size", r.size},
           {"split", to_string(r.split)},
           {"mode", scratchpad::to_string(r.mode)},
           {"prompt_hash", r.prompt_hash},
           {"raw_response", r.raw_response},
           {"error", r.error},
           {"extracted", r.extracted ? Json(*r.extracted) : Json(nullptr)},
           {"exact_match", r.exact_match},
           {"latency_ms", r.latency_ms}};
    Json partial = Json::array();
    for (const auto& [k, v] : r.partial) partial.push_back({k, v});
    j["partial"] = partial;
    if (r.classification) {
        const auto& c = *r.classification;
        Json counts = Json::object();
        for (int k = 0; k < analysis::kCategoryCount; ++k) counts[kCategoryKeys[k]] = c.counts[k];
        Json nodes = Json::array();
        for (const auto& n : c.nodes)
            nodes.push_back({n.id, analysis::to_string(n.category), n.layer, n.value_correct, n.computation_correct});
        j["classification"] = {{"answer_correct", c.answer_correct}, {"counts", counts}, {"nodes", nodes}};
    }
    return j;
}

EvalRecord eval_from_json(const Json& j) {
    EvalRecord r;
    r.id = j.at("id").get<std::string>();
    r.model_id = j.at("model").get<std::string>();
    r.task = task_kind_from_string(j.at("task").get<std::string>());
    r.size = j.at("size").get<std::string>();
    r.split = split_from_string(j.at("split").get<std::string>());
    r.mode = scratchpad::prompt_mode_from_string(j.at("mode").get<std::string>());
    r.prompt_hash = j.at("prompt_hash").get<std::string>();
    r.raw_response = j.at("raw_response").get<std::string>();
    r.error = j.value("error", std::string());
    if (!j.at("extracted").is_null()) r.extracted = j.at("extracted").get<std::string>();
    r.exact_match = j.at("exact_match").get<bool>();
    r.latency_ms = j.value("latency_ms", 0.0);
    for (const auto& p : j.value("partial", Json::array())) r.partial.emplace_back(p.at(0), p.at(1));
    if (j.contains("classification")) {
        analysis::NodeClassification c;
        const auto& cj = j.at("classification");
        c.answer_correct = cj.at("answer_correct").get<bool>();
        for (const auto& n : cj.at("nodes")) {
            analysis::NodeClass nc;
            nc.id = n.at(0).get<std::string>();
            nc.category = category_from_string(n.at(1).get<std::string>());
            nc.layer = n.at(2).get<int>();
            nc.value_correct = n.at(3).get<bool>();
            nc.computation_correct = n.at(4).get<bool>();
            ++c.counts[static_cast<int>(nc.category)];
            c.nodes.push_back(std::move(nc));
        }
        r.classification = std::move(c);
    }
    return r;
}

void write_evals(const std::string& path, const std::vector<EvalRecord>& records) {
    std::vector<Json> rows;
    rows.reserve(records.size());
    for (const auto& r : records) rows.push_back(eval_to_json(r));
    write_jsonl(path, rows);
}

std::vector<EvalRecord> read_evals(const std::string& path) {
    std::vector<EvalRecord> out;
    for (const auto& j : read_jsonl(path)) out.push_back(eval_from_json(j));
    return out;
}

std::vector<std::size_t> evaluation_subset(const std::vector<DatasetRecord>& dataset, const EvalConfig& cfg) {
    std::map<std::string, std::vector<std::size_t>> buckets;
    for (std::size_t i = 0; i < dataset.size(); ++i)
        if (std::find(cfg.splits.begin(), cfg.splits.end(), dataset[i].split) != cfg.splits.end())
            buckets[std::string(compgraph::to_string(dataset[i].task)) + "/" + size_label(dataset[i].task, dataset[i].size)]
                .push_back(i);
    std::vector<std::size_t> out;
    for (auto& [label, idx] : buckets) {
        if (cfg.sample_per_size > 0 && idx.size() > cfg.sample_per_size) {
            std::mt19937_64 rng(derive_seed(cfg.seed, hash_string("eval-" + label)));
            std::shuffle(idx.begin(), idx.end(), rng);
            idx.resize(cfg.sample_per_size);
        }
        out.insert(out.end(), idx.begin(), idx.end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<scratchpad::Exemplar> select_exemplars(const std::vector<DatasetRecord>& dataset, int count,
                                                   std::uint64_t seed) {
    std::vector<std::size_t> train;
    for (std::size_t i = 0; i < dataset.size(); ++i)
        if (dataset[i].split == Split::Train) train.push_back(i);
    std::mt19937_64 rng(derive_seed(seed, hash_string("exemplars")));
    std::shuffle(train.begin(), train.end(), rng);
    train.resize(std::min<std::size_t>(train.size(), static_cast<std::size_t>(std::max(0, count))));
    std::vector<scratchpad::Exemplar> out;
    for (auto i : train) out.push_back({dataset[i].question, dataset[i].answer, dataset[i].scratchpad});
    return out;
}

void score(EvalRecord& rec, const DatasetRecord& truth) {
    const auto* inst = truth.instance();
    const auto& sink = truth.graph.node(truth.graph.sink()).value;
    rec.extracted.reset();
    rec.exact_match = false;
    rec.partial.clear();
    rec.classification.reset();
    std::optional<NodeValue> answer;
    try {
        if (rec.mode == scratchpad::PromptMode::FewShotScratchpad) {
            auto pred = scratchpad::parse(rec.raw_response, truth.graph, inst);
            const auto eval = oracle::evaluator_for(truth.graph, inst);
            rec.classification = analysis::classify_nodes(truth.graph, pred, &eval);
            answer = pred.final_answer;
        }
        if (!answer) answer = scratchpad::extract_final_answer(rec.raw_response, truth.task, inst);
    } catch (const std::exception& e) {
        if (rec.error.empty()) rec.error = std::string("scoring: ") + e.what();
    }
    if (answer) rec.extracted = describe(*answer);
    rec.exact_match = answer && *answer == sink;

    switch (truth.task) {
        case TaskKind::Multiplication: {
            const auto want = *as_number(sink);
            const auto pm = answer && as_number(*answer) ? mult::partial_metrics(*as_number(*answer), want)
                                                         : mult::partial_metrics(std::string_view("?"), want);
            const auto v = pm.as_vector();
            for (std::size_t k = 0; k < v.size(); ++k) rec.partial.emplace_back(mult::partial_metric_names()[k], v[k]);
            break;
        }
        case TaskKind::DynamicProgramming: {
            const auto& want = std::get<DigitSeq>(sink).digits;
            std::vector<int> got;
            if (answer)
                if (const auto* s = std::get_if<DigitSeq>(&*answer)) got.assign(s->digits.begin(), s->digits.end());
            const auto acc = dp::per_position_accuracy(got, {want.begin(), want.end()});
            for (std::size_t k = 0; k < acc.size(); ++k) rec.partial.emplace_back("o" + std::to_string(k + 1), acc[k]);
            break;
        }
        case TaskKind::Puzzle: {
            const auto& want = std::get<PartialTable>(sink);
            std::size_t hit = 0;
            if (answer)
                if (const auto* t = std::get_if<PartialTable>(&*answer))
                    for (const auto& c : want.cells)
                        if (const auto* f = t->find(c.house, c.attribute); f && f->value == c.value) ++hit;
            rec.partial.emplace_back("cell_accuracy",
                                     want.cells.empty() ? 0.0 : static_cast<double>(hit) / want.cells.size());
            break;
        }
    }
}

namespace {

template <class Fn>
void parallel_for(std::size_t n, unsigned workers, Fn fn) {
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex mu;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next++) < n;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace

std::vector<EvalRecord> evaluate(Model& model, const ModelSpec& spec, const std::vector<DatasetRecord>& dataset,
                                 const EvalConfig& cfg) {
    const auto subset = evaluation_subset(dataset, cfg);
    const auto exemplars = select_exemplars(dataset, cfg.exemplars, cfg.seed);
    ResponseCache cache(cfg.cache_path);
    const bool use_cache = !cfg.cache_path.empty();
    std::vector<EvalRecord> out(subset.size());
    unsigned workers = cfg.workers;
    if (spec.kind == ModelKind::Http) workers = std::min(workers, std::max(1u, spec.concurrency));
    parallel_for(subset.size(), workers, [&](std::size_t k) {
        const auto& rec = dataset[subset[k]];
        std::vector<scratchpad::Exemplar> shots;
        for (const auto& e : exemplars)
            if (e.question != rec.question) shots.push_back(e);
        const auto prompt = scratchpad::build_prompt(rec.task, cfg.mode, shots, rec.question);
        auto& e = out[k];
        e.id = rec.id;
        e.model_id = spec.id;
        e.task = rec.task;
        e.size = size_label(rec.task, rec.size);
        e.split = rec.split;
        e.mode = cfg.mode;
        const auto key = ResponseCache::key(spec.id + "/" + std::string(scratchpad::to_string(cfg.mode)), prompt);
        e.prompt_hash = key.substr(key.rfind(':') + 1);
        if (auto hit = use_cache ? cache.get(key) : std::nullopt) {
            e.raw_response = *hit;
            e.cached = true;
        } else {
            try {
                auto reply = model.complete(prompt, rec, cfg.mode);
                e.raw_response = reply.text;
                e.error = reply.error;
                e.latency_ms = spec.kind == ModelKind::Http ? reply.latency_ms : 0.0;
                if (use_cache && reply.error.empty()) cache.put(key, reply.text);
            } catch (const std::exception& ex) {
                e.error = std::string("model: ") + ex.what();
            }
        }
        score(e, rec);
    });
    return out;
}

void classify(std::vector<EvalRecord>& records, const std::vector<DatasetRecord>& dataset, unsigned workers) {
    std::map<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < dataset.size(); ++i) by_id[dataset[i].id] = i;
    parallel_for(records.size(), workers, [&](std::size_t k) {
        auto it = by_id.find(records[k].id);
        if (it == by_id.end()) throw std::invalid_argument("record " + records[k].id + " is not in the dataset");
        score(records[k], dataset[it->second]);
    });
}

// ---------------------------------------------------------------------------
// Reports

namespace {

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
}

struct Tally {
    std::size_t n = 0, hits = 0;
};

/// Groups in first-seen order.
template <class Key>
struct OrderedTally {
    std::vector<std::pair<Key, Tally>> rows;
    std::map<Key, std::size_t> where;

    Tally& operator[](const Key& k) {
        auto [it, fresh] = where.emplace(k, rows.size());
        if (fresh) rows.push_back({k, {}});
        return rows[it->second].second;
    }
};

}  // namespace

std::vector<std::string> write_report(const std::string& dir, const std::vector<DatasetRecord>& dataset,
                                      const std::vector<EvalRecord>& records, const fc::FingerprintIndex* index) {
    std::filesystem::create_directories(dir);
    std::vector<std::string> written;
    auto emit = [&](const std::string& name, const std::string& text) {
        const auto path = (std::filesystem::path(dir) / name).string();
        write_text(path, text);
        written.push_back(path);
    };

    // Size-grid accuracy.
    using Key = std::tuple<std::string, std::string, std::string, std::string>;
    OrderedTally<Key> grid, splits;
    for (const auto& r : records) {
        const std::string task(compgraph::to_string(r.task)), mode(scratchpad::to_string(r.mode));
        auto& g = grid[{task, r.size, r.model_id, mode}];
        ++g.n;
        g.hits += r.exact_match;
        auto& s = splits[{task, r.model_id, mode, std::string(to_string(r.split))}];
        ++s.n;
        s.hits += r.exact_match;
    }
    std::string heat = "task,size,model,mode,count,accuracy\n";
    for (const auto& [k, t] : grid.rows)
        heat += std::get<0>(k) + "," + std::get<1>(k) + "," + csv_field(std::get<2>(k)) + "," + std::get<3>(k) + "," +
                std::to_string(t.n) + "," + fixed(static_cast<double>(t.hits) / t.n) + "\n";
    emit("heatmap.csv", heat);
    std::string split = "task,model,mode,split,count,accuracy\n";
    for (const auto& [k, t] : splits.rows)
        split += std::get<0>(k) + "," + csv_field(std::get<1>(k)) + "," + std::get<2>(k) + "," + std::get<3>(k) + "," +
                 std::to_string(t.n) + "," + fixed(static_cast<double>(t.hits) / t.n) + "\n";
    emit("split_accuracy.csv", split);

    // Per-layer error ratios over classified records.
    std::vector<analysis::NodeClassification> corpus;
    for (const auto& r : records)
        if (r.classification) corpus.push_back(*r.classification);
    std::string layers = "layer,present,absent,fully_correct,local,propagation,restoration\n";
    if (!corpus.empty())
        for (const auto& l : analysis::layer_error_ratios(corpus)) {
            layers += std::to_string(l.layer) + "," + std::to_string(l.present) + "," + std::to_string(l.absent);
            for (double v : l.ratio) layers += "," + fixed(v);
            layers += "\n";
        }
    emit("error_layers.csv", layers);

    // Surface patterns.
    std::map<std::string, const DatasetRecord*> by_id;
    for (const auto& d : dataset) by_id[d.id] = &d;
    std::vector<analysis::SurfaceSample> samples;
    for (const auto& r : records) {
        auto it = by_id.find(r.id);
        if (it == by_id.end()) continue;
        const auto& d = *it->second;
        analysis::SurfaceSample s;
        s.task = r.task;
        s.size = r.size;
        s.truth = d.graph.node(d.graph.sink()).value;
        if (r.mode == scratchpad::PromptMode::FewShotScratchpad) {
            auto pred = scratchpad::parse(r.raw_response, d.graph, d.instance());
            s.predicted = pred.final_answer;
        }
        if (!s.predicted) s.predicted = scratchpad::extract_final_answer(r.raw_response, r.task, d.instance());
        if (r.classification) s.internal_error = r.classification->has_error();
        samples.push_back(std::move(s));
    }
    std::string surface = "task,size,metric,value,count\n";
    for (const auto& row : analysis::surface_pattern_report(samples))
        surface += std::string(compgraph::to_string(row.task)) + "," + row.size + "," + row.metric + "," + fixed(row.value) + "," +
                   std::to_string(row.count) + "\n";
    emit("surface.csv", surface);

    if (index) {
        fc::FrequencyAggregator agg;
        for (const auto& r : records) {
            auto it = by_id.find(r.id);
            if (it == by_id.end()) continue;
            agg.add(it->second->graph, index->query(it->second->graph), r.exact_match);
        }
        std::string freq = "depth,answer_correct,mean_frequency,nodes\n";
        for (const auto& row : agg.rows())
            freq += std::to_string(row.depth) + "," + (row.answer_correct ? "true" : "false") + "," +
                    fixed(row.mean_frequency) + "," + std::to_string(row.nodes) + "\n";
        emit("fc_frequency.csv", freq);
    }
    return written;
}

}  // namespace compgraph::harness
