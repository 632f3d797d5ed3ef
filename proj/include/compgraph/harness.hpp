// Datasets with splits, model evaluation (HTTP endpoint or noisy oracle),
// response caching, and the CSV report bundle.
//
// Datasets and eval records are JSONL, one object per line. Everything except
// HTTP timing is deterministic under the configured seeds and independent of
// the worker count.
#pragma once

#include "compgraph/analysis.hpp"
#include "compgraph/graph.hpp"
#include "compgraph/puzzle.hpp"
#include "compgraph/scratchpad.hpp"
#include "compgraph/serialize.hpp"
#include "compgraph/subgraph_index.hpp"

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace compgraph::harness {

enum class Split { Train, Valid, Test, Ood };
std::string_view to_string(Split s);
Split split_from_string(std::string_view s);

/// Shape of one problem size. Multiplication uses k1, k2; DP uses n; puzzles
/// use K (houses) and M (attributes).
struct SizeParams {
    int k1 = 0, k2 = 0;
    int n = 0;
    int K = 0, M = 0;
    friend bool operator==(const SizeParams&, const SizeParams&) = default;
};

/// "3x2", "5" or "4x3".
std::string size_label(TaskKind task, const SizeParams& s);
/// k1*k2, n or K*M.
int problem_size(TaskKind task, const SizeParams& s);

Json puzzle_to_json(const puzzle::PuzzleInstance& inst);
puzzle::PuzzleInstance puzzle_from_json(const Json& j);

struct DatasetRecord {
    std::string id;
    TaskKind task = TaskKind::Multiplication;
    SizeParams size;
    std::string question, answer, scratchpad;
    ComputationGraph graph;
    std::optional<puzzle::PuzzleInstance> puzzle;
    GraphStats stats;
    Split split = Split::Train;

    const puzzle::PuzzleInstance* instance() const { return puzzle ? &*puzzle : nullptr; }
};

Json record_to_json(const DatasetRecord& r);
DatasetRecord record_from_json(const Json& j);

struct SizeSpec {
    SizeParams params;
    bool exhaustive = true;  // puzzles are always sampled
    std::uint64_t count = 0;  // sampled instances when not exhaustive
};

struct DatasetConfig {
    TaskKind task = TaskKind::Multiplication;
    std::vector<SizeSpec> sizes;      // in-domain
    std::vector<SizeSpec> ood_sizes;  // every record tagged ood
    double train = 0.8, valid = 0.1, test = 0.1;
    std::uint64_t seed = 0;
    bool hard_clues = false;
};

DatasetConfig dataset_config_from_json(const Json& j);

/// Split tags for n in-domain records: round(n*train) train, round(n*valid)
/// valid, the rest test, assigned over a seeded permutation. Throws when the
/// fractions do not sum to 1.
std::vector<Split> split_plan(std::size_t n, double train, double valid, double test, std::uint64_t seed);

/// Streams records in generation order (in-domain sizes, then ood sizes).
void build_dataset(const DatasetConfig& cfg, const std::function<void(DatasetRecord&&)>& sink);
std::vector<DatasetRecord> build_dataset(const DatasetConfig& cfg);

void write_jsonl(const std::string& path, const std::vector<Json>& rows);
std::vector<Json> read_jsonl(const std::string& path);
void write_dataset(const std::string& path, const std::vector<DatasetRecord>& records);
std::vector<DatasetRecord> read_dataset(const std::string& path);

enum class GraphStat { Size, Depth, Width };
GraphStat graph_stat_from_string(std::string_view s);

/// Records whose stat exceeds the threshold become ood; the rest keep their tag.
void split_by_graph_stat(std::vector<DatasetRecord>& records, GraphStat stat, double threshold);

// ---------------------------------------------------------------------------
// Models

enum class ModelKind { Http, NoisyOracle };

struct ModelSpec {
    ModelKind kind = ModelKind::NoisyOracle;
    std::string id = "oracle";
    // http
    std::string url;
    std::string model_name;                 // "model" field of the request
    std::string token_env = "COMPGRAPH_API_TOKEN";
    std::string response_path = "/choices/0/message/content";  // JSON pointer into the reply
    double temperature = 1.0;
    double top_p = 0.7;
    int max_retries = 3;
    int retry_backoff_ms = 250;
    int timeout_s = 120;
    unsigned concurrency = 4;
    double requests_per_second = 0;  // 0 disables the rate limit
    // oracle
    double epsilon = 0.0;
    double c = 0.0;
    std::uint64_t seed = 0;
};

ModelSpec model_spec_from_json(const Json& j);

struct ModelReply {
    std::string text;
    std::string error;  // empty on success
    int attempts = 0;
    double latency_ms = 0;
};

class Model {
public:
    virtual ~Model() = default;
    virtual ModelReply complete(const std::string& prompt, const DatasetRecord& record,
                                scratchpad::PromptMode mode) = 0;
};

/// Noisy oracle: per instance, a trace from oracle::noisy_trace seeded by
/// (seed, instance id). Scratchpad prompts get the rendered trace; the other
/// modes get only the final answer of the same trace.
std::unique_ptr<Model> make_model(const ModelSpec& spec);

/// Token bucket shared by request threads.
class RateLimiter {
public:
    explicit RateLimiter(double per_second);
    void acquire();

private:
    double rate_;
    double tokens_;
    std::chrono::steady_clock::time_point last_;
    std::mutex mu_;
};

/// Responses keyed by (model id, prompt hash), appended to a JSONL file so
/// interrupted runs resume without repeating requests.
class ResponseCache {
public:
    ResponseCache() = default;
    explicit ResponseCache(std::string path);

    static std::string key(const std::string& model_id, const std::string& prompt);
    std::optional<std::string> get(const std::string& key) const;
    void put(const std::string& key, const std::string& response);
    std::size_t size() const;

private:
    std::string path_;
    std::map<std::string, std::string> entries_;
    mutable std::mutex mu_;
};

// ---------------------------------------------------------------------------
// Evaluation

struct EvalConfig {
    scratchpad::PromptMode mode = scratchpad::PromptMode::FewShotScratchpad;
    int exemplars = 5;
    std::vector<Split> splits{Split::Test, Split::Ood};
    std::size_t sample_per_size = 500;  // 0 keeps all
    unsigned workers = 1;
    std::string cache_path;  // empty disables the cache
    std::uint64_t seed = 0;
};

EvalConfig eval_config_from_json(const Json& j);

struct EvalRecord {
    std::string id;
    std::string model_id;
    TaskKind task = TaskKind::Multiplication;
    std::string size;
    Split split = Split::Test;
    scratchpad::PromptMode mode = scratchpad::PromptMode::ZeroShot;
    std::string prompt_hash;
    std::string raw_response;
    std::string error;
    bool cached = false;
    std::optional<std::string> extracted;  // describe() of the extracted answer
    bool exact_match = false;
    std::vector<std::pair<std::string, double>> partial;
    std::optional<analysis::NodeClassification> classification;
    double latency_ms = 0;  // 0 for the oracle
};

Json eval_to_json(const EvalRecord& r);
EvalRecord eval_from_json(const Json& j);
void write_evals(const std::string& path, const std::vector<EvalRecord>& records);
std::vector<EvalRecord> read_evals(const std::string& path);

/// Records picked for evaluation: the configured splits, at most
/// sample_per_size per size bucket (seeded), in dataset order.
std::vector<std::size_t> evaluation_subset(const std::vector<DatasetRecord>& dataset, const EvalConfig& cfg);

/// Seeded pick of exemplars from the train split.
std::vector<scratchpad::Exemplar> select_exemplars(const std::vector<DatasetRecord>& dataset, int count,
                                                   std::uint64_t seed);

/// Queries the model for every selected record. Transport and parse failures
/// are recorded per instance. Output order is the dataset order.
std::vector<EvalRecord> evaluate(Model& model, const ModelSpec& spec, const std::vector<DatasetRecord>& dataset,
                                 const EvalConfig& cfg);

/// Answer extraction, metrics and (scratchpad mode) node classification for
/// one raw response.
void score(EvalRecord& rec, const DatasetRecord& truth);

/// Re-scores stored records against the dataset (matched by id).
void classify(std::vector<EvalRecord>& records, const std::vector<DatasetRecord>& dataset, unsigned workers = 1);

// ---------------------------------------------------------------------------
// Reports

/// Writes heatmap.csv, split_accuracy.csv, error_layers.csv, surface.csv and,
/// when an index is given, fc_frequency.csv. Returns the written paths.
std::vector<std::string> write_report(const std::string& dir, const std::vector<DatasetRecord>& dataset,
                                      const std::vector<EvalRecord>& records,
                                      const fc::FingerprintIndex* index = nullptr);

}  // namespace compgraph::harness
