// compgraph: dataset generation, graph statistics, information gain, model
// evaluation, error classification, subgraph index, theory simulation and
// report emission.

#include "compgraph/analysis.hpp"
#include "compgraph/harness.hpp"
#include "compgraph/subgraph_index.hpp"
#include "compgraph/theory.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <regex>
#include <sstream>

using namespace compgraph;
using namespace compgraph::harness;

namespace {

Json load_config(const std::string& path) {
    if (path.empty()) return Json::object();
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config " + path);
    return Json::parse(in);
}

Json section(const Json& cfg, const char* name) { return cfg.contains(name) ? cfg.at(name) : Json::object(); }

SizeParams parse_size(TaskKind task, const std::string& s) {
    static const std::regex pair_re(R"((\d+)x(\d+))"), one_re(R"(\d+)");
    std::smatch m;
    SizeParams p;
    if (task == TaskKind::DynamicProgramming) {
        if (!std::regex_match(s, one_re)) throw std::invalid_argument("dp size must be a list length: " + s);
        p.n = std::stoi(s);
        return p;
    }
    if (!std::regex_match(s, m, pair_re)) throw std::invalid_argument("size must look like AxB: " + s);
    if (task == TaskKind::Multiplication) {
        p.k1 = std::stoi(m[1]);
        p.k2 = std::stoi(m[2]);
    } else {
        p.K = std::stoi(m[1]);
        p.M = std::stoi(m[2]);
    }
    return p;
}

/// "1..5" or "1,2,8".
std::vector<int> parse_range(const std::string& s) {
    static const std::regex range_re(R"((\d+)\.\.(\d+))");
    std::smatch m;
    std::vector<int> out;
    if (std::regex_match(s, m, range_re)) {
        for (int i = std::stoi(m[1]); i <= std::stoi(m[2]); ++i) out.push_back(i);
        return out;
    }
    std::stringstream ss(s);
    for (std::string part; std::getline(ss, part, ',');) out.push_back(std::stoi(part));
    return out;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string part; std::getline(ss, part, ',');)
        if (!part.empty()) out.push_back(part);
    return out;
}

void write_file(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

std::string num(double v) {
    std::ostringstream o;
    o.precision(6);
    o << std::fixed << v;
    return o.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Computation-graph toolkit for compositional reasoning tasks"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON config with dataset/model/eval sections");

    // gen ---------------------------------------------------------------
    auto* gen = app.add_subcommand("gen", "Build a dataset (JSONL)");
    std::string g_task, g_out = "dataset.jsonl", g_fractions, g_stat;
    std::vector<std::string> g_sizes, g_ood;
    std::uint64_t g_count = 0, g_seed = 0;
    double g_threshold = 0;
    bool g_seed_set = false;
    gen->add_option("--task", g_task, "multiplication | dp | puzzle");
    gen->add_option("--size", g_sizes, "In-domain size: AxB (multiplication, puzzle) or n (dp)");
    gen->add_option("--ood-size", g_ood, "Out-of-domain size");
    gen->add_option("--count", g_count, "Instances per size; 0 enumerates every instance");
    gen->add_option("--fractions", g_fractions, "train,valid,test (default 0.8,0.1,0.1)");
    gen->add_option("--seed", g_seed)->each([&](const std::string&) { g_seed_set = true; });
    gen->add_option("--split-stat", g_stat, "Retag records above --split-threshold as ood: size | depth | width");
    gen->add_option("--split-threshold", g_threshold);
    gen->add_option("-o,--out", g_out);

    // stats -------------------------------------------------------------
    auto* stats = app.add_subcommand("stats", "Graph metrics of a dataset (CSV)");
    std::string s_dataset, s_out;
    bool s_per_record = false;
    stats->add_option("--dataset", s_dataset)->required();
    stats->add_flag("--per-record", s_per_record);
    stats->add_option("-o,--out", s_out);

    // ig ----------------------------------------------------------------
    auto* ig = app.add_subcommand("ig", "Relative information gain table (CSV)");
    std::string i_task = "multiplication", i_size = "2x2", i_inputs, i_outputs, i_out;
    std::uint64_t i_samples = 0, i_seed = 0;
    ig->add_option("--task", i_task, "multiplication | dp");
    ig->add_option("--size", i_size, "k1xk2 or n");
    ig->add_option("--inputs", i_inputs, "Input set, e.g. x1,y1; default: every single input and pair");
    ig->add_option("--outputs", i_outputs, "Output variables; default: all");
    ig->add_option("--samples", i_samples, "Sample this many instances instead of enumerating");
    ig->add_option("--seed", i_seed);
    ig->add_option("-o,--out", i_out);

    // eval --------------------------------------------------------------
    auto* ev = app.add_subcommand("eval", "Query a model on a dataset (JSONL)");
    std::string e_dataset, e_out = "evals.jsonl", e_kind, e_mode, e_cache, e_splits, e_url, e_id;
    double e_eps = -1, e_c = -1;
    int e_exemplars = -1;
    long long e_sample = -1;
    unsigned e_workers = 0;
    ev->add_option("--dataset", e_dataset)->required();
    ev->add_option("--model", e_kind, "noisy-oracle | http");
    ev->add_option("--model-id", e_id);
    ev->add_option("--url", e_url);
    ev->add_option("--epsilon", e_eps);
    ev->add_option("--c", e_c);
    ev->add_option("--mode", e_mode, "zero-shot | few-shot-qa | few-shot-scratchpad");
    ev->add_option("--exemplars", e_exemplars);
    ev->add_option("--sample", e_sample, "Records per size (0 keeps all)");
    ev->add_option("--splits", e_splits, "Comma list, default test,ood");
    ev->add_option("--workers", e_workers);
    ev->add_option("--cache", e_cache);
    ev->add_option("-o,--out", e_out);

    // classify ----------------------------------------------------------
    auto* cl = app.add_subcommand("classify", "Re-score eval records and classify scratchpad nodes");
    std::string c_dataset, c_evals, c_out = "classified.jsonl", c_layers;
    unsigned c_workers = 1;
    cl->add_option("--dataset", c_dataset)->required();
    cl->add_option("--evals", c_evals)->required();
    cl->add_option("--workers", c_workers);
    cl->add_option("--layers", c_layers, "Also write per-layer category ratios (CSV)");
    cl->add_option("-o,--out", c_out);

    // index -------------------------------------------------------------
    auto* ix = app.add_subcommand("index", "Full-computation index over a dataset split");
    ix->require_subcommand(1);
    auto* ix_build = ix->add_subcommand("build", "Index every node of the chosen split");
    auto* ix_query = ix->add_subcommand("query", "Frequency of query nodes in the index, by depth (CSV)");
    std::string x_dataset, x_split = "train", x_mode = "values-and-ops", x_out, x_index, x_evals, x_qsplit = "test";
    ix_build->add_option("--dataset", x_dataset)->required();
    ix_build->add_option("--split", x_split);
    ix_build->add_option("--match", x_mode, "values-and-ops | ops-only");
    ix_build->add_option("-o,--out", x_out)->required();
    ix_query->add_option("--index", x_index)->required();
    ix_query->add_option("--dataset", x_dataset)->required();
    ix_query->add_option("--split", x_qsplit);
    ix_query->add_option("--evals", x_evals, "Eval records supplying answer correctness");
    ix_query->add_option("-o,--out", x_out);

    // sim ---------------------------------------------------------------
    auto* sim = app.add_subcommand("sim", "Monte Carlo check of the error-compounding bounds (CSV)");
    std::string m_mode = "width", m_ns = "1..10", m_comb = "injective", m_task = "multiplication", m_out;
    theory::SimulationSpec m_spec;
    bool m_collision = false;
    sim->add_option("--mode", m_mode, "width | depth | state-transition | shifted-addition | task-step");
    sim->add_option("--n", m_ns, "Sizes: a..b or a comma list");
    sim->add_option("--epsilon", m_spec.epsilon);
    sim->add_option("--c", m_spec.c);
    sim->add_option("--combiner", m_comb, "injective | exact-rate | modular-sum");
    sim->add_option("--alpha", m_spec.alpha);
    sim->add_option("--beta", m_spec.beta);
    sim->add_option("--domain", m_spec.domain);
    sim->add_option("--digits", m_spec.digits);
    sim->add_option("--task", m_task);
    sim->add_option("--trials", m_spec.trials);
    sim->add_option("--seed", m_spec.seed);
    sim->add_option("--threads", m_spec.threads);
    sim->add_flag("--collision", m_collision, "Run the collision-rate check instead");
    sim->add_option("-o,--out", m_out);

    // report ------------------------------------------------------------
    auto* rep = app.add_subcommand("report", "CSV bundle from eval records");
    std::string r_dataset, r_evals, r_index, r_dir = "report";
    rep->add_option("--dataset", r_dataset)->required();
    rep->add_option("--evals", r_evals)->required();
    rep->add_option("--index", r_index);
    rep->add_option("-o,--out", r_dir);

    CLI11_PARSE(app, argc, argv);

    try {
        const Json cfg = load_config(config_path);

        if (gen->parsed()) {
            Json d = section(cfg, "dataset");
            if (!g_task.empty()) d["task"] = g_task;
            if (!d.contains("task")) throw std::invalid_argument("gen needs --task or a dataset config");
            auto dc = dataset_config_from_json(d);
            const auto task = dc.task;
            auto spec_of = [&](const std::string& s) {
                return SizeSpec{parse_size(task, s), g_count == 0 && task != TaskKind::Puzzle,
                                g_count ? g_count : (task == TaskKind::Puzzle ? 100 : 0)};
            };
            if (!g_sizes.empty()) {
                dc.sizes.clear();
                for (const auto& s : g_sizes) dc.sizes.push_back(spec_of(s));
            }
            if (!g_ood.empty()) {
                dc.ood_sizes.clear();
                for (const auto& s : g_ood) dc.ood_sizes.push_back(spec_of(s));
            }
            if (!g_fractions.empty()) {
                auto f = split_list(g_fractions);
                if (f.size() != 3) throw std::invalid_argument("--fractions takes three values");
                dc.train = std::stod(f[0]);
                dc.valid = std::stod(f[1]);
                dc.test = std::stod(f[2]);
            }
            if (g_seed_set) dc.seed = g_seed;
            std::ofstream out(g_out, std::ios::binary);
            if (!out) throw std::runtime_error("cannot write " + g_out);
            std::optional<GraphStat> stat;
            if (!g_stat.empty()) stat = graph_stat_from_string(g_stat);
            std::map<std::string, std::size_t> counts;
            build_dataset(dc, [&](DatasetRecord&& r) {
                if (stat) {
                    std::vector<DatasetRecord> one{std::move(r)};
                    split_by_graph_stat(one, *stat, g_threshold);
                    r = std::move(one[0]);
                }
                ++counts[std::string(to_string(r.split))];
                out << record_to_json(r).dump() << '\n';
            });
            for (const auto& [k, v] : counts) std::cerr << k << ": " << v << "\n";
            return 0;
        }

        if (stats->parsed()) {
            const auto ds = read_dataset(s_dataset);
            std::string csv;
            if (s_per_record) {
                csv = "id,task,size,split,nodes,depth,width,average_parallelism\n";
                for (const auto& r : ds)
                    csv += r.id + "," + std::string(compgraph::to_string(r.task)) + "," + size_label(r.task, r.size) +
                           "," + std::string(to_string(r.split)) + "," + std::to_string(r.stats.node_count) + "," +
                           std::to_string(r.stats.depth) + "," + std::to_string(r.stats.width) + "," +
                           compgraph::to_string(r.stats.average_parallelism) + "\n";
            } else {
                struct Agg {
                    std::size_t n = 0;
                    double nodes = 0, depth = 0, width = 0, par = 0;
                };
                std::vector<std::string> order;
                std::map<std::string, Agg> by;
                for (const auto& r : ds) {
                    const auto key = std::string(compgraph::to_string(r.task)) + "," + size_label(r.task, r.size);
                    if (!by.count(key)) order.push_back(key);
                    auto& a = by[key];
                    ++a.n;
                    a.nodes += r.stats.node_count;
                    a.depth += r.stats.depth;
                    a.width += r.stats.width;
                    a.par += boost::rational_cast<double>(r.stats.average_parallelism);
                }
                csv = "task,size,count,mean_nodes,mean_depth,mean_width,mean_average_parallelism\n";
                for (const auto& k : order) {
                    const auto& a = by[k];
                    csv += k + "," + std::to_string(a.n) + "," + num(a.nodes / a.n) + "," + num(a.depth / a.n) + "," +
                           num(a.width / a.n) + "," + num(a.par / a.n) + "\n";
                }
            }
            write_file(s_out, csv);
            return 0;
        }

        if (ig->parsed()) {
            analysis::DistributionSpec spec;
            spec.task = task_kind_from_string(i_task);
            const auto sp = parse_size(spec.task, i_size);
            spec.k1 = sp.k1;
            spec.k2 = sp.k2;
            spec.n = sp.n;
            spec.exhaustive = i_samples == 0;
            spec.sample_count = i_samples;
            spec.seed = i_seed;
            analysis::TaskDistribution dist(spec);
            std::vector<std::vector<std::string>> input_sets;
            if (!i_inputs.empty()) {
                input_sets.push_back(split_list(i_inputs));
            } else {
                const auto& in = dist.input_labels();
                for (const auto& a : in) input_sets.push_back({a});
                for (std::size_t i = 0; i < in.size(); ++i)
                    for (std::size_t j = i + 1; j < in.size(); ++j) input_sets.push_back({in[i], in[j]});
            }
            const auto outputs = i_outputs.empty() ? dist.output_labels() : split_list(i_outputs);
            std::string csv = "task,size,inputs,output,relative_ig,ci_half_width\n";
            for (const auto& y : outputs)
                for (const auto& xs : input_sets) {
                    auto r = dist.relative_ig(xs, y);
                    std::string label;
                    for (const auto& x : xs) label += (label.empty() ? "" : " ") + x;
                    csv += i_task + "," + i_size + "," + label + "," + y + "," + num(r.value) + "," +
                           num(r.ci_half_width) + "\n";
                }
            write_file(i_out, csv);
            return 0;
        }

        if (ev->parsed()) {
            Json mj = section(cfg, "model");
            if (!e_kind.empty()) mj["kind"] = e_kind;
            if (!e_id.empty()) mj["id"] = e_id;
            if (!e_url.empty()) mj["url"] = e_url;
            if (e_eps >= 0) mj["epsilon"] = e_eps;
            if (e_c >= 0) mj["c"] = e_c;
            const auto ms = model_spec_from_json(mj);
            Json cj = section(cfg, "eval");
            if (!e_mode.empty()) cj["mode"] = e_mode;
            if (e_exemplars >= 0) cj["exemplars"] = e_exemplars;
            if (e_sample >= 0) cj["sample_per_size"] = e_sample;
            if (e_workers > 0) cj["workers"] = e_workers;
            if (!e_cache.empty()) cj["cache"] = e_cache;
            if (!e_splits.empty()) cj["splits"] = split_list(e_splits);
            const auto ec = eval_config_from_json(cj);
            const auto ds = read_dataset(e_dataset);
            auto model = make_model(ms);
            const auto recs = evaluate(*model, ms, ds, ec);
            write_evals(e_out, recs);
            std::size_t hits = 0, errors = 0;
            for (const auto& r : recs) {
                hits += r.exact_match;
                errors += !r.error.empty();
            }
            std::cerr << recs.size() << " records, exact match " << hits << ", errors " << errors << "\n";
            return 0;
        }

        if (cl->parsed()) {
            const auto ds = read_dataset(c_dataset);
            auto recs = read_evals(c_evals);
            classify(recs, ds, c_workers);
            write_evals(c_out, recs);
            if (!c_layers.empty()) {
                std::vector<analysis::NodeClassification> corpus;
                for (const auto& r : recs)
                    if (r.classification) corpus.push_back(*r.classification);
                std::string csv = "layer,present,absent,fully_correct,local,propagation,restoration\n";
                if (!corpus.empty())
                    for (const auto& l : analysis::layer_error_ratios(corpus)) {
                        csv += std::to_string(l.layer) + "," + std::to_string(l.present) + "," +
                               std::to_string(l.absent);
                        for (double v : l.ratio) csv += "," + num(v);
                        csv += "\n";
                    }
                write_file(c_layers, csv);
            }
            return 0;
        }

        if (ix_build->parsed()) {
            const auto ds = read_dataset(x_dataset);
            fc::FingerprintIndex idx(fc::match_mode_from_string(x_mode), x_dataset + ":" + x_split);
            const auto split = split_from_string(x_split);
            for (const auto& r : ds)
                if (r.split == split) idx.add_graph(r.graph);
            idx.save(x_out);
            std::cerr << idx.distinct() << " distinct of " << idx.total() << " full computations\n";
            return 0;
        }

        if (ix_query->parsed()) {
            const auto idx = fc::FingerprintIndex::load(x_index);
            const auto ds = read_dataset(x_dataset);
            std::map<std::string, bool> correct;
            if (!x_evals.empty())
                for (const auto& r : read_evals(x_evals)) correct[r.id] = r.exact_match;
            const auto split = split_from_string(x_qsplit);
            fc::FrequencyAggregator agg;
            for (const auto& r : ds) {
                if (r.split != split) continue;
                auto it = correct.find(r.id);
                if (!x_evals.empty() && it == correct.end()) continue;
                agg.add(r.graph, idx.query(r.graph), it == correct.end() || it->second);
            }
            std::string csv = "depth,answer_correct,mean_frequency,nodes\n";
            for (const auto& row : agg.rows())
                csv += std::to_string(row.depth) + "," + (row.answer_correct ? "true" : "false") + "," +
                       num(row.mean_frequency) + "," + std::to_string(row.nodes) + "\n";
            write_file(x_out, csv);
            return 0;
        }

        if (sim->parsed()) {
            m_spec.mode = theory::mode_from_string(m_mode);
            m_spec.ns = parse_range(m_ns);
            m_spec.combiner = theory::combiner_from_string(m_comb);
            m_spec.task = task_kind_from_string(m_task);
            if (m_collision) {
                auto r = theory::empirical_collision_check(m_spec);
                write_file(m_out, "domain,epsilon,trials,measured,expected,half_width,satisfied\n" +
                                      std::to_string(m_spec.domain) + "," + num(m_spec.epsilon) + "," +
                                      std::to_string(r.trials) + "," + num(r.measured) + "," + num(r.expected) + "," +
                                      num(r.half_width) + "," + (r.satisfied ? "true" : "false") + "\n");
                return r.satisfied ? 0 : 2;
            }
            auto r = theory::simulate(m_spec);
            write_file(m_out, theory::csv_header() + theory::to_csv_rows(r));
            return r.all_satisfied() ? 0 : 2;
        }

        if (rep->parsed()) {
            const auto ds = read_dataset(r_dataset);
            const auto recs = read_evals(r_evals);
            std::optional<fc::FingerprintIndex> idx;
            if (!r_index.empty()) idx = fc::FingerprintIndex::load(r_index);
            for (const auto& p : write_report(r_dir, ds, recs, idx ? &*idx : nullptr)) std::cerr << p << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
