#include "compgraph/analysis.hpp"

#include "compgraph/dp.hpp"
#include "compgraph/multiplication.hpp"

#include <cmath>
#include <map>
#include <random>
#include <unordered_map>

namespace compgraph::analysis {

std::string_view to_string(Category c) {
    switch (c) {
        case Category::FullyCorrect: return "fully-correct";
        case Category::LocalError: return "local-error";
        case Category::PropagationError: return "propagation-error";
        case Category::RestorationError: return "restoration-error";
        case Category::Absent: return "absent";
    }
    return "unknown";
}

const NodeClass* NodeClassification::find(std::string_view id) const {
    for (const auto& n : nodes)
        if (n.id == id) return &n;
    return nullptr;
}

NodeClassification classify_nodes(const ComputationGraph& truth, const scratchpad::PredictedGraph& predicted,
                                  const OpEvaluator* evaluator) {
    if (predicted.task != truth.task()) throw GraphError("predicted graph belongs to another task");
    for (const auto& [id, _] : predicted.nodes)
        if (!truth.contains(id)) throw GraphError("predicted address not in the truth graph: " + id);

    const auto& nodes = truth.nodes();
    const std::size_t N = nodes.size();
    const auto layers = layer_vector(truth);
    std::vector<const NodeValue*> claim(N, nullptr);
    std::vector<char> value_ok(N, 0), fully(N, 0);

    NodeClassification out;
    out.nodes.resize(N);
    for (const auto& id : linearize(truth)) {
        const std::size_t i = truth.index_of(id);
        const Node& n = nodes[i];
        auto& nc = out.nodes[i];
        nc.id = n.id;
        nc.layer = layers[i];
        const auto* pn = predicted.find(n.id);
        if (!pn || !pn->present || !pn->value) {
            nc.category = Category::Absent;
            continue;
        }
        claim[i] = &*pn->value;
        const bool vc = *pn->value == n.value;
        value_ok[i] = vc;
        nc.value_correct = vc;
        const auto& parents = truth.parent_indices(i);
        if (parents.empty()) {
            nc.computation_correct = vc;
            nc.category = vc ? Category::FullyCorrect : Category::LocalError;
            fully[i] = vc;
            continue;
        }

        bool args_ok = true;
        std::vector<NodeValue> args;
        auto parent_claim = [&](std::size_t k) {
            if (k >= parents.size() || !claim[parents[k]]) {
                args_ok = false;
                return;
            }
            args.push_back(*claim[parents[k]]);
        };
        if (pn->written_parents.empty()) {
            for (std::size_t k = 0; k < parents.size(); ++k) parent_claim(k);
        } else {
            for (std::size_t k = 0; k < pn->written_parents.size(); ++k) {
                if (pn->written_parents[k]) args.push_back(*pn->written_parents[k]);
                else parent_claim(k);
            }
        }
        bool cc = false;
        if (args_ok) {
            auto r = evaluator ? (*evaluator)(n.op, args) : evaluate_primitive(n.op, args);
            cc = r && *r == *pn->value;
        }
        nc.computation_correct = cc;

        bool parents_ok = true, parents_fully = true;
        for (auto p : parents) {
            parents_ok = parents_ok && value_ok[p];
            parents_fully = parents_fully && fully[p];
        }
        if (vc && cc && parents_fully) nc.category = Category::FullyCorrect;
        else if (!cc && vc) nc.category = Category::RestorationError;
        else if (parents_ok && !(vc && cc)) nc.category = Category::LocalError;
        else nc.category = Category::PropagationError;
        fully[i] = nc.category == Category::FullyCorrect;
    }
    for (const auto& nc : out.nodes) ++out.counts[static_cast<int>(nc.category)];
    out.answer_correct = predicted.final_answer && *predicted.final_answer == truth.node(truth.sink()).value;
    return out;
}

std::vector<LayerRatio> layer_error_ratios(const std::vector<NodeClassification>& corpus) {
    if (corpus.empty()) throw std::invalid_argument("layer_error_ratios needs a non-empty corpus");
    std::map<int, std::array<std::size_t, kCategoryCount>> counts;
    for (const auto& c : corpus)
        for (const auto& n : c.nodes) ++counts[n.layer][static_cast<int>(n.category)];
    std::vector<LayerRatio> out;
    for (const auto& [layer, k] : counts) {
        LayerRatio r;
        r.layer = layer;
        r.absent = k[static_cast<int>(Category::Absent)];
        for (int c = 0; c < 4; ++c) r.present += k[c];
        for (int c = 0; c < 4; ++c) r.ratio[c] = r.present ? static_cast<double>(k[c]) / r.present : 0.0;
        out.push_back(r);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Relative information gain

namespace {

void mult_row(const mult::MultInstance& inst, int k1, int k2, std::vector<std::int8_t>& row) {
    row.clear();
    for (int d : mult::digits_of(inst.x)) row.push_back(static_cast<std::int8_t>(d));
    for (int d : mult::digits_of(inst.y)) row.push_back(static_cast<std::int8_t>(d));
    auto z = mult::digits_of(inst.product());
    for (int pad = k1 + k2 - static_cast<int>(z.size()); pad > 0; --pad) row.push_back(0);
    for (int d : z) row.push_back(static_cast<std::int8_t>(d));
}

void dp_row(const dp::DpInstance& inst, std::vector<std::int8_t>& row) {
    row.clear();
    for (int v : inst.input) row.push_back(static_cast<std::int8_t>(v));
    for (int o : dp::solve_dp(inst).output) row.push_back(static_cast<std::int8_t>(o));
}

long double sum_c_log_c(const std::unordered_map<std::uint64_t, std::uint64_t>& counts) {
    long double s = 0;
    for (const auto& [_, c] : counts) s += static_cast<long double>(c) * std::log(static_cast<long double>(c));
    return s;
}

}  // namespace

TaskDistribution::TaskDistribution(const DistributionSpec& spec) : spec_(spec) {
    std::uint64_t total = 0;
    if (spec.task == TaskKind::Multiplication) {
        mult::check_spec({spec.k1, spec.k2});
        for (int i = 1; i <= spec.k1; ++i) inputs_.push_back("x" + std::to_string(i));
        for (int i = 1; i <= spec.k2; ++i) inputs_.push_back("y" + std::to_string(i));
        for (int i = 1; i <= spec.k1 + spec.k2; ++i) outputs_.push_back("z" + std::to_string(i));
        total = mult::instance_count({spec.k1, spec.k2});
    } else if (spec.task == TaskKind::DynamicProgramming) {
        if (spec.n < 1 || spec.n > dp::kMaxLength) throw std::invalid_argument("DP length out of range");
        for (int i = 1; i <= spec.n; ++i) inputs_.push_back("a" + std::to_string(i));
        for (int i = 1; i <= spec.n; ++i) outputs_.push_back("o" + std::to_string(i));
        total = dp::instance_count(spec.n);
    } else {
        throw std::invalid_argument("information gain is defined for multiplication and DP only");
    }
    if (spec.exhaustive && total > kMaxExhaustive)
        throw std::invalid_argument("exhaustive enumeration limited to 10^7 instances");
    cols_ = inputs_.size() + outputs_.size();
    rows_ = spec.exhaustive ? total : spec.sample_count;
    if (rows_ == 0) throw std::invalid_argument("empty distribution");
    data_.reserve(rows_ * cols_);

    std::vector<std::int8_t> row;
    std::mt19937_64 rng(spec.seed);
    for (std::size_t r = 0; r < rows_; ++r) {
        if (spec.task == TaskKind::Multiplication) {
            auto inst = spec.exhaustive ? mult::instance_at({spec.k1, spec.k2}, r)
                                        : mult::sample_instance({spec.k1, spec.k2}, rng);
            mult_row(inst, spec.k1, spec.k2, row);
        } else {
            auto inst = spec.exhaustive ? dp::instance_at(spec.n, r) : dp::sample_instance(spec.n, rng);
            dp_row(inst, row);
        }
        data_.insert(data_.end(), row.begin(), row.end());
    }
}

int TaskDistribution::column(const std::string& label) const {
    for (std::size_t i = 0; i < inputs_.size(); ++i)
        if (inputs_[i] == label) return static_cast<int>(i);
    for (std::size_t i = 0; i < outputs_.size(); ++i)
        if (outputs_[i] == label) return static_cast<int>(inputs_.size() + i);
    throw std::invalid_argument("unknown variable: " + label);
}

double TaskDistribution::ig_over(std::size_t begin, std::size_t end, const std::vector<int>& xs, int y,
                                 double base) const {
    std::unordered_map<std::uint64_t, std::uint64_t> cx, cxy, cy;
    for (std::size_t r = begin; r < end; ++r) {
        const auto* row = &data_[r * cols_];
        std::uint64_t kx = 0;
        for (int c : xs) kx = kx * 16 + static_cast<std::uint64_t>(row[c] + 6);
        const auto vy = static_cast<std::uint64_t>(row[y] + 6);
        ++cx[kx];
        ++cxy[kx * 16 + vy];
        ++cy[vy];
    }
    // H = log N - (1/N) sum c log c, so N * (H(Y) - H(Y|X)) needs only the sums.
    const long double N = static_cast<long double>(end - begin);
    const long double sy = sum_c_log_c(cy), sx = sum_c_log_c(cx), sxy = sum_c_log_c(cxy);
    const long double hy = N * std::log(N) - sy;  // N * H(Y) in nats
    if (hy <= 1e-12L * N) return 1.0;
    const long double gain = sxy - sx - sy + N * std::log(N);  // N * I(X;Y) in nats
    // Converting both to another log base divides each by the same constant.
    const long double scale = std::log(static_cast<long double>(base));
    double ig = static_cast<double>((gain / scale) / (hy / scale));
    return std::clamp(ig, 0.0, 1.0);
}

TaskDistribution::Result TaskDistribution::relative_ig(const std::vector<std::string>& X, const std::string& Y,
                                                       double log_base) const {
    std::vector<int> xs;
    for (const auto& l : X) xs.push_back(column(l));
    if (xs.size() > 15) throw std::invalid_argument("at most 15 conditioning variables");
    const int y = column(Y);
    Result r;
    r.value = ig_over(0, rows_, xs, y, log_base);
    if (!spec_.exhaustive) {
        constexpr int kBatches = 20;
        const std::size_t per = rows_ / kBatches;
        if (per > 0) {
            double mean = 0, sq = 0;
            for (int b = 0; b < kBatches; ++b) {
                double v = ig_over(b * per, (b + 1) * per, xs, y, log_base);
                mean += v;
                sq += v * v;
            }
            mean /= kBatches;
            const double var = std::max(0.0, (sq / kBatches - mean * mean) * kBatches / (kBatches - 1));
            // Batches are rows_/20 large, so the full-sample spread is sqrt(20) smaller.
            r.ci_half_width = 1.96 * std::sqrt(var) / std::sqrt(static_cast<double>(kBatches));
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Surface patterns

namespace {

struct Acc {
    double sum = 0;
    std::size_t n = 0;
    void add(double v) {
        sum += v;
        ++n;
    }
};

}  // namespace

std::vector<SurfaceRow> surface_pattern_report(const std::vector<SurfaceSample>& corpus) {
    struct Bucket {
        TaskKind task;
        std::string size;
        std::vector<std::string> order;
        std::map<std::string, Acc> metrics;
        Acc& at(const std::string& m) {
            if (!metrics.count(m)) order.push_back(m);
            return metrics[m];
        }
    };
    std::vector<Bucket> buckets;
    for (const auto& s : corpus) {
        Bucket* b = nullptr;
        for (auto& x : buckets)
            if (x.task == s.task && x.size == s.size) b = &x;
        if (!b) b = &buckets.emplace_back(Bucket{s.task, s.size, {}, {}});

        const bool exact = s.predicted && *s.predicted == s.truth;
        b->at("exact_match").add(exact);
        if (s.task == TaskKind::Multiplication) {
            const BigInt truth = as_number(s.truth).value_or(0);
            auto pred = s.predicted ? as_number(*s.predicted) : std::nullopt;
            auto m = pred ? mult::partial_metrics(*pred, truth) : mult::partial_metrics(std::string_view{}, truth);
            auto v = m.as_vector();
            for (std::size_t k = 0; k < v.size(); ++k) b->at(mult::partial_metric_names()[k]).add(v[k]);
        } else if (s.task == TaskKind::DynamicProgramming) {
            std::vector<int> truth, pred;
            if (const auto* t = std::get_if<DigitSeq>(&s.truth)) truth.assign(t->digits.begin(), t->digits.end());
            if (s.predicted)
                if (const auto* p = std::get_if<DigitSeq>(&*s.predicted)) pred.assign(p->digits.begin(), p->digits.end());
            auto acc = dp::per_position_accuracy(pred, truth);
            for (std::size_t k = 0; k < acc.size(); ++k) b->at("o" + std::to_string(k + 1)).add(acc[k]);
        } else {
            const auto* t = std::get_if<PartialTable>(&s.truth);
            const PartialTable* p = s.predicted ? std::get_if<PartialTable>(&*s.predicted) : nullptr;
            if (t && !t->cells.empty()) {
                std::size_t hit = 0;
                for (const auto& c : t->cells)
                    if (p)
                        if (const auto* q = p->find(c.house, c.attribute); q && q->value == c.value) ++hit;
                b->at("cell_accuracy").add(static_cast<double>(hit) / t->cells.size());
            }
        }
        if (exact && s.internal_error) b->at("correct_with_internal_error").add(*s.internal_error);
    }
    std::vector<SurfaceRow> rows;
    for (const auto& b : buckets)
        for (const auto& m : b.order) {
            const auto& a = b.metrics.at(m);
            rows.push_back({b.task, b.size, m, a.n ? a.sum / a.n : 0.0, a.n});
        }
    return rows;
}

}  // namespace compgraph::analysis
