#include "compgraph/multiplication.hpp"

#include <algorithm>
#include <cctype>

namespace compgraph::mult {

MultSpec MultInstance::spec() const { return {digit_count(x), digit_count(y)}; }

void check_spec(const MultSpec& spec) {
    if (spec.k1 < 1 || spec.k1 > 5 || spec.k2 < 1 || spec.k2 > 5)
        throw std::invalid_argument("multiplication digit counts must lie in 1..5");
}

std::vector<int> digits_of(const BigInt& v) {
    std::vector<int> out;
    for (char c : v.str()) out.push_back(c - '0');
    return out;
}

int digit_count(const BigInt& v) { return static_cast<int>(v.str().size()); }

namespace {

std::uint64_t pow10(int k) {
    std::uint64_t r = 1;
    while (k-- > 0) r *= 10;
    return r;
}

std::uint64_t operand_count(int k) { return 9 * pow10(k - 1); }

std::string place_pair(const char* name, int j, int i) {
    return std::string(name) + "[" + std::to_string(j) + "][" + std::to_string(i) + "]";
}

}  // namespace

std::uint64_t instance_count(const MultSpec& spec) {
    check_spec(spec);
    return operand_count(spec.k1) * operand_count(spec.k2);
}

MultInstance instance_at(const MultSpec& spec, std::uint64_t index) {
    auto ny = operand_count(spec.k2);
    if (index >= instance_count(spec)) throw std::out_of_range("instance index out of range");
    return {BigInt(pow10(spec.k1 - 1) + index / ny), BigInt(pow10(spec.k2 - 1) + index % ny)};
}

void enumerate_instances(const MultSpec& spec, std::uint64_t begin, std::uint64_t end,
                         const std::function<bool(const MultInstance&)>& visit) {
    end = std::min(end, instance_count(spec));
    for (auto i = begin; i < end; ++i)
        if (!visit(instance_at(spec, i))) return;
}

void enumerate_instances(const MultSpec& spec, const std::function<bool(const MultInstance&)>& visit) {
    enumerate_instances(spec, 0, instance_count(spec), visit);
}

MultInstance sample_instance(const MultSpec& spec, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::uint64_t> d(0, instance_count(spec) - 1);
    return instance_at(spec, d(rng));
}

std::string x_id(int place) { return "x[" + std::to_string(place) + "]"; }
std::string y_id(int place) { return "y[" + std::to_string(place) + "]"; }
std::string digitmult_id(int j, int i) { return place_pair("digitmult", j, i); }
std::string sum_id(int j, int i) { return place_pair("sum", j, i); }
std::string digit_id(int j, int i) { return place_pair("digit", j, i); }
std::string carry_id(int j, int i) { return place_pair("carry", j, i); }
std::string partial_id(int i) { return "partial[" + std::to_string(i) + "]"; }

ComputationGraph build_graph(const MultInstance& inst) {
    auto xd = digits_of(inst.x);
    auto yd = digits_of(inst.y);
    const int k1 = static_cast<int>(xd.size()), k2 = static_cast<int>(yd.size());
    if (inst.x <= 0 || inst.y <= 0) throw std::invalid_argument("operands must be positive");

    GraphBuilder b(TaskKind::Multiplication);
    for (int p = 0; p < k1; ++p) b.add(x_id(p), make_digit(xd[k1 - 1 - p]));
    for (int p = 0; p < k2; ++p) b.add(y_id(p), make_digit(yd[k2 - 1 - p]));

    std::vector<std::string> partials;
    for (int i = 0; i < k2; ++i) {
        for (int j = 0; j < k1; ++j) {
            b.compute(digitmult_id(j, i), Op::DigitMul, {x_id(j), y_id(i)});
            std::string step = digitmult_id(j, i);
            if (j > 0) {
                b.compute(sum_id(j, i), Op::Add, {digitmult_id(j, i), carry_id(j - 1, i)});
                step = sum_id(j, i);
            }
            b.compute(digit_id(j, i), Op::Mod10, {step});
            b.compute(carry_id(j, i), Op::CarryOver, {step});
        }
        std::vector<std::string> parts{carry_id(k1 - 1, i)};
        for (int j = k1 - 1; j >= 0; --j) parts.push_back(digit_id(j, i));
        b.compute(partial_id(i), Op::ConcatDigits, parts);
        partials.push_back(partial_id(i));
    }
    b.compute(kProductId, Op::ShiftedSum, partials);
    b.set_sink(kProductId);
    return std::move(b).build();
}

std::string question_text(const MultInstance& inst) {
    return "What is " + inst.x.str() + " times " + inst.y.str() + "?";
}

std::string answer_text(const MultInstance& inst) { return inst.product().str(); }

const std::vector<std::string>& partial_metric_names() {
    static const std::vector<std::string> names{"first_digit", "first_two_digits", "last_digit",
                                                "last_two_digits", "digit_count", "trailing_zeros"};
    return names;
}

namespace {

int trailing_zero_count(const std::string& s) {
    if (s == "0") return 0;
    int n = 0;
    for (auto it = s.rbegin(); it != s.rend() && *it == '0'; ++it) ++n;
    return n;
}

std::string suffix(const std::string& s, std::size_t n) { return s.size() <= n ? s : s.substr(s.size() - n); }

}  // namespace

PartialMetrics partial_metrics(const BigInt& predicted, const BigInt& truth) {
    if (truth <= 0) throw std::invalid_argument("truth must be positive");
    PartialMetrics m;
    if (predicted < 0) return m;
    const auto p = predicted.str(), t = truth.str();
    m.first_digit = p.substr(0, 1) == t.substr(0, 1);
    m.first_two_digits = p.substr(0, 2) == t.substr(0, 2);
    m.last_digit = suffix(p, 1) == suffix(t, 1);
    m.last_two_digits = suffix(p, 2) == suffix(t, 2);
    m.digit_count = p.size() == t.size();
    m.trailing_zeros = trailing_zero_count(p) == trailing_zero_count(t);
    return m;
}

PartialMetrics partial_metrics(std::string_view predicted, const BigInt& truth) {
    auto b = predicted.find_first_not_of(" \t\r\n");
    auto e = predicted.find_last_not_of(" \t\r\n.");
    if (b == std::string_view::npos || e < b) return partial_metrics(BigInt(-1), truth);
    auto core = predicted.substr(b, e - b + 1);
    auto value = core.front() == '-' ? std::nullopt : parse_decimal(core);
    return partial_metrics(value ? *value : BigInt(-1), truth);
}

}  // namespace compgraph::mult
