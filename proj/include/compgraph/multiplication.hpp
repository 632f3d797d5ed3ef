// Long-form multiplication: instances, enumeration, computation graphs and
// the partial-correctness metrics on predicted products.
//
// Node addresses use places counted from the ones digit (place 0):
//   x[p], y[p]            input digits
//   digitmult[j][i]       x[j] * y[i]
//   sum[j][i]             digitmult[j][i] + carry[j-1][i]      (j >= 1)
//   digit[j][i]           last digit of the step value
//   carry[j][i]           carry out of the step (always present)
//   partial[i]            carry[k1-1][i] . digit[k1-1][i] ... digit[0][i]
//   product               sum_i partial[i] * 10^i
#pragma once

#include "compgraph/graph.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace compgraph::mult {

struct MultSpec {
    int k1 = 1;  // digits of x
    int k2 = 1;  // digits of y
    friend bool operator==(const MultSpec&, const MultSpec&) = default;
};

struct MultInstance {
    BigInt x;
    BigInt y;

    MultSpec spec() const;
    BigInt product() const { return x * y; }
};

void check_spec(const MultSpec& spec);

/// Decimal digits, most significant first.
std::vector<int> digits_of(const BigInt& v);
int digit_count(const BigInt& v);

/// 9*10^(k1-1) * 9*10^(k2-1).
std::uint64_t instance_count(const MultSpec& spec);
/// The index-th instance in lexicographic (x, then y) order.
MultInstance instance_at(const MultSpec& spec, std::uint64_t index);
/// Streams instances [begin, end) in order; the callback returns false to stop.
void enumerate_instances(const MultSpec& spec, std::uint64_t begin, std::uint64_t end,
                         const std::function<bool(const MultInstance&)>& visit);
void enumerate_instances(const MultSpec& spec, const std::function<bool(const MultInstance&)>& visit);
MultInstance sample_instance(const MultSpec& spec, std::mt19937_64& rng);

ComputationGraph build_graph(const MultInstance& inst);

std::string x_id(int place);
std::string y_id(int place);
std::string digitmult_id(int j, int i);
std::string sum_id(int j, int i);
std::string digit_id(int j, int i);
std::string carry_id(int j, int i);
std::string partial_id(int i);
inline const char* kProductId = "product";

std::string question_text(const MultInstance& inst);
std::string answer_text(const MultInstance& inst);

struct PartialMetrics {
    int first_digit = 0;
    int first_two_digits = 0;
    int last_digit = 0;
    int last_two_digits = 0;
    int digit_count = 0;
    int trailing_zeros = 0;

    std::vector<int> as_vector() const {
        return {first_digit, first_two_digits, last_digit, last_two_digits, digit_count, trailing_zeros};
    }
};

const std::vector<std::string>& partial_metric_names();

/// Surface agreement between a predicted product (decimal text, surrounding
/// whitespace allowed) and the truth. Unparseable predictions score all zeros.
PartialMetrics partial_metrics(std::string_view predicted, const BigInt& truth);
PartialMetrics partial_metrics(const BigInt& predicted, const BigInt& truth);

}  // namespace compgraph::mult
