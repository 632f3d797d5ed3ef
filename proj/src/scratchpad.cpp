#include "compgraph/scratchpad.hpp"

#include "compgraph/dp.hpp"
#include "compgraph/multiplication.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>
#include <sstream>

namespace compgraph::scratchpad {

const PredictedNode* PredictedGraph::find(const std::string& id) const {
    auto it = nodes.find(id);
    return it == nodes.end() ? nullptr : &it->second;
}

PredictedGraph truth_trace(const ComputationGraph& truth) {
    PredictedGraph p;
    p.task = truth.task();
    for (const auto& n : truth.nodes()) p.nodes[n.id] = PredictedNode{true, n.value, {}, false};
    p.final_answer = truth.node(truth.sink()).value;
    return p;
}

namespace {

// ---------------------------------------------------------------------------
// Shared helpers

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            if (!cur.empty() && cur.back() == '\r') cur.pop_back();
            lines.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) lines.push_back(cur);
    return lines;
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

/// Claimed value from the trace, or the truth value when the trace lacks it.
const NodeValue& claimed(const ComputationGraph& truth, const PredictedGraph& trace, const std::string& id) {
    if (const auto* n = trace.find(id); n && n->present && n->value) return *n->value;
    return truth.node(id).value;
}

/// Argument k of the node as written, defaulting to the claimed parent value.
NodeValue written(const ComputationGraph& truth, const PredictedGraph& trace, const std::string& id, std::size_t k) {
    if (const auto* n = trace.find(id); n && k < n->written_parents.size() && n->written_parents[k])
        return *n->written_parents[k];
    return claimed(truth, trace, truth.node(id).parents.at(k));
}

std::string num(const NodeValue& v) {
    if (auto n = as_number(v)) return n->str();
    if (auto b = as_bool(v)) return *b ? "True" : "False";
    return describe(v);
}

/// Value of the same kind as the truth node: digits stay digits when in range.
NodeValue like(const NodeValue& truth_value, const BigInt& v) {
    if (std::holds_alternative<Digit>(truth_value) && v >= 0 && v <= 9) return make_digit(static_cast<int>(v));
    return make_int(v);
}

BigInt to_big(const std::string& s) { return parse_decimal(s).value_or(BigInt(0)); }

struct ParseState {
    const ComputationGraph& truth;
    PredictedGraph out;

    explicit ParseState(const ComputationGraph& g) : truth(g) {
        out.task = g.task();
        for (const auto& n : g.nodes()) out.nodes[n.id];
    }

    bool has(const std::string& id) const { return out.nodes.count(id) && out.nodes.at(id).present; }

    void set(const std::string& id, NodeValue v, std::vector<std::optional<NodeValue>> wp = {}, bool implied = false) {
        auto it = out.nodes.find(id);
        if (it == out.nodes.end()) return;
        it->second = PredictedNode{true, std::move(v), std::move(wp), implied};
    }

    void set_number(const std::string& id, const BigInt& v, std::vector<std::optional<NodeValue>> wp = {},
                    bool implied = false) {
        if (!truth.contains(id)) return;
        set(id, like(truth.node(id).value, v), std::move(wp), implied);
    }

    /// Source claims keep the first mention.
    void mention(const std::string& id, const BigInt& v) {
        if (!has(id)) set_number(id, v);
    }

    NodeValue number_arg(const std::string& id, const BigInt& v) const { return like(truth.node(id).value, v); }

    void diag(int line, std::string msg, Diagnostic::Severity s = Diagnostic::Severity::Warning) {
        out.diagnostics.push_back({s, line, std::move(msg)});
    }
};

std::string strip_prefix(std::string line, std::string_view prefix) {
    if (line.rfind(prefix, 0) == 0) line = line.substr(prefix.size());
    return line;
}

// ---------------------------------------------------------------------------
// Multiplication

const char* kPlaces[] = {"ones", "tens", "hundreds", "thousands", "ten-thousands"};
const char* kShift[] = {"", "one place", "two places", "three places", "four places"};

std::string place_name(int p) { return p < 5 ? kPlaces[p] : "10^" + std::to_string(p); }

int place_index(const std::string& name) {
    for (int p = 0; p < 5; ++p)
        if (name == kPlaces[p]) return p;
    return -1;
}

std::string letter(int i) { return std::string(1, static_cast<char>('A' + i)); }

std::string join_and(const std::vector<std::string>& items) {
    std::string s;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) s += i + 1 == items.size() ? " and " : ", ";
        s += items[i];
    }
    return s;
}

std::pair<int, int> mult_shape(const ComputationGraph& g) {
    int k1 = 0, k2 = 0;
    while (g.contains(mult::x_id(k1))) ++k1;
    while (g.contains(mult::y_id(k2))) ++k2;
    return {k1, k2};
}

BigInt pow10(int k) {
    BigInt r = 1;
    while (k-- > 0) r *= 10;
    return r;
}

std::string render_multiplication(const ComputationGraph& g, const PredictedGraph& t) {
    using namespace mult;
    const auto [k1, k2] = mult_shape(g);
    auto val = [&](const std::string& id) { return num(claimed(g, t, id)); };
    auto big = [&](const std::string& id) { return as_number(claimed(g, t, id)).value_or(0); };
    std::string X, Y;
    for (int p = k1 - 1; p >= 0; --p) X += val(x_id(p));
    for (int p = k2 - 1; p >= 0; --p) Y += val(y_id(p));

    std::string s = "Let's perform the multiplication step by step:\n\n";
    int step = 1;
    for (int i = 0; i < k2; ++i) {
        s += (i == 0 ? "Let's multiply " : "Now, let's multiply ") + X + " by the digit in the " + place_name(i) +
             " place of " + Y + ", which is " + val(y_id(i)) + ".\n\n";
        for (int j = 0; j < k1; ++j) {
            s += std::to_string(step++) + ". Multiply " + val(y_id(i)) + " by the digit in the " + place_name(j) +
                 " place of " + X + ", which is " + val(x_id(j)) + ".";
            const auto dm = digitmult_id(j, i);
            const BigInt carry_in = j > 0 ? big(carry_id(j - 1, i)) : BigInt(0);
            const auto a = num(written(g, t, dm, 0)), b = num(written(g, t, dm, 1));
            if (carry_in != 0) {
                s += " Add the carryover from the previous step to account for this. This gives (" + a + " x " + b +
                     ") + " + num(written(g, t, sum_id(j, i), 1)) + " = " + val(sum_id(j, i)) + ".";
            } else {
                s += " This gives " + a + " x " + b + " = " + val(dm) + ".";
            }
            const BigInt carry = big(carry_id(j, i));
            const auto digit = val(digit_id(j, i));
            if (j + 1 < k1) {
                s += " Write down the result " + digit;
                if (carry != 0) s += " and carry over the " + carry.str() + " to the next step";
                s += ".\n";
            } else {
                s += " Write down the result " + (carry != 0 ? carry.str() : std::string()) + digit + ".\n";
            }
        }
        s += std::to_string(step++) + ". The partial product for this step is " + letter(i) + "=" +
             val(partial_id(i)) + " which is the concatenation of the digits we found in each step.\n\n";
    }

    std::vector<std::string> letters, details, terms, shifted;
    for (int i = 0; i < k2; ++i) {
        letters.push_back(letter(i));
        std::string d = letter(i) + "=" + val(partial_id(i)) + " (from multiplication by " + val(y_id(i));
        if (i > 0)
            d += std::string(" but shifted ") + (i < 5 ? kShift[i] : std::to_string(i) + " places") +
                 " to the left, so it becomes " + (big(partial_id(i)) * pow10(i)).str();
        details.push_back(d + ")");
        auto w = as_number(written(g, t, kProductId, i)).value_or(0);
        terms.push_back(w.str() + " x " + pow10(i).str());
        shifted.push_back((w * pow10(i)).str());
    }
    std::string sum_terms, sum_shifted;
    for (int i = 0; i < k2; ++i) {
        sum_terms += (i ? " + " : "") + terms[i];
        sum_shifted += (i ? " + " : "") + shifted[i];
    }
    s += "Now, let's sum the " + std::to_string(k2) + " partial products " + join_and(letters) +
         ", and take into account the position of each digit: " + join_and(details) + ". The final answer is " +
         sum_terms + " = " + sum_shifted + " = " + val(kProductId) + ".\n";
    return s;
}

PredictedGraph parse_multiplication(std::string_view text, const ComputationGraph& g) {
    using namespace mult;
    static const std::regex open_re(R"(^Let's perform the multiplication step by step:$)");
    static const std::regex head_re(
        R"(^(?:Let's|Now, let's) multiply (\d+) by the digit in the ([a-z0-9^-]+) place of (\d+), which is (\d+)\.$)");
    static const std::regex step_re(
        R"(^(\d+)\. Multiply (\d+) by the digit in the ([a-z0-9^-]+) place of (\d+), which is (\d+)\.)"
        R"(( Add the carryover from the previous step to account for this\.)? This gives )"
        R"((?:\((\d+) x (\d+)\) \+ (\d+)|(\d+) x (\d+)) = (\d+)\. Write down the result (\d+))"
        R"((?: and carry over the (\d+) to the next step)?\.$)");
    static const std::regex part_re(
        R"(^(\d+)\. The partial product for this step is ([A-Z])=(\d+) which is the concatenation of the digits we found in each step\.$)");
    static const std::regex final_re(
        R"(^Now, let's sum the (\d+) partial products ([A-Z, and]+), and take into account the position of each digit: ((?:[A-Z]=\d+ \(from multiplication by \d+(?: but shifted [a-z0-9 ]+ to the left, so it becomes \d+)?\)(?:, | and )?)+)\. The final answer is ([0-9x+ ]+) = ([0-9+ ]+) = (\d+)\.$)");
    static const std::regex term_re(R"((\d+) x (\d+))");

    ParseState st(g);
    const auto [k1, k2] = mult_shape(g);
    const int block = k1 + 1;
    std::set<int> seen_steps;
    int headers = 0;
    auto lines = split_lines(text);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        const int line_no = static_cast<int>(ln) + 1;
        std::string line = trim(strip_prefix(lines[ln], "Scratchpad: "));
        if (line.empty()) continue;
        std::smatch m;
        if (std::regex_match(line, m, open_re)) continue;
        if (std::regex_match(line, m, head_re)) {
            int i = place_index(m[2]);
            if (i < 0) i = headers;
            ++headers;
            if (i >= k2) {
                st.diag(line_no, "multiplier place out of range");
                continue;
            }
            st.mention(y_id(i), to_big(m[4]));
            continue;
        }
        if (std::regex_match(line, m, step_re) || std::regex_match(line, m, part_re)) {
            const bool is_part = m.size() == 4;
            const int s = std::stoi(m[1]);
            const int i = (s - 1) / block, j = (s - 1) % block;
            if (s < 1 || i >= k2 || (j == k1) != is_part) {
                st.diag(line_no, "step " + std::to_string(s) + " does not fit the expected layout");
                continue;
            }
            if (!seen_steps.insert(s).second) {
                st.diag(line_no, "duplicate step " + std::to_string(s));
                continue;
            }
            if (is_part) {
                st.set_number(partial_id(i), to_big(m[3]));
                continue;
            }
            st.mention(y_id(i), to_big(m[2]));
            st.mention(x_id(j), to_big(m[5]));
            const auto dm = digitmult_id(j, i);
            const bool carry_form = m[7].matched;
            const BigInt a = to_big(carry_form ? m[7] : m[10]), b = to_big(carry_form ? m[8] : m[11]);
            const BigInt total = to_big(m[12]);
            std::vector<std::optional<NodeValue>> operands{st.number_arg(x_id(j), a), st.number_arg(y_id(i), b)};
            if (carry_form && j > 0) {
                st.set_number(dm, a * b, operands, true);
                st.set_number(sum_id(j, i), total, {std::nullopt, st.number_arg(carry_id(j - 1, i), to_big(m[9]))});
            } else {
                if (carry_form) st.diag(line_no, "carry added at the first step", Diagnostic::Severity::Info);
                st.set_number(dm, total, operands);
                if (j > 0) st.set_number(sum_id(j, i), total, {std::nullopt, make_digit(0)}, true);
            }
            const BigInt result = to_big(m[13]);
            if (m[14].matched) {
                st.set_number(digit_id(j, i), result);
                st.set_number(carry_id(j, i), to_big(m[14]));
            } else if (j + 1 < k1) {
                st.set_number(digit_id(j, i), result);
                st.set_number(carry_id(j, i), 0);
            } else {
                st.set_number(digit_id(j, i), result % 10);
                st.set_number(carry_id(j, i), result / 10);
            }
            continue;
        }
        if (std::regex_match(line, m, final_re)) {
            std::vector<std::optional<NodeValue>> parts;
            std::string terms = m[4];
            for (auto it = std::sregex_iterator(terms.begin(), terms.end(), term_re); it != std::sregex_iterator();
                 ++it)
                parts.push_back(make_int(to_big((*it)[1])));
            if (static_cast<int>(parts.size()) != k2) {
                st.diag(line_no, "final sum lists " + std::to_string(parts.size()) + " partial products");
                parts.resize(k2);
            }
            st.set_number(kProductId, to_big(m[6]), parts);
            continue;
        }
        st.diag(line_no, "unrecognized line");
    }
    st.out.final_answer = extract_final_answer(text, TaskKind::Multiplication);
    return st.out;
}

// ---------------------------------------------------------------------------
// DP

constexpr const char* kDpFinally =
    "Finally, we reconstruct the lexicographically smallest subsequence that fulfills the task objective by "
    "selecting numbers as follows. We store the result on a list named \"output\".";
constexpr const char* kDpLet = "Let can_use_next_item = True.";

int dp_length(const ComputationGraph& g) {
    int n = 0;
    while (g.contains(dp::input_id(n))) ++n;
    return n;
}

std::string render_dp(const ComputationGraph& g, const PredictedGraph& t) {
    using namespace dp;
    const int n = dp_length(g);
    auto val = [&](const std::string& id) { return num(claimed(g, t, id)); };
    auto w = [&](const std::string& id, std::size_t k) { return num(written(g, t, id, k)); };
    auto I = [](int i) { return std::to_string(i); };

    std::string s = "dp[" + I(n - 1) + "] = max(input[" + I(n - 1) + "], 0) = max(" + w(dp_id(n - 1), 0) +
                    ", 0) = " + val(dp_id(n - 1)) + "\n";
    if (n >= 2)
        s += "dp[" + I(n - 2) + "] = max(input[" + I(n - 2) + "], input[" + I(n - 1) + "], 0) = max(" +
             w(dp_id(n - 2), 0) + ", " + w(dp_id(n - 2), 1) + ", 0) = " + val(dp_id(n - 2)) + "\n";
    for (int i = n - 3; i >= 0; --i)
        s += "dp[" + I(i) + "] = max(dp[" + I(i + 1) + "], input[" + I(i) + "] + dp[" + I(i + 2) + "], 0) = max(" +
             w(dp_id(i), 0) + ", " + w(sum_id(i), 0) + " + " + w(sum_id(i), 1) + ", 0) = " + val(dp_id(i)) + "\n";
    s += "\n" + std::string(kDpFinally) + "\n\n" + kDpLet + "\n";

    for (int i = 0; i < n; ++i) {
        const bool chosen = as_bool(claimed(g, t, choose_id(i))).value_or(false);
        const char* rel = chosen ? "==" : "!=";
        std::string target = "input[" + I(i) + "]", rhs;
        if (i < n - 2) {
            target += " + dp[" + I(i + 2) + "]";
            rhs = w(sum_id(i), 0) + " + " + w(sum_id(i), 1);
        } else {
            rhs = w(eq_id(i), 1);
        }
        s += "Since dp[" + I(i) + "] " + rel + " " + target + " (" + w(eq_id(i), 0) + " " + rel + " " + rhs + ") " +
             (chosen ? "and can_use_next_item == True" : "or can_use_next_item == False") + ", we store output[" +
             I(i) + "] = " + val(output_id(i)) + ".";
        if (i + 1 < n) s += " We update can_use_next_item = " + val(can_id(i + 1)) + ".";
        s += "\n";
    }
    const auto& out = claimed(g, t, kOutputId);
    std::vector<int> list;
    if (const auto* seq = std::get_if<DigitSeq>(&out)) list.assign(seq->digits.begin(), seq->digits.end());
    s += "\nReconstructing all together, output=" + format_list(list) + ".\n";
    return s;
}

PredictedGraph parse_dp(std::string_view text, const ComputationGraph& g) {
    using namespace dp;
    static const std::regex last_re(R"(^dp\[(\d+)\] = max\(input\[(\d+)\], 0\) = max\((-?\d+), 0\) = (-?\d+)$)");
    static const std::regex second_re(
        R"(^dp\[(\d+)\] = max\(input\[(\d+)\], input\[(\d+)\], 0\) = max\((-?\d+), (-?\d+), 0\) = (-?\d+)$)");
    static const std::regex step_re(
        R"(^dp\[(\d+)\] = max\(dp\[(\d+)\], input\[(\d+)\] \+ dp\[(\d+)\], 0\) = max\((-?\d+), (-?\d+) \+ (-?\d+), 0\) = (-?\d+)$)");
    static const std::regex since_re(
        R"(^Since dp\[(\d+)\] (==|!=) input\[(\d+)\](?: \+ dp\[(\d+)\])? \((-?\d+) (==|!=) (-?\d+)(?: \+ (-?\d+))?\) )"
        R"((and|or) can_use_next_item == (True|False), we store output\[(\d+)\] = (-?\d+)\.)"
        R"((?: We update can_use_next_item = (True|False)\.)?$)");
    static const std::regex final_re(R"(^Reconstructing all together, output=(\[[^\]]*\])\.$)");

    ParseState st(g);
    const int n = dp_length(g);
    auto lines = split_lines(text);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        const int line_no = static_cast<int>(ln) + 1;
        std::string line = trim(strip_prefix(lines[ln], "Scratchpad: "));
        if (line.empty() || line == kDpFinally || line == kDpLet) continue;
        std::smatch m;
        auto idx = [&](int k) { return std::stoi(m[k]); };
        if (std::regex_match(line, m, last_re)) {
            const int i = idx(1);
            if (i != n - 1 || idx(2) != i) {
                st.diag(line_no, "base case for an unexpected position");
                continue;
            }
            st.mention(input_id(i), to_big(m[3]));
            st.set_number(dp_id(i), to_big(m[4]), {st.number_arg(input_id(i), to_big(m[3]))});
            continue;
        }
        if (std::regex_match(line, m, second_re)) {
            const int i = idx(1);
            if (n < 2 || i != n - 2 || idx(2) != i || idx(3) != i + 1) {
                st.diag(line_no, "second base case for an unexpected position");
                continue;
            }
            st.mention(input_id(i), to_big(m[4]));
            st.mention(input_id(i + 1), to_big(m[5]));
            st.set_number(dp_id(i), to_big(m[6]),
                          {st.number_arg(input_id(i), to_big(m[4])), st.number_arg(input_id(i + 1), to_big(m[5]))});
            continue;
        }
        if (std::regex_match(line, m, step_re)) {
            const int i = idx(1);
            if (i < 0 || i > n - 3 || idx(2) != i + 1 || idx(3) != i || idx(4) != i + 2) {
                st.diag(line_no, "recurrence line with inconsistent indices");
                continue;
            }
            const BigInt p = to_big(m[5]), a = to_big(m[6]), q = to_big(m[7]);
            st.mention(input_id(i), a);
            st.set_number(sum_id(i), a + q, {st.number_arg(input_id(i), a), st.number_arg(dp_id(i + 2), q)}, true);
            st.set_number(dp_id(i), to_big(m[8]), {st.number_arg(dp_id(i + 1), p), std::nullopt});
            continue;
        }
        if (std::regex_match(line, m, since_re)) {
            const int i = idx(1);
            const bool pair_form = m[4].matched;
            if (i < 0 || i >= n || idx(3) != i || idx(11) != i || pair_form != (i < n - 2) || m[8].matched != pair_form ||
                (pair_form && idx(4) != i + 2)) {
                st.diag(line_no, "selection line with inconsistent indices");
                continue;
            }
            const BigInt v = to_big(m[5]);
            const BigInt rhs = to_big(m[7]) + (pair_form ? to_big(m[8]) : BigInt(0));
            const std::string rhs_id = pair_form ? sum_id(i) : input_id(i);
            st.set(eq_id(i), make_bool(v == rhs), {st.number_arg(dp_id(i), v), st.number_arg(rhs_id, rhs)}, true);
            st.set(choose_id(i), make_bool(m[2] == "==" && m[9] == "and"));
            st.set_number(output_id(i), to_big(m[12]));
            if (m[13].matched && i + 1 < n) st.set(can_id(i + 1), make_bool(m[13] == "True"));
            continue;
        }
        if (std::regex_match(line, m, final_re)) {
            if (auto a = extract_final_answer(m[1].str(), TaskKind::DynamicProgramming)) st.set(kOutputId, *a);
            else st.diag(line_no, "malformed output list");
            continue;
        }
        st.diag(line_no, "unrecognized line");
    }
    st.out.final_answer = extract_final_answer(text, TaskKind::DynamicProgramming);
    return st.out;
}

// ---------------------------------------------------------------------------
// Puzzle

std::string cell_sentence(const CellAssignment& c) {
    return "The " + c.attribute + " in house " + std::to_string(c.house) + " is " + c.value + ".";
}

int puzzle_steps(const ComputationGraph& g) {
    int t = 0;
    while (g.contains(puzzle::step_id(t)) && g.node(puzzle::step_id(t)).op == Op::Eliminate) ++t;
    return t;
}

const PartialTable& as_table(const NodeValue& v) {
    static const PartialTable empty;
    const auto* t = std::get_if<PartialTable>(&v);
    return t ? *t : empty;
}

std::string render_puzzle(const ComputationGraph& g, const PredictedGraph& t, const puzzle::PuzzleInstance& inst) {
    const int steps = puzzle_steps(g);
    std::string s;
    PartialTable prev;
    for (int k = 0; k < steps; ++k) {
        const auto id = puzzle::step_id(k);
        const auto& table = as_table(claimed(g, t, id));
        const auto& node = g.node(id);

        std::vector<std::string> cited;
        const auto* pn = t.find(id);
        if (pn && !pn->written_parents.empty()) {
            for (const auto& w : pn->written_parents)
                if (w)
                    if (const auto* txt = std::get_if<Text>(&*w)) cited.push_back(txt->value);
        } else {
            for (const auto& p : node.parents)
                if (const auto* txt = std::get_if<Text>(&claimed(g, t, p))) cited.push_back(txt->value);
        }

        std::vector<CellAssignment> fresh;
        for (const auto& c : table.cells) {
            const auto* old = prev.find(c.house, c.attribute);
            if (!old || old->value != c.value) fresh.push_back(c);
        }
        std::stable_sort(fresh.begin(), fresh.end(), [&](const CellAssignment& a, const CellAssignment& b) {
            if (a.house != b.house) return a.house < b.house;
            return puzzle::attribute_index(inst, a.attribute) < puzzle::attribute_index(inst, b.attribute);
        });
        bool unique = false;
        for (int a = 0; a < inst.M(); ++a) {
            int filled = 0, added = 0;
            for (const auto& c : table.cells) filled += c.attribute == inst.attributes[a].key;
            for (const auto& c : fresh) added += c.attribute == inst.attributes[a].key;
            if (added > 0 && filled == inst.K) unique = true;
        }

        s += "Step " + std::to_string(k + 1) + ": " + (k == 0 ? "First" : "Then");
        if (cited.size() == 1) {
            s += " apply clue <" + cited[0] + ">";
            if (unique) s += " and Unique Values";
        } else {
            s += " combine clues: ";
            for (const auto& c : cited) s += "<" + c + "> ";
            if (unique) s += " Unique Values Rules and the fixed table structure.";
        }
        s += " We know that";
        for (const auto& c : fresh) s += " " + cell_sentence(c);
        s += "\n";
        prev = table;
    }
    const auto& final_table = steps > 0 ? prev : as_table(claimed(g, t, g.sink()));
    s += "The puzzle is solved.\n\nFinal solution:\n" + puzzle::format_table(inst, final_table);
    return s;
}

/// Reads "$ House: h $ Header: value ..." rows; returns false if the line is
/// not a table row at all.
bool parse_table_row(const std::string& line, const puzzle::PuzzleInstance& inst, PartialTable& table,
                     std::string& error) {
    static const std::regex row_re(R"(^\$ House: (\d+) ((?:\$ [^$:]+: [^$]*)+)$)");
    std::smatch m;
    std::string l = trim(line);
    l += " ";
    if (!std::regex_match(l, m, row_re)) return false;
    const int house = std::stoi(m[1]);
    if (house < 1 || house > inst.K) {
        error = "house number out of range";
        return true;
    }
    std::string rest = m[2];
    std::size_t pos = 0;
    while ((pos = rest.find("$ ", pos)) != std::string::npos) {
        auto next = rest.find("$ ", pos + 2);
        std::string seg = rest.substr(pos + 2, next == std::string::npos ? std::string::npos : next - pos - 2);
        pos = next == std::string::npos ? rest.size() : next;
        auto colon = seg.find(':');
        std::string header = trim(seg.substr(0, colon)), shown = trim(seg.substr(colon + 1));
        if (shown == "___" || shown.empty()) continue;
        int a = -1;
        for (int k = 0; k < inst.M(); ++k)
            if (inst.attributes[k].header == header || inst.attributes[k].key == header) a = k;
        if (a < 0) {
            error = "unknown column " + header;
            continue;
        }
        int v = -1;
        auto lower = [](std::string x) {
            for (auto& c : x) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            return x;
        };
        for (int k = 0; k < static_cast<int>(inst.attributes[a].values.size()); ++k) {
            const auto& d = inst.attributes[a].values[k];
            if (lower(d.display) == lower(shown) || d.id == lower(shown)) v = k;
        }
        if (v < 0) {
            error = "unknown value " + shown;
            continue;
        }
        table.assign(puzzle::make_cell(inst, a, house, v));
    }
    return true;
}

PredictedGraph parse_puzzle(std::string_view text, const ComputationGraph& g, const puzzle::PuzzleInstance& inst) {
    static const std::regex step_re(
        R"(^Step (\d+): (First|Then) (?:apply clue <([^<>]*)>( and Unique Values)?|combine clues: ((?:<[^<>]*> )+)( Unique Values Rules and the fixed table structure\.)?) We know that(.*)$)");
    static const std::regex clue_re(R"(<([^<>]*)>)");
    static const std::regex cell_re(R"( ?The (\w+) in house (\d+) is ([^.]*)\.)");

    ParseState st(g);
    std::map<std::string, int> clue_index;
    for (int i = 0; i < static_cast<int>(inst.clues.size()); ++i)
        clue_index.emplace(puzzle::clue_text(inst, inst.clues[i]), i);
    for (const auto& n : g.nodes())
        if (n.op == Op::Source && n.id.rfind("clue[", 0) == 0) st.set(n.id, n.value, {}, true);

    const int steps = puzzle_steps(g);
    PartialTable running;
    int last_step = 0;
    bool in_final = false, final_seen = false;
    PartialTable final_table;
    auto lines = split_lines(text);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        const int line_no = static_cast<int>(ln) + 1;
        std::string line = trim(strip_prefix(lines[ln], "Reasoning: "));
        if (line.empty()) continue;
        std::smatch m;
        if (std::regex_match(line, m, step_re)) {
            in_final = false;
            const int k = std::stoi(m[1]);
            if (k != last_step + 1) st.diag(line_no, "step numbers out of sequence");
            last_step = k;
            std::vector<std::string> cited;
            if (m[3].matched) {
                cited.push_back(m[3]);
            } else {
                std::string list = m[5];
                for (auto it = std::sregex_iterator(list.begin(), list.end(), clue_re); it != std::sregex_iterator();
                     ++it)
                    cited.push_back((*it)[1]);
            }
            std::string cells = m[7];
            std::string leftover = std::regex_replace(cells, cell_re, "");
            if (!trim(leftover).empty()) st.diag(line_no, "unreadable cell statement");
            bool bad_cell = false;
            for (auto it = std::sregex_iterator(cells.begin(), cells.end(), cell_re); it != std::sregex_iterator();
                 ++it) {
                int a = puzzle::attribute_index(inst, (*it)[1].str());
                int h = std::stoi((*it)[2]);
                int v = puzzle::value_index(inst, a, (*it)[3].str());
                if (a < 0 || v < 0 || h < 1 || h > inst.K) {
                    bad_cell = true;
                    continue;
                }
                running.assign(puzzle::make_cell(inst, a, h, v));
            }
            if (bad_cell) st.diag(line_no, "cell outside the puzzle");
            if (k < 1 || k > steps) {
                st.diag(line_no, "step beyond the reference solution");
                continue;
            }
            std::vector<std::optional<NodeValue>> wp;
            if (k > 1) wp.push_back(std::nullopt);
            for (const auto& c : cited) {
                if (!clue_index.count(c)) st.diag(line_no, "cited clue not in the puzzle");
                wp.push_back(Text{c});
            }
            st.set(puzzle::step_id(k - 1), running, std::move(wp));
            continue;
        }
        if (line == "The puzzle is solved.") continue;
        if (line == "Final solution:") {
            in_final = true;
            final_seen = true;
            final_table = {};
            continue;
        }
        std::string error;
        PartialTable row_table = in_final ? final_table : PartialTable{};
        if (parse_table_row(lines[ln], inst, row_table, error)) {
            if (!error.empty()) st.diag(line_no, error);
            if (in_final) final_table = row_table;
            continue;
        }
        st.diag(line_no, "unrecognized line");
    }
    if (steps == 0 && final_seen) st.set(g.sink(), final_table);
    st.out.final_answer = extract_final_answer(text, TaskKind::Puzzle, &inst);
    return st.out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public entry points

std::string render_trace(const ComputationGraph& truth, const PredictedGraph& trace,
                         const puzzle::PuzzleInstance* inst) {
    switch (truth.task()) {
        case TaskKind::Multiplication: return render_multiplication(truth, trace);
        case TaskKind::DynamicProgramming: return render_dp(truth, trace);
        case TaskKind::Puzzle:
            if (!inst) throw std::invalid_argument("puzzle scratchpads need the puzzle instance");
            return render_puzzle(truth, trace, *inst);
    }
    throw std::invalid_argument("unknown task kind");
}

std::string render(const ComputationGraph& truth, const puzzle::PuzzleInstance* inst) {
    return render_trace(truth, truth_trace(truth), inst);
}

bool printed_explicitly(const ComputationGraph& truth, const PredictedGraph& trace, const std::string& id) {
    const auto& node = truth.node(id);
    switch (truth.task()) {
        case TaskKind::Multiplication: {
            int j = 0, i = 0;
            if (std::sscanf(id.c_str(), "digitmult[%d][%d]", &j, &i) == 2)
                return j == 0 || as_number(claimed(truth, trace, mult::carry_id(j - 1, i))).value_or(0) == 0;
            if (std::sscanf(id.c_str(), "sum[%d][%d]", &j, &i) == 2)
                return as_number(claimed(truth, trace, mult::carry_id(j - 1, i))).value_or(0) != 0;
            return true;
        }
        case TaskKind::DynamicProgramming:
            return id.rfind("sum[", 0) != 0 && id.rfind("eq[", 0) != 0;
        case TaskKind::Puzzle:
            return node.op != Op::Source || id.rfind("step[", 0) == 0;
    }
    return true;
}

PredictedGraph parse(std::string_view text, const ComputationGraph& truth, const puzzle::PuzzleInstance* inst) {
    switch (truth.task()) {
        case TaskKind::Multiplication: return parse_multiplication(text, truth);
        case TaskKind::DynamicProgramming: return parse_dp(text, truth);
        case TaskKind::Puzzle:
            if (!inst) throw std::invalid_argument("puzzle parsing needs the puzzle instance");
            return parse_puzzle(text, truth, *inst);
    }
    throw std::invalid_argument("unknown task kind");
}

std::optional<NodeValue> extract_final_answer(std::string_view text, TaskKind task,
                                              const puzzle::PuzzleInstance* inst) {
    const std::string s(text);
    if (task == TaskKind::Multiplication) {
        static const std::regex int_re(R"(\d{1,3}(?:,\d{3})+(?!\d)|\d+)");
        std::optional<NodeValue> last;
        for (auto it = std::sregex_iterator(s.begin(), s.end(), int_re); it != std::sregex_iterator(); ++it) {
            std::string digits;
            for (char c : it->str())
                if (c != ',') digits += c;
            if (auto v = parse_decimal(digits)) last = make_int(*v);
        }
        return last;
    }
    if (task == TaskKind::DynamicProgramming) {
        static const std::regex list_re(R"(\[\s*[12](?:\s*,\s*[12])*\s*\])");
        std::optional<NodeValue> last;
        for (auto it = std::sregex_iterator(s.begin(), s.end(), list_re); it != std::sregex_iterator(); ++it) {
            DigitSeq seq;
            for (char c : it->str())
                if (c == '1' || c == '2') seq.digits.push_back(static_cast<std::uint8_t>(c - '0'));
            last = NodeValue{seq};
        }
        return last;
    }
    if (!inst) return std::nullopt;
    // Last run of consecutive table rows.
    std::optional<NodeValue> last;
    PartialTable current;
    bool in_run = false;
    for (const auto& line : split_lines(text)) {
        std::string error;
        PartialTable next = in_run ? current : PartialTable{};
        if (parse_table_row(line, *inst, next, error)) {
            current = next;
            in_run = true;
            if (!current.cells.empty()) last = NodeValue{current};
        } else {
            in_run = false;
        }
    }
    return last;
}

// ---------------------------------------------------------------------------
// Prompts

std::string question(const ComputationGraph& truth, const puzzle::PuzzleInstance* inst) {
    switch (truth.task()) {
        case TaskKind::Multiplication: {
            const auto [k1, k2] = mult_shape(truth);
            std::string x, y;
            for (int p = k1 - 1; p >= 0; --p) x += num(truth.node(mult::x_id(p)).value);
            for (int p = k2 - 1; p >= 0; --p) y += num(truth.node(mult::y_id(p)).value);
            return "What is " + x + " times " + y + "?";
        }
        case TaskKind::DynamicProgramming: {
            dp::DpInstance d;
            for (int i = 0; i < dp_length(truth); ++i)
                d.input.push_back(static_cast<int>(*as_number(truth.node(dp::input_id(i)).value)));
            return dp::question_text(d);
        }
        case TaskKind::Puzzle:
            if (!inst) throw std::invalid_argument("puzzle questions need the puzzle instance");
            return puzzle::question_text(*inst);
    }
    return {};
}

std::string multiplication_instructions() {
    return "To multiply two numbers, start by multiplying the rightmost digit of the multiplicand by each digit of "
           "the multiplier, writing down the products and carrying over any remainders.  Repeat this process for "
           "each digit of the multiplicand, and then add up all the partial products to obtain the final result.";
}

std::string_view to_string(PromptMode m) {
    switch (m) {
        case PromptMode::ZeroShot: return "zero-shot";
        case PromptMode::FewShotQa: return "few-shot-qa";
        case PromptMode::FewShotScratchpad: return "few-shot-scratchpad";
    }
    return "unknown";
}

PromptMode prompt_mode_from_string(std::string_view s) {
    for (auto m : {PromptMode::ZeroShot, PromptMode::FewShotQa, PromptMode::FewShotScratchpad})
        if (to_string(m) == s) return m;
    throw std::invalid_argument("unknown prompt mode: " + std::string(s));
}

namespace {

/// "What is 22 times 2?" -> "what's 22 times 2?"
std::string casual_question(const std::string& q) {
    if (q.rfind("What is ", 0) == 0) return "what's " + q.substr(8);
    return q;
}

/// Scratchpad-mode question for the DP task: "Let's solve input = [..]."
std::string short_question(TaskKind task, const std::string& q) {
    if (task != TaskKind::DynamicProgramming) return q;
    auto pos = q.rfind("input = ");
    return pos == std::string::npos ? q : "Let's solve " + q.substr(pos);
}

}  // namespace

std::string build_prompt(TaskKind task, PromptMode mode, const std::vector<Exemplar>& exemplars,
                         const std::string& query_question) {
    std::string s;
    if (mode == PromptMode::ZeroShot) return query_question;
    if (mode == PromptMode::FewShotQa) {
        if (task == TaskKind::Multiplication) {
            s = multiplication_instructions() + "\n\n";
            for (const auto& e : exemplars)
                s += "Questions: " + casual_question(e.question) + " Answer " + e.answer + ".\n";
            return s + "Questions: " + casual_question(query_question) + " Answer";
        }
        for (const auto& e : exemplars) s += e.question + "\n" + e.answer + "\n\n";
        return s + query_question;
    }
    if (task == TaskKind::Puzzle) {
        for (const auto& e : exemplars) s += e.question + e.scratchpad + "\n";
        return s + query_question;
    }
    for (const auto& e : exemplars)
        s += "Question: " + short_question(task, e.question) + "\n\nScratchpad: " + e.scratchpad + "\n";
    return s + "Question: " + short_question(task, query_question) + "\n\nScratchpad:";
}

}  // namespace compgraph::scratchpad
