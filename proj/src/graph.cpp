#include "compgraph/graph.hpp"

#include <algorithm>
#include <deque>
#include <queue>
#include <sstream>

namespace compgraph {

std::string_view to_string(TaskKind kind) {
    switch (kind) {
        case TaskKind::Multiplication: return "multiplication";
        case TaskKind::DynamicProgramming: return "dp";
        case TaskKind::Puzzle: return "puzzle";
    }
    return "unknown";
}

TaskKind task_kind_from_string(std::string_view name) {
    if (name == "multiplication" || name == "mult") return TaskKind::Multiplication;
    if (name == "dp") return TaskKind::DynamicProgramming;
    if (name == "puzzle") return TaskKind::Puzzle;
    throw std::invalid_argument("unknown task kind: " + std::string(name));
}

// ---------------------------------------------------------------------------
// Values

void PartialTable::insert(CellAssignment cell) {
    auto it = std::lower_bound(cells.begin(), cells.end(), cell);
    if (it == cells.end() || *it != cell) cells.insert(it, std::move(cell));
}

void PartialTable::assign(CellAssignment cell) {
    std::erase_if(cells, [&](const CellAssignment& c) {
        return c.house == cell.house && c.attribute == cell.attribute;
    });
    insert(std::move(cell));
}

const CellAssignment* PartialTable::find(int house, std::string_view attribute) const {
    for (const auto& c : cells)
        if (c.house == house && c.attribute == attribute) return &c;
    return nullptr;
}

std::string_view value_kind(const NodeValue& v) {
    return std::visit(
        [](const auto& x) -> std::string_view {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Integer>) return "integer";
            else if constexpr (std::is_same_v<T, Boolean>) return "boolean";
            else if constexpr (std::is_same_v<T, Digit>) return "digit";
            else if constexpr (std::is_same_v<T, DigitSeq>) return "digit-sequence";
            else if constexpr (std::is_same_v<T, CellAssignment>) return "cell-assignment";
            else if constexpr (std::is_same_v<T, PartialTable>) return "partial-table";
            else return "text";
        },
        v);
}

namespace {

std::string describe_cell(const CellAssignment& c) {
    return std::to_string(c.house) + ":" + c.attribute + "=" + c.value;
}

}  // namespace

std::string describe(const NodeValue& v) {
    return std::visit(
        [](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Integer>) return x.value.str();
            else if constexpr (std::is_same_v<T, Boolean>) return x.value ? "true" : "false";
            else if constexpr (std::is_same_v<T, Digit>) return std::to_string(x.value);
            else if constexpr (std::is_same_v<T, DigitSeq>) {
                std::string s = "[";
                for (std::size_t i = 0; i < x.digits.size(); ++i) {
                    if (i) s += ", ";
                    s += std::to_string(x.digits[i]);
                }
                return s + "]";
            } else if constexpr (std::is_same_v<T, CellAssignment>) return describe_cell(x);
            else if constexpr (std::is_same_v<T, PartialTable>) {
                std::string s = "{";
                for (std::size_t i = 0; i < x.cells.size(); ++i) {
                    if (i) s += "; ";
                    s += describe_cell(x.cells[i]);
                }
                return s + "}";
            } else return x.value;
        },
        v);
}

std::optional<BigInt> parse_decimal(std::string_view text) {
    bool negative = !text.empty() && text.front() == '-';
    if (negative) text.remove_prefix(1);
    if (text.empty() || text.size() > 4000) return std::nullopt;
    for (char c : text)
        if (c < '0' || c > '9') return std::nullopt;
    auto first = text.find_first_not_of('0');
    if (first == std::string_view::npos) return BigInt(0);
    BigInt v(std::string(text.substr(first)));
    return negative ? BigInt(-v) : v;
}

std::optional<BigInt> as_number(const NodeValue& v) {
    if (const auto* i = std::get_if<Integer>(&v)) return i->value;
    if (const auto* d = std::get_if<Digit>(&v)) return BigInt(d->value);
    return std::nullopt;
}

std::optional<bool> as_bool(const NodeValue& v) {
    if (const auto* b = std::get_if<Boolean>(&v)) return b->value;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Ops

namespace {

struct OpInfo {
    Op op;
    std::string_view name;
    Arity arity;
};

constexpr OpInfo kOps[] = {
    {Op::Source, "source", {0, false}},
    {Op::DigitMul, "digit_mul", {2, false}},
    {Op::Add, "add", {2, false}},
    {Op::Mod10, "mod10", {1, false}},
    {Op::CarryOver, "carry_over", {1, false}},
    {Op::ConcatDigits, "concat_digits", {1, true}},
    {Op::ShiftedSum, "shifted_sum", {1, true}},
    {Op::MaxZero, "max_zero", {1, true}},
    {Op::Equals, "equals", {2, false}},
    {Op::And, "and", {1, true}},
    {Op::Not, "not", {1, false}},
    {Op::Indicator, "indicator", {1, false}},
    {Op::ConcatList, "concat_list", {1, true}},
    {Op::Eliminate, "eliminate", {1, true}},
};

const OpInfo& info(Op op) {
    for (const auto& i : kOps)
        if (i.op == op) return i;
    throw std::logic_error("unregistered op");
}

// Digit when the number fits in one decimal digit, Integer otherwise.
NodeValue small_number(const BigInt& v) {
    if (v >= 0 && v <= 9) return make_digit(static_cast<int>(v));
    return make_int(v);
}

}  // namespace

std::string_view to_string(Op op) { return info(op).name; }

Op op_from_string(std::string_view name) {
    for (const auto& i : kOps)
        if (i.name == name) return i.op;
    throw std::invalid_argument("unknown op: " + std::string(name));
}

Arity arity_of(Op op) { return info(op).arity; }

std::optional<NodeValue> evaluate_primitive(Op op, std::span<const NodeValue> args) {
    auto num = [&](std::size_t i) { return as_number(args[i]); };
    auto arity = arity_of(op);
    if (arity.variadic ? args.size() < arity.count : args.size() != arity.count) return std::nullopt;

    switch (op) {
        case Op::Source:
        case Op::Eliminate:
            return std::nullopt;
        case Op::DigitMul: {
            auto a = num(0), b = num(1);
            if (!a || !b) return std::nullopt;
            return make_int(*a * *b);
        }
        case Op::Add: {
            auto a = num(0), b = num(1);
            if (!a || !b) return std::nullopt;
            return make_int(*a + *b);
        }
        case Op::Mod10: {
            auto a = num(0);
            if (!a || *a < 0) return std::nullopt;
            return make_digit(static_cast<int>(*a % 10));
        }
        case Op::CarryOver: {
            auto a = num(0);
            if (!a || *a < 0) return std::nullopt;
            return small_number(*a / 10);
        }
        case Op::ConcatDigits: {
            std::string s;
            for (std::size_t i = 0; i < args.size(); ++i) {
                auto a = num(i);
                if (!a || *a < 0) return std::nullopt;
                s += a->str();
            }
            return make_int(*parse_decimal(s));
        }
        case Op::ShiftedSum: {
            BigInt total = 0, scale = 1;
            for (std::size_t i = 0; i < args.size(); ++i) {
                auto a = num(i);
                if (!a) return std::nullopt;
                total += *a * scale;
                scale *= 10;
            }
            return make_int(total);
        }
        case Op::MaxZero: {
            BigInt best = 0;
            for (std::size_t i = 0; i < args.size(); ++i) {
                auto a = num(i);
                if (!a) return std::nullopt;
                best = std::max(best, *a);
            }
            return make_int(best);
        }
        case Op::Equals:
            if (auto a = num(0), b = num(1); a && b) return make_bool(*a == *b);
            return make_bool(args[0] == args[1]);
        case Op::And: {
            bool all = true;
            for (const auto& a : args) {
                auto b = as_bool(a);
                if (!b) return std::nullopt;
                all = all && *b;
            }
            return make_bool(all);
        }
        case Op::Not: {
            auto b = as_bool(args[0]);
            if (!b) return std::nullopt;
            return make_bool(!*b);
        }
        case Op::Indicator: {
            auto b = as_bool(args[0]);
            if (!b) return std::nullopt;
            return make_digit(*b ? 1 : 2);
        }
        case Op::ConcatList: {
            DigitSeq seq;
            for (std::size_t i = 0; i < args.size(); ++i) {
                auto a = num(i);
                if (!a || *a < 0 || *a > 9) return std::nullopt;
                seq.digits.push_back(static_cast<std::uint8_t>(*a));
            }
            return NodeValue{seq};
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Graph

bool ComputationGraph::contains(std::string_view id) const { return by_id_.count(std::string(id)) > 0; }

std::size_t ComputationGraph::index_of(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    if (it == by_id_.end()) throw GraphError("unknown node: " + std::string(id));
    return it->second;
}

const Node& ComputationGraph::node(std::string_view id) const { return nodes_[index_of(id)]; }

void ComputationGraph::index() {
    by_id_.clear();
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (!by_id_.emplace(nodes_[i].id, i).second) throw GraphError("duplicate node id: " + nodes_[i].id);
    }
    parent_index_.assign(nodes_.size(), {});
    child_index_.assign(nodes_.size(), {});
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        for (const auto& p : nodes_[i].parents) {
            auto it = by_id_.find(p);
            if (it == by_id_.end()) continue;  // reported by validate()
            parent_index_[i].push_back(it->second);
            child_index_[it->second].push_back(i);
        }
    }
}

GraphBuilder& GraphBuilder::add(std::string id, NodeValue value, Op op, std::vector<std::string> parents) {
    if (by_id_.count(id)) throw GraphError("duplicate node id: " + id);
    by_id_.emplace(id, nodes_.size());
    nodes_.push_back(Node{std::move(id), std::move(value), op, std::move(parents)});
    return *this;
}

const NodeValue& GraphBuilder::compute(std::string id, Op op, std::vector<std::string> parents) {
    std::vector<NodeValue> args;
    args.reserve(parents.size());
    for (const auto& p : parents) args.push_back(value_of(p));
    auto v = evaluate_primitive(op, args);
    if (!v) throw GraphError("cannot evaluate " + std::string(to_string(op)) + " for node " + id);
    add(id, std::move(*v), op, std::move(parents));
    return nodes_.back().value;
}

const NodeValue& GraphBuilder::value_of(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    if (it == by_id_.end()) throw GraphError("unknown node: " + std::string(id));
    return nodes_[it->second].value;
}

GraphBuilder& GraphBuilder::set_sink(std::string id) {
    sink_ = std::move(id);
    return *this;
}

ComputationGraph GraphBuilder::build() && {
    ComputationGraph g;
    g.task_ = task_;
    g.nodes_ = std::move(nodes_);
    if (sink_.empty() && !g.nodes_.empty()) sink_ = g.nodes_.back().id;
    g.sink_ = std::move(sink_);
    g.index();
    return g;
}

ComputationGraph relabel(const ComputationGraph& graph, const std::function<std::string(const std::string&)>& f) {
    ComputationGraph g;
    g.task_ = graph.task_;
    g.sink_ = f(graph.sink_);
    g.nodes_ = graph.nodes_;
    for (auto& n : g.nodes_) {
        n.id = f(n.id);
        for (auto& p : n.parents) p = f(p);
    }
    g.index();
    return g;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

// Kahn's algorithm; returns node indices in topological order, possibly
// truncated when a cycle exists. Ready nodes are taken by insertion index.
std::vector<std::size_t> topo_order(const ComputationGraph& g) {
    const auto n = g.size();
    std::vector<std::size_t> indeg(n, 0);
    for (std::size_t i = 0; i < n; ++i) indeg[i] = g.parent_indices(i).size();
    std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
    for (std::size_t i = 0; i < n; ++i)
        if (indeg[i] == 0) ready.push(i);
    std::vector<std::size_t> order;
    order.reserve(n);
    while (!ready.empty()) {
        auto i = ready.top();
        ready.pop();
        order.push_back(i);
        for (auto c : g.child_indices(i))
            if (--indeg[c] == 0) ready.push(c);
    }
    return order;
}

std::vector<std::size_t> checked_topo_order(const ComputationGraph& g) {
    auto order = topo_order(g);
    if (order.size() != g.size()) throw GraphError("graph contains a cycle");
    return order;
}

}  // namespace

ValidationReport validate(const ComputationGraph& graph, const OpEvaluator* evaluator) {
    ValidationReport r;
    auto add = [&](Violation::Kind kind, const std::string& node, std::string msg) {
        r.violations.push_back({kind, node, std::move(msg)});
    };

    bool dangling = false;
    for (const auto& n : graph.nodes()) {
        for (const auto& p : n.parents) {
            if (!graph.contains(p)) {
                add(Violation::Kind::DanglingParent, n.id, "parent " + p + " does not exist");
                dangling = true;
            }
        }
        const bool is_source = n.op == Op::Source;
        if (is_source != n.parents.empty()) {
            add(Violation::Kind::SourceMismatch, n.id,
                is_source ? "source node has parents" : "non-source node has no parents");
            r.arity_ok = false;
        }
        auto arity = arity_of(n.op);
        bool arity_ok = arity.variadic ? n.parents.size() >= arity.count : n.parents.size() == arity.count;
        if (!is_source && !arity_ok) {
            add(Violation::Kind::Arity, n.id,
                std::string(to_string(n.op)) + " expects " + (arity.variadic ? "at least " : "") +
                    std::to_string(arity.count) + " parents, got " + std::to_string(n.parents.size()));
            r.arity_ok = false;
        }
    }

    auto order = topo_order(graph);
    if (order.size() != graph.size()) {
        r.acyclic = false;
        std::vector<bool> seen(graph.size(), false);
        for (auto i : order) seen[i] = true;
        for (std::size_t i = 0; i < graph.size(); ++i)
            if (!seen[i]) add(Violation::Kind::Cycle, graph.nodes()[i].id, "node lies on or behind a cycle");
    }

    std::size_t leaves = 0;
    for (std::size_t i = 0; i < graph.size(); ++i)
        if (graph.child_indices(i).empty()) ++leaves;
    if (graph.size() > 0 && (leaves != 1 || !graph.contains(graph.sink()) ||
                             !graph.child_indices(graph.index_of(graph.sink())).empty())) {
        r.single_sink = false;
        add(Violation::Kind::SinkCount, graph.sink(),
            "expected exactly one leaf equal to the sink, found " + std::to_string(leaves) + " leaves");
    }

    if (graph.contains(graph.sink())) {
        std::vector<bool> reach(graph.size(), false);
        std::deque<std::size_t> todo{graph.index_of(graph.sink())};
        reach[todo.front()] = true;
        while (!todo.empty()) {
            auto i = todo.front();
            todo.pop_front();
            for (auto p : graph.parent_indices(i))
                if (!reach[p]) {
                    reach[p] = true;
                    todo.push_back(p);
                }
        }
        for (std::size_t i = 0; i < graph.size(); ++i)
            if (!reach[i]) add(Violation::Kind::Unreachable, graph.nodes()[i].id, "node does not reach the sink");
    }

    if (evaluator && r.acyclic && !dangling) {
        for (auto i : order) {
            const auto& n = graph.nodes()[i];
            if (n.op == Op::Source) continue;
            std::vector<NodeValue> args;
            for (auto p : graph.parent_indices(i)) args.push_back(graph.nodes()[p].value);
            auto v = (*evaluator)(n.op, args);
            ++r.evaluated_nodes;
            if (!v) {
                r.evaluation_consistent = false;
                add(Violation::Kind::Evaluation, n.id, "op could not be evaluated");
            } else if (*v != n.value) {
                r.evaluation_consistent = false;
                add(Violation::Kind::Evaluation, n.id,
                    "stored " + describe(n.value) + " but parents give " + describe(*v));
            }
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Metrics

std::vector<int> layer_vector(const ComputationGraph& graph) {
    std::vector<int> layer(graph.size(), 0);
    for (auto i : checked_topo_order(graph))
        for (auto p : graph.parent_indices(i)) layer[i] = std::max(layer[i], layer[p] + 1);
    return layer;
}

std::map<std::string, int> layer_numbers(const ComputationGraph& graph) {
    auto layer = layer_vector(graph);
    std::map<std::string, int> out;
    for (std::size_t i = 0; i < graph.size(); ++i) out.emplace(graph.nodes()[i].id, layer[i]);
    return out;
}

int reasoning_depth(const ComputationGraph& graph) {
    auto layer = layer_vector(graph);
    return layer.empty() ? 0 : *std::max_element(layer.begin(), layer.end());
}

std::vector<int> source_distances(const ComputationGraph& graph) {
    auto order = checked_topo_order(graph);
    std::vector<int> dist(graph.size(), -1);
    for (auto i : order) {
        if (graph.parent_indices(i).empty()) {
            dist[i] = 0;
            continue;
        }
        int best = -1;
        for (auto p : graph.parent_indices(i))
            if (best < 0 || dist[p] + 1 < best) best = dist[p] + 1;
        dist[i] = best;
    }
    return dist;
}

int reasoning_width(const ComputationGraph& graph) {
    auto dist = source_distances(graph);
    std::map<int, std::size_t> counts;
    for (int d : dist) ++counts[d];
    int mode = 0;
    std::size_t best = 0;
    for (const auto& [d, c] : counts)  // ascending d, strict > keeps the smallest tie
        if (c > best) best = c, mode = d;
    return mode;
}

Rational average_parallelism(const ComputationGraph& graph) {
    int depth = reasoning_depth(graph);
    auto n = static_cast<std::int64_t>(graph.size());
    return depth == 0 ? Rational(n) : Rational(n, depth);
}

GraphStats compute_stats(const ComputationGraph& graph) {
    GraphStats s;
    s.node_count = graph.size();
    s.depth = reasoning_depth(graph);
    s.width = reasoning_width(graph);
    s.average_parallelism = average_parallelism(graph);
    return s;
}

std::vector<std::string> linearize(const ComputationGraph& graph) {
    std::vector<std::string> out;
    for (auto i : checked_topo_order(graph)) out.push_back(graph.nodes()[i].id);
    return out;
}

std::string to_string(const Rational& r) {
    if (r.denominator() == 1) return std::to_string(r.numerator());
    return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

}  // namespace compgraph
