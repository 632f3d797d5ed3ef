#include "compgraph/serialize.hpp"

#include <algorithm>

namespace compgraph {

namespace {

Json cell_to_json(const CellAssignment& c) {
    return Json{{"house", c.house}, {"attribute", c.attribute}, {"value", c.value}};
}

CellAssignment cell_from_json(const Json& j) {
    return CellAssignment{j.at("house").get<int>(), j.at("attribute").get<std::string>(),
                          j.at("value").get<std::string>()};
}

}  // namespace

Json value_to_json(const NodeValue& v) {
    Json payload = std::visit(
        [](const auto& x) -> Json {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Integer>) return x.value.str();
            else if constexpr (std::is_same_v<T, Boolean>) return x.value;
            else if constexpr (std::is_same_v<T, Digit>) return int(x.value);
            else if constexpr (std::is_same_v<T, DigitSeq>) {
                Json a = Json::array();
                for (auto d : x.digits) a.push_back(int(d));
                return a;
            } else if constexpr (std::is_same_v<T, CellAssignment>) return cell_to_json(x);
            else if constexpr (std::is_same_v<T, PartialTable>) {
                Json a = Json::array();
                for (const auto& c : x.cells) a.push_back(cell_to_json(c));
                return a;
            } else return x.value;
        },
        v);
    return Json{{"kind", std::string(value_kind(v))}, {"payload", std::move(payload)}};
}

NodeValue value_from_json(const Json& j) {
    const auto kind = j.at("kind").get<std::string>();
    const auto& p = j.at("payload");
    if (kind == "integer") {
        auto v = parse_decimal(p.get<std::string>());
        if (!v) throw GraphError("malformed integer payload");
        return Integer{*v};
    }
    if (kind == "boolean") return Boolean{p.get<bool>()};
    if (kind == "digit") {
        int d = p.get<int>();
        if (d < 0 || d > 9) throw GraphError("digit out of range: " + std::to_string(d));
        return make_digit(d);
    }
    if (kind == "digit-sequence") {
        DigitSeq s;
        for (const auto& d : p) s.digits.push_back(static_cast<std::uint8_t>(d.get<int>()));
        return s;
    }
    if (kind == "cell-assignment") return cell_from_json(p);
    if (kind == "partial-table") {
        PartialTable t;
        for (const auto& c : p) t.insert(cell_from_json(c));
        return t;
    }
    if (kind == "text") return Text{p.get<std::string>()};
    throw GraphError("unknown value kind: " + kind);
}

Json graph_to_json(const ComputationGraph& g) {
    std::vector<std::size_t> order(g.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return g.nodes()[a].id < g.nodes()[b].id; });
    Json nodes = Json::array();
    for (auto i : order) {
        const auto& n = g.nodes()[i];
        nodes.push_back(Json{{"id", n.id},
                             {"op", std::string(to_string(n.op))},
                             {"value", value_to_json(n.value)},
                             {"parents", n.parents},
                             {"rank", i}});
    }
    return Json{{"nodes", std::move(nodes)}, {"sink", g.sink()}, {"task", std::string(to_string(g.task()))}};
}

ComputationGraph graph_from_json(const Json& j) {
    struct Entry {
        std::size_t rank;
        Node node;
    };
    std::vector<Entry> entries;
    for (const auto& n : j.at("nodes")) {
        Node node{n.at("id").get<std::string>(), value_from_json(n.at("value")),
                  op_from_string(n.at("op").get<std::string>()), n.at("parents").get<std::vector<std::string>>()};
        entries.push_back({n.value("rank", entries.size()), std::move(node)});
    }
    std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.rank < b.rank; });
    GraphBuilder b(task_kind_from_string(j.at("task").get<std::string>()));
    for (auto& e : entries) b.add(std::move(e.node.id), std::move(e.node.value), e.node.op, std::move(e.node.parents));
    b.set_sink(j.at("sink").get<std::string>());
    return std::move(b).build();
}

std::string dump_graph(const ComputationGraph& g) { return graph_to_json(g).dump(); }

ComputationGraph parse_graph(std::string_view text) {
    try {
        return graph_from_json(Json::parse(text));
    } catch (const Json::exception& e) {
        throw GraphError(std::string("malformed graph JSON: ") + e.what());
    }
}

}  // namespace compgraph
