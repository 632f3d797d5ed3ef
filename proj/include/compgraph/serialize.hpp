// JSON encoding of values and graphs.
//
// Graph layout: {"nodes":[{"id","op","value","parents","rank"}...],"sink","task"}
// with nodes sorted by id. "rank" is the node's position in the canonical
// (builder) order, so a decoded graph linearizes exactly like the original.
#pragma once

#include "compgraph/graph.hpp"

#include <json.hpp>

namespace compgraph {

using Json = nlohmann::json;

Json value_to_json(const NodeValue& v);
NodeValue value_from_json(const Json& j);

Json graph_to_json(const ComputationGraph& g);
ComputationGraph graph_from_json(const Json& j);

/// Compact single-line encoding; stable byte-for-byte for equal graphs.
std::string dump_graph(const ComputationGraph& g);
ComputationGraph parse_graph(std::string_view text);

}  // namespace compgraph
