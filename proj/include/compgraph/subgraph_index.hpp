// Full-computation subgraphs (a node plus all its ancestors) and a counting
// index over them.
//
// Two full computations match when they are isomorphic with ops, argument
// order and (by default) node values preserved. Each distinct full
// computation is interned once as (op, value, canonical child ids), so
// matching is exact; the 64-bit Merkle hash only speeds up lookup and is
// checked against the interned structure on every hit.
#pragma once

#include "compgraph/graph.hpp"

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace compgraph::fc {

enum class MatchMode : std::uint8_t { ValuesAndOps = 0, OpsOnly = 1 };

std::string_view to_string(MatchMode m);
MatchMode match_mode_from_string(std::string_view s);

/// Ancestor-closed node set rooted at `id`, in graph order. Throws GraphError
/// for unknown ids.
std::vector<std::string> full_computation(const ComputationGraph& g, std::string_view id);

struct Fingerprint {
    std::uint64_t hash = 0;
    int depth = 0;  // longest path inside the full computation, = layer number
    friend bool operator==(const Fingerprint&, const Fingerprint&) = default;
};

/// Fingerprints of every node's full computation, indexed like g.nodes().
/// Shared ancestors are hashed once.
std::vector<Fingerprint> fingerprints(const ComputationGraph& g, MatchMode mode = MatchMode::ValuesAndOps);
Fingerprint fingerprint(const ComputationGraph& g, std::string_view id, MatchMode mode = MatchMode::ValuesAndOps);

class FingerprintIndex {
public:
    explicit FingerprintIndex(MatchMode mode = MatchMode::ValuesAndOps, std::string corpus_id = {});

    MatchMode mode() const { return mode_; }
    const std::string& corpus_id() const { return corpus_id_; }

    /// Adds the full computation of every node, with multiplicity.
    void add_graph(const ComputationGraph& g);
    /// Adds another index's counts (same mode).
    void merge(const FingerprintIndex& other);

    /// Training occurrences of each node's full computation, indexed like g.nodes().
    std::vector<std::uint64_t> query(const ComputationGraph& g) const;

    std::size_t distinct() const { return entries_.size(); }
    std::uint64_t total() const;
    /// Hash hits whose structure differed; each was stored separately.
    std::uint64_t collisions() const { return collisions_; }

    void save(const std::string& path) const;
    static FingerprintIndex load(const std::string& path);

private:
    struct Entry {
        Op op;
        std::string value;
        std::vector<std::uint32_t> children;
        std::uint64_t hash;
        int depth;
        std::uint64_t count;
    };

    std::string value_key(const NodeValue& v) const;
    /// Canonical id of the structure or -1.
    std::int64_t lookup(Op op, const std::string& value, const std::vector<std::uint32_t>& children,
                        std::uint64_t hash) const;
    std::uint32_t intern(Op op, std::string value, std::vector<std::uint32_t> children, int depth);

    MatchMode mode_;
    std::string corpus_id_;
    std::vector<Entry> entries_;
    std::unordered_multimap<std::uint64_t, std::uint32_t> by_hash_;
    mutable std::uint64_t collisions_ = 0;
};

/// Per-depth mean training frequency, split by final-answer correctness.
struct DepthFrequency {
    int depth = 0;
    bool answer_correct = false;
    double mean_frequency = 0;
    std::size_t nodes = 0;
};

class FrequencyAggregator {
public:
    void add(const ComputationGraph& g, const std::vector<std::uint64_t>& counts, bool answer_correct);
    /// Rows sorted by (depth, answer_correct).
    std::vector<DepthFrequency> rows() const;

private:
    std::map<std::pair<int, bool>, std::pair<double, std::size_t>> sums_;
};

}  // namespace compgraph::fc
