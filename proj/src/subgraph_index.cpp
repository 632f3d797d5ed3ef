#include "compgraph/subgraph_index.hpp"

#include "compgraph/rng.hpp"
#include "compgraph/serialize.hpp"

#include <fstream>

namespace compgraph::fc {

std::string_view to_string(MatchMode m) { return m == MatchMode::OpsOnly ? "ops-only" : "values-and-ops"; }

MatchMode match_mode_from_string(std::string_view s) {
    if (s == "values-and-ops") return MatchMode::ValuesAndOps;
    if (s == "ops-only") return MatchMode::OpsOnly;
    throw std::invalid_argument("unknown match mode: " + std::string(s));
}

std::vector<std::string> full_computation(const ComputationGraph& g, std::string_view id) {
    if (!g.contains(id)) throw GraphError("unknown node: " + std::string(id));
    std::vector<char> in(g.size(), 0);
    std::vector<std::size_t> todo{g.index_of(id)};
    in[todo[0]] = 1;
    while (!todo.empty()) {
        auto i = todo.back();
        todo.pop_back();
        for (auto p : g.parent_indices(i))
            if (!in[p]) {
                in[p] = 1;
                todo.push_back(p);
            }
    }
    std::vector<std::string> out;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (in[i]) out.push_back(g.nodes()[i].id);
    return out;
}

namespace {

std::string value_key_for(const NodeValue& v, MatchMode mode) {
    return mode == MatchMode::OpsOnly ? std::string() : value_to_json(v).dump();
}

std::uint64_t merkle(Op op, const std::string& value, const std::vector<std::uint64_t>& child_hashes) {
    std::uint64_t h = splitmix64(static_cast<std::uint64_t>(op) + 1);
    h = derive_seed(h, hash_string(value));
    for (auto c : child_hashes) h = derive_seed(h * 31 + 7, c);
    return derive_seed(h, child_hashes.size());
}

}  // namespace

std::vector<Fingerprint> fingerprints(const ComputationGraph& g, MatchMode mode) {
    std::vector<Fingerprint> out(g.size());
    for (const auto& id : linearize(g)) {
        const auto i = g.index_of(id);
        const auto& n = g.nodes()[i];
        std::vector<std::uint64_t> ch;
        int depth = 0;
        for (auto p : g.parent_indices(i)) {
            ch.push_back(out[p].hash);
            depth = std::max(depth, out[p].depth + 1);
        }
        out[i] = {merkle(n.op, value_key_for(n.value, mode), ch), depth};
    }
    return out;
}

Fingerprint fingerprint(const ComputationGraph& g, std::string_view id, MatchMode mode) {
    return fingerprints(g, mode).at(g.index_of(id));
}

// ---------------------------------------------------------------------------

FingerprintIndex::FingerprintIndex(MatchMode mode, std::string corpus_id)
    : mode_(mode), corpus_id_(std::move(corpus_id)) {}

std::string FingerprintIndex::value_key(const NodeValue& v) const { return value_key_for(v, mode_); }

std::int64_t FingerprintIndex::lookup(Op op, const std::string& value, const std::vector<std::uint32_t>& children,
                                      std::uint64_t hash) const {
    auto [lo, hi] = by_hash_.equal_range(hash);
    for (auto it = lo; it != hi; ++it) {
        const auto& e = entries_[it->second];
        // Structural check: children are canonical ids, so this is full isomorphism.
        if (e.op == op && e.value == value && e.children == children) return it->second;
        ++collisions_;
    }
    return -1;
}

std::uint32_t FingerprintIndex::intern(Op op, std::string value, std::vector<std::uint32_t> children, int depth) {
    std::vector<std::uint64_t> ch;
    for (auto c : children) ch.push_back(entries_[c].hash);
    const auto hash = merkle(op, value, ch);
    if (auto id = lookup(op, value, children, hash); id >= 0) return static_cast<std::uint32_t>(id);
    const auto id = static_cast<std::uint32_t>(entries_.size());
    entries_.push_back({op, std::move(value), std::move(children), hash, depth, 0});
    by_hash_.emplace(hash, id);
    return id;
}

void FingerprintIndex::add_graph(const ComputationGraph& g) {
    std::vector<std::uint32_t> canon(g.size());
    std::vector<int> depth(g.size(), 0);
    for (const auto& id : linearize(g)) {
        const auto i = g.index_of(id);
        const auto& n = g.nodes()[i];
        std::vector<std::uint32_t> ch;
        for (auto p : g.parent_indices(i)) {
            ch.push_back(canon[p]);
            depth[i] = std::max(depth[i], depth[p] + 1);
        }
        canon[i] = intern(n.op, value_key(n.value), std::move(ch), depth[i]);
        ++entries_[canon[i]].count;
    }
}

void FingerprintIndex::merge(const FingerprintIndex& other) {
    if (other.mode_ != mode_) throw std::invalid_argument("cannot merge indexes of different match modes");
    // Other's entries are stored children-first, so ids map in one pass.
    std::vector<std::uint32_t> map(other.entries_.size());
    for (std::size_t k = 0; k < other.entries_.size(); ++k) {
        const auto& e = other.entries_[k];
        std::vector<std::uint32_t> ch;
        for (auto c : e.children) ch.push_back(map[c]);
        map[k] = intern(e.op, e.value, std::move(ch), e.depth);
        entries_[map[k]].count += e.count;
    }
}

std::vector<std::uint64_t> FingerprintIndex::query(const ComputationGraph& g) const {
    std::vector<std::int64_t> canon(g.size(), -1);
    std::vector<std::uint64_t> out(g.size(), 0);
    std::vector<std::uint64_t> hashes(g.size(), 0);
    for (const auto& id : linearize(g)) {
        const auto i = g.index_of(id);
        const auto& n = g.nodes()[i];
        std::vector<std::uint32_t> ch;
        std::vector<std::uint64_t> chh;
        bool known = true;
        for (auto p : g.parent_indices(i)) {
            known = known && canon[p] >= 0;
            if (known) {
                ch.push_back(static_cast<std::uint32_t>(canon[p]));
                chh.push_back(entries_[canon[p]].hash);
            }
        }
        if (!known) continue;
        const auto value = value_key(n.value);
        canon[i] = lookup(n.op, value, ch, merkle(n.op, value, chh));
        if (canon[i] >= 0) out[i] = entries_[canon[i]].count;
    }
    return out;
}

std::uint64_t FingerprintIndex::total() const {
    std::uint64_t t = 0;
    for (const auto& e : entries_) t += e.count;
    return t;
}

namespace {

constexpr char kMagic[8] = {'C', 'G', 'F', 'C', 'I', 'D', 'X', '\0'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_string(std::ostream& out, const std::string& s) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <class T>
T get(std::istream& in) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw std::runtime_error("truncated index file");
    return v;
}

std::string get_string(std::istream& in) {
    auto n = get<std::uint32_t>(in);
    std::string s(n, '\0');
    if (n && !in.read(s.data(), n)) throw std::runtime_error("truncated index file");
    return s;
}

}  // namespace

void FingerprintIndex::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(kMagic, sizeof kMagic);
    put(out, kVersion);
    put(out, static_cast<std::uint8_t>(mode_));
    put_string(out, corpus_id_);
    put<std::uint64_t>(out, entries_.size());
    for (const auto& e : entries_) {
        put(out, static_cast<std::uint8_t>(e.op));
        put_string(out, e.value);
        put<std::uint32_t>(out, static_cast<std::uint32_t>(e.children.size()));
        for (auto c : e.children) put(out, c);
        put<std::int32_t>(out, e.depth);
        put(out, e.count);
    }
}

FingerprintIndex FingerprintIndex::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    char magic[sizeof kMagic];
    if (!in.read(magic, sizeof magic) || !std::equal(magic, magic + sizeof magic, kMagic))
        throw std::runtime_error(path + " is not a fingerprint index");
    if (auto v = get<std::uint32_t>(in); v != kVersion)
        throw std::runtime_error("unsupported index version " + std::to_string(v));
    const auto mode = static_cast<MatchMode>(get<std::uint8_t>(in));
    FingerprintIndex idx(mode, get_string(in));
    const auto n = get<std::uint64_t>(in);
    for (std::uint64_t k = 0; k < n; ++k) {
        const auto op = static_cast<Op>(get<std::uint8_t>(in));
        auto value = get_string(in);
        std::vector<std::uint32_t> children(get<std::uint32_t>(in));
        for (auto& c : children) {
            c = get<std::uint32_t>(in);
            if (c >= k) throw std::runtime_error("corrupt index file");
        }
        const int depth = get<std::int32_t>(in);
        const auto id = idx.intern(op, std::move(value), std::move(children), depth);
        idx.entries_[id].count += get<std::uint64_t>(in);
    }
    return idx;
}

// ---------------------------------------------------------------------------

void FrequencyAggregator::add(const ComputationGraph& g, const std::vector<std::uint64_t>& counts,
                              bool answer_correct) {
    const auto layers = layer_vector(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto& s = sums_[{layers[i], answer_correct}];
        s.first += static_cast<double>(counts.at(i));
        ++s.second;
    }
}

std::vector<DepthFrequency> FrequencyAggregator::rows() const {
    std::vector<DepthFrequency> out;
    for (const auto& [key, s] : sums_) out.push_back({key.first, key.second, s.first / s.second, s.second});
    return out;
}

}  // namespace compgraph::fc
