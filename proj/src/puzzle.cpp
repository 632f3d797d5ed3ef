#include "compgraph/puzzle.hpp"

#include "compgraph/rng.hpp"

#include <algorithm>
#include <bit>
#include <map>
#include <numeric>
#include <random>
#include <set>

namespace compgraph::puzzle {

namespace {

AttributeDesc attr(std::string key, std::string header, std::string bullet, std::vector<ValueDesc> values) {
    return {std::move(key), std::move(header), std::move(bullet), std::move(values)};
}

ValueDesc name(const std::string& id) {
    std::string cap = id;
    cap[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(cap[0])));
    return {id, cap, cap};
}

ValueDesc simple(const std::string& id, const std::string& phrase_prefix) {
    std::string cap = id;
    cap[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(cap[0])));
    return {id, cap, phrase_prefix + id};
}

}  // namespace

const std::vector<AttributeDesc>& default_catalog() {
    static const std::vector<AttributeDesc> catalog = [] {
        std::vector<AttributeDesc> c;
        std::vector<ValueDesc> names;
        for (const char* n : {"peter", "eric", "arnold", "alice", "bob", "carol", "david"}) names.push_back(name(n));
        c.push_back(attr("Name", "Name", "Each person has a unique name", names));

        std::vector<ValueDesc> sports;
        for (const char* s : {"soccer", "tennis", "basketball", "baseball", "swimming", "volleyball", "cricket"})
            sports.push_back(simple(s, "the person who loves "));
        c.push_back(attr("FavoriteSport", "Sports", "People have different favorite sports", sports));

        c.push_back(attr("CarModel", "Car", "People own different car models",
                         {{"tesla model 3", "Tesla", "the person who owns a Tesla Model 3"},
                          {"ford f150", "Ford", "the person who owns a Ford F-150"},
                          {"toyota camry", "Camry", "the person who owns a Toyota Camry"},
                          {"honda civic", "Civic", "the person who owns a Honda Civic"},
                          {"bmw 3 series", "BMW", "the person who owns a BMW 3 Series"},
                          {"chevrolet silverado", "Silverado", "the person who owns a Chevrolet Silverado"},
                          {"audi a4", "Audi", "the person who owns an Audi A4"}}));

        std::vector<ValueDesc> colors;
        for (const char* s : {"red", "green", "blue", "yellow", "white", "purple", "orange"})
            colors.push_back({s, simple(s, "").display, std::string("the person who lives in the ") + s + " house"});
        c.push_back(attr("Color", "Color", "Each house has a different color", colors));

        std::vector<ValueDesc> pets;
        for (const char* s : {"cat", "dog", "bird", "fish", "horse", "rabbit", "hamster"})
            pets.push_back(simple(s, "the person who keeps a "));
        c.push_back(attr("Pet", "Pet", "People keep different animals as pets", pets));

        std::vector<ValueDesc> drinks;
        for (const char* s : {"tea", "coffee", "milk", "water", "juice", "soda", "lemonade"})
            drinks.push_back({s, simple(s, "").display, std::string("the person who drinks ") + s});
        c.push_back(attr("Drink", "Drink", "People have different favorite drinks", drinks));

        c.push_back(attr("PhoneModel", "Phone", "People use different phone models",
                         {{"iphone 13", "iPhone", "the person who uses an iPhone 13"},
                          {"pixel 6", "Pixel", "the person who uses a Pixel 6"},
                          {"galaxy s21", "Galaxy", "the person who uses a Galaxy S21"},
                          {"oneplus 9", "OnePlus", "the person who uses a OnePlus 9"},
                          {"xperia 5", "Xperia", "the person who uses an Xperia 5"},
                          {"moto g", "Moto", "the person who uses a Moto G"},
                          {"nokia x20", "Nokia", "the person who uses a Nokia X20"}}));
        return c;
    }();
    return catalog;
}

std::string_view to_string(ClueKind k) {
    switch (k) {
        case ClueKind::FoundAt: return "found_at";
        case ClueKind::SameHouse: return "same_house";
        case ClueKind::DirectLeft: return "direct_left";
        case ClueKind::Besides: return "besides";
        case ClueKind::NotAt: return "not_at";
        case ClueKind::LeftOf: return "left_of";
        case ClueKind::TwoHouseBetween: return "two_house_between";
    }
    return "unknown";
}

ClueKind clue_kind_from_string(std::string_view s) {
    for (auto k : {ClueKind::FoundAt, ClueKind::SameHouse, ClueKind::DirectLeft, ClueKind::Besides, ClueKind::NotAt,
                   ClueKind::LeftOf, ClueKind::TwoHouseBetween})
        if (to_string(k) == s) return k;
    throw std::invalid_argument("unknown clue kind: " + std::string(s));
}

int PuzzleInstance::house_of(const ValueRef& r) const {
    const auto& col = solution.at(r.attr);
    for (int h = 0; h < K; ++h)
        if (col[h] == r.value) return h + 1;
    throw std::logic_error("value missing from solution");
}

// ---------------------------------------------------------------------------
// Sampling and clue semantics

PuzzleInstance sample_solution(const PuzzleSpec& spec) {
    const auto& catalog = spec.catalog.empty() ? default_catalog() : spec.catalog;
    if (spec.K < 1 || spec.M < 1) throw std::invalid_argument("puzzle needs at least one house and attribute");
    if (spec.K > 7 || spec.M > 7) throw std::invalid_argument("puzzle sizes are limited to 7x7");
    if (static_cast<int>(catalog.size()) < spec.M) throw std::invalid_argument("catalog has too few attributes");
    int name_index = -1;
    for (std::size_t i = 0; i < catalog.size(); ++i)
        if (catalog[i].key == "Name") name_index = static_cast<int>(i);
    if (name_index < 0) throw std::invalid_argument("catalog lacks a Name attribute");
    for (const auto& a : catalog)
        if (static_cast<int>(a.values.size()) < spec.K)
            throw std::invalid_argument("attribute " + a.key + " has fewer than K values");

    std::mt19937_64 rng(spec.seed);
    std::vector<int> others;
    for (int i = 0; i < static_cast<int>(catalog.size()); ++i)
        if (i != name_index) others.push_back(i);
    std::shuffle(others.begin(), others.end(), rng);
    std::vector<int> chosen{name_index};
    chosen.insert(chosen.end(), others.begin(), others.begin() + (spec.M - 1));
    std::sort(chosen.begin(), chosen.end());

    PuzzleInstance inst;
    inst.K = spec.K;
    for (int ci : chosen) {
        const auto& src = catalog[ci];
        std::vector<int> idx(src.values.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        AttributeDesc a{src.key, src.header, src.bullet, {}};
        for (int k = 0; k < spec.K; ++k) a.values.push_back(src.values[idx[k]]);
        inst.attributes.push_back(std::move(a));

        std::vector<int> perm(spec.K);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        inst.solution.push_back(perm);
    }
    return inst;
}

namespace {

bool relation(ClueKind kind, int pa, int pb) {
    switch (kind) {
        case ClueKind::SameHouse: return pa == pb;
        case ClueKind::DirectLeft: return pa + 1 == pb;
        case ClueKind::Besides: return pa - pb == 1 || pb - pa == 1;
        case ClueKind::LeftOf: return pa < pb;
        case ClueKind::TwoHouseBetween: return pa - pb == 3 || pb - pa == 3;
        default: return false;
    }
}

bool is_unary(ClueKind k) { return k == ClueKind::FoundAt || k == ClueKind::NotAt; }

bool is_symmetric(ClueKind k) {
    return k == ClueKind::SameHouse || k == ClueKind::Besides || k == ClueKind::TwoHouseBetween;
}

std::string capitalize(std::string s) {
    if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

}  // namespace

bool clue_holds(const PuzzleInstance& inst, const Clue& clue) {
    int pa = inst.house_of(clue.a);
    if (clue.kind == ClueKind::FoundAt) return pa == clue.house;
    if (clue.kind == ClueKind::NotAt) return pa != clue.house;
    return relation(clue.kind, pa, inst.house_of(clue.b));
}

std::string ordinal(int house) {
    static const char* names[] = {"first", "second", "third", "fourth", "fifth", "sixth", "seventh"};
    if (house < 1 || house > 7) return std::to_string(house) + "th";
    return names[house - 1];
}

std::string clue_text(const PuzzleInstance& inst, const Clue& clue) {
    const auto& pa = inst.attributes.at(clue.a.attr).values.at(clue.a.value).phrase;
    auto pb = [&] { return inst.attributes.at(clue.b.attr).values.at(clue.b.value).phrase; };
    switch (clue.kind) {
        case ClueKind::FoundAt: return capitalize(pa) + " is in the " + ordinal(clue.house) + " house.";
        case ClueKind::NotAt: return capitalize(pa) + " is not in the " + ordinal(clue.house) + " house.";
        case ClueKind::SameHouse: return capitalize(pa) + " is " + pb() + ".";
        case ClueKind::DirectLeft: return capitalize(pa) + " is directly left of " + pb() + ".";
        case ClueKind::Besides: return capitalize(pa) + " and " + pb() + " are next to each other.";
        case ClueKind::LeftOf: return capitalize(pa) + " is somewhere to the left of " + pb() + ".";
        case ClueKind::TwoHouseBetween: return "There are two houses between " + pa + " and " + pb() + ".";
    }
    return {};
}

std::vector<Clue> all_true_clues(const PuzzleInstance& inst, bool hard_clues) {
    const int K = inst.K, M = inst.M();
    auto at = [&](int a, int h) { return ValueRef{a, inst.solution[a][h]}; };
    std::vector<Clue> out;
    for (int h = 0; h < K; ++h)
        for (int a = 0; a < M; ++a) out.push_back({ClueKind::FoundAt, at(a, h), {}, h + 1});
    for (int h = 0; h < K; ++h)
        for (int a = 0; a < M; ++a)
            for (int b = a + 1; b < M; ++b) out.push_back({ClueKind::SameHouse, at(a, h), at(b, h), 0});
    for (int h = 0; h + 1 < K; ++h)
        for (int a = 0; a < M; ++a)
            for (int b = 0; b < M; ++b) out.push_back({ClueKind::DirectLeft, at(a, h), at(b, h + 1), 0});
    for (int h = 0; h + 1 < K; ++h)
        for (int a = 0; a < M; ++a)
            for (int b = 0; b < M; ++b) out.push_back({ClueKind::Besides, at(a, h), at(b, h + 1), 0});
    if (hard_clues) {
        for (int a = 0; a < M; ++a)
            for (int v = 0; v < K; ++v)
                for (int h = 1; h <= K; ++h)
                    if (inst.house_of({a, v}) != h) out.push_back({ClueKind::NotAt, {a, v}, {}, h});
        for (int h = 0; h < K; ++h)
            for (int g = h + 2; g < K; ++g)
                for (int a = 0; a < M; ++a)
                    for (int b = 0; b < M; ++b) out.push_back({ClueKind::LeftOf, at(a, h), at(b, g), 0});
        for (int h = 0; h + 3 < K; ++h)
            for (int a = 0; a < M; ++a)
                for (int b = 0; b < M; ++b) out.push_back({ClueKind::TwoHouseBetween, at(a, h), at(b, h + 3), 0});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Constraint solver
//
// Variables are (attribute, value) pairs ranging over houses, as bitmasks.
// Propagation: all-different per attribute (singletons, hidden singles,
// coverage) and arc consistency on the binary clues.

namespace {

using Mask = std::uint32_t;

class Csp {
public:
    Csp(int K, int attrs) : K_(K), A_(attrs), full_((Mask(1) << K) - 1), doms_(attrs * K, full_) {}

    int var(int a, int v) const { return a * K_ + v; }

    void add_unary(int a, int v, Mask allowed) { doms_[var(a, v)] &= allowed; }

    void add_binary(int u, int w, ClueKind kind) {
        Edge e{u, w, {}}, r{w, u, {}};
        for (int h = 0; h < K_; ++h) {
            Mask fwd = 0, back = 0;
            for (int g = 0; g < K_; ++g) {
                if (relation(kind, h, g)) fwd |= Mask(1) << g;
                if (relation(kind, g, h)) back |= Mask(1) << g;
            }
            e.support[h] = fwd;
            r.support[h] = back;
        }
        edges_.push_back(e);
        edges_.push_back(r);
    }

    /// Fixes value v of attribute a to house h (0-based).
    void fix(int a, int v, int h) { doms_[var(a, v)] &= Mask(1) << h; }

    /// Visits solutions; returns false if the visitor asked to stop. The
    /// visitor sees one house index per variable.
    template <class Visit>
    bool solve(Visit&& visit, std::uint64_t node_limit) {
        nodes_ = 0;
        limit_ = node_limit;
        auto doms = doms_;
        return search(doms, visit);
    }

private:
    struct Edge {
        int from, to;
        Mask support[8];
    };

    bool propagate(std::vector<Mask>& d) const {
        bool changed = true;
        while (changed) {
            changed = false;
            for (int a = 0; a < A_; ++a) {
                Mask cover = 0;
                for (int v = 0; v < K_; ++v) {
                    Mask m = d[var(a, v)];
                    if (!m) return false;
                    cover |= m;
                    if (std::has_single_bit(m)) {
                        for (int w = 0; w < K_; ++w) {
                            if (w == v) continue;
                            Mask& o = d[var(a, w)];
                            if (o & m) {
                                o &= ~m;
                                if (!o) return false;
                                changed = true;
                            }
                        }
                    }
                }
                if (cover != full_) return false;
                for (int h = 0; h < K_; ++h) {
                    int only = -1, count = 0;
                    for (int v = 0; v < K_ && count < 2; ++v)
                        if (d[var(a, v)] >> h & 1) only = v, ++count;
                    if (count == 1 && d[var(a, only)] != (Mask(1) << h)) {
                        d[var(a, only)] = Mask(1) << h;
                        changed = true;
                    }
                }
            }
            for (const auto& e : edges_) {
                Mask allowed = 0;
                for (Mask m = d[e.from]; m; m &= m - 1) allowed |= e.support[std::countr_zero(m)];
                Mask nd = d[e.to] & allowed;
                if (nd != d[e.to]) {
                    if (!nd) return false;
                    d[e.to] = nd;
                    changed = true;
                }
            }
        }
        return true;
    }

    template <class Visit>
    bool search(std::vector<Mask>& d, Visit& visit) {
        if (++nodes_ > limit_) throw SearchLimitExceeded("puzzle search exceeded its node limit");
        if (!propagate(d)) return true;
        int best = -1, best_count = 99;
        for (int i = 0; i < static_cast<int>(d.size()); ++i) {
            int c = std::popcount(d[i]);
            if (c > 1 && c < best_count) best = i, best_count = c;
        }
        if (best < 0) {
            std::vector<int> houses(d.size());
            for (std::size_t i = 0; i < d.size(); ++i) houses[i] = std::countr_zero(d[i]);
            return visit(houses);
        }
        for (Mask m = d[best]; m; m &= m - 1) {
            auto next = d;
            next[best] = m & -m;
            if (!search(next, visit)) return false;
        }
        return true;
    }

    int K_, A_;
    Mask full_;
    std::vector<Mask> doms_;
    std::vector<Edge> edges_;
    std::uint64_t nodes_ = 0, limit_ = 0;
};

/// Adds a clue with attribute indices remapped through `local`.
void add_clue(Csp& csp, const Clue& c, const std::vector<int>& local, int K) {
    int la = local[c.a.attr];
    if (c.kind == ClueKind::FoundAt) {
        csp.add_unary(la, c.a.value, Mask(1) << (c.house - 1));
    } else if (c.kind == ClueKind::NotAt) {
        csp.add_unary(la, c.a.value, ((Mask(1) << K) - 1) & ~(Mask(1) << (c.house - 1)));
    } else {
        csp.add_binary(csp.var(la, c.a.value), csp.var(local[c.b.attr], c.b.value), c.kind);
    }
}

}  // namespace

std::uint64_t count_solutions(const PuzzleInstance& inst, const std::vector<Clue>& clues, std::uint64_t cap,
                              std::uint64_t node_limit) {
    const int M = inst.M();
    std::vector<int> local(M);
    std::iota(local.begin(), local.end(), 0);
    Csp csp(inst.K, M);
    for (const auto& c : clues) add_clue(csp, c, local, inst.K);
    std::uint64_t count = 0;
    csp.solve([&](const std::vector<int>&) { return ++count < cap; }, node_limit);
    return count;
}

// ---------------------------------------------------------------------------
// Generation

std::vector<Clue> generate_clues(const PuzzleInstance& inst, std::uint64_t seed, bool hard_clues) {
    auto pool = all_true_clues(inst, hard_clues);
    std::mt19937_64 rng(seed);
    std::shuffle(pool.begin(), pool.end(), rng);
    for (auto& c : pool)
        if (is_symmetric(c.kind) && (rng() & 1)) std::swap(c.a, c.b);
    if (count_solutions(inst, pool, 2) != 1)
        throw std::runtime_error("clue vocabulary cannot pin down this solution");

    // One pass reaches the fixpoint: a clue that was needed stays needed once
    // further clues are removed.
    std::vector<bool> keep(pool.size(), true);
    std::vector<Clue> current;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        keep[i] = false;
        current.clear();
        for (std::size_t j = 0; j < pool.size(); ++j)
            if (keep[j] || j > i) current.push_back(pool[j]);
        if (count_solutions(inst, current, 2) != 1) keep[i] = true;
    }
    std::vector<Clue> out;
    for (std::size_t i = 0; i < pool.size(); ++i)
        if (keep[i]) out.push_back(pool[i]);
    return out;
}

PuzzleInstance generate_puzzle(const PuzzleSpec& spec) {
    constexpr int kMaxAttempts = 32;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        PuzzleSpec s = spec;
        if (attempt > 0) s.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(attempt));
        auto inst = sample_solution(s);
        inst.clues = generate_clues(inst, splitmix64(s.seed), s.hard_clues);
        inst.attempts = attempt + 1;
        try {
            greedy_trace(inst);
            return inst;
        } catch (const SolverStuck&) {
        }
    }
    throw SolverStuck("no greedily solvable clue set found");
}

// ---------------------------------------------------------------------------
// Tables and elimination

std::string clue_id(int i) { return "clue[" + std::to_string(i) + "]"; }
std::string step_id(int t) { return "step[" + std::to_string(t) + "]"; }

CellAssignment make_cell(const PuzzleInstance& inst, int a, int house, int value) {
    return {house, inst.attributes.at(a).key, inst.attributes.at(a).values.at(value).id};
}

PartialTable solution_table(const PuzzleInstance& inst) {
    PartialTable t;
    for (int a = 0; a < inst.M(); ++a)
        for (int h = 0; h < inst.K; ++h) t.insert(make_cell(inst, a, h + 1, inst.solution[a][h]));
    return t;
}

int attribute_index(const PuzzleInstance& inst, std::string_view key) {
    for (int a = 0; a < inst.M(); ++a)
        if (inst.attributes[a].key == key) return a;
    return -1;
}

int value_index(const PuzzleInstance& inst, int a, std::string_view id) {
    if (a < 0 || a >= inst.M()) return -1;
    const auto& vals = inst.attributes[a].values;
    for (int v = 0; v < static_cast<int>(vals.size()); ++v)
        if (vals[v].id == id) return v;
    return -1;
}

namespace {

/// table[a][h] = value index or -1. Cells that do not fit the instance are
/// ignored, and so are contradictory duplicates after the first.
std::vector<std::vector<int>> grid_of(const PuzzleInstance& inst, const PartialTable& table) {
    std::vector<std::vector<int>> g(inst.M(), std::vector<int>(inst.K, -1));
    for (const auto& c : table.cells) {
        int a = attribute_index(inst, c.attribute);
        int v = value_index(inst, a, c.value);
        if (a < 0 || v < 0 || c.house < 1 || c.house > inst.K) continue;
        if (g[a][c.house - 1] < 0) g[a][c.house - 1] = v;
    }
    return g;
}

void sort_cells(const PuzzleInstance& inst, std::vector<CellAssignment>& cells) {
    std::sort(cells.begin(), cells.end(), [&](const CellAssignment& x, const CellAssignment& y) {
        if (x.house != y.house) return x.house < y.house;
        return attribute_index(inst, x.attribute) < attribute_index(inst, y.attribute);
    });
}

}  // namespace

std::vector<CellAssignment> forced_cells(const PuzzleInstance& inst, const PartialTable& table,
                                         const std::vector<int>& clues) {
    const int K = inst.K, M = inst.M();
    auto grid = grid_of(inst, table);

    std::vector<bool> mentioned(M, false);
    for (int ci : clues) {
        const auto& c = inst.clues.at(ci);
        mentioned[c.a.attr] = true;
        if (!is_unary(c.kind)) mentioned[c.b.attr] = true;
    }

    std::vector<CellAssignment> out;
    // Columns no clue touches are forced only when one cell remains open.
    for (int a = 0; a < M; ++a) {
        if (mentioned[a]) continue;
        int open = -1, filled = 0;
        std::vector<bool> used(K, false);
        for (int h = 0; h < K; ++h) {
            if (grid[a][h] >= 0) ++filled, used[grid[a][h]] = true;
            else open = h;
        }
        if (filled == K - 1) {
            for (int v = 0; v < K; ++v)
                if (!used[v]) out.push_back(make_cell(inst, a, open + 1, v));
        }
    }

    std::vector<int> local(M, -1), global;
    for (int a = 0; a < M; ++a)
        if (mentioned[a]) local[a] = static_cast<int>(global.size()), global.push_back(a);
    if (!global.empty()) {
        Csp csp(K, static_cast<int>(global.size()));
        for (int ci : clues) add_clue(csp, inst.clues[ci], local, K);
        for (std::size_t la = 0; la < global.size(); ++la)
            for (int h = 0; h < K; ++h)
                if (grid[global[la]][h] >= 0) csp.fix(static_cast<int>(la), grid[global[la]][h], h);

        // candidate[la][h]: value every solution so far agrees on, -1 unknown, -2 conflicting
        std::vector<std::vector<int>> candidate(global.size(), std::vector<int>(K, -1));
        bool first = true;
        int alive = 0;
        csp.solve(
            [&](const std::vector<int>& houses) {
                alive = 0;
                for (std::size_t la = 0; la < global.size(); ++la) {
                    std::vector<int> at(K, -1);
                    for (int v = 0; v < K; ++v) at[houses[la * K + v]] = v;
                    for (int h = 0; h < K; ++h) {
                        int& c = candidate[la][h];
                        if (grid[global[la]][h] >= 0) c = -2;
                        else if (first) c = at[h];
                        else if (c != at[h]) c = -2;
                        if (c >= 0) ++alive;
                    }
                }
                first = false;
                return alive > 0;
            },
            10'000'000);
        if (!first) {
            for (std::size_t la = 0; la < global.size(); ++la)
                for (int h = 0; h < K; ++h)
                    if (candidate[la][h] >= 0) out.push_back(make_cell(inst, global[la], h + 1, candidate[la][h]));
        }
    }
    sort_cells(inst, out);
    return out;
}

PartialTable eliminate(const PuzzleInstance& inst, const PartialTable& prev, const std::vector<int>& clues) {
    PartialTable t = prev;
    for (auto& c : forced_cells(inst, prev, clues)) t.insert(std::move(c));
    return t;
}

std::vector<GreedyStep> greedy_trace(const PuzzleInstance& inst) {
    const int n = static_cast<int>(inst.clues.size());
    const std::size_t total = static_cast<std::size_t>(inst.K) * inst.M();
    std::vector<GreedyStep> steps;
    PartialTable table;
    std::vector<int> filled(inst.M(), 0);

    while (table.cells.size() < total) {
        std::vector<int> chosen;
        std::vector<CellAssignment> cells;
        const int min_k = n == 0 ? 0 : 1;
        for (int k = min_k; k <= std::min(3, n) && cells.empty(); ++k) {
            std::vector<int> idx(k);
            std::iota(idx.begin(), idx.end(), 0);
            while (true) {
                cells = forced_cells(inst, table, idx);
                if (!cells.empty()) {
                    chosen = idx;
                    break;
                }
                int p = k - 1;
                while (p >= 0 && idx[p] == n - k + p) --p;
                if (p < 0) break;
                ++idx[p];
                for (int q = p + 1; q < k; ++q) idx[q] = idx[q - 1] + 1;
            }
        }
        if (cells.empty()) throw SolverStuck("no clue subset of size <= 3 fills another cell");

        GreedyStep step;
        step.clues.assign(chosen.rbegin(), chosen.rend());
        std::vector<int> fresh(inst.M(), 0);
        for (const auto& c : cells) ++fresh[attribute_index(inst, c.attribute)];
        for (int a = 0; a < inst.M(); ++a) {
            if (fresh[a] > 0 && filled[a] + fresh[a] == inst.K) step.unique_values = true;
            filled[a] += fresh[a];
        }
        for (const auto& c : cells) table.insert(c);
        step.cells = std::move(cells);
        step.table = table;
        steps.push_back(std::move(step));
    }
    return steps;
}

ComputationGraph greedy_solve(const PuzzleInstance& inst) {
    auto steps = greedy_trace(inst);
    GraphBuilder b(TaskKind::Puzzle);
    if (steps.empty() || steps.front().clues.empty()) {
        // Nothing to deduce from: the table is known outright.
        b.add(step_id(0), solution_table(inst));
        b.set_sink(step_id(0));
        return std::move(b).build();
    }
    std::set<int> used;
    for (const auto& s : steps) used.insert(s.clues.begin(), s.clues.end());
    for (int c : used) b.add(clue_id(c), Text{clue_text(inst, inst.clues[c])});
    for (std::size_t t = 0; t < steps.size(); ++t) {
        std::vector<std::string> parents;
        if (t > 0) parents.push_back(step_id(static_cast<int>(t - 1)));
        for (int c : steps[t].clues) parents.push_back(clue_id(c));
        b.add(step_id(static_cast<int>(t)), steps[t].table, Op::Eliminate, std::move(parents));
    }
    b.set_sink(step_id(static_cast<int>(steps.size() - 1)));
    return std::move(b).build();
}

OpEvaluator make_evaluator(const PuzzleInstance& inst) {
    std::map<std::string, int> by_text;
    for (int i = 0; i < static_cast<int>(inst.clues.size()); ++i) by_text.emplace(clue_text(inst, inst.clues[i]), i);
    return [inst, by_text](Op op, std::span<const NodeValue> args) -> std::optional<NodeValue> {
        if (op != Op::Eliminate) return evaluate_primitive(op, args);
        PartialTable prev;
        std::vector<int> clues;
        for (std::size_t i = 0; i < args.size(); ++i) {
            if (const auto* t = std::get_if<PartialTable>(&args[i]); t && i == 0) {
                prev = *t;
            } else if (const auto* txt = std::get_if<Text>(&args[i])) {
                auto it = by_text.find(txt->value);
                if (it == by_text.end()) return std::nullopt;
                clues.push_back(it->second);
            } else {
                return std::nullopt;
            }
        }
        if (clues.empty()) return std::nullopt;
        return eliminate(inst, prev, clues);
    };
}

// ---------------------------------------------------------------------------
// Text

std::string question_text(const PuzzleInstance& inst) {
    std::string k = std::to_string(inst.K);
    std::string s = "This is a logic puzzle. There are " + k + " houses (numbered 1 on the left, " + k +
                    " on the right). Each has a different person in them. They have different characteristics:\n";
    for (const auto& a : inst.attributes) {
        s += "- " + a.bullet + ": ";
        for (std::size_t v = 0; v < a.values.size(); ++v) {
            if (v) s += ", ";
            s += a.values[v].id;
        }
        s += "\n";
    }
    s += "\n";
    for (std::size_t i = 0; i < inst.clues.size(); ++i)
        s += std::to_string(i + 1) + ". " + clue_text(inst, inst.clues[i]) + "\n";
    s += "\nLet's think step by step. Please first briefly talk about your reasoning and show your final solution "
         "by filling the blanks in the below table.\n\n";
    for (int h = 0; h < inst.K; ++h) {
        s += "$ House: ___ ";
        for (const auto& a : inst.attributes) s += "$ " + a.header + ": ___ ";
        s += "\n";
    }
    s += "\nReasoning: ";
    return s;
}

std::string format_table(const PuzzleInstance& inst, const PartialTable& table) {
    auto grid = grid_of(inst, table);
    auto shown = [&](int a, int h) -> std::string {
        int v = grid[a][h];
        return v < 0 ? "___" : inst.attributes[a].values[v].display;
    };
    std::vector<std::size_t> width(inst.M(), 0);
    for (int a = 0; a < inst.M(); ++a)
        for (int h = 0; h < inst.K; ++h) width[a] = std::max(width[a], shown(a, h).size());
    std::string s;
    for (int h = 0; h < inst.K; ++h) {
        s += "$ House: " + std::to_string(h + 1) + " ";
        for (int a = 0; a < inst.M(); ++a) {
            auto v = shown(a, h);
            if (a + 1 < inst.M()) v.resize(width[a], ' ');
            s += "$ " + inst.attributes[a].header + ": " + v + " ";
        }
        s += "\n";
    }
    return s;
}

std::string answer_text(const PuzzleInstance& inst) { return format_table(inst, solution_table(inst)); }

}  // namespace compgraph::puzzle
