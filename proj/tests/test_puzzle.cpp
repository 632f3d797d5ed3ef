#include <doctest.h>

#include "compgraph/puzzle.hpp"
#include "fixtures.hpp"

#include <algorithm>
#include <numeric>
#include <random>

using namespace compgraph;
using namespace compgraph::puzzle;

namespace {

// Brute force over all tables: product of K! permutations per attribute.
std::uint64_t brute_count(const PuzzleInstance& inst, const std::vector<Clue>& clues) {
    const int K = inst.K, M = inst.M();
    std::vector<int> base(K);
    std::iota(base.begin(), base.end(), 0);
    std::vector<std::vector<int>> perms;
    do perms.push_back(base);
    while (std::next_permutation(base.begin(), base.end()));
    std::vector<std::size_t> pick(M, 0);
    std::uint64_t count = 0;
    while (true) {
        PuzzleInstance cand = inst;
        for (int a = 0; a < M; ++a) cand.solution[a] = perms[pick[a]];
        bool ok = std::all_of(clues.begin(), clues.end(), [&](const Clue& c) { return clue_holds(cand, c); });
        count += ok;
        int a = 0;
        while (a < M && ++pick[a] == perms.size()) pick[a++] = 0;
        if (a == M) break;
    }
    return count;
}

}  // namespace

TEST_CASE("three-house puzzle clue texts") {
    auto p = fixtures::three_house_puzzle();
    std::vector<std::string> expect{
        "The person who owns a Ford F-150 is the person who loves tennis.",
        "Arnold is in the third house.",
        "The person who owns a Toyota Camry is directly left of the person who owns a Ford F-150.",
        "Eric is the person who owns a Toyota Camry.",
        "The person who loves basketball is Eric.",
        "The person who loves tennis and the person who loves soccer are next to each other.",
    };
    for (int i = 0; i < 6; ++i) {
        CHECK(clue_text(p, p.clues[i]) == expect[i]);
        CHECK(clue_holds(p, p.clues[i]));
    }
}

TEST_CASE("count_solutions") {
    auto p = fixtures::three_house_puzzle();
    CHECK(count_solutions(p, p.clues, 100) == 1);
    auto reduced = p.clues;
    reduced.erase(reduced.begin() + 1);
    CHECK(count_solutions(p, reduced, 100) >= 2);
    CHECK(count_solutions(p, reduced, 100) == brute_count(p, reduced));

    PuzzleInstance two;
    two.K = 2;
    two.attributes = {default_catalog()[0]};
    two.attributes[0].values.resize(2);
    two.solution = {{0, 1}};
    CHECK(count_solutions(two, {}, 100) == 2);
    CHECK(count_solutions(p, {}, 5) == 5);  // capped
}

TEST_CASE("count_solutions matches brute force on random clue sets") {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        auto inst = sample_solution({3, 3, {}, seed, true});
        auto pool = all_true_clues(inst, true);
        std::mt19937_64 rng(seed);
        std::shuffle(pool.begin(), pool.end(), rng);
        // random subsets of the true clues
        pool.resize(2 + seed % 5);
        REQUIRE(count_solutions(inst, pool, 1 << 20) == brute_count(inst, pool));
    }
}

TEST_CASE("greedy trace on the three-house puzzle") {
    auto p = fixtures::three_house_puzzle();
    auto steps = greedy_trace(p);
    REQUIRE(steps.size() == 5);
    CHECK(steps[0].clues == std::vector<int>{1});
    REQUIRE(steps[0].cells.size() == 1);
    CHECK(steps[0].cells[0] == CellAssignment{3, "Name", "arnold"});
    CHECK(steps[1].clues == std::vector<int>{5, 4});
    CHECK(steps[1].cells.size() == 3);
    CHECK(steps[1].unique_values);
    CHECK(steps[2].clues == std::vector<int>{3});
    CHECK_FALSE(steps[2].unique_values);
    CHECK(steps[3].clues == std::vector<int>{2});
    CHECK(steps[4].clues == std::vector<int>{0});
    CHECK(steps.back().table == solution_table(p));

    auto g = greedy_solve(p);
    CHECK(g.node(g.sink()).value == NodeValue{solution_table(p)});
    auto eval = make_evaluator(p);
    CHECK(validate(g, &eval).ok());
    CHECK(reasoning_depth(g) == 5);
}

TEST_CASE("sampling") {
    auto one = sample_solution({1, 1, {}, 3});
    CHECK(one.M() == 1);
    CHECK(one.attributes[0].key == "Name");
    CHECK(one.solution == std::vector<std::vector<int>>{{0}});

    auto a = sample_solution({3, 3, {}, 42}), b = sample_solution({3, 3, {}, 42});
    CHECK(a.solution == b.solution);
    CHECK(a.attributes[1].values[0].id == b.attributes[1].values[0].id);

    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        auto s = sample_solution({4, 4, {}, seed});
        REQUIRE(s.attributes[0].key == "Name");
        for (const auto& col : s.solution) {
            auto sorted = col;
            std::sort(sorted.begin(), sorted.end());
            REQUIRE(sorted == std::vector<int>{0, 1, 2, 3});
        }
    }
    CHECK_THROWS(sample_solution({8, 2, {}, 0}));
}

TEST_CASE("generation yields unique, sound, greedily solvable puzzles") {
    auto k1 = generate_puzzle({1, 1, {}, 0});
    CHECK(k1.clues.empty());
    auto g1 = greedy_solve(k1);
    CHECK(g1.size() == 1);

    for (int K = 2; K <= 3; ++K)
        for (int M = 2; M <= 3; ++M)
            for (std::uint64_t seed = 0; seed < 25; ++seed) {
                auto inst = generate_puzzle({K, M, {}, seed});
                REQUIRE(count_solutions(inst, inst.clues, 2) == 1);
                for (const auto& c : inst.clues) REQUIRE(clue_holds(inst, c));
                for (std::size_t i = 0; i < inst.clues.size(); ++i) {
                    auto less = inst.clues;
                    less.erase(less.begin() + i);
                    REQUIRE(count_solutions(inst, less, 3) >= 2);  // nothing redundant
                }
                auto g = greedy_solve(inst);
                REQUIRE(g.node(g.sink()).value == NodeValue{solution_table(inst)});
            }
}

TEST_CASE("hard clue kinds") {
    auto inst = generate_puzzle({4, 2, {}, 7, true});
    CHECK(count_solutions(inst, inst.clues, 2) == 1);
    Clue c{ClueKind::TwoHouseBetween, {0, inst.solution[0][0]}, {1, inst.solution[1][3]}, 0};
    CHECK(clue_holds(inst, c));
    CHECK(clue_text(inst, c).rfind("There are two houses between ", 0) == 0);
}

TEST_CASE("question and answer layout") {
    auto p = fixtures::three_house_puzzle();
    CHECK(answer_text(p) ==
          "$ House: 1 $ Name: Eric   $ Sports: Basketball $ Car: Camry \n"
          "$ House: 2 $ Name: Peter  $ Sports: Tennis     $ Car: Ford \n"
          "$ House: 3 $ Name: Arnold $ Sports: Soccer     $ Car: Tesla \n");
}
