// Hand-built instances shared by the unit tests and the acceptance suite.
#pragma once

#include "compgraph/puzzle.hpp"

namespace fixtures {

/// Three houses; Name / FavoriteSport / CarModel; six clues.
inline compgraph::puzzle::PuzzleInstance three_house_puzzle() {
    using namespace compgraph::puzzle;
    const auto& cat = default_catalog();
    auto pick = [&](int attr, std::vector<std::string> ids) {
        AttributeDesc a{cat[attr].key, cat[attr].header, cat[attr].bullet, {}};
        for (const auto& id : ids)
            for (const auto& v : cat[attr].values)
                if (v.id == id) a.values.push_back(v);
        return a;
    };
    PuzzleInstance p;
    p.K = 3;
    p.attributes = {pick(0, {"peter", "eric", "arnold"}), pick(1, {"soccer", "tennis", "basketball"}),
                    pick(2, {"tesla model 3", "ford f150", "toyota camry"})};
    // houses 1..3: eric/basketball/camry, peter/tennis/ford, arnold/soccer/tesla
    p.solution = {{1, 0, 2}, {2, 1, 0}, {2, 1, 0}};
    p.clues = {
        {ClueKind::SameHouse, {2, 1}, {1, 1}, 0},   // ford = tennis
        {ClueKind::FoundAt, {0, 2}, {}, 3},         // arnold in 3
        {ClueKind::DirectLeft, {2, 2}, {2, 1}, 0},  // camry left of ford
        {ClueKind::SameHouse, {0, 1}, {2, 2}, 0},   // eric = camry
        {ClueKind::SameHouse, {1, 2}, {0, 1}, 0},   // basketball = eric
        {ClueKind::Besides, {1, 1}, {1, 0}, 0},     // tennis next to soccer
    };
    return p;
}

}  // namespace fixtures
