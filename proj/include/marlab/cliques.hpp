#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include "marlab/comms.hpp"

namespace marlab {

struct TooLarge : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Disjoint cliques covering every node of a graph.
struct CliqueCover {
    std::vector<std::vector<int>> cliques;  // each sorted ascending
    int size() const { return static_cast<int>(cliques.size()); }
};

/// Every part induces a complete subgraph; parts are disjoint and cover all
/// nodes exactly once.
bool is_valid_cover(const CommGraph& g, const CliqueCover& cover);

/// Grow a clique from the highest-degree uncovered node, repeatedly. Always
/// valid; size upper-bounds the minimum cover.
CliqueCover greedy_clique_cover(const CommGraph& g);

/// Minimum clique cover by exact search (chromatic number of the complement,
/// subset dynamic programming). Throws TooLarge beyond 12 nodes.
CliqueCover exact_clique_cover(const CommGraph& g);

/// Trivial covers used as sharing schedules: every node alone, or one clique
/// containing everyone (only valid on a complete graph).
CliqueCover singleton_cover(int n);
CliqueCover all_in_one_cover(int n);

/// (sum_C sqrt(|C|), sqrt(cover_size * I)). Throws std::invalid_argument when
/// the cover does not partition exactly I nodes; the returned pair always
/// satisfies lhs <= rhs (Cauchy-Schwarz), with equality iff all cliques have
/// equal size.
std::pair<double, double> clique_relation_check(const CliqueCover& cover, int I);

}  // namespace marlab
