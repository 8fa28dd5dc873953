#include "marlab/cliques.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

namespace marlab {

namespace {

std::vector<std::uint32_t> adjacency_masks(const CommGraph& g) {
    std::vector<std::uint32_t> adj(g.nodes, 0);
    for (const auto& [i, j] : g.edges) {
        adj[i] |= 1u << j;
        adj[j] |= 1u << i;
    }
    return adj;
}

}  // namespace

bool is_valid_cover(const CommGraph& g, const CliqueCover& cover) {
    std::vector<int> seen(g.nodes, 0);
    for (const auto& clique : cover.cliques) {
        if (clique.empty()) return false;
        for (int v : clique) {
            if (v < 0 || v >= g.nodes) return false;
            if (seen[v]++) return false;  // overlap
        }
        for (std::size_t a = 0; a < clique.size(); ++a)
            for (std::size_t b = a + 1; b < clique.size(); ++b)
                if (!g.has_edge(clique[a], clique[b])) return false;
    }
    return std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; });
}

CliqueCover greedy_clique_cover(const CommGraph& g) {
    const auto adj = g.adjacency();
    std::vector<bool> covered(g.nodes, false);
    auto uncovered_degree = [&](int v) {
        int d = 0;
        for (int w : adj[v])
            if (!covered[w]) ++d;
        return d;
    };

    CliqueCover cover;
    int remaining = g.nodes;
    while (remaining > 0) {
        int seed = -1, best_deg = -1;
        for (int v = 0; v < g.nodes; ++v)
            if (!covered[v] && uncovered_degree(v) > best_deg) {
                seed = v;
                best_deg = uncovered_degree(v);
            }
        std::vector<int> clique{seed};
        covered[seed] = true;
        --remaining;
        // Candidates: uncovered common neighbors of the whole clique; admit
        // the highest-degree one first, recompute, repeat.
        while (true) {
            int pick = -1, pick_deg = -1;
            for (int v = 0; v < g.nodes; ++v) {
                if (covered[v]) continue;
                const bool adjacent_to_all =
                    std::all_of(clique.begin(), clique.end(),
                                [&](int c) { return g.has_edge(c, v); });
                if (!adjacent_to_all) continue;
                const int deg = uncovered_degree(v);
                if (deg > pick_deg) {
                    pick = v;
                    pick_deg = deg;
                }
            }
            if (pick < 0) break;
            clique.push_back(pick);
            covered[pick] = true;
            --remaining;
        }
        std::sort(clique.begin(), clique.end());
        cover.cliques.push_back(std::move(clique));
    }
    return cover;
}

CliqueCover exact_clique_cover(const CommGraph& g) {
    const int n = g.nodes;
    if (n > 12) throw TooLarge("exact_clique_cover: more than 12 nodes");
    CliqueCover cover;
    if (n == 0) return cover;

    const auto adj = adjacency_masks(g);
    const std::uint32_t full = (1u << n) - 1u;  // n <= 12, no overflow

    // mask is usable as one part iff it induces a complete subgraph.
    std::vector<char> is_clique(full + 1, 0);
    is_clique[0] = 1;
    for (std::uint32_t mask = 1; mask <= full; ++mask) {
        const int v = __builtin_ctz(mask);
        const std::uint32_t rest = mask & (mask - 1);
        is_clique[mask] = is_clique[rest] && ((adj[v] & rest) == rest);
    }

    // f[mask] = minimum cliques covering exactly `mask`; force the lowest
    // uncovered node into the chosen part so each partition is counted once.
    std::vector<int> f(full + 1, n + 1);
    std::vector<std::uint32_t> choice(full + 1, 0);
    f[0] = 0;
    for (std::uint32_t mask = 1; mask <= full; ++mask) {
        const std::uint32_t low = mask & (0u - mask);
        for (std::uint32_t sub = mask; sub; sub = (sub - 1) & mask) {
            if (!(sub & low) || !is_clique[sub]) continue;
            if (f[mask ^ sub] + 1 < f[mask]) {
                f[mask] = f[mask ^ sub] + 1;
                choice[mask] = sub;
            }
        }
    }

    for (std::uint32_t mask = full; mask;) {
        const std::uint32_t part = choice[mask];
        std::vector<int> clique;
        for (int v = 0; v < n; ++v)
            if (part & (1u << v)) clique.push_back(v);
        cover.cliques.push_back(std::move(clique));
        mask ^= part;
    }
    std::sort(cover.cliques.begin(), cover.cliques.end());
    return cover;
}

CliqueCover singleton_cover(int n) {
    CliqueCover cover;
    for (int v = 0; v < n; ++v) cover.cliques.push_back({v});
    return cover;
}

CliqueCover all_in_one_cover(int n) {
    CliqueCover cover;
    std::vector<int> everyone(n);
    std::iota(everyone.begin(), everyone.end(), 0);
    cover.cliques.push_back(std::move(everyone));
    return cover;
}

std::pair<double, double> clique_relation_check(const CliqueCover& cover, int I) {
    int total = 0;
    double lhs = 0.0;
    for (const auto& clique : cover.cliques) {
        total += static_cast<int>(clique.size());
        lhs += std::sqrt(static_cast<double>(clique.size()));
    }
    if (total != I)
        throw std::invalid_argument("clique_relation_check: cover does not span I nodes");
    const double rhs = std::sqrt(static_cast<double>(cover.size()) * I);
    if (lhs > rhs + 1e-9)
        throw std::logic_error("clique_relation_check: Cauchy-Schwarz bound violated");
    return {lhs, rhs};
}

}  // namespace marlab
