#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "marlab/replay.hpp"
#include "marlab/rng.hpp"

namespace marlab {

/// Who can talk to whom after an episode: agents are nodes, and an undirected
/// edge joins every pair whose planar distance at the final step is within
/// the communication range.
struct CommGraph {
    int nodes = 0;
    int episode = 0;
    double range = 0.0;
    std::vector<std::pair<int, int>> edges;  // i < j, sorted lexicographically

    bool has_edge(int i, int j) const;
    /// Sorted neighbor lists, one per node.
    std::vector<std::vector<int>> adjacency() const;
};

/// Edge (i,j) iff |p_i - p_j| <= d. Throws std::invalid_argument when d < 0.
CommGraph build_graph(const std::vector<std::array<double, 2>>& positions, double d,
                      int episode);

struct ExchangeReport {
    std::vector<std::int64_t> received;  // per agent, transitions newly accepted
    std::int64_t overhead = 0;           // transitions transferred over all directed links
    int blocked_links = 0;               // directed deliveries dropped by blockage
};

/// Synchronous end-of-episode barrier: every surviving edge delivers each
/// endpoint's own fresh payload to the other side. Each directed delivery is
/// dropped independently with probability blockage_prob; receivers discard
/// duplicates and evict FIFO at capacity. Payloads are the transitions each
/// agent generated this episode only (no relaying of earlier gossip).
ExchangeReport exchange(std::vector<ReplayDataset>& buffers, const CommGraph& graph,
                        const std::vector<std::vector<Transition>>& payloads,
                        double blockage_prob, Rng& rng);

/// Mean overhead per requested range value. Throws std::invalid_argument when
/// a requested range has no samples.
struct OverheadSample {
    double d = 0.0;
    double overhead = 0.0;
};
std::vector<std::pair<double, double>> overhead_curve(
    const std::vector<OverheadSample>& samples, const std::vector<double>& d_values);

}  // namespace marlab
