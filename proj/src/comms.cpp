#include "marlab/comms.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace marlab {

bool CommGraph::has_edge(int i, int j) const {
    if (i == j) return false;
    const auto e = std::minmax(i, j);
    return std::binary_search(edges.begin(), edges.end(),
                              std::make_pair(e.first, e.second));
}

std::vector<std::vector<int>> CommGraph::adjacency() const {
    std::vector<std::vector<int>> adj(nodes);
    for (const auto& [i, j] : edges) {
        adj[i].push_back(j);
        adj[j].push_back(i);
    }
    return adj;  // edges are sorted, so each list comes out sorted
}

CommGraph build_graph(const std::vector<std::array<double, 2>>& positions, double d,
                      int episode) {
    if (d < 0.0) throw std::invalid_argument("build_graph: range must be >= 0");
    CommGraph g;
    g.nodes = static_cast<int>(positions.size());
    g.episode = episode;
    g.range = d;
    for (int i = 0; i < g.nodes; ++i)
        for (int j = i + 1; j < g.nodes; ++j) {
            const double dist = std::hypot(positions[i][0] - positions[j][0],
                                           positions[i][1] - positions[j][1]);
            if (dist <= d) g.edges.emplace_back(i, j);
        }
    return g;
}

ExchangeReport exchange(std::vector<ReplayDataset>& buffers, const CommGraph& graph,
                        const std::vector<std::vector<Transition>>& payloads,
                        double blockage_prob, Rng& rng) {
    if (buffers.size() != payloads.size())
        throw std::invalid_argument("exchange: buffers/payloads size mismatch");
    if (graph.nodes != static_cast<int>(buffers.size()))
        throw std::invalid_argument("exchange: graph does not cover all agents");
    if (blockage_prob < 0.0 || blockage_prob > 1.0)
        throw std::invalid_argument("exchange: blockage_prob must be in [0,1]");

    ExchangeReport report;
    report.received.assign(buffers.size(), 0);

    // Payloads were snapshot by the caller (own fresh transitions only), so
    // delivery order cannot leak one agent's gossip into another's payload.
    // Deterministic order: edges ascending, lower-id endpoint receives first.
    for (const auto& [i, j] : graph.edges) {
        for (const auto& [to, from] : {std::pair{i, j}, std::pair{j, i}}) {
            const bool blocked = rng.uniform() < blockage_prob;
            if (blocked) {
                ++report.blocked_links;
                continue;
            }
            report.overhead += static_cast<std::int64_t>(payloads[from].size());
            for (const Transition& t : payloads[from])
                if (buffers[to].insert(t)) ++report.received[to];
        }
    }
    return report;
}

std::vector<std::pair<double, double>> overhead_curve(
    const std::vector<OverheadSample>& samples, const std::vector<double>& d_values) {
    std::vector<std::pair<double, double>> out;
    for (double d : d_values) {
        double sum = 0.0;
        std::int64_t n = 0;
        for (const auto& s : samples)
            if (s.d == d) {
                sum += s.overhead;
                ++n;
            }
        if (n == 0)
            throw std::invalid_argument("overhead_curve: no samples for requested range");
        out.emplace_back(d, sum / static_cast<double>(n));
    }
    return out;
}

}  // namespace marlab
