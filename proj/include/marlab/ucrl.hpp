#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "marlab/cliques.hpp"
#include "marlab/tabular.hpp"

namespace marlab {

/// Snapshot handed to the optional observer after every episode's merge.
struct UcrlEpisodeInfo {
    int episode = 0;
    std::int64_t t_end = 0;                                // global step of the boundary
    const std::vector<std::vector<std::int64_t>>* merged;  // per agent, (s,a) totals
    const std::vector<std::vector<std::int64_t>>* episode_visits;  // per agent u_k
    const CliqueCover* cover;
};

struct UcrlConfig {
    int agents = 1;
    std::int64_t horizon = 50000;  // total steps T per agent
    double delta = 0.1;
    std::uint64_t seed = 0;
    /// Sharing schedule: cover used at the end of episode k. Null means no
    /// sharing (every agent alone).
    std::function<CliqueCover(int)> cover_schedule;
    std::function<void(const UcrlEpisodeInfo&)> observer;
};

struct RegretTrace {
    double rho_star = 0.0;
    /// cumulative[i][t] = mean reward collected by agent i over steps 1..t
    /// (index 0 is zero), so regret_i(t) = t * rho_star - cumulative[i][t].
    std::vector<std::vector<double>> cumulative;
    std::vector<int> episode_index;  // shared across agents; one entry per step

    double agent_regret(int i, std::int64_t t) const {
        return rho_star * static_cast<double>(t) - cumulative[i][t];
    }
    double group_regret(std::int64_t t) const {
        double g = 0.0;
        for (std::size_t i = 0; i < cumulative.size(); ++i)
            g += agent_regret(static_cast<int>(i), t);
        return g;
    }
    std::vector<double> final_agent_regret() const {
        std::vector<double> out;
        const std::int64_t T = static_cast<std::int64_t>(episode_index.size());
        for (std::size_t i = 0; i < cumulative.size(); ++i)
            out.push_back(agent_regret(static_cast<int>(i), T));
        return out;
    }
};

/// I agents each run UCRL2 on an identical copy of the MDP. Episodes are
/// synchronous: the first agent whose within-episode visits u(s,a) reach its
/// episode-start count max(1, N(s,a)) ends the episode for everyone (that
/// final step still counts). At each boundary, agents within one clique of
/// the scheduled cover pool their fresh transition counts, then every agent
/// re-solves its optimistic policy via extended value iteration.
RegretTrace ma_ucrl2_run(const TabularMdp& mdp, const UcrlConfig& cfg);

}  // namespace marlab
