#include "marlab/ucrl.hpp"

#include <algorithm>
#include <stdexcept>

namespace marlab {

RegretTrace ma_ucrl2_run(const TabularMdp& mdp, const UcrlConfig& cfg) {
    mdp.validate();
    if (cfg.agents < 1) throw std::invalid_argument("ucrl: agents must be >= 1");
    if (cfg.horizon < 1) throw std::invalid_argument("ucrl: horizon must be >= 1");
    const int S = mdp.S, A = mdp.A, I = cfg.agents;
    const int cells = S * A;
    const std::int64_t T = cfg.horizon;

    RegretTrace trace;
    trace.rho_star = optimal_average_reward(mdp);
    trace.cumulative.assign(I, std::vector<double>(T + 1, 0.0));
    trace.episode_index.assign(T, 0);

    // Per-agent merged knowledge and per-episode fresh increments.
    std::vector<std::vector<std::int64_t>> merged_sas(I,
                                                      std::vector<std::int64_t>(cells * S, 0));
    std::vector<std::vector<std::int64_t>> merged_sa(I, std::vector<std::int64_t>(cells, 0));
    std::vector<std::vector<std::int64_t>> fresh_sas(I,
                                                     std::vector<std::int64_t>(cells * S, 0));
    std::vector<std::vector<std::int64_t>> visits(I, std::vector<std::int64_t>(cells, 0));

    std::vector<int> state(I, 0);
    std::vector<Rng> rngs;
    for (int i = 0; i < I; ++i)
        rngs.push_back(derive_rng(cfg.seed, StreamRole::Scenario, i));

    std::vector<std::vector<int>> policy(I);
    auto replan = [&](std::int64_t t_k) {
        for (int i = 0; i < I; ++i) {
            const TabularMdp emp = empirical_mdp(S, A, merged_sas[i], mdp.r);
            policy[i] = evi(emp, merged_sa[i], t_k, cfg.delta).policy;
        }
    };
    replan(1);

    int episode = 0;
    for (std::int64_t t = 1; t <= T; ++t) {
        bool boundary = false;
        for (int i = 0; i < I; ++i) {
            const int s = state[i];
            const int a = policy[i][s];
            const int sa = mdp.ridx(s, a);
            trace.cumulative[i][t] = trace.cumulative[i][t - 1] + mdp.reward(s, a);
            const int s2 = sample_next(mdp, s, a, rngs[i]);
            visits[i][sa] += 1;
            fresh_sas[i][mdp.pidx(s, a, s2)] += 1;
            state[i] = s2;
            // Doubling trigger on episode-start counts; the step that reaches
            // the threshold still belongs to this episode.
            if (visits[i][sa] >= std::max<std::int64_t>(1, merged_sa[i][sa]))
                boundary = true;
        }
        trace.episode_index[t - 1] = episode;
        if (!boundary) continue;

        // Synchronous barrier: pool fresh counts inside each clique.
        const CliqueCover cover = cfg.cover_schedule ? cfg.cover_schedule(episode)
                                                     : singleton_cover(I);
        std::vector<std::int64_t> pooled_sas(cells * S);
        std::vector<std::int64_t> pooled_sa(cells);
        for (const auto& clique : cover.cliques) {
            std::fill(pooled_sas.begin(), pooled_sas.end(), 0);
            std::fill(pooled_sa.begin(), pooled_sa.end(), 0);
            for (int j : clique) {
                for (int c = 0; c < cells * S; ++c) pooled_sas[c] += fresh_sas[j][c];
                for (int c = 0; c < cells; ++c) pooled_sa[c] += visits[j][c];
            }
            for (int j : clique) {
                for (int c = 0; c < cells * S; ++c) merged_sas[j][c] += pooled_sas[c];
                for (int c = 0; c < cells; ++c) merged_sa[j][c] += pooled_sa[c];
            }
        }
        if (cfg.observer) {
            UcrlEpisodeInfo info;
            info.episode = episode;
            info.t_end = t;
            info.merged = &merged_sa;
            info.episode_visits = &visits;
            info.cover = &cover;
            cfg.observer(info);
        }
        for (int i = 0; i < I; ++i) {
            std::fill(fresh_sas[i].begin(), fresh_sas[i].end(), 0);
            std::fill(visits[i].begin(), visits[i].end(), 0);
        }
        ++episode;
        if (t < T) replan(t + 1);
    }
    return trace;
}

}  // namespace marlab
