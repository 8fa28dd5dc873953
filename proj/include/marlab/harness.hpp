#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "marlab/comms.hpp"
#include "marlab/config.hpp"

namespace marlab {

inline constexpr const char* kToolVersion = "marlab 1.0.0";

/// A runtime guarantee of the experiment loop failed (these are bugs or
/// corrupted state, not user errors). The CLI maps this to exit code 3.
struct InvariantViolation : std::logic_error {
    using std::logic_error::logic_error;
};

/// Per-episode scores for one run.
struct MetricRow {
    int episode = 0;
    double agility = 0.0;        // m per step: mean over agents of (1/t_c) sum dx
    double safety = 0.0;         // mean over agents of t_c / H
    std::int64_t overhead = 0;   // transitions moved in the post-episode exchange
    double mean_reward = 0.0;    // mean over agents of the episodic reward sum
};

/// What one agent did in one episode.
struct EpisodeSummary {
    int t_c = 0;              // steps survived; the collision step counts
    bool collided = false;    // this agent's own vehicle was hit
    std::vector<double> dx;   // per-step travel distance, size t_c
    double reward_sum = 0.0;
    std::array<double, 2> final_pos{};   // planar position at episode end
    std::int64_t queries = 0;            // dynamics-model queries this episode
    std::vector<Transition> fresh;       // transitions collected this episode
};

/// Mean over agents of (1/t_c) * sum of per-step travel distances.
double episode_agility(const std::vector<EpisodeSummary>& per_agent);
/// Mean over agents of t_c / horizon.
double episode_safety(const std::vector<EpisodeSummary>& per_agent, int horizon);

struct SeedResult {
    std::uint64_t seed = 0;
    std::vector<MetricRow> metrics;         // one row per episode
    std::vector<ExchangeReport> exchanges;  // one report per episode
    // Per episode, per agent:
    std::vector<std::vector<std::int64_t>> episode_queries;
    std::vector<std::vector<std::array<double, 2>>> final_positions;
    std::vector<std::vector<std::int64_t>> payload_sizes;
};

struct RunResult {
    std::string out_dir;  // empty when artifacts were skipped
    std::vector<SeedResult> per_seed;
};

/// The full decentralized loop over cfg.seeds: episode 0 explores with
/// uniformly random actions and never queries the model; every later episode
/// retrains each agent's ensemble on its merged buffer and acts through the
/// receding-horizon planner; agents within range d exchange the episode's
/// fresh transitions at the episode barrier. Artifacts (per-agent traces,
/// metrics.csv, exchange.csv, manifest.txt) are written under cfg.out_dir
/// unless it is empty.
RunResult run_mapets(const RunConfig& cfg);

/// The same loop with communication removed: each agent runs exactly as a
/// stand-alone single-agent experiment (same derived random streams), and no
/// exchange ever happens. With d = 0 the two entry points produce
/// byte-identical artifacts.
RunResult run_independent(const RunConfig& cfg);

struct SweepRow {
    double axis_value = 0.0;
    std::uint64_t seed = 0;
    int episode = 0;
    double agility = 0.0;
    double safety = 0.0;
    std::int64_t overhead = 0;
};

/// Run the base config once per (axis value, seed) with the named parameter
/// replaced: axis is one of {d, w, B, P, blockage}. Writes sweep.csv (long
/// format) plus the per-value run artifacts under base.out_dir.
std::vector<SweepRow> run_sweep(const RunConfig& base, const std::string& axis,
                                const std::vector<double>& values);

/// Optimistic tabular experiment on the chain MDP; one CSV per seed with
/// columns t, agent_id, cumulative_reward, regret, episode_index.
void run_regret(const RegretConfig& cfg);

/// Clique-cover report over communication ranges for evenly spaced agents:
/// CSV columns d, graph_edges, greedy_cover, exact_cover.
void run_cover(const CoverConfig& cfg);

/// Fast self-contained invariant/oracle suite ("check" subcommand). Prints
/// one line per check to `log` and returns the number of failures.
int run_check(std::ostream& log);

/// Recursive byte-compare of two directories (same relative file set and
/// identical file contents). On mismatch returns false and reports the first
/// differing path via *why when non-null.
bool directories_identical(const std::string& a, const std::string& b,
                           std::string* why = nullptr);

}  // namespace marlab
