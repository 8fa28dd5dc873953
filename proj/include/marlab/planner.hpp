#pragma once

#include <functional>
#include <vector>

#include "marlab/ensemble.hpp"
#include "marlab/rng.hpp"

namespace marlab {

/// Reward applied to each successor state with the action that produced it,
/// matching the environment's reward timing.
using RewardFn = std::function<double(const Obs&, double)>;

/// Traffic objective for planning: own plus neighbor speeds, with the
/// collision penalty whenever either sensed gap is inside one vehicle length.
inline RewardFn traffic_reward(double veh_len = 4.5) {
    return [veh_len](const Obs& o, double) {
        const double crash = std::min(o[kObsLa], o[kObsLe]) < veh_len ? 1.0 : 0.0;
        return o[kObsV] + o[kObsVa] + o[kObsVe] - 10.0 * crash;
    };
}

struct PlannerConfig {
    int horizon = 25;      // w: planned steps per call
    int candidates = 400;  // Q: sequences sampled per iteration
    int elites = 40;       // X: refit set size (top 10%)
    int particles = 20;    // P: rollouts per sequence
    int iterations = 5;    // Y: max refinement rounds
    double epsilon = 1e-3;       // stop when no sigma moves more than this
    double var_floor = 1e-4;     // keeps refit variance alive between rounds
    double action_lo = 0.0;      // target-velocity box
    double action_hi = 13.89;
    bool per_step_assignment = false;  // re-draw particle models every step

    void validate() const;
    double midpoint() const { return 0.5 * (action_lo + action_hi); }
    double sigma0() const { return 0.25 * (action_hi - action_lo); }
};

/// Per-timestep independent Gaussian over action sequences.
struct CemDistribution {
    Vec mean;
    Vec var;
};

CemDistribution initial_distribution(const PlannerConfig& cfg);

/// Monte Carlo rollout of one action sequence: P particles, each bound to an
/// ensemble member (fixed per rollout, or re-drawn per step when configured).
struct ParticleRollout {
    std::vector<std::vector<Obs>> traj;  // P trajectories of horizon+1 states
    std::vector<int> member_of;          // initial member assignment per particle
};
ParticleRollout propagate_particles(const Ensemble& ens, const Obs& s0, const Vec& seq,
                                    int particles, bool per_step, Rng& rng);

/// Average over particles of the summed reward along the rollout.
double evaluate_sequence(const Ensemble& ens, const RewardFn& reward, const Obs& s0,
                         const Vec& seq, int particles, bool per_step, Rng& rng);

/// Anything that can score a batch of candidate sequences (rows). The CEM
/// core is written against this so tests can plug deterministic evaluators.
class SequenceEvaluator {
public:
    virtual ~SequenceEvaluator() = default;
    virtual Vec evaluate(const Mat& seqs, Rng& rng) const = 0;
};

/// The production evaluator: trajectory sampling through the ensemble,
/// batched across candidates and particles, grouped by assigned member.
class TsEvaluator : public SequenceEvaluator {
public:
    TsEvaluator(const Ensemble& ens, RewardFn reward, Obs s0, int particles,
                bool per_step)
        : ens_(&ens),
          reward_(std::move(reward)),
          s0_(s0),
          particles_(particles),
          per_step_(per_step) {}
    Vec evaluate(const Mat& seqs, Rng& rng) const override;

private:
    const Ensemble* ens_;
    RewardFn reward_;
    Obs s0_;
    int particles_;
    bool per_step_;
};

struct CemResult {
    Vec best;                  // elite-mean sequence (the prior mean when Y=0)
    CemDistribution posterior;
    std::vector<double> elite_value_trace;  // mean elite value per iteration
    std::vector<Vec> sigma_trace;           // sampling sigmas used per iteration
    int iterations_run = 0;
};

/// Iterative sample/select/refit with elite retention: previous elites stay
/// in the candidate pool, so on deterministic evaluators the mean elite value
/// cannot decrease. Convergence is checked on the refit sigmas before the
/// variance floor is applied, so a degenerate prior returns its mean exactly.
CemResult cem_optimize(const SequenceEvaluator& evaluator, const PlannerConfig& cfg,
                       const CemDistribution& prior, Rng& rng);

CemResult cem_plan(const Ensemble& ens, const RewardFn& reward, const Obs& s0,
                   const PlannerConfig& cfg, const CemDistribution& prior, Rng& rng);

/// Receding-horizon controller: plans with CEM, executes only the first
/// action, and warm-starts the next call by shifting the posterior mean.
class MpcPlanner {
public:
    explicit MpcPlanner(PlannerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

    double act(const Ensemble& ens, const RewardFn& reward, const Obs& s_t, Rng& rng);

    /// Forget the warm start (new episode).
    void reset() { fresh_ = true; }
    /// Override the next call's planning prior (diagnostics/tests).
    void set_prior(CemDistribution d) {
        prior_ = std::move(d);
        fresh_ = false;
    }
    const PlannerConfig& config() const { return cfg_; }

private:
    PlannerConfig cfg_;
    CemDistribution prior_;
    bool fresh_ = true;
};

}  // namespace marlab
