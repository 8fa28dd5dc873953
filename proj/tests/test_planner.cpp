#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "marlab/planner.hpp"
#include "marlab/stats.hpp"
#include "support/synthetic.hpp"

using namespace marlab;
using namespace marlab::testing;

namespace {

/// Ensemble whose every member is the exact identity map with vanishing
/// predictive variance: output layer zeroed (so the delta mean is zero) and
/// the log-variance bounds pinned far below anything observable.
Ensemble make_exact_identity_ensemble(int members) {
    Rng rng(11);
    Ensemble ens(small_model_config(members, 16), rng);
    for (int b = 0; b < members; ++b) {
        ens.member(b).zero_output_layer();
        ens.member(b).max_lv = Vec::Constant(kStateDim, -40.0);
        ens.member(b).min_lv = Vec::Constant(kStateDim, -40.0);
    }
    return ens;
}

const Ensemble& shared_identity_ensemble() {
    static const Ensemble ens = make_exact_identity_ensemble(3);
    return ens;
}

/// Deterministic evaluator: value(seq) = -sum_t (seq_t - target_t)^2.
class QuadraticEvaluator : public SequenceEvaluator {
public:
    explicit QuadraticEvaluator(Vec target) : target_(std::move(target)) {}
    Vec evaluate(const Mat& seqs, Rng&) const override {
        Vec v(seqs.rows());
        for (int q = 0; q < seqs.rows(); ++q)
            v(q) = -(seqs.row(q).transpose() - target_).squaredNorm();
        return v;
    }

private:
    Vec target_;
};

/// Deterministic plateau evaluator over a 3-point action grid {lo, mid, hi}:
/// each action snaps to its nearest grid point and indexes a reward table.
class GridEvaluator : public SequenceEvaluator {
public:
    GridEvaluator(std::vector<std::array<double, 3>> table, double lo, double hi)
        : table_(std::move(table)), lo_(lo), hi_(hi) {}
    int snap(double a) const {
        const double mid = 0.5 * (lo_ + hi_);
        const double d0 = std::abs(a - lo_), d1 = std::abs(a - mid), d2 = std::abs(a - hi_);
        if (d0 <= d1 && d0 <= d2) return 0;
        return d1 <= d2 ? 1 : 2;
    }
    Vec evaluate(const Mat& seqs, Rng&) const override {
        Vec v(seqs.rows());
        for (int q = 0; q < seqs.rows(); ++q) {
            double s = 0.0;
            for (int t = 0; t < seqs.cols(); ++t) s += table_[t][snap(seqs(q, t))];
            v(q) = s;
        }
        return v;
    }
    double exhaustive_best() const {
        double s = 0.0;
        for (const auto& row : table_) s += *std::max_element(row.begin(), row.end());
        return s;
    }

private:
    std::vector<std::array<double, 3>> table_;
    double lo_, hi_;
};

PlannerConfig small_cfg(int w, double lo, double hi) {
    PlannerConfig cfg;
    cfg.horizon = w;
    cfg.candidates = 150;
    cfg.elites = 15;
    cfg.particles = 5;
    cfg.iterations = 6;
    cfg.action_lo = lo;
    cfg.action_hi = hi;
    return cfg;
}

std::vector<Vec> snapshot_params(const Ensemble& ens) {
    std::vector<Vec> out;
    for (int b = 0; b < ens.members(); ++b) out.push_back(ens.member(b).flat_params());
    return out;
}

}  // namespace

TEST_CASE("config validation rejects inconsistent settings") {
    PlannerConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.elites = cfg.candidates + 1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = PlannerConfig{};
    cfg.horizon = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = PlannerConfig{};
    cfg.action_lo = cfg.action_hi;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = PlannerConfig{};
    cfg.particles = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("traffic reward adds speeds and penalizes sub-length gaps") {
    const RewardFn r = traffic_reward(4.5);
    Obs o{};
    o[kObsV] = 5.0;
    o[kObsVa] = 6.0;
    o[kObsVe] = 4.0;
    o[kObsLa] = 50.0;
    o[kObsLe] = 75.0;
    CHECK(r(o, 3.0) == 15.0);
    o[kObsLe] = 4.0;  // inside one vehicle length -> collision penalty
    CHECK(r(o, 3.0) == 5.0);
}

TEST_CASE("particle propagation through exact identity dynamics stays put") {
    const Ensemble& ens = shared_identity_ensemble();
    Obs s0{};
    for (int d = 0; d < kStateDim; ++d) s0[d] = 0.3 * (d + 1);
    const Vec seq = Vec::Constant(5, 1.7);
    Rng rng(42);
    const ParticleRollout roll = propagate_particles(ens, s0, seq, 20, false, rng);
    REQUIRE(roll.traj.size() == 20);
    for (const auto& traj : roll.traj) {
        REQUIRE(traj.size() == 6);  // horizon + 1 states
        for (const auto& s : traj)
            for (int d = 0; d < kStateDim; ++d)
                CHECK(std::abs(s[d] - s0[d]) < 1e-6);
    }
}

TEST_CASE("per-rollout member assignment covers the ensemble and sums to P") {
    const Ensemble& ens = shared_identity_ensemble();  // 3 members
    Obs s0{};
    const Vec seq = Vec::Constant(2, 0.0);
    Rng rng(7);
    const ParticleRollout roll = propagate_particles(ens, s0, seq, 20, false, rng);
    REQUIRE(roll.member_of.size() == 20);
    std::array<int, 3> counts{};
    for (int m : roll.member_of) {
        REQUIRE(m >= 0);
        REQUIRE(m < 3);
        counts[m]++;
    }
    CHECK(counts[0] + counts[1] + counts[2] == 20);

    // Per-step mode produces trajectories of the same shape.
    Rng rng2(7);
    const ParticleRollout roll2 = propagate_particles(ens, s0, seq, 20, true, rng2);
    REQUIRE(roll2.traj.size() == 20);
    for (const auto& traj : roll2.traj) CHECK(traj.size() == 3);
}

TEST_CASE("trained identity dynamics roll out flat within 1e-2") {
    Rng data_rng(5);
    ReplayDataset data = make_identity_dataset(600, data_rng);
    Rng init(6);
    ModelConfig mc = small_model_config(2, 32);
    Ensemble ens(mc, init);
    Rng train_rng(7);
    ens.train(data, train_rng);

    Obs s0{};
    for (int d = 0; d < kStateDim; ++d) s0[d] = 0.4 * d - 1.0;
    const Vec seq = Vec::Constant(5, 0.5);
    Rng rng(8);
    const ParticleRollout roll = propagate_particles(ens, s0, seq, 10, false, rng);
    for (const auto& traj : roll.traj)
        for (const auto& s : traj)
            for (int d = 0; d < kStateDim; ++d)
                CHECK(std::abs(s[d] - s0[d]) < 1e-2);
}

TEST_CASE("trained linear dynamics reproduce the closed-form rollout") {
    Rng data_rng(21);
    ReplayDataset data = make_linear_dataset(2000, 0.0, data_rng, 0.1);
    Rng init(22);
    ModelConfig mc = small_model_config(1, 64);
    mc.epochs = 8;
    Ensemble ens(mc, init);
    Rng train_rng(23);
    ens.train(data, train_rng);

    Obs s0{};
    for (int d = 0; d < kStateDim; ++d) s0[d] = 0.3;
    const Vec seq = Vec::Constant(3, 2.0);
    Rng rng(24);
    const ParticleRollout roll = propagate_particles(ens, s0, seq, 4, false, rng);
    for (const auto& traj : roll.traj) {
        REQUIRE(traj.size() == 4);
        for (int t = 0; t <= 3; ++t) {
            Obs want = s0;
            want[0] += 0.1 * 2.0 * t;  // s_{t+1} = s_t + 0.1 * a
            for (int d = 0; d < kStateDim; ++d)
                CHECK(std::abs(traj[t][d] - want[d]) < 0.05);
        }
    }
}

TEST_CASE("constant reward of one scores exactly the horizon length") {
    Rng init(3);
    Ensemble ens(small_model_config(2, 16), init);  // untrained: noisy dynamics
    Obs s0{};
    const Vec seq = Vec::Constant(7, 1.0);
    Rng rng(4);
    const double v =
        evaluate_sequence(ens, [](const Obs&, double) { return 1.0; }, s0, seq, 6, false, rng);
    CHECK(v == 7.0);
}

TEST_CASE("action-only rewards are summed exactly regardless of dynamics") {
    Rng init(13);
    Ensemble ens(small_model_config(3, 16), init);
    Obs s0{};
    Vec seq(4);
    seq << 1.0, 2.5, -0.5, 3.0;
    double want = 0.0;
    for (int t = 0; t < 4; ++t) want += -(seq(t) - 3.0) * (seq(t) - 3.0);
    Rng rng(14);
    const double got = evaluate_sequence(
        ens, [](const Obs&, double a) { return -(a - 3.0) * (a - 3.0); }, s0, seq, 5, false,
        rng);
    CHECK(std::abs(got - want) < 1e-12);
}

TEST_CASE("single-particle average converges to the many-particle value") {
    Rng init(31);
    Ensemble ens(small_model_config(2, 24), init);  // untrained: genuinely stochastic
    Obs s0{};
    for (int d = 0; d < kStateDim; ++d) s0[d] = 0.1 * d;
    Vec seq(3);
    seq << 0.5, -1.0, 1.5;
    const RewardFn reward = [](const Obs& o, double a) { return o[0] + 0.1 * a; };

    const int n = 10000;
    std::vector<double> singles(n);
    Rng rng_a(77);
    for (int i = 0; i < n; ++i)
        singles[i] = evaluate_sequence(ens, reward, s0, seq, 1, false, rng_a);
    const double m1 = mean(singles);
    const double sd = std::sqrt(variance(singles));

    Rng rng_b(78);
    const double m2 = evaluate_sequence(ens, reward, s0, seq, n, false, rng_b);
    CHECK(std::abs(m1 - m2) <= 4.0 * sd / 100.0);
}

TEST_CASE("cem recovers quadratic optima through trajectory sampling") {
    const Ensemble& ens = shared_identity_ensemble();
    Obs s0{};
    for (double target : {7.0, 10.5, 2.0}) {
        PlannerConfig cfg = small_cfg(3, 0.0, 13.89);
        const RewardFn reward = [target](const Obs&, double a) {
            return -(a - target) * (a - target);
        };
        Rng rng(900 + static_cast<int>(10 * target));
        const CemResult r =
            cem_plan(ens, reward, s0, cfg, initial_distribution(cfg), rng);
        for (int t = 0; t < cfg.horizon; ++t)
            CHECK(std::abs(r.best(t) - target) < 0.1);
    }
}

TEST_CASE("zero iterations return the prior untouched") {
    QuadraticEvaluator ev(Vec::Constant(4, 2.0));
    PlannerConfig cfg = small_cfg(4, 0.0, 10.0);
    cfg.iterations = 0;
    CemDistribution prior;
    prior.mean = Vec::LinSpaced(4, 1.0, 4.0);
    prior.var = Vec::Constant(4, 2.25);
    Rng rng(1);
    const CemResult r = cem_optimize(ev, cfg, prior, rng);
    CHECK(r.iterations_run == 0);
    CHECK(r.best == prior.mean);
    CHECK(r.posterior.mean == prior.mean);
    CHECK(r.posterior.var == prior.var);
}

TEST_CASE("a degenerate zero-variance prior returns its mean exactly") {
    QuadraticEvaluator ev(Vec::Constant(3, 9.0));  // optimum elsewhere on purpose
    PlannerConfig cfg = small_cfg(3, 0.0, 10.0);
    CemDistribution prior;
    prior.mean = Vec::Constant(3, 1.25);
    prior.var = Vec::Zero(3);
    Rng rng(2);
    const CemResult r = cem_optimize(ev, cfg, prior, rng);
    CHECK(r.iterations_run == 1);  // converges immediately
    CHECK(r.best == prior.mean);
}

TEST_CASE("prior validation") {
    QuadraticEvaluator ev(Vec::Constant(3, 1.0));
    PlannerConfig cfg = small_cfg(3, 0.0, 10.0);
    CemDistribution bad;
    bad.mean = Vec::Zero(2);
    bad.var = Vec::Ones(2);
    Rng rng(3);
    CHECK_THROWS_AS(cem_optimize(ev, cfg, bad, rng), std::invalid_argument);
    bad.mean = Vec::Zero(3);
    bad.var = Vec::Constant(3, -1.0);
    CHECK_THROWS_AS(cem_optimize(ev, cfg, bad, rng), std::invalid_argument);
}

TEST_CASE("elite mean value never decreases under a deterministic evaluator") {
    for (int seed : {10, 11, 12, 13, 14}) {
        Vec target(4);
        Rng trg(seed * 100);
        for (int t = 0; t < 4; ++t) target(t) = trg.uniform(1.0, 9.0);
        QuadraticEvaluator ev(target);
        PlannerConfig cfg = small_cfg(4, 0.0, 10.0);
        cfg.epsilon = 0.0;  // run all iterations
        Rng rng(seed);
        const CemResult r = cem_optimize(ev, cfg, initial_distribution(cfg), rng);
        REQUIRE(r.elite_value_trace.size() >= 2);
        for (std::size_t i = 1; i < r.elite_value_trace.size(); ++i)
            CHECK(r.elite_value_trace[i] >= r.elite_value_trace[i - 1]);
    }
}

TEST_CASE("sampling sigmas contract on quadratic objectives") {
    for (int seed : {20, 21, 22}) {
        Vec target(3);
        Rng trg(seed * 100);
        for (int t = 0; t < 3; ++t) target(t) = trg.uniform(2.0, 8.0);
        QuadraticEvaluator ev(target);
        PlannerConfig cfg = small_cfg(3, 0.0, 10.0);
        cfg.epsilon = 0.0;
        Rng rng(seed);
        const CemResult r = cem_optimize(ev, cfg, initial_distribution(cfg), rng);
        REQUIRE(r.sigma_trace.size() >= 2);
        for (std::size_t i = 1; i < r.sigma_trace.size(); ++i)
            for (int t = 0; t < 3; ++t)
                CHECK(r.sigma_trace[i](t) <= r.sigma_trace[i - 1](t));
    }
}

TEST_CASE("refit variances respect the floor and means stay inside the box") {
    QuadraticEvaluator ev(Vec::Constant(3, 12.0));  // optimum outside the box
    PlannerConfig cfg = small_cfg(3, 0.0, 10.0);
    Rng rng(5);
    const CemResult r = cem_optimize(ev, cfg, initial_distribution(cfg), rng);
    for (int t = 0; t < 3; ++t) {
        CHECK(r.posterior.var(t) >= cfg.var_floor);
        CHECK(r.posterior.mean(t) >= cfg.action_lo);
        CHECK(r.posterior.mean(t) <= cfg.action_hi);
        CHECK(r.best(t) > 9.0);  // pushed against the upper clamp
    }
}

TEST_CASE("equal seeds give bitwise-identical plans") {
    const Ensemble& ens = shared_identity_ensemble();
    Obs s0{};
    s0[kObsV] = 3.0;
    PlannerConfig cfg = small_cfg(4, 0.0, 13.89);
    const RewardFn reward = traffic_reward();
    Rng r1(123), r2(123);
    const CemResult a = cem_plan(ens, reward, s0, cfg, initial_distribution(cfg), r1);
    const CemResult b = cem_plan(ens, reward, s0, cfg, initial_distribution(cfg), r2);
    CHECK(a.best == b.best);
    CHECK(a.posterior.mean == b.posterior.mean);
    CHECK(a.posterior.var == b.posterior.var);
}

TEST_CASE("cem matches exhaustive search on small discretized problems") {
    int ok = 0;
    const int instances = 50;
    Rng gen(4040);
    for (int i = 0; i < instances; ++i) {
        const int w = 1 + gen.uniform_int(3);  // horizon 1..3
        std::vector<std::array<double, 3>> table(w);
        for (int t = 0; t < w; ++t)
            for (int k = 0; k < 3; ++k) table[t][k] = gen.uniform(0.0, 10.0);
        GridEvaluator ev(table, 0.0, 2.0);

        PlannerConfig cfg = small_cfg(w, 0.0, 2.0);
        cfg.candidates = 60;
        cfg.elites = 8;
        cfg.iterations = 5;
        Rng rng(5000 + i);
        const CemResult r = cem_optimize(ev, cfg, initial_distribution(cfg), rng);
        Mat best_seq(1, w);
        best_seq.row(0) = r.best.transpose();
        Rng dummy(0);
        const double got = ev.evaluate(best_seq, dummy)(0);
        if (got >= 0.95 * ev.exhaustive_best()) ++ok;
    }
    CHECK(ok >= 48);  // at least 95% of instances
}

TEST_CASE("planning never mutates the ensemble") {
    Rng init(61);
    Ensemble ens(small_model_config(3, 16), init);
    const std::vector<Vec> before = snapshot_params(ens);
    ens.reset_query_count();

    Obs s0{};
    PlannerConfig cfg = small_cfg(3, 0.0, 13.89);
    Rng rng(62);
    cem_plan(ens, traffic_reward(), s0, cfg, initial_distribution(cfg), rng);

    CHECK(ens.query_count() > 0);  // it really went through the model
    const std::vector<Vec> after = snapshot_params(ens);
    for (int b = 0; b < ens.members(); ++b) CHECK(before[b] == after[b]);
    CHECK(ens.input_normalizer().mean == Vec::Zero(kStateDim + 1));
    CHECK(ens.target_normalizer().mean == Vec::Zero(kStateDim));
}

TEST_CASE("mpc returns one boxed action per call and tracks static optima") {
    const Ensemble& ens = shared_identity_ensemble();
    Obs s0{};
    const double target = 10.5;
    const RewardFn reward = [target](const Obs&, double a) {
        return -(a - target) * (a - target);
    };
    PlannerConfig cfg = small_cfg(4, 0.0, 13.89);
    MpcPlanner planner(cfg);
    Rng rng(71);
    std::vector<double> actions;
    for (int call = 0; call < 6; ++call) {
        const double a = planner.act(ens, reward, s0, rng);
        CHECK(a >= cfg.action_lo);
        CHECK(a <= cfg.action_hi);
        actions.push_back(a);
    }
    for (int call = 2; call < 6; ++call) CHECK(std::abs(actions[call] - target) < 0.1);
}

TEST_CASE("a frozen prior is executed verbatim and shifts forward") {
    const Ensemble& ens = shared_identity_ensemble();
    Obs s0{};
    PlannerConfig cfg = small_cfg(3, 0.0, 13.89);
    cfg.iterations = 0;  // planning disabled: the prior is the plan
    MpcPlanner planner(cfg);
    CemDistribution frozen;
    frozen.mean = Vec(3);
    frozen.mean << 1.0, 2.0, 3.0;
    frozen.var = Vec::Zero(3);
    planner.set_prior(frozen);

    Rng rng(81);
    const RewardFn reward = traffic_reward();
    CHECK(planner.act(ens, reward, s0, rng) == 1.0);
    CHECK(planner.act(ens, reward, s0, rng) == 2.0);  // warm start shifted
    CHECK(planner.act(ens, reward, s0, rng) == 3.0);
    CHECK(planner.act(ens, reward, s0, rng) == cfg.midpoint());  // padded tail

    planner.reset();  // forget the warm start entirely
    CHECK(planner.act(ens, reward, s0, rng) == cfg.midpoint());
}

TEST_CASE("a zero-variance prior makes mpc return its first entry exactly") {
    const Ensemble& ens = shared_identity_ensemble();
    Obs s0{};
    PlannerConfig cfg = small_cfg(3, 0.0, 13.89);
    MpcPlanner planner(cfg);
    CemDistribution frozen;
    frozen.mean = Vec::Constant(3, 4.75);
    frozen.var = Vec::Zero(3);
    planner.set_prior(frozen);
    Rng rng(82);
    CHECK(planner.act(ens, traffic_reward(), s0, rng) == 4.75);
}

TEST_CASE("mpc is deterministic under equal seeds") {
    Rng init(91);
    Ensemble ens(small_model_config(2, 16), init);
    Obs s0{};
    s0[kObsV] = 5.0;
    s0[kObsLa] = 30.0;
    s0[kObsLe] = 75.0;
    PlannerConfig cfg = small_cfg(3, 0.0, 13.89);
    cfg.candidates = 60;
    cfg.elites = 8;
    std::array<std::vector<double>, 2> runs;
    for (int run = 0; run < 2; ++run) {
        MpcPlanner planner(cfg);
        Rng rng(555);
        for (int call = 0; call < 3; ++call)
            runs[run].push_back(planner.act(ens, traffic_reward(), s0, rng));
    }
    CHECK(runs[0] == runs[1]);
}
