#include "marlab/planner.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace marlab {

void PlannerConfig::validate() const {
    if (horizon < 1) throw std::invalid_argument("planner: horizon must be >= 1");
    if (candidates < 1) throw std::invalid_argument("planner: candidates must be >= 1");
    if (elites < 1 || elites > candidates)
        throw std::invalid_argument("planner: elites must be in [1, candidates]");
    if (particles < 1) throw std::invalid_argument("planner: particles must be >= 1");
    if (iterations < 0) throw std::invalid_argument("planner: iterations must be >= 0");
    if (!(epsilon >= 0.0)) throw std::invalid_argument("planner: epsilon must be >= 0");
    if (!(var_floor > 0.0)) throw std::invalid_argument("planner: var_floor must be > 0");
    if (!(action_lo < action_hi))
        throw std::invalid_argument("planner: action box must be non-empty");
}

CemDistribution initial_distribution(const PlannerConfig& cfg) {
    CemDistribution d;
    d.mean = Vec::Constant(cfg.horizon, cfg.midpoint());
    d.var = Vec::Constant(cfg.horizon, cfg.sigma0() * cfg.sigma0());
    return d;
}

namespace {

Obs row_to_obs(const Mat& S, int i) {
    Obs o;
    for (int d = 0; d < kStateDim; ++d) o[d] = S(i, d);
    return o;
}

void assign_members(std::vector<int>& member_of, int members, Rng& rng) {
    for (auto& m : member_of) m = rng.uniform_int(members);
}

/// Advance every row one step through its assigned member. Queries are
/// grouped by member (one batched call each) in ascending row order, so the
/// draw sequence is fixed by the assignment alone.
Mat ts_step(const Ensemble& ens, const Mat& S, const Vec& A,
            const std::vector<int>& member_of, Rng& rng) {
    const int n = static_cast<int>(S.rows());
    Mat next(n, kStateDim);
    std::vector<int> rows;
    for (int b = 0; b < ens.members(); ++b) {
        rows.clear();
        for (int i = 0; i < n; ++i)
            if (member_of[i] == b) rows.push_back(i);
        if (rows.empty()) continue;
        const int m = static_cast<int>(rows.size());
        Mat Sb(m, kStateDim);
        Vec Ab(m);
        for (int k = 0; k < m; ++k) {
            Sb.row(k) = S.row(rows[k]);
            Ab(k) = A(rows[k]);
        }
        const Mat Nb = ens.sample_next_batch(b, Sb, Ab, rng);
        for (int k = 0; k < m; ++k) next.row(rows[k]) = Nb.row(k);
    }
    return next;
}

}  // namespace

ParticleRollout propagate_particles(const Ensemble& ens, const Obs& s0, const Vec& seq,
                                    int particles, bool per_step, Rng& rng) {
    if (particles < 1)
        throw std::invalid_argument("propagate_particles: particles must be >= 1");
    const int w = static_cast<int>(seq.size());
    Mat S(particles, kStateDim);
    for (int p = 0; p < particles; ++p)
        for (int d = 0; d < kStateDim; ++d) S(p, d) = s0[d];
    std::vector<int> member_of(particles);
    assign_members(member_of, ens.members(), rng);

    ParticleRollout out;
    out.member_of = member_of;
    out.traj.assign(particles, {});
    for (int p = 0; p < particles; ++p) {
        out.traj[p].reserve(w + 1);
        out.traj[p].push_back(s0);
    }
    for (int t = 0; t < w; ++t) {
        if (per_step && t > 0) assign_members(member_of, ens.members(), rng);
        const Vec A = Vec::Constant(particles, seq(t));
        S = ts_step(ens, S, A, member_of, rng);
        for (int p = 0; p < particles; ++p) out.traj[p].push_back(row_to_obs(S, p));
    }
    return out;
}

Vec TsEvaluator::evaluate(const Mat& seqs, Rng& rng) const {
    const int Q = static_cast<int>(seqs.rows());
    const int w = static_cast<int>(seqs.cols());
    if (Q == 0 || w == 0) throw EmptyBatch("TsEvaluator: empty sequence batch");
    const int P = particles_;
    const int n = Q * P;
    Mat S(n, kStateDim);
    for (int i = 0; i < n; ++i)
        for (int d = 0; d < kStateDim; ++d) S(i, d) = s0_[d];
    std::vector<int> member_of(n);
    assign_members(member_of, ens_->members(), rng);

    Vec acc = Vec::Zero(n);
    for (int t = 0; t < w; ++t) {
        if (per_step_ && t > 0) assign_members(member_of, ens_->members(), rng);
        Vec A(n);
        for (int q = 0; q < Q; ++q) A.segment(q * P, P).setConstant(seqs(q, t));
        S = ts_step(*ens_, S, A, member_of, rng);
        for (int i = 0; i < n; ++i) acc(i) += reward_(row_to_obs(S, i), A(i));
    }
    Vec vals(Q);
    for (int q = 0; q < Q; ++q) vals(q) = acc.segment(q * P, P).mean();
    return vals;
}

double evaluate_sequence(const Ensemble& ens, const RewardFn& reward, const Obs& s0,
                         const Vec& seq, int particles, bool per_step, Rng& rng) {
    TsEvaluator ev(ens, reward, s0, particles, per_step);
    Mat one(1, seq.size());
    one.row(0) = seq.transpose();
    return ev.evaluate(one, rng)(0);
}

CemResult cem_optimize(const SequenceEvaluator& evaluator, const PlannerConfig& cfg,
                       const CemDistribution& prior, Rng& rng) {
    cfg.validate();
    const int w = cfg.horizon;
    if (prior.mean.size() != w || prior.var.size() != w)
        throw std::invalid_argument("cem: prior dimension != horizon");
    if ((prior.var.array() < 0.0).any())
        throw std::invalid_argument("cem: negative prior variance");

    CemResult res;
    res.best = prior.mean;
    res.posterior = prior;
    if (cfg.iterations == 0) return res;

    CemDistribution dist = prior;
    Mat elite_seqs;  // X x w once the first iteration ran
    Vec elite_vals;

    for (int it = 0; it < cfg.iterations; ++it) {
        const Vec sigma = dist.var.array().sqrt();
        res.sigma_trace.push_back(sigma);
        Mat cand(cfg.candidates, w);
        for (int q = 0; q < cfg.candidates; ++q)
            for (int t = 0; t < w; ++t)
                cand(q, t) = std::clamp(dist.mean(t) + sigma(t) * rng.normal(),
                                        cfg.action_lo, cfg.action_hi);
        const Vec cand_vals = evaluator.evaluate(cand, rng);

        // Pool the fresh candidates with last round's elites (kept with their
        // recorded values), so the elite set can never get worse under a
        // deterministic evaluator.
        const bool retain = elite_seqs.rows() > 0;
        const int pool_n = cfg.candidates + (retain ? cfg.elites : 0);
        Mat pool(pool_n, w);
        Vec pool_vals(pool_n);
        pool.topRows(cfg.candidates) = cand;
        pool_vals.head(cfg.candidates) = cand_vals;
        if (retain) {
            pool.bottomRows(cfg.elites) = elite_seqs;
            pool_vals.tail(cfg.elites) = elite_vals;
        }

        // Top X by value; ties go to the lower pool index (fresh first).
        std::vector<int> order(pool_n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return pool_vals(a) > pool_vals(b); });
        elite_seqs.resize(cfg.elites, w);
        elite_vals.resize(cfg.elites);
        for (int k = 0; k < cfg.elites; ++k) {
            elite_seqs.row(k) = pool.row(order[k]);
            elite_vals(k) = pool_vals(order[k]);
        }
        res.elite_value_trace.push_back(elite_vals.mean());
        res.iterations_run = it + 1;

        // Refit to the elites: empirical mean, population variance.
        const Vec mu_new = elite_seqs.colwise().mean();
        Vec var_new(w);
        for (int t = 0; t < w; ++t) {
            double acc2 = 0.0;
            for (int k = 0; k < cfg.elites; ++k) {
                const double d = elite_seqs(k, t) - mu_new(t);
                acc2 += d * d;
            }
            var_new(t) = acc2 / cfg.elites;
        }

        // Convergence compares the raw refit sigmas against the sigmas we
        // actually sampled with, before any floor, so a degenerate prior
        // converges immediately and returns its mean untouched.
        const double sigma_shift =
            (var_new.array().sqrt() - sigma.array()).abs().maxCoeff();
        dist.mean = mu_new;
        dist.var = var_new.cwiseMax(cfg.var_floor);
        if (sigma_shift <= cfg.epsilon) break;
    }
    res.best = dist.mean;
    res.posterior = dist;
    return res;
}

CemResult cem_plan(const Ensemble& ens, const RewardFn& reward, const Obs& s0,
                   const PlannerConfig& cfg, const CemDistribution& prior, Rng& rng) {
    TsEvaluator ev(ens, reward, s0, cfg.particles, cfg.per_step_assignment);
    return cem_optimize(ev, cfg, prior, rng);
}

double MpcPlanner::act(const Ensemble& ens, const RewardFn& reward, const Obs& s_t,
                       Rng& rng) {
    if (fresh_) prior_ = initial_distribution(cfg_);
    const CemResult r = cem_plan(ens, reward, s_t, cfg_, prior_, rng);
    const double action = std::clamp(r.best(0), cfg_.action_lo, cfg_.action_hi);

    // Warm start the next call: shift the solved mean one step, pad with the
    // box midpoint, and reopen the search variance to its initial width.
    Vec m(cfg_.horizon);
    if (cfg_.horizon > 1) m.head(cfg_.horizon - 1) = r.posterior.mean.tail(cfg_.horizon - 1);
    m(cfg_.horizon - 1) = cfg_.midpoint();
    prior_.mean = m;
    prior_.var = Vec::Constant(cfg_.horizon, cfg_.sigma0() * cfg_.sigma0());
    fresh_ = false;
    return action;
}

}  // namespace marlab
