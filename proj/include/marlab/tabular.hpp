#pragma once

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "marlab/rng.hpp"

namespace marlab {

struct NotCommunicating : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct PreconditionViolated : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Finite MDP with a row-stochastic kernel and known mean rewards in [0,1].
struct TabularMdp {
    int S = 0;
    int A = 0;
    std::vector<double> P;  // [(s*A + a)*S + s2]
    std::vector<double> r;  // [s*A + a]

    int pidx(int s, int a, int s2) const { return (s * A + a) * S + s2; }
    int ridx(int s, int a) const { return s * A + a; }
    double p(int s, int a, int s2) const { return P[pidx(s, a, s2)]; }
    double reward(int s, int a) const { return r[ridx(s, a)]; }

    /// Rows sum to 1 within 1e-12; rewards within [0,1].
    void validate() const;
};

/// Hard-exploration chain: action 0 walks left deterministically (small
/// reward at the left bank), action 1 swims right against the current
/// (probabilistic, big reward at the right bank).
TabularMdp river_swim(int states);

int sample_next(const TabularMdp& mdp, int s, int a, Rng& rng);

/// Max over ordered state pairs of the minimal expected hitting time
/// (hitting-time value iteration to `tol`). Throws NotCommunicating when the
/// iteration cap is reached without convergence.
double diameter(const TabularMdp& mdp, double tol = 1e-9, int max_iter = 200000);

/// Optimal long-run average reward via relative value iteration on the
/// aperiodicity-transformed kernel, run until the Bellman-increment span
/// falls below `tol`.
double optimal_average_reward(const TabularMdp& mdp, double tol = 1e-9);

/// Optimal expected T-step return from each start state (finite-horizon DP).
std::vector<double> finite_horizon_value(const TabularMdp& mdp, int T);

/// L1 confidence radius sqrt(14 S log(2 A t / delta) / N+).
double confidence_radius(std::int64_t n_plus, int S, int A, std::int64_t t,
                         double delta);

/// Maximize q . u over distributions with ||q - p||_1 <= radius, by the
/// sorted-redistribution step: boost the best-value state, then bleed mass
/// from the worst-value states until the row is stochastic again.
std::vector<double> l1_ball_argmax(const std::vector<double>& p,
                                   const std::vector<double>& u, double radius);

struct EviResult {
    std::vector<int> policy;  // greedy optimistic action per state
    double rho = 0.0;         // optimistic average reward estimate
    int iterations = 0;
};

/// Extended value iteration over the plausible kernels within the given
/// per-(s,a) L1 radii, stopping once the span of the value increment drops
/// below stop_span (or at the iteration cap).
EviResult evi_with_radius(const TabularMdp& empirical, const std::vector<double>& radius,
                          double stop_span, int max_iter = 500000);

/// Radii from the confidence formula at time t_k; stop span 1/sqrt(t_k).
EviResult evi(const TabularMdp& empirical, const std::vector<std::int64_t>& n_plus,
              std::int64_t t_k, double delta);

/// Build the empirical MDP from per-(s,a,s') visit counts; unvisited rows
/// fall back to the uniform kernel (their radius is vacuous anyway).
TabularMdp empirical_mdp(int S, int A, const std::vector<std::int64_t>& counts,
                         const std::vector<double>& rewards);

/// (sum_k x_k / sqrt(X_{k-1}), (sqrt(2)+1) sqrt(X_n)) with
/// X_k = max(1, x_1 + ... + x_k). Throws PreconditionViolated unless
/// 0 <= x_k <= X_{k-1} for every k; the returned pair always satisfies
/// lhs <= rhs.
std::pair<double, double> sequence_ratio_bound(const std::vector<double>& xs);

}  // namespace marlab
