#include "marlab/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace marlab {

void TabularMdp::validate() const {
    if (S < 1 || A < 1) throw std::invalid_argument("mdp: S and A must be positive");
    if (static_cast<int>(P.size()) != S * A * S || static_cast<int>(r.size()) != S * A)
        throw std::invalid_argument("mdp: kernel/reward size mismatch");
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            double sum = 0.0;
            for (int s2 = 0; s2 < S; ++s2) {
                const double q = p(s, a, s2);
                if (q < 0.0) throw std::invalid_argument("mdp: negative probability");
                sum += q;
            }
            if (std::abs(sum - 1.0) > 1e-12)
                throw std::invalid_argument("mdp: row does not sum to 1");
            if (reward(s, a) < 0.0 || reward(s, a) > 1.0)
                throw std::invalid_argument("mdp: reward outside [0,1]");
        }
}

TabularMdp river_swim(int states) {
    if (states < 2) throw std::invalid_argument("river_swim: need at least 2 states");
    TabularMdp m;
    m.S = states;
    m.A = 2;
    m.P.assign(states * 2 * states, 0.0);
    m.r.assign(states * 2, 0.0);
    for (int s = 0; s < states; ++s) {
        // Action 0: walk left, deterministic.
        m.P[m.pidx(s, 0, std::max(s - 1, 0))] = 1.0;
        // Action 1: swim right against the current.
        if (s == 0) {
            m.P[m.pidx(s, 1, 0)] = 0.4;
            m.P[m.pidx(s, 1, 1)] = 0.6;
        } else if (s == states - 1) {
            m.P[m.pidx(s, 1, s)] = 0.6;
            m.P[m.pidx(s, 1, s - 1)] = 0.4;
        } else {
            m.P[m.pidx(s, 1, s - 1)] = 0.05;
            m.P[m.pidx(s, 1, s)] = 0.6;
            m.P[m.pidx(s, 1, s + 1)] = 0.35;
        }
    }
    m.r[m.ridx(0, 0)] = 0.005;
    m.r[m.ridx(states - 1, 1)] = 1.0;
    m.validate();
    return m;
}

int sample_next(const TabularMdp& mdp, int s, int a, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (int s2 = 0; s2 < mdp.S; ++s2) {
        acc += mdp.p(s, a, s2);
        if (u < acc) return s2;
    }
    return mdp.S - 1;  // guards against accumulated rounding at u ~ 1
}

double diameter(const TabularMdp& mdp, double tol, int max_iter) {
    mdp.validate();
    const int S = mdp.S, A = mdp.A;
    double worst = 0.0;
    std::vector<double> h(S), nh(S);
    for (int target = 0; target < S; ++target) {
        std::fill(h.begin(), h.end(), 0.0);
        bool converged = false;
        for (int it = 0; it < max_iter && !converged; ++it) {
            double resid = 0.0;
            for (int s = 0; s < S; ++s) {
                if (s == target) {
                    nh[s] = 0.0;
                    continue;
                }
                double best = std::numeric_limits<double>::infinity();
                for (int a = 0; a < A; ++a) {
                    double e = 1.0;
                    for (int s2 = 0; s2 < S; ++s2) e += mdp.p(s, a, s2) * h[s2];
                    best = std::min(best, e);
                }
                nh[s] = best;
                resid = std::max(resid, std::abs(nh[s] - h[s]));
            }
            h.swap(nh);
            converged = resid < tol;
        }
        if (!converged)
            throw NotCommunicating("diameter: hitting-time iteration did not converge");
        worst = std::max(worst, *std::max_element(h.begin(), h.end()));
    }
    return worst;
}

double optimal_average_reward(const TabularMdp& mdp, double tol) {
    mdp.validate();
    const int S = mdp.S, A = mdp.A;
    // Half-self-loop transform keeps every policy's average reward while
    // making all chains aperiodic, so the value increments settle.
    const double alpha = 0.5;
    std::vector<double> u(S, 0.0), nu(S);
    const int max_iter = 2000000;
    for (int it = 0; it < max_iter; ++it) {
        for (int s = 0; s < S; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < A; ++a) {
                double v = mdp.reward(s, a) + alpha * u[s];
                for (int s2 = 0; s2 < S; ++s2)
                    v += (1.0 - alpha) * mdp.p(s, a, s2) * u[s2];
                best = std::max(best, v);
            }
            nu[s] = best;
        }
        double dmin = std::numeric_limits<double>::infinity(), dmax = -dmin;
        for (int s = 0; s < S; ++s) {
            const double d = nu[s] - u[s];
            dmin = std::min(dmin, d);
            dmax = std::max(dmax, d);
        }
        const double base = *std::min_element(nu.begin(), nu.end());
        for (int s = 0; s < S; ++s) u[s] = nu[s] - base;  // keep values bounded
        if (dmax - dmin < tol) return 0.5 * (dmax + dmin);
    }
    throw NotCommunicating("optimal_average_reward: value iteration did not settle");
}

std::vector<double> finite_horizon_value(const TabularMdp& mdp, int T) {
    mdp.validate();
    if (T < 0) throw std::invalid_argument("finite_horizon_value: negative horizon");
    std::vector<double> v(mdp.S, 0.0), nv(mdp.S);
    for (int step = 0; step < T; ++step) {
        for (int s = 0; s < mdp.S; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < mdp.A; ++a) {
                double q = mdp.reward(s, a);
                for (int s2 = 0; s2 < mdp.S; ++s2) q += mdp.p(s, a, s2) * v[s2];
                best = std::max(best, q);
            }
            nv[s] = best;
        }
        v.swap(nv);
    }
    return v;
}

double confidence_radius(std::int64_t n_plus, int S, int A, std::int64_t t,
                         double delta) {
    if (n_plus < 1 || t < 1 || S < 1 || A < 1 || delta <= 0.0 || delta >= 1.0)
        throw std::domain_error("confidence_radius: arguments outside the domain");
    const double arg = 2.0 * static_cast<double>(A) * static_cast<double>(t) / delta;
    if (arg <= 1.0) throw std::domain_error("confidence_radius: nonpositive log");
    return std::sqrt(14.0 * static_cast<double>(S) * std::log(arg) /
                     static_cast<double>(n_plus));
}

std::vector<double> l1_ball_argmax(const std::vector<double>& p,
                                   const std::vector<double>& u, double radius) {
    const int n = static_cast<int>(p.size());
    if (static_cast<int>(u.size()) != n)
        throw std::invalid_argument("l1_ball_argmax: size mismatch");
    if (radius < 0.0) throw std::invalid_argument("l1_ball_argmax: negative radius");
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return u[a] > u[b]; });  // best value first

    std::vector<double> q = p;
    const int best = order.front();
    q[best] = std::min(1.0, p[best] + 0.5 * radius);
    double excess = std::accumulate(q.begin(), q.end(), 0.0) - 1.0;
    for (int k = n - 1; k > 0 && excess > 0.0; --k) {
        const int s = order[k];
        const double cut = std::min(q[s], excess);
        q[s] -= cut;
        excess -= cut;
    }
    return q;
}

EviResult evi_with_radius(const TabularMdp& empirical, const std::vector<double>& radius,
                          double stop_span, int max_iter) {
    empirical.validate();
    const int S = empirical.S, A = empirical.A;
    if (static_cast<int>(radius.size()) != S * A)
        throw std::invalid_argument("evi: radius per state-action pair required");

    EviResult res;
    res.policy.assign(S, 0);
    std::vector<double> u(S, 0.0), nu(S), row(S), prow(S);
    for (int it = 0; it < max_iter; ++it) {
        for (int s = 0; s < S; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            int best_a = 0;
            for (int a = 0; a < A; ++a) {
                for (int s2 = 0; s2 < S; ++s2) prow[s2] = empirical.p(s, a, s2);
                row = l1_ball_argmax(prow, u, radius[empirical.ridx(s, a)]);
                double v = empirical.reward(s, a);
                for (int s2 = 0; s2 < S; ++s2) v += row[s2] * u[s2];
                if (v > best) {
                    best = v;
                    best_a = a;
                }
            }
            nu[s] = best;
            res.policy[s] = best_a;
        }
        double dmin = std::numeric_limits<double>::infinity(), dmax = -dmin;
        for (int s = 0; s < S; ++s) {
            const double d = nu[s] - u[s];
            dmin = std::min(dmin, d);
            dmax = std::max(dmax, d);
        }
        res.rho = 0.5 * (dmax + dmin);
        res.iterations = it + 1;
        const double base = *std::min_element(nu.begin(), nu.end());
        for (int s = 0; s < S; ++s) u[s] = nu[s] - base;
        if (dmax - dmin < stop_span) break;
    }
    return res;
}

EviResult evi(const TabularMdp& empirical, const std::vector<std::int64_t>& n_plus,
              std::int64_t t_k, double delta) {
    const int S = empirical.S, A = empirical.A;
    if (static_cast<int>(n_plus.size()) != S * A)
        throw std::invalid_argument("evi: one count per state-action pair required");
    const std::int64_t t = std::max<std::int64_t>(1, t_k);
    std::vector<double> radius(S * A);
    for (int i = 0; i < S * A; ++i)
        radius[i] = confidence_radius(std::max<std::int64_t>(1, n_plus[i]), S, A, t, delta);
    return evi_with_radius(empirical, radius, 1.0 / std::sqrt(static_cast<double>(t)));
}

TabularMdp empirical_mdp(int S, int A, const std::vector<std::int64_t>& counts,
                         const std::vector<double>& rewards) {
    if (static_cast<int>(counts.size()) != S * A * S)
        throw std::invalid_argument("empirical_mdp: count size mismatch");
    TabularMdp m;
    m.S = S;
    m.A = A;
    m.P.assign(S * A * S, 0.0);
    m.r = rewards;
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            std::int64_t total = 0;
            for (int s2 = 0; s2 < S; ++s2) total += counts[m.pidx(s, a, s2)];
            for (int s2 = 0; s2 < S; ++s2)
                m.P[m.pidx(s, a, s2)] =
                    total > 0 ? static_cast<double>(counts[m.pidx(s, a, s2)]) /
                                    static_cast<double>(total)
                              : 1.0 / static_cast<double>(S);
        }
    m.validate();
    return m;
}

std::pair<double, double> sequence_ratio_bound(const std::vector<double>& xs) {
    double lhs = 0.0;
    double running = 0.0;
    for (double x : xs) {
        const double cap = std::max(1.0, running);
        if (x < 0.0 || x > cap + 1e-12)
            throw PreconditionViolated("sequence_ratio_bound: x_k outside [0, X_{k-1}]");
        lhs += x / std::sqrt(cap);
        running += x;
    }
    const double rhs = (std::sqrt(2.0) + 1.0) * std::sqrt(std::max(1.0, running));
    return {lhs, rhs};
}

}  // namespace marlab
