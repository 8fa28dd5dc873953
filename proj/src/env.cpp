#include "marlab/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace marlab {

namespace {

double clampd(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

double wrap_gap(double from_s, double to_s, double L) {
    double g = std::fmod(to_s - from_s, L);
    if (g < 0.0) g += L;
    return g;
}

/// Pairwise planar conflict check used both at reset (placement rejection)
/// and per step (collision flagging).
bool mark_collisions(const EnvConfig& cfg, const std::vector<VehicleState>& vs,
                     std::vector<char>* hit) {
    bool any = false;
    const int n = static_cast<int>(vs.size());
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double dist =
                planar_distance({vs[i].x, vs[i].y}, {vs[j].x, vs[j].y});
            if (dist < cfg.veh_len) {
                any = true;
                if (hit) {
                    (*hit)[i] = 1;
                    (*hit)[j] = 1;
                }
            }
        }
    }
    return any;
}

}  // namespace

void refresh_neighbors(const EnvConfig& cfg, std::vector<VehicleState>& vs) {
    const double L = cfg.track.total_length;
    const int n = static_cast<int>(vs.size());
    for (auto& v : vs) {
        const Point2 p = arclength_to_xy(cfg.track, v.s);
        v.x = p.x;
        v.y = p.y;
    }
    for (int i = 0; i < n; ++i) {
        double best_a = std::numeric_limits<double>::infinity();
        double best_e = std::numeric_limits<double>::infinity();
        int idx_a = -1, idx_e = -1;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const double ga = wrap_gap(vs[i].s, vs[j].s, L);
            const double ge = L - ga;  // gap looking backwards to the same vehicle
            if (ga < best_a) best_a = ga, idx_a = j;
            if (ge < best_e) best_e = ge, idx_e = j;
        }
        if (idx_a >= 0 && best_a <= cfg.sensor_range) {
            vs[i].l_a = best_a;
            vs[i].v_a = vs[idx_a].v;
        } else {
            vs[i].l_a = cfg.sensor_range;  // free road ahead
            vs[i].v_a = cfg.v_max;
        }
        if (idx_e >= 0 && best_e <= cfg.sensor_range) {
            vs[i].l_e = best_e;
            vs[i].v_e = vs[idx_e].v;
        } else {
            vs[i].l_e = cfg.sensor_range;
            vs[i].v_e = cfg.v_max;
        }
    }
}

std::vector<VehicleState> reset_vehicles(const EnvConfig& cfg, Rng& rng) {
    const double L = cfg.track.total_length;
    const int n_hv = cfg.hv_min + rng.uniform_int(cfg.hv_max - cfg.hv_min + 1);
    const int n = cfg.agents + n_hv;
    if (static_cast<double>(n) * (cfg.veh_len + 1.0) > L)
        throw TooManyVehicles("cannot fit " + std::to_string(n) + " vehicles on " +
                              std::to_string(L) + " m of track");

    // Agents take evenly spread slots; scripted vehicles fill the rest, so
    // the two populations interleave around the track.
    std::vector<VehicleKind> kind_of_slot(n, VehicleKind::scripted);
    for (int i = 0; i < cfg.agents; ++i)
        kind_of_slot[static_cast<int>(static_cast<long>(i) * n / cfg.agents)] =
            VehicleKind::controlled;

    const double base = L / n;
    const double jit = 0.25 * std::max(0.0, base - cfg.veh_len);

    // Along-track gaps stay > veh_len by the jitter bound, but the crossing
    // maps two distant arclengths to nearby planar points, so a placement can
    // still start in planar conflict; resample the jitter until it does not.
    for (int attempt = 0; attempt < 200; ++attempt) {
        std::vector<VehicleState> agents_first(n);
        int next_agent = 0, next_hv = cfg.agents;
        for (int slot = 0; slot < n; ++slot) {
            VehicleState v;
            v.s = std::fmod(slot * base + rng.uniform(-jit, jit) + L, L);
            v.kind = kind_of_slot[slot];
            const int at = (v.kind == VehicleKind::controlled) ? next_agent++ : next_hv++;
            agents_first[at] = v;
        }
        refresh_neighbors(cfg, agents_first);
        if (!mark_collisions(cfg, agents_first, nullptr)) return agents_first;
    }
    throw TooManyVehicles("could not place vehicles without planar conflict");
}

StepOutcome step_vehicles(const EnvConfig& cfg, const std::vector<VehicleState>& vs,
                          const std::vector<double>& actions) {
    const double L = cfg.track.total_length;
    const int n = static_cast<int>(vs.size());
    if (static_cast<int>(actions.size()) != cfg.agents)
        throw ActionOutOfRange("expected " + std::to_string(cfg.agents) + " actions, got " +
                               std::to_string(actions.size()));
    for (double a : actions)
        if (!(a >= 0.0 && a <= cfg.v_max))
            throw ActionOutOfRange("target velocity " + std::to_string(a) +
                                   " outside [0, " + std::to_string(cfg.v_max) + "]");

    StepOutcome out;
    out.next = vs;
    int agent = 0;
    for (int i = 0; i < n; ++i) {
        double target;
        if (vs[i].kind == VehicleKind::controlled) {
            target = actions[agent++];
        } else {
            // Proportional follower: close half the bumper gap per headway time.
            target = clampd(0.5 * (vs[i].l_a - cfg.veh_len) / cfg.hv_headway, 0.0,
                            cfg.v_max);
        }
        const double dv = clampd(target - vs[i].v, -cfg.a_max * cfg.tau,
                                 cfg.a_max * cfg.tau);
        out.next[i].v = clampd(vs[i].v + dv, 0.0, cfg.v_max);
        out.next[i].s = std::fmod(vs[i].s + out.next[i].v * cfg.tau, L);
    }
    refresh_neighbors(cfg, out.next);

    out.hit.assign(n, 0);
    out.collision = mark_collisions(cfg, out.next, &out.hit);

    out.reward.resize(cfg.agents);
    out.dx.resize(cfg.agents);
    agent = 0;
    for (int i = 0; i < n; ++i) {
        if (vs[i].kind != VehicleKind::controlled) continue;
        const VehicleState& nx = out.next[i];
        out.reward[agent] = nx.v + nx.v_a + nx.v_e + (out.hit[i] ? -10.0 : 0.0);
        out.dx[agent] = nx.v * cfg.tau;
        ++agent;
    }
    return out;
}

Obs observe(const std::vector<VehicleState>& vs, int i) {
    const VehicleState& v = vs.at(i);
    return {v.v, v.x, v.y, v.v_a, v.v_e, v.l_a, v.l_e};
}

}  // namespace marlab
