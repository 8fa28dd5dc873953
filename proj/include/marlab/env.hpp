#pragma once

#include <array>
#include <stdexcept>
#include <vector>

#include "marlab/rng.hpp"
#include "marlab/track.hpp"

namespace marlab {

struct TooManyVehicles : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ActionOutOfRange : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

enum class VehicleKind { controlled, scripted };

/// One vehicle on the track. The sensed fields (v_a, v_e, l_a, l_e) describe
/// the nearest vehicle ahead/behind along the track, clipped to the sensor
/// range; (x, y) always equals the geometry map of the arclength s.
struct VehicleState {
    double v = 0.0;    // own speed, m/s
    double x = 0.0;    // planar position, m
    double y = 0.0;
    double v_a = 0.0;  // speed of vehicle ahead, m/s (sentinel v_max if none sensed)
    double v_e = 0.0;  // speed of vehicle behind
    double l_a = 0.0;  // along-track gap ahead, m (center to center, <= sensor range)
    double l_e = 0.0;  // along-track gap behind
    double s = 0.0;    // arclength, m
    VehicleKind kind = VehicleKind::controlled;
};

struct EnvConfig {
    int agents = 8;       // controlled vehicles
    int hv_min = 0;       // scripted human-driven vehicles, count sampled per
    int hv_max = 0;       //   episode uniformly from [hv_min, hv_max]
    double tau = 0.1;     // step length, s
    int horizon = 200;    // max episode length, steps
    double a_max = 4.0;   // accel/decel limit, m/s^2
    double v_max = 13.89; // speed cap, m/s
    double veh_len = 4.5; // vehicle length: collision when centers closer than this
    double sensor_range = 75.0;
    double hv_headway = 1.5;  // scripted follower time headway, s
    TrackGeometry track;
};

/// Result of one simultaneous step of all vehicles. Rewards and travel
/// distances are reported for the controlled vehicles only (the agents);
/// `hit` covers every vehicle so collision symmetry is checkable.
struct StepOutcome {
    std::vector<VehicleState> next;
    std::vector<double> reward;  // size = agents
    std::vector<double> dx;      // size = agents, v_next * tau
    std::vector<char> hit;       // size = all vehicles
    bool collision = false;
    bool done = false;  // set by Env::step (collision or horizon)
};

constexpr int kStateDim = 7;
using Obs = std::array<double, kStateDim>;
// Observation component order. The planner's reward and the learned dynamics
// both use this layout.
enum ObsIndex { kObsV = 0, kObsX, kObsY, kObsVa, kObsVe, kObsLa, kObsLe };

/// Place I controlled + sampled-count scripted vehicles at evenly spaced
/// arclengths with bounded jitter (all gaps stay > veh_len), speeds zero.
/// Throws TooManyVehicles when they cannot fit.
std::vector<VehicleState> reset_vehicles(const EnvConfig& cfg, Rng& rng);

/// Recompute x/y from s and the sensed neighbor fields for every vehicle.
void refresh_neighbors(const EnvConfig& cfg, std::vector<VehicleState>& vs);

/// Advance every vehicle one step. `actions` are target velocities for the
/// controlled vehicles, in [0, v_max]; scripted vehicles follow the built-in
/// proportional follower. Dynamics are deterministic.
StepOutcome step_vehicles(const EnvConfig& cfg, const std::vector<VehicleState>& vs,
                          const std::vector<double>& actions);

/// Per-agent observation: (v, x, y, v_a, v_e, l_a, l_e).
Obs observe(const std::vector<VehicleState>& vs, int i);

/// Stateful wrapper tracking the step counter and the terminal flag.
class Env {
public:
    explicit Env(EnvConfig cfg) : cfg_(std::move(cfg)) {}

    const std::vector<VehicleState>& reset(Rng& rng) {
        states_ = reset_vehicles(cfg_, rng);
        t_ = 0;
        done_ = false;
        return states_;
    }

    /// Start an episode from caller-supplied states (sensors are refreshed).
    const std::vector<VehicleState>& reset_to(std::vector<VehicleState> vs) {
        states_ = std::move(vs);
        refresh_neighbors(cfg_, states_);
        t_ = 0;
        done_ = false;
        return states_;
    }

    StepOutcome step(const std::vector<double>& actions) {
        StepOutcome out = step_vehicles(cfg_, states_, actions);
        states_ = out.next;
        ++t_;
        done_ = out.collision || t_ >= cfg_.horizon;
        out.done = done_;
        return out;
    }

    const EnvConfig& config() const { return cfg_; }
    const std::vector<VehicleState>& states() const { return states_; }
    int t() const { return t_; }
    bool done() const { return done_; }

private:
    EnvConfig cfg_;
    std::vector<VehicleState> states_;
    int t_ = 0;
    bool done_ = false;
};

}  // namespace marlab
