#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "marlab/ensemble.hpp"
#include "marlab/env.hpp"
#include "marlab/planner.hpp"
#include "marlab/quantizer.hpp"

namespace marlab {

/// Any problem with user-supplied configuration: unreadable file, malformed
/// line, unknown key, unparsable value, or a failed validation rule. The CLI
/// maps this to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Flat `key = value` text with dotted section names. '#' starts a comment,
/// blank lines are skipped, keys must be unique. Returned in key order.
using KvMap = std::map<std::string, std::string>;
KvMap parse_kv_text(const std::string& text);

std::string read_text_file(const std::string& path);

/// Typed accessor over a parsed KvMap. Every get consumes its key; finish()
/// rejects leftovers so misspelled keys can never silently do nothing.
class KvReader {
public:
    explicit KvReader(KvMap kv) : kv_(std::move(kv)) {}

    bool has(const std::string& key) const { return kv_.count(key) != 0; }
    int get_int(const std::string& key, int fallback);
    std::int64_t get_i64(const std::string& key, std::int64_t fallback);
    double get_double(const std::string& key, double fallback);
    bool get_bool(const std::string& key, bool fallback);
    std::string get_string(const std::string& key, std::string fallback);
    std::vector<std::uint64_t> get_u64_list(const std::string& key,
                                            std::vector<std::uint64_t> fallback);
    std::vector<double> get_double_list(const std::string& key,
                                        std::vector<double> fallback);
    void finish() const;  // throws ConfigError when unconsumed keys remain

private:
    std::string take(const std::string& key);
    KvMap kv_;
};

std::string format_u64_list(const std::vector<std::uint64_t>& xs);
std::string format_double_list(const std::vector<double>& xs);

/// Full description of one experiment: I parallel single-vehicle copies of
/// the traffic environment, each agent with its own replay buffer, dynamics
/// ensemble, and receding-horizon planner, exchanging experience after every
/// episode. Defaults are the reference operating point of the system.
struct RunConfig {
    int agents = 8;     // I: parallel environment copies
    int episodes = 15;  // K
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    std::string out_dir = "runs/out";
    bool quantized = false;

    EnvConfig env;  // one copy; env.agents is forced to 1 per copy at run time
    ModelConfig model;
    std::size_t buffer_capacity = 2048;
    PlannerConfig planner;

    double d = 100.0;        // communication range, m
    double blockage = 0.0;   // probability a directed delivery is dropped
    int quantizer_bins = 64; // per-dimension bins for the quantized run mode

    RunConfig();

    void validate() const;        // throws ConfigError
    std::string to_text() const;  // sorted keys; parses back losslessly
    static RunConfig from_text(const std::string& text);
    static RunConfig from_file(const std::string& path);
};

/// Uniform tile coding over the 7-dim observation box implied by the
/// environment config (speeds, planar extent of the track, sensor range).
QuantizerSpec obs_quantizer(const EnvConfig& env, int bins);
QuantizerSpec action_quantizer(const EnvConfig& env, int bins);

/// Tabular-bandit laboratory experiment: I agents on an identical chain MDP,
/// optimistic planning from shared or private counts.
struct RegretConfig {
    int states = 4;   // chain length
    int agents = 4;   // I
    std::int64_t horizon = 50000;  // T steps per agent
    double delta = 0.1;
    std::vector<std::uint64_t> seeds{0};
    std::string sharing = "full";  // "full" (one clique) or "none"
    int stride = 1;                // CSV row thinning (>= 1)
    std::string out_dir = "runs/regret";

    void validate() const;
    std::string to_text() const;
    static RegretConfig from_text(const std::string& text);
    static RegretConfig from_file(const std::string& path);
};

/// Clique-cover report: agents evenly spaced on the track, one graph per
/// requested communication range, greedy and exact cover sizes side by side.
struct CoverConfig {
    int agents = 8;
    double track_length = 480.0;
    std::vector<double> d_values{0, 25, 50, 75, 100, 125, 150, 175, 200};
    std::string out_dir = "runs/cover";

    void validate() const;
    std::string to_text() const;
    static CoverConfig from_text(const std::string& text);
    static CoverConfig from_file(const std::string& path);
};

}  // namespace marlab
