#include "marlab/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "marlab/csv.hpp"

namespace marlab {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = s.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

std::int64_t parse_i64(const std::string& key, const std::string& v) {
    std::int64_t x = 0;
    const char* b = v.data();
    const char* e = v.data() + v.size();
    auto [p, ec] = std::from_chars(b, e, x);
    if (ec != std::errc() || p != e)
        throw ConfigError("config key '" + key + "': not an integer: '" + v + "'");
    return x;
}

double parse_dbl(const std::string& key, const std::string& v) {
    double x = 0.0;
    const char* b = v.data();
    const char* e = v.data() + v.size();
    auto [p, ec] = std::from_chars(b, e, x);
    if (ec != std::errc() || p != e)
        throw ConfigError("config key '" + key + "': not a number: '" + v + "'");
    return x;
}

}  // namespace

KvMap parse_kv_text(const std::string& text) {
    KvMap kv;
    std::istringstream in(text);
    std::string line;
    int ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(ln) +
                              ": expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(ln) + ": empty key");
        if (kv.count(key))
            throw ConfigError("config line " + std::to_string(ln) + ": duplicate key '" +
                              key + "'");
        kv[key] = val;
    }
    return kv;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string KvReader::take(const std::string& key) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return {};
    std::string v = it->second;
    kv_.erase(it);
    return v;
}

int KvReader::get_int(const std::string& key, int fallback) {
    if (!has(key)) return fallback;
    const std::int64_t x = parse_i64(key, take(key));
    if (x < INT32_MIN || x > INT32_MAX)
        throw ConfigError("config key '" + key + "': out of int range");
    return static_cast<int>(x);
}

std::int64_t KvReader::get_i64(const std::string& key, std::int64_t fallback) {
    if (!has(key)) return fallback;
    return parse_i64(key, take(key));
}

double KvReader::get_double(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    return parse_dbl(key, take(key));
}

bool KvReader::get_bool(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const std::string v = take(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

std::string KvReader::get_string(const std::string& key, std::string fallback) {
    if (!has(key)) return fallback;
    return take(key);
}

std::vector<std::uint64_t> KvReader::get_u64_list(const std::string& key,
                                                  std::vector<std::uint64_t> fallback) {
    if (!has(key)) return fallback;
    const std::string v = take(key);
    std::vector<std::uint64_t> out;
    for (const std::string& part : split(v, ',')) {
        const std::string p = trim(part);
        if (p.empty())
            throw ConfigError("config key '" + key + "': empty list element in '" + v + "'");
        const std::int64_t x = parse_i64(key, p);
        if (x < 0) throw ConfigError("config key '" + key + "': negative seed " + p);
        out.push_back(static_cast<std::uint64_t>(x));
    }
    return out;
}

std::vector<double> KvReader::get_double_list(const std::string& key,
                                              std::vector<double> fallback) {
    if (!has(key)) return fallback;
    const std::string v = take(key);
    std::vector<double> out;
    for (const std::string& part : split(v, ',')) {
        const std::string p = trim(part);
        if (p.empty())
            throw ConfigError("config key '" + key + "': empty list element in '" + v + "'");
        out.push_back(parse_dbl(key, p));
    }
    return out;
}

void KvReader::finish() const {
    if (kv_.empty()) return;
    std::string msg = "unknown config key(s):";
    for (const auto& [k, v] : kv_) msg += " '" + k + "'";
    throw ConfigError(msg);
}

std::string format_u64_list(const std::vector<std::uint64_t>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(xs[i]);
    }
    return out;
}

std::string format_double_list(const std::vector<double>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ',';
        out += fmt_double(xs[i]);
    }
    return out;
}

RunConfig::RunConfig() {
    env.agents = 1;  // one controlled vehicle per copy
    env.hv_min = 2;  // scripted traffic per copy, count redrawn every reset
    env.hv_max = 6;
}

void RunConfig::validate() const {
    if (agents < 1) throw ConfigError("run.agents must be >= 1");
    if (episodes < 1) throw ConfigError("run.episodes must be >= 1");
    if (seeds.empty()) throw ConfigError("run.seeds must be non-empty");
    if (env.horizon < 1) throw ConfigError("env.horizon must be >= 1");
    if (!(env.tau > 0)) throw ConfigError("env.tau must be > 0");
    if (!(env.v_max > 0)) throw ConfigError("env.v_max must be > 0");
    if (!(env.a_max > 0)) throw ConfigError("env.a_max must be > 0");
    if (!(env.veh_len > 0)) throw ConfigError("env.veh_len must be > 0");
    if (!(env.sensor_range > 0)) throw ConfigError("env.sensor_range must be > 0");
    if (!(env.track.total_length > 0)) throw ConfigError("env.track_length must be > 0");
    if (env.hv_min < 0 || env.hv_max < env.hv_min)
        throw ConfigError("env.hv_min/env.hv_max must satisfy 0 <= min <= max");
    if (!(env.hv_headway > 0)) throw ConfigError("env.hv_headway must be > 0");
    if (model.members < 1) throw ConfigError("model.members must be >= 1");
    if (model.hidden_width < 1) throw ConfigError("model.hidden_width must be >= 1");
    if (model.hidden_layers < 1) throw ConfigError("model.hidden_layers must be >= 1");
    if (model.epochs < 1) throw ConfigError("model.epochs must be >= 1");
    if (model.batch_size < 1) throw ConfigError("model.batch_size must be >= 1");
    if (!(model.lr > 0)) throw ConfigError("model.lr must be > 0");
    if (buffer_capacity < 1) throw ConfigError("model.buffer must be >= 1");
    try {
        PlannerConfig p = planner;
        p.action_lo = 0.0;
        p.action_hi = env.v_max;
        p.validate();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    if (d < 0) throw ConfigError("comms.d must be >= 0");
    if (blockage < 0 || blockage > 1) throw ConfigError("comms.blockage must be in [0,1]");
    if (quantizer_bins < 1) throw ConfigError("quantizer.bins must be >= 1");
}

std::string RunConfig::to_text() const {
    KvMap kv;
    kv["comms.blockage"] = fmt_double(blockage);
    kv["comms.d"] = fmt_double(d);
    kv["env.a_max"] = fmt_double(env.a_max);
    kv["env.horizon"] = std::to_string(env.horizon);
    kv["env.hv_headway"] = fmt_double(env.hv_headway);
    kv["env.hv_max"] = std::to_string(env.hv_max);
    kv["env.hv_min"] = std::to_string(env.hv_min);
    kv["env.sensor_range"] = fmt_double(env.sensor_range);
    kv["env.tau"] = fmt_double(env.tau);
    kv["env.track_length"] = fmt_double(env.track.total_length);
    kv["env.v_max"] = fmt_double(env.v_max);
    kv["env.veh_len"] = fmt_double(env.veh_len);
    kv["model.batch_size"] = std::to_string(model.batch_size);
    kv["model.buffer"] = std::to_string(buffer_capacity);
    kv["model.epochs"] = std::to_string(model.epochs);
    kv["model.hidden_layers"] = std::to_string(model.hidden_layers);
    kv["model.hidden_width"] = std::to_string(model.hidden_width);
    kv["model.lr"] = fmt_double(model.lr);
    kv["model.members"] = std::to_string(model.members);
    kv["planner.candidates"] = std::to_string(planner.candidates);
    kv["planner.elites"] = std::to_string(planner.elites);
    kv["planner.epsilon"] = fmt_double(planner.epsilon);
    kv["planner.horizon"] = std::to_string(planner.horizon);
    kv["planner.iterations"] = std::to_string(planner.iterations);
    kv["planner.particles"] = std::to_string(planner.particles);
    kv["planner.per_step_assignment"] = planner.per_step_assignment ? "true" : "false";
    kv["quantizer.bins"] = std::to_string(quantizer_bins);
    kv["run.agents"] = std::to_string(agents);
    kv["run.episodes"] = std::to_string(episodes);
    kv["run.out"] = out_dir;
    kv["run.quantized"] = quantized ? "true" : "false";
    kv["run.seeds"] = format_u64_list(seeds);
    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    return out;
}

RunConfig RunConfig::from_text(const std::string& text) {
    KvReader r(parse_kv_text(text));
    RunConfig c;
    c.blockage = r.get_double("comms.blockage", c.blockage);
    c.d = r.get_double("comms.d", c.d);
    c.env.a_max = r.get_double("env.a_max", c.env.a_max);
    c.env.horizon = r.get_int("env.horizon", c.env.horizon);
    c.env.hv_headway = r.get_double("env.hv_headway", c.env.hv_headway);
    c.env.hv_max = r.get_int("env.hv_max", c.env.hv_max);
    c.env.hv_min = r.get_int("env.hv_min", c.env.hv_min);
    c.env.sensor_range = r.get_double("env.sensor_range", c.env.sensor_range);
    c.env.tau = r.get_double("env.tau", c.env.tau);
    c.env.track.total_length = r.get_double("env.track_length", c.env.track.total_length);
    c.env.v_max = r.get_double("env.v_max", c.env.v_max);
    c.env.veh_len = r.get_double("env.veh_len", c.env.veh_len);
    c.model.batch_size = r.get_int("model.batch_size", c.model.batch_size);
    {
        const std::int64_t cap =
            r.get_i64("model.buffer", static_cast<std::int64_t>(c.buffer_capacity));
        if (cap < 1) throw ConfigError("model.buffer must be >= 1");
        c.buffer_capacity = static_cast<std::size_t>(cap);
    }
    c.model.epochs = r.get_int("model.epochs", c.model.epochs);
    c.model.hidden_layers = r.get_int("model.hidden_layers", c.model.hidden_layers);
    c.model.hidden_width = r.get_int("model.hidden_width", c.model.hidden_width);
    c.model.lr = r.get_double("model.lr", c.model.lr);
    c.model.members = r.get_int("model.members", c.model.members);
    c.planner.candidates = r.get_int("planner.candidates", c.planner.candidates);
    c.planner.elites = r.get_int("planner.elites", c.planner.elites);
    c.planner.epsilon = r.get_double("planner.epsilon", c.planner.epsilon);
    c.planner.horizon = r.get_int("planner.horizon", c.planner.horizon);
    c.planner.iterations = r.get_int("planner.iterations", c.planner.iterations);
    c.planner.particles = r.get_int("planner.particles", c.planner.particles);
    c.planner.per_step_assignment =
        r.get_bool("planner.per_step_assignment", c.planner.per_step_assignment);
    c.quantizer_bins = r.get_int("quantizer.bins", c.quantizer_bins);
    c.agents = r.get_int("run.agents", c.agents);
    c.episodes = r.get_int("run.episodes", c.episodes);
    c.out_dir = r.get_string("run.out", c.out_dir);
    c.quantized = r.get_bool("run.quantized", c.quantized);
    c.seeds = r.get_u64_list("run.seeds", c.seeds);
    r.finish();
    c.validate();
    return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
    return from_text(read_text_file(path));
}

QuantizerSpec obs_quantizer(const EnvConfig& env, int bins) {
    const double R = env.track.loop_radius();
    QuantizerSpec spec;
    spec.dims = {
        {0.0, env.v_max, bins},             // v
        {-2.0 * R, 2.0 * R, bins},          // x
        {-R, R, bins},                      // y
        {0.0, env.v_max, bins},             // v_a
        {0.0, env.v_max, bins},             // v_e
        {0.0, env.sensor_range, bins},      // l_a
        {0.0, env.sensor_range, bins},      // l_e
    };
    spec.validate();
    return spec;
}

QuantizerSpec action_quantizer(const EnvConfig& env, int bins) {
    QuantizerSpec spec;
    spec.dims = {{0.0, env.v_max, bins}};
    spec.validate();
    return spec;
}

void RegretConfig::validate() const {
    if (states < 2) throw ConfigError("regret.states must be >= 2");
    if (agents < 1) throw ConfigError("regret.agents must be >= 1");
    if (horizon < 1) throw ConfigError("regret.horizon must be >= 1");
    if (!(delta > 0 && delta < 1)) throw ConfigError("regret.delta must be in (0,1)");
    if (seeds.empty()) throw ConfigError("regret.seeds must be non-empty");
    if (sharing != "full" && sharing != "none")
        throw ConfigError("regret.sharing must be 'full' or 'none'");
    if (stride < 1) throw ConfigError("regret.stride must be >= 1");
}

std::string RegretConfig::to_text() const {
    KvMap kv;
    kv["regret.agents"] = std::to_string(agents);
    kv["regret.delta"] = fmt_double(delta);
    kv["regret.horizon"] = std::to_string(horizon);
    kv["regret.out"] = out_dir;
    kv["regret.seeds"] = format_u64_list(seeds);
    kv["regret.sharing"] = sharing;
    kv["regret.states"] = std::to_string(states);
    kv["regret.stride"] = std::to_string(stride);
    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    return out;
}

RegretConfig RegretConfig::from_text(const std::string& text) {
    KvReader r(parse_kv_text(text));
    RegretConfig c;
    c.agents = r.get_int("regret.agents", c.agents);
    c.delta = r.get_double("regret.delta", c.delta);
    c.horizon = r.get_i64("regret.horizon", c.horizon);
    c.out_dir = r.get_string("regret.out", c.out_dir);
    c.seeds = r.get_u64_list("regret.seeds", c.seeds);
    c.sharing = r.get_string("regret.sharing", c.sharing);
    c.states = r.get_int("regret.states", c.states);
    c.stride = r.get_int("regret.stride", c.stride);
    r.finish();
    c.validate();
    return c;
}

RegretConfig RegretConfig::from_file(const std::string& path) {
    return from_text(read_text_file(path));
}

void CoverConfig::validate() const {
    if (agents < 1) throw ConfigError("cover.agents must be >= 1");
    if (!(track_length > 0)) throw ConfigError("cover.track_length must be > 0");
    if (d_values.empty()) throw ConfigError("cover.d_values must be non-empty");
    for (double d : d_values)
        if (d < 0) throw ConfigError("cover.d_values must all be >= 0");
}

std::string CoverConfig::to_text() const {
    KvMap kv;
    kv["cover.agents"] = std::to_string(agents);
    kv["cover.d_values"] = format_double_list(d_values);
    kv["cover.out"] = out_dir;
    kv["cover.track_length"] = fmt_double(track_length);
    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    return out;
}

CoverConfig CoverConfig::from_text(const std::string& text) {
    KvReader r(parse_kv_text(text));
    CoverConfig c;
    c.agents = r.get_int("cover.agents", c.agents);
    c.d_values = r.get_double_list("cover.d_values", c.d_values);
    c.out_dir = r.get_string("cover.out", c.out_dir);
    c.track_length = r.get_double("cover.track_length", c.track_length);
    r.finish();
    c.validate();
    return c;
}

CoverConfig CoverConfig::from_file(const std::string& path) {
    return from_text(read_text_file(path));
}

}  // namespace marlab
