#include "marlab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "marlab/cliques.hpp"
#include "marlab/csv.hpp"
#include "marlab/parallel.hpp"
#include "marlab/planner.hpp"
#include "marlab/tabular.hpp"
#include "marlab/track.hpp"
#include "marlab/ucrl.hpp"

namespace fs = std::filesystem;

namespace marlab {

namespace {

std::string hex_u64(std::uint64_t v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_manifest(const fs::path& dir, const std::string& config_text) {
    std::ofstream out(dir / "manifest.txt", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write manifest under " + dir.string());
    out << "tool = " << kToolVersion << "\n"
        << "config_fnv1a = " << hex_u64(fnv1a64(config_text)) << "\n\n"
        << config_text;
}

Obs snap_obs(const QuantizerSpec& spec, const Obs& o) {
    Obs q = o;
    for (int d = 0; d < kStateDim; ++d) q[d] = snap(spec.dims[d], o[d]);
    return q;
}

/// Everything one agent owns for the duration of a run.
struct AgentState {
    Env env;
    Ensemble ens;
    MpcPlanner mpc;
    AgentState(const EnvConfig& ecfg, const ModelConfig& mcfg, Rng init_rng,
               const PlannerConfig& pcfg)
        : env(ecfg), ens(mcfg, init_rng), mpc(pcfg) {}
};

EpisodeSummary play_episode(const RunConfig& cfg, int agent_id, int episode,
                            std::uint64_t seed, AgentState& ag, ReplayDataset& buf,
                            const QuantizerSpec* qobs, const QuantizerSpec::Dim* qact,
                            const fs::path* agent_dir) {
    Rng reset_rng = derive_rng(seed, StreamRole::EnvReset, agent_id, episode);
    ag.env.reset(reset_rng);
    Rng plan_rng = derive_rng(seed, StreamRole::Planner, agent_id, episode);
    if (episode > 0) {
        if (buf.size() >= static_cast<std::size_t>(ag.ens.config().batch_size)) {
            Rng train_rng = derive_rng(seed, StreamRole::Model, agent_id, episode);
            ag.ens.train(buf, train_rng);
        }
        ag.mpc.reset();
    }
    const std::int64_t queries_before = ag.ens.query_count();
    const RewardFn reward = traffic_reward(cfg.env.veh_len);

    std::optional<CsvWriter> trace;
    if (agent_dir) {
        char name[32];
        std::snprintf(name, sizeof(name), "ep%02d.csv", episode);
        trace.emplace((*agent_dir / name).string(),
                      std::vector<std::string>{"step", "agent_id", "v", "x", "y",
                                               "action", "reward", "collision"});
    }

    EpisodeSummary out;
    while (!ag.env.done()) {
        Obs o = observe(ag.env.states(), 0);
        if (qobs) o = snap_obs(*qobs, o);
        double a = (episode == 0) ? plan_rng.uniform(0.0, cfg.env.v_max)
                                  : ag.mpc.act(ag.ens, reward, o, plan_rng);
        if (qact) a = snap(*qact, a);
        const StepOutcome so = ag.env.step({a});

        Obs o2 = observe(ag.env.states(), 0);
        if (qobs) o2 = snap_obs(*qobs, o2);
        Transition tr;
        tr.agent_id = agent_id;
        tr.global_step =
            static_cast<std::int64_t>(episode) * cfg.env.horizon + (ag.env.t() - 1);
        tr.s = o;
        tr.a = a;
        tr.s_next = o2;
        buf.insert(tr);
        out.fresh.push_back(tr);

        out.dx.push_back(so.dx[0]);
        out.reward_sum += so.reward[0];
        if (so.hit[0]) out.collided = true;
        if (trace) {
            const VehicleState& me = ag.env.states()[0];
            trace->row({CsvWriter::cell(ag.env.t()), CsvWriter::cell(agent_id),
                        CsvWriter::cell(me.v), CsvWriter::cell(me.x),
                        CsvWriter::cell(me.y), CsvWriter::cell(a),
                        CsvWriter::cell(so.reward[0]),
                        CsvWriter::cell(static_cast<int>(so.hit[0]))});
        }
    }
    out.t_c = ag.env.t();
    out.queries = ag.ens.query_count() - queries_before;
    const VehicleState& me = ag.env.states()[0];
    out.final_pos = {me.x, me.y};
    return out;
}

SeedResult run_seed(const RunConfig& cfg, std::uint64_t seed, bool exchange_enabled,
                    const fs::path* seed_dir) {
    EnvConfig ecfg = cfg.env;
    ecfg.agents = 1;  // one controlled vehicle per parallel copy

    PlannerConfig pcfg = cfg.planner;
    pcfg.action_lo = 0.0;
    pcfg.action_hi = ecfg.v_max;

    ModelConfig mcfg = cfg.model;
    const double R = ecfg.track.loop_radius();
    mcfg.clamp_lo = {0.0, -2.0 * R, -R, 0.0, 0.0, 0.0, 0.0};
    mcfg.clamp_hi = {ecfg.v_max, 2.0 * R,        R,
                     ecfg.v_max, ecfg.v_max,     ecfg.sensor_range,
                     ecfg.sensor_range};

    QuantizerSpec qobs;
    QuantizerSpec qact;
    if (cfg.quantized) {
        qobs = obs_quantizer(ecfg, cfg.quantizer_bins);
        qact = action_quantizer(ecfg, cfg.quantizer_bins);
    }

    const int I = cfg.agents;
    std::vector<AgentState> agents;
    agents.reserve(I);
    std::vector<ReplayDataset> buffers;
    buffers.reserve(I);
    std::vector<fs::path> agent_dirs(I);
    for (int i = 0; i < I; ++i) {
        agents.emplace_back(ecfg, mcfg, derive_rng(seed, StreamRole::Model, i), pcfg);
        buffers.emplace_back(cfg.buffer_capacity);
        if (seed_dir) {
            agent_dirs[i] = *seed_dir / ("agent" + std::to_string(i));
            fs::create_directories(agent_dirs[i]);
        }
    }

    SeedResult res;
    res.seed = seed;
    const double max_step_dist = ecfg.v_max * ecfg.tau;

    for (int k = 0; k < cfg.episodes; ++k) {
        std::vector<EpisodeSummary> summaries(I);
        parallel_for(I, [&](int i) {
            summaries[i] = play_episode(cfg, i, k, seed, agents[i], buffers[i],
                                        cfg.quantized ? &qobs : nullptr,
                                        cfg.quantized ? &qact.dims[0] : nullptr,
                                        seed_dir ? &agent_dirs[i] : nullptr);
        });

        std::int64_t ep_queries = 0;
        for (const auto& s : summaries) ep_queries += s.queries;
        if (k == 0 && ep_queries != 0)
            throw InvariantViolation("episode 0 must not query the dynamics model");

        ExchangeReport rep;
        rep.received.assign(I, 0);
        if (exchange_enabled) {
            std::vector<std::array<double, 2>> pos(I);
            std::vector<std::vector<Transition>> payloads(I);
            for (int i = 0; i < I; ++i) {
                pos[i] = summaries[i].final_pos;
                payloads[i] = summaries[i].fresh;
            }
            const CommGraph graph = build_graph(pos, cfg.d, k);
            Rng xrng = derive_rng(seed, StreamRole::Exchange, -1, k);
            rep = exchange(buffers, graph, payloads, cfg.blockage, xrng);
        }

        MetricRow row;
        row.episode = k;
        row.agility = episode_agility(summaries);
        row.safety = episode_safety(summaries, cfg.env.horizon);
        row.overhead = rep.overhead;
        double rsum = 0.0;
        for (const auto& s : summaries) rsum += s.reward_sum;
        row.mean_reward = rsum / I;
        if (!(row.safety >= 0.0 && row.safety <= 1.0 + 1e-12))
            throw InvariantViolation("safety outside [0,1]");
        if (!(row.agility >= 0.0 && row.agility <= max_step_dist + 1e-9))
            throw InvariantViolation("agility outside [0, v_max*tau]");

        res.metrics.push_back(row);
        res.exchanges.push_back(rep);
        std::vector<std::int64_t> q(I), psz(I);
        std::vector<std::array<double, 2>> fp(I);
        for (int i = 0; i < I; ++i) {
            q[i] = summaries[i].queries;
            psz[i] = static_cast<std::int64_t>(summaries[i].fresh.size());
            fp[i] = summaries[i].final_pos;
        }
        res.episode_queries.push_back(std::move(q));
        res.payload_sizes.push_back(std::move(psz));
        res.final_positions.push_back(std::move(fp));
    }

    if (seed_dir) {
        CsvWriter metrics((*seed_dir / "metrics.csv").string(),
                          {"episode", "agility", "safety", "overhead", "mean_reward"});
        for (const MetricRow& m : res.metrics)
            metrics.row({CsvWriter::cell(m.episode), CsvWriter::cell(m.agility),
                         CsvWriter::cell(m.safety), CsvWriter::cell(m.overhead),
                         CsvWriter::cell(m.mean_reward)});
        CsvWriter xcsv((*seed_dir / "exchange.csv").string(),
                       {"episode", "d", "overhead", "blocked_links"});
        for (std::size_t k = 0; k < res.exchanges.size(); ++k)
            xcsv.row({CsvWriter::cell(static_cast<int>(k)), CsvWriter::cell(cfg.d),
                      CsvWriter::cell(res.exchanges[k].overhead),
                      CsvWriter::cell(res.exchanges[k].blocked_links)});
    }
    return res;
}

RunResult run_core(const RunConfig& cfg, bool exchange_enabled) {
    cfg.validate();
    RunResult res;
    res.out_dir = cfg.out_dir;
    const bool artifacts = !cfg.out_dir.empty();
    fs::path root(cfg.out_dir);
    if (artifacts) {
        fs::create_directories(root);
        // The manifest identifies the experiment, not where it landed: clear
        // the output path so the same config hashes identically anywhere.
        RunConfig canon = cfg;
        canon.out_dir.clear();
        write_manifest(root, canon.to_text());
    }
    const int S = static_cast<int>(cfg.seeds.size());
    res.per_seed.resize(S);
    std::vector<fs::path> seed_dirs(S);
    for (int si = 0; si < S; ++si)
        if (artifacts) {
            seed_dirs[si] = root / ("seed" + std::to_string(cfg.seeds[si]));
            fs::create_directories(seed_dirs[si]);
        }
    parallel_for(S, [&](int si) {
        res.per_seed[si] = run_seed(cfg, cfg.seeds[si], exchange_enabled,
                                    artifacts ? &seed_dirs[si] : nullptr);
    });
    return res;
}

}  // namespace

double episode_agility(const std::vector<EpisodeSummary>& per_agent) {
    if (per_agent.empty()) throw InvariantViolation("agility of zero agents");
    double acc = 0.0;
    for (const EpisodeSummary& s : per_agent) {
        if (s.t_c < 1 || s.dx.size() != static_cast<std::size_t>(s.t_c))
            throw InvariantViolation("episode summary must cover t_c >= 1 steps");
        double dist = 0.0;
        for (double d : s.dx) dist += d;
        acc += dist / s.t_c;
    }
    return acc / static_cast<double>(per_agent.size());
}

double episode_safety(const std::vector<EpisodeSummary>& per_agent, int horizon) {
    if (per_agent.empty()) throw InvariantViolation("safety of zero agents");
    if (horizon < 1) throw InvariantViolation("safety needs horizon >= 1");
    double acc = 0.0;
    for (const EpisodeSummary& s : per_agent)
        acc += static_cast<double>(s.t_c) / horizon;
    return acc / static_cast<double>(per_agent.size());
}

RunResult run_mapets(const RunConfig& cfg) { return run_core(cfg, true); }

RunResult run_independent(const RunConfig& cfg) { return run_core(cfg, false); }

std::vector<SweepRow> run_sweep(const RunConfig& base, const std::string& axis,
                                const std::vector<double>& values) {
    base.validate();
    if (values.empty()) throw ConfigError("sweep values must be non-empty");
    auto as_int = [&](double v) {
        if (v != std::floor(v))
            throw ConfigError("sweep axis '" + axis + "' takes integer values, got " +
                              fmt_double(v));
        return static_cast<int>(v);
    };
    std::vector<SweepRow> rows;
    for (double v : values) {
        RunConfig cfg = base;
        if (axis == "d") cfg.d = v;
        else if (axis == "w") cfg.planner.horizon = as_int(v);
        else if (axis == "B") cfg.model.members = as_int(v);
        else if (axis == "P") cfg.planner.particles = as_int(v);
        else if (axis == "blockage") cfg.blockage = v;
        else
            throw ConfigError("unknown sweep axis '" + axis +
                              "' (expected one of d, w, B, P, blockage)");
        if (!base.out_dir.empty())
            cfg.out_dir = base.out_dir + "/" + axis + "=" + fmt_double(v);
        const RunResult r = run_mapets(cfg);
        for (const SeedResult& sr : r.per_seed)
            for (const MetricRow& m : sr.metrics)
                rows.push_back({v, sr.seed, m.episode, m.agility, m.safety, m.overhead});
    }
    if (!base.out_dir.empty()) {
        fs::create_directories(base.out_dir);
        CsvWriter csv(base.out_dir + "/sweep.csv",
                      {"axis_value", "seed", "episode", "agility", "safety", "overhead"});
        for (const SweepRow& r : rows)
            csv.row({CsvWriter::cell(r.axis_value), CsvWriter::cell(r.seed),
                     CsvWriter::cell(r.episode), CsvWriter::cell(r.agility),
                     CsvWriter::cell(r.safety), CsvWriter::cell(r.overhead)});
    }
    return rows;
}

void run_regret(const RegretConfig& cfg) {
    cfg.validate();
    const TabularMdp mdp = river_swim(cfg.states);
    fs::path root(cfg.out_dir);
    fs::create_directories(root);
    {
        RegretConfig canon = cfg;
        canon.out_dir.clear();
        write_manifest(root, canon.to_text());
    }
    for (std::uint64_t seed : cfg.seeds) {
        UcrlConfig u;
        u.agents = cfg.agents;
        u.horizon = cfg.horizon;
        u.delta = cfg.delta;
        u.seed = seed;
        if (cfg.sharing == "full") {
            const int n = cfg.agents;
            u.cover_schedule = [n](int) { return all_in_one_cover(n); };
        }
        const RegretTrace tr = ma_ucrl2_run(mdp, u);
        CsvWriter csv((root / ("regret_seed" + std::to_string(seed) + ".csv")).string(),
                      {"t", "agent_id", "cumulative_reward", "regret", "episode_index"});
        const std::int64_t T = cfg.horizon;
        for (std::int64_t t = 1; t <= T; ++t) {
            if (t % cfg.stride != 0 && t != T) continue;
            for (int i = 0; i < cfg.agents; ++i)
                csv.row({CsvWriter::cell(t), CsvWriter::cell(i),
                         CsvWriter::cell(tr.cumulative[i][t]),
                         CsvWriter::cell(tr.agent_regret(i, t)),
                         CsvWriter::cell(tr.episode_index[t - 1])});
        }
    }
}

void run_cover(const CoverConfig& cfg) {
    cfg.validate();
    TrackGeometry geom;
    geom.total_length = cfg.track_length;
    std::vector<std::array<double, 2>> pos(cfg.agents);
    for (int i = 0; i < cfg.agents; ++i) {
        const Point2 p =
            arclength_to_xy(geom, i * cfg.track_length / cfg.agents);
        pos[i] = {p.x, p.y};
    }
    fs::path root(cfg.out_dir);
    fs::create_directories(root);
    {
        CoverConfig canon = cfg;
        canon.out_dir.clear();
        write_manifest(root, canon.to_text());
    }
    CsvWriter csv((root / "cover.csv").string(),
                  {"d", "graph_edges", "greedy_cover", "exact_cover"});
    for (double d : cfg.d_values) {
        const CommGraph g = build_graph(pos, d, 0);
        const CliqueCover greedy = greedy_clique_cover(g);
        if (!is_valid_cover(g, greedy))
            throw InvariantViolation("greedy cover invalid at d = " + fmt_double(d));
        std::int64_t exact_size = -1;
        if (cfg.agents <= 12) {
            const CliqueCover exact = exact_clique_cover(g);
            if (!is_valid_cover(g, exact))
                throw InvariantViolation("exact cover invalid at d = " + fmt_double(d));
            if (greedy.size() < exact.size())
                throw InvariantViolation("greedy cover beat the exact optimum at d = " +
                                         fmt_double(d));
            exact_size = static_cast<std::int64_t>(exact.size());
        }
        csv.row({CsvWriter::cell(d),
                 CsvWriter::cell(static_cast<std::int64_t>(g.edges.size())),
                 CsvWriter::cell(static_cast<std::int64_t>(greedy.size())),
                 CsvWriter::cell(exact_size)});
    }
}

bool directories_identical(const std::string& a, const std::string& b,
                           std::string* why) {
    auto listing = [](const fs::path& root) {
        std::vector<std::string> rel;
        for (const auto& e : fs::recursive_directory_iterator(root))
            if (e.is_regular_file())
                rel.push_back(fs::relative(e.path(), root).generic_string());
        std::sort(rel.begin(), rel.end());
        return rel;
    };
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    const std::vector<std::string> la = listing(a), lb = listing(b);
    if (la != lb) {
        if (why) *why = "file sets differ between " + a + " and " + b;
        return false;
    }
    for (const std::string& rel : la) {
        if (slurp(fs::path(a) / rel) != slurp(fs::path(b) / rel)) {
            if (why) *why = "file contents differ: " + rel;
            return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// The "check" subcommand: a fast invariant/oracle suite over every module.
// ---------------------------------------------------------------------------

namespace {

struct CheckContext {
    std::ostream& log;
    int failures = 0;
    template <typename F>
    void run(const char* name, F&& body) {
        try {
            body();
            log << "ok   " << name << "\n";
        } catch (const std::exception& e) {
            ++failures;
            log << "FAIL " << name << ": " << e.what() << "\n";
        }
    }
};

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::runtime_error(msg);
}

/// Deterministic concave score of an action sequence, peaked at `peak`.
class QuadraticEvaluator : public SequenceEvaluator {
public:
    explicit QuadraticEvaluator(double peak) : peak_(peak) {}
    Vec evaluate(const Mat& seqs, Rng&) const override {
        Vec out(seqs.rows());
        for (Eigen::Index r = 0; r < seqs.rows(); ++r)
            out(r) = -(seqs.row(r).array() - peak_).square().sum();
        return out;
    }

private:
    double peak_;
};

}  // namespace

int run_check(std::ostream& log) {
    CheckContext ctx{log};

    ctx.run("track-crossing-geometry", [] {
        TrackGeometry geom;
        const Point2 a = arclength_to_xy(geom, geom.crossing_a());
        const Point2 b = arclength_to_xy(geom, geom.crossing_b());
        require(planar_distance(a, b) <= 1e-9, "crossing arclengths do not coincide");
        for (double s : {13.0, 100.5, 333.25}) {
            const Point2 p = arclength_to_xy(geom, s);
            const Point2 q = arclength_to_xy(geom, s + geom.total_length);
            require(planar_distance(p, q) <= 1e-9, "arclength map is not periodic");
        }
    });

    ctx.run("env-determinism", [] {
        EnvConfig cfg;
        cfg.agents = 2;
        cfg.hv_min = cfg.hv_max = 2;
        cfg.horizon = 60;
        auto rollout = [&cfg]() {
            Env env(cfg);
            Rng r(11);
            env.reset(r);
            std::string sig;
            Rng act(5);
            while (!env.done()) {
                const double a0 = act.uniform(0.0, cfg.v_max);
                const double a1 = act.uniform(0.0, cfg.v_max);
                env.step({a0, a1});
                for (const VehicleState& v : env.states())
                    sig += fmt_double(v.s) + "," + fmt_double(v.v) + ";";
            }
            return sig;
        };
        require(rollout() == rollout(), "identical seeds gave different trajectories");
    });

    ctx.run("reward-wiring", [] {
        EnvConfig cfg;
        cfg.agents = 2;
        cfg.hv_min = cfg.hv_max = 0;
        Env env(cfg);
        std::vector<VehicleState> vs(2);
        vs[0].kind = vs[1].kind = VehicleKind::controlled;
        vs[0].s = 100.0;
        vs[0].v = 5.0;
        vs[1].s = 130.0;
        vs[1].v = 6.0;
        env.reset_to(vs);
        const StepOutcome so = env.step({5.0, 6.0});
        for (int i = 0; i < 2; ++i) {
            const VehicleState& nx = env.states()[i];
            const double expect = nx.v + nx.v_a + nx.v_e + (so.hit[i] ? -10.0 : 0.0);
            require(std::fabs(so.reward[i] - expect) <= 1e-12, "reward wiring broken");
        }
        require(!so.collision, "spurious collision in free flow");
    });

    ctx.run("model-gradcheck", [] {
        Rng rng(404);
        for (int trial = 0; trial < 3; ++trial) {
            GaussianMlp net(3, 2, 8, 1, rng);
            Mat X(4, 3), T(4, 2);
            for (int i = 0; i < X.size(); ++i) X(i) = rng.normal();
            for (int i = 0; i < T.size(); ++i) T(i) = rng.normal();
            GaussianMlp::Grads g;
            net.train_loss(X, T, 0.01, &g);
            Vec flat = net.flat_params();
            Vec analytic(flat.size());
            {
                int at = 0;
                for (std::size_t l = 0; l < g.dW.size(); ++l) {
                    for (int i = 0; i < g.dW[l].size(); ++i) analytic(at++) = g.dW[l](i);
                    for (int i = 0; i < g.db[l].size(); ++i) analytic(at++) = g.db[l](i);
                }
                for (int i = 0; i < g.dmax_lv.size(); ++i) analytic(at++) = g.dmax_lv(i);
                for (int i = 0; i < g.dmin_lv.size(); ++i) analytic(at++) = g.dmin_lv(i);
            }
            const double eps = 1e-6;
            double worst = 0.0;
            for (int p = 0; p < flat.size(); p += 7) {  // strided spot-check
                Vec pp = flat;
                pp(p) += eps;
                net.set_flat_params(pp);
                const double up = net.train_loss(X, T, 0.01, nullptr);
                pp(p) -= 2 * eps;
                net.set_flat_params(pp);
                const double dn = net.train_loss(X, T, 0.01, nullptr);
                net.set_flat_params(flat);
                const double fd = (up - dn) / (2 * eps);
                const double rel = std::fabs(fd - analytic(p)) /
                                   std::max({1e-6, std::fabs(fd), std::fabs(analytic(p))});
                worst = std::max(worst, rel);
            }
            require(worst < 1e-4, "gradient mismatch, rel err " + fmt_double(worst));
        }
    });

    ctx.run("planner-degenerate-prior", [] {
        PlannerConfig cfg;
        cfg.horizon = 4;
        cfg.candidates = 16;
        cfg.elites = 4;
        cfg.iterations = 3;
        cfg.action_hi = 10.0;
        QuadraticEvaluator ev(3.0);
        CemDistribution prior;
        prior.mean = Vec::Constant(4, 7.25);
        prior.var = Vec::Zero(4);
        Rng rng(9);
        const CemResult res = cem_optimize(ev, cfg, prior, rng);
        require(res.iterations_run == 1, "degenerate prior should converge at once");
        for (int t = 0; t < 4; ++t)
            require(res.best(t) == 7.25, "degenerate prior must return its mean exactly");
    });

    ctx.run("confidence-radius-hand-value", [] {
        const double r = confidence_radius(10, 2, 2, 100, 0.1);
        require(std::fabs(r - 4.819) <= 1e-3,
                "radius " + fmt_double(r) + " != 4.819 +- 1e-3");
    });

    ctx.run("episode-ratio-bound", [] {
        Rng rng(77);
        for (int trial = 0; trial < 300; ++trial) {
            std::vector<double> xs(1 + rng.uniform_int(20));
            double running = 0.0;  // each element is capped by max(1, sum so far)
            for (double& x : xs) {
                x = rng.uniform(0.0, std::max(1.0, running));
                running += x;
            }
            const auto [lhs, rhs] = sequence_ratio_bound(xs);
            require(lhs <= rhs + 1e-9, "sequence ratio bound violated");
        }
    });

    ctx.run("clique-covers", [] {
        Rng rng(123);
        for (int trial = 0; trial < 30; ++trial) {
            const int n = 4 + rng.uniform_int(5);
            std::vector<std::array<double, 2>> pos(n);
            for (auto& p : pos) p = {rng.uniform(0.0, 100.0), rng.uniform(0.0, 100.0)};
            const CommGraph g = build_graph(pos, rng.uniform(10.0, 80.0), 0);
            const CliqueCover cover = greedy_clique_cover(g);
            require(is_valid_cover(g, cover), "greedy cover invalid");
            const auto [lhs, rhs] = clique_relation_check(cover, n);
            require(lhs <= rhs + 1e-9, "cover size relation violated");
        }
        // Pentagon ring: positions on a circle, range = side length.
        std::vector<std::array<double, 2>> ring(5);
        for (int i = 0; i < 5; ++i) {
            const double th = 2.0 * M_PI * i / 5.0;
            ring[i] = {std::cos(th), std::sin(th)};
        }
        const double side = std::sqrt(2.0 - 2.0 * std::cos(2.0 * M_PI / 5.0));
        const CommGraph c5 = build_graph(ring, side + 1e-9, 0);
        require(c5.edges.size() == 5, "pentagon graph should have 5 edges");
        require(exact_clique_cover(c5).size() == 3, "exact cover of the 5-cycle must be 3");
    });

    ctx.run("quantizer-roundtrip", [] {
        QuantizerSpec spec;
        spec.dims = {{0.0, 13.89, 10}, {-50.0, 50.0, 7}, {0.0, 75.0, 4}};
        spec.validate();
        Rng rng(3);
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<double> p = {rng.uniform(-1.0, 15.0), rng.uniform(-60.0, 60.0),
                                     rng.uniform(-5.0, 80.0)};
            const std::int64_t idx = quantize(spec, p);
            require(idx >= 0 && idx < spec.total(), "index out of range");
            const std::vector<double> c = dequantize(spec, idx);
            require(quantize(spec, c) == idx, "center must re-quantize to its own bin");
        }
    });

    ctx.run("exchange-dedup", [] {
        std::vector<ReplayDataset> bufs(2, ReplayDataset(128));
        std::vector<std::vector<Transition>> payloads(2);
        for (int i = 0; i < 2; ++i)
            for (int t = 0; t < 10; ++t) {
                Transition tr;
                tr.agent_id = i;
                tr.global_step = t;
                payloads[i].push_back(tr);
                bufs[i].insert(tr);
            }
        const CommGraph g = build_graph({{0.0, 0.0}, {1.0, 0.0}}, 5.0, 0);
        Rng r1(1);
        const ExchangeReport first = exchange(bufs, g, payloads, 0.0, r1);
        require(first.overhead == 20, "expected 20 transferred transitions");
        require(first.received[0] == 10 && first.received[1] == 10,
                "each side should accept 10 new transitions");
        Rng r2(2);
        const ExchangeReport again = exchange(bufs, g, payloads, 0.0, r2);
        require(again.overhead == 20 && again.received[0] == 0 && again.received[1] == 0,
                "duplicates must be rejected on re-delivery");
    });

    ctx.run("single-agent-reversion-micro", [] {
        RunConfig cfg;
        cfg.agents = 2;
        cfg.episodes = 2;
        cfg.seeds = {7};
        cfg.env.horizon = 24;
        cfg.env.hv_min = 1;
        cfg.env.hv_max = 2;
        cfg.model.members = 1;
        cfg.model.hidden_width = 8;
        cfg.model.hidden_layers = 1;
        cfg.model.epochs = 2;
        cfg.model.batch_size = 16;
        cfg.buffer_capacity = 256;
        cfg.planner.horizon = 3;
        cfg.planner.candidates = 8;
        cfg.planner.elites = 2;
        cfg.planner.particles = 2;
        cfg.planner.iterations = 1;
        cfg.d = 0.0;
        const fs::path tmp = fs::temp_directory_path() / "marlab-check-reversion";
        fs::remove_all(tmp);
        RunConfig a = cfg;
        a.out_dir = (tmp / "joint").string();
        RunConfig b = cfg;
        b.out_dir = (tmp / "solo").string();
        run_mapets(a);
        run_independent(b);
        std::string why;
        const bool same = directories_identical(a.out_dir, b.out_dir, &why);
        fs::remove_all(tmp);
        require(same, "d=0 run differs from independent single-agent runs: " + why);
    });

    return ctx.failures;
}

}  // namespace marlab
