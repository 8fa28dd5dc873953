// marlab: decentralized model-based traffic-learning laboratory.
//
// Subcommands:
//   run     one experiment from a config file (metrics, traces, manifest)
//   sweep   repeat the run across values of one parameter axis
//   regret  tabular optimistic-learning experiment on the chain MDP
//   cover   clique-cover report over communication ranges
//   check   fast self-diagnostic suite
//
// Exit codes: 0 success, 2 configuration/usage error, 3 runtime failure.

#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "marlab/harness.hpp"

namespace {

std::vector<double> parse_values(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        // Trim surrounding spaces, then require a full numeric parse.
        const auto b = tok.find_first_not_of(" \t");
        const auto e = tok.find_last_not_of(" \t");
        if (b == std::string::npos)
            throw marlab::ConfigError("--values contains an empty element");
        tok = tok.substr(b, e - b + 1);
        try {
            std::size_t used = 0;
            const double v = std::stod(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            out.push_back(v);
        } catch (const std::exception&) {
            throw marlab::ConfigError("--values element is not a number: '" + tok + "'");
        }
    }
    if (out.empty()) throw marlab::ConfigError("--values must list at least one number");
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"decentralized model-based traffic-learning laboratory"};
    app.require_subcommand(1);

    std::string config_path, out_dir, axis, values_csv;
    std::int64_t seed = -1;
    bool quantized = false;

    CLI::App* run = app.add_subcommand("run", "run one experiment");
    run->add_option("--config", config_path, "config file")->required();
    run->add_option("--seed", seed, "replace the config's seed list with this seed");
    run->add_option("--out", out_dir, "output directory (overrides run.out)");
    run->add_flag("--quantized", quantized, "discretize observations and actions");

    CLI::App* sweep = app.add_subcommand("sweep", "sweep one parameter axis");
    sweep->add_option("--config", config_path, "base config file")->required();
    sweep->add_option("--axis", axis, "one of d, w, B, P, blockage")->required();
    sweep->add_option("--values", values_csv, "comma-separated axis values")->required();
    sweep->add_option("--out", out_dir, "output directory (overrides run.out)");

    CLI::App* regret = app.add_subcommand("regret", "chain-MDP regret experiment");
    regret->add_option("--config", config_path, "config file (defaults when omitted)");
    regret->add_option("--out", out_dir, "output directory (overrides regret.out)");

    CLI::App* cover = app.add_subcommand("cover", "clique covers vs range");
    cover->add_option("--config", config_path, "config file (defaults when omitted)");
    cover->add_option("--out", out_dir, "output directory (overrides cover.out)");

    CLI::App* check = app.add_subcommand("check", "run the self-diagnostic suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (run->parsed()) {
            marlab::RunConfig cfg = marlab::RunConfig::from_file(config_path);
            if (seed >= 0) cfg.seeds = {static_cast<std::uint64_t>(seed)};
            if (!out_dir.empty()) cfg.out_dir = out_dir;
            if (quantized) cfg.quantized = true;
            marlab::run_mapets(cfg);
            std::cout << "run complete: " << cfg.out_dir << "\n";
        } else if (sweep->parsed()) {
            marlab::RunConfig cfg = marlab::RunConfig::from_file(config_path);
            if (!out_dir.empty()) cfg.out_dir = out_dir;
            const auto rows = marlab::run_sweep(cfg, axis, parse_values(values_csv));
            std::cout << "sweep complete: " << rows.size() << " rows under "
                      << cfg.out_dir << "\n";
        } else if (regret->parsed()) {
            marlab::RegretConfig cfg = config_path.empty()
                                           ? marlab::RegretConfig{}
                                           : marlab::RegretConfig::from_file(config_path);
            if (!out_dir.empty()) cfg.out_dir = out_dir;
            marlab::run_regret(cfg);
            std::cout << "regret experiment complete: " << cfg.out_dir << "\n";
        } else if (cover->parsed()) {
            marlab::CoverConfig cfg = config_path.empty()
                                          ? marlab::CoverConfig{}
                                          : marlab::CoverConfig::from_file(config_path);
            if (!out_dir.empty()) cfg.out_dir = out_dir;
            marlab::run_cover(cfg);
            std::cout << "cover report complete: " << cfg.out_dir << "\n";
        } else if (check->parsed()) {
            const int failures = marlab::run_check(std::cout);
            if (failures > 0) {
                std::cout << failures << " check(s) failed\n";
                return 3;
            }
            std::cout << "all checks passed\n";
        }
    } catch (const marlab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
