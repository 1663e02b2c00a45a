// SPDX-License-Identifier: Apache-2.0
//
// tdpower: energy-minimal rate/time allocation for TDMA over block fading.
// Subcommands: envelope | solve | region | compare | modes.
// Exit codes: 0 ok, 1 config error, 2 infeasible target, 3 non-convergence.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tdma/cli.hpp"
#include "tdma/parallel.hpp"

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw tdma::ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& dir, const std::string& name, const std::string& payload) {
    std::filesystem::create_directories(dir);
    std::ofstream out(std::filesystem::path(dir) / name, std::ios::binary);
    out << payload;
}

std::vector<double> parse_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
}

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> samples;
    unsigned threads = 1;
    std::string out_dir;
};

tdma::cli::Config load(const CommonFlags& flags) {
    auto cfg = tdma::cli::parse_config_text(slurp(flags.config_path));
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.samples) cfg.samples = *flags.samples;
    tdma::set_thread_count(flags.threads);
    return cfg;
}

void add_common(CLI::App* cmd, CommonFlags& flags, bool needs_config = true) {
    auto* opt = cmd->add_option("--config", flags.config_path, "JSON experiment config");
    if (needs_config) opt->required();
    cmd->add_option("--seed", flags.seed, "override the config seed");
    cmd->add_option("--samples", flags.samples, "override the config sample count");
    cmd->add_option("--threads", flags.threads, "worker thread cap");
    cmd->add_option("--out", flags.out_dir, "directory for output files");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Energy-minimal rate/time allocation for TDMA over block-fading channels"};
    app.require_subcommand(1);

    CommonFlags flags;

    auto* cmd_envelope = app.add_subcommand("envelope", "dump a per-state envelope as JSON");
    std::string gains_csv;
    add_common(cmd_envelope, flags);
    cmd_envelope->add_option("--gains", gains_csv, "comma-separated channel gains, one per user")
        ->required();

    auto* cmd_solve = app.add_subcommand("solve", "solve the configured constraint");
    add_common(cmd_solve, flags);

    auto* cmd_region = app.add_subcommand("region", "trace the power-region boundary");
    int directions = 33;
    add_common(cmd_region, flags);
    cmd_region->add_option("--directions", directions, "number of cost-weight directions");

    auto* cmd_compare = app.add_subcommand("compare", "dB savings vs the equal-time baselines");
    std::string ratios_csv = "0.01,0.0316,0.1,0.316,1,3.16,10,31.6,100";
    add_common(cmd_compare, flags);
    cmd_compare->add_option("--ratios", ratios_csv, "comma-separated mu1/mu2 ratios");

    auto* cmd_modes = app.add_subcommand("modes", "emit a QAM mode table as JSON");
    std::string m_csv = "4,16,64";
    double sep = 1e-3;
    cmd_modes->add_option("--m", m_csv, "comma-separated constellation sizes");
    cmd_modes->add_option("--sep", sep, "symbol error probability target");
    cmd_modes->add_option("--out", flags.out_dir, "directory for output files");

    CLI11_PARSE(app, argc, argv);

    const auto start = std::chrono::steady_clock::now();
    try {
        if (cmd_envelope->parsed()) {
            const auto cfg = load(flags);
            const auto payload = tdma::cli::run_envelope(cfg, parse_list(gains_csv));
            if (!flags.out_dir.empty()) write_file(flags.out_dir, "envelope.json", payload);
            std::cout << payload;
        } else if (cmd_solve->parsed()) {
            const auto cfg = load(flags);
            const auto payload = tdma::cli::run_solve(cfg);
            if (!flags.out_dir.empty()) write_file(flags.out_dir, "solution.json", payload);
            std::cout << payload;
        } else if (cmd_region->parsed()) {
            const auto cfg = load(flags);
            const auto files = tdma::cli::run_region(cfg, directions);
            if (!flags.out_dir.empty()) {
                write_file(flags.out_dir, "region.csv", files.csv);
                write_file(flags.out_dir, "region_manifest.json", files.manifest);
            }
            std::cout << files.csv;
        } else if (cmd_compare->parsed()) {
            const auto cfg = load(flags);
            const auto files = tdma::cli::run_compare(cfg, parse_list(ratios_csv));
            if (!flags.out_dir.empty()) {
                write_file(flags.out_dir, "savings.csv", files.csv);
                write_file(flags.out_dir, "savings_manifest.json", files.manifest);
            }
            std::cout << files.csv;
        } else if (cmd_modes->parsed()) {
            tdma::amc::QamSpec spec;
            for (double m : parse_list(m_csv)) spec.constellations.push_back(static_cast<int>(m));
            spec.sep_target = sep;
            const auto payload = tdma::cli::run_modes(spec);
            if (!flags.out_dir.empty()) write_file(flags.out_dir, "modes.json", payload);
            std::cout << payload;
        }
    } catch (const tdma::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const tdma::InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return 2;
    } catch (const tdma::ConvergenceError& e) {
        std::cerr << "did not converge: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - start)
                        .count();
    std::cerr << "done in " << ms << " ms\n";
    return 0;
}
