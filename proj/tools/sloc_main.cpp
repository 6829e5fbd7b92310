#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "sloc/config.hpp"
#include "sloc/error.hpp"
#include "sloc/suites.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> paths;
    std::optional<double> dt;
    std::optional<std::string> format;
    std::optional<unsigned> workers;
};

void add_common(CLI::App* sub, Overrides& o, bool needs_config) {
    auto* c = sub->add_option("--config", o.config, "JSON experiment config");
    if (needs_config) c->required();
    sub->add_option("--seed", o.seed, "64-bit seed (falls back to SLOC_SEED)");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--paths", o.paths, "number of paths")->check(CLI::PositiveNumber);
    sub->add_option("--dt", o.dt, "time step")->check(CLI::PositiveNumber);
    sub->add_option("--format", o.format, "report format")->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--workers", o.workers, "worker threads; never changes results")->check(CLI::PositiveNumber);
}

// Loads the config (or a target-free default), then applies flag and env overrides.
std::optional<sloc::ExperimentConfig> load(const Overrides& o, bool target_optional) {
    sloc::ConfigResult res;
    if (o.config.empty() && target_optional) {
        res.config = sloc::ExperimentConfig{};
    } else {
        res = sloc::validate_config(o.config);
    }
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
    if (!res.ok()) {
        for (const auto& e : res.errors) std::cerr << "config error: " << e << '\n';
        return std::nullopt;
    }
    sloc::ExperimentConfig cfg = *res.config;
    // precedence: --seed, then the config file, then SLOC_SEED
    if (o.seed) {
        cfg.seed = *o.seed;
    } else if (const char* env = std::getenv("SLOC_SEED"); env && !cfg.seed_given) {
        try {
            cfg.seed = std::stoull(env);
        } catch (const std::exception&) {
            std::cerr << "config error: SLOC_SEED is not an unsigned integer\n";
            return std::nullopt;
        }
    }
    if (o.out) cfg.out = *o.out;
    if (o.paths) cfg.paths = *o.paths;
    if (o.dt) cfg.dt = *o.dt;
    if (o.format) cfg.format = *o.format;
    if (o.workers) cfg.workers = *o.workers;
    return cfg;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

int emit(const sloc::ExperimentConfig& cfg, const sloc::Report& rep) {
    fs::create_directories(cfg.out);
    write_file(fs::path(cfg.out) / (rep.suite + ".report.json"), sloc::report_to_json(rep));
    write_file(fs::path(cfg.out) / (rep.suite + ".report.csv"), sloc::report_to_csv(rep));
    std::cout << (cfg.format == "csv" ? sloc::report_to_csv(rep) : sloc::report_to_json(rep)) << '\n';
    for (const auto& c : rep.checks)
        std::cerr << (c.pass ? "PASS " : "FAIL ") << rep.suite << '/' << c.name << "  observed=" << c.observed << ' '
                  << c.relation << ' ' << c.tolerance << (c.detail.empty() ? "" : "  (" + c.detail + ")") << '\n';
    return rep.pass() ? 0 : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stochastic localization simulation and verification"};
    app.require_subcommand(1);
    Overrides o;
    auto* simulate = app.add_subcommand("simulate", "write trajectories of one perspective as CSV");
    auto* equiv = app.add_subcommand("equiv", "cross-perspective equivalence checks");
    auto* rgd = app.add_subcommand("rgd", "contraction, kernel identity and entropic stability");
    auto* bridge = app.add_subcommand("bridge", "Sinkhorn, objective shift and Girsanov energy");
    auto* lsi = app.add_subcommand("lsi", "log-Sobolev schedule table and identities");
    auto* report = app.add_subcommand("report", "combine the reports found in --out");
    add_common(simulate, o, true);
    add_common(equiv, o, true);
    add_common(rgd, o, true);
    add_common(bridge, o, false);
    add_common(lsi, o, false);
    add_common(report, o, false);
    double alpha = 0.0, eta = 0.0;
    lsi->add_option("--alpha", alpha, "strong log-concavity")->check(CLI::PositiveNumber);
    lsi->add_option("--eta", eta, "RGD step size for the bound")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    const bool optional_target = bridge->parsed() || lsi->parsed() || report->parsed();
    auto cfg = load(o, optional_target);
    if (!cfg) return kExitConfig;
    if (alpha > 0.0) cfg->alpha = alpha;
    if (eta > 0.0) cfg->eta = eta;

    try {
        if (simulate->parsed()) {
            fs::create_directories(cfg->out);
            const std::string p = cfg->perspective == "all" ? "sl" : cfg->perspective;
            const fs::path file = fs::path(cfg->out) / ("trajectories_" + p + ".csv");
            std::ofstream csv(file, std::ios::binary);
            sloc::run_simulate(*cfg, csv);
            std::cout << file.string() << '\n';
            return 0;
        }
        if (equiv->parsed()) return emit(*cfg, sloc::run_equiv(*cfg));
        if (rgd->parsed()) return emit(*cfg, sloc::run_rgd(*cfg));
        if (bridge->parsed()) return emit(*cfg, sloc::run_bridge(*cfg));
        if (lsi->parsed()) {
            fs::create_directories(cfg->out);
            std::ofstream table(fs::path(cfg->out) / "lsi_schedule.csv", std::ios::binary);
            return emit(*cfg, sloc::run_lsi(*cfg, table));
        }
        if (report->parsed()) {
            sloc::Report all;
            all.suite = "report";
            std::vector<fs::path> files;
            if (fs::is_directory(cfg->out))
                for (const auto& e : fs::directory_iterator(cfg->out)) {
                    const std::string name = e.path().filename().string();
                    if (name.size() > 12 && name.ends_with(".report.json") && name != "report.report.json")
                        files.push_back(e.path());
                }
            std::sort(files.begin(), files.end());
            if (files.empty()) {
                std::cerr << "config error: no *.report.json files in " << cfg->out << '\n';
                return kExitConfig;
            }
            for (const auto& f : files) {
                std::ifstream in(f);
                std::stringstream ss;
                ss << in.rdbuf();
                all.merge(sloc::report_from_json(ss.str()));
            }
            return emit(*cfg, all);
        }
    } catch (const sloc::DomainError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const sloc::UnsupportedError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFail;
    }
    return kExitConfig;
}
