#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sloc/targets.hpp"

namespace sloc {

/// Builds a target from its JSON description:
///   {"kind":"gaussian","mean":[..],"cov":[[..],..] or row-major flat}
///   {"kind":"mixture","components":[{"weight":w,"mean":[..],"cov":..},..]}
///   {"kind":"potential-ref","name":"quartic","dim":1}
TargetMeasure parse_target(const std::string& json_text);

struct ExperimentConfig {
    std::string target_json;
    std::optional<TargetMeasure> target;
    /// simulate: sl | channel | particles | backward | polchinski | rgd. equiv: all | 1-2 | 1-3 | 1-4 | 1-5.
    std::string perspective = "all";
    double dt = 1e-3;
    double horizon = 1.0;
    double eps_clip = 1e-3;
    std::size_t paths = 10000;
    std::size_t particles = 1000;
    std::size_t budget = 2000;
    std::size_t export_paths = 10;
    double eta = 1.0;
    double alpha = 1.0;
    std::size_t rgd_steps = 20;
    double level = 0.01;
    std::uint64_t seed = 42;
    /// The seed came from the config file rather than the default.
    bool seed_given = false;
    std::string out = ".";
    std::string format = "json";
    unsigned workers = 1;
};

struct ConfigResult {
    std::optional<ExperimentConfig> config;
    std::vector<std::string> errors;
    std::vector<std::string> warnings;

    bool ok() const { return config.has_value() && errors.empty(); }
};

/// Parses and validates; every problem is collected rather than stopping at the first.
ConfigResult validate_config_text(const std::string& json_text);
ConfigResult validate_config(const std::string& path);

/// Normalized config with all defaults filled in, as JSON text.
std::string config_to_json(const ExperimentConfig& cfg);

}  // namespace sloc
