#include "sloc/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sloc/error.hpp"

namespace sloc {

using nlohmann::json;

namespace {

Vector to_vector(const json& j, const std::string& field) {
    if (!j.is_array() || j.empty()) throw DomainError(field + ": expected a non-empty array of numbers");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw DomainError(field + ": expected numbers");
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

Matrix to_matrix(const json& j, Eigen::Index d, const std::string& field) {
    Matrix m(d, d);
    if (!j.is_array()) throw DomainError(field + ": expected an array");
    if (!j.empty() && j[0].is_array()) {
        if (static_cast<Eigen::Index>(j.size()) != d) throw DimensionError(field + ": wrong number of rows");
        for (Eigen::Index r = 0; r < d; ++r) m.row(r) = to_vector(j[static_cast<std::size_t>(r)], field).transpose();
        return m;
    }
    const Vector flat = to_vector(j, field);
    if (flat.size() != d * d) throw DimensionError(field + ": expected " + std::to_string(d * d) + " entries");
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < d; ++c) m(r, c) = flat[r * d + c];
    return m;
}

GaussianMeasure gaussian_from(const json& j, const std::string& field) {
    if (!j.contains("mean") || !j.contains("cov")) throw DomainError(field + ": needs mean and cov");
    Vector mean = to_vector(j["mean"], field + ".mean");
    Matrix cov = to_matrix(j["cov"], mean.size(), field + ".cov");
    return GaussianMeasure(std::move(mean), std::move(cov));
}

TargetMeasure target_from(const json& j) {
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
        throw DomainError("target: needs a string field 'kind'");
    const std::string kind = j["kind"];
    if (kind == "gaussian") return TargetMeasure(gaussian_from(j, "target"));
    if (kind == "mixture") {
        if (!j.contains("components") || !j["components"].is_array())
            throw DomainError("target.components: expected an array");
        std::vector<MixtureComponent> comps;
        for (std::size_t k = 0; k < j["components"].size(); ++k) {
            const json& c = j["components"][k];
            const std::string f = "target.components[" + std::to_string(k) + "]";
            if (!c.contains("weight") || !c["weight"].is_number()) throw DomainError(f + ".weight: expected a number");
            comps.push_back({c["weight"].get<double>(), gaussian_from(c, f)});
        }
        return TargetMeasure(GaussianMixture(std::move(comps)));
    }
    if (kind == "potential-ref") {
        if (!j.contains("name") || !j["name"].is_string()) throw DomainError("target.name: expected a string");
        const long dim = j.value("dim", 1L);
        if (dim < 1) throw DomainError("target.dim: must be >= 1");
        return TargetMeasure(builtin_potential(j["name"].get<std::string>(), dim));
    }
    throw DomainError("target.kind: unknown kind '" + kind + "'");
}

}  // namespace

TargetMeasure parse_target(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw DomainError(std::string("target: malformed JSON: ") + e.what());
    }
    return target_from(j);
}

ConfigResult validate_config_text(const std::string& text) {
    ConfigResult res;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        res.errors.push_back(std::string("malformed JSON: ") + e.what());
        return res;
    }
    if (!j.is_object()) {
        res.errors.push_back("config: top level must be an object");
        return res;
    }
    ExperimentConfig cfg;
    static const std::set<std::string> known{"target", "perspective", "dt",       "horizon", "eps_clip",
                                             "paths",  "particles",   "budget",   "export_paths", "eta",
                                             "alpha",  "rgd_steps",   "level",    "seed",    "out",
                                             "format", "workers"};
    for (const auto& [k, v] : j.items())
        if (!known.count(k)) res.warnings.push_back("unknown key '" + k + "' ignored");

    auto positive_real = [&](const char* key, double& dst, bool strict = true) {
        if (!j.contains(key)) return;
        if (!j[key].is_number()) {
            res.errors.push_back(std::string(key) + ": expected a number");
            return;
        }
        const double v = j[key].get<double>();
        if (strict ? !(v > 0.0) : !(v >= 0.0))
            res.errors.push_back(std::string(key) + ": must be " + (strict ? "> 0" : ">= 0") + ", got " +
                                 std::to_string(v));
        else
            dst = v;
    };
    auto positive_count = [&](const char* key, auto& dst) {
        if (!j.contains(key)) return;
        if (!j[key].is_number_integer() || j[key].get<long long>() <= 0) {
            res.errors.push_back(std::string(key) + ": expected a positive integer");
            return;
        }
        dst = static_cast<std::remove_reference_t<decltype(dst)>>(j[key].get<long long>());
    };

    if (!j.contains("target")) {
        res.errors.push_back("target: missing");
    } else {
        try {
            cfg.target = target_from(j["target"]);
            cfg.target_json = j["target"].dump();
        } catch (const Error& e) {
            res.errors.push_back(e.what());
        }
    }
    if (j.contains("perspective")) {
        static const std::set<std::string> ok{"all", "1-2", "1-3", "1-4", "1-5", "sl",
                                              "channel", "particles", "backward", "polchinski", "rgd"};
        if (!j["perspective"].is_string() || !ok.count(j["perspective"].get<std::string>()))
            res.errors.push_back("perspective: unknown value");
        else
            cfg.perspective = j["perspective"];
    }
    positive_real("dt", cfg.dt);
    positive_real("horizon", cfg.horizon);
    positive_real("eps_clip", cfg.eps_clip);
    positive_real("eta", cfg.eta);
    positive_real("alpha", cfg.alpha);
    positive_real("level", cfg.level);
    positive_count("paths", cfg.paths);
    positive_count("particles", cfg.particles);
    positive_count("budget", cfg.budget);
    positive_count("export_paths", cfg.export_paths);
    positive_count("rgd_steps", cfg.rgd_steps);
    positive_count("workers", cfg.workers);
    if (cfg.eps_clip >= 0.5) res.errors.push_back("eps_clip: must be < 0.5");
    if (cfg.level >= 1.0) res.errors.push_back("level: must be < 1");
    if (cfg.dt > cfg.horizon) res.errors.push_back("dt: must not exceed horizon");
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned())
            res.errors.push_back("seed: expected a non-negative integer");
        else {
            cfg.seed = j["seed"].get<std::uint64_t>();
            cfg.seed_given = true;
        }
    }
    if (j.contains("out")) {
        if (!j["out"].is_string())
            res.errors.push_back("out: expected a string");
        else
            cfg.out = j["out"];
    }
    if (j.contains("format")) {
        if (!j["format"].is_string() || (j["format"] != "json" && j["format"] != "csv"))
            res.errors.push_back("format: expected 'json' or 'csv'");
        else
            cfg.format = j["format"];
    }
    if (res.errors.empty()) res.config = std::move(cfg);
    return res;
}

ConfigResult validate_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        ConfigResult r;
        r.errors.push_back("cannot read config file '" + path + "'");
        return r;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return validate_config_text(ss.str());
}

std::string config_to_json(const ExperimentConfig& c) {
    json j;
    j["target"] = c.target_json.empty() ? json(nullptr) : json::parse(c.target_json);
    j["perspective"] = c.perspective;
    j["dt"] = c.dt;
    j["horizon"] = c.horizon;
    j["eps_clip"] = c.eps_clip;
    j["paths"] = c.paths;
    j["particles"] = c.particles;
    j["budget"] = c.budget;
    j["export_paths"] = c.export_paths;
    j["eta"] = c.eta;
    j["alpha"] = c.alpha;
    j["rgd_steps"] = c.rgd_steps;
    j["level"] = c.level;
    j["seed"] = c.seed;
    j["out"] = c.out;
    j["format"] = c.format;
    j["workers"] = c.workers;
    return j.dump(2);
}

}  // namespace sloc
