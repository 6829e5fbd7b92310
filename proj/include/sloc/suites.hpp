#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "sloc/config.hpp"

namespace sloc {

struct Check {
    std::string name;
    double observed = 0.0;
    double tolerance = 0.0;
    /// "<=" or ">=": how observed must compare with tolerance.
    std::string relation = "<=";
    bool pass = false;
    double runtime_s = 0.0;
    std::string detail;
};

struct Report {
    std::string suite;
    std::vector<Check> checks;

    bool pass() const;
    /// Times fn and records its check; an exception becomes a failed check carrying the message.
    void run(const std::string& name, const std::function<Check()>& fn);
    void merge(const Report& other);
};

/// JSON with runtimes; CSV omits them so reruns are byte-identical.
std::string report_to_json(const Report& r);
std::string report_to_csv(const Report& r);
Report report_from_json(const std::string& text);

/// Cross-perspective equivalence checks for the configured (Gaussian or mixture) target.
Report run_equiv(const ExperimentConfig& cfg);
/// Contraction, kernel identity and entropic stability.
Report run_rgd(const ExperimentConfig& cfg);
/// Sinkhorn, objective shift, Markov factorization and Girsanov energy.
Report run_bridge(const ExperimentConfig& cfg);
/// Schedule identities; writes the (τ, λ, Λ, γ, factor) table to `table`.
Report run_lsi(const ExperimentConfig& cfg, std::ostream& table);

/// Writes trajectories of the selected perspective as CSV.
void run_simulate(const ExperimentConfig& cfg, std::ostream& csv);

}  // namespace sloc
