#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gg1ipa/bv_functional.hpp"
#include "gg1ipa/estimators.hpp"
#include "gg1ipa/oracles.hpp"
#include "gg1ipa/palm_verify.hpp"
#include "gg1ipa/path.hpp"

namespace gg1ipa {

using nlohmann::json;

struct EstimatorSpec {
    std::string op;  // first_order, second_order, speed_derivative, arrival_scale_derivative, classic_ipa
    Side side = Side::two_sided;
    Order order = Order::first;
    Pairing pairing = Pairing::next_arrival;
    bool idle_boundary_term = false;
    bool merge_correction = false;

    std::string label() const;
};

struct OracleSpec {
    enum class Kind { finite_difference, analytic };
    Kind kind = Kind::analytic;
    double h = 0.01;
    bool relative = true;  // step is h * |parameter|
    Stencil stencil = Stencil::central;

    double step(double parameter) const;
};

struct ExperimentConfig {
    Scenario scenario;
    Interval parameter_range;
    json functional_spec;
    BVFunctional functional = BVFunctional::constant(0.0);
    std::vector<EstimatorSpec> estimators;
    std::size_t horizon = 0;
    std::optional<std::size_t> warmup;
    std::size_t replications = 1;
    std::uint64_t seed = 0;
    std::size_t batches = kDefaultBatches;
    std::vector<OracleSpec> oracles;
    std::vector<PalmIdentity> palm_checks;
    /// Normalized config; parsing it again yields the same experiment.
    json document;

    SimulationOptions simulation_options(std::uint64_t replication, bool check_stability = true) const;
};

struct ValidationIssue {
    std::string field;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> errors;
    std::vector<ValidationIssue> warnings;

    bool ok() const { return errors.empty(); }
    json to_json() const;
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<ValidationIssue> issues);
    const std::vector<ValidationIssue>& issues() const { return issues_; }

private:
    std::vector<ValidationIssue> issues_;
};

/// Schema and semantic checks. Never throws on malformed input; with `probe_stability`
/// an offered load at or above one becomes an "unstable" warning.
ValidationReport validate_config(const json& document, bool probe_stability = true);

/// Throws ConfigError listing every problem found.
ExperimentConfig parse_config(const json& document);
json read_json_file(const std::string& path);
ExperimentConfig load_config(const std::string& path);

/// Worst-case offered load over the parameter interval.
StabilityReport config_stability(const ExperimentConfig& config);

/// CRN finite difference for the config's functional at one replication.
FDEstimate finite_difference(const ExperimentConfig& config, double h, Stencil stencil,
                             std::uint64_t replication = 0);

/// Closed-form value of the estimated derivative, when one is known for this
/// combination of models, functional, parameter and order.
std::optional<double> analytic_value(const ExperimentConfig& config, const EstimatorSpec& estimator);

struct RunOptions {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> replications;
    bool force_unstable = false;
    unsigned jobs = 1;
    bool estimators = true;
    bool oracles = true;
    bool palm_checks = true;
};

struct OracleComparison {
    std::string estimator;  // EstimatorSpec::label()
    OracleSpec::Kind kind = OracleSpec::Kind::analytic;
    Stencil stencil = Stencil::central;
    double h = 0.0;
    double value = 0.0;
    double std_error = 0.0;
    double joint_std_error = 0.0;
};

struct ReplicationResult {
    std::size_t replication = 0;
    std::vector<DerivativeEstimate> estimates;  // parallel to config.estimators
    std::vector<FDEstimate> finite_differences;
    std::vector<OracleComparison> comparisons;
    std::vector<PalmCheckReport> palm;
};

struct PooledRow {
    std::string estimator;
    std::string op;
    Side side = Side::two_sided;
    Order order = Order::first;
    double value = 0.0;
    double std_error = 0.0;
    double atom_correction = 0.0;
    std::size_t n_customers = 0;
    std::optional<std::string> oracle;
    double oracle_value = 0.0;
    double oracle_std_error = 0.0;
    double joint_std_error = 0.0;

    double ci_lo() const { return value - 1.96 * std_error; }
    double ci_hi() const { return value + 1.96 * std_error; }
    double oracle_gap() const { return value - oracle_value; }
};

struct PooledPalm {
    PalmIdentity identity = PalmIdentity::inversion;
    double lhs = 0.0;
    double rhs = 0.0;
    double joint_std_error = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct RunResult {
    ExperimentConfig config;
    bool unstable = false;
    std::vector<ReplicationResult> replications;
    std::vector<PooledRow> pooled;
    std::vector<PooledPalm> pooled_palm;
};

/// Runs every replication (up to `jobs` at a time) and pools them. Results are
/// keyed by replication index, so the output does not depend on scheduling.
/// Throws UnstableInput unless forced, OneSidedDerivative or std::invalid_argument
/// when an estimator cannot be applied.
RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

void write_jsonl(const RunResult& result, std::ostream& out);
void write_csv(const RunResult& result, std::ostream& out);

}  // namespace gg1ipa
