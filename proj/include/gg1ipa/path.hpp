#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "gg1ipa/models.hpp"

namespace gg1ipa {

/// One arrival of the simulated queue.
struct CustomerRecord {
    double w = 0.0;       // workload just before the arrival, W(T_k-)
    double sigma = 0.0;   // service requirement
    double d = 0.0;       // dW/dparameter just after the arrival
    double d_before = 0.0;  // dW/dparameter just before the arrival
    double d2 = 0.0;      // second derivative (service-theta only)
    double tau = 0.0;     // time to the next arrival
    double w_next = 0.0;  // W(T_{k+1}-)
    bool idle_before = false;

    /// W(T_k) = w + sigma.
    double w_after() const { return w + sigma; }
};

struct CustomerPath {
    std::vector<CustomerRecord> records;
    ParameterKind parameter_kind = ParameterKind::service_theta;
    double parameter = 0.0;
    double speed = 1.0;        // drain rate of the workload
    double lambda_hat = 0.0;   // model intensity when known, else n / elapsed
    double elapsed = 0.0;      // sum of tau over the records
    bool has_second_derivative = false;

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }
    /// n / elapsed, regardless of how lambda_hat was set.
    double empirical_intensity() const;
    /// Time the server spends working between arrival k and arrival k + 1.
    double busy_time(std::size_t k) const;
};

/// One simulated configuration: input models plus the parameter being varied.
struct Scenario {
    ArrivalModel arrivals = ArrivalModel::poisson(1.0);
    ServiceModel services = ServiceModel::exponential_scale({0.0, 0.0});
    ParameterKind kind = ParameterKind::service_theta;
    double value = 0.0;          // theta, nu or alpha
    double service_theta = 1.0;  // fixed service parameter when kind != service_theta

    double theta() const { return kind == ParameterKind::service_theta ? value : service_theta; }
    double speed() const { return kind == ParameterKind::speed_nu ? value : 1.0; }
    double time_scale() const { return kind == ParameterKind::arrival_alpha ? value : 1.0; }
    /// Arrival intensity at this parameter value.
    double intensity() const { return arrivals.rate() / time_scale(); }
    double offered_load() const { return intensity() * services.mean(theta()) / speed(); }
    /// Same scenario with the varied parameter moved to `v`.
    Scenario at(double v) const {
        Scenario s = *this;
        s.value = v;
        return s;
    }
};

struct SimulationOptions {
    std::size_t customers = 0;
    std::optional<std::size_t> warmup;  // default: default_warmup()
    std::uint64_t seed = 0;
    std::uint64_t replication = 0;
    bool check_stability = true;
};

/// 10 / (1 - rho)^2 customers; the path starts empty, not stationary.
std::size_t default_warmup(double offered_load);

/// Runs the Lindley recursion for the workload and its parameter derivative(s)
///
///   service-theta: d_k = d_{k-1} 1{w_k > 0} + sigma'_k, d2 likewise with sigma''_k
///   speed-nu:      d_k = (d_{k-1} - tau_{k-1}) 1{w_k > 0}
///   arrival-alpha: d_k = (d_{k-1} - eta_{k-1}) 1{w_k > 0}
///
/// The last two follow from differentiating w_k = (w_{k-1} + sigma_{k-1} - nu tau_{k-1})^+
/// and w_k = (w_{k-1} + sigma_{k-1} - alpha eta_{k-1})^+ on {w_k > 0}; on {w_k = 0}
/// the workload is pinned at zero and so is its derivative.
///
/// Service variates and inter-arrival variates come from separate counter-based
/// streams keyed by (seed, replication), so paths at different parameter values
/// share their randomness. Throws UnstableInput when the realized load over the
/// horizon reaches one and `check_stability` is set.
CustomerPath simulate_path(const Scenario& scenario, const SimulationOptions& options);

CustomerPath simulate_path(const ArrivalModel& arrivals, const ServiceModel& services,
                           ParameterKind kind, double value, std::size_t n, std::uint64_t seed,
                           std::size_t warmup);

/// Path of the dominating system with sigma*_n = sup_theta sigma_n(theta), driven by
/// the same streams as simulate_path. n = 0 yields an empty path.
CustomerPath simulate_star_path(const Scenario& scenario, const SimulationOptions& options);

}  // namespace gg1ipa
