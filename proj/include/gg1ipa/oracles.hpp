#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "gg1ipa/batch_means.hpp"
#include "gg1ipa/bv_functional.hpp"
#include "gg1ipa/path.hpp"

namespace gg1ipa {

enum class Stencil {
    forward,           // [J(p+h) - J(p)] / h
    backward,          // [J(p) - J(p-h)] / h
    central,           // [J(p+h) - J(p-h)] / 2h
    second_central,    // [J(p+2h) - 2J(p+h) + J(p)] / h^2, the forward second difference
    second_symmetric,  // [J(p+h) - 2J(p) + J(p-h)] / h^2
};

std::string_view to_string(Stencil stencil);
Stencil stencil_from_string(std::string_view name);
bool is_second_order(Stencil stencil);

struct FDEstimate {
    double value = 0.0;
    double h = 0.0;
    Stencil stencil = Stencil::central;
    double std_error = 0.0;
    std::size_t n_customers = 0;
    std::vector<double> batch_values;
};

/// Integral of f(W(s)) over [T_k, T_{k+1}): the workload falls linearly at `speed`
/// from W(T_k) until it hits zero or the next arrival, then f sits at f(0).
double interval_integral(const CustomerRecord& record, double speed, const BVFunctional& f);

/// Time average (1/T_n) int_0^{T_n} f(W(s)) ds, batched by customer.
BatchSummary time_average(const CustomerPath& path, const BVFunctional& f,
                          std::size_t batches = kDefaultBatches);

/// Finite-difference quotient of the time-average of f(W) in the scenario's
/// parameter. Every stencil point reuses the same seed, replication and warmup, so
/// all of them see identical service and inter-arrival variates.
FDEstimate finite_difference(const Scenario& scenario, const SimulationOptions& options, const BVFunctional& f,
                             double h, Stencil stencil, std::size_t batches = kDefaultBatches);

/// Same quotient with independent streams at each stencil point (variance baseline).
FDEstimate finite_difference_independent(const Scenario& scenario, const SimulationOptions& options,
                                         const BVFunctional& f, double h, Stencil stencil,
                                         std::size_t batches = kDefaultBatches);

/// Stationary workload of the M/M/1 queue, arrival rate lambda, mean service theta.
/// W = 0 with probability 1 - rho, otherwise Exp(1/theta - lambda), rho = lambda theta.
class Mm1Workload {
public:
    Mm1Workload(double lambda, double theta);

    double rho() const { return lambda_ * theta_; }
    /// E W = rho / (1/theta - lambda) = lambda theta^2 / (1 - lambda theta).
    double mean() const;
    /// d/dtheta of mean(): with u = lambda theta, d/dtheta [lambda theta^2 / (1 - u)]
    /// = [2 lambda theta (1 - u) + lambda^2 theta^2] / (1 - u)^2 = lambda theta (2 - u) / (1 - u)^2.
    double d_mean() const;
    /// d/dtheta of d_mean(): writing d_mean = u (2 - u) / (1 - u)^2 as a function of u,
    /// d/du = [2(1 - u)^2 + 2u(2 - u)(1 - u)] / (1 - u)^4 = 2 / (1 - u)^3, so 2 lambda / (1 - u)^3.
    double d2_mean() const;
    /// P(W >= x) = rho exp(-(1/theta - lambda) x) for x > 0.
    double tail(double x) const;
    /// d/dtheta tail(x) = lambda e^{-(1/theta - lambda) x} + lambda theta e^{-(1/theta - lambda) x} x / theta^2
    ///                = lambda e^{-(1/theta - lambda) x} (1 + x / theta).
    double d_tail(double x) const;
    /// E[W^2 / 2] = rho / (1/theta - lambda)^2 = lambda theta^3 / (1 - u)^2.
    double half_second_moment() const;
    /// d/dtheta: 3 lambda theta^2 / (1 - u)^2 + 2 lambda^2 theta^3 / (1 - u)^3 = lambda theta^2 (3 - u) / (1 - u)^3.
    double d_half_second_moment() const;
    /// As a function of u the first derivative is u^2 (3 - u) / (lambda (1 - u)^3), and
    /// d/du [u^2 (3 - u) / (1 - u)^3] = [(6u - 3u^2)(1 - u) + 3u^2 (3 - u)] / (1 - u)^4 = 6u / (1 - u)^4,
    /// so the second derivative is 6 lambda theta / (1 - u)^4.
    double d2_half_second_moment() const;

private:
    double lambda_;
    double theta_;
};

struct Mm1Moments {
    double mean = 0.0;
    double d_mean_dtheta = 0.0;
    double d2_mean_dtheta2 = 0.0;
    Mm1Workload workload;
};

Mm1Moments mm1_workload_moments(double lambda, double theta);

/// M/M/1 mean workload (in work units) at server speed nu: the time-to-drain W / nu
/// is the workload of an M/M/1 queue with mean service theta / nu, so
/// E W = nu * lambda (theta/nu)^2 / (1 - lambda theta / nu) = lambda theta^2 / (nu - lambda theta),
/// and d/dnu E W = -lambda theta^2 / (nu - lambda theta)^2.
double mm1_speed_mean(double lambda, double theta, double nu);
double mm1_speed_d_mean(double lambda, double theta, double nu);

/// Inter-arrival times alpha * eta with eta ~ Exp(rate): lambda = rate / alpha and
/// E W = (rate/alpha) theta^2 / (1 - rate theta / alpha) = rate theta^2 / (alpha - rate theta),
/// d/dalpha E W = -rate theta^2 / (alpha - rate theta)^2.
double mm1_scale_mean(double rate, double theta, double alpha);
double mm1_scale_d_mean(double rate, double theta, double alpha);

/// D/D/1 with inter-arrival tau and service theta < tau. Seen from a uniform time
/// the workload is theta - t for t uniform on [0, tau), clipped at 0, so
///   J = P(W >= x) = ((theta - x) / tau)^+, right derivative 1{theta >= x} / tau,
///   left derivative 1{theta > x} / tau, E W = theta^2 / (2 tau), d/dtheta E W = theta / tau.
struct Dd1ClosedForms {
    double J = 0.0;
    double Jr = 0.0;
    double Jl = 0.0;
    double mean_workload = 0.0;
    double d_mean = 0.0;
};

Dd1ClosedForms dd1_closed_forms(double tau, double theta, double x);

}  // namespace gg1ipa
