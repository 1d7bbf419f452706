#include "gg1ipa/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace gg1ipa {

std::string_view to_string(Stencil stencil) {
    switch (stencil) {
        case Stencil::forward: return "forward";
        case Stencil::backward: return "backward";
        case Stencil::central: return "central";
        case Stencil::second_central: return "second-central";
        case Stencil::second_symmetric: return "second-symmetric";
    }
    return "unknown";
}

Stencil stencil_from_string(std::string_view name) {
    if (name == "forward") return Stencil::forward;
    if (name == "backward") return Stencil::backward;
    if (name == "central") return Stencil::central;
    if (name == "second-central") return Stencil::second_central;
    if (name == "second-symmetric") return Stencil::second_symmetric;
    throw std::invalid_argument("unknown stencil '" + std::string(name) + "'");
}

bool is_second_order(Stencil stencil) {
    return stencil == Stencil::second_central || stencil == Stencil::second_symmetric;
}

double interval_integral(const CustomerRecord& r, double speed, const BVFunctional& f) {
    const double top = r.w_after();
    if (r.w_next > 0.0) return (f.primitive(top) - f.primitive(r.w_next)) / speed;
    const double busy = top / speed;
    return f.primitive(top) / speed + f.eval(0.0) * (r.tau - busy);
}

BatchSummary time_average(const CustomerPath& path, const BVFunctional& f, std::size_t batches) {
    std::vector<double> area(path.size());
    std::vector<double> taus(path.size());
    for (std::size_t k = 0; k < path.size(); ++k) {
        area[k] = interval_integral(path.records[k], path.speed, f);
        taus[k] = path.records[k].tau;
    }
    return batch_ratio(area, taus, batches);
}

namespace {

struct Point {
    double offset;  // multiple of h
    double weight;  // multiple of 1/h or 1/h^2
};

std::vector<Point> stencil_points(Stencil stencil) {
    switch (stencil) {
        case Stencil::forward: return {{1.0, 1.0}, {0.0, -1.0}};
        case Stencil::backward: return {{0.0, 1.0}, {-1.0, -1.0}};
        case Stencil::central: return {{1.0, 0.5}, {-1.0, -0.5}};
        case Stencil::second_central: return {{2.0, 1.0}, {1.0, -2.0}, {0.0, 1.0}};
        case Stencil::second_symmetric: return {{1.0, 1.0}, {0.0, -2.0}, {-1.0, 1.0}};
    }
    return {};
}

template <typename OptionsFor>
FDEstimate run_stencil(const Scenario& sc, const SimulationOptions& options, const BVFunctional& f, double h,
                       Stencil stencil, std::size_t batches, OptionsFor&& options_for) {
    if (!(h > 0.0)) throw std::invalid_argument("finite-difference step must be > 0");
    const double scale = is_second_order(stencil) ? 1.0 / (h * h) : 1.0 / h;

    FDEstimate out;
    out.h = h;
    out.stencil = stencil;
    out.n_customers = options.customers;
    double value = 0.0;
    std::vector<double> per_batch;
    const auto points = stencil_points(stencil);
    if (sc.kind == ParameterKind::service_theta) {
        for (const Point& p : points)
            if (!sc.services.theta_range().contains(sc.value + p.offset * h))
                throw std::invalid_argument("stencil point " + std::to_string(sc.value + p.offset * h) +
                                            " leaves the theta interval");
    }
    std::size_t index = 0;
    for (const Point& p : points) {
        const Scenario at = sc.at(sc.value + p.offset * h);
        const CustomerPath path = simulate_path(at, options_for(index++));
        const BatchSummary ta = time_average(path, f, batches);
        value += p.weight * ta.mean;
        if (per_batch.empty()) per_batch.assign(ta.batch_means.size(), 0.0);
        for (std::size_t b = 0; b < per_batch.size(); ++b) per_batch[b] += p.weight * ta.batch_means[b];
    }
    for (double& v : per_batch) v *= scale;
    out.value = value * scale;
    out.std_error = std_error_of_mean(per_batch);
    out.batch_values = std::move(per_batch);
    return out;
}

// Warmup is fixed from the centre point so every stencil point discards the same customers.
SimulationOptions aligned(const Scenario& sc, SimulationOptions options) {
    if (!options.warmup) options.warmup = default_warmup(sc.offered_load());
    return options;
}

}  // namespace

FDEstimate finite_difference(const Scenario& sc, const SimulationOptions& options, const BVFunctional& f, double h,
                             Stencil stencil, std::size_t batches) {
    const SimulationOptions o = aligned(sc, options);
    return run_stencil(sc, o, f, h, stencil, batches, [&](std::size_t) { return o; });
}

FDEstimate finite_difference_independent(const Scenario& sc, const SimulationOptions& options,
                                         const BVFunctional& f, double h, Stencil stencil, std::size_t batches) {
    const SimulationOptions o = aligned(sc, options);
    return run_stencil(sc, o, f, h, stencil, batches, [&](std::size_t i) {
        SimulationOptions oi = o;
        oi.replication = o.replication * 7919 + 1000003 * (i + 1);
        return oi;
    });
}

Mm1Workload::Mm1Workload(double lambda, double theta) : lambda_(lambda), theta_(theta) {
    if (!(lambda > 0.0) || !(theta > 0.0)) throw std::invalid_argument("M/M/1 needs lambda, theta > 0");
    if (!(lambda * theta < 1.0)) throw UnstableInput("M/M/1 with rho >= 1 has no stationary workload");
}

double Mm1Workload::mean() const { return lambda_ * theta_ * theta_ / (1.0 - rho()); }

double Mm1Workload::d_mean() const {
    const double u = rho();
    return lambda_ * theta_ * (2.0 - u) / ((1.0 - u) * (1.0 - u));
}

double Mm1Workload::d2_mean() const {
    const double g = 1.0 - rho();
    return 2.0 * lambda_ / (g * g * g);
}

double Mm1Workload::tail(double x) const {
    if (x <= 0.0) return 1.0;
    return rho() * std::exp(-(1.0 / theta_ - lambda_) * x);
}

double Mm1Workload::d_tail(double x) const {
    if (x <= 0.0) return 0.0;
    return lambda_ * std::exp(-(1.0 / theta_ - lambda_) * x) * (1.0 + x / theta_);
}

double Mm1Workload::half_second_moment() const {
    const double g = 1.0 - rho();
    return lambda_ * theta_ * theta_ * theta_ / (g * g);
}

double Mm1Workload::d_half_second_moment() const {
    const double u = rho();
    const double g = 1.0 - u;
    return lambda_ * theta_ * theta_ * (3.0 - u) / (g * g * g);
}

double Mm1Workload::d2_half_second_moment() const {
    const double g = 1.0 - rho();
    return 6.0 * lambda_ * theta_ / (g * g * g * g);
}

Mm1Moments mm1_workload_moments(double lambda, double theta) {
    const Mm1Workload w(lambda, theta);
    return Mm1Moments{w.mean(), w.d_mean(), w.d2_mean(), w};
}

double mm1_speed_mean(double lambda, double theta, double nu) {
    const double g = nu - lambda * theta;
    if (!(g > 0.0)) throw UnstableInput("lambda theta must be below nu");
    return lambda * theta * theta / g;
}

double mm1_speed_d_mean(double lambda, double theta, double nu) {
    const double g = nu - lambda * theta;
    if (!(g > 0.0)) throw UnstableInput("lambda theta must be below nu");
    return -lambda * theta * theta / (g * g);
}

double mm1_scale_mean(double rate, double theta, double alpha) {
    const double g = alpha - rate * theta;
    if (!(g > 0.0)) throw UnstableInput("rate theta must be below alpha");
    return rate * theta * theta / g;
}

double mm1_scale_d_mean(double rate, double theta, double alpha) {
    const double g = alpha - rate * theta;
    if (!(g > 0.0)) throw UnstableInput("rate theta must be below alpha");
    return -rate * theta * theta / (g * g);
}

Dd1ClosedForms dd1_closed_forms(double tau, double theta, double x) {
    if (!(tau > 0.0) || !(theta > 0.0)) throw std::invalid_argument("D/D/1 needs tau, theta > 0");
    if (!(theta < tau)) throw UnstableInput("D/D/1 needs theta < tau");
    Dd1ClosedForms c;
    c.J = theta > x ? (theta - std::max(x, 0.0)) / tau : 0.0;
    if (x <= 0.0) c.J = 1.0;
    c.Jr = (x > 0.0 && theta >= x) ? 1.0 / tau : 0.0;
    c.Jl = (x > 0.0 && theta > x) ? 1.0 / tau : 0.0;
    c.mean_workload = theta * theta / (2.0 * tau);
    c.d_mean = theta / tau;
    return c;
}

}  // namespace gg1ipa
