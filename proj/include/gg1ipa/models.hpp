#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include "gg1ipa/random.hpp"

namespace gg1ipa {

/// Which input the derivative is taken with respect to.
enum class ParameterKind { service_theta, speed_nu, arrival_alpha };

std::string_view to_string(ParameterKind kind);
ParameterKind parameter_kind_from_string(std::string_view name);

/// Closed parameter interval.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double x) const { return x >= lo && x <= hi; }
};

/// Raised when the offered load is not strictly below one.
class UnstableInput : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ServiceFamily { exponential_scale, deterministic_scale, weibull_scale, general_inverse_cdf };

/// Callables describing a service family that is not a pure scale family.
/// `cdf_dx` and `cdf_dtheta` are the partials of F(x, theta); `second_derivative`
/// maps (sigma, theta) to d^2 sigma / d theta^2 and may be left empty.
struct GeneralServiceFamily {
    std::string name;
    std::function<double(double xi, double theta)> inverse_cdf;
    std::function<double(double x, double theta)> cdf_dx;
    std::function<double(double x, double theta)> cdf_dtheta;
    std::function<double(double sigma, double theta)> second_derivative;
    std::function<double(double theta)> mean;
};

/// Service-time distribution F(., theta) sampled by inverse transform
/// sigma = G(xi, theta) = sup{x >= 0 : F(x, theta) <= xi}.
class ServiceModel {
public:
    static ServiceModel exponential_scale(Interval theta_range);
    static ServiceModel deterministic_scale(Interval theta_range);
    static ServiceModel weibull_scale(double shape, Interval theta_range);
    /// Any family given by its inverse CDF and CDF partials.
    static ServiceModel general(GeneralServiceFamily family, Interval theta_range);
    /// Exponential with rate theta: F(x, theta) = 1 - exp(-theta x).
    static ServiceModel exponential_rate(Interval theta_range);
    /// sigma = theta^p * eta with eta ~ Exp(1).
    static ServiceModel power_scale(double exponent, Interval theta_range);

    ServiceFamily family() const { return family_; }
    bool is_scale_family() const { return family_ != ServiceFamily::general_inverse_cdf; }
    const Interval& theta_range() const { return range_; }
    const std::string& name() const { return name_; }
    double shape() const { return shape_; }

    /// Base variate eta with sigma = theta * eta (scale families only).
    double base_sample(double xi) const;
    double sample(double xi, double theta) const;
    double derivative(double sigma, double theta) const;
    bool has_second_derivative() const;
    double second_derivative(double sigma, double theta) const;
    /// sup over the theta range of G(xi, theta), with the maximizing theta.
    std::pair<double, double> sup_sample(double xi) const;
    /// E sigma(theta); Monte Carlo over a fixed probe stream for general families.
    double mean(double theta) const;

private:
    ServiceModel(ServiceFamily family, Interval range, std::string name)
        : family_(family), range_(range), name_(std::move(name)) {}

    ServiceFamily family_;
    Interval range_;
    std::string name_;
    double shape_ = 1.0;
    GeneralServiceFamily general_;
};

double inverse_transform(const ServiceModel& model, double xi, double theta);
double service_derivative(const ServiceModel& model, double sigma, double theta);
double service_second_derivative(const ServiceModel& model, double sigma, double theta);

enum class ArrivalFamily { poisson, deterministic, erlang, uniform };

/// Renewal input. Unscaled inter-arrival times eta_n have mean 1 / rate; a scale
/// factor alpha (arrival-scale parameter) stretches them to tau_n = alpha * eta_n.
class ArrivalModel {
public:
    static ArrivalModel poisson(double rate);
    static ArrivalModel deterministic(double rate);
    static ArrivalModel erlang(int phases, double rate);
    /// eta uniform on [lo, hi].
    static ArrivalModel uniform(double lo, double hi);

    ArrivalFamily family() const { return family_; }
    std::string_view name() const;
    double rate() const { return rate_; }
    int phases() const { return phases_; }
    double lo() const { return lo_; }
    double hi() const { return hi_; }
    /// Whether lambda is used as given rather than estimated from the path.
    bool intensity_known() const {
        return family_ == ArrivalFamily::poisson || family_ == ArrivalFamily::deterministic;
    }
    /// Next unscaled inter-arrival time.
    double sample(RandomStream& stream) const;
    /// Hazard rate of the unscaled inter-arrival time at t. Zero for deterministic
    /// arrivals, whose distribution has no density.
    double hazard(double t) const;

private:
    ArrivalModel(ArrivalFamily family, double rate) : family_(family), rate_(rate) {}

    ArrivalFamily family_;
    double rate_;
    int phases_ = 1;
    double lo_ = 0.0;
    double hi_ = 0.0;
};

struct StabilityReport {
    double load_estimate = 0.0;
    double std_error = 0.0;
    bool stable = false;
};

/// Estimates lambda * E[sup_{theta in range} sigma(xi, theta)]; stable iff < 1.
/// Exact for scale families, Monte Carlo over n_probe draws otherwise.
StabilityReport stability_check(const ArrivalModel& arrivals, const ServiceModel& services,
                                Interval theta_range, std::size_t n_probe, std::uint64_t seed);

/// Worst-case load over a speed or arrival-scale range at fixed service theta.
StabilityReport stability_check(const ArrivalModel& arrivals, const ServiceModel& services,
                                ParameterKind kind, Interval range, double service_theta,
                                std::size_t n_probe, std::uint64_t seed);

}  // namespace gg1ipa
