#include "gg1ipa/models.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gg1ipa {

namespace {

constexpr int kSupGrid = 33;
constexpr std::size_t kMeanProbes = 20000;

void check_xi(double xi) {
    if (!(xi >= 0.0 && xi < 1.0)) throw std::invalid_argument("uniform variate must lie in [0, 1)");
}

void check_range(Interval r) {
    if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi)
        throw std::invalid_argument("parameter interval must be finite with lo <= hi");
}

double unit_exponential(double xi) { return -std::log1p(-xi); }

}  // namespace

std::string_view to_string(ParameterKind kind) {
    switch (kind) {
        case ParameterKind::service_theta: return "service-theta";
        case ParameterKind::speed_nu: return "speed-nu";
        case ParameterKind::arrival_alpha: return "arrival-alpha";
    }
    return "unknown";
}

ParameterKind parameter_kind_from_string(std::string_view name) {
    if (name == "service-theta") return ParameterKind::service_theta;
    if (name == "speed-nu") return ParameterKind::speed_nu;
    if (name == "arrival-alpha") return ParameterKind::arrival_alpha;
    throw std::invalid_argument("unknown parameter kind '" + std::string(name) + "'");
}

ServiceModel ServiceModel::exponential_scale(Interval theta_range) {
    check_range(theta_range);
    return ServiceModel(ServiceFamily::exponential_scale, theta_range, "exponential-scale");
}

ServiceModel ServiceModel::deterministic_scale(Interval theta_range) {
    check_range(theta_range);
    return ServiceModel(ServiceFamily::deterministic_scale, theta_range, "deterministic-scale");
}

ServiceModel ServiceModel::weibull_scale(double shape, Interval theta_range) {
    check_range(theta_range);
    if (!(shape > 0.0) || !std::isfinite(shape)) throw std::invalid_argument("weibull shape must be > 0");
    ServiceModel m(ServiceFamily::weibull_scale, theta_range, "weibull-scale");
    m.shape_ = shape;
    return m;
}

ServiceModel ServiceModel::general(GeneralServiceFamily family, Interval theta_range) {
    check_range(theta_range);
    if (!family.inverse_cdf || !family.cdf_dx || !family.cdf_dtheta)
        throw std::invalid_argument("general service family needs inverse_cdf, cdf_dx and cdf_dtheta");
    std::string name = family.name.empty() ? "general-inverse-cdf" : family.name;
    ServiceModel m(ServiceFamily::general_inverse_cdf, theta_range, std::move(name));
    m.general_ = std::move(family);
    return m;
}

ServiceModel ServiceModel::exponential_rate(Interval theta_range) {
    if (!(theta_range.lo > 0.0)) throw std::invalid_argument("exponential rate must be > 0");
    GeneralServiceFamily f;
    f.name = "exponential-rate";
    f.inverse_cdf = [](double xi, double theta) { return unit_exponential(xi) / theta; };
    f.cdf_dx = [](double x, double theta) { return theta * std::exp(-theta * x); };
    f.cdf_dtheta = [](double x, double theta) { return x * std::exp(-theta * x); };
    // sigma = eta / theta  =>  sigma'' = 2 eta / theta^3 = 2 sigma / theta^2
    f.second_derivative = [](double sigma, double theta) { return 2.0 * sigma / (theta * theta); };
    f.mean = [](double theta) { return 1.0 / theta; };
    return general(std::move(f), theta_range);
}

ServiceModel ServiceModel::power_scale(double exponent, Interval theta_range) {
    if (!(theta_range.lo > 0.0)) throw std::invalid_argument("power-scale theta must be > 0");
    if (!std::isfinite(exponent) || exponent == 0.0) throw std::invalid_argument("power-scale exponent must be nonzero");
    GeneralServiceFamily f;
    f.name = "power-scale";
    // F(x, theta) = 1 - exp(-x / theta^p)
    f.inverse_cdf = [exponent](double xi, double theta) { return std::pow(theta, exponent) * unit_exponential(xi); };
    f.cdf_dx = [exponent](double x, double theta) {
        const double s = std::pow(theta, exponent);
        return std::exp(-x / s) / s;
    };
    f.cdf_dtheta = [exponent](double x, double theta) {
        const double s = std::pow(theta, exponent);
        return -std::exp(-x / s) * x * exponent / (s * theta);
    };
    // sigma = theta^p eta  =>  sigma'' = p (p - 1) theta^(p-2) eta = p (p - 1) sigma / theta^2
    f.second_derivative = [exponent](double sigma, double theta) {
        return exponent * (exponent - 1.0) * sigma / (theta * theta);
    };
    f.mean = [exponent](double theta) { return std::pow(theta, exponent); };
    ServiceModel m = general(std::move(f), theta_range);
    m.shape_ = exponent;
    return m;
}

double ServiceModel::base_sample(double xi) const {
    check_xi(xi);
    switch (family_) {
        case ServiceFamily::exponential_scale: return unit_exponential(xi);
        case ServiceFamily::deterministic_scale: return 1.0;
        case ServiceFamily::weibull_scale: return std::pow(unit_exponential(xi), 1.0 / shape_);
        case ServiceFamily::general_inverse_cdf: break;
    }
    throw std::logic_error("base_sample is only defined for scale families");
}

double ServiceModel::sample(double xi, double theta) const {
    check_xi(xi);
    if (is_scale_family()) return theta * base_sample(xi);
    return general_.inverse_cdf(xi, theta);
}

double ServiceModel::derivative(double sigma, double theta) const {
    if (is_scale_family()) {
        if (!(theta > 0.0)) throw std::invalid_argument("scale family derivative requires theta > 0");
        return sigma / theta;
    }
    const double density = general_.cdf_dx(sigma, theta);
    if (!(density > 0.0)) throw std::invalid_argument("service time outside the support of the density");
    return -general_.cdf_dtheta(sigma, theta) / density;
}

bool ServiceModel::has_second_derivative() const {
    return is_scale_family() || static_cast<bool>(general_.second_derivative);
}

double ServiceModel::second_derivative(double sigma, double theta) const {
    if (is_scale_family()) return 0.0;
    if (!general_.second_derivative)
        throw std::invalid_argument("service family '" + name_ + "' has no closed-form second derivative");
    return general_.second_derivative(sigma, theta);
}

std::pair<double, double> ServiceModel::sup_sample(double xi) const {
    if (is_scale_family()) return {range_.hi * base_sample(xi), range_.hi};
    check_xi(xi);
    double best = -1.0;
    double arg = range_.lo;
    for (int i = 0; i < kSupGrid; ++i) {
        const double theta = i + 1 == kSupGrid ? range_.hi : range_.lo + (range_.hi - range_.lo) * i / (kSupGrid - 1);
        const double s = general_.inverse_cdf(xi, theta);
        if (s > best) {
            best = s;
            arg = theta;
        }
    }
    return {best, arg};
}

double ServiceModel::mean(double theta) const {
    switch (family_) {
        case ServiceFamily::exponential_scale:
        case ServiceFamily::deterministic_scale: return theta;
        case ServiceFamily::weibull_scale: return theta * std::tgamma(1.0 + 1.0 / shape_);
        case ServiceFamily::general_inverse_cdf: break;
    }
    if (general_.mean) return general_.mean(theta);
    RandomStream probe(0x5eed, 0, StreamChannel::probe);
    double acc = 0.0;
    for (std::size_t i = 0; i < kMeanProbes; ++i) acc += general_.inverse_cdf(probe.next(), theta);
    return acc / static_cast<double>(kMeanProbes);
}

double inverse_transform(const ServiceModel& model, double xi, double theta) {
    if (!model.theta_range().contains(theta)) throw std::invalid_argument("theta outside its interval");
    return model.sample(xi, theta);
}

double service_derivative(const ServiceModel& model, double sigma, double theta) {
    if (sigma < 0.0) throw std::invalid_argument("service time must be >= 0");
    return model.derivative(sigma, theta);
}

double service_second_derivative(const ServiceModel& model, double sigma, double theta) {
    return model.second_derivative(sigma, theta);
}

ArrivalModel ArrivalModel::poisson(double rate) {
    if (!(rate > 0.0) || !std::isfinite(rate)) throw std::invalid_argument("arrival rate must be > 0");
    return ArrivalModel(ArrivalFamily::poisson, rate);
}

ArrivalModel ArrivalModel::deterministic(double rate) {
    if (!(rate > 0.0) || !std::isfinite(rate)) throw std::invalid_argument("arrival rate must be > 0");
    return ArrivalModel(ArrivalFamily::deterministic, rate);
}

ArrivalModel ArrivalModel::erlang(int phases, double rate) {
    if (!(rate > 0.0) || !std::isfinite(rate)) throw std::invalid_argument("arrival rate must be > 0");
    if (phases < 1) throw std::invalid_argument("erlang phases must be >= 1");
    ArrivalModel m(ArrivalFamily::erlang, rate);
    m.phases_ = phases;
    return m;
}

ArrivalModel ArrivalModel::uniform(double lo, double hi) {
    if (!(lo >= 0.0) || !(hi > lo) || !std::isfinite(hi))
        throw std::invalid_argument("uniform inter-arrival bounds must satisfy 0 <= lo < hi");
    ArrivalModel m(ArrivalFamily::uniform, 2.0 / (lo + hi));
    m.lo_ = lo;
    m.hi_ = hi;
    return m;
}

std::string_view ArrivalModel::name() const {
    switch (family_) {
        case ArrivalFamily::poisson: return "poisson";
        case ArrivalFamily::deterministic: return "deterministic";
        case ArrivalFamily::erlang: return "erlang";
        case ArrivalFamily::uniform: return "uniform";
    }
    return "unknown";
}

double ArrivalModel::sample(RandomStream& stream) const {
    switch (family_) {
        case ArrivalFamily::poisson: return unit_exponential(stream.next()) / rate_;
        case ArrivalFamily::deterministic: return 1.0 / rate_;
        case ArrivalFamily::erlang: {
            double acc = 0.0;
            for (int i = 0; i < phases_; ++i) acc += unit_exponential(stream.next());
            return acc / (phases_ * rate_);
        }
        case ArrivalFamily::uniform: return lo_ + (hi_ - lo_) * stream.next();
    }
    throw std::logic_error("unknown arrival family");
}

double ArrivalModel::hazard(double t) const {
    if (t < 0.0) return 0.0;
    switch (family_) {
        case ArrivalFamily::poisson: return rate_;
        case ArrivalFamily::deterministic: return 0.0;
        case ArrivalFamily::erlang: {
            // pdf / survival with beta = phases * rate; the e^{-beta t} factors cancel.
            const double beta = phases_ * rate_;
            const double x = beta * t;
            double term = 1.0;
            double tail = 1.0;
            for (int i = 1; i < phases_; ++i) {
                term *= x / i;
                tail += term;
            }
            return beta * term / tail;
        }
        case ArrivalFamily::uniform:
            if (t < lo_) return 0.0;
            return t < hi_ ? 1.0 / (hi_ - t) : 0.0;
    }
    throw std::logic_error("unknown arrival family");
}

StabilityReport stability_check(const ArrivalModel& arrivals, const ServiceModel& services,
                                Interval theta_range, std::size_t n_probe, std::uint64_t seed) {
    if (n_probe < 1000) throw std::invalid_argument("stability_check needs n_probe >= 1000");
    check_range(theta_range);
    StabilityReport r;
    if (services.is_scale_family()) {
        r.load_estimate = arrivals.rate() * services.mean(theta_range.hi);
    } else {
        RandomStream probe(seed, 0, StreamChannel::probe);
        double sum = 0.0;
        double sumsq = 0.0;
        for (std::size_t i = 0; i < n_probe; ++i) {
            const double xi = probe.next();
            double best = 0.0;
            for (int g = 0; g < kSupGrid; ++g) {
                const double theta = g + 1 == kSupGrid ? theta_range.hi
                                                       : theta_range.lo + (theta_range.hi - theta_range.lo) * g / (kSupGrid - 1);
                best = std::max(best, services.sample(xi, theta));
            }
            sum += best;
            sumsq += best * best;
        }
        const double n = static_cast<double>(n_probe);
        const double mean = sum / n;
        const double var = std::max(0.0, (sumsq - n * mean * mean) / (n - 1.0));
        r.load_estimate = arrivals.rate() * mean;
        r.std_error = arrivals.rate() * std::sqrt(var / n);
    }
    r.stable = r.load_estimate < 1.0;
    return r;
}

StabilityReport stability_check(const ArrivalModel& arrivals, const ServiceModel& services,
                                ParameterKind kind, Interval range, double service_theta,
                                std::size_t n_probe, std::uint64_t seed) {
    if (kind == ParameterKind::service_theta) return stability_check(arrivals, services, range, n_probe, seed);
    if (n_probe < 1000) throw std::invalid_argument("stability_check needs n_probe >= 1000");
    check_range(range);
    if (!(range.lo > 0.0)) throw std::invalid_argument("speed and arrival-scale ranges must be positive");
    StabilityReport r;
    const double mean = services.mean(service_theta);
    // Worst case sits at the slowest server or the densest arrivals.
    r.load_estimate = arrivals.rate() * mean / range.lo;
    r.stable = r.load_estimate < 1.0;
    return r;
}

}  // namespace gg1ipa
