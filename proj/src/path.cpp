#include "gg1ipa/path.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace gg1ipa {

double CustomerPath::empirical_intensity() const {
    return elapsed > 0.0 ? static_cast<double>(records.size()) / elapsed : 0.0;
}

double CustomerPath::busy_time(std::size_t k) const {
    const auto& r = records.at(k);
    return (r.w_after() - r.w_next) / speed;
}

std::size_t default_warmup(double offered_load) {
    if (!(offered_load < 1.0)) return 0;
    const double relax = 1.0 / (1.0 - offered_load);
    return static_cast<std::size_t>(std::ceil(10.0 * relax * relax));
}

namespace {

struct ServiceDraw {
    double sigma;
    double d1;
    double d2;
};

template <typename DrawService>
CustomerPath run_recursion(const Scenario& sc, const SimulationOptions& opt, bool want_d2,
                           DrawService&& draw) {
    const std::size_t warmup = opt.warmup.value_or(default_warmup(sc.offered_load()));
    const std::size_t total = warmup + opt.customers;
    const double speed = sc.speed();
    const double scale = sc.time_scale();

    RandomStream service_stream(opt.seed, opt.replication, StreamChannel::service);
    RandomStream arrival_stream(opt.seed, opt.replication, StreamChannel::arrival);

    CustomerPath path;
    path.parameter_kind = sc.kind;
    path.parameter = sc.value;
    path.speed = speed;
    path.has_second_derivative = want_d2;
    path.records.reserve(opt.customers);

    double w = 0.0;
    double d = 0.0;
    double d2 = 0.0;
    double work = 0.0;
    for (std::size_t k = 0; k < total; ++k) {
        const bool idle = !(w > 0.0);
        const ServiceDraw s = draw(service_stream.next());
        const double d_before = idle ? 0.0 : d;
        if (sc.kind == ParameterKind::service_theta) {
            d = (idle ? 0.0 : d) + s.d1;
            d2 = (idle ? 0.0 : d2) + s.d2;
        }
        const double eta = sc.arrivals.sample(arrival_stream);
        const double tau = scale * eta;
        const double carried = w + s.sigma - speed * tau;
        const double w_next = carried > 0.0 ? carried : 0.0;

        if (k >= warmup) {
            path.records.push_back(CustomerRecord{w, s.sigma, d, d_before, d2, tau, w_next, idle});
            path.elapsed += tau;
            work += s.sigma;
        }

        switch (sc.kind) {
            case ParameterKind::service_theta: break;
            case ParameterKind::speed_nu: d = w_next > 0.0 ? d - tau : 0.0; break;
            case ParameterKind::arrival_alpha: d = w_next > 0.0 ? d - eta : 0.0; break;
        }
        w = w_next;
    }

    if (opt.check_stability && !path.records.empty() && work >= speed * path.elapsed)
        throw UnstableInput("realized load " + std::to_string(work / (speed * path.elapsed)) +
                            " is not below 1 over the horizon");

    path.lambda_hat = sc.arrivals.intensity_known() ? sc.intensity() : path.empirical_intensity();
    return path;
}

void check_scenario(const Scenario& sc) {
    if (!std::isfinite(sc.value)) throw std::invalid_argument("parameter value must be finite");
    if (sc.kind != ParameterKind::service_theta && !(sc.value > 0.0))
        throw std::invalid_argument("speed and arrival-scale parameters must be > 0");
}

}  // namespace

CustomerPath simulate_path(const Scenario& sc, const SimulationOptions& opt) {
    if (opt.customers < 1) throw std::invalid_argument("simulate_path needs at least one customer");
    check_scenario(sc);
    const double theta = sc.theta();
    const ServiceModel& model = sc.services;
    if (sc.kind == ParameterKind::service_theta) {
        const bool want_d2 = model.has_second_derivative();
        return run_recursion(sc, opt, want_d2, [&](double xi) {
            const double sigma = model.sample(xi, theta);
            // sigma = 0 at xi = 0 sits on the support boundary; its derivative is 0 for
            // every family in use.
            const double d1 = sigma > 0.0 || model.is_scale_family() ? model.derivative(sigma, theta) : 0.0;
            const double d2v = want_d2 ? model.second_derivative(sigma, theta) : 0.0;
            return ServiceDraw{sigma, d1, d2v};
        });
    }
    return run_recursion(sc, opt, false, [&](double xi) { return ServiceDraw{model.sample(xi, theta), 0.0, 0.0}; });
}

CustomerPath simulate_path(const ArrivalModel& arrivals, const ServiceModel& services, ParameterKind kind,
                           double value, std::size_t n, std::uint64_t seed, std::size_t warmup) {
    Scenario sc{arrivals, services, kind, value, services.theta_range().hi};
    if (kind == ParameterKind::service_theta && !services.theta_range().contains(value))
        throw std::invalid_argument("theta outside its interval");
    return simulate_path(sc, SimulationOptions{n, warmup, seed, 0, true});
}

CustomerPath simulate_star_path(const Scenario& sc, const SimulationOptions& opt) {
    if (opt.customers == 0) {
        CustomerPath empty;
        empty.parameter_kind = ParameterKind::service_theta;
        empty.parameter = sc.services.theta_range().hi;
        return empty;
    }
    const ServiceModel& model = sc.services;
    Scenario star = sc;
    star.kind = ParameterKind::service_theta;
    star.value = model.theta_range().hi;
    SimulationOptions o = opt;
    if (!o.warmup) o.warmup = default_warmup(sc.at(sc.value).offered_load());
    return run_recursion(star, o, false, [&](double xi) {
        const auto [sigma, arg] = model.sup_sample(xi);
        const double d1 = sigma > 0.0 || model.is_scale_family() ? model.derivative(sigma, arg) : 0.0;
        return ServiceDraw{sigma, d1, 0.0};
    });
}

}  // namespace gg1ipa
