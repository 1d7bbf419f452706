#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gg1ipa/batch_means.hpp"
#include "gg1ipa/path.hpp"

using namespace gg1ipa;

namespace {

Scenario mm1(double theta, Interval range = {0.5, 1.5}) {
    return Scenario{ArrivalModel::poisson(0.5), ServiceModel::exponential_scale(range), ParameterKind::service_theta,
                    theta, 1.0};
}

SimulationOptions opts(std::size_t n, std::uint64_t seed = 3) { return SimulationOptions{n, 0, seed, 0, true}; }

}  // namespace

TEST_CASE("random streams are counter based and channel separated") {
    RandomStream a(5, 0, StreamChannel::service);
    RandomStream b(5, 0, StreamChannel::service);
    RandomStream c(5, 0, StreamChannel::arrival);
    RandomStream d(5, 1, StreamChannel::service);
    for (int i = 0; i < 100; ++i) {
        const double x = a.next();
        CHECK(x == b.at(i));
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
        CHECK(x != c.at(i));
        CHECK(x != d.at(i));
    }
}

TEST_CASE("determinism: same seed and replication give identical paths") {
    const auto p = simulate_path(mm1(1.0), opts(5000, 9));
    const auto q = simulate_path(mm1(1.0), opts(5000, 9));
    REQUIRE(p.size() == q.size());
    for (std::size_t k = 0; k < p.size(); ++k) {
        CHECK(p.records[k].w == q.records[k].w);
        CHECK(p.records[k].d == q.records[k].d);
    }
    const auto r = simulate_path(mm1(1.0), opts(5000, 10));
    CHECK(r.records[100].sigma != p.records[100].sigma);
}

TEST_CASE("domination by the sup-service path over a theta grid") {
    const Scenario base = mm1(1.0);
    const auto star = simulate_star_path(base, opts(20000));
    for (double theta : {0.5, 0.75, 1.0, 1.25, 1.5}) {
        const auto p = simulate_path(base.at(theta), opts(20000));
        REQUIRE(p.size() == star.size());
        bool dominated = true;
        for (std::size_t k = 0; k < p.size(); ++k)
            dominated = dominated && p.records[k].w <= star.records[k].w && p.records[k].sigma <= star.records[k].sigma;
        CHECK(dominated);
    }
    CHECK(simulate_star_path(base, opts(0)).empty());
}

TEST_CASE("monotone coupling and Lipschitz bound in theta") {
    const Scenario base = mm1(1.0);
    const auto lo = simulate_path(base.at(0.9), opts(20000));
    const auto hi = simulate_path(base.at(1.1), opts(20000));
    bool monotone = true;
    bool lipschitz = true;
    double service_gap = 0.0;  // sum of |sigma_hi - sigma_lo| so far
    for (std::size_t k = 0; k < lo.size(); ++k) {
        monotone = monotone && lo.records[k].w <= hi.records[k].w;
        lipschitz = lipschitz && hi.records[k].w - lo.records[k].w <= service_gap + 1e-9;
        service_gap += std::abs(hi.records[k].sigma - lo.records[k].sigma);
    }
    CHECK(monotone);
    CHECK(lipschitz);
}

TEST_CASE("pathwise derivative matches the difference quotient and has the right sign") {
    const Scenario base = mm1(1.0);
    const double h = 1e-7;
    const auto p = simulate_path(base, opts(5000));
    const auto q = simulate_path(base.at(1.0 + h), opts(5000));
    std::size_t agree = 0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        CHECK(p.records[k].d >= 0.0);
        const double fd = (q.records[k].w_after() - p.records[k].w_after()) / h;
        if (std::abs(fd - p.records[k].d) < 1e-4 * (1.0 + std::abs(p.records[k].d))) ++agree;
    }
    // Only customers whose idle status flips between the two paths may disagree.
    CHECK(agree >= p.size() - 5);
}

TEST_CASE("speed and arrival-scale derivatives are non-positive") {
    Scenario sv{ArrivalModel::poisson(0.5), ServiceModel::exponential_scale({1.0, 1.0}), ParameterKind::speed_nu, 1.0,
                1.0};
    for (const auto& r : simulate_path(sv, opts(5000)).records) CHECK(r.d <= 0.0);
    Scenario sa{ArrivalModel::poisson(1.0), ServiceModel::exponential_scale({1.0, 1.0}),
                ParameterKind::arrival_alpha, 2.0, 1.0};
    const auto pa = simulate_path(sa, opts(5000));
    for (const auto& r : pa.records) CHECK(r.d <= 0.0);
    CHECK(pa.lambda_hat == doctest::Approx(0.5));
}

TEST_CASE("D/D/1 path is exact") {
    Scenario dd{ArrivalModel::deterministic(1.0), ServiceModel::deterministic_scale({0.1, 0.9}),
                ParameterKind::service_theta, 0.3, 1.0};
    const auto p = simulate_path(dd, opts(1000));
    for (const auto& r : p.records) {
        CHECK(r.w == 0.0);
        CHECK(r.sigma == 0.3);
        CHECK(r.d == 1.0);
        CHECK(r.idle_before);
    }
    CHECK(p.lambda_hat == 1.0);
}

TEST_CASE("stability") {
    const auto ok = stability_check(ArrivalModel::poisson(0.5), ServiceModel::exponential_scale({0.5, 1.5}),
                                    Interval{0.5, 1.5}, 1000, 1);
    CHECK(ok.load_estimate == doctest::Approx(0.75));
    CHECK(ok.stable);
    const auto bad = stability_check(ArrivalModel::poisson(1.2), ServiceModel::exponential_scale({0.5, 1.0}),
                                     Interval{0.5, 1.0}, 1000, 1);
    CHECK_FALSE(bad.stable);
    CHECK_THROWS_AS(stability_check(ArrivalModel::poisson(0.5), ServiceModel::exponential_scale({0.5, 1.0}),
                                    Interval{0.5, 1.0}, 10, 1),
                    std::invalid_argument);
    Scenario over{ArrivalModel::poisson(1.5), ServiceModel::exponential_scale({1.0, 1.0}),
                  ParameterKind::service_theta, 1.0, 1.0};
    CHECK_THROWS_AS(simulate_path(over, opts(20000)), UnstableInput);
    SimulationOptions forced = opts(2000);
    forced.check_stability = false;
    CHECK(simulate_path(over, forced).size() == 2000);
}

TEST_CASE("default warmup") {
    CHECK(default_warmup(0.5) == 40);
    CHECK(default_warmup(1.0) == 0);
}

TEST_CASE("general family derivative via the CDF partials") {
    // Exponential with rate theta written as a general family.
    GeneralServiceFamily g;
    g.name = "exp-rate";
    g.inverse_cdf = [](double xi, double theta) { return -std::log1p(-xi) / theta; };
    g.cdf_dx = [](double x, double theta) { return theta * std::exp(-theta * x); };
    g.cdf_dtheta = [](double x, double theta) { return x * std::exp(-theta * x); };
    g.mean = [](double theta) { return 1.0 / theta; };
    const auto m = ServiceModel::general(g, {1.0, 3.0});
    const double sigma = m.sample(0.4, 2.0);
    CHECK(m.derivative(sigma, 2.0) == doctest::Approx(-sigma / 2.0));
    CHECK(m.sup_sample(0.4).first == doctest::Approx(m.sample(0.4, 1.0)));
    CHECK_THROWS(inverse_transform(m, 0.4, 5.0));
}

TEST_CASE("batch means helpers") {
    std::vector<double> v(1000);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i % 7);
    const auto bm = batch_means(v, 2.0, 10);
    CHECK(bm.batch_means.size() == 10);
    double total = 0.0;
    for (double x : v) total += x;
    CHECK(bm.mean == doctest::Approx(2.0 * total / 1000.0));
    const auto bounds = batch_bounds(10, 3);
    CHECK(bounds == std::vector<std::size_t>{0, 4, 7, 10});
    const double vals[] = {1.0, 3.0};
    const double ses[] = {0.3, 0.4};
    const Pooled p = pool(vals, ses);
    CHECK(p.mean == 2.0);
    CHECK(p.std_error == doctest::Approx(0.25));
}
