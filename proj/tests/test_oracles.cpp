#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gg1ipa/estimators.hpp"
#include "gg1ipa/oracles.hpp"

using namespace gg1ipa;

namespace {

Scenario mm1(double theta = 1.0) {
    return Scenario{ArrivalModel::poisson(0.5), ServiceModel::exponential_scale({0.5, 1.5}),
                    ParameterKind::service_theta, theta, 1.0};
}

SimulationOptions opts(std::size_t n, std::uint64_t seed = 21) { return SimulationOptions{n, 40, seed, 0, true}; }

}  // namespace

TEST_CASE("M/M/1 closed forms") {
    const auto m = mm1_workload_moments(0.5, 1.0);
    CHECK(m.mean == doctest::Approx(1.0));
    CHECK(m.d_mean_dtheta == doctest::Approx(3.0));
    CHECK(m.d2_mean_dtheta2 == doctest::Approx(16.0 / 2.0));
    CHECK(m.workload.tail(1.0) == doctest::Approx(0.5 * std::exp(-0.5)));
    CHECK(m.workload.d_tail(1.0) == doctest::Approx(std::exp(-0.5)));
    CHECK(m.workload.half_second_moment() == doctest::Approx(2.0));
    CHECK(m.workload.d_half_second_moment() == doctest::Approx(10.0));
    CHECK(m.workload.d2_half_second_moment() == doctest::Approx(48.0));
    CHECK_THROWS_AS(mm1_workload_moments(1.0, 1.0), UnstableInput);

    // Each derivative against a numerical difference of its antiderivative.
    const double h = 1e-5;
    const Mm1Workload a(0.5, 1.0 + h), b(0.5, 1.0 - h), c(0.5, 1.0);
    CHECK((a.mean() - b.mean()) / (2 * h) == doctest::Approx(c.d_mean()).epsilon(1e-6));
    CHECK((a.d_mean() - b.d_mean()) / (2 * h) == doctest::Approx(c.d2_mean()).epsilon(1e-6));
    CHECK((a.tail(1.0) - b.tail(1.0)) / (2 * h) == doctest::Approx(c.d_tail(1.0)).epsilon(1e-6));
    CHECK((a.half_second_moment() - b.half_second_moment()) / (2 * h) ==
          doctest::Approx(c.d_half_second_moment()).epsilon(1e-6));
    CHECK((a.d_half_second_moment() - b.d_half_second_moment()) / (2 * h) ==
          doctest::Approx(c.d2_half_second_moment()).epsilon(1e-6));
    CHECK((mm1_speed_mean(0.5, 1.0, 1.0 + h) - mm1_speed_mean(0.5, 1.0, 1.0 - h)) / (2 * h) ==
          doctest::Approx(mm1_speed_d_mean(0.5, 1.0, 1.0)).epsilon(1e-6));
    CHECK((mm1_scale_mean(1.0, 1.0, 2.0 + h) - mm1_scale_mean(1.0, 1.0, 2.0 - h)) / (2 * h) ==
          doctest::Approx(mm1_scale_d_mean(1.0, 1.0, 2.0)).epsilon(1e-6));
    CHECK(mm1_speed_d_mean(0.5, 1.0, 1.0) == doctest::Approx(-2.0));
    CHECK(mm1_scale_d_mean(1.0, 1.0, 2.0) == doctest::Approx(-1.0));
}

TEST_CASE("D/D/1 closed forms") {
    const auto a = dd1_closed_forms(1.0, 0.5, 0.3);
    CHECK(a.J == doctest::Approx(0.2));
    CHECK(a.Jr == 1.0);
    CHECK(a.Jl == 1.0);
    const auto b = dd1_closed_forms(1.0, 0.3, 0.3);
    CHECK(b.J == 0.0);
    CHECK(b.Jr == 1.0);
    CHECK(b.Jl == 0.0);
    CHECK(b.mean_workload == doctest::Approx(0.045));
    CHECK_THROWS_AS(dd1_closed_forms(1.0, 1.0, 0.3), UnstableInput);
}

TEST_CASE("time average matches the closed form on D/D/1") {
    Scenario dd{ArrivalModel::deterministic(1.0), ServiceModel::deterministic_scale({0.1, 0.9}),
                ParameterKind::service_theta, 0.5, 1.0};
    const auto p = simulate_path(dd, opts(1000));
    CHECK(time_average(p, BVFunctional::indicator(0.3)).mean == doctest::Approx(0.2));
    CHECK(time_average(p, BVFunctional::identity()).mean == doctest::Approx(0.125));
}

TEST_CASE("forward FD on D/D/1 above the threshold is exactly the slope") {
    Scenario dd{ArrivalModel::deterministic(1.0), ServiceModel::deterministic_scale({0.1, 0.9}),
                ParameterKind::service_theta, 0.5, 1.0};
    const auto fd = finite_difference(dd, opts(1000), BVFunctional::indicator(0.3), 0.01, Stencil::forward);
    CHECK(fd.value == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("FD of a constant is zero") {
    const auto fd = finite_difference(mm1(), opts(5000), BVFunctional::constant(2.0), 0.05, Stencil::central);
    CHECK(fd.value == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("central FD on M/M/1 with h = 0.05 is near the analytic derivative") {
    const auto fd = finite_difference(mm1(), opts(200000), BVFunctional::identity(), 0.05, Stencil::central);
    // O(h^2) bias: J''' h^2 / 6 is about 0.02 here.
    CHECK(std::abs(fd.value - 3.0) < 4.0 * fd.std_error + 0.05);
}

TEST_CASE("common random numbers shrink the FD variance") {
    const auto f = BVFunctional::identity();
    const auto crn = finite_difference(mm1(), opts(50000), f, 0.01, Stencil::central);
    const auto ind = finite_difference_independent(mm1(), opts(50000), f, 0.01, Stencil::central);
    CHECK(crn.std_error * 5.0 < ind.std_error);
}

TEST_CASE("stencil order: symmetric stencils beat one-sided ones on a smooth target") {
    // Same path for every stencil, so the noise largely cancels between them.
    const auto f = BVFunctional::identity();
    const auto o = opts(200000);
    const double h = 0.1;
    const double fwd = finite_difference(mm1(), o, f, h, Stencil::forward).value;
    const double bwd = finite_difference(mm1(), o, f, h, Stencil::backward).value;
    const double cen = finite_difference(mm1(), o, f, h, Stencil::central).value;
    // Forward and backward carry +/- J'' h / 2 = 0.4; central is their average.
    CHECK(cen == doctest::Approx((fwd + bwd) / 2.0));
    CHECK(fwd - bwd == doctest::Approx(8.0 * h).epsilon(0.25));
    const double s2 = finite_difference(mm1(), o, f, h, Stencil::second_symmetric).value;
    CHECK(s2 == doctest::Approx((fwd - bwd) / h));
}

TEST_CASE("finite_difference refuses stencil points outside the theta interval") {
    CHECK_THROWS_AS(finite_difference(mm1(1.45), opts(1000), BVFunctional::identity(), 0.1, Stencil::central),
                    std::invalid_argument);
    CHECK_THROWS_AS(finite_difference(mm1(), opts(1000), BVFunctional::identity(), 0.0, Stencil::central),
                    std::invalid_argument);
}

TEST_CASE("IPA and CRN finite difference agree within joint SE") {
    const auto o = opts(200000, 77);
    const auto p = simulate_path(mm1(), o);
    const auto e = first_order(p, BVFunctional::identity(), Side::two_sided);
    const auto fd = finite_difference(mm1(), o, BVFunctional::identity(), 0.01, Stencil::central);
    CHECK(std::abs(e.value - fd.value) <= 3.0 * joint_std_error(e.batch_values, fd.batch_values));
}

TEST_CASE("stencil names round trip") {
    for (auto s : {Stencil::forward, Stencil::backward, Stencil::central, Stencil::second_central,
                   Stencil::second_symmetric})
        CHECK(stencil_from_string(to_string(s)) == s);
    CHECK_THROWS(stencil_from_string("sideways"));
}
