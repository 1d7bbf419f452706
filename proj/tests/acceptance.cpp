// Acceptance suite. Prints one PASS/FAIL line per criterion and exits 0 only when the
// failing set equals --expected-failures.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include <CLI11.hpp>

#include "gg1ipa/batch_means.hpp"
#include "gg1ipa/estimators.hpp"
#include "gg1ipa/experiment.hpp"
#include "gg1ipa/oracles.hpp"
#include "gg1ipa/palm_verify.hpp"

using namespace gg1ipa;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::vector<std::string> lines;

    void check(bool ok, const std::string& what) {
        pass = pass && ok;
        lines.push_back(std::string(ok ? "ok   " : "BAD  ") + what);
    }
    void info(const std::string& what) { lines.push_back("info " + what); }
};

std::string fmt(const char* pattern, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, pattern, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

constexpr std::size_t kMillion = 1'000'000;

Scenario mm1(double theta = 1.0) {
    return Scenario{ArrivalModel::poisson(0.5), ServiceModel::exponential_scale({0.5, 1.5}),
                    ParameterKind::service_theta, theta, 1.0};
}

Scenario dd1(double theta) {
    return Scenario{ArrivalModel::deterministic(1.0), ServiceModel::deterministic_scale({0.1, 0.9}),
                    ParameterKind::service_theta, theta, 1.0};
}

SimulationOptions opts(std::size_t n, std::uint64_t seed, std::uint64_t rep = 0) {
    return SimulationOptions{n, std::nullopt, seed, rep, true};
}

// 1. Deterministic queue, indicator at x = 0.3.
Outcome dd1_exactness() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const auto f = BVFunctional::indicator(0.3);
    for (double theta : {0.5, 0.3}) {
        const auto p = simulate_path(dd1(theta), SimulationOptions{1000, 0, 1, 0, true});
        const auto forms = dd1_closed_forms(1.0, theta, 0.3);
        const double r = first_order(p, f, Side::right).value;
        const double l = first_order(p, f, Side::left).value;
        o.check(r == forms.Jr && l == forms.Jl,
                fmt("theta=%.1f right=%.17g (want %.17g) left=%.17g (want %.17g)", theta, r, forms.Jr, l, forms.Jl));
    }
    const double t = seconds_since(t0);
    o.check(t < 1.0, fmt("elapsed %.3f s < 1 s", t));
    return o;
}

// 2. M/M/1 mean workload derivative, pooled over 10 replications.
Outcome mm1_first_derivative() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> values, ses;
    for (std::uint64_t rep = 0; rep < 10; ++rep) {
        const auto e = first_order(simulate_path(mm1(), opts(kMillion, 2024, rep)), BVFunctional::identity(),
                                   Side::two_sided);
        values.push_back(e.value);
        ses.push_back(e.std_error);
    }
    const Pooled p = pool(values, ses);
    const double target = mm1_workload_moments(0.5, 1.0).d_mean_dtheta;
    o.check(std::abs(p.mean - target) <= 3.0 * p.std_error,
            fmt("pooled %.5f +/- %.5f vs %.5f (|gap| = %.2f SE)", p.mean, p.std_error, target,
                std::abs(p.mean - target) / p.std_error));
    const double t = seconds_since(t0);
    o.check(t < 30.0, fmt("elapsed %.2f s < 30 s", t));
    return o;
}

// 3. Tail probability at x = 1.
Outcome tail_derivative() {
    Outcome o;
    const auto p = simulate_path(mm1(), opts(kMillion, 3003));
    const auto f = BVFunctional::indicator(1.0);
    const auto r = first_order(p, f, Side::right);
    const auto l = first_order(p, f, Side::left);
    const double target = Mm1Workload(0.5, 1.0).d_tail(1.0);
    o.check(std::abs(r.value - target) <= 3.0 * r.std_error,
            fmt("right %.5f +/- %.5f vs %.5f", r.value, r.std_error, target));
    o.check(r.value == l.value && r.batch_values == l.batch_values,
            fmt("right and left bitwise equal (left %.17g)", l.value));
    return o;
}

// 4. IPA against central FD with common random numbers, one row per parameter kind.
Outcome fd_agreement() {
    Outcome o;
    const auto f = BVFunctional::identity();
    struct Case {
        const char* name;
        Scenario scenario;
    };
    const Case cases[] = {
        {"service-theta", mm1()},
        {"speed-nu", Scenario{ArrivalModel::poisson(0.5), ServiceModel::exponential_scale({1.0, 1.0}),
                              ParameterKind::speed_nu, 1.0, 1.0}},
        {"arrival-alpha", Scenario{ArrivalModel::poisson(1.0), ServiceModel::exponential_scale({1.0, 1.0}),
                                   ParameterKind::arrival_alpha, 2.0, 1.0}},
    };
    for (const auto& c : cases) {
        const auto so = opts(kMillion, 4004);
        const auto p = simulate_path(c.scenario, so);
        DerivativeEstimate e;
        switch (c.scenario.kind) {
            case ParameterKind::service_theta: e = first_order(p, f, Side::two_sided); break;
            case ParameterKind::speed_nu: e = speed_derivative(p, f, Side::two_sided); break;
            case ParameterKind::arrival_alpha: e = arrival_scale_derivative(p, f, Side::two_sided); break;
        }
        const auto fd = finite_difference(c.scenario, so, f, 0.01 * c.scenario.value, Stencil::central);
        const double se = joint_std_error(e.batch_values, fd.batch_values);
        o.check(std::abs(e.value - fd.value) <= 3.0 * se,
                fmt("%s: IPA %.5f FD %.5f joint SE %.5f (|gap| = %.2f SE)", c.name, e.value, fd.value, se,
                    std::abs(e.value - fd.value) / se));
    }
    return o;
}

// 5. Second derivative of E[W^2/2], and the identity cancellation.
Outcome second_derivative() {
    Outcome o;
    const auto so = opts(kMillion, 5005);
    const auto p = simulate_path(mm1(), so);
    const auto g = BVFunctional::polynomial({0.0, 0.0, 0.5});
    const double h = 0.01;
    const auto plain = second_order(p, g, Side::two_sided);
    const auto fwd = finite_difference(mm1(), so, g, h, Stencil::second_central);
    const double se = joint_std_error(plain.batch_values, fwd.batch_values);
    o.check(std::abs(plain.value - fwd.value) <= 3.0 * se,
            fmt("w^2/2: estimator %.4f vs second-central FD %.4f, joint SE %.4f (|gap| = %.1f SE)", plain.value,
                fwd.value, se, std::abs(plain.value - fwd.value) / se));

    const double exact = Mm1Workload(0.5, 1.0).d2_half_second_moment();
    SecondOrderOptions merged;
    merged.merge_arrivals = ArrivalModel::poisson(0.5);
    const auto corrected = second_order(p, g, Side::two_sided, merged);
    const auto sym = finite_difference(mm1(), so, g, h, Stencil::second_symmetric);
    o.info(fmt("closed form %.4f; symmetric FD %.4f; forward FD bias ~ h J''' pushes it up", exact, sym.value));
    const double se2 = joint_std_error(corrected.batch_values, sym.batch_values);
    o.info(fmt("with the idle-merge term: %.4f vs symmetric FD %.4f, joint SE %.4f (|gap| = %.2f SE)",
               corrected.value, sym.value, se2, std::abs(corrected.value - sym.value) / se2));

    const double zero = second_order(p, BVFunctional::identity(), Side::two_sided).value;
    o.check(zero == 0.0, fmt("identity: %.17g == 0 exactly", zero));
    return o;
}

// 6. Palm identities.
Outcome palm_suite() {
    Outcome o;
    const auto p = simulate_path(mm1(), opts(kMillion, 6006));
    const auto id = BVFunctional::identity();
    auto line = [&](const char* where, const PalmCheckReport& r) {
        return fmt("%s %s: lhs %.6f rhs %.6f tol %.3g", where, std::string(to_string(r.identity)).c_str(), r.lhs,
                   r.rhs, r.tolerance);
    };
    const PalmCheckReport mm[] = {
        check_inversion(p, ProcessKind::workload, id),
        check_inversion(p, ProcessKind::functional, BVFunctional::indicator(1.0)),
        check_inversion(p, ProcessKind::constant, BVFunctional::constant(1.0)),
        check_wald_lemma(p, id),
        check_ergodic_equivalence(p, id),
    };
    for (const auto& r : mm) o.check(r.pass, line("M/M/1", r));

    const auto d = simulate_path(dd1(0.5), SimulationOptions{1000, 0, 1, 0, true});
    const PalmCheckReport dd[] = {
        check_inversion(d, ProcessKind::workload, id),
        check_inversion(d, ProcessKind::functional, BVFunctional::indicator(0.3)),
        check_wald_lemma(d, id),
        check_ergodic_equivalence(d, id),
    };
    for (const auto& r : dd) {
        const bool exact = std::abs(r.lhs - r.rhs) <= 1e-12 * std::max(1.0, std::abs(r.rhs));
        o.check(r.pass && exact, line("D/D/1", r));
    }
    return o;
}

int run_cli(const std::string& cli, const std::string& args) {
    const std::string cmd = "\"" + cli + "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

// 7. Property suites.
Outcome properties(const std::string& cli, const std::string& configs) {
    Outcome o;
    const std::size_t n = 100000;

    const Scenario base = mm1();
    const auto star = simulate_star_path(base, SimulationOptions{n, 0, 7007, 0, false});
    bool dominated = true;
    for (double theta : {0.5, 0.75, 1.0, 1.25, 1.5}) {
        const auto p = simulate_path(base.at(theta), SimulationOptions{n, 0, 7007, 0, false});
        for (std::size_t k = 0; k < p.size(); ++k)
            dominated = dominated && p.records[k].w <= star.records[k].w && p.records[k].sigma <= star.records[k].sigma;
    }
    o.check(dominated, "domination by the sup-service path on theta in {0.5, 0.75, 1, 1.25, 1.5}");

    const auto lo = simulate_path(base.at(0.9), SimulationOptions{n, 0, 7007, 0, true});
    const auto hi = simulate_path(base.at(1.1), SimulationOptions{n, 0, 7007, 0, true});
    bool monotone = true;
    for (std::size_t k = 0; k < lo.size(); ++k) monotone = monotone && lo.records[k].w <= hi.records[k].w;
    o.check(monotone, "monotone coupling, theta 0.9 vs 1.1");

    const auto p = simulate_path(base, opts(n, 7007));
    const auto id = BVFunctional::identity();
    const auto ind = BVFunctional::indicator(0.8);
    const double a = first_order(p, id, Side::right).value;
    const double b = first_order(p, ind, Side::right).value;
    const double ab = first_order(p, BVFunctional::difference(id, ind), Side::right).value;
    o.check(std::abs(ab - (a - b)) <= 1e-12 * std::max(1.0, std::abs(a)), "linearity: D(f - g) = Df - Dg");

    // Kinks at 0.5 and 1.5 in the increasing part, a downward jump at 0.4.
    const std::pair<double, double> knots[] = {{0.5, 0.0}, {1.5, 2.0}, {2.5, 2.2}};
    const auto mixed = BVFunctional::difference(BVFunctional::tabulated(knots), BVFunctional::indicator(0.4));
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    double worst_tel = 0.0;
    double worst_prim = 0.0;
    for (int i = 0; i < 2000; ++i) {
        double x = u(rng), y = u(rng);
        if (x > y) std::swap(x, y);
        worst_tel = std::max(worst_tel, std::abs(mixed.interval_mass(x, y) - (mixed.eval(y) - mixed.eval(x))));
        if (std::abs(x - 0.4) > 1e-3 && std::abs(x - 0.5) > 1e-3 && std::abs(x - 1.5) > 1e-3 &&
            std::abs(x - 2.5) > 1e-3) {
            const double hstep = 1e-5;
            const double slope = (mixed.primitive(x + hstep) - mixed.primitive(x - hstep)) / (2 * hstep);
            worst_prim = std::max(worst_prim, std::abs(slope - mixed.eval(x)));
        }
    }
    o.check(worst_tel <= 1e-12, fmt("telescoping: max |mass(a,b) - (f(b) - f(a))| = %.2g", worst_tel));
    o.check(worst_prim <= 1e-6, fmt("primitive: max |F' - f| = %.2g", worst_prim));

    bool one_sided = true;
    const auto g = BVFunctional::difference(BVFunctional::ramp(0.1), BVFunctional::indicator(0.3));
    for (double theta : {0.3, 0.5}) {
        const auto d = simulate_path(dd1(theta), SimulationOptions{500, 0, 1, 0, true});
        const auto r = first_order(d, g, Side::right);
        const auto l = first_order(d, g, Side::left);
        one_sided = one_sided && std::abs((r.value - l.value) - (l.atom_correction - r.atom_correction)) <= 1e-12;
    }
    const auto r = first_order(p, BVFunctional::indicator(1.0), Side::right);
    const auto l = first_order(p, BVFunctional::indicator(1.0), Side::left);
    one_sided = one_sided && std::abs((r.value - l.value) - (l.atom_correction - r.atom_correction)) <= 1e-12;
    o.check(one_sided, "one-sided consistency: right - left = atom-correction difference");

    const fs::path dir = fs::temp_directory_path() / ("gg1ipa_accept_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    json cfg = read_json_file(configs + "/mm1_identity.json");
    cfg["horizon"] = 20000;
    std::ofstream(dir / "cfg.json") << cfg.dump(2);
    const int rc1 = run_cli(cli, "run " + (dir / "cfg.json").string() + " --seed 11 --out " + (dir / "a.jsonl").string());
    const int rc2 = run_cli(cli, "run " + (dir / "cfg.json").string() + " --seed 11 --jobs 3 --out " +
                                     (dir / "b.jsonl").string());
    const std::string first = slurp(dir / "a.jsonl");
    bool same = rc1 == 0 && rc2 == 0 && !first.empty() && first == slurp(dir / "b.jsonl");
    if (same) {
        const json header = json::parse(first.substr(0, first.find('\n')));
        std::ofstream(dir / "replay.json") << header["config"].dump();
        same = run_cli(cli, "run " + (dir / "replay.json").string() + " --out " + (dir / "c.jsonl").string()) == 0 &&
               slurp(dir / "c.jsonl") == first;
    }
    fs::remove_all(dir);
    o.check(same, "CLI round trip: same seed, different --jobs, replayed header config");
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gg1ipa acceptance suite"};
    std::vector<int> expected;
    std::string cli = GG1IPA_CLI;
    std::string configs = GG1IPA_EXAMPLES;
    bool verbose = false;
    app.add_option("--expected-failures", expected, "criteria known to fail")->delimiter(',');
    app.add_option("--cli", cli, "path to the gg1ipa executable");
    app.add_flag("-v,--verbose", verbose, "print every sub-check");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"D/D/1 exact one-sided derivatives", dd1_exactness},
        {"M/M/1 first derivative, 10 x 1e6 customers", mm1_first_derivative},
        {"M/M/1 tail-probability derivative", tail_derivative},
        {"IPA vs CRN central FD for theta, nu, alpha", fd_agreement},
        {"second derivative and identity cancellation", second_derivative},
        {"Palm identity suite", palm_suite},
        {"property suites", [&] { return properties(cli, configs); }},
    };

    std::set<int> failed;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.check(false, std::string("threw: ") + e.what());
        }
        if (!o.pass) failed.insert(id);
        std::printf("criterion %d: %s  %s (%.2f s)\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first,
                    seconds_since(t0));
        for (const auto& line : o.lines)
            if (verbose || !o.pass || line.rfind("info", 0) == 0) std::printf("    %s\n", line.c_str());
        std::fflush(stdout);
    }

    const std::set<int> want(expected.begin(), expected.end());
    if (failed != want) {
        std::printf("failing set differs from --expected-failures\n");
        return 1;
    }
    if (!want.empty()) std::printf("%zu known failure(s), as expected\n", want.size());
    return 0;
}
