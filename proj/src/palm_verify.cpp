#include "gg1ipa/palm_verify.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "gg1ipa/estimators.hpp"
#include "gg1ipa/oracles.hpp"

namespace gg1ipa {

std::string_view to_string(PalmIdentity identity) {
    switch (identity) {
        case PalmIdentity::inversion: return "inversion";
        case PalmIdentity::wald_lemma: return "wald-lemma";
        case PalmIdentity::ergodic_equivalence: return "ergodic-equivalence";
    }
    return "unknown";
}

PalmIdentity palm_identity_from_string(std::string_view name) {
    if (name == "inversion") return PalmIdentity::inversion;
    if (name == "wald-lemma") return PalmIdentity::wald_lemma;
    if (name == "ergodic-equivalence") return PalmIdentity::ergodic_equivalence;
    throw std::invalid_argument("unknown Palm identity '" + std::string(name) + "'");
}

namespace {

PalmCheckReport compare(PalmIdentity id, const BatchSummary& lhs, const BatchSummary& rhs, double k) {
    PalmCheckReport r;
    r.identity = id;
    r.lhs = lhs.mean;
    r.rhs = rhs.mean;
    r.joint_std_error = joint_std_error(lhs.batch_means, rhs.batch_means);
    r.tolerance = k * r.joint_std_error;
    r.pass = std::abs(r.lhs - r.rhs) <= r.tolerance;
    return r;
}

}  // namespace

PalmCheckReport check_inversion(const CustomerPath& path, ProcessKind z, const BVFunctional& f, double k,
                                std::size_t batches) {
    if (path.empty()) throw std::invalid_argument("inversion check needs a non-empty path");
    const BVFunctional g = z == ProcessKind::workload   ? BVFunctional::identity()
                           : z == ProcessKind::constant ? BVFunctional::constant(f.eval(0.0))
                                                        : f;
    std::vector<double> area(path.size());
    std::vector<double> taus(path.size());
    for (std::size_t i = 0; i < path.size(); ++i) {
        area[i] = interval_integral(path.records[i], path.speed, g);
        taus[i] = path.records[i].tau;
    }
    return compare(PalmIdentity::inversion, batch_ratio(area, taus, batches),
                   batch_means(area, path.lambda_hat, batches), k);
}

PalmCheckReport check_inversion(const Scenario& sc, const SimulationOptions& options, ProcessKind z,
                                const BVFunctional& f, double k) {
    return check_inversion(simulate_path(sc, options), z, f, k);
}

PalmCheckReport check_wald_lemma(const CustomerPath& path, const BVFunctional& f, double k, std::size_t batches) {
    std::vector<std::size_t> starts;
    for (std::size_t i = 0; i < path.size(); ++i)
        if (path.records[i].idle_before) starts.push_back(i);
    if (starts.size() < 2) throw std::invalid_argument("Wald check needs at least one complete busy cycle");

    const std::size_t first = starts.front();
    const std::size_t last = starts.back();
    std::vector<double> per_cycle_sum(last - first);
    std::vector<double> size_times_z(last - first);
    for (std::size_t c = 0; c + 1 < starts.size(); ++c) {
        const std::size_t a = starts[c];
        const std::size_t b = starts[c + 1];
        double sum = 0.0;
        for (std::size_t j = a; j < b; ++j) sum += f.eval(path.records[j].w_after());
        const double len = static_cast<double>(b - a);
        for (std::size_t j = a; j < b; ++j) {
            per_cycle_sum[j - first] = sum;
            size_times_z[j - first] = len * f.eval(path.records[j].w_after());
        }
    }
    return compare(PalmIdentity::wald_lemma, batch_means(per_cycle_sum, 1.0, batches),
                   batch_means(size_times_z, 1.0, batches), k);
}

PalmCheckReport check_wald_lemma(const Scenario& sc, const SimulationOptions& options, const BVFunctional& f,
                                 double k) {
    return check_wald_lemma(simulate_path(sc, options), f, k);
}

PalmCheckReport check_ergodic_equivalence(const CustomerPath& path, const BVFunctional& f, std::size_t batches) {
    EstimatorOptions eo;
    eo.batches = batches;
    eo.empirical_intensity = true;
    const DerivativeEstimate lhs = classic_ipa(path, f, batches);
    const DerivativeEstimate rhs = first_order(path, f, Side::two_sided, eo);

    double c = 0.0;
    for (double s : first_order_summands(path, f, Side::two_sided)) c = std::max(c, std::abs(s));
    c *= path.empirical_intensity();

    PalmCheckReport r;
    r.identity = PalmIdentity::ergodic_equivalence;
    r.lhs = lhs.value;
    r.rhs = rhs.value;
    r.joint_std_error = joint_std_error(lhs.batch_values, rhs.batch_values);
    r.tolerance = path.empty() ? 0.0 : c / static_cast<double>(path.size());
    r.pass = std::abs(r.lhs - r.rhs) <= r.tolerance;
    return r;
}

PalmCheckReport check_ergodic_equivalence(const Scenario& sc, const SimulationOptions& options,
                                          const BVFunctional& f) {
    return check_ergodic_equivalence(simulate_path(sc, options), f);
}

}  // namespace gg1ipa
