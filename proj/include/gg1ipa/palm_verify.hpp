#pragma once

#include <cstddef>
#include <string_view>

#include "gg1ipa/batch_means.hpp"
#include "gg1ipa/bv_functional.hpp"
#include "gg1ipa/path.hpp"

namespace gg1ipa {

enum class PalmIdentity { inversion, wald_lemma, ergodic_equivalence };

std::string_view to_string(PalmIdentity identity);
PalmIdentity palm_identity_from_string(std::string_view name);

struct PalmCheckReport {
    PalmIdentity identity = PalmIdentity::inversion;
    double lhs = 0.0;
    double rhs = 0.0;
    double joint_std_error = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

/// Process Z(t) whose time average is compared with its event average.
enum class ProcessKind {
    workload,    // Z(t) = W(t)
    functional,  // Z(t) = f(W(t))
    constant,    // Z(t) = f(0), a constant
};

/// E Z(0) = lambda E0 int_0^{T_1} Z(s) ds.
/// lhs is the time average over the path, rhs lambda times the mean area per inter-arrival
/// interval, lambda being the path's lambda_hat. Passes when |lhs - rhs| <= k * joint SE,
/// the SE coming from per-batch differences on the shared path.
PalmCheckReport check_inversion(const CustomerPath& path, ProcessKind z, const BVFunctional& f, double k = 3.0,
                                std::size_t batches = kDefaultBatches);

PalmCheckReport check_inversion(const Scenario& scenario, const SimulationOptions& options, ProcessKind z,
                                const BVFunctional& f, double k = 3.0);

/// E0[sum over the busy cycle of customer 0 of Z_j] = E0[|cycle| Z_0], Z_k = f(W(T_k)).
/// Cycles start at customers that find the queue empty; customers before the first such
/// start and after the last one are dropped. Both sides are averages over the same
/// customers, and they agree cycle by cycle.
PalmCheckReport check_wald_lemma(const CustomerPath& path, const BVFunctional& f, double k = 3.0,
                                 std::size_t batches = kDefaultBatches);

PalmCheckReport check_wald_lemma(const Scenario& scenario, const SimulationOptions& options,
                                 const BVFunctional& f, double k = 3.0);

/// classic_ipa against first_order run with lambda = n / T_n. These are the same sum
/// divided two ways, so the tolerance is C / n with C the largest summand magnitude.
PalmCheckReport check_ergodic_equivalence(const CustomerPath& path, const BVFunctional& f,
                                          std::size_t batches = kDefaultBatches);

PalmCheckReport check_ergodic_equivalence(const Scenario& scenario, const SimulationOptions& options,
                                          const BVFunctional& f);

}  // namespace gg1ipa
