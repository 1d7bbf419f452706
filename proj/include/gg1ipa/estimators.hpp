#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "gg1ipa/batch_means.hpp"
#include "gg1ipa/bv_functional.hpp"
#include "gg1ipa/path.hpp"

namespace gg1ipa {

enum class Side { right, left, two_sided };
enum class Order { first, second };

std::string_view to_string(Side side);
std::string_view to_string(Order order);
Side side_from_string(std::string_view name);

/// Two-sided estimate requested on a path where the one-sided derivatives differ.
class OneSidedDerivative : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DerivativeEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t n_customers = 0;
    Side side = Side::two_sided;
    Order order = Order::first;
    ParameterKind parameter_kind = ParameterKind::service_theta;
    /// Atom terms subtracted from the jump terms, already scaled like `value`.
    double atom_correction = 0.0;
    double lambda_hat = 0.0;
    std::vector<double> batch_values;

    double ci_lo(double z = 1.96) const { return value - z * std_error; }
    double ci_hi(double z = 1.96) const { return value + z * std_error; }
};

/// How the post-arrival workload is paired inside a summand.
enum class Pairing {
    next_arrival,  // W(T_k) with W(T_{k+1}-)
    same_arrival,  // W(T_k) with W(T_k-), pre-arrival derivative on the second term
};

struct EstimatorOptions {
    std::size_t batches = kDefaultBatches;
    Pairing pairing = Pairing::next_arrival;
    /// Use n / T_n instead of the path's lambda_hat.
    bool empirical_intensity = false;
};

/// Customer-average IPA estimate of dJ/dtheta for J(theta) = E f(W(0)):
///
///   lambda/n sum_k d_k [ f(W(T_k)) - f(W(T_{k+1}-))
///                        - 1{d_k < 0} (mu_f{W(T_k)} - mu_f{W(T_{k+1}-)}) ]
///
/// with 1{d_k > 0} for the left derivative. The atom terms only matter when the
/// workload sits exactly on a jump of f.
DerivativeEstimate first_order(const CustomerPath& path, const BVFunctional& f, Side side,
                               const EstimatorOptions& options = {});

struct SecondOrderOptions {
    std::size_t batches = kDefaultBatches;
    /// Adds d_k^2 f'(0) on customers whose successor finds the queue empty. The plain
    /// estimator assumes f'(0) = 0; without this term it misses the change in idle
    /// time when f'(0) != 0 (it returns 0 for f = identity with a scale family).
    bool idle_boundary_term = false;
    /// Inter-arrival law of the path. When set, adds the busy-period merge term
    ///
    ///   1{W(T_{k+1}-) = 0} h_tau(W(T_k)) d_k^2 S_{k+1}
    ///
    /// where h_tau is the inter-arrival hazard and S_{k+1} the sum of
    /// f(W(T_m)) - f(W(T_{m+1}-)) over the busy period started by customer k + 1.
    /// Raising theta closes the idle gap after customer k at rate h_tau(W(T_k)) d_k,
    /// and when it closes every d_m of the next busy period gains d_k. The plain
    /// estimator drops that jump and is biased low for scale families (about 39
    /// instead of 48 for f = w^2 / 2 on M/M/1 at rho = 0.5).
    std::optional<ArrivalModel> merge_arrivals;
};

/// lambda/n sum_k d2_k [f(W0) - f(W1)] + d_k^2 [f'(W0) - f'(W1) - 1{.}(mu_f'{W0} - mu_f'{W1})].
DerivativeEstimate second_order(const CustomerPath& path, const BVFunctional& f, Side side,
                                const SecondOrderOptions& options = {});

/// dJ/dnu for a server working at speed nu. With W0 = W(T_k), W1 = W(T_{k+1}-),
/// d = dW0/dnu and F the primitive of f, each customer contributes
///
///   nu d [f(W0) - f(W1)] - [F(W0) - F(W1)] + (W0 - W1) f(W1)
///
/// scaled by lambda / nu^2. That is the exact derivative of the area under
/// f(W(t)) over [T_k, T_{k+1}) when W drains linearly at rate nu. A faster server
/// pushes both ends of the interval down, so the right derivative replaces f by its
/// left limits there, subtracting
///
///   nu d (mu_f{W0} - mu_f{W1}) + (W0 - W1) mu_f{W1}
///
/// The left derivative uses right values and has no atom term.
DerivativeEstimate speed_derivative(const CustomerPath& path, const BVFunctional& f, Side side,
                                    const EstimatorOptions& options = {});

/// dJ/dalpha for inter-arrival times alpha * eta_n: the speed formula for the
/// auxiliary system run at speed alpha on the eta time scale, with prefactor
/// lambda / alpha. Atom handling matches speed_derivative.
DerivativeEstimate arrival_scale_derivative(const CustomerPath& path, const BVFunctional& f, Side side,
                                            const EstimatorOptions& options = {});

/// Time-average IPA estimate (1/T_n) sum_k d_k [f(W(T_k)) - f(W(T_{k+1}-))].
/// Requires f without atoms.
DerivativeEstimate classic_ipa(const CustomerPath& path, const BVFunctional& f,
                               std::size_t batches = kDefaultBatches);

/// d/dtheta P(W(0) >= x) written with interval indicators:
///   lambda/n sum_k d_k [1_{(W1, W0]}(x) - 1{.}(1{W0 = x} - 1{W1 = x})].
DerivativeEstimate tail_probability_derivative(const CustomerPath& path, double x, Side side,
                                               std::size_t batches = kDefaultBatches);

/// Per-customer summands of first_order before the lambda prefactor (tests and CLI).
std::vector<double> first_order_summands(const CustomerPath& path, const BVFunctional& f, Side side,
                                         Pairing pairing = Pairing::next_arrival);

}  // namespace gg1ipa
