#include "gg1ipa/estimators.hpp"

#include <string>

namespace gg1ipa {

std::string_view to_string(Side side) {
    switch (side) {
        case Side::right: return "right";
        case Side::left: return "left";
        case Side::two_sided: return "two-sided";
    }
    return "unknown";
}

std::string_view to_string(Order order) { return order == Order::first ? "first" : "second"; }

Side side_from_string(std::string_view name) {
    if (name == "right") return Side::right;
    if (name == "left") return Side::left;
    if (name == "two-sided") return Side::two_sided;
    throw std::invalid_argument("unknown side '" + std::string(name) + "'");
}

namespace {

/// Per-customer pieces: main - corr_right is the right summand, main - corr_left the left one.
struct Terms {
    std::vector<double> main;
    std::vector<double> corr_right;
    std::vector<double> corr_left;

    void resize(std::size_t n) {
        main.assign(n, 0.0);
        corr_right.assign(n, 0.0);
        corr_left.assign(n, 0.0);
    }
};

struct Term {
    double main;
    double corr_right;
    double corr_left;
};

// Atom terms for an interval whose endpoints move at rates `top_slope` (W(T_k)) and
// `bottom_slope` (W(T_{k+1}-)) in units of the summand's prefactor. An endpoint
// moving down sees f's left limit, so its atom is removed.
inline Term with_atoms(double main, double top_slope, double top_atom, double bottom_slope, double bottom_atom) {
    Term t{main, 0.0, 0.0};
    if (top_slope < 0.0) t.corr_right += top_slope * top_atom;
    if (top_slope > 0.0) t.corr_left += top_slope * top_atom;
    if (bottom_slope < 0.0) t.corr_right -= bottom_slope * bottom_atom;
    if (bottom_slope > 0.0) t.corr_left -= bottom_slope * bottom_atom;
    return t;
}

// Runs `term` on f, or on each declared part of a difference and subtracts.
template <typename TermFn>
Terms collect(const CustomerPath& path, const BVFunctional& f, TermFn&& term) {
    Terms out;
    out.resize(path.size());
    auto accumulate = [&](const BVFunctional& g, double sign) {
        for (std::size_t k = 0; k < path.size(); ++k) {
            const Term t = term(path.records[k], g);
            out.main[k] += sign * t.main;
            out.corr_right[k] += sign * t.corr_right;
            out.corr_left[k] += sign * t.corr_left;
        }
    };
    if (const auto* parts = f.parts()) {
        accumulate(parts->first, 1.0);
        accumulate(parts->second, -1.0);
    } else {
        accumulate(f, 1.0);
    }
    return out;
}

DerivativeEstimate assemble(const Terms& terms, Side side, double prefactor, std::size_t batches,
                            const CustomerPath& path, Order order) {
    const std::size_t n = terms.main.size();
    const std::vector<double>* corr = &terms.corr_right;
    if (side == Side::left) corr = &terms.corr_left;
    if (side == Side::two_sided) {
        for (std::size_t k = 0; k < n; ++k)
            if (terms.corr_right[k] != 0.0 || terms.corr_left[k] != 0.0)
                throw OneSidedDerivative("workload hit an atom of f at customer " + std::to_string(k) +
                                         "; left and right derivatives differ on this path");
    }
    std::vector<double> summand(n);
    double corr_sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        summand[k] = terms.main[k] - (*corr)[k];
        corr_sum += (*corr)[k];
    }
    const BatchSummary bm = batch_means(summand, prefactor, batches);
    DerivativeEstimate e;
    e.value = bm.mean;
    e.std_error = bm.std_error;
    e.batch_values = bm.batch_means;
    e.n_customers = n;
    e.side = side;
    e.order = order;
    e.parameter_kind = path.parameter_kind;
    e.atom_correction = n > 0 ? prefactor * corr_sum / static_cast<double>(n) : 0.0;
    e.lambda_hat = prefactor;
    return e;
}

double intensity(const CustomerPath& path, const EstimatorOptions& options) {
    return options.empirical_intensity ? path.empirical_intensity() : path.lambda_hat;
}

void require_kind(const CustomerPath& path, ParameterKind kind, std::string_view op) {
    if (path.parameter_kind != kind)
        throw std::invalid_argument(std::string(op) + " needs a " + std::string(to_string(kind)) + " path, got " +
                                    std::string(to_string(path.parameter_kind)));
}

Terms first_order_terms(const CustomerPath& path, const BVFunctional& f, Pairing pairing) {
    if (pairing == Pairing::same_arrival) {
        return collect(path, f, [](const CustomerRecord& r, const BVFunctional& g) {
            const double c = g.offset();
            const double top = r.w_after();
            const double main = r.d * (g.eval(top) - c) - r.d_before * (g.eval(r.w) - c);
            return with_atoms(main, r.d, g.atom_mass(top), r.d_before, g.atom_mass(r.w));
        });
    }
    return collect(path, f, [](const CustomerRecord& r, const BVFunctional& g) {
        const double top = r.w_after();
        const double bottom = r.w_next;
        const double main = r.d * (g.eval(top) - g.eval(bottom));
        const double bottom_slope = bottom > 0.0 ? r.d : 0.0;
        return with_atoms(main, r.d, g.atom_mass(top), bottom_slope, g.atom_mass(bottom));
    });
}

// Shared by the speed and arrival-scale estimators; `p` is nu or alpha.
Terms rate_terms(const CustomerPath& path, const BVFunctional& f, double p) {
    return collect(path, f, [p](const CustomerRecord& r, const BVFunctional& g) {
        const double top = r.w_after();
        const double bottom = r.w_next;
        const double drop = top - bottom;
        const double f_bottom = g.eval(bottom);
        const double main = p * r.d * (g.eval(top) - f_bottom) - (g.primitive(top) - g.primitive(bottom)) +
                            drop * f_bottom;
        // p * dW(T_{k+1}-)/dp = p d - (W0 - W1) while busy.
        const double bottom_slope = bottom > 0.0 ? p * r.d - drop : 0.0;
        return with_atoms(main, p * r.d, g.atom_mass(top), bottom_slope, g.atom_mass(bottom));
    });
}

void add_merge_term(const CustomerPath& path, const BVFunctional& f, const ArrivalModel& arrivals, Terms& terms) {
    // Walking backwards, `rest` is the sum of f(W0) - f(W1) from customer k + 1 to the
    // end of its busy period; when k + 1 finds the queue empty that is S_{k+1}.
    double rest = 0.0;
    for (std::size_t k = path.size(); k-- > 0;) {
        const auto& r = path.records[k];
        const double own = f.eval(r.w_after()) - f.eval(r.w_next);
        if (r.w_next > 0.0) {
            rest += own;
        } else {
            terms.main[k] += arrivals.hazard(r.w_after()) * r.d * r.d * rest;
            rest = own;
        }
    }
}

}  // namespace

std::vector<double> first_order_summands(const CustomerPath& path, const BVFunctional& f, Side side,
                                         Pairing pairing) {
    const Terms t = first_order_terms(path, f, pairing);
    std::vector<double> out(t.main.size());
    const auto& corr = side == Side::left ? t.corr_left : t.corr_right;
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = t.main[k] - (side == Side::two_sided ? 0.0 : corr[k]);
    return out;
}

DerivativeEstimate first_order(const CustomerPath& path, const BVFunctional& f, Side side,
                               const EstimatorOptions& options) {
    require_kind(path, ParameterKind::service_theta, "first_order");
    return assemble(first_order_terms(path, f, options.pairing), side, intensity(path, options), options.batches,
                    path, Order::first);
}

DerivativeEstimate second_order(const CustomerPath& path, const BVFunctional& f, Side side,
                                const SecondOrderOptions& options) {
    require_kind(path, ParameterKind::service_theta, "second_order");
    if (!path.has_second_derivative) throw std::invalid_argument("second_order needs a path carrying d2");
    if (f.has_atoms()) throw std::invalid_argument("second_order requires a functional without atoms");

    auto term_for = [&](const BVFunctional& g) {
        const BVFunctional gp = g.formal_derivative();
        const double slope_at_zero = gp.eval(0.0);
        return [gp, slope_at_zero, &options](const CustomerRecord& r, const BVFunctional& h) {
            const double top = r.w_after();
            const double bottom = r.w_next;
            const double dd = r.d * r.d;
            double main = r.d2 * (h.eval(top) - h.eval(bottom)) + dd * (gp.eval(top) - gp.eval(bottom));
            if (options.idle_boundary_term && !(bottom > 0.0)) main += dd * slope_at_zero;
            // The indicator on d selects the side; d^2 scales both atoms.
            Term t{main, 0.0, 0.0};
            const double jump = dd * (gp.atom_mass(top) - gp.atom_mass(bottom));
            if (r.d < 0.0) t.corr_right = jump;
            if (r.d > 0.0) t.corr_left = jump;
            return t;
        };
    };

    Terms terms;
    if (const auto* parts = f.parts()) {
        if (parts->first.has_atoms() || parts->second.has_atoms())
            throw std::invalid_argument("second_order requires atom-free parts");
        Terms a = collect(path, parts->first, term_for(parts->first));
        const Terms b = collect(path, parts->second, term_for(parts->second));
        for (std::size_t k = 0; k < a.main.size(); ++k) {
            a.main[k] -= b.main[k];
            a.corr_right[k] -= b.corr_right[k];
            a.corr_left[k] -= b.corr_left[k];
        }
        terms = std::move(a);
    } else {
        terms = collect(path, f, term_for(f));
    }
    if (options.merge_arrivals) add_merge_term(path, f, *options.merge_arrivals, terms);
    return assemble(terms, side, path.lambda_hat, options.batches, path, Order::second);
}

DerivativeEstimate speed_derivative(const CustomerPath& path, const BVFunctional& f, Side side,
                                    const EstimatorOptions& options) {
    require_kind(path, ParameterKind::speed_nu, "speed_derivative");
    const double nu = path.parameter;
    return assemble(rate_terms(path, f, nu), side, intensity(path, options) / (nu * nu), options.batches, path,
                    Order::first);
}

DerivativeEstimate arrival_scale_derivative(const CustomerPath& path, const BVFunctional& f, Side side,
                                            const EstimatorOptions& options) {
    require_kind(path, ParameterKind::arrival_alpha, "arrival_scale_derivative");
    const double alpha = path.parameter;
    return assemble(rate_terms(path, f, alpha), side, intensity(path, options) / alpha, options.batches, path,
                    Order::first);
}

DerivativeEstimate classic_ipa(const CustomerPath& path, const BVFunctional& f, std::size_t batches) {
    require_kind(path, ParameterKind::service_theta, "classic_ipa");
    if (f.has_atoms()) throw std::invalid_argument("classic_ipa requires a functional without atoms");
    const Terms t = first_order_terms(path, f, Pairing::next_arrival);
    std::vector<double> taus(path.size());
    for (std::size_t k = 0; k < path.size(); ++k) taus[k] = path.records[k].tau;
    const BatchSummary bm = batch_ratio(t.main, taus, batches);
    DerivativeEstimate e;
    e.value = bm.mean;
    e.std_error = bm.std_error;
    e.batch_values = bm.batch_means;
    e.n_customers = path.size();
    e.side = Side::two_sided;
    e.parameter_kind = path.parameter_kind;
    e.lambda_hat = path.empirical_intensity();
    return e;
}

DerivativeEstimate tail_probability_derivative(const CustomerPath& path, double x, Side side, std::size_t batches) {
    require_kind(path, ParameterKind::service_theta, "tail_probability_derivative");
    Terms t;
    t.resize(path.size());
    for (std::size_t k = 0; k < path.size(); ++k) {
        const auto& r = path.records[k];
        const double top = r.w_after();
        const double bottom = r.w_next;
        const double crossed = (bottom < x && x <= top) ? 1.0 : 0.0;
        const double hits = (top == x ? 1.0 : 0.0) - (bottom == x ? 1.0 : 0.0);
        t.main[k] = r.d * crossed;
        if (r.d < 0.0) t.corr_right[k] = r.d * hits;
        if (r.d > 0.0) t.corr_left[k] = r.d * hits;
    }
    return assemble(t, side, path.lambda_hat, batches, path, Order::first);
}

}  // namespace gg1ipa
