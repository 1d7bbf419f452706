#pragma once

#include <memory>
#include <span>
#include <utility>
#include <vector>

namespace gg1ipa {

/// Exponential component a * (exp(k u) - 1) of a segment, zero at the segment start.
struct ExpTerm {
    double amplitude = 0.0;
    double rate = 0.0;
};

/// Closed-form increment of the continuous part over one segment.
///
/// On [start, next_start) the continuous part equals its value at `start` plus
///   g(u) = sum_j poly[j-1] * u^j + sum_i exps[i].amplitude * (exp(exps[i].rate * u) - 1),
/// with u = w - start. Every component vanishes at u = 0, so the continuous part is
/// continuous by construction; jumps live only in the atom list.
struct SegmentSpec {
    double start = 0.0;
    std::vector<double> poly;  // poly[0] is the coefficient of u, poly[1] of u^2, ...
    std::vector<ExpTerm> exps;
};

/// Point mass of the Lebesgue-Stieltjes measure of f.
struct Atom {
    double location = 0.0;
    double mass = 0.0;
};

enum class FunctionalKind { nondecreasing, difference_of_monotone };

/// Cadlag function of bounded variation on [0, inf) with finitely many atoms.
///
///   f(w) = offset + continuous(w) + sum_{atoms a <= w} mass(a)
///
/// The continuous part is zero at w = 0, so f(0) = offset. Atoms at location 0 are
/// folded into the offset. A `difference_of_monotone` functional built through
/// difference() keeps its two non-decreasing parts so estimators can run per part.
///
/// Immutable after construction.
class BVFunctional {
public:
    BVFunctional(std::vector<SegmentSpec> segments, std::vector<Atom> atoms,
                 double offset = 0.0,
                 FunctionalKind kind = FunctionalKind::nondecreasing,
                 double atom_tolerance = 0.0);

    static BVFunctional constant(double value);
    static BVFunctional identity();
    /// 1{w >= threshold}.
    static BVFunctional indicator(double threshold);
    /// max(w - knee, 0).
    static BVFunctional ramp(double knee);
    /// sum_j coefficients[j] * w^j, coefficients[0] being the value at 0.
    static BVFunctional polynomial(std::vector<double> coefficients);
    /// Piecewise-linear interpolation through sorted (w, f) points, held constant past
    /// the last one and equal to the first value on [0, w_0].
    static BVFunctional tabulated(std::span<const std::pair<double, double>> points);
    /// plus - minus, both of which must be non-decreasing.
    static BVFunctional difference(const BVFunctional& plus, const BVFunctional& minus);

    FunctionalKind kind() const { return kind_; }
    double offset() const { return offset_; }
    double atom_tolerance() const { return atom_tolerance_; }
    const std::vector<Atom>& atoms() const { return atoms_; }
    bool has_atoms() const { return !atoms_.empty(); }

    /// Declared (plus, minus) parts for a difference, or nullptr.
    const std::pair<BVFunctional, BVFunctional>* parts() const { return parts_.get(); }

    double eval(double w) const;
    /// lim_{u -> w-} f(u) for w > 0; f(0) at w = 0.
    double left_limit(double w) const;
    double atom_mass(double w) const;
    double interval_mass(double a, double b) const;
    /// F(w) = int_0^w f(u) du, exact.
    double primitive(double w) const;
    /// f' as a functional, with atoms at the kinks of f. Requires an atom-free,
    /// non-decreasing f.
    BVFunctional formal_derivative() const;

    /// Returns a copy matching atoms within `tolerance` instead of exactly.
    BVFunctional with_atom_tolerance(double tolerance) const;

private:
    struct Segment {
        double start;
        std::vector<double> poly;
        std::vector<ExpTerm> exps;
        double value0 = 0.0;      // continuous part at start
        double primitive0 = 0.0;  // integral of the continuous part over [0, start]
    };

    BVFunctional() = default;

    std::size_t segment_index(double w) const;
    double continuous(double w) const;
    double continuous_primitive(double w) const;
    bool is_monotone() const;

    std::vector<Segment> segments_;
    std::vector<Atom> atoms_;
    std::vector<double> mass_prefix_;         // sum of masses of atoms [0, i)
    std::vector<double> moment_prefix_;       // sum of mass * location of atoms [0, i)
    double offset_ = 0.0;
    FunctionalKind kind_ = FunctionalKind::nondecreasing;
    double atom_tolerance_ = 0.0;
    std::shared_ptr<const std::pair<BVFunctional, BVFunctional>> parts_;
};

}  // namespace gg1ipa
