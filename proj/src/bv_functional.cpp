#include "gg1ipa/bv_functional.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace gg1ipa {

namespace {

double poly_value(const std::vector<double>& poly, double u) {
    // Horner on sum_j poly[j-1] u^j
    double acc = 0.0;
    for (auto it = poly.rbegin(); it != poly.rend(); ++it) acc = (acc + *it) * u;
    return acc;
}

double poly_slope(const std::vector<double>& poly, double u) {
    double acc = 0.0;
    for (std::size_t j = poly.size(); j-- > 0;) acc = acc * u + static_cast<double>(j + 1) * poly[j];
    return acc;
}

double poly_integral(const std::vector<double>& poly, double u) {
    double acc = 0.0;
    for (std::size_t j = poly.size(); j-- > 0;) acc = (acc + poly[j] / static_cast<double>(j + 2)) * u;
    return acc * u;
}

double exp_value(const std::vector<ExpTerm>& exps, double u) {
    double acc = 0.0;
    for (const auto& e : exps) acc += e.amplitude * std::expm1(e.rate * u);
    return acc;
}

double exp_slope(const std::vector<ExpTerm>& exps, double u) {
    double acc = 0.0;
    for (const auto& e : exps) acc += e.amplitude * e.rate * std::exp(e.rate * u);
    return acc;
}

double exp_integral(const std::vector<ExpTerm>& exps, double u) {
    double acc = 0.0;
    for (const auto& e : exps) {
        if (e.rate == 0.0) continue;
        acc += e.amplitude * (std::expm1(e.rate * u) / e.rate - u);
    }
    return acc;
}

// Re-expresses g(u) as g(u + delta) - g(delta), a segment starting delta later.
SegmentSpec shifted(const SegmentSpec& s, double new_start) {
    const double delta = new_start - s.start;
    SegmentSpec out;
    out.start = new_start;
    if (delta == 0.0) {
        out.poly = s.poly;
        out.exps = s.exps;
        return out;
    }
    out.poly.assign(s.poly.size(), 0.0);
    // (u + delta)^j = sum_i C(j, i) u^i delta^(j-i); the i = 0 terms cancel.
    for (std::size_t jm1 = 0; jm1 < s.poly.size(); ++jm1) {
        const std::size_t j = jm1 + 1;
        double binom = 1.0;
        for (std::size_t i = 1; i <= j; ++i) {
            binom = binom * static_cast<double>(j - i + 1) / static_cast<double>(i);
            out.poly[i - 1] += s.poly[jm1] * binom * std::pow(delta, static_cast<double>(j - i));
        }
    }
    for (const auto& e : s.exps) out.exps.push_back({e.amplitude * std::exp(e.rate * delta), e.rate});
    return out;
}

SegmentSpec scaled(SegmentSpec s, double factor) {
    for (auto& c : s.poly) c *= factor;
    for (auto& e : s.exps) e.amplitude *= factor;
    return s;
}

SegmentSpec combined(const SegmentSpec& a, const SegmentSpec& b) {
    SegmentSpec out;
    out.start = a.start;
    out.poly.assign(std::max(a.poly.size(), b.poly.size()), 0.0);
    for (std::size_t i = 0; i < a.poly.size(); ++i) out.poly[i] += a.poly[i];
    for (std::size_t i = 0; i < b.poly.size(); ++i) out.poly[i] += b.poly[i];
    out.exps = a.exps;
    out.exps.insert(out.exps.end(), b.exps.begin(), b.exps.end());
    return out;
}

}  // namespace

BVFunctional::BVFunctional(std::vector<SegmentSpec> segments, std::vector<Atom> atoms,
                           double offset, FunctionalKind kind, double atom_tolerance)
    : offset_(offset), kind_(kind), atom_tolerance_(atom_tolerance) {
    if (!std::isfinite(offset)) throw std::invalid_argument("functional offset must be finite");
    if (!(atom_tolerance >= 0.0)) throw std::invalid_argument("atom tolerance must be >= 0");
    if (segments.empty()) segments.push_back(SegmentSpec{});
    if (segments.front().start != 0.0)
        throw std::invalid_argument("first segment must start at w = 0");
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const auto& s = segments[i];
        if (!std::isfinite(s.start)) throw std::invalid_argument("segment start must be finite");
        if (i > 0 && !(s.start > segments[i - 1].start))
            throw std::invalid_argument("segment starts must be strictly increasing");
        for (double c : s.poly)
            if (!std::isfinite(c)) throw std::invalid_argument("segment coefficient must be finite");
        for (const auto& e : s.exps)
            if (!std::isfinite(e.amplitude) || !std::isfinite(e.rate))
                throw std::invalid_argument("exponential term must be finite");
    }

    double value = 0.0;
    double prim = 0.0;
    segments_.reserve(segments.size());
    for (std::size_t i = 0; i < segments.size(); ++i) {
        auto& s = segments[i];
        if (i > 0) {
            const auto& prev = segments_.back();
            const double len = s.start - prev.start;
            value = prev.value0 + poly_value(prev.poly, len) + exp_value(prev.exps, len);
            prim = prev.primitive0 + prev.value0 * len + poly_integral(prev.poly, len) +
                   exp_integral(prev.exps, len);
        }
        segments_.push_back(Segment{s.start, std::move(s.poly), std::move(s.exps), value, prim});
    }

    std::sort(atoms.begin(), atoms.end(),
              [](const Atom& a, const Atom& b) { return a.location < b.location; });
    for (const auto& a : atoms) {
        if (!std::isfinite(a.location) || a.location < 0.0 || !std::isfinite(a.mass))
            throw std::invalid_argument("atom location must be finite and >= 0");
        if (a.mass == 0.0) continue;
        if (a.location == 0.0) {
            offset_ += a.mass;
            continue;
        }
        if (!atoms_.empty() && atoms_.back().location == a.location)
            atoms_.back().mass += a.mass;
        else
            atoms_.push_back(a);
    }
    std::erase_if(atoms_, [](const Atom& a) { return a.mass == 0.0; });

    mass_prefix_.assign(atoms_.size() + 1, 0.0);
    moment_prefix_.assign(atoms_.size() + 1, 0.0);
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
        mass_prefix_[i + 1] = mass_prefix_[i] + atoms_[i].mass;
        moment_prefix_[i + 1] = moment_prefix_[i] + atoms_[i].mass * atoms_[i].location;
    }

    if (kind_ == FunctionalKind::nondecreasing && !is_monotone())
        throw std::invalid_argument("functional declared non-decreasing is not monotone");
}

BVFunctional BVFunctional::constant(double value) { return BVFunctional({}, {}, value); }

BVFunctional BVFunctional::identity() { return BVFunctional({SegmentSpec{0.0, {1.0}, {}}}, {}); }

BVFunctional BVFunctional::indicator(double threshold) {
    if (!std::isfinite(threshold)) throw std::invalid_argument("indicator threshold must be finite");
    if (threshold <= 0.0) return constant(1.0);
    return BVFunctional({}, {Atom{threshold, 1.0}});
}

BVFunctional BVFunctional::ramp(double knee) {
    if (!std::isfinite(knee)) throw std::invalid_argument("ramp knee must be finite");
    if (knee <= 0.0) return BVFunctional({SegmentSpec{0.0, {1.0}, {}}}, {}, -knee);
    return BVFunctional({SegmentSpec{0.0, {}, {}}, SegmentSpec{knee, {1.0}, {}}}, {});
}

BVFunctional BVFunctional::polynomial(std::vector<double> coefficients) {
    if (coefficients.empty()) return constant(0.0);
    const double c0 = coefficients.front();
    std::vector<double> poly(coefficients.begin() + 1, coefficients.end());
    // Only the monotone check decides the kind; non-monotone polynomials are a signed
    // functional without declared parts.
    try {
        return BVFunctional({SegmentSpec{0.0, poly, {}}}, {}, c0);
    } catch (const std::invalid_argument&) {
        return BVFunctional({SegmentSpec{0.0, std::move(poly), {}}}, {}, c0,
                            FunctionalKind::difference_of_monotone);
    }
}

BVFunctional BVFunctional::tabulated(std::span<const std::pair<double, double>> points) {
    if (points.empty()) throw std::invalid_argument("tabulated functional needs at least one point");
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (points[i].first < 0.0 || !std::isfinite(points[i].first) || !std::isfinite(points[i].second))
            throw std::invalid_argument("tabulated points must be finite with w >= 0");
        if (i > 0 && !(points[i].first > points[i - 1].first))
            throw std::invalid_argument("tabulated abscissae must be strictly increasing");
    }
    std::vector<SegmentSpec> segs;
    segs.push_back(SegmentSpec{0.0, {}, {}});
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
        const double slope = (points[i + 1].second - points[i].second) / (points[i + 1].first - points[i].first);
        if (points[i].first == 0.0)
            segs.front().poly = {slope};
        else
            segs.push_back(SegmentSpec{points[i].first, {slope}, {}});
    }
    if (points.back().first > 0.0) segs.push_back(SegmentSpec{points.back().first, {}, {}});
    bool monotone = true;
    for (std::size_t i = 0; i + 1 < points.size(); ++i)
        monotone = monotone && points[i + 1].second >= points[i].second;
    return BVFunctional(std::move(segs), {}, points.front().second,
                        monotone ? FunctionalKind::nondecreasing : FunctionalKind::difference_of_monotone);
}

BVFunctional BVFunctional::difference(const BVFunctional& plus, const BVFunctional& minus) {
    if (plus.kind_ != FunctionalKind::nondecreasing || minus.kind_ != FunctionalKind::nondecreasing)
        throw std::invalid_argument("difference parts must both be non-decreasing");

    std::vector<double> starts;
    for (const auto& s : plus.segments_) starts.push_back(s.start);
    for (const auto& s : minus.segments_) starts.push_back(s.start);
    std::sort(starts.begin(), starts.end());
    starts.erase(std::unique(starts.begin(), starts.end()), starts.end());

    auto spec_of = [](const Segment& s) { return SegmentSpec{s.start, s.poly, s.exps}; };
    std::vector<SegmentSpec> merged;
    for (double st : starts) {
        const auto& p = plus.segments_[plus.segment_index(st)];
        const auto& m = minus.segments_[minus.segment_index(st)];
        merged.push_back(combined(shifted(spec_of(p), st), scaled(shifted(spec_of(m), st), -1.0)));
    }
    std::vector<Atom> atoms = plus.atoms_;
    for (const auto& a : minus.atoms_) atoms.push_back({a.location, -a.mass});

    BVFunctional out(std::move(merged), std::move(atoms), plus.offset_ - minus.offset_,
                     FunctionalKind::difference_of_monotone,
                     std::max(plus.atom_tolerance_, minus.atom_tolerance_));
    out.parts_ = std::make_shared<const std::pair<BVFunctional, BVFunctional>>(plus, minus);
    return out;
}

std::size_t BVFunctional::segment_index(double w) const {
    auto it = std::upper_bound(segments_.begin(), segments_.end(), w,
                               [](double v, const Segment& s) { return v < s.start; });
    return it == segments_.begin() ? 0 : static_cast<std::size_t>(it - segments_.begin()) - 1;
}

double BVFunctional::continuous(double w) const {
    const auto& s = segments_[segment_index(w)];
    const double u = w - s.start;
    return s.value0 + poly_value(s.poly, u) + exp_value(s.exps, u);
}

double BVFunctional::continuous_primitive(double w) const {
    const auto& s = segments_[segment_index(w)];
    const double u = w - s.start;
    return s.primitive0 + s.value0 * u + poly_integral(s.poly, u) + exp_integral(s.exps, u);
}

double BVFunctional::eval(double w) const {
    const auto n = static_cast<std::size_t>(
        std::upper_bound(atoms_.begin(), atoms_.end(), w + atom_tolerance_,
                         [](double v, const Atom& a) { return v < a.location; }) -
        atoms_.begin());
    return offset_ + continuous(w) + mass_prefix_[n];
}

double BVFunctional::left_limit(double w) const {
    if (w <= 0.0) return offset_;
    return eval(w) - atom_mass(w);
}

double BVFunctional::atom_mass(double w) const {
    auto lo = std::lower_bound(atoms_.begin(), atoms_.end(), w - atom_tolerance_,
                               [](const Atom& a, double v) { return a.location < v; });
    double mass = 0.0;
    for (auto it = lo; it != atoms_.end() && it->location <= w + atom_tolerance_; ++it) mass += it->mass;
    return mass;
}

double BVFunctional::interval_mass(double a, double b) const {
    if (a > b) throw std::invalid_argument("interval_mass requires a <= b");
    return eval(b) - eval(a);
}

double BVFunctional::primitive(double w) const {
    const auto n = static_cast<std::size_t>(
        std::upper_bound(atoms_.begin(), atoms_.end(), w,
                         [](double v, const Atom& a) { return v < a.location; }) -
        atoms_.begin());
    // Each atom at a contributes mass * (w - a)^+.
    return offset_ * w + continuous_primitive(w) + (mass_prefix_[n] * w - moment_prefix_[n]);
}

BVFunctional BVFunctional::formal_derivative() const {
    if (has_atoms()) throw std::invalid_argument("formal_derivative requires a functional without atoms");
    if (kind_ != FunctionalKind::nondecreasing)
        throw std::invalid_argument("formal_derivative requires a non-decreasing functional");

    std::vector<SegmentSpec> segs;
    std::vector<Atom> atoms;
    double slope_offset = 0.0;
    for (std::size_t i = 0; i < segments_.size(); ++i) {
        const auto& s = segments_[i];
        SegmentSpec d;
        d.start = s.start;
        for (std::size_t j = 1; j < s.poly.size(); ++j) d.poly.push_back(static_cast<double>(j + 1) * s.poly[j]);
        // a k e^{ku} = a k + a k (e^{ku} - 1)
        for (const auto& e : s.exps)
            if (e.rate != 0.0) d.exps.push_back({e.amplitude * e.rate, e.rate});
        const double start_slope = poly_slope(s.poly, 0.0) + exp_slope(s.exps, 0.0);
        if (i == 0) {
            slope_offset = start_slope;
        } else {
            const auto& prev = segments_[i - 1];
            const double len = s.start - prev.start;
            const double end_slope = poly_slope(prev.poly, len) + exp_slope(prev.exps, len);
            const double jump = start_slope - end_slope;
            const double scale = std::max({1.0, std::abs(start_slope), std::abs(end_slope)});
            if (std::abs(jump) > 1e-13 * scale) atoms.push_back({s.start, jump});
        }
        segs.push_back(std::move(d));
    }
    try {
        return BVFunctional(segs, atoms, slope_offset, FunctionalKind::nondecreasing, atom_tolerance_);
    } catch (const std::invalid_argument&) {
        return BVFunctional(std::move(segs), std::move(atoms), slope_offset,
                            FunctionalKind::difference_of_monotone, atom_tolerance_);
    }
}

BVFunctional BVFunctional::with_atom_tolerance(double tolerance) const {
    if (!(tolerance >= 0.0)) throw std::invalid_argument("atom tolerance must be >= 0");
    BVFunctional out = *this;
    out.atom_tolerance_ = tolerance;
    if (parts_)
        out.parts_ = std::make_shared<const std::pair<BVFunctional, BVFunctional>>(
            parts_->first.with_atom_tolerance(tolerance), parts_->second.with_atom_tolerance(tolerance));
    return out;
}

bool BVFunctional::is_monotone() const {
    for (const auto& a : atoms_)
        if (a.mass < 0.0) return false;
    // Sampled slope check; the last segment is probed over a long window and its
    // leading polynomial coefficient must not send it downward.
    constexpr int kProbes = 256;
    for (std::size_t i = 0; i < segments_.size(); ++i) {
        const auto& s = segments_[i];
        const bool last = i + 1 == segments_.size();
        const double len = last ? std::max(100.0, 10.0 * s.start) : segments_[i + 1].start - s.start;
        const double scale = std::max(1.0, std::abs(poly_slope(s.poly, 0.0)) + std::abs(exp_slope(s.exps, 0.0)));
        for (int p = 0; p <= kProbes; ++p) {
            const double u = len * p / kProbes;
            if (poly_slope(s.poly, u) + exp_slope(s.exps, u) < -1e-12 * scale) return false;
        }
        if (last) {
            for (const auto& e : s.exps)
                if (e.rate > 0.0 && e.amplitude < 0.0) return false;
            auto lead = std::find_if(s.poly.rbegin(), s.poly.rend(), [](double c) { return c != 0.0; });
            if (lead != s.poly.rend() && *lead < 0.0) return false;
        }
    }
    return true;
}

}  // namespace gg1ipa
