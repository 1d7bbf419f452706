#include "gg1ipa/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

namespace gg1ipa {

std::string EstimatorSpec::label() const {
    std::string s = op + "/" + std::string(to_string(side));
    if (pairing == Pairing::same_arrival) s += "/same-arrival";
    if (idle_boundary_term) s += "/idle-boundary";
    if (merge_correction) s += "/merge";
    return s;
}

double OracleSpec::step(double parameter) const { return relative ? h * std::abs(parameter) : h; }

SimulationOptions ExperimentConfig::simulation_options(std::uint64_t replication, bool check_stability) const {
    SimulationOptions o;
    o.customers = horizon;
    o.warmup = warmup.value_or(default_warmup(scenario.offered_load()));
    o.seed = seed;
    o.replication = replication;
    o.check_stability = check_stability;
    return o;
}

json ValidationReport::to_json() const {
    json out = {{"errors", json::array()}, {"warnings", json::array()}};
    for (const auto& e : errors) out["errors"].push_back({{"field", e.field}, {"message", e.message}});
    for (const auto& w : warnings) out["warnings"].push_back({{"field", w.field}, {"message", w.message}});
    return out;
}

namespace {

std::string join_issues(const std::vector<ValidationIssue>& issues) {
    std::string s;
    for (const auto& i : issues) s += (s.empty() ? "" : "; ") + i.field + ": " + i.message;
    return s;
}

}  // namespace

ConfigError::ConfigError(std::vector<ValidationIssue> issues)
    : std::runtime_error(join_issues(issues)), issues_(std::move(issues)) {}

namespace {

// Walks the document, collecting problems instead of throwing.
class Reader {
public:
    std::vector<ValidationIssue> errors;
    std::vector<ValidationIssue> warnings;

    void error(const std::string& field, const std::string& message) { errors.push_back({field, message}); }

    const json* member(const json& obj, const std::string& key, const std::string& field, bool required = true) {
        if (!obj.is_object()) return nullptr;
        auto it = obj.find(key);
        if (it == obj.end()) {
            if (required) error(field, "missing");
            return nullptr;
        }
        return &*it;
    }

    std::optional<double> number(const json& obj, const std::string& key, const std::string& field,
                                 bool required = true) {
        const json* v = member(obj, key, field, required);
        if (!v) return std::nullopt;
        if (!v->is_number()) {
            error(field, "expected a number");
            return std::nullopt;
        }
        const double x = v->get<double>();
        if (!std::isfinite(x)) {
            error(field, "must be finite");
            return std::nullopt;
        }
        return x;
    }

    std::optional<std::uint64_t> count(const json& obj, const std::string& key, const std::string& field,
                                       bool required = true) {
        const json* v = member(obj, key, field, required);
        if (!v) return std::nullopt;
        if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() && v->get<std::int64_t>() < 0)) {
            error(field, "expected a non-negative integer");
            return std::nullopt;
        }
        return v->get<std::uint64_t>();
    }

    std::optional<std::string> string(const json& obj, const std::string& key, const std::string& field,
                                      bool required = true) {
        const json* v = member(obj, key, field, required);
        if (!v) return std::nullopt;
        if (!v->is_string()) {
            error(field, "expected a string");
            return std::nullopt;
        }
        return v->get<std::string>();
    }

    std::optional<bool> boolean(const json& obj, const std::string& key, const std::string& field) {
        const json* v = member(obj, key, field, false);
        if (!v) return std::nullopt;
        if (!v->is_boolean()) {
            error(field, "expected true or false");
            return std::nullopt;
        }
        return v->get<bool>();
    }

    std::vector<double> numbers(const json& v, const std::string& field) {
        std::vector<double> out;
        if (!v.is_array()) {
            error(field, "expected an array of numbers");
            return out;
        }
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number() || !std::isfinite(v[i].get<double>())) {
                error(field + "[" + std::to_string(i) + "]", "expected a finite number");
                continue;
            }
            out.push_back(v[i].get<double>());
        }
        return out;
    }

    bool object(const json* v, const std::string& field) {
        if (!v) return false;
        if (!v->is_object()) {
            error(field, "expected an object");
            return false;
        }
        return true;
    }
};

std::optional<ArrivalModel> read_arrivals(Reader& rd, const json& doc) {
    const json* a = rd.member(doc, "arrivals", "arrivals");
    if (!rd.object(a, "arrivals")) return std::nullopt;
    const auto family = rd.string(*a, "family", "arrivals.family");
    if (!family) return std::nullopt;
    auto positive = [&](const std::string& key) -> std::optional<double> {
        auto v = rd.number(*a, key, "arrivals." + key);
        if (v && !(*v > 0.0)) {
            rd.error("arrivals." + key, "must be > 0");
            return std::nullopt;
        }
        return v;
    };
    if (*family == "poisson" || *family == "deterministic") {
        const auto rate = positive("rate");
        if (!rate) return std::nullopt;
        return *family == "poisson" ? ArrivalModel::poisson(*rate) : ArrivalModel::deterministic(*rate);
    }
    if (*family == "erlang") {
        const auto rate = positive("rate");
        const auto phases = rd.count(*a, "phases", "arrivals.phases");
        if (phases && (*phases < 1 || *phases > 1000)) {
            rd.error("arrivals.phases", "must be between 1 and 1000");
            return std::nullopt;
        }
        if (!rate || !phases) return std::nullopt;
        return ArrivalModel::erlang(static_cast<int>(*phases), *rate);
    }
    if (*family == "uniform") {
        const auto lo = rd.number(*a, "lo", "arrivals.lo");
        const auto hi = rd.number(*a, "hi", "arrivals.hi");
        if (!lo || !hi) return std::nullopt;
        if (!(*lo >= 0.0 && *hi > *lo)) {
            rd.error("arrivals.hi", "need 0 <= lo < hi");
            return std::nullopt;
        }
        return ArrivalModel::uniform(*lo, *hi);
    }
    rd.error("arrivals.family", "unknown family '" + *family + "' (poisson, deterministic, erlang, uniform)");
    return std::nullopt;
}

std::optional<ServiceModel> read_services(Reader& rd, const json& doc, Interval range) {
    const json* s = rd.member(doc, "services", "services");
    if (!rd.object(s, "services")) return std::nullopt;
    const auto family = rd.string(*s, "family", "services.family");
    if (!family) return std::nullopt;
    if (*family == "exponential-scale") return ServiceModel::exponential_scale(range);
    if (*family == "deterministic-scale") return ServiceModel::deterministic_scale(range);
    if (*family == "exponential-rate") return ServiceModel::exponential_rate(range);
    if (*family == "weibull-scale") {
        const auto shape = rd.number(*s, "shape", "services.shape");
        if (shape && !(*shape > 0.0)) rd.error("services.shape", "must be > 0");
        if (!shape || !(*shape > 0.0)) return std::nullopt;
        return ServiceModel::weibull_scale(*shape, range);
    }
    if (*family == "power-scale") {
        const auto p = rd.number(*s, "exponent", "services.exponent");
        if (!p) return std::nullopt;
        return ServiceModel::power_scale(*p, range);
    }
    rd.error("services.family", "unknown family '" + *family +
                                    "' (exponential-scale, deterministic-scale, weibull-scale, exponential-rate, "
                                    "power-scale)");
    return std::nullopt;
}

std::optional<BVFunctional> build_functional(Reader& rd, const json& f, const std::string& field) {
    if (!f.is_object()) {
        rd.error(field, "expected an object");
        return std::nullopt;
    }
    const auto type = rd.string(f, "type", field + ".type");
    if (!type) return std::nullopt;
    try {
        std::optional<BVFunctional> out;
        if (*type == "identity") {
            out = BVFunctional::identity();
        } else if (*type == "constant") {
            if (auto v = rd.number(f, "value", field + ".value")) out = BVFunctional::constant(*v);
        } else if (*type == "indicator") {
            if (auto x = rd.number(f, "threshold", field + ".threshold")) out = BVFunctional::indicator(*x);
        } else if (*type == "ramp") {
            if (auto a = rd.number(f, "knee", field + ".knee")) out = BVFunctional::ramp(*a);
        } else if (*type == "polynomial") {
            if (const json* c = rd.member(f, "coefficients", field + ".coefficients"))
                out = BVFunctional::polynomial(rd.numbers(*c, field + ".coefficients"));
        } else if (*type == "piecewise") {
            std::vector<SegmentSpec> segments;
            std::vector<Atom> atoms;
            if (const json* segs = rd.member(f, "segments", field + ".segments", false)) {
                if (!segs->is_array()) rd.error(field + ".segments", "expected an array");
                for (std::size_t i = 0; segs->is_array() && i < segs->size(); ++i) {
                    const std::string sf = field + ".segments[" + std::to_string(i) + "]";
                    const json& sj = (*segs)[i];
                    if (!sj.is_object()) {
                        rd.error(sf, "expected an object");
                        continue;
                    }
                    SegmentSpec spec;
                    spec.start = rd.number(sj, "start", sf + ".start").value_or(0.0);
                    if (const json* p = rd.member(sj, "poly", sf + ".poly", false))
                        spec.poly = rd.numbers(*p, sf + ".poly");
                    if (const json* e = rd.member(sj, "exps", sf + ".exps", false)) {
                        if (!e->is_array()) rd.error(sf + ".exps", "expected an array");
                        for (std::size_t k = 0; e->is_array() && k < e->size(); ++k) {
                            const std::string ef = sf + ".exps[" + std::to_string(k) + "]";
                            const auto amp = rd.number((*e)[k], "amplitude", ef + ".amplitude");
                            const auto rate = rd.number((*e)[k], "rate", ef + ".rate");
                            if (amp && rate) spec.exps.push_back({*amp, *rate});
                        }
                    }
                    segments.push_back(std::move(spec));
                }
            }
            if (const json* at = rd.member(f, "atoms", field + ".atoms", false)) {
                if (!at->is_array()) rd.error(field + ".atoms", "expected an array");
                for (std::size_t i = 0; at->is_array() && i < at->size(); ++i) {
                    const std::string af = field + ".atoms[" + std::to_string(i) + "]";
                    const auto loc = rd.number((*at)[i], "location", af + ".location");
                    const auto mass = rd.number((*at)[i], "mass", af + ".mass");
                    if (loc && mass) atoms.push_back({*loc, *mass});
                }
            }
            const double offset = rd.number(f, "offset", field + ".offset", false).value_or(0.0);
            try {
                out = BVFunctional(segments, atoms, offset);
            } catch (const std::invalid_argument&) {
                out = BVFunctional(segments, atoms, offset, FunctionalKind::difference_of_monotone);
            }
        } else if (*type == "difference") {
            const json* p = rd.member(f, "plus", field + ".plus");
            const json* m = rd.member(f, "minus", field + ".minus");
            std::optional<BVFunctional> plus = p ? build_functional(rd, *p, field + ".plus") : std::nullopt;
            std::optional<BVFunctional> minus = m ? build_functional(rd, *m, field + ".minus") : std::nullopt;
            if (plus && minus) out = BVFunctional::difference(*plus, *minus);
        } else {
            rd.error(field + ".type", "unknown functional type '" + *type +
                                          "' (identity, constant, indicator, ramp, polynomial, piecewise, "
                                          "difference)");
        }
        if (out) {
            if (auto tol = rd.number(f, "atom_tolerance", field + ".atom_tolerance", false)) {
                if (*tol < 0.0) {
                    rd.error(field + ".atom_tolerance", "must be >= 0");
                } else {
                    out = out->with_atom_tolerance(*tol);
                }
            }
        }
        return out;
    } catch (const std::exception& e) {
        rd.error(field, e.what());
        return std::nullopt;
    }
}

const char* required_kind(const std::string& op) {
    if (op == "first_order" || op == "second_order" || op == "classic_ipa") return "service-theta";
    if (op == "speed_derivative") return "speed-nu";
    if (op == "arrival_scale_derivative") return "arrival-alpha";
    return nullptr;
}

bool any_atoms(const BVFunctional& f) {
    if (f.has_atoms()) return true;
    if (const auto* p = f.parts()) return p->first.has_atoms() || p->second.has_atoms();
    return false;
}

std::vector<double> stencil_offsets(Stencil s) {
    switch (s) {
        case Stencil::forward: return {0.0, 1.0};
        case Stencil::backward: return {-1.0, 0.0};
        case Stencil::central: return {-1.0, 1.0};
        case Stencil::second_central: return {0.0, 2.0};
        case Stencil::second_symmetric: return {-1.0, 1.0};
    }
    return {};
}

struct Parsed {
    std::optional<ExperimentConfig> config;
    Reader reader;
};

Parsed parse(const json& doc) {
    Parsed out;
    Reader& rd = out.reader;
    if (!doc.is_object()) {
        rd.error("", "config must be an object");
        return out;
    }
    static const std::vector<std::string> known = {"arrivals", "services", "parameter", "functional",
                                                   "estimators", "horizon", "warmup", "replications",
                                                   "seed", "batches", "oracles", "palm_checks"};
    for (auto it = doc.begin(); it != doc.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end()) rd.error(it.key(), "unknown field");

    ExperimentConfig cfg;
    bool complete = true;

    // parameter
    std::optional<ParameterKind> kind;
    std::optional<double> value;
    Interval range{};
    const json* par = rd.member(doc, "parameter", "parameter");
    if (rd.object(par, "parameter")) {
        if (auto k = rd.string(*par, "kind", "parameter.kind")) {
            try {
                kind = parameter_kind_from_string(*k);
            } catch (const std::exception&) {
                rd.error("parameter.kind", "unknown kind '" + *k + "' (service-theta, speed-nu, arrival-alpha)");
            }
        }
        value = rd.number(*par, "value", "parameter.value");
        if (const json* iv = rd.member(*par, "interval", "parameter.interval", false)) {
            const auto xs = rd.numbers(*iv, "parameter.interval");
            if (xs.size() != 2 || !(xs[0] <= xs[1])) {
                rd.error("parameter.interval", "expected [lo, hi] with lo <= hi");
            } else {
                range = {xs[0], xs[1]};
            }
        } else if (value) {
            range = {*value, *value};
        }
        if (value && !range.contains(*value)) rd.error("parameter.value", "outside parameter.interval");
        if (kind && value && *kind != ParameterKind::service_theta && !(*value > 0.0))
            rd.error("parameter.value", "must be > 0");
        if (kind && *kind == ParameterKind::service_theta && !(range.lo >= 0.0))
            rd.error("parameter.interval", "theta must be >= 0");
    }
    complete = complete && kind && value;

    // services: the theta interval is the parameter interval when theta varies
    std::optional<double> service_theta;
    if (kind && *kind != ParameterKind::service_theta) {
        if (const json* s = rd.member(doc, "services", "services", false); s && s->is_object()) {
            service_theta = rd.number(*s, "theta", "services.theta");
            if (service_theta && !(*service_theta > 0.0)) rd.error("services.theta", "must be > 0");
        }
    }
    const Interval service_range = (kind && *kind != ParameterKind::service_theta)
                                       ? Interval{service_theta.value_or(1.0), service_theta.value_or(1.0)}
                                       : range;
    auto arrivals = read_arrivals(rd, doc);
    auto services = read_services(rd, doc, service_range);
    complete = complete && arrivals && services;

    // functional
    std::optional<BVFunctional> functional;
    if (const json* f = rd.member(doc, "functional", "functional")) {
        functional = build_functional(rd, *f, "functional");
        cfg.functional_spec = *f;
    }
    complete = complete && functional;

    // horizon, warmup, replications, seed, batches
    const auto horizon = rd.count(doc, "horizon", "horizon");
    if (horizon && *horizon < 1) rd.error("horizon", "must be >= 1");
    const auto warmup = rd.count(doc, "warmup", "warmup", false);
    if (horizon && warmup && !(*horizon > *warmup)) rd.error("horizon", "must exceed warmup");
    const auto reps = rd.count(doc, "replications", "replications", false);
    if (reps && *reps < 1) rd.error("replications", "must be >= 1");
    const auto seed = rd.count(doc, "seed", "seed", false);
    const auto batches = rd.count(doc, "batches", "batches", false);
    if (batches && *batches < 2) rd.error("batches", "must be >= 2");
    if (batches && horizon && *batches > *horizon) rd.error("batches", "must not exceed horizon");
    complete = complete && horizon;

    // estimators
    if (const json* es = rd.member(doc, "estimators", "estimators", false)) {
        if (!es->is_array()) rd.error("estimators", "expected an array");
        for (std::size_t i = 0; es->is_array() && i < es->size(); ++i) {
            const std::string field = "estimators[" + std::to_string(i) + "]";
            const json& e = (*es)[i];
            if (!e.is_object()) {
                rd.error(field, "expected an object");
                continue;
            }
            EstimatorSpec spec;
            const auto op = rd.string(e, "op", field + ".op");
            if (!op) continue;
            spec.op = *op;
            const char* needs = required_kind(spec.op);
            if (!needs) {
                rd.error(field + ".op", "unknown op '" + spec.op +
                                            "' (first_order, second_order, speed_derivative, "
                                            "arrival_scale_derivative, classic_ipa)");
                continue;
            }
            if (kind && to_string(*kind) != needs)
                rd.error(field + ".op", spec.op + " needs parameter.kind " + needs);
            spec.order = spec.op == "second_order" ? Order::second : Order::first;
            if (auto o = rd.string(e, "order", field + ".order", false)) {
                if (*o != to_string(spec.order)) rd.error(field + ".order", "does not match op " + spec.op);
            }
            if (auto s = rd.string(e, "side", field + ".side", false)) {
                try {
                    spec.side = side_from_string(*s);
                } catch (const std::exception&) {
                    rd.error(field + ".side", "expected right, left or two-sided");
                }
            }
            if (spec.op == "classic_ipa" && spec.side != Side::two_sided)
                rd.error(field + ".side", "classic_ipa is two-sided only");
            if (auto p = rd.string(e, "pairing", field + ".pairing", false)) {
                if (spec.op != "first_order") rd.error(field + ".pairing", "only applies to first_order");
                if (*p == "same-arrival") spec.pairing = Pairing::same_arrival;
                else if (*p != "next-arrival") rd.error(field + ".pairing", "expected next-arrival or same-arrival");
            }
            spec.idle_boundary_term = rd.boolean(e, "idle_boundary_term", field + ".idle_boundary_term").value_or(false);
            spec.merge_correction = rd.boolean(e, "merge_correction", field + ".merge_correction").value_or(false);
            if ((spec.idle_boundary_term || spec.merge_correction) && spec.op != "second_order")
                rd.error(field, "idle_boundary_term and merge_correction only apply to second_order");
            if (functional && any_atoms(*functional) && (spec.op == "second_order" || spec.op == "classic_ipa"))
                rd.error(field + ".op", spec.op + " requires a functional without atoms");
            cfg.estimators.push_back(spec);
        }
    }

    // oracles
    if (const json* os = rd.member(doc, "oracles", "oracles", false)) {
        if (!os->is_array()) rd.error("oracles", "expected an array");
        for (std::size_t i = 0; os->is_array() && i < os->size(); ++i) {
            const std::string field = "oracles[" + std::to_string(i) + "]";
            const json& o = (*os)[i];
            if (!o.is_object()) {
                rd.error(field, "expected an object");
                continue;
            }
            OracleSpec spec;
            const auto type = rd.string(o, "type", field + ".type");
            if (!type) continue;
            if (*type == "analytic") {
                spec.kind = OracleSpec::Kind::analytic;
            } else if (*type == "finite-difference") {
                spec.kind = OracleSpec::Kind::finite_difference;
                spec.h = rd.number(o, "h", field + ".h", false).value_or(0.01);
                spec.relative = rd.boolean(o, "relative", field + ".relative").value_or(true);
                if (auto s = rd.string(o, "stencil", field + ".stencil", false)) {
                    try {
                        spec.stencil = stencil_from_string(*s);
                    } catch (const std::exception&) {
                        rd.error(field + ".stencil",
                                 "expected forward, backward, central, second-central or second-symmetric");
                    }
                }
                const double step = value ? spec.step(*value) : spec.h;
                if (!(step > 0.0)) {
                    rd.error(field + ".h", "step must be > 0");
                } else if (value) {
                    for (double off : stencil_offsets(spec.stencil))
                        if (!range.contains(*value + off * step)) {
                            rd.error(field + ".h", "stencil leaves parameter.interval");
                            break;
                        }
                }
            } else {
                rd.error(field + ".type", "expected finite-difference or analytic");
                continue;
            }
            cfg.oracles.push_back(spec);
        }
    }

    // palm checks
    if (const json* ps = rd.member(doc, "palm_checks", "palm_checks", false)) {
        if (!ps->is_array()) rd.error("palm_checks", "expected an array");
        for (std::size_t i = 0; ps->is_array() && i < ps->size(); ++i) {
            const std::string field = "palm_checks[" + std::to_string(i) + "]";
            if (!(*ps)[i].is_string()) {
                rd.error(field, "expected a string");
                continue;
            }
            try {
                const PalmIdentity id = palm_identity_from_string((*ps)[i].get<std::string>());
                if (id == PalmIdentity::ergodic_equivalence && kind && *kind != ParameterKind::service_theta)
                    rd.error(field, "ergodic-equivalence needs parameter.kind service-theta");
                cfg.palm_checks.push_back(id);
            } catch (const std::exception&) {
                rd.error(field, "expected inversion, wald-lemma or ergodic-equivalence");
            }
        }
    }

    if (!complete || !rd.errors.empty()) return out;

    cfg.scenario = Scenario{*arrivals, *services, *kind, *value, service_theta.value_or(*value)};
    cfg.parameter_range = range;
    cfg.functional = *functional;
    cfg.horizon = *horizon;
    cfg.warmup = warmup;
    cfg.replications = reps.value_or(1);
    cfg.seed = seed.value_or(0);
    cfg.batches = batches.value_or(kDefaultBatches);
    cfg.document = doc;
    cfg.document["replications"] = cfg.replications;
    cfg.document["seed"] = cfg.seed;
    out.config = std::move(cfg);
    return out;
}

}  // namespace

StabilityReport config_stability(const ExperimentConfig& c) {
    const Scenario& sc = c.scenario;
    if (sc.kind == ParameterKind::service_theta)
        return stability_check(sc.arrivals, sc.services, c.parameter_range, 20000, c.seed);
    return stability_check(sc.arrivals, sc.services, sc.kind, c.parameter_range, sc.service_theta, 20000, c.seed);
}

ValidationReport validate_config(const json& document, bool probe_stability) {
    Parsed p = parse(document);
    ValidationReport report{std::move(p.reader.errors), std::move(p.reader.warnings)};
    if (p.config && probe_stability) {
        try {
            const StabilityReport s = config_stability(*p.config);
            if (!s.stable)
                report.warnings.push_back(
                    {"parameter.interval", "unstable: offered load " + std::to_string(s.load_estimate) + " >= 1"});
        } catch (const std::exception& e) {
            report.warnings.push_back({"parameter.interval", std::string("unstable: ") + e.what()});
        }
    }
    return report;
}

ExperimentConfig parse_config(const json& document) {
    Parsed p = parse(document);
    if (!p.config) {
        if (p.reader.errors.empty()) p.reader.error("", "incomplete config");
        throw ConfigError(std::move(p.reader.errors));
    }
    return std::move(*p.config);
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(std::vector<ValidationIssue>{{"", "cannot open '" + path + "'"}});
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ConfigError(std::vector<ValidationIssue>{{"", "'" + path + "' is not valid JSON"}});
    return doc;
}

ExperimentConfig load_config(const std::string& path) { return parse_config(read_json_file(path)); }

FDEstimate finite_difference(const ExperimentConfig& c, double h, Stencil stencil, std::uint64_t replication) {
    return finite_difference(c.scenario, c.simulation_options(replication), c.functional, h, stencil, c.batches);
}

std::optional<double> analytic_value(const ExperimentConfig& c, const EstimatorSpec& e) {
    const Scenario& sc = c.scenario;
    const json& f = c.functional_spec;
    const std::string type = f.value("type", "");
    const bool mm1 = sc.arrivals.family() == ArrivalFamily::poisson &&
                     sc.services.family() == ServiceFamily::exponential_scale;
    const bool dd1 = sc.arrivals.family() == ArrivalFamily::deterministic &&
                     sc.services.family() == ServiceFamily::deterministic_scale;
    const double lambda = sc.arrivals.rate();
    const double theta = sc.theta();
    bool quadratic = false;
    double c2 = 0.0;
    if (type == "polynomial" && f.contains("coefficients") && f["coefficients"].is_array()) {
        const auto& cs = f["coefficients"];
        quadratic = cs.size() == 3 && cs[1].is_number() && cs[1].get<double>() == 0.0 && cs[2].is_number();
        if (quadratic) c2 = cs[2].get<double>();
    }
    try {
        if (mm1 && sc.kind == ParameterKind::service_theta) {
            const Mm1Workload w(lambda, theta);
            if (e.op == "second_order") {
                // The plain second-order estimator ignores busy-period merges, so the
                // closed form only describes the corrected one.
                if (!e.merge_correction) return std::nullopt;
                if (type == "identity" && e.idle_boundary_term) return w.d2_mean();
                if (quadratic) return 2.0 * c2 * w.d2_half_second_moment();
                return std::nullopt;
            }
            if (type == "identity") return w.d_mean();
            if (type == "indicator") return w.d_tail(f.value("threshold", 0.0));
            if (quadratic) return 2.0 * c2 * w.d_half_second_moment();
        }
        if (mm1 && sc.kind == ParameterKind::speed_nu && type == "identity")
            return mm1_speed_d_mean(lambda, theta, sc.value);
        if (mm1 && sc.kind == ParameterKind::arrival_alpha && type == "identity")
            return mm1_scale_d_mean(lambda, theta, sc.value);
        if (dd1 && sc.kind == ParameterKind::service_theta && e.order == Order::first) {
            const double tau = 1.0 / lambda;
            if (type == "identity") return dd1_closed_forms(tau, theta, 0.0).d_mean;
            if (type == "indicator") {
                const Dd1ClosedForms d = dd1_closed_forms(tau, theta, f.value("threshold", 0.0));
                if (e.side == Side::right) return d.Jr;
                if (e.side == Side::left) return d.Jl;
                if (d.Jr == d.Jl) return d.Jr;
            }
        }
    } catch (const std::exception&) {
        return std::nullopt;
    }
    return std::nullopt;
}

namespace {

DerivativeEstimate estimate(const EstimatorSpec& spec, const CustomerPath& path, const ExperimentConfig& c) {
    EstimatorOptions eo;
    eo.batches = c.batches;
    eo.pairing = spec.pairing;
    if (spec.op == "first_order") return first_order(path, c.functional, spec.side, eo);
    if (spec.op == "speed_derivative") return speed_derivative(path, c.functional, spec.side, eo);
    if (spec.op == "arrival_scale_derivative") return arrival_scale_derivative(path, c.functional, spec.side, eo);
    if (spec.op == "classic_ipa") return classic_ipa(path, c.functional, c.batches);
    if (spec.op == "second_order") {
        SecondOrderOptions so;
        so.batches = c.batches;
        so.idle_boundary_term = spec.idle_boundary_term;
        if (spec.merge_correction) so.merge_arrivals = c.scenario.arrivals;
        return second_order(path, c.functional, spec.side, so);
    }
    throw std::invalid_argument("unknown estimator op '" + spec.op + "'");
}

ReplicationResult run_replication(const ExperimentConfig& c, std::size_t r, bool check, const RunOptions& opt) {
    ReplicationResult out;
    out.replication = r;
    const SimulationOptions so = c.simulation_options(r, check);
    const CustomerPath path = simulate_path(c.scenario, so);

    if (opt.estimators)
        for (const auto& spec : c.estimators) out.estimates.push_back(estimate(spec, path, c));

    if (opt.oracles && opt.estimators) {
        for (const auto& o : c.oracles) {
            if (o.kind != OracleSpec::Kind::finite_difference) continue;
            const FDEstimate fd =
                finite_difference(c.scenario, so, c.functional, o.step(c.scenario.value), o.stencil, c.batches);
            out.finite_differences.push_back(fd);
            for (std::size_t i = 0; i < c.estimators.size(); ++i) {
                const bool second = c.estimators[i].order == Order::second;
                if (second != is_second_order(o.stencil)) continue;
                const DerivativeEstimate& e = out.estimates[i];
                OracleComparison cmp;
                cmp.estimator = c.estimators[i].label();
                cmp.kind = o.kind;
                cmp.stencil = o.stencil;
                cmp.h = fd.h;
                cmp.value = fd.value;
                cmp.std_error = fd.std_error;
                cmp.joint_std_error = e.batch_values.size() == fd.batch_values.size()
                                          ? joint_std_error(e.batch_values, fd.batch_values)
                                          : std::hypot(e.std_error, fd.std_error);
                out.comparisons.push_back(cmp);
            }
        }
    }

    if (opt.palm_checks) {
        for (PalmIdentity id : c.palm_checks) {
            switch (id) {
                case PalmIdentity::inversion:
                    out.palm.push_back(check_inversion(path, ProcessKind::functional, c.functional, 3.0, c.batches));
                    break;
                case PalmIdentity::wald_lemma:
                    out.palm.push_back(check_wald_lemma(path, c.functional, 3.0, c.batches));
                    break;
                case PalmIdentity::ergodic_equivalence: {
                    // classic_ipa needs an atom-free functional; fall back to the workload.
                    const BVFunctional g = any_atoms(c.functional) ? BVFunctional::identity() : c.functional;
                    out.palm.push_back(check_ergodic_equivalence(path, g, c.batches));
                    break;
                }
            }
        }
    }
    return out;
}

void pool_results(RunResult& result) {
    const ExperimentConfig& c = result.config;
    const auto& reps = result.replications;
    const double r = static_cast<double>(reps.size());

    for (std::size_t i = 0; i < c.estimators.size() && !reps.empty() && !reps[0].estimates.empty(); ++i) {
        const EstimatorSpec& spec = c.estimators[i];
        std::vector<double> values, ses;
        double corr = 0.0;
        for (const auto& rep : reps) {
            values.push_back(rep.estimates[i].value);
            ses.push_back(rep.estimates[i].std_error);
            corr += rep.estimates[i].atom_correction;
        }
        const Pooled p = pool(values, ses);
        PooledRow base;
        base.estimator = spec.label();
        base.op = spec.op;
        base.side = spec.side;
        base.order = spec.order;
        base.value = p.mean;
        base.std_error = p.std_error;
        base.atom_correction = corr / r;
        base.n_customers = reps[0].estimates[i].n_customers;

        bool any_oracle = false;
        for (std::size_t k = 0; k < reps[0].comparisons.size(); ++k) {
            if (reps[0].comparisons[k].estimator != base.estimator) continue;
            std::vector<double> ov, os;
            double joint_ss = 0.0;
            for (const auto& rep : reps) {
                ov.push_back(rep.comparisons[k].value);
                os.push_back(rep.comparisons[k].std_error);
                joint_ss += rep.comparisons[k].joint_std_error * rep.comparisons[k].joint_std_error;
            }
            const Pooled po = pool(ov, os);
            PooledRow row = base;
            row.oracle = "finite-difference/" + std::string(to_string(reps[0].comparisons[k].stencil));
            row.oracle_value = po.mean;
            row.oracle_std_error = po.std_error;
            row.joint_std_error = std::sqrt(joint_ss) / r;
            result.pooled.push_back(row);
            any_oracle = true;
        }
        for (const auto& o : c.oracles) {
            if (o.kind != OracleSpec::Kind::analytic) continue;
            if (auto v = analytic_value(c, spec)) {
                PooledRow row = base;
                row.oracle = "analytic";
                row.oracle_value = *v;
                row.joint_std_error = base.std_error;
                result.pooled.push_back(row);
                any_oracle = true;
            }
        }
        if (!any_oracle) result.pooled.push_back(base);
    }

    for (std::size_t k = 0; !reps.empty() && k < reps[0].palm.size(); ++k) {
        PooledPalm pp;
        pp.identity = reps[0].palm[k].identity;
        double joint_ss = 0.0;
        double tol_ss = 0.0;
        bool all_pass = true;
        for (const auto& rep : reps) {
            pp.lhs += rep.palm[k].lhs / r;
            pp.rhs += rep.palm[k].rhs / r;
            joint_ss += rep.palm[k].joint_std_error * rep.palm[k].joint_std_error;
            tol_ss += rep.palm[k].tolerance * rep.palm[k].tolerance;
            all_pass = all_pass && rep.palm[k].pass;
        }
        pp.joint_std_error = std::sqrt(joint_ss) / r;
        if (pp.identity == PalmIdentity::ergodic_equivalence) {
            pp.tolerance = std::sqrt(tol_ss) / r;
            pp.pass = all_pass;
        } else {
            pp.tolerance = 3.0 * pp.joint_std_error;
            pp.pass = std::abs(pp.lhs - pp.rhs) <= pp.tolerance;
        }
        result.pooled_palm.push_back(pp);
    }
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
    RunResult result;
    result.config = config;
    ExperimentConfig& c = result.config;
    if (options.seed) {
        c.seed = *options.seed;
        c.document["seed"] = c.seed;
    }
    if (options.replications) {
        if (*options.replications < 1) throw ConfigError(std::vector<ValidationIssue>{{"replications", "must be >= 1"}});
        c.replications = *options.replications;
        c.document["replications"] = c.replications;
    }

    const StabilityReport stability = config_stability(c);
    if (!stability.stable) {
        if (!options.force_unstable)
            throw UnstableInput("offered load " + std::to_string(stability.load_estimate) +
                                " is not below 1 over the parameter interval");
        result.unstable = true;
    }
    const bool check = !result.unstable;

    result.replications.resize(c.replications);
    std::vector<std::exception_ptr> errors(c.replications);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t r = next++; r < c.replications; r = next++) {
            try {
                result.replications[r] = run_replication(c, r, check, options);
            } catch (...) {
                errors[r] = std::current_exception();
            }
        }
    };
    const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(c.replications)));
    std::vector<std::thread> pool;
    for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    pool_results(result);
    return result;
}

namespace {

json estimate_json(const EstimatorSpec& spec, const DerivativeEstimate& e) {
    return {{"estimator", spec.label()},
            {"op", spec.op},
            {"side", to_string(e.side)},
            {"order", to_string(e.order)},
            {"parameter_kind", to_string(e.parameter_kind)},
            {"value", e.value},
            {"std_error", e.std_error},
            {"ci_lo", e.ci_lo()},
            {"ci_hi", e.ci_hi()},
            {"atom_correction", e.atom_correction},
            {"n_customers", e.n_customers},
            {"lambda_hat", e.lambda_hat}};
}

json palm_json(PalmIdentity id, double lhs, double rhs, double se, double tol, bool pass) {
    return {{"identity", to_string(id)}, {"lhs", lhs},       {"rhs", rhs},
            {"joint_std_error", se},     {"tolerance", tol}, {"pass", pass}};
}

}  // namespace

void write_jsonl(const RunResult& result, std::ostream& out) {
    const ExperimentConfig& c = result.config;
    out << json{{"record", "config"}, {"config", c.document}, {"seed", c.seed}, {"unstable", result.unstable}}.dump()
        << '\n';
    for (const auto& rep : result.replications) {
        const std::uint64_t r = rep.replication;
        for (std::size_t i = 0; i < rep.estimates.size(); ++i) {
            json j = estimate_json(c.estimators[i], rep.estimates[i]);
            j["record"] = "estimate";
            j["replication"] = r;
            out << j.dump() << '\n';
        }
        for (const auto& fd : rep.finite_differences)
            out << json{{"record", "finite_difference"}, {"replication", r},
                        {"stencil", to_string(fd.stencil)}, {"h", fd.h},
                        {"value", fd.value},                {"std_error", fd.std_error},
                        {"n_customers", fd.n_customers}}
                       .dump()
                << '\n';
        for (const auto& cmp : rep.comparisons)
            out << json{{"record", "comparison"},  {"replication", r},
                        {"estimator", cmp.estimator}, {"stencil", to_string(cmp.stencil)},
                        {"oracle_value", cmp.value},  {"oracle_std_error", cmp.std_error},
                        {"joint_std_error", cmp.joint_std_error}}
                       .dump()
                << '\n';
        for (const auto& p : rep.palm) {
            json j = palm_json(p.identity, p.lhs, p.rhs, p.joint_std_error, p.tolerance, p.pass);
            j["record"] = "palm";
            j["replication"] = r;
            out << j.dump() << '\n';
        }
    }
    for (const auto& o : c.oracles) {
        if (o.kind != OracleSpec::Kind::analytic) continue;
        for (const auto& spec : c.estimators)
            if (auto v = analytic_value(c, spec))
                out << json{{"record", "analytic"}, {"estimator", spec.label()}, {"value", *v}}.dump() << '\n';
        break;
    }
    for (const auto& row : result.pooled) {
        json j = {{"record", "pooled"},
                  {"estimator", row.estimator},
                  {"op", row.op},
                  {"side", to_string(row.side)},
                  {"order", to_string(row.order)},
                  {"value", row.value},
                  {"std_error", row.std_error},
                  {"ci_lo", row.ci_lo()},
                  {"ci_hi", row.ci_hi()},
                  {"atom_correction", row.atom_correction},
                  {"n_customers", row.n_customers},
                  {"replications", c.replications}};
        if (row.oracle) {
            j["oracle"] = *row.oracle;
            j["oracle_value"] = row.oracle_value;
            j["oracle_std_error"] = row.oracle_std_error;
            j["oracle_gap"] = row.oracle_gap();
            j["joint_std_error"] = row.joint_std_error;
        }
        out << j.dump() << '\n';
    }
    for (const auto& p : result.pooled_palm) {
        json j = palm_json(p.identity, p.lhs, p.rhs, p.joint_std_error, p.tolerance, p.pass);
        j["record"] = "pooled_palm";
        out << j.dump() << '\n';
    }
}

void write_csv(const RunResult& result, std::ostream& out) {
    auto num = [](double x) {
        std::ostringstream s;
        s.precision(17);
        s << x;
        return s.str();
    };
    out << "estimator,side,value,std_error,ci_lo,ci_hi,atom_correction,oracle_value,oracle_gap\n";
    for (const auto& row : result.pooled) {
        out << row.estimator << ',' << to_string(row.side) << ',' << num(row.value) << ',' << num(row.std_error)
            << ',' << num(row.ci_lo()) << ',' << num(row.ci_hi()) << ',' << num(row.atom_correction) << ',';
        if (row.oracle) out << num(row.oracle_value) << ',' << num(row.oracle_gap());
        else out << ',';
        out << '\n';
    }
}

}  // namespace gg1ipa
