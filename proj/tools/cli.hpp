#pragma once

// Command-line front end. run() returns the process exit code:
// 0 verdict PASS, 1 verdict FAIL or runtime failure, 2 usage error.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kronecker/io/csv.hpp"
#include "kronecker/io/report.hpp"
#include "kronecker/io/svg.hpp"
#include "kronecker/kronecker.hpp"

namespace kronecker::cli {

inline constexpr const char* tool_version = "1.0.0";

using io::json;

/// Bad arguments; reported with usage text and exit code 2.
struct usage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Outcome {
    io::Report report;
    std::optional<Trajectory> trajectory;
    std::optional<SurveyReport> survey;
    std::vector<io::Series> plot;
    io::PlotStyle plot_style;
    std::string summary;
};

// ---------------------------------------------------------------------------
// Configuration

/// Defaults for every key a command may read; config files and flags
/// override these.
inline json default_config() {
    return json{{"system", "ham-unique"}, {"n", 1},         {"m", 0},          {"l", 0},
                {"omega", "1"},          {"t", nullptr},    {"method", nullptr}, {"step", nullptr},
                {"energy", 0.0},         {"offset", nullptr}, {"samples", nullptr}, {"seed", 42},
                {"box", nullptr},        {"jobs", 0},       {"horizon", nullptr}, {"tol", nullptr},
                {"points", nullptr},     {"zeta", 1.0},     {"file", nullptr}, {"point", nullptr},
                {"control", false},      {"delta", false},  {"out", nullptr}};
}

template <class T>
T get_or(const json& cfg, const char* key, T fallback) {
    if (!cfg.contains(key) || cfg[key].is_null()) return fallback;
    try {
        return cfg[key].get<T>();
    } catch (const json::exception&) {
        throw usage_error(std::string("bad value for '") + key + "'");
    }
}

inline std::string omega_text(const json& cfg) {
    const auto& w = cfg["omega"];
    if (w.is_string()) return w.get<std::string>();
    if (w.is_number()) return io::number(w.get<double>());
    if (w.is_array()) {
        std::string out;
        for (const auto& v : w) out += (out.empty() ? "" : ",") + io::number(v.get<double>());
        return out;
    }
    throw usage_error("bad value for 'omega'");
}

inline SystemParams params_from_config(const json& cfg) {
    const auto name = get_or<std::string>(cfg, "system", "ham-unique");
    const auto family = family_from_string(name);
    if (!family || *family == Family::custom) throw usage_error("unknown system '" + name + "'");
    SystemParams p;
    p.family = *family;
    p.n = get_or<int>(cfg, "n", 1);
    p.m = get_or<int>(cfg, "m", 0);
    p.l = is_reversible_family(p.family) ? get_or<int>(cfg, "l", 0) : 0;
    try {
        p.omega = parse_omega(omega_text(cfg));
    } catch (const error& e) {
        throw usage_error(e.what());
    }
    // a single frequency stands for all n
    if (p.omega.size() == 1 && p.n > 1) p.omega.assign(static_cast<std::size_t>(p.n), p.omega[0]);
    return p;
}

inline System system_from_config(const json& cfg) {
    const auto p = params_from_config(cfg);
    try {
        return build_system(p);
    } catch (const error& e) {
        throw usage_error(e.what());
    }
}

/// Angle lists such as "pi/2", "pi/6,0", "0.5,-2pi/3".
inline std::vector<double> parse_angles(const std::string& text) {
    static const std::regex pi_re(R"(^(-)?([0-9]*\.?[0-9]*)\*?pi(?:/([0-9]+\.?[0-9]*))?$)");
    std::vector<double> out;
    std::stringstream in(text);
    for (std::string tok; std::getline(in, tok, ',');) {
        std::erase_if(tok, [](char c) { return c == ' '; });
        std::smatch m;
        if (std::regex_match(tok, m, pi_re)) {
            double v = pi;
            if (m[2].length() > 0) v *= std::stod(m[2]);
            if (m[3].length() > 0) v /= std::stod(m[3]);
            out.push_back(m[1].length() > 0 ? -v : v);
            continue;
        }
        try {
            std::size_t used = 0;
            const double v = std::stod(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            out.push_back(v);
        } catch (const std::exception&) {
            throw usage_error("bad angle '" + tok + "'");
        }
    }
    return out;
}

/// Point "label=value,..." on top of the layout origin (values accept pi forms).
inline MixedPoint point_from_text(const System& sys, const std::string& text) {
    std::vector<double> c(sys.dim(), 0.0);
    std::stringstream in(text);
    for (std::string tok; std::getline(in, tok, ',');) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw usage_error("point entries look like label=value");
        std::string label = tok.substr(0, eq);
        std::erase_if(label, [](char ch) { return ch == ' '; });
        const auto slot = sys.layout->slot_of(label);
        if (!slot) throw usage_error("no slot named '" + label + "'");
        const auto v = parse_angles(tok.substr(eq + 1));
        if (v.size() != 1) throw usage_error("bad value for '" + label + "'");
        c[*slot] = v[0];
    }
    return {sys.layout, std::move(c)};
}

inline IntegratorConfig integrator_from_config(const json& cfg, Method method, double step) {
    IntegratorConfig ic;
    const auto name = get_or<std::string>(cfg, "method", std::string(to_string(method)));
    const auto m = method_from_string(name);
    if (!m) throw usage_error("unknown method '" + name + "' (rk4, adaptive, midpoint)");
    ic.method = *m;
    ic.step = get_or<double>(cfg, "step", step);
    if (!(ic.step > 0.0)) throw usage_error("step must be positive");
    return ic;
}

inline json params_json(const System& sys) { return io::to_json(sys.params); }

inline std::vector<double> coords(const MixedPoint& p) { return {p.coords().begin(), p.coords().end()}; }

// ---------------------------------------------------------------------------
// Commands

inline Outcome cmd_systems_list(const json&) {
    Outcome o;
    o.report.claim = "catalog";
    o.report.pass = true;
    std::ostringstream s;
    s << "ham-unique   Hamiltonian, unique Kronecker n-torus (--n >= 1, --m >= 0)\n"
      << "ham-compact  Hamiltonian on a torus, isolated Kronecker n-torus (--n >= 1, --m >= 0)\n"
      << "rev-unique   reversible, unique Kronecker n-torus (--n, --l, --m)\n"
      << "rev-compact  reversible on a torus, isolated Kronecker n-torus (--n, --l, --m)\n";
    o.summary = s.str();
    json list = json::array();
    for (auto name : {"ham-unique", "ham-compact", "rev-unique", "rev-compact"}) list.push_back(name);
    o.report.metrics["families"] = list;
    return o;
}

inline Outcome cmd_simulate(const json& cfg) {
    const System sys = system_from_config(cfg);
    const double t_end = get_or<double>(cfg, "t", 10.0);
    if (t_end == 0.0 || !std::isfinite(t_end)) throw usage_error("--t must be finite and nonzero");
    const auto ic = integrator_from_config(cfg, Method::rk4, 1e-2);
    const MixedPoint p0 = cfg["point"].is_string()
                              ? point_from_text(sys, cfg["point"].get<std::string>())
                              : torus_point(canonical_torus(sys), std::vector<double>(sys.params.n, 0.0));
    Trajectory traj;
    traj.layout = sys.layout;
    traj.config = ic;
    std::optional<double> escape;
    std::vector<double> y = coords(p0);
    try {
        propagate(
            sys.field, y, 0.0, t_end, ic, make_guard(*sys.layout, ic),
            [&](double t, std::span<const double> z) {
                traj.times.push_back(t);
                traj.points.emplace_back(sys.layout, std::vector<double>(z.begin(), z.end()));
                return true;
            },
            &traj.stats);
    } catch (const numerical_blowup& e) {
        escape = e.time();
    }
    Outcome o;
    o.report.claim = "simulation";
    o.report.parameters = params_json(sys);
    o.report.parameters["t"] = t_end;
    o.report.parameters["method"] = std::string(to_string(ic.method));
    o.report.parameters["step"] = ic.step;
    o.report.parameters["initial"] = coords(p0);
    o.report.pass = true;
    o.report.metrics["stored_points"] = traj.size();
    o.report.metrics["final_time"] = traj.times.back();
    o.report.metrics["final_point"] = coords(traj.back());
    o.report.metrics["escaped"] = escape.has_value();
    if (escape) o.report.metrics["escape_time"] = *escape;
    if (sys.has_hamiltonian()) {
        const double h0 = eval_hamiltonian(sys, traj.points.front());
        double drift = 0.0;
        for (const auto& p : traj.points) drift = std::max(drift, std::abs(eval_hamiltonian(sys, p) - h0));
        o.report.metrics["energy_drift"] = drift;
    }
    for (auto slot : sys.layout->real_slots()) {
        io::Series s{sys.layout->label(slot), {}};
        for (std::size_t k = 0; k < traj.size(); ++k) s.points.emplace_back(traj.times[k], traj.points[k][slot]);
        o.plot.push_back(std::move(s));
    }
    if (o.plot.empty()) {
        // compact layouts: plot every non-phi slot
        for (std::size_t slot = 0; slot < sys.dim(); ++slot) {
            if (sys.layout->label(slot).rfind("phi", 0) == 0) continue;
            io::Series s{sys.layout->label(slot), {}};
            for (std::size_t k = 0; k < traj.size(); ++k) s.points.emplace_back(traj.times[k], traj.points[k][slot]);
            o.plot.push_back(std::move(s));
        }
    }
    o.plot_style.title = sys.name + " trajectory";
    std::ostringstream s;
    s << "simulated " << sys.name << " to t = " << traj.times.back() << " (" << traj.stats.accepted << " steps)";
    if (escape) s << "; escaped at t = " << *escape;
    o.summary = s.str() + "\n";
    o.trajectory = std::move(traj);
    return o;
}

inline Outcome cmd_verify_torus(const json& cfg) {
    const System sys = system_from_config(cfg);
    const double horizon = get_or<double>(cfg, "t", 100.0);
    const double tol = get_or<double>(cfg, "tol", 1e-8);
    const bool delta = get_or<bool>(cfg, "delta", false);
    const auto ic = integrator_from_config(cfg, Method::rk4, 1e-2);
    std::vector<TorusSpec> tori{canonical_torus(sys)};
    if (delta) {
        if (!is_compact_family(sys.params.family)) throw usage_error("--delta needs a compact family");
        tori = delta_tori(sys);
    }
    Outcome o;
    o.report.claim = "torus-invariance";
    o.report.parameters = params_json(sys);
    o.report.parameters["t"] = horizon;
    o.report.parameters["tol"] = tol;
    o.report.parameters["tori"] = tori.size();
    double pinned = 0.0, angle = 0.0;
    bool pass = true;
    for (const auto& torus : tori) {
        const auto r = verify_kronecker(sys, torus, horizon, tol, 4, ic);
        pinned = std::max(pinned, r.max_pinned_deviation);
        angle = std::max(angle, r.max_angle_deviation);
        pass = pass && r.passed;
    }
    o.report.pass = pass;
    o.report.metrics["max_pinned_deviation"] = io::number_json(pinned);
    o.report.metrics["max_angle_deviation"] = io::number_json(angle);
    std::ostringstream s;
    s << sys.name << ": " << tori.size() << " torus/tori over t = " << horizon << ", pinned deviation " << pinned
      << ", angle deviation " << angle << "\n";
    o.summary = s.str();
    return o;
}

/// Points near the canonical torus that stay bounded for t = 1000: u tiny,
/// x and p tinier, y and q negative so that their growth is only algebraic.
inline MixedPoint bounded_point(const System& sys, Rng& rng) {
    std::vector<double> c(sys.dim(), 0.0);
    for (std::size_t i = 0; i < c.size(); ++i) {
        const auto& label = sys.layout->label(i);
        if (label.rfind("phi", 0) == 0) c[i] = rng.uniform(-pi, pi);
        else if (label.rfind("u", 0) == 0) c[i] = rng.uniform(-1e-3, 1e-3);
        else if (label == "x" || label.rfind("p", 0) == 0) c[i] = rng.uniform(-1e-10, 1e-10);
        else c[i] = rng.uniform(-0.5, -0.1);
    }
    return {sys.layout, std::move(c)};
}

inline Outcome cmd_verify_invariants(const json& cfg) {
    const System sys = system_from_config(cfg);
    if (!sys.has_hamiltonian()) throw usage_error(sys.name + " has no first integrals");
    const double horizon = get_or<double>(cfg, "t", 1000.0);
    const auto points = get_or<std::size_t>(cfg, "points", 4);
    const auto seed = get_or<std::uint64_t>(cfg, "seed", 42);
    const auto ic = integrator_from_config(cfg, Method::implicit_midpoint, 1e-2);
    std::vector<double> drift(sys.integrals.size(), 0.0);
    for (std::size_t k = 0; k < points; ++k) {
        Rng rng(derive_seed(seed, k));
        IntegratorConfig run = ic;
        run.record_stride = 100;
        const auto traj = integrate(sys, bounded_point(sys, rng), horizon, run);
        const auto d = invariant_drift(sys, traj);
        for (std::size_t i = 0; i < d.size(); ++i) drift[i] = std::max(drift[i], d[i]);
    }
    Outcome o;
    o.report.claim = "conservation";
    o.report.parameters = params_json(sys);
    o.report.parameters["t"] = horizon;
    o.report.parameters["points"] = points;
    o.report.parameters["method"] = std::string(to_string(ic.method));
    o.report.parameters["step"] = ic.step;
    o.report.seed = seed;
    bool pass = drift[0] <= 1e-8;
    for (std::size_t i = 0; i < drift.size(); ++i) {
        o.report.metrics["drift"][sys.integrals[i].name] = drift[i];
        pass = pass && drift[i] <= 1e-6;
    }
    o.report.pass = pass;
    std::ostringstream s;
    s << sys.name << ": max drift over " << points << " bounded runs to t = " << horizon << ":";
    for (std::size_t i = 0; i < drift.size(); ++i) s << " " << sys.integrals[i].name << "=" << drift[i];
    o.summary = s.str() + "\n";
    return o;
}

inline Outcome cmd_verify_brackets(const json& cfg) {
    const System sys = system_from_config(cfg);
    if (!sys.has_hamiltonian()) throw usage_error(sys.name + " has no first integrals");
    const auto points = get_or<std::size_t>(cfg, "points", 1000);
    const auto seed = get_or<std::uint64_t>(cfg, "seed", 42);
    const double tol = get_or<double>(cfg, "tol", 1e-8);
    const double box = get_or<double>(cfg, "box", 1.0);
    double worst = 0.0;
    for (std::size_t k = 0; k < points; ++k) {
        Rng rng(derive_seed(seed, k));
        const auto z = sample_box(rng, *sys.layout, box);
        for (double b : integral_brackets(sys, z)) worst = std::max(worst, std::abs(b));
    }
    Outcome o;
    o.report.claim = "involution";
    o.report.parameters = params_json(sys);
    o.report.parameters["points"] = points;
    o.report.parameters["box"] = box;
    o.report.seed = seed;
    o.report.pass = worst <= tol;
    o.report.metrics["max_abs_bracket"] = worst;
    o.summary = sys.name + ": max |{I_a, I_b}| = " + io::number(worst) + " over " + std::to_string(points) + " points\n";
    return o;
}

inline Outcome cmd_verify_rank(const json& cfg) {
    const System sys = system_from_config(cfg);
    if (!sys.has_hamiltonian()) throw usage_error(sys.name + " has no first integrals");
    const auto points = get_or<std::size_t>(cfg, "points", 100);
    const auto seed = get_or<std::uint64_t>(cfg, "seed", 42);
    const double box = get_or<double>(cfg, "box", 1.0);
    const int full = sys.params.degrees_of_freedom();
    int min_generic = full, max_torus = 0;
    for (std::size_t k = 0; k < points; ++k) {
        Rng rng(derive_seed(seed, k));
        min_generic = std::min(min_generic, integral_jacobian_rank(sys, sample_box(rng, *sys.layout, box)));
        std::vector<double> angles(static_cast<std::size_t>(sys.params.n));
        for (auto& a : angles) a = rng.uniform(-pi, pi);
        max_torus = std::max(max_torus, integral_jacobian_rank(sys, torus_point(canonical_torus(sys), angles)));
    }
    Outcome o;
    o.report.claim = "rank-degeneracy";
    o.report.parameters = params_json(sys);
    o.report.parameters["points"] = points;
    o.report.seed = seed;
    o.report.pass = min_generic == full && max_torus <= sys.params.n;
    o.report.metrics["min_rank_generic"] = min_generic;
    o.report.metrics["max_rank_on_torus"] = max_torus;
    o.report.metrics["integrals"] = full;
    o.summary = sys.name + ": rank " + std::to_string(min_generic) + " of " + std::to_string(full) +
                " at random points, at most " + std::to_string(max_torus) + " on the torus\n";
    return o;
}

inline Outcome cmd_verify_reversibility(const json& cfg) {
    const bool control = get_or<bool>(cfg, "control", false);
    System sys = system_from_config(cfg);
    if (control) sys = with_broken_reversibility(sys);
    const auto points = get_or<std::size_t>(cfg, "points", 100);
    const auto seed = get_or<std::uint64_t>(cfg, "seed", 42);
    const double t = get_or<double>(cfg, "t", 5.0);
    const double tol = get_or<double>(cfg, "tol", 1e-6);
    const double box = get_or<double>(cfg, "box", 0.1);
    const auto r = verify_reversibility(sys, points, seed, t, tol, box);
    Outcome o;
    o.report.claim = control ? "reversibility-negative-control" : "reversibility";
    o.report.parameters = params_json(sys);
    o.report.parameters["points"] = points;
    o.report.parameters["t"] = t;
    o.report.parameters["box"] = box;
    o.report.seed = seed;
    // the broken control passes when the conjugacy visibly fails
    o.report.pass = control ? r.max_deviation > 1e3 * tol : r.passed;
    o.report.metrics["max_deviation"] = io::number_json(r.max_deviation);
    o.summary = sys.name + ": max |Phi_-t(g p) - g(Phi_t p)| = " + io::number(r.max_deviation) + "\n";
    return o;
}

inline Outcome cmd_monodromy(const json& cfg) {
    const bool control = get_or<bool>(cfg, "control", false);
    const double tol = get_or<double>(cfg, "tol", 1e-6);
    const auto ic = integrator_from_config(cfg, Method::rk4, 1e-3);
    Outcome o;
    MonodromyResult r;
    System sys;
    if (control) {
        sys = dsl::make_control_fixture();
        r = monodromy(sys, MixedPoint(sys.layout), two_pi / sys.params.omega[0], ic);
    } else {
        sys = system_from_config(cfg);
        if (sys.params.n != 1) throw usage_error("monodromy needs --n 1");
        r = monodromy(sys, ic);
    }
    json mult = json::array();
    for (const auto& l : r.multipliers) mult.push_back({l.real(), l.imag()});
    const double recip = reciprocity_error(r.multipliers);
    o.report.claim = control ? "monodromy-control" : "monodromy-identity";
    o.report.parameters = control ? json{{"system", "control"}} : params_json(sys);
    o.report.metrics["multipliers"] = mult;
    o.report.metrics["max_distance_from_one"] = r.max_distance_from_one();
    o.report.metrics["max_residual"] = r.max_residual();
    o.report.metrics["reciprocity_error"] = recip;
    o.report.metrics["period"] = r.period;
    const bool sound = r.max_residual() <= 1e-8 && recip <= 1e-6;
    o.report.pass = sound && (control ? r.max_distance_from_one() > 1e-3 : r.max_distance_from_one() <= tol);
    std::ostringstream s;
    s << sys.name << ": " << r.multipliers.size() << " multipliers, max |lambda - 1| = " << r.max_distance_from_one()
      << ", residual " << r.max_residual() << "\n";
    o.summary = s.str();
    return o;
}

inline Outcome cmd_fixedpoint(const json& cfg) {
    const bool control = get_or<bool>(cfg, "control", false);
    const double energy = get_or<double>(cfg, "energy", 0.0);
    System sys = control ? dsl::make_control_fixture() : system_from_config(cfg);
    if (!control && (!is_hamiltonian_family(sys.params.family) || sys.params.n != 1))
        throw usage_error("fixedpoint needs a hamiltonian family with --n 1");
    const auto phi = sys.layout->slot_of(control ? "phi" : "phi_1");
    const Section section{*phi, 0.0, +1};
    const MixedPoint guess =
        cfg["point"].is_string() ? point_from_text(sys, cfg["point"].get<std::string>()) : MixedPoint(sys.layout);
    const auto r = find_fixed_point(sys, section, guess, energy);
    Outcome o;
    o.report.claim = control ? "fixedpoint-control" : "fixedpoint";
    o.report.parameters = control ? json{{"system", "control"}} : params_json(sys);
    o.report.parameters["energy"] = energy;
    o.report.parameters["guess"] = coords(guess);
    o.report.metrics["status"] = std::string(to_string(r.status));
    o.report.metrics["iterations"] = r.iterations;
    o.report.metrics["residual"] = io::number_json(r.residual);
    o.report.metrics["condition"] = io::number_json(r.condition);
    if (r.point) o.report.metrics["point"] = coords(*r.point);
    if (!r.reason.empty()) o.report.metrics["reason"] = r.reason;
    if (control) o.report.pass = r.status == FixedPointStatus::converged;
    else if (energy == 0.0) o.report.pass = r.status == FixedPointStatus::singular_linearization;
    else o.report.pass = r.status == FixedPointStatus::not_found;
    o.summary = sys.name + " at energy " + io::number(energy) + ": " + std::string(to_string(r.status)) + "\n";
    return o;
}

inline Outcome cmd_freq(const json& cfg) {
    const System sys = system_from_config(cfg);
    if (!is_compact_family(sys.params.family)) throw usage_error("freq needs a compact family");
    if (!cfg["offset"].is_string()) throw usage_error("freq needs --offset");
    const auto offset = parse_angles(cfg["offset"].get<std::string>());
    const double horizon = get_or<double>(cfg, "t", 2000.0);
    const double tol = get_or<double>(cfg, "tol", 1e-4);
    auto ic = integrator_from_config(cfg, Method::rk4, 1e-2);
    NearbyTorusSpec nearby;
    try {
        nearby = nearby_torus(sys, offset);
    } catch (const error& e) {
        if (e.code() == errc::layout_mismatch) throw usage_error(e.what());
        throw;
    }
    const auto p0 = torus_point(nearby.torus, std::vector<double>(nearby.torus.free_angles.size(), 0.0));
    auto traj = integrate(sys, p0, horizon, ic);
    const auto fit = measure_frequencies(traj, nearby.torus.free_angles);
    double worst = 0.0;
    for (std::size_t k = 0; k < fit.frequencies.size(); ++k)
        worst = std::max(worst, std::abs(fit.frequencies[k] - nearby.predicted_frequency[k]));
    const double quad = two_pi / circulation_period(nearby.zeta);
    const double closed = std::sqrt(nearby.zeta * (nearby.zeta + 1.0));
    Outcome o;
    o.report.claim = "frequency-formula";
    o.report.parameters = params_json(sys);
    o.report.parameters["offset"] = offset;
    o.report.parameters["t"] = horizon;
    o.report.parameters["step"] = ic.step;
    o.report.metrics["zeta"] = nearby.zeta;
    o.report.metrics["measured"] = fit.frequencies;
    o.report.metrics["predicted"] = nearby.predicted_frequency;
    o.report.metrics["rms_residuals"] = fit.rms_residuals;
    o.report.metrics["max_abs_error"] = worst;
    o.report.metrics["quadrature_rate"] = quad;
    o.report.metrics["quadrature_error"] = std::abs(quad - closed);
    o.report.pass = worst <= tol && std::abs(quad - closed) <= 1e-8;

    // unwrapped y against the predicted slope
    const auto y = *sys.layout->slot_of("y");
    const auto theta = unwrap_angle(traj, y);
    io::Series measured{"y (unwrapped)", {}}, line{"slope " + io::number(closed), {}};
    const std::size_t stride = std::max<std::size_t>(1, traj.size() / 2000);
    for (std::size_t k = 0; k < traj.size(); k += stride) {
        measured.points.emplace_back(traj.times[k], theta[k]);
        line.points.emplace_back(traj.times[k], theta.front() + closed * traj.times[k]);
    }
    o.plot = {measured, line};
    o.plot_style.title = sys.name + " nearby torus";
    std::ostringstream s;
    s << sys.name << " zeta = " << nearby.zeta << ": measured";
    for (double f : fit.frequencies) s << " " << f;
    s << ", predicted";
    for (double f : nearby.predicted_frequency) s << " " << f;
    s << " (max error " << worst << ")\n";
    o.summary = s.str();
    o.trajectory = std::move(traj);
    return o;
}

inline Outcome cmd_survey(const json& cfg) {
    const System sys = system_from_config(cfg);
    SurveyOptions opt;
    opt.samples = get_or<std::size_t>(cfg, "samples", 10000);
    opt.seed = get_or<std::uint64_t>(cfg, "seed", 42);
    opt.box = get_or<double>(cfg, "box", 1.0);
    opt.jobs = get_or<unsigned>(cfg, "jobs", 0);
    opt.horizon = get_or<double>(cfg, "horizon", 10.0);
    const auto report = survey_uniqueness(sys, opt);
    Outcome o;
    o.report.claim = "uniqueness-survey";
    o.report.parameters = params_json(sys);
    o.report.parameters["samples"] = opt.samples;
    o.report.parameters["box"] = opt.box;
    o.report.parameters["horizon"] = opt.horizon;
    o.report.parameters["domain"] = report.domain;
    o.report.seed = opt.seed;
    o.report.metrics["candidates"] = report.candidate_count;
    o.report.metrics["candidate_indices"] = report.candidates;
    o.report.metrics["skipped"] = report.skipped;
    o.report.metrics["escaped"] = report.escaped;
    o.report.metrics["min_gain"] = io::number_json(report.min_gain);
    bool pass = report.candidate_count == 0;
    if (is_compact_family(sys.params.family)) {
        const auto domain = isolation_domain(sys);
        const auto tori = delta_tori(sys);
        std::size_t inside = 0;
        for (std::size_t k = 1; k < tori.size(); ++k) {
            const auto p = torus_point(tori[k], std::vector<double>(tori[k].free_angles.size(), 0.0));
            if (in_modular_domain(p, domain)) ++inside;
        }
        o.report.metrics["delta_tori"] = tori.size();
        o.report.metrics["delta_tori_inside_domain"] = inside;
        pass = pass && inside == 0;
    }
    o.report.pass = pass;
    io::Series gains{"certificate gain", {}};
    for (const auto& row : report.rows)
        if (!row.skipped && std::isfinite(row.gain)) gains.points.emplace_back(row.real_norm, row.gain);
    if (!gains.points.empty()) {
        o.plot = {gains};
        o.plot_style.title = sys.name + " survey";
        o.plot_style.x_label = "offset norm";
        o.plot_style.y_label = "gain";
    }
    o.summary = sys.name + ": " + std::to_string(report.candidate_count) + " recurrence candidates in " +
                std::to_string(opt.samples) + " samples (" + std::to_string(report.escaped) + " escaped)\n";
    o.survey = report;
    return o;
}

inline Outcome cmd_dsl_check(const json& cfg) {
    if (!cfg["file"].is_string()) throw usage_error("dsl check needs --file");
    const auto path = cfg["file"].get<std::string>();
    std::ifstream in(path);
    if (!in) throw usage_error("cannot read " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    Outcome o;
    o.report.claim = "dsl-fidelity";
    o.report.parameters["file"] = path;
    const auto seed = get_or<std::uint64_t>(cfg, "seed", 42);
    const double tol = get_or<double>(cfg, "tol", 1e-12);
    o.report.seed = seed;
    try {
        const auto src = dsl::parse_dsl_source(buf.str());
        const System sys = dsl::system_from_dsl(src, path);
        const auto f = std::make_shared<const dsl::HamiltonianField>(
            src.hamiltonian, src.pairing, sys.layout->labels(), src.angles);
        std::ostringstream s;
        s << "H = " << dsl::to_string(src.hamiltonian) << "\n";
        for (std::size_t i = 0; i < sys.dim(); ++i)
            s << "d" << sys.layout->label(i) << "/dt = " << dsl::to_string(f->rates()[i]) << "\n";
        o.report.pass = true;
        if (src.target) {
            const System like = build_system(*src.target);
            const auto r = dsl::cross_check_fields(sys.layout, sys.field, like.layout, like.field,
                                                   get_or<std::size_t>(cfg, "points", 1000), seed);
            o.report.parameters["system"] = io::to_json(*src.target);
            o.report.metrics["max_abs_deviation"] = r.max_abs_deviation;
            o.report.pass = r.max_abs_deviation <= tol;
            s << "max deviation from " << like.name << ": " << r.max_abs_deviation << "\n";
        }
        o.summary = s.str();
    } catch (const error& e) {
        o.report.pass = false;
        o.report.metrics["error"] = e.what();
        o.summary = std::string("error: ") + e.what() + "\n";
    }
    return o;
}

inline Outcome cmd_oracle_period(const json& cfg) {
    const double zeta = get_or<double>(cfg, "zeta", 1.0);
    if (!(zeta > 0.0)) throw usage_error("--zeta must be positive");
    const double quad = circulation_period(zeta);
    const double closed = circulation_period_closed_form(zeta);
    Outcome o;
    o.report.claim = "circulation-period";
    o.report.parameters["zeta"] = zeta;
    o.report.metrics["quadrature"] = quad;
    o.report.metrics["closed_form"] = closed;
    o.report.metrics["rate_error"] = std::abs(two_pi / quad - std::sqrt(zeta * (zeta + 1.0)));
    o.report.pass = std::abs(two_pi / quad - std::sqrt(zeta * (zeta + 1.0))) <= 1e-8;
    std::ostringstream s;
    s.precision(12);
    s << "period(" << zeta << ") = " << quad << " (closed form " << closed << ")\n";
    o.summary = s.str();
    return o;
}

inline Outcome dispatch(const std::string& command, const json& cfg) {
    if (command == "systems list") return cmd_systems_list(cfg);
    if (command == "simulate") return cmd_simulate(cfg);
    if (command == "verify torus") return cmd_verify_torus(cfg);
    if (command == "verify invariants") return cmd_verify_invariants(cfg);
    if (command == "verify brackets") return cmd_verify_brackets(cfg);
    if (command == "verify rank") return cmd_verify_rank(cfg);
    if (command == "verify reversibility") return cmd_verify_reversibility(cfg);
    if (command == "monodromy") return cmd_monodromy(cfg);
    if (command == "fixedpoint") return cmd_fixedpoint(cfg);
    if (command == "freq") return cmd_freq(cfg);
    if (command == "survey") return cmd_survey(cfg);
    if (command == "dsl check") return cmd_dsl_check(cfg);
    if (command == "oracle period") return cmd_oracle_period(cfg);
    throw usage_error("unknown command '" + command + "'");
}

// ---------------------------------------------------------------------------
// Output

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

inline json make_manifest(const std::string& command, const json& cfg, const Outcome& o, double seconds) {
    return {{"tool", "kronecker"},
            {"version", tool_version},
            {"command", command},
            {"config", cfg},
            {"seed", o.report.seed},
            {"duration_seconds", seconds},
            {"verdicts", {{o.report.claim, o.report.pass ? "PASS" : "FAIL"}}}};
}

inline void write_outputs(const std::filesystem::path& dir, const std::string& command, const json& cfg,
                          const Outcome& o, double seconds) {
    std::filesystem::create_directories(dir);
    write_file(dir / "report.json", o.report.to_json().dump(2) + "\n");
    write_file(dir / "manifest.json", make_manifest(command, cfg, o, seconds).dump(2) + "\n");
    if (o.trajectory) {
        std::ofstream out(dir / "trajectory.csv");
        io::write_trajectory_csv(out, *o.trajectory);
    }
    if (o.survey) {
        std::ofstream out(dir / "survey.csv");
        io::write_survey_csv(out, *o.survey);
    }
    if (!o.plot.empty()) write_file(dir / "plot.svg", io::plot_svg(o.plot, o.plot_style));
}

/// Runs a resolved command; prints the summary and verdict, writes outputs.
inline int execute(const std::string& command, const json& cfg, std::ostream& out) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o = dispatch(command, cfg);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out << o.summary << (o.report.pass ? "PASS" : "FAIL") << "\n";
    if (cfg.contains("out") && cfg["out"].is_string())
        write_outputs(cfg["out"].get<std::string>(), command, cfg, o, seconds);
    return o.report.pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// Argument parsing

struct Flags {
    std::string system, omega, method, offset, file, point, out, config;
    int n = 0, m = 0, l = 0;
    double t = 0, step = 0, energy = 0, box = 0, horizon = 0, tol = 0, zeta = 0;
    std::size_t samples = 0, points = 0;
    std::uint64_t seed = 0;
    unsigned jobs = 0;
    bool control = false, delta = false;
};

inline json flags_to_config(const CLI::App& sub, const Flags& f) {
    json cfg = json::object();
    auto given = [&](const char* name) {
        const auto* opt = sub.get_option_no_throw(std::string("--") + name);
        return opt && opt->count() > 0;
    };
    if (given("system")) cfg["system"] = f.system;
    if (given("n")) cfg["n"] = f.n;
    if (given("m")) cfg["m"] = f.m;
    if (given("l")) cfg["l"] = f.l;
    if (given("omega")) cfg["omega"] = f.omega;
    if (given("t")) cfg["t"] = f.t;
    if (given("method")) cfg["method"] = f.method;
    if (given("step")) cfg["step"] = f.step;
    if (given("energy")) cfg["energy"] = f.energy;
    if (given("offset")) cfg["offset"] = f.offset;
    if (given("samples")) cfg["samples"] = f.samples;
    if (given("seed")) cfg["seed"] = f.seed;
    if (given("box")) cfg["box"] = f.box;
    if (given("jobs")) cfg["jobs"] = f.jobs;
    if (given("horizon")) cfg["horizon"] = f.horizon;
    if (given("tol")) cfg["tol"] = f.tol;
    if (given("points")) cfg["points"] = f.points;
    if (given("zeta")) cfg["zeta"] = f.zeta;
    if (given("file")) cfg["file"] = f.file;
    if (given("point")) cfg["point"] = f.point;
    if (given("control")) cfg["control"] = f.control;
    if (given("delta")) cfg["delta"] = f.delta;
    if (given("out")) cfg["out"] = f.out;
    return cfg;
}

inline void add_common(CLI::App* sub, Flags& f) {
    sub->add_option("--system", f.system, "family: ham-unique, ham-compact, rev-unique, rev-compact");
    sub->add_option("--n", f.n, "number of Kronecker angles");
    sub->add_option("--m", f.m, "number of extra (p, q) pairs or q slots");
    sub->add_option("--l", f.l, "number of v slots (reversible families)");
    sub->add_option("--omega", f.omega, "frequencies: decimals or sqrt2, sqrt3, golden, comma separated");
    sub->add_option("--config", f.config, "JSON config file; flags override it");
    sub->add_option("--out", f.out, "output directory for report.json, manifest.json and data files");
    sub->add_option("--seed", f.seed, "master seed");
}

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw usage_error("cannot read " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw usage_error(path + ": " + e.what());
    }
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Kronecker torus verification toolkit", "kronecker"};
    app.set_version_flag("--version", tool_version);
    std::string replay;
    app.add_option("--replay", replay, "re-run the command recorded in a manifest.json");
    Flags f;

    auto* systems = app.add_subcommand("systems", "model families");
    auto* systems_list = systems->add_subcommand("list", "list the families");
    systems->require_subcommand(1);

    auto* simulate = app.add_subcommand("simulate", "integrate one trajectory");
    add_common(simulate, f);
    simulate->add_option("--t", f.t, "end time (negative integrates backwards)");
    simulate->add_option("--method", f.method, "rk4, adaptive or midpoint");
    simulate->add_option("--step", f.step, "step size");
    simulate->add_option("--point", f.point, "initial point, e.g. \"u_1=0.1,y=0.2\" (default: torus point)");

    auto* verify = app.add_subcommand("verify", "check one claim");
    verify->require_subcommand(1);
    std::vector<std::pair<std::string, CLI::App*>> checks;
    const std::pair<const char*, const char*> kinds[] = {
        {"torus", "pinned coordinates and linear angle law along the torus"},
        {"invariants", "drift of H and the first integrals"},
        {"brackets", "Poisson brackets between the integrals"},
        {"reversibility", "flow conjugacy under the involution"},
        {"rank", "rank of the integral Jacobian, generic and on the torus"},
    };
    for (auto [name, about] : kinds) {
        auto* c = verify->add_subcommand(name, about);
        add_common(c, f);
        c->add_option("--t", f.t, "horizon");
        c->add_option("--tol", f.tol, "tolerance");
        c->add_option("--points", f.points, "number of sample points");
        c->add_option("--box", f.box, "half-width of the sampling box");
        c->add_option("--method", f.method, "rk4, adaptive or midpoint");
        c->add_option("--step", f.step, "step size");
        c->add_flag("--delta", f.delta, "torus: check every delta torus of a compact family");
        c->add_flag("--control", f.control, "reversibility: run the broken-field negative control");
        checks.emplace_back(std::string("verify ") + name, c);
    }

    auto* mono = app.add_subcommand("monodromy", "multipliers of the canonical periodic orbit");
    add_common(mono, f);
    mono->add_option("--tol", f.tol, "tolerance on |lambda - 1|");
    mono->add_option("--method", f.method, "rk4, adaptive or midpoint");
    mono->add_option("--step", f.step, "step size");
    mono->add_flag("--control", f.control, "use the control fixture");

    auto* fixed = app.add_subcommand("fixedpoint", "search a periodic orbit on an energy level");
    add_common(fixed, f);
    fixed->add_option("--energy", f.energy, "energy level");
    fixed->add_option("--point", f.point, "initial guess (default: origin)");
    fixed->add_flag("--control", f.control, "use the control fixture");

    auto* freq = app.add_subcommand("freq", "measure frequencies on a nearby torus");
    add_common(freq, f);
    freq->add_option("--offset", f.offset, "torus offset, e.g. pi/2 or pi/6,0");
    freq->add_option("--t", f.t, "integration time");
    freq->add_option("--step", f.step, "step size");
    freq->add_option("--tol", f.tol, "tolerance");

    auto* survey = app.add_subcommand("survey", "seeded uniqueness survey");
    add_common(survey, f);
    survey->add_option("--samples", f.samples, "number of samples");
    survey->add_option("--box", f.box, "half-width of the box (non-compact families)");
    survey->add_option("--jobs", f.jobs, "worker threads (default: all cores)");
    survey->add_option("--horizon", f.horizon, "integration horizon per sample");

    auto* dsl_cmd = app.add_subcommand("dsl", "Hamiltonian text files");
    auto* dsl_check = dsl_cmd->add_subcommand("check", "compile a file and compare with its catalog system");
    dsl_cmd->require_subcommand(1);
    dsl_check->add_option("--file", f.file, "DSL file")->required();
    dsl_check->add_option("--points", f.points, "comparison points");
    dsl_check->add_option("--tol", f.tol, "tolerance");
    dsl_check->add_option("--seed", f.seed, "seed");
    dsl_check->add_option("--out", f.out, "output directory");

    auto* oracle = app.add_subcommand("oracle", "independent oracles");
    auto* oracle_period = oracle->add_subcommand("period", "circulation period of y' = zeta + sin^2 y");
    oracle->require_subcommand(1);
    oracle_period->add_option("--zeta", f.zeta, "positive zeta");
    oracle_period->add_option("--out", f.out, "output directory");

    auto usage = [&](const std::string& what) {
        err << "error: " << what << "\n\n" << app.help();
        return 2;
    };
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << tool_version << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        return usage(e.what());
    }

    try {
        std::string command;
        json cfg = default_config();
        if (!replay.empty()) {
            const json manifest = load_json_file(replay);
            if (!manifest.contains("command") || !manifest.contains("config"))
                throw usage_error("manifest lacks command or config");
            command = manifest["command"].get<std::string>();
            cfg = manifest["config"];
            const int code = execute(command, cfg, out);
            if (manifest.contains("verdicts")) {
                const auto expected = manifest["verdicts"].begin().value().get<std::string>();
                const bool same = (code == 0) == (expected == "PASS");
                out << (same ? "replay reproduced the recorded verdict\n" : "replay verdict differs from the record\n");
                if (!same) return 1;
            }
            return code;
        }
        const CLI::App* chosen = nullptr;
        if (systems_list->parsed()) command = "systems list", chosen = systems_list;
        else if (simulate->parsed()) command = "simulate", chosen = simulate;
        else if (mono->parsed()) command = "monodromy", chosen = mono;
        else if (fixed->parsed()) command = "fixedpoint", chosen = fixed;
        else if (freq->parsed()) command = "freq", chosen = freq;
        else if (survey->parsed()) command = "survey", chosen = survey;
        else if (dsl_check->parsed()) command = "dsl check", chosen = dsl_check;
        else if (oracle_period->parsed()) command = "oracle period", chosen = oracle_period;
        for (const auto& [name, sub] : checks)
            if (sub->parsed()) command = name, chosen = sub;
        if (!chosen) return usage("a subcommand is required");
        if (!f.config.empty()) cfg.update(load_json_file(f.config));
        cfg.update(flags_to_config(*chosen, f));
        return execute(command, cfg, out);
    } catch (const usage_error& e) {
        return usage(e.what());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace kronecker::cli
