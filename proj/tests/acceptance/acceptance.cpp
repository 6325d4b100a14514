// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Wall-clock limits are part of each verdict.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "cli.hpp"
#include "../support.hpp"

using namespace kronecker;
using namespace kronecker::testing;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

const std::vector<double> sqrt2_pair{1.0, std::sqrt(2.0)};

System family_system(Family f, int n, int m, int l = 1) {
    std::vector<double> omega = n == 1 ? std::vector<double>{std::sqrt(2.0)} : sqrt2_pair;
    return build_system(params(f, n, m, is_reversible_family(f) ? l : 0, omega));
}

constexpr Family families[] = {Family::ham_unique, Family::ham_compact, Family::rev_unique, Family::rev_compact};

Outcome torus_invariance() {
    Outcome o;
    double worst = 0.0, angle = 0.0;
    for (auto f : families) {
        for (auto [n, m] : {std::pair{1, 0}, {1, 1}, {2, 1}}) {
            const auto sys = family_system(f, n, m);
            const auto r = verify_kronecker(sys, canonical_torus(sys), 100.0, 1e-8);
            worst = std::max(worst, r.max_pinned_deviation);
            angle = std::max(angle, r.max_angle_deviation);
            o.require(r.passed, sys.name + " n=" + std::to_string(n) + " m=" + std::to_string(m) + " failed");
        }
    }
    o.detail = "12 systems, max pinned deviation " + fmt(worst) + ", max angle deviation " + fmt(angle) + (o.detail.empty() ? "" : "; " + o.detail);
    return o;
}

Outcome conservation() {
    Outcome o;
    const auto sys = build_system(params(Family::ham_unique, 1, 1));
    std::vector<double> drift(sys.integrals.size(), 0.0);
    for (std::uint64_t k = 0; k < 4; ++k) {
        Rng rng(derive_seed(42, k));
        IntegratorConfig cfg{Method::implicit_midpoint, 1e-2};
        cfg.record_stride = 100;
        const auto traj = integrate(sys, cli::bounded_point(sys, rng), 1000.0, cfg);
        const auto d = invariant_drift(sys, traj);
        for (std::size_t i = 0; i < d.size(); ++i) drift[i] = std::max(drift[i], d[i]);
    }
    o.require(drift[0] <= 1e-8, "H drift " + fmt(drift[0]));
    double all = 0.0;
    for (double d : drift) all = std::max(all, d);
    o.require(all <= 1e-6, "integral drift " + fmt(all));
    o.detail = "H drift " + fmt(drift[0]) + ", max integral drift " + fmt(all) + (o.pass ? "" : "; " + o.detail);
    return o;
}

Outcome involution() {
    Outcome o;
    double worst = 0.0;
    for (auto f : {Family::ham_unique, Family::ham_compact}) {
        for (auto [n, m] : {std::pair{1, 0}, {1, 1}, {2, 1}}) {
            const auto sys = family_system(f, n, m);
            for (std::uint64_t k = 0; k < 1000; ++k) {
                Rng rng(derive_seed(7, k));
                for (double b : integral_brackets(sys, sample_box(rng, *sys.layout, 1.0)))
                    worst = std::max(worst, std::abs(b));
            }
        }
    }
    o.require(worst <= 1e-8, "bracket too large");
    o.detail = "6 systems x 1000 points, max |bracket| " + fmt(worst);
    return o;
}

Outcome rank_degeneracy() {
    Outcome o;
    for (auto f : {Family::ham_unique, Family::ham_compact}) {
        for (auto [n, m] : {std::pair{1, 0}, {1, 1}, {2, 1}}) {
            const auto sys = family_system(f, n, m);
            int lo = n + m + 1, hi = 0;
            for (std::uint64_t k = 0; k < 100; ++k) {
                Rng rng(derive_seed(11, k));
                lo = std::min(lo, integral_jacobian_rank(sys, sample_box(rng, *sys.layout, 1.0)));
                std::vector<double> angles(static_cast<std::size_t>(n));
                for (auto& a : angles) a = rng.uniform(-pi, pi);
                hi = std::max(hi, integral_jacobian_rank(sys, torus_point(canonical_torus(sys), angles)));
            }
            o.require(lo == n + m + 1 && hi <= n, sys.name + " n=" + std::to_string(n) + " m=" + std::to_string(m) +
                                                      ": generic " + std::to_string(lo) + ", torus " + std::to_string(hi));
        }
    }
    if (o.pass) o.detail = "full rank at 100 random points, rank <= n on the torus, 6 systems";
    return o;
}

Outcome monodromy_identity() {
    Outcome o;
    double worst = 0.0;
    for (int m : {0, 1}) {
        const auto sys = build_system(params(Family::ham_unique, 1, m, 0, {1.0}));
        const auto r = monodromy(sys);
        worst = std::max(worst, r.max_distance_from_one());
        o.require(r.max_residual() <= 1e-8, "eigen residual " + fmt(r.max_residual()));
    }
    o.require(worst <= 1e-6, "multiplier off 1");
    const auto control = dsl::make_control_fixture();
    const auto rc = monodromy(control, MixedPoint(control.layout), two_pi / control.params.omega[0]);
    o.require(rc.max_distance_from_one() > 1e-3, "control multipliers at 1");
    const auto fp = find_fixed_point(control, Section{*control.layout->slot_of("phi"), 0.0, +1},
                                     MixedPoint(control.layout), 0.0);
    o.require(fp.status == FixedPointStatus::converged, "control flagged " + std::string(to_string(fp.status)));
    o.detail = "max |lambda - 1| " + fmt(worst) + "; control max |lambda - 1| " + fmt(rc.max_distance_from_one()) +
               ", status " + std::string(to_string(fp.status)) + (o.pass ? "" : "; " + o.detail);
    return o;
}

Outcome no_nearby_orbits() {
    Outcome o;
    for (int m : {0, 1}) {
        const auto sys = build_system(params(Family::ham_unique, 1, m, 0, {1.0}));
        const Section section{*sys.layout->slot_of("phi_1"), 0.0, +1};
        for (double eps : {0.1, -0.1, 0.01, -0.01}) {
            const auto r = find_fixed_point(sys, section, MixedPoint(sys.layout), eps);
            o.require(r.status == FixedPointStatus::not_found,
                      "m=" + std::to_string(m) + " eps=" + fmt(eps) + ": " + std::string(to_string(r.status)));
        }
        const auto zero = find_fixed_point(sys, section, MixedPoint(sys.layout), 0.0);
        o.require(zero.status == FixedPointStatus::singular_linearization,
                  "m=" + std::to_string(m) + " eps=0: " + std::string(to_string(zero.status)));
        o.require(zero.point && real_norm(*zero.point) <= 1e-9, "eps=0 point is not the origin");
    }
    if (o.pass) o.detail = "NotFound at +-0.1, +-0.01; SingularLinearization at the origin (m = 0, 1)";
    return o;
}

Outcome frequency_formula() {
    Outcome o;
    double worst = 0.0;
    auto check = [&](const System& sys, std::vector<double> offset) {
        const auto t = nearby_torus(sys, offset);
        const auto p0 = torus_point(t.torus, std::vector<double>(t.torus.free_angles.size(), 0.0));
        const auto traj = integrate(sys, p0, 2000.0, IntegratorConfig{Method::rk4, 1e-2});
        const auto fit = measure_frequencies(traj, t.torus.free_angles);
        for (std::size_t k = 0; k < fit.frequencies.size(); ++k) {
            const double err = std::abs(fit.frequencies[k] - t.predicted_frequency[k]);
            worst = std::max(worst, err);
            o.require(err <= 1e-4, sys.name + " rate " + std::to_string(k) + " off by " + fmt(err));
        }
    };
    check(build_system(params(Family::ham_compact, 1, 0, 0, {1.0})), {pi / 2});
    check(build_system(params(Family::ham_compact, 2, 1, 0, sqrt2_pair)), {pi / 6, 0.0});
    check(build_system(params(Family::rev_compact, 1, 0, 1, {1.0})), {pi / 2});
    check(build_system(params(Family::rev_compact, 2, 1, 2, sqrt2_pair)), {pi / 6, 0.0});
    double quad = 0.0;
    for (double zeta : {0.1, 0.25, 1.0, 2.5, 10.0}) {
        const double err = std::abs(two_pi / circulation_period(zeta) - std::sqrt(zeta * (zeta + 1.0)));
        quad = std::max(quad, err);
    }
    o.require(quad <= 1e-8, "quadrature off by " + fmt(quad));
    o.detail = "max rate error " + fmt(worst) + ", quadrature error " + fmt(quad) + (o.pass ? "" : "; " + o.detail);
    return o;
}

Outcome uniqueness_surveys() {
    Outcome o;
    std::size_t total = 0, escaped = 0;
    for (auto f : families) {
        const auto sys = build_system(params(f, 1, 1, is_reversible_family(f) ? 1 : 0, {std::sqrt(2.0)}));
        SurveyOptions opt;
        opt.samples = 10'000;
        opt.seed = 42;
        opt.jobs = 4;
        const auto r = survey_uniqueness(sys, opt);
        total += r.candidate_count;
        escaped += r.escaped;
        o.require(r.candidate_count == 0, sys.name + ": " + std::to_string(r.candidate_count) + " candidates");
        if (is_compact_family(f)) {
            const auto domain = isolation_domain(sys);
            const auto tori = delta_tori(sys);
            for (std::size_t k = 1; k < tori.size(); ++k) {
                const auto p = torus_point(tori[k], std::vector<double>{0.0});
                o.require(!in_modular_domain(p, domain), sys.name + ": delta torus inside the domain");
            }
        }
    }
    o.detail = "4 x 10000 samples, " + std::to_string(total) + " candidates (" + std::to_string(escaped) +
               " escaped orbits); delta tori outside the isolation domain" + (o.pass ? "" : "; " + o.detail);
    return o;
}

Outcome reversibility() {
    Outcome o;
    double worst = 0.0;
    for (auto f : families) {
        const auto sys = family_system(f, 2, 1);
        const auto r = verify_reversibility(sys, 100, 42, 5.0, 1e-6, 0.1);
        worst = std::max(worst, r.max_deviation);
        o.require(r.passed, sys.name + " deviation " + fmt(r.max_deviation));
    }
    const auto broken = verify_reversibility(with_broken_reversibility(family_system(Family::rev_unique, 2, 1)), 100,
                                             42, 5.0, 1e-6, 0.1);
    o.require(!broken.passed, "broken control passed");
    o.detail = "max deviation " + fmt(worst) + " over 4 x 100 points; broken control " + fmt(broken.max_deviation) +
               (o.pass ? "" : "; " + o.detail);
    return o;
}

Outcome dsl_fidelity() {
    Outcome o;
    double field = 0.0;
    for (auto name : {"ham_unique_n1_m0", "ham_unique_n2_m1", "ham_compact_n1_m0", "ham_compact_n2_m1"}) {
        std::ifstream in(std::string(KRONECKER_DATA_DIR) + "/hamiltonians/" + name + ".ham");
        std::stringstream buf;
        buf << in.rdbuf();
        const auto src = dsl::parse_dsl_source(buf.str());
        if (!src.target) {
            o.require(false, std::string(name) + " has no system line");
            continue;
        }
        const auto ref = build_system(*src.target);
        const auto sys = dsl::system_from_dsl(src, name);
        const auto r = dsl::cross_check_fields(ref.layout, ref.field, sys.layout, sys.field, 1000, 42);
        field = std::max(field, r.max_abs_deviation);
    }
    o.require(field <= 1e-12, "field deviation " + fmt(field));
    double deriv = 0.0;
    Rng rng(42);
    const std::vector<std::string> vars{"a", "b", "c"};
    for (int k = 0; k < 1000; ++k) {
        const auto e = random_expr(rng, vars, 4);
        const std::vector<double> v{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const auto b = bindings(vars, v);
        for (const auto& name : vars) {
            const double sym = dsl::eval_expr(dsl::differentiate(e, name), b);
            deriv = std::max(deriv, std::abs(sym - fd_partial(e, b, name)) / std::max(1.0, std::abs(sym)));
        }
    }
    o.require(deriv <= 1e-6, "derivative mismatch " + fmt(deriv));
    o.detail = "max field deviation " + fmt(field) + ", max derivative mismatch " + fmt(deriv) +
               (o.pass ? "" : "; " + o.detail);
    return o;
}

struct Criterion {
    int number;
    const char* name;
    double limit_seconds;
    std::function<Outcome()> run;
};

}  // namespace

int main() {
    const Criterion criteria[] = {
        {1, "torus invariance", 10, torus_invariance},
        {2, "conservation", 30, conservation},
        {3, "involution of integrals", 5, involution},
        {4, "rank degeneracy", 5, rank_degeneracy},
        {5, "monodromy identity", 10, monodromy_identity},
        {6, "no orbits off the zero level", 20, no_nearby_orbits},
        {7, "frequency formula", 30, frequency_formula},
        {8, "uniqueness and isolation surveys", 120, uniqueness_surveys},
        {9, "reversibility conjugacy", 20, reversibility},
        {10, "DSL fidelity", 10, dsl_fidelity},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (seconds > c.limit_seconds) {
            o.pass = false;
            o.detail += "; over the " + fmt(c.limit_seconds) + " s limit";
        }
        failed += !o.pass;
        std::printf("%s  %2d %-34s %6.2f s  %s\n", o.pass ? "PASS" : "FAIL", c.number, c.name, seconds,
                    o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
