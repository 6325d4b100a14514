// Phase space, catalog systems and the Hamiltonian DSL.

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "support.hpp"

using namespace kronecker;
using namespace kronecker::testing;

namespace {

constexpr Family all_families[] = {Family::ham_unique, Family::ham_compact, Family::rev_unique, Family::rev_compact};

System make(Family f, int n, int m, int l = 1) {
    return build_system(params(f, n, m, is_reversible_family(f) ? l : 0));
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// phase-core

TEST(Phase, WrapAngleLandsInHalfOpenIntervalAndKeepsClass) {
    Rng rng(1);
    for (int k = 0; k < 1000; ++k) {
        const double t = rng.uniform(-100.0, 100.0);
        const double w = wrap_angle(t);
        EXPECT_GT(w, -pi);
        EXPECT_LE(w, pi);
        const double turns = (t - w) / two_pi;
        EXPECT_NEAR(turns, std::round(turns), 1e-9);
    }
    EXPECT_DOUBLE_EQ(wrap_angle(pi), pi);
    EXPECT_DOUBLE_EQ(wrap_angle(-pi), pi);
}

TEST(Phase, TorusDistanceIgnoresFullTurnsOnAnglesOnly) {
    auto layout = std::make_shared<const CoordinateLayout>(std::vector<std::string>{"a", "r"}, std::vector<std::size_t>{0});
    const MixedPoint p(layout, {0.1, 0.5});
    EXPECT_NEAR(torus_distance(p, p.with(0, 0.1 + 6 * pi)), 0.0, 1e-12);
    EXPECT_NEAR(torus_distance(p, p.with(1, 0.5 + two_pi)), two_pi, 1e-12);
    EXPECT_NEAR(torus_distance(p.with(0, pi - 0.01), p.with(0, -pi + 0.01)), 0.02, 1e-12);
}

TEST(Phase, MixedPointRejectsForeignLayouts) {
    const auto a = make(Family::ham_unique, 1, 0);
    const auto b = make(Family::ham_unique, 2, 0);
    EXPECT_THROW(torus_distance(MixedPoint(a.layout), MixedPoint(b.layout)), error);
    EXPECT_THROW(eval_field(a, MixedPoint(b.layout)), error);
}

TEST(Phase, ModularDomainMembershipIsStrictAndPeriodic) {
    const auto sys = make(Family::ham_compact, 1, 0);
    const auto d = isolation_domain(sys);
    const Slots s(sys.params);
    MixedPoint p(sys.layout);
    EXPECT_TRUE(in_modular_domain(p, d));
    EXPECT_FALSE(in_modular_domain(p.with(s.u(0), pi), d));
    EXPECT_FALSE(in_modular_domain(p.with(s.x(), pi / 2), d));
    EXPECT_TRUE(in_modular_domain(p.with(s.y(), 0.3 + two_pi), d));
    EXPECT_TRUE(in_modular_domain(p.with(s.phi(0), 3.0), d));
    EXPECT_TRUE(d.contains(d));
}

TEST(Random, DerivedSeedsAreDeterministicAndDistinct) {
    EXPECT_EQ(derive_seed(42, 7), derive_seed(42, 7));
    std::set<std::uint64_t> seen;
    for (std::uint64_t k = 0; k < 1000; ++k) seen.insert(derive_seed(42, k));
    EXPECT_EQ(seen.size(), 1000u);
    Rng a(derive_seed(1, 2)), b(derive_seed(1, 2));
    for (int k = 0; k < 10; ++k) EXPECT_EQ(a.next(), b.next());
}

// ---------------------------------------------------------------------------
// systems-catalog

TEST(Catalog, ParsesFrequencyTokens) {
    const auto w = parse_omega("1, sqrt2,-golden,sqrt3,0.25");
    ASSERT_EQ(w.size(), 5u);
    EXPECT_DOUBLE_EQ(w[1], std::sqrt(2.0));
    EXPECT_DOUBLE_EQ(w[2], -(1.0 + std::sqrt(5.0)) / 2.0);
    EXPECT_DOUBLE_EQ(w[3], std::sqrt(3.0));
    EXPECT_DOUBLE_EQ(w[4], 0.25);
    EXPECT_THROW(parse_omega("1,pie"), error);
    EXPECT_TRUE(parse_omega("").empty());
}

TEST(Catalog, RejectsInvalidParameters) {
    EXPECT_THROW(build_system(params(Family::ham_unique, 0, 0)), error);
    EXPECT_THROW(build_system(params(Family::ham_unique, 2, 0, 0, {1.0})), error);
    EXPECT_THROW(build_system(params(Family::ham_unique, 1, -1)), error);
    EXPECT_THROW(build_system(params(Family::custom, 1, 0)), error);
}

TEST(Catalog, LayoutsHaveExpectedLabelsAndAngles) {
    const auto h = make(Family::ham_unique, 2, 1);
    EXPECT_EQ(h.layout->labels(), (std::vector<std::string>{"u_1", "u_2", "phi_1", "phi_2", "x", "y", "p_1", "q_1"}));
    EXPECT_EQ(h.layout->angle_slots().size(), 2u);
    const auto hc = make(Family::ham_compact, 2, 1);
    EXPECT_EQ(hc.layout->angle_slots().size(), hc.dim());
    const auto r = make(Family::rev_unique, 2, 1, 2);
    EXPECT_EQ(r.layout->labels(), (std::vector<std::string>{"phi_1", "phi_2", "v_1", "v_2", "y", "q_1"}));
    EXPECT_EQ(r.dim(), r.params.phase_dim());
}

TEST(Catalog, HamiltonianFieldsMatchFiniteDifferenceOfHandWrittenHamiltonian) {
    for (auto f : {Family::ham_unique, Family::ham_compact}) {
        for (auto [n, m] : {std::pair{1, 0}, {1, 1}, {2, 1}, {3, 2}}) {
            const auto sys = make(f, n, m);
            const auto pairs = catalog_pairs(sys);
            const auto h = [&](std::span<const double> z) { return oracle_hamiltonian(sys, z); };
            Rng rng(derive_seed(7, static_cast<std::uint64_t>(n * 10 + m)));
            for (int k = 0; k < 50; ++k) {
                const auto z = sample_box(rng, *sys.layout, 1.0);
                const auto expect = fd_hamilton_field(h, pairs, z);
                const auto got = eval_field(sys, MixedPoint(sys.layout, z));
                EXPECT_NEAR(eval_hamiltonian(sys, MixedPoint(sys.layout, z)), h(z), 1e-13);
                for (std::size_t i = 0; i < z.size(); ++i) EXPECT_NEAR(got[i], expect[i], 1e-7) << sys.layout->label(i);
            }
        }
    }
}

TEST(Catalog, ExactJacobianMatchesFiniteDifferences) {
    for (auto f : all_families) {
        const auto sys = make(f, 2, 1);
        Rng rng(3);
        for (int k = 0; k < 20; ++k) {
            const auto z = sample_box(rng, *sys.layout, 1.0);
            const auto exact = field_jacobian(sys, z, JacobianScheme::exact);
            const auto fd = finite_difference_jacobian(sys.field, z);
            EXPECT_LT((exact - fd).cwiseAbs().maxCoeff(), 1e-6) << sys.name;
        }
    }
}

TEST(Catalog, FieldOnCanonicalTorusIsTheLinearFlow) {
    for (auto f : all_families) {
        const auto sys = make(f, 2, 1);
        const auto torus = canonical_torus(sys);
        const auto p = torus_point(torus, std::vector<double>{0.4, -2.0});
        const auto rate = eval_field(sys, p);
        for (std::size_t k = 0; k < torus.free_angles.size(); ++k)
            EXPECT_DOUBLE_EQ(rate[torus.free_angles[k]], sys.params.omega[k]);
        for (const auto& [slot, v] : torus.pinned) EXPECT_EQ(rate[slot], 0.0) << sys.layout->label(slot);
    }
}

TEST(Catalog, InvolutionIsIdempotentAndReversesTheField) {
    for (auto f : all_families) {
        const auto sys = make(f, 2, 1);
        Rng rng(11);
        for (int k = 0; k < 100; ++k) {
            const MixedPoint p(sys.layout, sample_box(rng, *sys.layout, 1.0));
            const auto gp = apply_involution(sys, p);
            EXPECT_EQ(apply_involution(sys, gp), p);
            // g is linear, so reversibility of the field reads f(g z) = -g f(z)
            const auto fg = eval_field(sys, gp);
            const auto fz = eval_field(sys, p);
            for (std::size_t i = 0; i < fz.size(); ++i)
                EXPECT_NEAR(fg[i], -sys.involution_signs[i] * fz[i], 1e-14) << sys.name << " " << i;
        }
    }
}

TEST(Catalog, CertificateRateIsNonNegativeInTheDomain) {
    for (auto f : all_families) {
        const auto sys = make(f, 2, 2);
        std::optional<ModularDomain> d;
        if (is_compact_family(f)) d = isolation_domain(sys);
        Rng rng(5);
        for (int k = 0; k < 500; ++k) {
            const auto z = d ? sample_domain(rng, *d) : sample_box(rng, *sys.layout, 2.0);
            EXPECT_GE(lyapunov_rate(sys, z), 0.0) << sys.name;
        }
    }
}

TEST(Catalog, CertificateRateVanishesOnlyOnTheTorus) {
    const auto sys = make(Family::rev_unique, 1, 1, 1);
    const auto p = torus_point(canonical_torus(sys), std::vector<double>{1.0});
    EXPECT_EQ(lyapunov_rate(sys, p), 0.0);
    EXPECT_GT(lyapunov_rate(sys, p.with(*sys.layout->slot_of("v_1"), 1e-3)), 0.0);
}

TEST(Catalog, IntegralsComeInDocumentedOrder) {
    const auto sys = make(Family::ham_unique, 2, 1);
    ASSERT_EQ(sys.integrals.size(), 4u);
    EXPECT_EQ(sys.integrals[0].name, "H");
    const Slots s(sys.params);
    std::vector<double> c(sys.dim(), 0.0);
    c[s.u(1)] = 0.3;
    c[s.p(0)] = 0.5;
    c[s.q(0)] = 0.2;
    const auto v = eval_integrals(sys, MixedPoint(sys.layout, c));
    EXPECT_DOUBLE_EQ(v[2], 0.3);
    EXPECT_NEAR(v[0], oracle_hamiltonian(sys, c), 1e-15);
    EXPECT_THROW(eval_integrals(make(Family::rev_unique, 1, 0), MixedPoint(make(Family::rev_unique, 1, 0).layout)),
                 error);
}

TEST(Catalog, DeltaToriOfCompactFamiliesAreInvariantAndOutsideTheDomain) {
    for (auto f : {Family::ham_compact, Family::rev_compact}) {
        const auto sys = make(f, 1, 1, 1);
        const auto tori = delta_tori(sys);
        EXPECT_EQ(tori.size(), std::size_t{1} << detail::pinned_slots(sys).size());
        const auto domain = isolation_domain(sys);
        for (std::size_t k = 0; k < tori.size(); ++k) {
            const auto p = torus_point(tori[k], std::vector<double>{0.7});
            const auto rate = eval_field(sys, p);
            for (const auto& [slot, v] : tori[k].pinned) EXPECT_NEAR(rate[slot], 0.0, 1e-15);
            EXPECT_NEAR(rate[tori[k].free_angles[0]], tori[k].frequency[0], 1e-15);
            EXPECT_EQ(in_modular_domain(p, domain), k == 0);
        }
    }
    EXPECT_THROW(delta_tori(make(Family::ham_unique, 1, 0)), error);
}

TEST(Catalog, NearbyTorusPrediction) {
    const auto sys = make(Family::ham_compact, 2, 0);
    const std::vector<double> offset{pi / 6, 0.0};
    const auto t = nearby_torus(sys, offset);
    EXPECT_DOUBLE_EQ(t.zeta, 0.25);
    EXPECT_NEAR(t.predicted_frequency[0], std::cos(pi / 6), 1e-15);
    EXPECT_NEAR(t.predicted_frequency[1], std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(t.predicted_frequency[2], std::sqrt(0.25 * 1.25), 1e-15);
    EXPECT_THROW(nearby_torus(sys, std::vector<double>{0.0, 0.0}), error);
    EXPECT_THROW(nearby_torus(sys, std::vector<double>{0.1}), error);
}

// ---------------------------------------------------------------------------
// hamiltonian-dsl

TEST(Dsl, ParsesPrecedenceAndAssociativity) {
    using dsl::eval_expr;
    const dsl::Bindings b{{"a", 2.0}, {"b", 3.0}};
    EXPECT_DOUBLE_EQ(eval_expr(dsl::parse("1 + 2*3"), {}), 7.0);
    EXPECT_DOUBLE_EQ(eval_expr(dsl::parse("8/4/2"), {}), 1.0);
    // exponents are integer literals, so a chain of powers groups to the left
    EXPECT_DOUBLE_EQ(eval_expr(dsl::parse("2^3^2"), {}), 64.0);
    EXPECT_THROW(dsl::parse("x^(y)"), syntax_error);
    EXPECT_DOUBLE_EQ(eval_expr(dsl::parse("-a^2"), b), -4.0);
    EXPECT_DOUBLE_EQ(eval_expr(dsl::parse("(a - b)*(a + b)"), b), -5.0);
    EXPECT_DOUBLE_EQ(eval_expr(dsl::parse("sin(a)^2 + cos(a)^2"), b), 1.0);
    EXPECT_DOUBLE_EQ(eval_expr(dsl::parse("1.5e1 - .5"), {}), 14.5);
}

TEST(Dsl, ReportsSyntaxErrorPositions) {
    auto position = [](const char* text) {
        try {
            dsl::parse(text);
        } catch (const syntax_error& e) {
            return static_cast<long>(e.position());
        }
        return -1L;
    };
    EXPECT_EQ(position("x + $"), 4);
    EXPECT_EQ(position("x + * y"), 4);
    EXPECT_EQ(position("sin(x"), 5);
    EXPECT_EQ(position("x y"), 2);
    EXPECT_EQ(position(""), 0);
}

TEST(Dsl, EvaluationErrors) {
    EXPECT_THROW(dsl::eval_expr(dsl::parse("x + 1"), {}), error);
    EXPECT_THROW(dsl::eval_expr(dsl::parse("1 / (x - x)"), {{"x", 1.0}}), error);
}

TEST(Dsl, PrintedFormReparsesToSameValue) {
    Rng rng(17);
    const std::vector<std::string> vars{"a", "b", "c"};
    for (int k = 0; k < 300; ++k) {
        const auto e = random_expr(rng, vars, 4);
        const auto again = dsl::parse(dsl::to_string(e));
        const std::vector<double> v{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const auto b = bindings(vars, v);
        EXPECT_NEAR(dsl::eval_expr(again, b), dsl::eval_expr(e, b), 1e-12 * (1 + std::abs(dsl::eval_expr(e, b))))
            << dsl::to_string(e);
    }
}

TEST(Dsl, SimplifyPreservesValues) {
    Rng rng(19);
    const std::vector<std::string> vars{"a", "b"};
    for (int k = 0; k < 300; ++k) {
        const auto e = random_expr(rng, vars, 5);
        const auto s = dsl::simplify(e);
        EXPECT_LE(dsl::node_count(s), dsl::node_count(e));
        const std::vector<double> v{rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const auto b = bindings(vars, v);
        const double ref = dsl::eval_expr(e, b);
        EXPECT_NEAR(dsl::eval_expr(s, b), ref, 1e-10 * (1 + std::abs(ref))) << dsl::to_string(e);
    }
    EXPECT_TRUE(dsl::simplify(dsl::parse("0*x + 1*y - 0")) == dsl::var("y"));
    EXPECT_TRUE(dsl::simplify(dsl::parse("2*3 + 1")).is_constant(7.0));
}

TEST(Dsl, SymbolicDerivativesMatchFiniteDifferences) {
    Rng rng(23);
    const std::vector<std::string> vars{"a", "b", "c"};
    for (int k = 0; k < 300; ++k) {
        const auto e = random_expr(rng, vars, 4);
        const std::vector<double> v{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const auto b = bindings(vars, v);
        for (const auto& name : vars) {
            const double sym = dsl::eval_expr(dsl::differentiate(e, name), b);
            EXPECT_NEAR(sym, fd_partial(e, b, name), 1e-6 * std::max(1.0, std::abs(sym))) << dsl::to_string(e);
        }
    }
}

TEST(Dsl, CompiledExpressionsAgreeWithTreeEvaluation) {
    Rng rng(29);
    const std::vector<std::string> vars{"a", "b", "c"};
    for (int k = 0; k < 200; ++k) {
        const auto e = random_expr(rng, vars, 5);
        const dsl::CompiledExpr c(e, vars);
        const std::vector<double> v{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const double ref = dsl::eval_expr(e, bindings(vars, v));
        EXPECT_NEAR(c(v), ref, 1e-12 * (1 + std::abs(ref)));
    }
}

TEST(Dsl, PairingErrors) {
    const auto h = dsl::parse("q*p + z");
    EXPECT_THROW(dsl::HamiltonianField(h, {{"q", "p"}}), error);
    EXPECT_THROW(dsl::HamiltonianField(dsl::parse("q*p"), {{"q", "q"}}), error);
    EXPECT_THROW(dsl::HamiltonianField(dsl::parse("q*p"), {{"q", "p"}}, {}, {"w"}), error);
}

TEST(Dsl, HarmonicOscillatorField) {
    const dsl::HamiltonianField f(dsl::parse("(p^2 + q^2)/2"), {{"q", "p"}});
    std::vector<double> z{0.3, -0.7}, dz(2);
    f(z, dz);
    EXPECT_DOUBLE_EQ(dz[0], -0.7);  // q' = p
    EXPECT_DOUBLE_EQ(dz[1], -0.3);  // p' = -q
}

TEST(Dsl, SourceFileHeadersAndComments) {
    const auto src = dsl::parse_dsl_source("# pendulum\npairs: (q, p)\nangles: q\nH = p^2/2\n  - cos(q)\n");
    EXPECT_EQ(src.pairing.size(), 1u);
    EXPECT_TRUE(src.angles.count("q"));
    EXPECT_FALSE(src.target.has_value());
    const auto sys = dsl::system_from_dsl(src);
    EXPECT_TRUE(sys.layout->is_angle(0));
    std::vector<double> dz(2);
    sys.field(std::vector<double>{pi / 2, 0.0}, dz);
    EXPECT_NEAR(dz[1], -1.0, 1e-15);
}

TEST(Dsl, SourceErrorsPointIntoTheFile) {
    try {
        dsl::parse_dsl_source("pairs: (q,p)\nH = q + # p\n");
        FAIL();
    } catch (const syntax_error& e) {
        EXPECT_EQ(e.position(), 21u);
    }
    EXPECT_THROW(dsl::parse_dsl_source("H = q*p\n"), syntax_error);
    EXPECT_THROW(dsl::parse_dsl_source("pairs: (q,p\nH = q*p\n"), syntax_error);
    EXPECT_THROW(dsl::parse_dsl_source("pairs: (q,p)\nsystem: ham-nothing n=1\nH = q*p\n"), syntax_error);
}

TEST(Dsl, GeneratedTextsReproduceCatalogFields) {
    for (auto f : {Family::ham_unique, Family::ham_compact}) {
        for (auto [n, m] : {std::pair{1, 0}, {2, 1}, {2, 3}}) {
            const auto p = params(f, n, m);
            const auto sys = build_system(p);
            const auto src = dsl::parse_dsl_source(dsl::hamiltonian_text(p));
            ASSERT_TRUE(src.target);
            EXPECT_EQ(*src.target, p);
            const auto compiled = dsl::system_from_dsl(src);
            const auto r = dsl::cross_check_fields(sys.layout, sys.field, compiled.layout, compiled.field, 200, 3);
            EXPECT_LE(r.max_abs_deviation, 1e-12) << sys.name;
        }
    }
    EXPECT_THROW(dsl::hamiltonian_text(params(Family::rev_unique, 1, 0)), error);
}

TEST(Dsl, ShippedFilesCompile) {
    for (auto name : {"ham_unique_n1_m0", "ham_unique_n2_m1", "ham_compact_n1_m0", "ham_compact_n2_m1"}) {
        const auto text = read_file(std::string(KRONECKER_DATA_DIR) + "/hamiltonians/" + name + ".ham");
        ASSERT_FALSE(text.empty()) << name;
        const auto src = dsl::parse_dsl_source(text);
        ASSERT_TRUE(src.target);
        const auto ref = build_system(*src.target);
        const auto sys = dsl::system_from_dsl(src, name);
        const auto r = dsl::cross_check_fields(ref.layout, ref.field, sys.layout, sys.field, 100, 1);
        EXPECT_LE(r.max_abs_deviation, 1e-12) << name;
    }
}

TEST(Dsl, ControlFixtureIsHamiltonianWithJacobian) {
    const auto sys = dsl::make_control_fixture();
    EXPECT_TRUE(sys.has_hamiltonian());
    Rng rng(2);
    const auto z = sample_box(rng, *sys.layout, 1.0);
    const auto exact = field_jacobian(sys, z, JacobianScheme::exact);
    const auto fd = finite_difference_jacobian(sys.field, z);
    EXPECT_LT((exact - fd).cwiseAbs().maxCoeff(), 1e-6);
}
