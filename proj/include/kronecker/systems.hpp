#pragma once

// The four model families with a unique or isolated Kronecker torus:
//
//   ham-unique   H = sum_i (w_i u_i + x u_i^2) + x^3/3 + x y^2 + sum_j (p_j^3/3 + p_j q_j^2)
//                on R^{n+2m+2} x T^n, form du^dphi + dx^dy + dp^dq
//   ham-compact  same with every variable replaced by its sine, on T^{2n+2m+2}
//   rev-unique   phi' = w, v' = 0, y' = |v|^2 + y^2 + |q|^2, q' = 0 on T^n x R^{l+m+1}
//   rev-compact  same with sines, on T^{n+l+m+1}
//
// Slot layout (a convention, not forced by the model):
//   hamiltonian: u_1..u_n, phi_1..phi_n, x, y, p_1..p_m, q_1..q_m
//   reversible:  phi_1..phi_n, v_1..v_l, y, q_1..q_m

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kronecker/error.hpp"
#include "kronecker/phase.hpp"

namespace kronecker {

enum class Family { ham_unique, ham_compact, rev_unique, rev_compact, custom };

constexpr std::string_view to_string(Family f) noexcept {
    switch (f) {
        case Family::ham_unique: return "ham-unique";
        case Family::ham_compact: return "ham-compact";
        case Family::rev_unique: return "rev-unique";
        case Family::rev_compact: return "rev-compact";
        case Family::custom: return "custom";
    }
    return "custom";
}

/// Comma-separated frequencies; besides decimals accepts the tokens sqrt2,
/// sqrt3 and golden (optionally negated) at full double precision.
inline std::vector<double> parse_omega(std::string_view text) {
    std::vector<double> out;
    if (text.empty()) return out;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find(',', start);
        if (end == std::string_view::npos) end = text.size();
        std::string token(text.substr(start, end - start));
        std::erase_if(token, [](char c) { return c == ' ' || c == '\t'; });
        double sign = 1.0;
        if (!token.empty() && token.front() == '-') {
            sign = -1.0;
            token.erase(0, 1);
        }
        double value = 0.0;
        if (token == "sqrt2") value = std::numbers::sqrt2;
        else if (token == "sqrt3") value = std::numbers::sqrt3;
        else if (token == "golden") value = std::numbers::phi;
        else {
            std::size_t used = 0;
            try {
                value = std::stod(token, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (token.empty() || used != token.size() || !std::isfinite(value))
                throw error(errc::invalid_params, "bad frequency '" + token + "'");
        }
        out.push_back(sign * value);
        start = end + 1;
    }
    return out;
}

inline std::optional<Family> family_from_string(std::string_view s) {
    for (auto f : {Family::ham_unique, Family::ham_compact, Family::rev_unique, Family::rev_compact})
        if (s == to_string(f)) return f;
    return std::nullopt;
}

constexpr bool is_hamiltonian_family(Family f) noexcept {
    return f == Family::ham_unique || f == Family::ham_compact;
}
constexpr bool is_reversible_family(Family f) noexcept {
    return f == Family::rev_unique || f == Family::rev_compact;
}
constexpr bool is_compact_family(Family f) noexcept {
    return f == Family::ham_compact || f == Family::rev_compact;
}

struct SystemParams {
    Family family = Family::ham_unique;
    int n = 1;
    int m = 0;
    int l = 0;  // reversible families only
    std::vector<double> omega{1.0};

    /// Degrees of freedom n + m + 1 (hamiltonian families).
    int degrees_of_freedom() const { return n + m + 1; }

    std::size_t phase_dim() const {
        return is_hamiltonian_family(family) ? static_cast<std::size_t>(2 * n + 2 * m + 2)
                                             : static_cast<std::size_t>(n + l + m + 1);
    }

    friend bool operator==(const SystemParams&, const SystemParams&) = default;
};

using FieldFn = std::function<void(std::span<const double>, std::span<double>)>;
using ScalarFn = std::function<double(std::span<const double>)>;
/// Writes the field Jacobian at z, row-major (d x d).
using JacobianFn = std::function<void(std::span<const double>, std::span<double>)>;

struct NamedIntegral {
    std::string name;
    ScalarFn fn;
};

/// (position slot, momentum slot): position rate = +dH/d(momentum).
using CanonicalPairing = std::vector<std::pair<std::size_t, std::size_t>>;

/// An autonomous system on a mixed phase space. Immutable after construction.
struct System {
    SystemParams params;
    std::string name;
    LayoutPtr layout;
    FieldFn field;
    /// Exact Jacobian when one is known; empty otherwise.
    JacobianFn jacobian;
    std::optional<ScalarFn> hamiltonian;
    std::vector<NamedIntegral> integrals;
    /// Diagonal linear involution (+1/-1 per slot); empty when the system has none.
    std::vector<double> involution_signs;
    CanonicalPairing canonical_pairing;
    /// Slots whose rates sum to the uniqueness certificate L = y + sum_j q_j.
    std::vector<std::size_t> certificate_slots;

    std::size_t dim() const { return layout->dim(); }
    bool has_hamiltonian() const { return hamiltonian.has_value(); }
};

/// Slot indices of the model families.
struct Slots {
    int n = 0, m = 0, l = 0;
    bool hamiltonian = true;

    explicit Slots(const SystemParams& p)
        : n(p.n), m(p.m), l(p.l), hamiltonian(!is_reversible_family(p.family)) {}

    std::size_t u(int i) const { return static_cast<std::size_t>(i); }
    std::size_t phi(int i) const { return static_cast<std::size_t>(hamiltonian ? n + i : i); }
    std::size_t x() const { return static_cast<std::size_t>(2 * n); }
    std::size_t v(int k) const { return static_cast<std::size_t>(n + k); }
    std::size_t y() const { return static_cast<std::size_t>(hamiltonian ? 2 * n + 1 : n + l); }
    std::size_t p(int j) const { return static_cast<std::size_t>(2 * n + 2 + j); }
    std::size_t q(int j) const { return static_cast<std::size_t>(hamiltonian ? 2 * n + 2 + m + j : n + l + 1 + j); }
};

namespace detail {

inline void validate(const SystemParams& p) {
    if (p.family == Family::custom) throw error(errc::invalid_params, "custom systems are built from DSL text");
    if (p.m < 0 || p.l < 0 || p.n < 0) throw error(errc::invalid_params, "n, m, l must be nonnegative");
    if (is_hamiltonian_family(p.family)) {
        if (p.n < 1) throw error(errc::invalid_params, "hamiltonian families need n >= 1");
        if (p.l != 0) throw error(errc::invalid_params, "hamiltonian families take no l");
    }
    if (p.omega.size() != static_cast<std::size_t>(p.n))
        throw error(errc::invalid_params, "omega must have n = " + std::to_string(p.n) + " entries");
    for (double w : p.omega)
        if (!std::isfinite(w)) throw error(errc::invalid_params, "omega entries must be finite");
}

inline LayoutPtr make_layout(const SystemParams& p) {
    const bool compact = is_compact_family(p.family);
    std::vector<std::string> labels;
    std::vector<std::size_t> angles;
    auto push = [&](std::string label, bool angle) {
        if (angle || compact) angles.push_back(labels.size());
        labels.push_back(std::move(label));
    };
    if (is_hamiltonian_family(p.family)) {
        for (int i = 1; i <= p.n; ++i) push("u_" + std::to_string(i), false);
        for (int i = 1; i <= p.n; ++i) push("phi_" + std::to_string(i), true);
        push("x", false);
        push("y", false);
        for (int j = 1; j <= p.m; ++j) push("p_" + std::to_string(j), false);
        for (int j = 1; j <= p.m; ++j) push("q_" + std::to_string(j), false);
    } else {
        for (int i = 1; i <= p.n; ++i) push("phi_" + std::to_string(i), true);
        for (int k = 1; k <= p.l; ++k) push("v_" + std::to_string(k), false);
        push("y", false);
        for (int j = 1; j <= p.m; ++j) push("q_" + std::to_string(j), false);
    }
    return std::make_shared<const CoordinateLayout>(std::move(labels), std::move(angles));
}

inline FieldFn make_field(const SystemParams& p) {
    const Slots s(p);
    const auto omega = p.omega;
    const int n = p.n, m = p.m, l = p.l;
    switch (p.family) {
        case Family::ham_unique:
            return [=](std::span<const double> z, std::span<double> dz) {
                const double x = z[s.x()], y = z[s.y()];
                double usq = 0.0;
                for (int i = 0; i < n; ++i) {
                    const double u = z[s.u(i)];
                    dz[s.phi(i)] = omega[i] + 2.0 * x * u;
                    dz[s.u(i)] = 0.0;
                    usq += u * u;
                }
                dz[s.y()] = usq + x * x + y * y;
                dz[s.x()] = -2.0 * x * y;
                for (int j = 0; j < m; ++j) {
                    const double pj = z[s.p(j)], qj = z[s.q(j)];
                    dz[s.q(j)] = pj * pj + qj * qj;
                    dz[s.p(j)] = -2.0 * pj * qj;
                }
            };
        case Family::ham_compact:
            return [=](std::span<const double> z, std::span<double> dz) {
                const double x = z[s.x()], y = z[s.y()];
                const double sx = std::sin(x), sy = std::sin(y);
                double usq = 0.0;
                for (int i = 0; i < n; ++i) {
                    const double u = z[s.u(i)];
                    const double su = std::sin(u);
                    dz[s.phi(i)] = omega[i] * std::cos(u) + sx * std::sin(2.0 * u);
                    dz[s.u(i)] = 0.0;
                    usq += su * su;
                }
                dz[s.y()] = (usq + sx * sx + sy * sy) * std::cos(x);
                dz[s.x()] = -sx * std::sin(2.0 * y);
                for (int j = 0; j < m; ++j) {
                    const double pj = z[s.p(j)], qj = z[s.q(j)];
                    const double sp = std::sin(pj), sq = std::sin(qj);
                    dz[s.q(j)] = (sp * sp + sq * sq) * std::cos(pj);
                    dz[s.p(j)] = -sp * std::sin(2.0 * qj);
                }
            };
        case Family::rev_unique:
            return [=](std::span<const double> z, std::span<double> dz) {
                for (int i = 0; i < n; ++i) dz[s.phi(i)] = omega[i];
                double sum = 0.0;
                for (int k = 0; k < l; ++k) {
                    sum += z[s.v(k)] * z[s.v(k)];
                    dz[s.v(k)] = 0.0;
                }
                for (int j = 0; j < m; ++j) {
                    sum += z[s.q(j)] * z[s.q(j)];
                    dz[s.q(j)] = 0.0;
                }
                const double y = z[s.y()];
                dz[s.y()] = sum + y * y;
            };
        case Family::rev_compact:
            return [=](std::span<const double> z, std::span<double> dz) {
                for (int i = 0; i < n; ++i) dz[s.phi(i)] = omega[i];
                double sum = 0.0;
                for (int k = 0; k < l; ++k) {
                    const double sv = std::sin(z[s.v(k)]);
                    sum += sv * sv;
                    dz[s.v(k)] = 0.0;
                }
                for (int j = 0; j < m; ++j) {
                    const double sq = std::sin(z[s.q(j)]);
                    sum += sq * sq;
                    dz[s.q(j)] = 0.0;
                }
                const double sy = std::sin(z[s.y()]);
                dz[s.y()] = sum + sy * sy;
            };
        case Family::custom: break;
    }
    throw error(errc::invalid_params, "no built-in field for this family");
}

// The compact family is the unique one with every variable replaced by its sine.
template <bool Compact>
double coord(std::span<const double> z, std::size_t slot) {
    if constexpr (Compact) return std::sin(z[slot]);
    else return z[slot];
}

template <bool Compact>
ScalarFn make_hamiltonian(const SystemParams& p) {
    const Slots s(p);
    const auto omega = p.omega;
    const int n = p.n, m = p.m;
    return [=](std::span<const double> z) {
        const double x = coord<Compact>(z, s.x()), y = coord<Compact>(z, s.y());
        double h = 0.0;
        for (int i = 0; i < n; ++i) {
            const double u = coord<Compact>(z, s.u(i));
            h += omega[i] * u + x * u * u;
        }
        h += x * x * x / 3.0 + x * y * y;
        for (int j = 0; j < m; ++j) {
            const double pj = coord<Compact>(z, s.p(j)), qj = coord<Compact>(z, s.q(j));
            h += pj * pj * pj / 3.0 + pj * qj * qj;
        }
        return h;
    };
}

// c(v) = sin v or v, and its first two derivatives
template <bool Compact>
std::array<double, 3> coord_jet(double v) {
    if constexpr (Compact) return {std::sin(v), std::cos(v), -std::sin(v)};
    else return {v, 1.0, 0.0};
}

/// Exact Jacobian of make_field, row-major: row = rate slot, column = coordinate.
template <bool Compact>
JacobianFn make_jacobian(const SystemParams& p) {
    const Slots s(p);
    const auto omega = p.omega;
    const int n = p.n, m = p.m, l = p.l;
    const std::size_t d = p.phase_dim();
    if (is_hamiltonian_family(p.family)) {
        return [=](std::span<const double> z, std::span<double> J) {
            std::fill(J.begin(), J.end(), 0.0);
            auto at = [&](std::size_t r, std::size_t c) -> double& { return J[r * d + c]; };
            const auto [X, X1, X2] = coord_jet<Compact>(z[s.x()]);
            const auto [Y, Y1, Y2] = coord_jet<Compact>(z[s.y()]);
            double sum = X * X + Y * Y;
            for (int i = 0; i < n; ++i) {
                const auto [U, U1, U2] = coord_jet<Compact>(z[s.u(i)]);
                sum += U * U;
                // phi' = (w + 2XU) U'
                at(s.phi(i), s.u(i)) = 2.0 * X * U1 * U1 + (omega[i] + 2.0 * X * U) * U2;
                at(s.phi(i), s.x()) = 2.0 * X1 * U * U1;
                at(s.y(), s.u(i)) = 2.0 * U * U1 * X1;
            }
            // y' = (sum U^2 + X^2 + Y^2) X',  x' = -2 X Y Y'
            at(s.y(), s.x()) = 2.0 * X * X1 * X1 + sum * X2;
            at(s.y(), s.y()) = 2.0 * Y * Y1 * X1;
            at(s.x(), s.x()) = -2.0 * X1 * Y * Y1;
            at(s.x(), s.y()) = -2.0 * X * (Y1 * Y1 + Y * Y2);
            for (int j = 0; j < m; ++j) {
                const auto [P, P1, P2] = coord_jet<Compact>(z[s.p(j)]);
                const auto [Q, Q1, Q2] = coord_jet<Compact>(z[s.q(j)]);
                at(s.q(j), s.p(j)) = 2.0 * P * P1 * P1 + (P * P + Q * Q) * P2;
                at(s.q(j), s.q(j)) = 2.0 * Q * Q1 * P1;
                at(s.p(j), s.p(j)) = -2.0 * P1 * Q * Q1;
                at(s.p(j), s.q(j)) = -2.0 * P * (Q1 * Q1 + Q * Q2);
            }
        };
    }
    return [=](std::span<const double> z, std::span<double> J) {
        std::fill(J.begin(), J.end(), 0.0);
        auto at = [&](std::size_t r, std::size_t c) -> double& { return J[r * d + c]; };
        // y' = sum V^2 + sum Q^2 + Y^2
        auto square_rate = [&](std::size_t slot) {
            const auto [V, V1, V2] = coord_jet<Compact>(z[slot]);
            at(s.y(), slot) = 2.0 * V * V1;
        };
        for (int k = 0; k < l; ++k) square_rate(s.v(k));
        for (int j = 0; j < m; ++j) square_rate(s.q(j));
        square_rate(s.y());
    };
}

template <bool Compact>
std::vector<NamedIntegral> make_integrals(const SystemParams& p, const ScalarFn& hamiltonian) {
    const Slots s(p);
    std::vector<NamedIntegral> out;
    out.push_back({"H", hamiltonian});
    for (int i = 0; i < p.n; ++i) {
        const auto slot = s.u(i);
        std::string name = "u_" + std::to_string(i + 1);
        if constexpr (Compact) name = "sin " + name;
        out.push_back({name, [slot](std::span<const double> z) { return coord<Compact>(z, slot); }});
    }
    for (int j = 0; j < p.m; ++j) {
        const auto ps = s.p(j), qs = s.q(j);
        out.push_back({"C_" + std::to_string(j + 1), [ps, qs](std::span<const double> z) {
                           const double pj = coord<Compact>(z, ps), qj = coord<Compact>(z, qs);
                           return pj * pj * pj / 3.0 + pj * qj * qj;
                       }});
    }
    return out;
}

}  // namespace detail

/// Construct one of the four model families.
inline System build_system(const SystemParams& params) {
    detail::validate(params);
    System sys;
    sys.params = params;
    sys.name = std::string(to_string(params.family));
    sys.layout = detail::make_layout(params);
    sys.field = detail::make_field(params);
    sys.jacobian = is_compact_family(params.family) ? detail::make_jacobian<true>(params)
                                                    : detail::make_jacobian<false>(params);
    const Slots s(params);
    sys.involution_signs.assign(sys.layout->dim(), 1.0);
    if (is_hamiltonian_family(params.family)) {
        const bool compact = params.family == Family::ham_compact;
        sys.hamiltonian = compact ? detail::make_hamiltonian<true>(params) : detail::make_hamiltonian<false>(params);
        sys.integrals = compact ? detail::make_integrals<true>(params, *sys.hamiltonian)
                                : detail::make_integrals<false>(params, *sys.hamiltonian);
        for (int i = 0; i < params.n; ++i) {
            sys.canonical_pairing.emplace_back(s.phi(i), s.u(i));
            sys.involution_signs[s.phi(i)] = -1.0;
        }
        sys.canonical_pairing.emplace_back(s.y(), s.x());
        sys.involution_signs[s.y()] = -1.0;
        for (int j = 0; j < params.m; ++j) {
            sys.canonical_pairing.emplace_back(s.q(j), s.p(j));
            sys.involution_signs[s.q(j)] = -1.0;
        }
    } else {
        for (int i = 0; i < params.n; ++i) sys.involution_signs[s.phi(i)] = -1.0;
        sys.involution_signs[s.y()] = -1.0;
        for (int j = 0; j < params.m; ++j) sys.involution_signs[s.q(j)] = -1.0;
    }
    sys.certificate_slots.push_back(s.y());
    for (int j = 0; j < params.m; ++j) sys.certificate_slots.push_back(s.q(j));
    return sys;
}

inline void require_layout(const System& sys, const MixedPoint& p) {
    if (!same_layout(sys.layout, p.layout()))
        throw error(errc::layout_mismatch, "point does not belong to system " + sys.name);
}

inline std::vector<double> eval_field(const System& sys, const MixedPoint& p) {
    require_layout(sys, p);
    std::vector<double> out(sys.dim());
    sys.field(p.coords(), out);
    return out;
}

inline double eval_hamiltonian(const System& sys, const MixedPoint& p) {
    if (!sys.hamiltonian) throw error(errc::not_hamiltonian, sys.name + " has no Hamilton function");
    require_layout(sys, p);
    return (*sys.hamiltonian)(p.coords());
}

/// Integral values in the order (H, u_1..u_n, C_1..C_m).
inline std::vector<double> eval_integrals(const System& sys, const MixedPoint& p) {
    if (!sys.hamiltonian) throw error(errc::not_hamiltonian, sys.name + " has no first integrals");
    require_layout(sys, p);
    std::vector<double> out;
    out.reserve(sys.integrals.size());
    for (const auto& in : sys.integrals) out.push_back(in.fn(p.coords()));
    return out;
}

inline MixedPoint apply_involution(const System& sys, const MixedPoint& p) {
    require_layout(sys, p);
    if (sys.involution_signs.empty()) throw error(errc::invalid_params, sys.name + " has no reversing involution");
    std::vector<double> c(p.coords().begin(), p.coords().end());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] *= sys.involution_signs[i];
    return {p.layout(), std::move(c)};
}

/// d/dt (y + sum_j q_j) along the field.
inline double lyapunov_rate(const System& sys, std::span<const double> z) {
    if (sys.certificate_slots.empty()) throw error(errc::invalid_params, sys.name + " has no uniqueness certificate");
    if (z.size() != sys.dim()) throw error(errc::layout_mismatch, "coordinate count mismatch");
    std::vector<double> rate(sys.dim());
    sys.field(z, rate);
    double sum = 0.0;
    for (auto s : sys.certificate_slots) sum += rate[s];
    return sum;
}

inline double lyapunov_rate(const System& sys, const MixedPoint& p) {
    require_layout(sys, p);
    return lyapunov_rate(sys, p.coords());
}

/// The certificate function L = y + sum_j q_j on unwrapped coordinates.
inline double certificate_value(const System& sys, std::span<const double> z) {
    double sum = 0.0;
    for (auto s : sys.certificate_slots) sum += z[s];
    return sum;
}

// ---------------------------------------------------------------------------
// Tori

/// Invariant torus: pinned slot values plus free angle slots rotating with
/// constant rates `frequency`.
struct TorusSpec {
    LayoutPtr layout;
    std::vector<std::pair<std::size_t, double>> pinned;
    std::vector<std::size_t> free_angles;
    std::vector<double> frequency;
};

inline MixedPoint torus_point(const TorusSpec& t, std::span<const double> angles) {
    if (angles.size() != t.free_angles.size())
        throw error(errc::layout_mismatch, "expected " + std::to_string(t.free_angles.size()) + " torus angles");
    std::vector<double> c(t.layout->dim(), 0.0);
    for (const auto& [slot, value] : t.pinned) c[slot] = value;
    for (std::size_t k = 0; k < angles.size(); ++k) c[t.free_angles[k]] = angles[k];
    return {t.layout, std::move(c)};
}

namespace detail {

inline std::vector<std::size_t> pinned_slots(const System& sys) {
    const Slots s(sys.params);
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < sys.dim(); ++i) out.push_back(i);
    std::erase_if(out, [&](std::size_t slot) {
        for (int i = 0; i < sys.params.n; ++i)
            if (slot == s.phi(i)) return true;
        return false;
    });
    return out;
}

inline void require_family(const System& sys) {
    if (sys.params.family == Family::custom) throw error(errc::invalid_params, "custom systems have no catalog tori");
}

}  // namespace detail

/// u = 0, x = y = 0, p = q = 0 (hamiltonian); v = 0, y = 0, q = 0 (reversible).
inline TorusSpec canonical_torus(const System& sys) {
    detail::require_family(sys);
    const Slots s(sys.params);
    TorusSpec t{sys.layout, {}, {}, sys.params.omega};
    for (auto slot : detail::pinned_slots(sys)) t.pinned.emplace_back(slot, 0.0);
    for (int i = 0; i < sys.params.n; ++i) t.free_angles.push_back(s.phi(i));
    return t;
}

/// All tori of a compact family whose pinned slots are each 0 or pi. Pattern
/// k pins the b-th pinned slot to pi when bit b of k is set, so pattern 0 is
/// the canonical torus. On u_i = pi the angle phi_i runs backwards, so the
/// recorded rate is w_i cos(delta_i) = +-w_i.
inline std::vector<TorusSpec> delta_tori(const System& sys) {
    if (!is_compact_family(sys.params.family)) throw error(errc::not_compact, sys.name + " is not a compact family");
    const auto slots = detail::pinned_slots(sys);
    if (slots.size() > 24) throw error(errc::invalid_params, "too many delta tori to enumerate");
    const bool hamiltonian = sys.params.family == Family::ham_compact;
    std::vector<TorusSpec> out;
    const std::size_t count = std::size_t{1} << slots.size();
    out.reserve(count);
    for (std::size_t pattern = 0; pattern < count; ++pattern) {
        TorusSpec t = canonical_torus(sys);
        for (std::size_t b = 0; b < slots.size(); ++b)
            if (pattern & (std::size_t{1} << b)) t.pinned[b].second = pi;
        if (hamiltonian) {
            for (int i = 0; i < sys.params.n; ++i)
                if (pattern & (std::size_t{1} << i)) t.frequency[i] = -t.frequency[i];
        }
        out.push_back(std::move(t));
    }
    return out;
}

/// The (n+1)-tori {u = u0, x = 0, p = q = 0} of ham-compact and {v = v0, q = 0}
/// of rev-compact. `zeta` is sum sin^2 of the offset; the extra angle is y.
struct NearbyTorusSpec {
    std::vector<double> offset;
    double zeta = 0.0;
    std::vector<double> predicted_frequency;
    TorusSpec torus;
};

inline NearbyTorusSpec nearby_torus(const System& sys, std::span<const double> offset) {
    if (!is_compact_family(sys.params.family)) throw error(errc::not_compact, sys.name + " is not a compact family");
    const auto& p = sys.params;
    const Slots s(p);
    const bool hamiltonian = p.family == Family::ham_compact;
    const std::size_t expected = static_cast<std::size_t>(hamiltonian ? p.n : p.l);
    if (offset.size() != expected)
        throw error(errc::layout_mismatch, "offset must have " + std::to_string(expected) + " entries");

    NearbyTorusSpec out;
    out.offset.assign(offset.begin(), offset.end());
    for (double o : offset) out.zeta += std::sin(o) * std::sin(o);
    if (!(out.zeta > 1e-15)) throw error(errc::degenerate_offset, "sum of sin^2 of the offset vanishes");

    out.torus.layout = sys.layout;
    for (int i = 0; i < p.n; ++i) {
        out.torus.free_angles.push_back(s.phi(i));
        out.predicted_frequency.push_back(hamiltonian ? p.omega[i] * std::cos(offset[i]) : p.omega[i]);
    }
    out.torus.free_angles.push_back(s.y());
    out.predicted_frequency.push_back(std::sqrt(out.zeta * (out.zeta + 1.0)));
    out.torus.frequency = out.predicted_frequency;

    if (hamiltonian) {
        for (int i = 0; i < p.n; ++i) out.torus.pinned.emplace_back(s.u(i), offset[i]);
        out.torus.pinned.emplace_back(s.x(), 0.0);
        for (int j = 0; j < p.m; ++j) out.torus.pinned.emplace_back(s.p(j), 0.0);
    } else {
        for (int k = 0; k < p.l; ++k) out.torus.pinned.emplace_back(s.v(k), offset[k]);
    }
    for (int j = 0; j < p.m; ++j) out.torus.pinned.emplace_back(s.q(j), 0.0);
    return out;
}

/// The open box inside which the canonical torus is the only Kronecker torus:
/// |u_i| < pi, |x| < pi/2, |y| < pi, |p_j| < pi/2, |q_j| < pi (hamiltonian);
/// |v_k| < pi, |y| < pi, |q_j| < pi (reversible). Phi slots are free.
inline ModularDomain isolation_domain(const System& sys) {
    if (!is_compact_family(sys.params.family)) throw error(errc::not_compact, sys.name + " is not a compact family");
    const auto& p = sys.params;
    const Slots s(p);
    std::vector<std::optional<Interval>> iv(sys.dim(), Interval{-pi, pi});
    for (int i = 0; i < p.n; ++i) iv[s.phi(i)] = std::nullopt;
    if (p.family == Family::ham_compact) {
        iv[s.x()] = Interval{-pi / 2, pi / 2};
        for (int j = 0; j < p.m; ++j) iv[s.p(j)] = Interval{-pi / 2, pi / 2};
    }
    return {sys.layout, std::move(iv)};
}

}  // namespace kronecker
