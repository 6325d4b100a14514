#pragma once

// Poincare return maps on angular sections, periodic-orbit search on an
// energy level, and monodromy matrices with their multipliers.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kronecker/error.hpp"
#include "kronecker/integrators.hpp"
#include "kronecker/phase.hpp"
#include "kronecker/systems.hpp"

namespace kronecker {

/// {z[slot] = value (mod 2 pi)}, crossed with the given sign of the slot's rate.
struct Section {
    std::size_t slot = 0;
    double value = 0.0;
    int direction = +1;
};

struct PoincareOptions {
    double horizon = 1e3;
    double crossing_tol = 1e-10;
    double tangency_tol = 1e-8;
    IntegratorConfig integrator{Method::rk4, 5e-3};
};

struct PoincareHit {
    MixedPoint point;
    /// Return time.
    double time = 0.0;
    /// Unwrapped state at the crossing.
    std::vector<double> state;
};

inline void require_section(const System& sys, const Section& s) {
    if (s.slot >= sys.dim() || !sys.layout->is_angle(s.slot))
        throw error(errc::invalid_params, "section slot must be an angular slot");
    if (s.direction != 1 && s.direction != -1) throw error(errc::invalid_params, "section direction must be +1 or -1");
}

/// Next crossing of the section after t = 0, bracketed on the integrator's
/// steps, located on the cubic Hermite interpolant and then polished by
/// Newton steps on re-integrated states to |phi - c| <= crossing_tol.
inline PoincareHit poincare_map(const System& sys, const Section& section, std::span<const double> z0,
                                const PoincareOptions& opt = {}) {
    require_section(sys, section);
    if (z0.size() != sys.dim()) throw error(errc::layout_mismatch, "coordinate count mismatch");
    const std::size_t s = section.slot;
    const double dir = section.direction;
    const double theta0 = z0[s] - section.value;
    // first multiple of 2 pi strictly beyond the start in the crossing direction
    const double target =
        dir > 0 ? two_pi * (std::floor((theta0 + 1e-9) / two_pi) + 1.0) : two_pi * (std::ceil((theta0 - 1e-9) / two_pi) - 1.0);

    std::vector<double> prev(z0.begin(), z0.end());
    double t_prev = 0.0;
    std::optional<std::pair<double, double>> bracket;
    std::vector<double> after;
    auto observe = [&](double t, std::span<const double> z) {
        const double theta = z[s] - section.value;
        if (t > 0.0 && dir * (theta - target) >= 0.0) {
            bracket = {{t_prev, t}};
            after.assign(z.begin(), z.end());
            return false;
        }
        prev.assign(z.begin(), z.end());
        t_prev = t;
        return true;
    };
    std::vector<double> y(z0.begin(), z0.end());
    propagate(sys.field, y, 0.0, opt.horizon, opt.integrator, make_guard(*sys.layout, opt.integrator), observe);
    if (!bracket) throw error(errc::no_return, "no section crossing before t = " + std::to_string(opt.horizon));

    const std::size_t d = sys.dim();
    std::vector<double> fa(d), fb(d);
    sys.field(prev, fa);
    sys.field(after, fb);
    const double h = bracket->second - bracket->first;
    // cubic Hermite model of theta - target on [0, h]
    const double g0 = prev[s] - section.value - target, g1 = after[s] - section.value - target;
    const double m0 = fa[s] * h, m1 = fb[s] * h;
    auto hermite = [&](double u) {
        const double u2 = u * u, u3 = u2 * u;
        return (2 * u3 - 3 * u2 + 1) * g0 + (u3 - 2 * u2 + u) * m0 + (-2 * u3 + 3 * u2) * g1 + (u3 - u2) * m1;
    };
    double lo = 0.0, hi = 1.0;
    if (dir * g0 >= 0.0) hi = 0.0;
    for (int it = 0; it < 80 && hi > lo; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (dir * hermite(mid) < 0.0) lo = mid;
        else hi = mid;
    }
    double dt = hi * h;

    // the refinement re-integrates from the bracket start with one fresh run
    IntegratorConfig refine = opt.integrator;
    std::vector<double> z(prev), rate(d);
    double residual = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 30; ++it) {
        z = dt > 0.0 ? flow(sys.field, *sys.layout, prev, 0.0, dt, refine) : prev;
        sys.field(z, rate);
        residual = z[s] - section.value - target;
        if (std::abs(rate[s]) < opt.tangency_tol)
            throw error(errc::tangent_crossing, "section rate vanishes at the crossing");
        if (std::abs(residual) <= opt.crossing_tol) break;
        dt = std::clamp(dt - residual / rate[s], 0.0, 2.0 * h);
    }
    if (!(std::abs(residual) <= opt.crossing_tol))
        throw error(errc::no_convergence, "section crossing refinement did not converge");
    if (dir * rate[s] <= 0.0) throw error(errc::tangent_crossing, "crossing has the wrong direction");
    z[s] = section.value + target;
    PoincareHit hit{MixedPoint(sys.layout, z), bracket->first + dt, z};
    return hit;
}

inline PoincareHit poincare_map(const System& sys, const Section& section, const MixedPoint& p,
                                const PoincareOptions& opt = {}) {
    require_layout(sys, p);
    return poincare_map(sys, section, p.coords(), opt);
}

/// Derivative of the full-space return map from the flow's fundamental matrix
/// M over the return time: (I - f e_s^T / f_s) M, with f the field at the hit.
inline Eigen::MatrixXd return_map_derivative(const System& sys, const Section& section, std::span<const double> z0,
                                             const PoincareHit& hit, const PoincareOptions& opt = {}) {
    const std::size_t d = sys.dim();
    const auto vr = integrate_variational(sys, MixedPoint(sys.layout, std::vector<double>(z0.begin(), z0.end())),
                                          hit.time, opt.integrator);
    std::vector<double> f(d);
    sys.field(hit.state, f);
    Eigen::MatrixXd proj = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    const auto si = static_cast<Eigen::Index>(section.slot);
    for (Eigen::Index r = 0; r < proj.rows(); ++r) proj(r, si) -= f[static_cast<std::size_t>(r)] / f[section.slot];
    return proj * vr.fundamental;
}

// ---------------------------------------------------------------------------
// Periodic orbits on an energy level

enum class FixedPointStatus { converged, singular_linearization, not_found };

constexpr std::string_view to_string(FixedPointStatus s) noexcept {
    switch (s) {
        case FixedPointStatus::converged: return "Converged";
        case FixedPointStatus::singular_linearization: return "SingularLinearization";
        case FixedPointStatus::not_found: return "NotFound";
    }
    return "?";
}

struct FixedPointOptions {
    int max_iter = 50;
    double residual_tol = 1e-10;
    double condition_limit = 1e12;
    int max_halvings = 10;
    PoincareOptions poincare{};
};

struct FixedPointResult {
    FixedPointStatus status = FixedPointStatus::not_found;
    std::optional<MixedPoint> point;
    double period = 0.0;
    double residual = std::numeric_limits<double>::infinity();
    double condition = std::numeric_limits<double>::infinity();
    int iterations = 0;
    std::string reason;
};

/// Gauss-Newton on F(z) = (P(z) - z restricted off the section slot, H(z) - energy)
/// over the coordinates off the section slot. Angular differences are wrapped.
/// A point with |F| <= residual_tol is reported as converged, or as
/// SingularLinearization when the Newton matrix there has condition number
/// above condition_limit (the implicit-function argument then fails). An
/// ill-conditioned matrix away from a solution ends the search as NotFound.
inline FixedPointResult find_fixed_point(const System& sys, const Section& section, const MixedPoint& guess,
                                         double energy, const FixedPointOptions& opt = {}) {
    if (!sys.has_hamiltonian()) throw error(errc::not_hamiltonian, sys.name + " has no energy levels");
    require_layout(sys, guess);
    require_section(sys, section);
    const std::size_t d = sys.dim();
    const std::size_t s = section.slot;
    const auto& layout = *sys.layout;
    std::vector<std::size_t> free;
    for (std::size_t i = 0; i < d; ++i)
        if (i != s) free.push_back(i);
    const auto nf = static_cast<Eigen::Index>(free.size());

    struct Eval {
        Eigen::VectorXd F;
        PoincareHit hit;
    };
    auto evaluate = [&](const std::vector<double>& z) -> std::optional<Eval> {
        try {
            auto hit = poincare_map(sys, section, z, opt.poincare);
            Eigen::VectorXd F(nf + 1);
            for (Eigen::Index k = 0; k < nf; ++k) {
                const auto i = free[static_cast<std::size_t>(k)];
                double diff = hit.state[i] - z[i];
                if (layout.is_angle(i)) diff = wrap_angle(diff);
                F(k) = diff;
            }
            F(nf) = (*sys.hamiltonian)(z) - energy;
            return Eval{std::move(F), std::move(hit)};
        } catch (const error&) {
            return std::nullopt;
        }
    };
    auto newton_matrix = [&](const std::vector<double>& z, const PoincareHit& hit) {
        const Eigen::MatrixXd dp = return_map_derivative(sys, section, z, hit, opt.poincare);
        ScalarFn hf = *sys.hamiltonian;
        std::vector<double> grad(d), zp(z);
        for (std::size_t j = 0; j < d; ++j) {
            const double step = 6e-6 * std::max(1.0, std::abs(z[j]));
            zp[j] = z[j] + step;
            const double fp = hf(zp);
            zp[j] = z[j] - step;
            const double fm = hf(zp);
            zp[j] = z[j];
            grad[j] = (fp - fm) / (2 * step);
        }
        Eigen::MatrixXd j(nf + 1, nf);
        for (Eigen::Index r = 0; r < nf; ++r)
            for (Eigen::Index c = 0; c < nf; ++c)
                j(r, c) = dp(static_cast<Eigen::Index>(free[static_cast<std::size_t>(r)]),
                             static_cast<Eigen::Index>(free[static_cast<std::size_t>(c)])) -
                          (r == c ? 1.0 : 0.0);
        for (Eigen::Index c = 0; c < nf; ++c) j(nf, c) = grad[free[static_cast<std::size_t>(c)]];
        return j;
    };

    FixedPointResult result;
    std::vector<double> z(guess.coords().begin(), guess.coords().end());
    z[s] = section.value;
    auto current = evaluate(z);
    if (!current) {
        result.reason = "return map undefined at the guess";
        return result;
    }
    for (int iter = 0; iter <= opt.max_iter; ++iter) {
        result.iterations = iter;
        result.residual = current->F.norm();
        const Eigen::MatrixXd j = newton_matrix(z, current->hit);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(j, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& sv = svd.singularValues();
        const double smin = sv(sv.size() - 1);
        result.condition = smin > 0.0 ? sv(0) / smin : std::numeric_limits<double>::infinity();
        const bool singular = !(result.condition <= opt.condition_limit);
        if (result.residual <= opt.residual_tol) {
            result.point = MixedPoint(sys.layout, z);
            result.period = current->hit.time;
            result.status = singular ? FixedPointStatus::singular_linearization : FixedPointStatus::converged;
            return result;
        }
        if (singular) {
            result.reason = "Newton matrix is singular away from any solution";
            return result;
        }
        if (iter == opt.max_iter) break;
        const Eigen::VectorXd delta = -svd.solve(current->F);
        double lambda = 1.0;
        bool accepted = false;
        for (int k = 0; k <= opt.max_halvings; ++k, lambda *= 0.5) {
            std::vector<double> trial = z;
            for (Eigen::Index c = 0; c < nf; ++c) trial[free[static_cast<std::size_t>(c)]] += lambda * delta(c);
            auto next = evaluate(trial);
            if (next && next->F.norm() < result.residual) {
                z = std::move(trial);
                current = std::move(next);
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            result.reason = "line search exhausted";
            return result;
        }
    }
    result.reason = "iteration limit reached";
    return result;
}

// ---------------------------------------------------------------------------
// Monodromy

struct MonodromyResult {
    Eigen::MatrixXd matrix;
    std::vector<std::complex<double>> multipliers;
    /// |M v - lambda v| for each unit eigenvector v.
    std::vector<double> residuals;
    double period = 0.0;

    double max_residual() const {
        double r = 0.0;
        for (double v : residuals) r = std::max(r, v);
        return r;
    }

    /// max |lambda - 1| over the multipliers.
    double max_distance_from_one() const {
        double r = 0.0;
        for (const auto& l : multipliers) r = std::max(r, std::abs(l - 1.0));
        return r;
    }
};

/// Largest distance from a multiplier's reciprocal to the nearest multiplier
/// (0 when the set is closed under lambda -> 1/lambda).
inline double reciprocity_error(const std::vector<std::complex<double>>& multipliers) {
    double worst = 0.0;
    for (const auto& l : multipliers) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& k : multipliers) best = std::min(best, std::abs(1.0 / l - k));
        worst = std::max(worst, best);
    }
    return worst;
}

inline MonodromyResult multipliers_of(const Eigen::MatrixXd& m) {
    MonodromyResult out;
    out.matrix = m;
    Eigen::EigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success) throw error(errc::no_convergence, "eigenvalue iteration failed");
    const Eigen::MatrixXcd mc = m.cast<std::complex<double>>();
    for (Eigen::Index k = 0; k < m.rows(); ++k) {
        const auto lambda = es.eigenvalues()(k);
        Eigen::VectorXcd v = es.eigenvectors().col(k);
        v.normalize();
        out.multipliers.push_back(lambda);
        out.residuals.push_back((mc * v - lambda * v).norm());
    }
    return out;
}

/// Full-space fundamental matrix over one period starting at p, and its
/// eigenvalues.
inline MonodromyResult monodromy(const System& sys, const MixedPoint& p, double period,
                                 const IntegratorConfig& cfg = {Method::rk4, 1e-3}) {
    auto vr = integrate_variational(sys, p, period, cfg);
    auto out = multipliers_of(vr.fundamental);
    out.period = period;
    return out;
}

/// The canonical periodic orbit of a catalog family with n = 1: start on the
/// canonical torus at phi = 0, period 2 pi / omega_1.
inline MonodromyResult monodromy(const System& sys, const IntegratorConfig& cfg = {Method::rk4, 1e-3}) {
    if (sys.params.n != 1) throw error(errc::invalid_params, "canonical orbit needs n = 1");
    const double w = sys.params.omega.at(0);
    if (w == 0.0) throw error(errc::invalid_params, "omega_1 must be nonzero");
    const auto torus = canonical_torus(sys);
    const std::vector<double> zero{0.0};
    return monodromy(sys, torus_point(torus, zero), two_pi / std::abs(w), cfg);
}

}  // namespace kronecker
