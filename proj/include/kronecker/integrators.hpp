#pragma once

// Time stepping on mixed spaces. States are carried unwrapped while
// stepping (stages need a continuous chart) and wrapped only when stored.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kronecker/error.hpp"
#include "kronecker/phase.hpp"
#include "kronecker/systems.hpp"

namespace kronecker {

enum class Method { rk4, adaptive_rk, implicit_midpoint };

constexpr std::string_view to_string(Method m) noexcept {
    switch (m) {
        case Method::rk4: return "rk4";
        case Method::adaptive_rk: return "adaptive";
        case Method::implicit_midpoint: return "midpoint";
    }
    return "?";
}

inline std::optional<Method> method_from_string(std::string_view s) {
    for (auto m : {Method::rk4, Method::adaptive_rk, Method::implicit_midpoint})
        if (s == to_string(m)) return m;
    return std::nullopt;
}

struct IntegratorConfig {
    Method method = Method::rk4;
    double step = 1e-2;  // fixed-step methods; initial guess for the adaptive one
    double rel_tol = 1e-10;
    double abs_tol = 1e-10;
    double fixed_point_tol = 1e-12;
    int fixed_point_max_iter = 50;
    std::size_t max_steps = 50'000'000;
    double escape_bound = 1e8;
    /// Store every k-th accepted step (the final point is always stored).
    std::size_t record_stride = 1;

    void validate() const {
        if (!(step > 0.0) || !std::isfinite(step)) throw error(errc::invalid_params, "step must be positive");
        if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw error(errc::invalid_params, "tolerances must be positive");
        if (!(fixed_point_tol > 0.0) || fixed_point_max_iter < 1)
            throw error(errc::invalid_params, "bad fixed-point settings");
        if (max_steps == 0 || record_stride == 0) throw error(errc::invalid_params, "max_steps and record_stride must be >= 1");
        if (!(escape_bound > 0.0)) throw error(errc::invalid_params, "escape bound must be positive");
    }
};

struct StepStats {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t field_evals = 0;
};

/// Times run monotonically in the direction of integration (decreasing for
/// backward runs); points are wrapped.
struct Trajectory {
    LayoutPtr layout;
    std::vector<double> times;
    std::vector<MixedPoint> points;
    IntegratorConfig config;
    StepStats stats;

    std::size_t size() const noexcept { return times.size(); }
    const MixedPoint& back() const { return points.back(); }
};

/// Escape box: every entry finite, |real slot| <= bound.
struct EscapeGuard {
    std::vector<std::size_t> real_slots;
    double bound = 1e8;

    void check(std::span<const double> y, double t) const {
        for (double v : y)
            if (!std::isfinite(v)) throw numerical_blowup(t, "non-finite state");
        for (auto s : real_slots)
            if (std::abs(y[s]) > bound) throw numerical_blowup(t, "trajectory left the escape box");
    }
};

inline EscapeGuard make_guard(const CoordinateLayout& layout, const IntegratorConfig& cfg) {
    return {layout.real_slots(), cfg.escape_bound};
}

namespace detail {

inline void axpy(std::span<const double> y, double a, std::span<const double> k, std::span<double> out) {
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] + a * k[i];
}

/// Work buffers shared by the one-step methods.
struct Workspace {
    std::vector<double> k1, k2, k3, k4, k5, k6, k7, tmp, ynew, err;
    bool have_fsal = false;

    explicit Workspace(std::size_t d)
        : k1(d), k2(d), k3(d), k4(d), k5(d), k6(d), k7(d), tmp(d), ynew(d), err(d) {}
};

template <class F>
void rk4_step(const F& f, std::span<const double> y, double h, std::span<double> out, Workspace& w,
              StepStats& stats) {
    f(y, w.k1);
    axpy(y, h / 2, w.k1, w.tmp);
    f(w.tmp, w.k2);
    axpy(y, h / 2, w.k2, w.tmp);
    f(w.tmp, w.k3);
    axpy(y, h, w.k3, w.tmp);
    f(w.tmp, w.k4);
    stats.field_evals += 4;
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] + h / 6 * (w.k1[i] + 2 * w.k2[i] + 2 * w.k3[i] + w.k4[i]);
}

/// y1 = y0 + h f((y0 + y1)/2), solved for the midpoint stage by fixed-point iteration.
template <class F>
void midpoint_step(const F& f, std::span<const double> y, double h, std::span<double> out, Workspace& w,
                   const IntegratorConfig& cfg, double t, StepStats& stats) {
    f(y, w.k1);
    ++stats.field_evals;
    for (int iter = 0; iter < cfg.fixed_point_max_iter; ++iter) {
        axpy(y, h / 2, w.k1, w.tmp);
        f(w.tmp, w.k2);
        ++stats.field_evals;
        double change = 0.0, scale = 1.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            change = std::max(change, std::abs(h * (w.k2[i] - w.k1[i])));
            scale = std::max(scale, std::abs(y[i]));
        }
        std::swap(w.k1, w.k2);
        if (!std::isfinite(change)) throw numerical_blowup(t, "non-finite midpoint stage");
        if (change <= cfg.fixed_point_tol * scale) {
            axpy(y, h, w.k1, out);
            return;
        }
    }
    throw error(errc::no_convergence, "implicit midpoint fixed-point iteration did not converge at t = " +
                                          std::to_string(t));
}

// Dormand-Prince 5(4) tableau.
struct Dopri {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    // b - b_hat
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
};

/// One trial step; returns the scaled error norm (<= 1 means acceptable).
/// On entry w.k1 holds f(y) when w.have_fsal is set.
template <class F>
double dopri_trial(const F& f, std::span<const double> y, double h, Workspace& w, const IntegratorConfig& cfg,
                   StepStats& stats) {
    using D = Dopri;
    const std::size_t d = y.size();
    if (!w.have_fsal) {
        f(y, w.k1);
        ++stats.field_evals;
        w.have_fsal = true;
    }
    for (std::size_t i = 0; i < d; ++i) w.tmp[i] = y[i] + h * D::a21 * w.k1[i];
    f(w.tmp, w.k2);
    for (std::size_t i = 0; i < d; ++i) w.tmp[i] = y[i] + h * (D::a31 * w.k1[i] + D::a32 * w.k2[i]);
    f(w.tmp, w.k3);
    for (std::size_t i = 0; i < d; ++i) w.tmp[i] = y[i] + h * (D::a41 * w.k1[i] + D::a42 * w.k2[i] + D::a43 * w.k3[i]);
    f(w.tmp, w.k4);
    for (std::size_t i = 0; i < d; ++i)
        w.tmp[i] = y[i] + h * (D::a51 * w.k1[i] + D::a52 * w.k2[i] + D::a53 * w.k3[i] + D::a54 * w.k4[i]);
    f(w.tmp, w.k5);
    for (std::size_t i = 0; i < d; ++i)
        w.tmp[i] = y[i] + h * (D::a61 * w.k1[i] + D::a62 * w.k2[i] + D::a63 * w.k3[i] + D::a64 * w.k4[i] +
                               D::a65 * w.k5[i]);
    f(w.tmp, w.k6);
    for (std::size_t i = 0; i < d; ++i)
        w.ynew[i] = y[i] + h * (D::b1 * w.k1[i] + D::b3 * w.k3[i] + D::b4 * w.k4[i] + D::b5 * w.k5[i] +
                                D::b6 * w.k6[i]);
    f(w.ynew, w.k7);
    stats.field_evals += 6;
    double norm = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double e = h * (D::e1 * w.k1[i] + D::e3 * w.k3[i] + D::e4 * w.k4[i] + D::e5 * w.k5[i] +
                              D::e6 * w.k6[i] + D::e7 * w.k7[i]);
        const double sc = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y[i]), std::abs(w.ynew[i]));
        norm = std::max(norm, std::abs(e) / sc);
    }
    if (!std::isfinite(norm)) return std::numeric_limits<double>::infinity();
    return norm;
}

}  // namespace detail

/// Advances the unwrapped state `y` from t0 to t1 (either direction) in place.
/// `observe(t, y)` runs at t0 and after every accepted step; returning false
/// stops the run early. Returns the time reached.
template <class F, class Observer>
double propagate(const F& f, std::vector<double>& y, double t0, double t1, const IntegratorConfig& cfg,
                 const EscapeGuard& guard, Observer&& observe, StepStats* stats_out = nullptr) {
    cfg.validate();
    StepStats stats;
    const std::size_t d = y.size();
    detail::Workspace w(d);
    guard.check(y, t0);
    double t = t0;
    auto finish = [&] {
        if (stats_out) *stats_out = stats;
        return t;
    };
    if (!observe(t, std::span<const double>(y))) return finish();
    const double span_t = t1 - t0;
    if (span_t == 0.0) return finish();
    const double dir = span_t > 0 ? 1.0 : -1.0;

    if (cfg.method != Method::adaptive_rk) {
        const double steps_real = std::ceil(std::abs(span_t) / cfg.step - 1e-9);
        if (steps_real > static_cast<double>(cfg.max_steps))
            throw error(errc::step_budget_exceeded, "fixed-step run needs more than max_steps steps");
        const std::size_t steps = std::max<std::size_t>(1, static_cast<std::size_t>(steps_real));
        const double h = span_t / static_cast<double>(steps);
        for (std::size_t k = 1; k <= steps; ++k) {
            if (cfg.method == Method::rk4) detail::rk4_step(f, y, h, w.ynew, w, stats);
            else detail::midpoint_step(f, y, h, w.ynew, w, cfg, t, stats);
            const double t_new = k == steps ? t1 : t0 + static_cast<double>(k) * h;
            guard.check(w.ynew, t_new);
            std::swap(y, w.ynew);
            t = t_new;
            ++stats.accepted;
            if (!observe(t, std::span<const double>(y))) return finish();
        }
        return finish();
    }

    double h = dir * std::min(cfg.step, std::abs(span_t));
    double last_factor = 1.0;
    while (dir * (t1 - t) > 0.0) {
        if (stats.accepted + stats.rejected >= cfg.max_steps)
            throw error(errc::step_budget_exceeded, "adaptive run exceeded max_steps");
        bool last = false;
        if (dir * (t + h - t1) >= 0.0) {
            h = t1 - t;
            last = true;
        }
        const double err = detail::dopri_trial(f, y, h, w, cfg, stats);
        if (err <= 1.0) {
            const double t_new = last ? t1 : t + h;
            guard.check(w.ynew, t_new);
            std::swap(y, w.ynew);
            std::swap(w.k1, w.k7);  // FSAL
            t = t_new;
            ++stats.accepted;
            if (!observe(t, std::span<const double>(y))) return finish();
            double factor = err == 0.0 ? 5.0 : 0.9 * std::pow(err, -0.2);
            factor = std::clamp(factor, 0.2, 5.0);
            if (last_factor < 1.0) factor = std::min(factor, 1.0);
            last_factor = factor;
            if (!last) h *= factor;
        } else {
            ++stats.rejected;
            const double factor = std::isfinite(err) ? std::clamp(0.9 * std::pow(err, -0.2), 0.2, 1.0) : 0.2;
            last_factor = factor;
            h *= factor;
            if (std::abs(h) < 1e-14 * std::max(1.0, std::abs(t)))
                throw numerical_blowup(t, "adaptive step size underflow");
        }
    }
    return finish();
}

/// Propagate without observing; returns the unwrapped end state.
template <class F>
std::vector<double> flow(const F& f, const CoordinateLayout& layout, std::span<const double> y0, double t0,
                         double t1, const IntegratorConfig& cfg) {
    std::vector<double> y(y0.begin(), y0.end());
    propagate(f, y, t0, t1, cfg, make_guard(layout, cfg), [](double, std::span<const double>) { return true; });
    return y;
}

/// One classical RK4 step with wrapped result.
template <class F>
MixedPoint step_rk4(const F& f, const MixedPoint& p, double h) {
    if (!(h > 0.0)) throw error(errc::invalid_value, "step must be positive");
    detail::Workspace w(p.dim());
    StepStats stats;
    std::vector<double> out(p.dim());
    detail::rk4_step(f, p.coords(), h, out, w, stats);
    for (double v : out)
        if (!std::isfinite(v)) throw numerical_blowup(h, "non-finite value in RK4 step");
    return {p.layout(), std::move(out)};
}

inline MixedPoint step_rk4(const System& sys, const MixedPoint& p, double h) {
    require_layout(sys, p);
    return step_rk4(sys.field, p, h);
}

template <class F>
Trajectory integrate(const F& f, const MixedPoint& p0, double t_end, const IntegratorConfig& cfg) {
    if (t_end == 0.0 || !std::isfinite(t_end)) throw error(errc::invalid_value, "t_end must be finite and nonzero");
    Trajectory traj;
    traj.layout = p0.layout();
    traj.config = cfg;
    std::vector<double> y(p0.coords().begin(), p0.coords().end());
    std::size_t count = 0;
    std::vector<double> last_y;
    double last_t = 0.0;
    bool last_stored = false;
    auto observe = [&](double t, std::span<const double> z) {
        last_stored = count % cfg.record_stride == 0;
        if (last_stored) {
            traj.times.push_back(t);
            traj.points.emplace_back(traj.layout, std::vector<double>(z.begin(), z.end()));
        }
        last_t = t;
        ++count;
        return true;
    };
    propagate(f, y, 0.0, t_end, cfg, make_guard(*traj.layout, cfg), observe, &traj.stats);
    if (!last_stored) {
        traj.times.push_back(last_t);
        traj.points.emplace_back(traj.layout, y);
    }
    return traj;
}

inline Trajectory integrate(const System& sys, const MixedPoint& p0, double t_end, const IntegratorConfig& cfg) {
    require_layout(sys, p0);
    return integrate(sys.field, p0, t_end, cfg);
}

// ---------------------------------------------------------------------------
// Linearization

enum class JacobianScheme { finite_difference, exact, best };

/// Central differences with step 1e-6 * max(1, |z_j|).
inline Eigen::MatrixXd finite_difference_jacobian(const FieldFn& f, std::span<const double> z) {
    const std::size_t d = z.size();
    Eigen::MatrixXd j(d, d);
    std::vector<double> zp(z.begin(), z.end()), fp(d), fm(d);
    for (std::size_t c = 0; c < d; ++c) {
        const double h = 1e-6 * std::max(1.0, std::abs(z[c]));
        zp[c] = z[c] + h;
        f(zp, fp);
        zp[c] = z[c] - h;
        f(zp, fm);
        zp[c] = z[c];
        for (std::size_t r = 0; r < d; ++r)
            j(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = (fp[r] - fm[r]) / (2 * h);
    }
    return j;
}

inline Eigen::MatrixXd field_jacobian(const System& sys, std::span<const double> z,
                                      JacobianScheme scheme = JacobianScheme::best) {
    if (z.size() != sys.dim()) throw error(errc::layout_mismatch, "coordinate count mismatch");
    const bool exact = scheme == JacobianScheme::exact || (scheme == JacobianScheme::best && sys.jacobian);
    if (!exact) return finite_difference_jacobian(sys.field, z);
    if (!sys.jacobian) throw error(errc::invalid_params, sys.name + " has no exact Jacobian");
    const std::size_t d = sys.dim();
    std::vector<double> buf(d * d);
    sys.jacobian(z, buf);
    Eigen::MatrixXd j(d, d);
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = 0; c < d; ++c) j(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = buf[r * d + c];
    return j;
}

inline Eigen::MatrixXd field_jacobian(const System& sys, const MixedPoint& p,
                                      JacobianScheme scheme = JacobianScheme::best) {
    require_layout(sys, p);
    return field_jacobian(sys, p.coords(), scheme);
}

struct VariationalResult {
    MixedPoint end;
    /// Unwrapped end state (angles continued through the run).
    std::vector<double> end_unwrapped;
    Eigen::MatrixXd fundamental;
};

/// Co-integrates dM/dt = J(t) M, M(0) = I, alongside the flow from p0.
inline VariationalResult integrate_variational(const System& sys, const MixedPoint& p0, double T,
                                               const IntegratorConfig& cfg,
                                               JacobianScheme scheme = JacobianScheme::best) {
    require_layout(sys, p0);
    if (!(T > 0.0) || !std::isfinite(T)) throw error(errc::invalid_value, "variational horizon must be positive");
    const std::size_t d = sys.dim();
    const auto di = static_cast<Eigen::Index>(d);
    auto augmented = [&](std::span<const double> s, std::span<double> ds) {
        sys.field(s.first(d), ds.first(d));
        const Eigen::MatrixXd j = field_jacobian(sys, s.first(d), scheme);
        Eigen::Map<const Eigen::MatrixXd> m(s.data() + d, di, di);
        Eigen::Map<Eigen::MatrixXd> dm(ds.data() + d, di, di);
        dm.noalias() = j * m;
    };
    std::vector<double> state(d + d * d, 0.0);
    std::copy(p0.coords().begin(), p0.coords().end(), state.begin());
    for (std::size_t i = 0; i < d; ++i) state[d + i * d + i] = 1.0;
    propagate(augmented, state, 0.0, T, cfg, make_guard(*sys.layout, cfg),
              [](double, std::span<const double>) { return true; });
    std::vector<double> end(state.begin(), state.begin() + static_cast<std::ptrdiff_t>(d));
    VariationalResult out{MixedPoint(sys.layout, end), end, Eigen::Map<const Eigen::MatrixXd>(state.data() + d, di, di)};
    return out;
}

}  // namespace kronecker
