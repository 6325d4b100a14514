#pragma once

// Invariance checks for Kronecker tori and recurrence of single orbits.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "kronecker/error.hpp"
#include "kronecker/integrators.hpp"
#include "kronecker/phase.hpp"
#include "kronecker/systems.hpp"

namespace kronecker {

/// Flat product distance between two unwrapped states of one layout.
inline double chart_distance(const CoordinateLayout& layout, std::span<const double> a, std::span<const double> b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        if (layout.is_angle(i)) d = wrap_angle(d);
        sum += d * d;
    }
    return std::sqrt(sum);
}

struct KroneckerReport {
    double max_pinned_deviation = 0.0;
    double max_angle_deviation = 0.0;
    double horizon = 0.0;
    std::size_t starts = 0;
    /// A start left the escape box; deviations are then +inf.
    bool escaped = false;
    bool passed = false;
};

/// Integrates from `starts` points of the torus (staggered initial angles)
/// and compares against the pinned values and the linear angle law.
inline KroneckerReport verify_kronecker(const System& sys, const TorusSpec& torus, double horizon, double tol,
                                        std::size_t starts = 4, IntegratorConfig cfg = {}) {
    if (!same_layout(sys.layout, torus.layout)) throw error(errc::layout_mismatch, "torus does not belong to system");
    if (!(horizon > 0.0) || !(tol > 0.0) || starts == 0)
        throw error(errc::invalid_value, "horizon, tol and starts must be positive");
    if (torus.frequency.size() != torus.free_angles.size())
        throw error(errc::invalid_params, "one frequency per free angle expected");
    KroneckerReport report;
    report.horizon = horizon;
    report.starts = starts;
    const auto& layout = *sys.layout;
    for (std::size_t k = 0; k < starts; ++k) {
        std::vector<double> angles(torus.free_angles.size());
        for (std::size_t a = 0; a < angles.size(); ++a)
            angles[a] = wrap_angle(2.0 * pi * static_cast<double>(k) / static_cast<double>(starts) +
                                   0.7 * static_cast<double>(a) + 0.1);
        const MixedPoint p0 = torus_point(torus, angles);
        auto observe = [&](double t, std::span<const double> z) {
            for (const auto& [slot, value] : torus.pinned) {
                double d = z[slot] - value;
                if (layout.is_angle(slot)) d = wrap_angle(d);
                report.max_pinned_deviation = std::max(report.max_pinned_deviation, std::abs(d));
            }
            for (std::size_t a = 0; a < angles.size(); ++a) {
                const double expected = angles[a] + torus.frequency[a] * t;
                const double d = wrap_angle(z[torus.free_angles[a]] - expected);
                report.max_angle_deviation = std::max(report.max_angle_deviation, std::abs(d));
            }
            return true;
        };
        std::vector<double> y(p0.coords().begin(), p0.coords().end());
        try {
            propagate(sys.field, y, 0.0, horizon, cfg, make_guard(layout, cfg), observe);
        } catch (const numerical_blowup&) {
            report.escaped = true;
            report.max_pinned_deviation = std::numeric_limits<double>::infinity();
            report.max_angle_deviation = std::numeric_limits<double>::infinity();
            break;
        }
    }
    report.passed = !report.escaped && report.max_pinned_deviation <= tol && report.max_angle_deviation <= tol;
    return report;
}

namespace detail {

inline double distance_after(const System& sys, std::span<const double> from, double dt, std::span<const double> p0,
                             const IntegratorConfig& cfg) {
    if (dt <= 0.0) return chart_distance(*sys.layout, from, p0);
    const auto z = flow(sys.field, *sys.layout, from, 0.0, dt, cfg);
    return chart_distance(*sys.layout, z, p0);
}

}  // namespace detail

/// min over t in [t_min, horizon] of the distance from Phi_t(p0) to p0.
/// Sampled at every step, the best local minima then refined by golden-section
/// search. An escaping orbit has gap +inf.
inline double recurrence_gap(const System& sys, const MixedPoint& p0, double t_min, double horizon,
                             IntegratorConfig cfg = {}) {
    require_layout(sys, p0);
    if (!(t_min > 0.0) || !(horizon > t_min)) throw error(errc::invalid_value, "need horizon > t_min > 0");
    struct Sample {
        double t;
        double dist;
        std::vector<double> state;
    };
    // a local minimum bracketed by [t_left, t_right], state taken at t_left
    struct Bracket {
        double t_left;
        double t_right;
        double dist;
        std::vector<double> state;
    };
    const auto& layout = *sys.layout;
    const auto start = p0.coords();
    // keep a sliding window of three samples to detect local minima
    std::vector<Sample> window;
    std::vector<Bracket> minima;
    double best = std::numeric_limits<double>::infinity();
    auto observe = [&](double t, std::span<const double> z) {
        Sample s{t, chart_distance(layout, z, start), {z.begin(), z.end()}};
        if (t >= t_min) best = std::min(best, s.dist);
        window.push_back(std::move(s));
        if (window.size() > 3) window.erase(window.begin());
        if (window.size() == 3 && window[1].dist <= window[0].dist && window[1].dist <= window[2].dist &&
            window[2].t >= t_min) {
            minima.push_back({window[0].t, window[2].t, window[1].dist, window[0].state});
            std::sort(minima.begin(), minima.end(), [](const Bracket& a, const Bracket& b) { return a.dist < b.dist; });
            if (minima.size() > 8) minima.pop_back();
        }
        return true;
    };
    std::vector<double> y(start.begin(), start.end());
    try {
        propagate(sys.field, y, 0.0, horizon, cfg, make_guard(layout, cfg), observe);
    } catch (const numerical_blowup&) {
        return std::numeric_limits<double>::infinity();
    }
    constexpr double inv_phi = 0.6180339887498949;
    for (const auto& m : minima) {
        double a = std::max(m.t_left, t_min) - m.t_left, b = std::min(m.t_right, horizon) - m.t_left;
        if (b <= a) continue;
        double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
        double fc = detail::distance_after(sys, m.state, c, start, cfg);
        double fd = detail::distance_after(sys, m.state, d, start, cfg);
        for (int it = 0; it < 60 && b - a > 1e-12; ++it) {
            if (fc < fd) {
                b = d, d = c, fd = fc;
                c = b - inv_phi * (b - a);
                fc = detail::distance_after(sys, m.state, c, start, cfg);
            } else {
                a = c, c = d, fc = fd;
                d = a + inv_phi * (b - a);
                fd = detail::distance_after(sys, m.state, d, start, cfg);
            }
        }
        best = std::min({best, fc, fd});
    }
    return best;
}

}  // namespace kronecker
