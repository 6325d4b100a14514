#pragma once

// Mean rotation rates of angles along trajectories, and the circulation
// period of y' = zeta + sin^2 y on the nearby tori.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <span>
#include <vector>

#include "kronecker/error.hpp"
#include "kronecker/integrators.hpp"
#include "kronecker/phase.hpp"

namespace kronecker {

struct FrequencyFit {
    std::vector<double> frequencies;
    /// Root-mean-square residual of each linear fit (radians).
    std::vector<double> rms_residuals;
    /// Full turns completed over the whole trajectory.
    std::vector<double> revolutions;
};

/// Unwraps consecutive samples of an angular slot (steps must stay below pi).
inline std::vector<double> unwrap_angle(const Trajectory& traj, std::size_t slot) {
    std::vector<double> out;
    out.reserve(traj.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const double v = traj.points[k][slot];
        acc = k == 0 ? v : acc + wrap_angle(v - traj.points[k - 1][slot]);
        out.push_back(acc);
    }
    return out;
}

/// Least-squares slope of each unwrapped angle against time over the last 80%
/// of the trajectory. Every angle must complete at least `min_revolutions`
/// turns, or stay within 1e-6 of its start (certified non-circulating).
inline FrequencyFit measure_frequencies(const Trajectory& traj, std::span<const std::size_t> slots,
                                        double min_revolutions = 10.0) {
    if (traj.size() < 3) throw error(errc::insufficient_data, "trajectory too short");
    const double t0 = traj.times.front(), t1 = traj.times.back();
    const double cut = t0 + 0.2 * (t1 - t0);
    FrequencyFit fit;
    for (auto slot : slots) {
        if (slot >= traj.layout->dim() || !traj.layout->is_angle(slot))
            throw error(errc::invalid_params, "frequency slot must be angular");
        const auto theta = unwrap_angle(traj, slot);
        double lo = theta.front(), hi = theta.front();
        for (double v : theta) lo = std::min(lo, v), hi = std::max(hi, v);
        const double turns = std::abs(theta.back() - theta.front()) / two_pi;
        if (turns < min_revolutions && hi - lo > 1e-6)
            throw error(errc::insufficient_data, "angle '" + traj.layout->label(slot) + "' completed only " +
                                                     std::to_string(turns) + " turns");
        double st = 0, sv = 0, count = 0;
        for (std::size_t k = 0; k < theta.size(); ++k) {
            if ((t1 - t0) * (traj.times[k] - cut) < 0.0) continue;
            st += traj.times[k], sv += theta[k], count += 1;
        }
        if (count < 2) throw error(errc::insufficient_data, "too few samples in the fit window");
        const double tm = st / count, vm = sv / count;
        double stt = 0, stv = 0;
        for (std::size_t k = 0; k < theta.size(); ++k) {
            if ((t1 - t0) * (traj.times[k] - cut) < 0.0) continue;
            stt += (traj.times[k] - tm) * (traj.times[k] - tm);
            stv += (traj.times[k] - tm) * (theta[k] - vm);
        }
        const double slope = stv / stt;
        double ss = 0;
        for (std::size_t k = 0; k < theta.size(); ++k) {
            if ((t1 - t0) * (traj.times[k] - cut) < 0.0) continue;
            const double r = theta[k] - (vm + slope * (traj.times[k] - tm));
            ss += r * r;
        }
        fit.frequencies.push_back(slope);
        fit.rms_residuals.push_back(std::sqrt(ss / count));
        fit.revolutions.push_back(turns);
    }
    return fit;
}

/// Integral of dy / (zeta + sin^2 y) over one turn, by adaptive Gauss-Kronrod.
inline double circulation_period(double zeta) {
    if (!(zeta > 0.0) || !std::isfinite(zeta)) throw error(errc::degenerate_offset, "zeta must be positive and finite");
    auto integrand = [zeta](double y) {
        const double s = std::sin(y);
        return 1.0 / (zeta + s * s);
    };
    double err = 0.0;
    // the integrand has period pi; integrate one half-turn and double
    const double half = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, 0.0, pi, 15, 1e-13,
                                                                                    &err);
    return 2.0 * half;
}

/// The mean rate sqrt(zeta (zeta + 1)) expressed as a period.
inline double circulation_period_closed_form(double zeta) {
    if (!(zeta > 0.0) || !std::isfinite(zeta)) throw error(errc::degenerate_offset, "zeta must be positive and finite");
    return two_pi / std::sqrt(zeta * (zeta + 1.0));
}

}  // namespace kronecker
