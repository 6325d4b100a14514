#pragma once

// Time-reversal conjugacy Phi_{-t} o g = g o Phi_t for the diagonal involutions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "kronecker/error.hpp"
#include "kronecker/integrators.hpp"
#include "kronecker/phase.hpp"
#include "kronecker/random.hpp"
#include "kronecker/systems.hpp"

namespace kronecker {

struct ReversibilityReport {
    double max_deviation = 0.0;
    std::size_t points = 0;
    std::vector<double> worst_point;
    bool passed = false;
};

inline IntegratorConfig reversibility_integrator() { return {Method::adaptive_rk, 1e-2, 1e-10, 1e-10}; }

/// torus_distance(Phi_{-t}(g p), g(Phi_t p)); +inf when either run escapes.
inline double reversibility_deviation(const System& sys, const MixedPoint& p, double t,
                                      const IntegratorConfig& cfg = reversibility_integrator()) {
    require_layout(sys, p);
    if (!(t > 0.0)) throw error(errc::invalid_value, "t must be positive");
    const auto& layout = *sys.layout;
    const MixedPoint gp = apply_involution(sys, p);
    try {
        const MixedPoint back(sys.layout, flow(sys.field, layout, gp.coords(), 0.0, -t, cfg));
        const MixedPoint fwd(sys.layout, flow(sys.field, layout, p.coords(), 0.0, t, cfg));
        return torus_distance(back, apply_involution(sys, fwd));
    } catch (const numerical_blowup&) {
        return std::numeric_limits<double>::infinity();
    }
}

inline ReversibilityReport verify_reversibility(const System& sys, const MixedPoint& p, double t, double tol,
                                                const IntegratorConfig& cfg = reversibility_integrator()) {
    ReversibilityReport r;
    r.points = 1;
    r.max_deviation = reversibility_deviation(sys, p, t, cfg);
    r.worst_point.assign(p.coords().begin(), p.coords().end());
    r.passed = r.max_deviation <= tol;
    return r;
}

/// Max deviation over seeded box samples (real slots in [-radius, radius]).
inline ReversibilityReport verify_reversibility(const System& sys, std::size_t points, std::uint64_t seed, double t,
                                                double tol, double radius,
                                                const IntegratorConfig& cfg = reversibility_integrator()) {
    ReversibilityReport r;
    r.points = points;
    for (std::size_t k = 0; k < points; ++k) {
        Rng rng(derive_seed(seed, k));
        const MixedPoint p(sys.layout, sample_box(rng, *sys.layout, radius));
        const double dev = reversibility_deviation(sys, p, t, cfg);
        if (!(dev <= r.max_deviation)) {
            r.max_deviation = dev;
            r.worst_point.assign(p.coords().begin(), p.coords().end());
        }
    }
    r.passed = r.max_deviation <= tol;
    return r;
}

/// Negative control: the same system with c * y (or c * sin y on a circle)
/// added to the y rate. That term is odd under y -> -y, so the involution no
/// longer reverses the flow.
inline System with_broken_reversibility(const System& sys, double c = 0.5) {
    const auto slot = sys.layout->slot_of("y");
    if (!slot) throw error(errc::invalid_params, sys.name + " has no y slot");
    System out = sys;
    out.name = sys.name + " (broken)";
    const bool angle = sys.layout->is_angle(*slot);
    out.field = [f = sys.field, s = *slot, c, angle](std::span<const double> z, std::span<double> dz) {
        f(z, dz);
        dz[s] += c * (angle ? std::sin(z[s]) : z[s]);
    };
    out.jacobian = nullptr;
    out.hamiltonian.reset();
    out.integrals.clear();
    return out;
}

}  // namespace kronecker
