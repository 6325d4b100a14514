#pragma once

// First integrals along trajectories: drift, Poisson brackets, functional rank.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kronecker/dsl/calculus.hpp"
#include "kronecker/dsl/expr.hpp"
#include "kronecker/error.hpp"
#include "kronecker/integrators.hpp"
#include "kronecker/systems.hpp"

namespace kronecker {

/// Max |I(t) - I(0)| over the trajectory for each integral, in the order of
/// eval_integrals.
inline std::vector<double> invariant_drift(const System& sys, const Trajectory& traj) {
    if (!sys.has_hamiltonian()) throw error(errc::not_hamiltonian, sys.name + " has no first integrals");
    if (traj.points.empty()) throw error(errc::invalid_value, "empty trajectory");
    const auto first = eval_integrals(sys, traj.points.front());
    std::vector<double> drift(first.size(), 0.0);
    for (const auto& p : traj.points) {
        const auto v = eval_integrals(sys, p);
        for (std::size_t k = 0; k < v.size(); ++k) drift[k] = std::max(drift[k], std::abs(v[k] - first[k]));
    }
    return drift;
}

using GradientFn = std::function<std::vector<double>(std::span<const double>)>;

/// Central-difference gradient; step 6e-6 * max(1, |z_j|) balances truncation
/// against rounding for O(1) polynomial and trigonometric integrals.
inline std::vector<double> fd_gradient(const ScalarFn& f, std::span<const double> z) {
    std::vector<double> g(z.size()), zp(z.begin(), z.end());
    for (std::size_t j = 0; j < z.size(); ++j) {
        const double h = 6e-6 * std::max(1.0, std::abs(z[j]));
        zp[j] = z[j] + h;
        const double fp = f(zp);
        zp[j] = z[j] - h;
        const double fm = f(zp);
        zp[j] = z[j];
        g[j] = (fp - fm) / (2 * h);
    }
    return g;
}

inline GradientFn fd_gradient_of(ScalarFn f) {
    return [f = std::move(f)](std::span<const double> z) { return fd_gradient(f, z); };
}

/// Exact gradient of a DSL expression over the given slot names.
inline GradientFn exact_gradient_of(const dsl::Expr& e, std::vector<std::string> slot_names) {
    std::vector<dsl::CompiledExpr> partials;
    for (const auto& name : slot_names) partials.emplace_back(dsl::differentiate(e, name), slot_names);
    return [partials = std::move(partials)](std::span<const double> z) {
        std::vector<double> g(partials.size());
        for (std::size_t j = 0; j < g.size(); ++j) g[j] = partials[j](z);
        return g;
    };
}

/// {f, g} = sum over (pos, mom) of df/dpos dg/dmom - df/dmom dg/dpos.
inline double poisson_bracket(std::span<const double> grad_f, std::span<const double> grad_g,
                              const CanonicalPairing& pairing) {
    double sum = 0.0;
    for (const auto& [pos, mom] : pairing) sum += grad_f[pos] * grad_g[mom] - grad_f[mom] * grad_g[pos];
    return sum;
}

inline double poisson_bracket(const GradientFn& f, const GradientFn& g, std::span<const double> z,
                              const CanonicalPairing& pairing) {
    return poisson_bracket(f(z), g(z), pairing);
}

/// Finite-difference route on plain scalar maps.
inline double poisson_bracket(const ScalarFn& f, const ScalarFn& g, std::span<const double> z,
                              const CanonicalPairing& pairing) {
    return poisson_bracket(fd_gradient(f, z), fd_gradient(g, z), pairing);
}

/// All pairwise brackets {I_a, I_b}, a < b, at z (finite differences).
inline std::vector<double> integral_brackets(const System& sys, std::span<const double> z) {
    if (!sys.has_hamiltonian()) throw error(errc::not_hamiltonian, sys.name + " has no first integrals");
    std::vector<std::vector<double>> grads;
    for (const auto& in : sys.integrals) grads.push_back(fd_gradient(in.fn, z));
    std::vector<double> out;
    for (std::size_t a = 0; a < grads.size(); ++a)
        for (std::size_t b = a + 1; b < grads.size(); ++b)
            out.push_back(poisson_bracket(grads[a], grads[b], sys.canonical_pairing));
    return out;
}

/// Numerical rank of the integrals' gradient matrix: singular values above
/// tol * (largest singular value). A zero matrix has rank 0.
inline int integral_jacobian_rank(const System& sys, std::span<const double> z, double tol = 1e-8) {
    if (!sys.has_hamiltonian()) throw error(errc::not_hamiltonian, sys.name + " has no first integrals");
    const auto rows = static_cast<Eigen::Index>(sys.integrals.size());
    const auto cols = static_cast<Eigen::Index>(sys.dim());
    Eigen::MatrixXd g(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto grad = fd_gradient(sys.integrals[static_cast<std::size_t>(r)].fn, z);
        for (Eigen::Index c = 0; c < cols; ++c) g(r, c) = grad[static_cast<std::size_t>(c)];
    }
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(g).singularValues();
    // absolute floor keeps finite-difference noise on vanishing gradients out
    const double cutoff = std::max(tol * (sv.size() ? sv(0) : 0.0), 1e-9);
    int rank = 0;
    for (Eigen::Index k = 0; k < sv.size(); ++k)
        if (sv(k) > cutoff) ++rank;
    return rank;
}

inline int integral_jacobian_rank(const System& sys, const MixedPoint& p, double tol = 1e-8) {
    require_layout(sys, p);
    return integral_jacobian_rank(sys, p.coords(), tol);
}

}  // namespace kronecker
