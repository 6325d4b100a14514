#pragma once

// Independent oracles for tests: Hamiltonians written out by hand, Hamilton's
// equations by central differences, and random expression trees.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "kronecker/kronecker.hpp"

namespace kronecker::testing {

/// Hand-written Hamiltonian of the catalog families, read through slot labels
/// so it does not share index arithmetic with the library.
inline double oracle_hamiltonian(const System& sys, std::span<const double> z) {
    const auto& L = *sys.layout;
    const bool compact = sys.params.family == Family::ham_compact;
    auto c = [&](const std::string& label) {
        const double v = z[*L.slot_of(label)];
        return compact ? std::sin(v) : v;
    };
    const double x = c("x"), y = c("y");
    double h = x * x * x / 3.0 + x * y * y;
    for (int i = 1; i <= sys.params.n; ++i) {
        const double u = c("u_" + std::to_string(i));
        h += sys.params.omega[i - 1] * u + x * u * u;
    }
    for (int j = 1; j <= sys.params.m; ++j) {
        const double p = c("p_" + std::to_string(j)), q = c("q_" + std::to_string(j));
        h += p * p * p / 3.0 + p * q * q;
    }
    return h;
}

/// Hamilton's equations by central differences: pos' = dH/dmom, mom' = -dH/dpos.
inline std::vector<double> fd_hamilton_field(const std::function<double(std::span<const double>)>& h,
                                             const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                                             std::vector<double> z, double step = 1e-5) {
    auto partial = [&](std::size_t k) {
        const double keep = z[k];
        z[k] = keep + step;
        const double hp = h(z);
        z[k] = keep - step;
        const double hm = h(z);
        z[k] = keep;
        return (hp - hm) / (2.0 * step);
    };
    std::vector<double> f(z.size(), 0.0);
    for (auto [pos, mom] : pairs) {
        f[pos] = partial(mom);
        f[mom] = -partial(pos);
    }
    return f;
}

/// (pos, mom) slot pairs of a catalog Hamiltonian system, found by label.
inline std::vector<std::pair<std::size_t, std::size_t>> catalog_pairs(const System& sys) {
    const auto& L = *sys.layout;
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (int i = 1; i <= sys.params.n; ++i)
        out.emplace_back(*L.slot_of("phi_" + std::to_string(i)), *L.slot_of("u_" + std::to_string(i)));
    out.emplace_back(*L.slot_of("y"), *L.slot_of("x"));
    for (int j = 1; j <= sys.params.m; ++j)
        out.emplace_back(*L.slot_of("q_" + std::to_string(j)), *L.slot_of("p_" + std::to_string(j)));
    return out;
}

/// Random expression over `vars`; denominators are kept away from zero.
inline dsl::Expr random_expr(Rng& rng, const std::vector<std::string>& vars, int depth) {
    using namespace dsl;
    const auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng.next() % n); };
    if (depth <= 0 || rng.uniform() < 0.2) {
        if (rng.uniform() < 0.35) return num(std::round(rng.uniform(-3.0, 3.0) * 4.0) / 4.0);
        return var(vars[pick(vars.size())]);
    }
    auto sub = [&] { return random_expr(rng, vars, depth - 1); };
    switch (pick(8)) {
        case 0: return sub() + sub();
        case 1: return sub() - sub();
        case 2: return sub() * sub();
        case 3: return sub() / (num(1.5) + pow(sin(sub()), 2));
        case 4: return pow(sub(), static_cast<int>(1 + pick(3)));
        case 5: return sin(sub());
        case 6: return cos(sub());
        default: return -sub();
    }
}

inline dsl::Bindings bindings(const std::vector<std::string>& vars, std::span<const double> values) {
    dsl::Bindings b;
    for (std::size_t i = 0; i < vars.size(); ++i) b[vars[i]] = values[i];
    return b;
}

/// Central difference of an expression in one variable.
inline double fd_partial(const dsl::Expr& e, dsl::Bindings b, const std::string& v, double step = 1e-5) {
    const double keep = b[v];
    b[v] = keep + step;
    const double hp = dsl::eval_expr(e, b);
    b[v] = keep - step;
    const double hm = dsl::eval_expr(e, b);
    return (hp - hm) / (2.0 * step);
}

inline SystemParams params(Family f, int n, int m, int l = 0, std::vector<double> omega = {}) {
    SystemParams p;
    p.family = f;
    p.n = n;
    p.m = m;
    p.l = l;
    if (omega.empty()) {
        omega.push_back(1.0);
        for (int i = 1; i < n; ++i) omega.push_back(std::sqrt(2.0) * i);
    }
    p.omega = std::move(omega);
    return p;
}

}  // namespace kronecker::testing
