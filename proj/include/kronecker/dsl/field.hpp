#pragma once

// Canonical equations of motion compiled from a Hamiltonian expression:
// for each pair (position, momentum),
//   position' = +dH/d(momentum),   momentum' = -dH/d(position).

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kronecker/dsl/calculus.hpp"
#include "kronecker/dsl/expr.hpp"
#include "kronecker/error.hpp"
#include "kronecker/phase.hpp"
#include "kronecker/random.hpp"
#include "kronecker/systems.hpp"

namespace kronecker::dsl {

/// Ordered (position name, momentum name) pairs.
using NamePairing = std::vector<std::pair<std::string, std::string>>;

class HamiltonianField {
public:
    /// `slot_labels` fixes the coordinate order (default: pairs flattened as
    /// position, momentum); `angles` names the angular coordinates.
    HamiltonianField(Expr hamiltonian, NamePairing pairing, std::vector<std::string> slot_labels = {},
                     const std::set<std::string>& angles = {})
        : hamiltonian_(std::move(hamiltonian)), pairing_(std::move(pairing)) {
        std::set<std::string> names;
        for (const auto& [pos, mom] : pairing_) {
            if (pos == mom || !names.insert(pos).second || !names.insert(mom).second)
                throw error(errc::pairing_error, "pair names must be distinct");
        }
        for (const auto& v : variables(hamiltonian_))
            if (!names.count(v)) throw error(errc::pairing_error, "variable '" + v + "' is not in any canonical pair");
        if (slot_labels.empty()) {
            for (const auto& [pos, mom] : pairing_) {
                slot_labels.push_back(pos);
                slot_labels.push_back(mom);
            }
        }
        if (std::set<std::string>(slot_labels.begin(), slot_labels.end()) != names || slot_labels.size() != names.size())
            throw error(errc::pairing_error, "slot labels must list exactly the paired variables");
        std::vector<std::size_t> angle_slots;
        for (std::size_t i = 0; i < slot_labels.size(); ++i)
            if (angles.count(slot_labels[i])) angle_slots.push_back(i);
        for (const auto& a : angles)
            if (!names.count(a)) throw error(errc::pairing_error, "angle '" + a + "' is not a paired variable");
        layout_ = std::make_shared<const CoordinateLayout>(slot_labels, std::move(angle_slots));

        const std::size_t d = slot_labels.size();
        rates_.assign(d, Expr::constant(0.0));
        for (const auto& [pos, mom] : pairing_) {
            rates_[*layout_->slot_of(pos)] = differentiate(hamiltonian_, mom);
            rates_[*layout_->slot_of(mom)] = simplify(-differentiate(hamiltonian_, pos));
        }
        energy_ = CompiledExpr(hamiltonian_, slot_labels);
        for (const auto& r : rates_) compiled_rates_.emplace_back(r, slot_labels);
        compiled_jacobian_.reserve(d * d);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j)
                compiled_jacobian_.emplace_back(differentiate(rates_[i], slot_labels[j]), slot_labels);
    }

    const LayoutPtr& layout() const noexcept { return layout_; }
    const Expr& hamiltonian() const noexcept { return hamiltonian_; }
    const NamePairing& pairing() const noexcept { return pairing_; }
    /// Symbolic rate of each slot in layout order.
    const std::vector<Expr>& rates() const noexcept { return rates_; }

    void operator()(std::span<const double> z, std::span<double> dz) const {
        for (std::size_t i = 0; i < compiled_rates_.size(); ++i) dz[i] = compiled_rates_[i](z);
    }

    double energy(std::span<const double> z) const { return energy_(z); }

    /// Exact Jacobian of the field from second symbolic derivatives.
    Eigen::MatrixXd jacobian(std::span<const double> z) const {
        const auto d = static_cast<Eigen::Index>(compiled_rates_.size());
        Eigen::MatrixXd j(d, d);
        for (Eigen::Index r = 0; r < d; ++r)
            for (Eigen::Index c = 0; c < d; ++c) j(r, c) = compiled_jacobian_[static_cast<std::size_t>(r * d + c)](z);
        return j;
    }

    CanonicalPairing slot_pairing() const {
        CanonicalPairing out;
        for (const auto& [pos, mom] : pairing_) out.emplace_back(*layout_->slot_of(pos), *layout_->slot_of(mom));
        return out;
    }

private:
    Expr hamiltonian_;
    NamePairing pairing_;
    LayoutPtr layout_;
    std::vector<Expr> rates_;
    CompiledExpr energy_;
    std::vector<CompiledExpr> compiled_rates_;
    std::vector<CompiledExpr> compiled_jacobian_;
};

inline HamiltonianField hamiltonian_vector_field(const Expr& h, const NamePairing& pairing,
                                                 std::vector<std::string> slot_labels = {},
                                                 const std::set<std::string>& angles = {}) {
    return HamiltonianField(h, pairing, std::move(slot_labels), angles);
}

/// Field bound to the coordinate order and angle set of a catalog system.
inline HamiltonianField hamiltonian_vector_field(const Expr& h, const NamePairing& pairing, const System& like) {
    std::set<std::string> angles;
    for (auto s : like.layout->angle_slots()) angles.insert(like.layout->label(s));
    return HamiltonianField(h, pairing, like.layout->labels(), angles);
}

inline FieldFn as_field(std::shared_ptr<const HamiltonianField> f) {
    return [f = std::move(f)](std::span<const double> z, std::span<double> dz) { (*f)(z, dz); };
}

struct CrossCheckReport {
    double max_abs_deviation = 0.0;
    std::vector<double> worst_point;
    std::size_t worst_slot = 0;
    std::size_t samples = 0;
};

/// Componentwise comparison of two fields at seeded random points (real
/// slots uniform in [-radius, radius], angles on the full circle).
inline CrossCheckReport cross_check_fields(const LayoutPtr& layout_a, const FieldFn& a, const LayoutPtr& layout_b,
                                           const FieldFn& b, std::size_t samples, std::uint64_t seed,
                                           double radius = 1.0) {
    if (!same_layout(layout_a, layout_b)) throw error(errc::layout_mismatch, "fields live on different layouts");
    Rng rng(seed);
    CrossCheckReport report;
    report.samples = samples;
    const std::size_t d = layout_a->dim();
    std::vector<double> fa(d), fb(d);
    for (std::size_t k = 0; k < samples; ++k) {
        auto z = sample_box(rng, *layout_a, radius);
        a(z, fa);
        b(z, fb);
        for (std::size_t i = 0; i < d; ++i) {
            const double dev = std::abs(fa[i] - fb[i]);
            if (dev > report.max_abs_deviation || (std::isnan(dev) && !std::isnan(report.max_abs_deviation))) {
                report.max_abs_deviation = dev;
                report.worst_point = z;
                report.worst_slot = i;
            }
        }
    }
    return report;
}

}  // namespace kronecker::dsl
