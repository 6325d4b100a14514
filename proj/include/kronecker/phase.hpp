#pragma once

// Mixed real/angular phase spaces R^a x T^b: layouts, wrapped points,
// the flat product metric and open boxes read modulo 2*pi on angular slots.

#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "kronecker/error.hpp"

namespace kronecker {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Representative of theta modulo 2*pi in (-pi, pi]. Values already in range
/// are returned bit-for-bit.
inline double wrap_angle(double theta) {
    if (!std::isfinite(theta)) throw error(errc::invalid_value, "wrap_angle of a non-finite value");
    if (theta > -pi && theta <= pi) return theta;
    double r = std::fmod(theta + pi, two_pi);
    if (r <= 0.0) r += two_pi;
    return r - pi;
}

/// Slot names and the set of slots that are angles.
class CoordinateLayout {
public:
    CoordinateLayout(std::vector<std::string> labels, std::vector<std::size_t> angle_slots)
        : labels_(std::move(labels)), is_angle_(labels_.size(), false) {
        if (labels_.empty()) throw error(errc::invalid_params, "layout must have at least one slot");
        std::unordered_set<std::string> seen;
        for (const auto& l : labels_) {
            if (!seen.insert(l).second) throw error(errc::invalid_params, "duplicate slot label '" + l + "'");
        }
        for (auto s : angle_slots) {
            if (s >= labels_.size()) throw error(errc::invalid_params, "angle slot out of range");
            is_angle_[s] = true;
        }
    }

    std::size_t dim() const noexcept { return labels_.size(); }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    const std::string& label(std::size_t slot) const { return labels_.at(slot); }
    bool is_angle(std::size_t slot) const { return is_angle_.at(slot); }

    std::vector<std::size_t> angle_slots() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < dim(); ++i)
            if (is_angle_[i]) out.push_back(i);
        return out;
    }

    std::vector<std::size_t> real_slots() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < dim(); ++i)
            if (!is_angle_[i]) out.push_back(i);
        return out;
    }

    std::optional<std::size_t> slot_of(const std::string& label) const {
        for (std::size_t i = 0; i < dim(); ++i)
            if (labels_[i] == label) return i;
        return std::nullopt;
    }

    friend bool operator==(const CoordinateLayout& a, const CoordinateLayout& b) {
        return a.labels_ == b.labels_ && a.is_angle_ == b.is_angle_;
    }

    /// Wrap the angular entries of a raw coordinate vector in place.
    void wrap(std::span<double> coords) const {
        for (std::size_t i = 0; i < coords.size(); ++i)
            if (is_angle_[i] && std::isfinite(coords[i])) coords[i] = wrap_angle(coords[i]);
    }

private:
    std::vector<std::string> labels_;
    std::vector<bool> is_angle_;
};

using LayoutPtr = std::shared_ptr<const CoordinateLayout>;

inline bool same_layout(const LayoutPtr& a, const LayoutPtr& b) {
    return a == b || (a && b && *a == *b);
}

/// A point of R^a x T^b. Angular coordinates are stored wrapped to (-pi, pi].
class MixedPoint {
public:
    MixedPoint(LayoutPtr layout, std::vector<double> coords)
        : layout_(std::move(layout)), coords_(std::move(coords)) {
        if (!layout_) throw error(errc::layout_mismatch, "point without layout");
        if (coords_.size() != layout_->dim())
            throw error(errc::layout_mismatch, "expected " + std::to_string(layout_->dim()) + " coordinates, got " +
                                                   std::to_string(coords_.size()));
        layout_->wrap(coords_);
    }

    /// Origin of the layout.
    explicit MixedPoint(LayoutPtr layout)
        : MixedPoint(layout, std::vector<double>(layout ? layout->dim() : 0, 0.0)) {}

    const LayoutPtr& layout() const noexcept { return layout_; }
    std::size_t dim() const noexcept { return coords_.size(); }
    std::span<const double> coords() const noexcept { return coords_; }
    double operator[](std::size_t slot) const { return coords_.at(slot); }

    /// Copy with one slot replaced (re-wrapped if angular).
    MixedPoint with(std::size_t slot, double value) const {
        auto c = coords_;
        c.at(slot) = value;
        return {layout_, std::move(c)};
    }

    friend bool operator==(const MixedPoint& a, const MixedPoint& b) {
        return same_layout(a.layout_, b.layout_) && a.coords_ == b.coords_;
    }

private:
    LayoutPtr layout_;
    std::vector<double> coords_;
};

inline void require_same_layout(const MixedPoint& a, const MixedPoint& b) {
    if (!same_layout(a.layout(), b.layout())) throw error(errc::layout_mismatch, "points live on different layouts");
}

/// Flat product metric: Euclidean on real slots, shortest arc on angular
/// slots, combined as root-sum-of-squares.
inline double torus_distance(const MixedPoint& a, const MixedPoint& b) {
    require_same_layout(a, b);
    const auto& layout = *a.layout();
    double sum = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        double d = a[i] - b[i];
        if (layout.is_angle(i)) d = wrap_angle(d);
        sum += d * d;
    }
    return std::sqrt(sum);
}

/// Euclidean norm of the real (non-angular) part.
inline double real_norm(const MixedPoint& p) {
    double sum = 0.0;
    for (auto s : p.layout()->real_slots()) sum += p[s] * p[s];
    return std::sqrt(sum);
}

struct Interval {
    double lo;
    double hi;
};

/// Open box with one optional interval per slot (absent = unconstrained).
/// Intervals on angular slots are read modulo 2*pi.
class ModularDomain {
public:
    ModularDomain(LayoutPtr layout, std::vector<std::optional<Interval>> intervals)
        : layout_(std::move(layout)), intervals_(std::move(intervals)) {
        if (!layout_ || intervals_.size() != layout_->dim())
            throw error(errc::layout_mismatch, "domain needs one interval slot per coordinate");
        for (std::size_t i = 0; i < intervals_.size(); ++i) {
            if (!intervals_[i]) continue;
            const auto& iv = *intervals_[i];
            if (!(iv.lo < iv.hi)) throw error(errc::invalid_params, "empty interval on slot " + layout_->label(i));
            if (layout_->is_angle(i) && iv.hi - iv.lo > two_pi)
                throw error(errc::invalid_params, "angular interval wider than 2*pi on slot " + layout_->label(i));
        }
    }

    const LayoutPtr& layout() const noexcept { return layout_; }
    std::size_t dim() const noexcept { return intervals_.size(); }
    const std::optional<Interval>& interval(std::size_t slot) const { return intervals_.at(slot); }

    std::size_t constrained_count() const {
        std::size_t n = 0;
        for (const auto& iv : intervals_) n += iv.has_value();
        return n;
    }

    /// Does `inner` lie inside this domain slot by slot?
    bool contains(const ModularDomain& inner) const {
        if (inner.dim() != dim()) throw error(errc::layout_mismatch, "domain dimension mismatch");
        for (std::size_t i = 0; i < dim(); ++i) {
            if (!intervals_[i]) continue;
            if (!inner.intervals_[i]) return false;
            const auto& a = *intervals_[i];
            const auto& b = *inner.intervals_[i];
            if (layout_->is_angle(i)) {
                // compare in the frame of this interval
                double lo = a.lo + std::fmod(std::fmod(b.lo - a.lo, two_pi) + two_pi, two_pi);
                if (lo < a.lo || lo + (b.hi - b.lo) > a.hi) return false;
            } else if (b.lo < a.lo || b.hi > a.hi) {
                return false;
            }
        }
        return true;
    }

private:
    LayoutPtr layout_;
    std::vector<std::optional<Interval>> intervals_;
};

/// Strict membership; angular values are reduced into [lo, lo + 2*pi) first.
inline bool in_modular_domain(std::span<const double> coords, const ModularDomain& d) {
    if (coords.size() != d.dim()) throw error(errc::layout_mismatch, "domain dimension mismatch");
    const auto& layout = *d.layout();
    for (std::size_t i = 0; i < coords.size(); ++i) {
        const auto& iv = d.interval(i);
        if (!iv) continue;
        double v = coords[i];
        if (layout.is_angle(i)) {
            double r = std::fmod(v - iv->lo, two_pi);
            if (r < 0.0) r += two_pi;
            v = iv->lo + r;
        }
        if (!(v > iv->lo && v < iv->hi)) return false;
    }
    return true;
}

inline bool in_modular_domain(const MixedPoint& p, const ModularDomain& d) {
    return in_modular_domain(p.coords(), d);
}

}  // namespace kronecker
