#pragma once

// Seeded uniqueness surveys: along sampled orbits the certificate
// L = y + sum_j q_j must grow unless the orbit already sits on the torus.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "kronecker/analysis/tori.hpp"
#include "kronecker/error.hpp"
#include "kronecker/integrators.hpp"
#include "kronecker/phase.hpp"
#include "kronecker/random.hpp"
#include "kronecker/systems.hpp"

namespace kronecker {

struct SurveyOptions {
    std::size_t samples = 10'000;
    std::uint64_t seed = 42;
    double horizon = 10.0;
    /// Half-width of the sampling box on real slots (non-compact families).
    double box = 1.0;
    /// Compact families: sample this domain (default: the isolation domain).
    std::optional<ModularDomain> domain;
    /// Worker threads; 0 means hardware concurrency.
    unsigned jobs = 0;
    double gain_threshold = 1e-8;
    double gap_threshold = 1e-3;
    double skip_norm = 1e-6;
    /// Recurrence window [t_min, recurrence_horizon] for samples that pass the gain test.
    double recurrence_t_min = 1.0;
    double recurrence_horizon = 100.0;
    IntegratorConfig integrator{Method::adaptive_rk, 1e-2, 1e-9, 1e-12};
};

struct SurveyRow {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    /// Non-angular part within skip_norm of zero: not evaluated.
    bool skipped = false;
    /// Certificate gain L(horizon) - L(0); +inf if the orbit escaped.
    double gain = 0.0;
    bool escaped = false;
    /// Recurrence gap, computed only when the gain test passes (else NaN).
    double gap = std::numeric_limits<double>::quiet_NaN();
    bool candidate = false;
    double real_norm = 0.0;
};

struct SurveyReport {
    std::string system;
    std::size_t samples = 0;
    std::uint64_t seed = 0;
    double horizon = 0.0;
    std::string domain;
    std::vector<SurveyRow> rows;
    std::size_t candidate_count = 0;
    std::vector<std::size_t> candidates;
    std::size_t skipped = 0;
    std::size_t escaped = 0;
    double min_gain = std::numeric_limits<double>::infinity();
};

namespace detail {

inline std::string describe_domain(const ModularDomain& d) {
    std::string out;
    for (std::size_t i = 0; i < d.dim(); ++i) {
        if (const auto& iv = d.interval(i)) {
            if (!out.empty()) out += ", ";
            out += d.layout()->label(i) + " in (" + std::to_string(iv->lo) + ", " + std::to_string(iv->hi) + ")";
        }
    }
    return out.empty() ? "unconstrained" : out;
}

inline SurveyRow survey_sample(const System& sys, const SurveyOptions& opt, std::size_t index,
                               const std::optional<ModularDomain>& domain) {
    SurveyRow row;
    row.index = index;
    row.seed = derive_seed(opt.seed, index);
    Rng rng(row.seed);
    std::vector<double> z = domain ? sample_domain(rng, *domain, opt.box) : sample_box(rng, *sys.layout, opt.box);
    // distance from the canonical torus: every slot except the phi angles
    double norm = 0.0;
    for (auto s : pinned_slots(sys)) norm += z[s] * z[s];
    row.real_norm = std::sqrt(norm);
    if (row.real_norm <= opt.skip_norm) {
        row.skipped = true;
        return row;
    }
    const double l0 = certificate_value(sys, z);
    try {
        const auto end = flow(sys.field, *sys.layout, z, 0.0, opt.horizon, opt.integrator);
        row.gain = certificate_value(sys, end) - l0;
    } catch (const numerical_blowup&) {
        row.escaped = true;
        row.gain = std::numeric_limits<double>::infinity();
    }
    if (row.gain <= opt.gain_threshold) {
        row.gap = recurrence_gap(sys, MixedPoint(sys.layout, z), opt.recurrence_t_min, opt.recurrence_horizon,
                                 IntegratorConfig{Method::rk4, 1e-2});
        row.candidate = row.gap < opt.gap_threshold;
    }
    return row;
}

}  // namespace detail

/// Deterministic in (seed, samples): sample k uses derive_seed(seed, k)
/// whatever the number of workers.
inline SurveyReport survey_uniqueness(const System& sys, const SurveyOptions& opt) {
    if (sys.certificate_slots.empty()) throw error(errc::invalid_params, sys.name + " has no uniqueness certificate");
    if (!(opt.horizon > 0.0) || !(opt.box > 0.0)) throw error(errc::invalid_value, "horizon and box must be positive");
    std::optional<ModularDomain> domain;
    if (is_compact_family(sys.params.family)) {
        const auto iso = isolation_domain(sys);
        domain = opt.domain ? *opt.domain : iso;
        if (!iso.contains(*domain))
            throw error(errc::domain_not_certified, "survey domain is not inside the isolation domain");
    } else if (opt.domain) {
        domain = opt.domain;
    }

    SurveyReport report;
    report.system = sys.name;
    report.samples = opt.samples;
    report.seed = opt.seed;
    report.horizon = opt.horizon;
    report.domain = domain ? detail::describe_domain(*domain)
                           : "box |real slots| <= " + std::to_string(opt.box) + ", angles free";
    report.rows.resize(opt.samples);

    unsigned jobs = opt.jobs ? opt.jobs : std::max(1u, std::thread::hardware_concurrency());
    jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, std::max<std::size_t>(1, opt.samples)));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    auto worker = [&] {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= opt.samples || failed.load()) return;
            try {
                report.rows[k] = detail::survey_sample(sys, opt, k, domain);
            } catch (...) {
                if (!failed.exchange(true)) failure = std::current_exception();
                return;
            }
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    for (const auto& row : report.rows) {
        if (row.skipped) ++report.skipped;
        if (row.escaped) ++report.escaped;
        if (!row.skipped) report.min_gain = std::min(report.min_gain, row.gain);
        if (row.candidate) report.candidates.push_back(row.index);
    }
    report.candidate_count = report.candidates.size();
    return report;
}

}  // namespace kronecker
