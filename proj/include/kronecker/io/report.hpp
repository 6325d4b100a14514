#pragma once

// JSON forms of system descriptors, reports and run manifests.

#include <cmath>
#include <cstdint>
#include <string>

#include "json.hpp"
#include "kronecker/error.hpp"
#include "kronecker/systems.hpp"

namespace kronecker::io {

using nlohmann::json;

/// Non-finite numbers become the strings "inf", "-inf", "nan".
inline json number_json(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

inline json to_json(const SystemParams& p) {
    json j{{"family", std::string(to_string(p.family))}, {"n", p.n}, {"m", p.m}, {"omega", p.omega}};
    if (is_reversible_family(p.family)) j["l"] = p.l;
    return j;
}

/// {family, n, m, l, omega}; omega may be an array of numbers or a string of
/// comma-separated tokens ("1,sqrt2").
inline SystemParams params_from_json(const json& j) {
    try {
        SystemParams p;
        const auto name = j.at("family").get<std::string>();
        const auto family = family_from_string(name);
        if (!family || *family == Family::custom) throw error(errc::invalid_params, "unknown family '" + name + "'");
        p.family = *family;
        p.n = j.value("n", 1);
        p.m = j.value("m", 0);
        p.l = j.value("l", 0);
        if (!j.contains("omega")) p.omega.assign(static_cast<std::size_t>(std::max(p.n, 0)), 1.0);
        else if (j["omega"].is_string()) p.omega = parse_omega(j["omega"].get<std::string>());
        else p.omega = j["omega"].get<std::vector<double>>();
        return p;
    } catch (const json::exception& e) {
        throw error(errc::invalid_params, std::string("bad system descriptor: ") + e.what());
    }
}

/// Report document with the fixed top-level schema.
struct Report {
    std::string claim;
    json parameters = json::object();
    bool pass = false;
    json metrics = json::object();
    std::uint64_t seed = 0;

    json to_json() const {
        return {{"claim", claim}, {"parameters", parameters}, {"verdict", pass ? "PASS" : "FAIL"},
                {"metrics", metrics}, {"seed", seed}};
    }
};

}  // namespace kronecker::io
