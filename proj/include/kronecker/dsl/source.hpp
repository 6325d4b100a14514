#pragma once

// DSL text files:
//
//   # comment
//   pairs: (phi_1,u_1)(y,x)(q_1,p_1)      required; (position,momentum) pairs
//   angles: phi_1                          optional; angular coordinates
//   system: ham-unique n=1 m=1 omega=1     optional; catalog system to compare against
//   H = <expression>                       may span several lines; "H =" is optional

#include <memory>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kronecker/dsl/expr.hpp"
#include "kronecker/dsl/field.hpp"
#include "kronecker/dsl/parser.hpp"
#include "kronecker/error.hpp"
#include "kronecker/systems.hpp"

namespace kronecker::dsl {

struct DslSource {
    NamePairing pairing;
    std::set<std::string> angles;
    std::optional<SystemParams> target;
    std::string expression_text;
    Expr hamiltonian;
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

/// "ham-unique n=1 m=1 l=0 omega=1,sqrt2"
inline SystemParams parse_system_line(const std::string& text, std::size_t offset) {
    std::istringstream in(text);
    std::string word;
    in >> word;
    auto family = family_from_string(word);
    if (!family) throw syntax_error(errc::parse_error, offset, "unknown family '" + word + "'");
    SystemParams p;
    p.family = *family;
    p.omega.clear();
    bool have_omega = false;
    while (in >> word) {
        const auto eq = word.find('=');
        if (eq == std::string::npos) throw syntax_error(errc::parse_error, offset, "expected key=value, got '" + word + "'");
        const auto key = word.substr(0, eq);
        const auto value = word.substr(eq + 1);
        try {
            if (key == "n") p.n = std::stoi(value);
            else if (key == "m") p.m = std::stoi(value);
            else if (key == "l") p.l = std::stoi(value);
            else if (key == "omega") {
                p.omega = parse_omega(value);
                have_omega = true;
            } else throw syntax_error(errc::parse_error, offset, "unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw syntax_error(errc::parse_error, offset, "bad value for '" + key + "'");
        }
    }
    if (!have_omega) p.omega.assign(static_cast<std::size_t>(std::max(p.n, 0)), 1.0);
    return p;
}

}  // namespace detail

inline DslSource parse_dsl_source(std::string_view text) {
    DslSource src;
    bool have_pairs = false;
    std::size_t expr_offset = 0;
    std::size_t line_start = 0;
    while (line_start <= text.size()) {
        std::size_t line_end = text.find('\n', line_start);
        if (line_end == std::string_view::npos) line_end = text.size();
        const std::string line = detail::trim(text.substr(line_start, line_end - line_start));
        const std::size_t offset = line_start;
        line_start = line_end + 1;
        if (line.empty() || line.front() == '#') continue;

        auto header = [&](std::string_view key) -> std::optional<std::string> {
            if (line.rfind(key, 0) == 0) return detail::trim(std::string_view(line).substr(key.size()));
            return std::nullopt;
        };
        if (auto body = header("pairs:")) {
            static const std::regex pair_re(R"(\(\s*([A-Za-z_]\w*)\s*,\s*([A-Za-z_]\w*)\s*\))");
            std::string rest = *body;
            for (std::smatch m; std::regex_search(rest, m, pair_re); rest = m.suffix()) {
                if (!detail::trim(m.prefix().str()).empty())
                    throw syntax_error(errc::parse_error, offset, "malformed pairs header");
                src.pairing.emplace_back(m[1], m[2]);
            }
            if (!detail::trim(rest).empty() || src.pairing.empty())
                throw syntax_error(errc::parse_error, offset, "malformed pairs header");
            have_pairs = true;
        } else if (auto angles = header("angles:")) {
            std::string list = *angles;
            for (auto& c : list)
                if (c == ',') c = ' ';
            std::istringstream in(list);
            for (std::string a; in >> a;) src.angles.insert(a);
        } else if (auto sys = header("system:")) {
            src.target = detail::parse_system_line(*sys, offset);
        } else {
            if (src.expression_text.empty()) {
                std::string body = line;
                if (body.rfind("H", 0) == 0) {
                    auto rest = detail::trim(std::string_view(body).substr(1));
                    if (!rest.empty() && rest.front() == '=') body = detail::trim(std::string_view(rest).substr(1));
                }
                // offsets past the first line are approximate (lines are joined by one space)
                expr_offset = text.find(body, offset);
                src.expression_text = body;
            } else {
                src.expression_text += " " + line;
            }
        }
    }
    if (!have_pairs) throw syntax_error(errc::parse_error, 0, "missing 'pairs:' header");
    if (src.expression_text.empty()) throw syntax_error(errc::parse_error, text.size(), "missing Hamiltonian expression");
    try {
        src.hamiltonian = parse(src.expression_text);
    } catch (const syntax_error& e) {
        // rebase the offset from the expression onto the whole file
        std::string what = e.what();
        if (auto colon = what.find(": "); colon != std::string::npos) what = what.substr(colon + 2);
        if (auto at = what.rfind(" at offset "); at != std::string::npos) what = what.substr(0, at);
        throw syntax_error(e.code(), expr_offset + e.position(), what);
    }
    return src;
}

/// DSL text reproducing the Hamilton function of a hamiltonian catalog family.
inline std::string hamiltonian_text(const SystemParams& p) {
    if (!is_hamiltonian_family(p.family)) throw error(errc::not_hamiltonian, "reversible families have no Hamilton function");
    const bool compact = p.family == Family::ham_compact;
    auto c = [&](const std::string& name) { return compact ? "sin(" + name + ")" : name; };
    std::string omega_list;
    for (std::size_t i = 0; i < p.omega.size(); ++i) omega_list += (i ? "," : "") + format_number(p.omega[i]);

    std::string out;
    out += "# " + std::string(to_string(p.family)) + " n=" + std::to_string(p.n) + " m=" + std::to_string(p.m) + "\n";
    out += "pairs: ";
    for (int i = 1; i <= p.n; ++i) out += "(phi_" + std::to_string(i) + ",u_" + std::to_string(i) + ")";
    out += "(y,x)";
    for (int j = 1; j <= p.m; ++j) out += "(q_" + std::to_string(j) + ",p_" + std::to_string(j) + ")";
    out += "\nangles: ";
    std::vector<std::string> angles;
    for (int i = 1; i <= p.n; ++i) angles.push_back("phi_" + std::to_string(i));
    if (compact) {
        for (int i = 1; i <= p.n; ++i) angles.push_back("u_" + std::to_string(i));
        angles.insert(angles.end(), {"x", "y"});
        for (int j = 1; j <= p.m; ++j) angles.push_back("p_" + std::to_string(j));
        for (int j = 1; j <= p.m; ++j) angles.push_back("q_" + std::to_string(j));
    }
    for (std::size_t k = 0; k < angles.size(); ++k) out += (k ? "," : "") + angles[k];
    out += "\nsystem: " + std::string(to_string(p.family)) + " n=" + std::to_string(p.n) + " m=" + std::to_string(p.m) +
           " omega=" + omega_list + "\n";

    std::string h;
    for (int i = 1; i <= p.n; ++i) {
        const auto u = c("u_" + std::to_string(i));
        h += (i > 1 ? " + " : "") + format_number(p.omega[static_cast<std::size_t>(i - 1)]) + "*" + u + " + " + c("x") +
             "*" + u + "^2";
    }
    h += " + " + c("x") + "^3/3 + " + c("x") + "*" + c("y") + "^2";
    for (int j = 1; j <= p.m; ++j) {
        const auto pj = c("p_" + std::to_string(j));
        const auto qj = c("q_" + std::to_string(j));
        h += " + " + pj + "^3/3 + " + pj + "*" + qj + "^2";
    }
    out += "H = " + h + "\n";
    return out;
}

/// Wrap a compiled Hamiltonian as a custom System (energy is its only integral).
inline System system_from_hamiltonian(std::shared_ptr<const HamiltonianField> f, std::string name) {
    System sys;
    sys.params.family = Family::custom;
    sys.params.n = 0;
    sys.params.omega.clear();
    sys.name = std::move(name);
    sys.layout = f->layout();
    sys.canonical_pairing = f->slot_pairing();
    ScalarFn energy = [f](std::span<const double> z) { return f->energy(z); };
    sys.hamiltonian = energy;
    sys.integrals.push_back({"H", energy});
    sys.jacobian = [f](std::span<const double> z, std::span<double> out) {
        const Eigen::MatrixXd j = f->jacobian(z);
        for (Eigen::Index r = 0; r < j.rows(); ++r)
            for (Eigen::Index c = 0; c < j.cols(); ++c) out[static_cast<std::size_t>(r * j.cols() + c)] = j(r, c);
    };
    sys.field = as_field(std::move(f));
    return sys;
}

inline System system_from_dsl(const DslSource& src, std::string name = "dsl") {
    std::shared_ptr<const HamiltonianField> f;
    if (src.target) {
        const System like = build_system(*src.target);
        f = std::make_shared<const HamiltonianField>(src.hamiltonian, src.pairing, like.layout->labels(), src.angles);
    } else {
        f = std::make_shared<const HamiltonianField>(src.hamiltonian, src.pairing, std::vector<std::string>{},
                                                     src.angles);
    }
    return system_from_hamiltonian(std::move(f), std::move(name));
}

/// Control fixture: a rotor with twist decoupled from a harmonic oscillator,
///   H = w u + (b/2) u^2 + (a/2) (x^2 + y^2)
/// on layout (u, phi, x, y). Its periodic orbits {x = y = 0} form a smooth
/// family over the energy and have nontrivial multipliers exp(+-2 pi i a / w).
inline std::string control_fixture_text(double omega = 1.0, double alpha = std::numbers::sqrt2, double beta = 0.5) {
    return "pairs: (phi,u)(y,x)\nangles: phi\nH = " + format_number(omega) + "*u + " + format_number(beta / 2) +
           "*u^2 + " + format_number(alpha / 2) + "*(x^2 + y^2)\n";
}

inline System make_control_fixture(double omega = 1.0, double alpha = std::numbers::sqrt2, double beta = 0.5) {
    const auto src = parse_dsl_source(control_fixture_text(omega, alpha, beta));
    auto f = std::make_shared<const HamiltonianField>(src.hamiltonian, src.pairing,
                                                      std::vector<std::string>{"u", "phi", "x", "y"}, src.angles);
    System sys = system_from_hamiltonian(std::move(f), "control");
    sys.involution_signs = {1.0, -1.0, 1.0, -1.0};
    sys.params.n = 1;
    sys.params.omega = {omega};
    return sys;
}

}  // namespace kronecker::dsl
