#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

namespace kronecker {

enum class errc {
    invalid_value,
    layout_mismatch,
    invalid_params,
    not_hamiltonian,
    not_compact,
    degenerate_offset,
    lex_error,
    parse_error,
    simplify_error,
    unbound_var,
    eval_error,
    pairing_error,
    numerical_blowup,
    step_budget_exceeded,
    no_convergence,
    no_return,
    tangent_crossing,
    insufficient_data,
    domain_not_certified,
    empty_plot,
};

constexpr std::string_view to_string(errc code) noexcept {
    switch (code) {
        case errc::invalid_value: return "InvalidValue";
        case errc::layout_mismatch: return "LayoutMismatch";
        case errc::invalid_params: return "InvalidParams";
        case errc::not_hamiltonian: return "NotHamiltonian";
        case errc::not_compact: return "NotCompact";
        case errc::degenerate_offset: return "DegenerateOffset";
        case errc::lex_error: return "LexError";
        case errc::parse_error: return "ParseError";
        case errc::simplify_error: return "SimplifyError";
        case errc::unbound_var: return "UnboundVar";
        case errc::eval_error: return "EvalError";
        case errc::pairing_error: return "PairingError";
        case errc::numerical_blowup: return "NumericalBlowup";
        case errc::step_budget_exceeded: return "StepBudgetExceeded";
        case errc::no_convergence: return "NoConvergence";
        case errc::no_return: return "NoReturn";
        case errc::tangent_crossing: return "TangentCrossing";
        case errc::insufficient_data: return "InsufficientData";
        case errc::domain_not_certified: return "DomainNotCertified";
        case errc::empty_plot: return "EmptyPlot";
    }
    return "Unknown";
}

/// Every failure raised by the library. `code()` identifies the failure kind.
class error : public std::runtime_error {
public:
    error(errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    errc code() const noexcept { return code_; }

private:
    errc code_;
};

/// Lexer and parser failures carry the byte offset into the source text.
class syntax_error : public error {
public:
    syntax_error(errc code, std::size_t position, const std::string& what)
        : error(code, what + " at offset " + std::to_string(position)), position_(position) {}

    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

/// Raised when a trajectory leaves the escape box or produces non-finite values.
class numerical_blowup : public error {
public:
    numerical_blowup(double time, const std::string& what)
        : error(errc::numerical_blowup, what + " (t = " + std::to_string(time) + ")"), time_(time) {}

    /// Integration time at which the escape was detected.
    double time() const noexcept { return time_; }

private:
    double time_;
};

}  // namespace kronecker
