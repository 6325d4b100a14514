#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "kronecker/dsl/expr.hpp"
#include "kronecker/error.hpp"

namespace kronecker::dsl {

using Bindings = std::map<std::string, double, std::less<>>;

namespace detail {

inline double ipow(double b, int k) {
    double r = 1.0;
    for (; k > 0; --k) r *= b;
    return r;
}

}  // namespace detail

inline double eval_expr(const Expr& e, const Bindings& bindings) {
    switch (e.op()) {
        case Op::constant: return e.value();
        case Op::variable: {
            auto it = bindings.find(e.name());
            if (it == bindings.end()) throw error(errc::unbound_var, "variable '" + e.name() + "' is not bound");
            return it->second;
        }
        case Op::add: return eval_expr(e.lhs(), bindings) + eval_expr(e.rhs(), bindings);
        case Op::sub: return eval_expr(e.lhs(), bindings) - eval_expr(e.rhs(), bindings);
        case Op::mul: return eval_expr(e.lhs(), bindings) * eval_expr(e.rhs(), bindings);
        case Op::div: {
            const double num = eval_expr(e.lhs(), bindings);
            const double den = eval_expr(e.rhs(), bindings);
            if (den == 0.0) throw error(errc::eval_error, "division by zero");
            return num / den;
        }
        case Op::pow_int: return detail::ipow(eval_expr(e.lhs(), bindings), e.exponent());
        case Op::sin: return std::sin(eval_expr(e.lhs(), bindings));
        case Op::cos: return std::cos(eval_expr(e.lhs(), bindings));
        case Op::neg: return -eval_expr(e.lhs(), bindings);
    }
    return 0.0;
}

namespace detail {

inline Expr fold_constant(const Expr& e) {
    return Expr::constant(eval_expr(e, {}));
}

// One bottom-up rewrite pass.
inline Expr simplify_pass(const Expr& e) {
    switch (e.op()) {
        case Op::constant:
        case Op::variable: return e;
        case Op::neg: {
            Expr a = simplify_pass(e.lhs());
            if (a.is_constant()) return Expr::constant(-a.value());
            if (a.op() == Op::neg) return a.lhs();
            return -a;
        }
        case Op::sin:
        case Op::cos: {
            Expr a = simplify_pass(e.lhs());
            Expr out = Expr::unary(e.op(), a);
            return a.is_constant() ? fold_constant(out) : out;
        }
        case Op::pow_int: {
            Expr a = simplify_pass(e.lhs());
            if (e.exponent() == 0) return Expr::constant(1.0);
            if (e.exponent() == 1) return a;
            if (a.is_constant()) return Expr::constant(ipow(a.value(), e.exponent()));
            return pow(a, e.exponent());
        }
        default: break;
    }

    Expr a = simplify_pass(e.lhs());
    Expr b = simplify_pass(e.rhs());
    switch (e.op()) {
        case Op::add:
            if (a.is_constant() && b.is_constant()) return Expr::constant(a.value() + b.value());
            if (b.is_constant(0.0)) return a;
            if (a.is_constant(0.0)) return b;
            if (b.op() == Op::neg) return a - b.lhs();
            return a + b;
        case Op::sub:
            if (a.is_constant() && b.is_constant()) return Expr::constant(a.value() - b.value());
            if (b.is_constant(0.0)) return a;
            if (a.is_constant(0.0)) return -b;
            if (b.op() == Op::neg) return a + b.lhs();
            return a - b;
        case Op::mul:
            if (a.is_constant() && b.is_constant()) return Expr::constant(a.value() * b.value());
            if (a.is_constant(0.0) || b.is_constant(0.0)) return Expr::constant(0.0);
            if (a.is_constant(1.0)) return b;
            if (b.is_constant(1.0)) return a;
            if (a.is_constant(-1.0)) return -b;
            if (b.is_constant(-1.0)) return -a;
            // constants to the left, coefficients merged, products left-associated
            if (b.is_constant()) return b * a;
            if (a.is_constant() && b.op() == Op::mul && b.lhs().is_constant())
                return Expr::constant(a.value() * b.lhs().value()) * b.rhs();
            if (b.op() == Op::mul) return (a * b.lhs()) * b.rhs();
            return a * b;
        case Op::div:
            if (b.is_constant(0.0)) throw error(errc::simplify_error, "division by constant zero");
            if (a.is_constant() && b.is_constant()) return Expr::constant(a.value() / b.value());
            if (a.is_constant(0.0)) return Expr::constant(0.0);
            if (b.is_constant(1.0)) return a;
            if (b.is_constant() && a.op() == Op::mul && a.lhs().is_constant())
                return Expr::constant(a.lhs().value() / b.value()) * a.rhs();
            return a / b;
        default: return e;
    }
}

}  // namespace detail

/// Constant folding plus the 0/1 identities, iterated to a fixed point (so
/// simplify is idempotent). No algebraic normal form is attempted.
inline Expr simplify(const Expr& e) {
    Expr current = e;
    for (int iter = 0; iter < 256; ++iter) {
        Expr next = detail::simplify_pass(current);
        if (next == current) return next;
        current = next;
    }
    return current;
}

namespace detail {

inline Expr derivative(const Expr& e, const std::string& v) {
    if (!depends_on(e, v)) return Expr::constant(0.0);
    switch (e.op()) {
        case Op::constant: return Expr::constant(0.0);
        case Op::variable: return Expr::constant(1.0);
        case Op::add: return derivative(e.lhs(), v) + derivative(e.rhs(), v);
        case Op::sub: return derivative(e.lhs(), v) - derivative(e.rhs(), v);
        case Op::mul: return derivative(e.lhs(), v) * e.rhs() + e.lhs() * derivative(e.rhs(), v);
        case Op::div:
            if (!depends_on(e.rhs(), v)) return derivative(e.lhs(), v) / e.rhs();
            return (derivative(e.lhs(), v) * e.rhs() - e.lhs() * derivative(e.rhs(), v)) / pow(e.rhs(), 2);
        case Op::pow_int:
            if (e.exponent() == 0) return Expr::constant(0.0);
            return Expr::constant(e.exponent()) * pow(e.lhs(), e.exponent() - 1) * derivative(e.lhs(), v);
        case Op::sin: return cos(e.lhs()) * derivative(e.lhs(), v);
        case Op::cos: return -(sin(e.lhs()) * derivative(e.lhs(), v));
        case Op::neg: return -derivative(e.lhs(), v);
    }
    return Expr::constant(0.0);
}

}  // namespace detail

/// Exact partial derivative with respect to `v`, simplified.
inline Expr differentiate(const Expr& e, const std::string& v) {
    return simplify(detail::derivative(e, v));
}

/// Postfix program with variables resolved to slot indices; evaluates on a
/// coordinate span without name lookups.
class CompiledExpr {
public:
    CompiledExpr() = default;

    CompiledExpr(const Expr& e, std::span<const std::string> slot_names) {
        emit(e, slot_names);
        std::size_t depth = 0;
        for (const auto& ins : code_) {
            switch (ins.op) {
                case Op::constant:
                case Op::variable: ++depth; break;
                case Op::add:
                case Op::sub:
                case Op::mul:
                case Op::div: --depth; break;
                default: break;
            }
            max_depth_ = std::max(max_depth_, depth);
        }
    }

    double operator()(std::span<const double> z) const {
        // small fixed stack covers every shipped expression; fall back otherwise
        double fixed[64];
        std::vector<double> heap;
        double* stack = fixed;
        if (max_depth_ > 64) {
            heap.resize(max_depth_);
            stack = heap.data();
        }
        std::size_t top = 0;
        for (const auto& ins : code_) {
            switch (ins.op) {
                case Op::constant: stack[top++] = ins.value; break;
                case Op::variable: stack[top++] = z[ins.slot]; break;
                case Op::add: --top; stack[top - 1] += stack[top]; break;
                case Op::sub: --top; stack[top - 1] -= stack[top]; break;
                case Op::mul: --top; stack[top - 1] *= stack[top]; break;
                case Op::div:
                    --top;
                    if (stack[top] == 0.0) throw error(errc::eval_error, "division by zero");
                    stack[top - 1] /= stack[top];
                    break;
                case Op::pow_int: stack[top - 1] = detail::ipow(stack[top - 1], ins.exponent); break;
                case Op::sin: stack[top - 1] = std::sin(stack[top - 1]); break;
                case Op::cos: stack[top - 1] = std::cos(stack[top - 1]); break;
                case Op::neg: stack[top - 1] = -stack[top - 1]; break;
            }
        }
        return top == 0 ? 0.0 : stack[0];
    }

private:
    struct Instr {
        Op op;
        double value = 0.0;
        std::size_t slot = 0;
        int exponent = 0;
    };

    void emit(const Expr& e, std::span<const std::string> names) {
        switch (e.op()) {
            case Op::constant: code_.push_back({Op::constant, e.value()}); return;
            case Op::variable: {
                for (std::size_t i = 0; i < names.size(); ++i) {
                    if (names[i] == e.name()) {
                        code_.push_back({Op::variable, 0.0, i});
                        return;
                    }
                }
                throw error(errc::unbound_var, "variable '" + e.name() + "' has no slot");
            }
            case Op::pow_int:
                emit(e.lhs(), names);
                code_.push_back({Op::pow_int, 0.0, 0, e.exponent()});
                return;
            case Op::sin:
            case Op::cos:
            case Op::neg:
                emit(e.lhs(), names);
                code_.push_back({e.op()});
                return;
            default:
                emit(e.lhs(), names);
                emit(e.rhs(), names);
                code_.push_back({e.op()});
        }
    }

    std::vector<Instr> code_;
    std::size_t max_depth_ = 0;
};

}  // namespace kronecker::dsl
