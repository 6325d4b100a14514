#pragma once

#include <charconv>
#include <cmath>
#include <memory>
#include <set>
#include <string>
#include <utility>

#include "kronecker/error.hpp"

namespace kronecker::dsl {

enum class Op { constant, variable, add, sub, mul, div, pow_int, sin, cos, neg };

/// Immutable expression tree. Copies share structure.
class Expr {
public:
    struct Node;

    Expr() : Expr(constant(0.0)) {}

    static Expr constant(double value);
    static Expr variable(std::string name);
    static Expr binary(Op op, Expr lhs, Expr rhs);
    static Expr unary(Op op, Expr arg);
    static Expr pow_int(Expr base, int exponent);

    Op op() const noexcept;
    double value() const noexcept;
    const std::string& name() const noexcept;
    int exponent() const noexcept;
    /// First operand (the argument for unary nodes and the base for powers).
    Expr lhs() const;
    Expr rhs() const;

    bool is_constant() const noexcept { return op() == Op::constant; }
    bool is_constant(double v) const noexcept { return op() == Op::constant && value() == v; }

    friend bool operator==(const Expr& a, const Expr& b);

private:
    explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
    std::shared_ptr<const Node> node_;
};

struct Expr::Node {
    Op op = Op::constant;
    double value = 0.0;
    std::string name;
    int exponent = 0;
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;
};

inline Op Expr::op() const noexcept { return node_->op; }
inline double Expr::value() const noexcept { return node_->value; }
inline const std::string& Expr::name() const noexcept { return node_->name; }
inline int Expr::exponent() const noexcept { return node_->exponent; }
inline Expr Expr::lhs() const { return Expr(node_->lhs); }
inline Expr Expr::rhs() const { return Expr(node_->rhs); }

inline Expr Expr::constant(double value) {
    auto n = std::make_shared<Node>();
    n->op = Op::constant;
    n->value = value;
    return Expr(std::move(n));
}

inline Expr Expr::variable(std::string name) {
    auto n = std::make_shared<Node>();
    n->op = Op::variable;
    n->name = std::move(name);
    return Expr(std::move(n));
}

inline Expr Expr::binary(Op op, Expr lhs, Expr rhs) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->lhs = std::move(lhs.node_);
    n->rhs = std::move(rhs.node_);
    return Expr(std::move(n));
}

inline Expr Expr::unary(Op op, Expr arg) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->lhs = std::move(arg.node_);
    return Expr(std::move(n));
}

inline Expr Expr::pow_int(Expr base, int exponent) {
    if (exponent < 0) throw error(errc::invalid_value, "negative integer power");
    auto n = std::make_shared<Node>();
    n->op = Op::pow_int;
    n->exponent = exponent;
    n->lhs = std::move(base.node_);
    return Expr(std::move(n));
}

inline bool operator==(const Expr& a, const Expr& b) {
    if (a.node_ == b.node_) return true;
    if (a.op() != b.op()) return false;
    switch (a.op()) {
        case Op::constant: return a.value() == b.value();
        case Op::variable: return a.name() == b.name();
        case Op::pow_int: return a.exponent() == b.exponent() && a.lhs() == b.lhs();
        case Op::sin:
        case Op::cos:
        case Op::neg: return a.lhs() == b.lhs();
        default: return a.lhs() == b.lhs() && a.rhs() == b.rhs();
    }
}

inline Expr operator+(Expr a, Expr b) { return Expr::binary(Op::add, std::move(a), std::move(b)); }
inline Expr operator-(Expr a, Expr b) { return Expr::binary(Op::sub, std::move(a), std::move(b)); }
inline Expr operator*(Expr a, Expr b) { return Expr::binary(Op::mul, std::move(a), std::move(b)); }
inline Expr operator/(Expr a, Expr b) { return Expr::binary(Op::div, std::move(a), std::move(b)); }
inline Expr operator-(Expr a) { return Expr::unary(Op::neg, std::move(a)); }
inline Expr sin(Expr a) { return Expr::unary(Op::sin, std::move(a)); }
inline Expr cos(Expr a) { return Expr::unary(Op::cos, std::move(a)); }
inline Expr pow(Expr a, int k) { return Expr::pow_int(std::move(a), k); }
inline Expr num(double v) { return Expr::constant(v); }
inline Expr var(std::string name) { return Expr::variable(std::move(name)); }

inline void collect_variables(const Expr& e, std::set<std::string>& out) {
    switch (e.op()) {
        case Op::constant: return;
        case Op::variable: out.insert(e.name()); return;
        case Op::pow_int:
        case Op::sin:
        case Op::cos:
        case Op::neg: collect_variables(e.lhs(), out); return;
        default:
            collect_variables(e.lhs(), out);
            collect_variables(e.rhs(), out);
    }
}

inline std::set<std::string> variables(const Expr& e) {
    std::set<std::string> out;
    collect_variables(e, out);
    return out;
}

inline bool depends_on(const Expr& e, const std::string& name) {
    switch (e.op()) {
        case Op::constant: return false;
        case Op::variable: return e.name() == name;
        case Op::pow_int:
        case Op::sin:
        case Op::cos:
        case Op::neg: return depends_on(e.lhs(), name);
        default: return depends_on(e.lhs(), name) || depends_on(e.rhs(), name);
    }
}

inline std::size_t node_count(const Expr& e) {
    switch (e.op()) {
        case Op::constant:
        case Op::variable: return 1;
        case Op::pow_int:
        case Op::sin:
        case Op::cos:
        case Op::neg: return 1 + node_count(e.lhs());
        default: return 1 + node_count(e.lhs()) + node_count(e.rhs());
    }
}

/// Shortest decimal text that reads back to exactly `v`.
inline std::string format_number(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw error(errc::invalid_value, "cannot format number");
    return std::string(buf, end);
}

namespace detail {

// Binding strength used by the printer; mirrors the parser.
inline int precedence(const Expr& e) {
    switch (e.op()) {
        case Op::add:
        case Op::sub: return 1;
        case Op::mul:
        case Op::div: return 2;
        case Op::neg: return 3;
        case Op::pow_int: return 4;
        case Op::constant: return e.value() < 0 || std::signbit(e.value()) ? 3 : 5;
        default: return 5;
    }
}

inline void print(const Expr& e, std::string& out);

inline void print_wrapped(const Expr& e, bool parens, std::string& out) {
    if (parens) out += '(';
    print(e, out);
    if (parens) out += ')';
}

inline void print(const Expr& e, std::string& out) {
    switch (e.op()) {
        case Op::constant:
            if (!std::isfinite(e.value())) throw error(errc::invalid_value, "non-finite constant");
            if (std::signbit(e.value())) {
                out += '-';
                out += format_number(-e.value());
            } else {
                out += format_number(e.value());
            }
            return;
        case Op::variable: out += e.name(); return;
        case Op::add:
        case Op::sub:
            print_wrapped(e.lhs(), precedence(e.lhs()) < 1, out);
            out += e.op() == Op::add ? " + " : " - ";
            print_wrapped(e.rhs(), precedence(e.rhs()) <= 1, out);
            return;
        case Op::mul:
        case Op::div:
            print_wrapped(e.lhs(), precedence(e.lhs()) < 2, out);
            out += e.op() == Op::mul ? "*" : "/";
            print_wrapped(e.rhs(), precedence(e.rhs()) <= 2, out);
            return;
        case Op::neg:
            out += '-';
            print_wrapped(e.lhs(), precedence(e.lhs()) < 3, out);
            return;
        case Op::pow_int:
            print_wrapped(e.lhs(), precedence(e.lhs()) <= 4, out);
            out += '^';
            out += std::to_string(e.exponent());
            return;
        case Op::sin:
        case Op::cos:
            out += e.op() == Op::sin ? "sin(" : "cos(";
            print(e.lhs(), out);
            out += ')';
            return;
    }
}

}  // namespace detail

/// Infix text that the parser reads back to the same printed form.
inline std::string to_string(const Expr& e) {
    std::string out;
    detail::print(e, out);
    return out;
}

}  // namespace kronecker::dsl
