#pragma once

// Grammar (standard precedence, ^ binds tightest and takes an integer literal):
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' INTEGER)*
//   primary := NUMBER | IDENT | ('sin' | 'cos') '(' expr ')' | '(' expr ')'
//
// Identifiers may carry subscripts (u_1, phi_12) and are single tokens.

#include <cctype>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <string_view>
#include <vector>

#include "kronecker/dsl/expr.hpp"
#include "kronecker/error.hpp"

namespace kronecker::dsl {

enum class TokenKind { number, ident, sin, cos, plus, minus, star, slash, caret, lparen, rparen, end };

struct Token {
    TokenKind kind;
    std::string text;
    std::size_t position;

    friend bool operator==(const Token&, const Token&) = default;
};

inline std::vector<Token> tokenize(std::string_view text) {
    std::vector<Token> out;
    std::size_t i = 0;
    auto is_ident_start = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; };
    auto is_ident_char = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
    auto is_digit = [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; };

    while (i < text.size()) {
        const char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        const std::size_t start = i;
        if (is_ident_start(c)) {
            while (i < text.size() && is_ident_char(text[i])) ++i;
            std::string word(text.substr(start, i - start));
            TokenKind kind = word == "sin" ? TokenKind::sin : word == "cos" ? TokenKind::cos : TokenKind::ident;
            out.push_back({kind, std::move(word), start});
            continue;
        }
        if (is_digit(c) || (c == '.' && i + 1 < text.size() && is_digit(text[i + 1]))) {
            while (i < text.size() && is_digit(text[i])) ++i;
            if (i < text.size() && text[i] == '.') {
                ++i;
                while (i < text.size() && is_digit(text[i])) ++i;
            }
            if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
                std::size_t j = i + 1;
                if (j < text.size() && (text[j] == '+' || text[j] == '-')) ++j;
                if (j < text.size() && is_digit(text[j])) {
                    i = j;
                    while (i < text.size() && is_digit(text[i])) ++i;
                }
            }
            out.push_back({TokenKind::number, std::string(text.substr(start, i - start)), start});
            continue;
        }
        TokenKind kind;
        switch (c) {
            case '+': kind = TokenKind::plus; break;
            case '-': kind = TokenKind::minus; break;
            case '*': kind = TokenKind::star; break;
            case '/': kind = TokenKind::slash; break;
            case '^': kind = TokenKind::caret; break;
            case '(': kind = TokenKind::lparen; break;
            case ')': kind = TokenKind::rparen; break;
            default:
                throw syntax_error(errc::lex_error, start, std::string("illegal character '") + c + "'");
        }
        out.push_back({kind, std::string(1, c), start});
        ++i;
    }
    out.push_back({TokenKind::end, "", text.size()});
    return out;
}

namespace detail {

class Parser {
public:
    explicit Parser(std::string_view text) : tokens_(tokenize(text)) {}

    Expr parse_all() {
        Expr e = expr();
        if (peek().kind != TokenKind::end) fail("unexpected '" + peek().text + "'");
        return e;
    }

private:
    const Token& peek() const { return tokens_[pos_]; }
    const Token& next() { return tokens_[pos_++]; }

    [[noreturn]] void fail(const std::string& what) const {
        throw syntax_error(errc::parse_error, peek().position, what);
    }

    void expect(TokenKind kind, const char* what) {
        if (peek().kind != kind) fail(std::string("expected ") + what);
        ++pos_;
    }

    Expr expr() {
        Expr lhs = term();
        while (peek().kind == TokenKind::plus || peek().kind == TokenKind::minus) {
            const Op op = next().kind == TokenKind::plus ? Op::add : Op::sub;
            lhs = Expr::binary(op, lhs, term());
        }
        return lhs;
    }

    Expr term() {
        Expr lhs = unary();
        while (peek().kind == TokenKind::star || peek().kind == TokenKind::slash) {
            const Op op = next().kind == TokenKind::star ? Op::mul : Op::div;
            lhs = Expr::binary(op, lhs, unary());
        }
        return lhs;
    }

    Expr unary() {
        if (peek().kind == TokenKind::minus) {
            ++pos_;
            return Expr::unary(Op::neg, unary());
        }
        return power();
    }

    Expr power() {
        Expr base = primary();
        while (peek().kind == TokenKind::caret) {
            ++pos_;
            const Token& t = peek();
            bool integral = t.kind == TokenKind::number && !t.text.empty();
            for (char c : t.text) integral = integral && std::isdigit(static_cast<unsigned char>(c));
            if (!integral) fail("exponent must be a nonnegative integer literal");
            if (t.text.size() > 6) fail("exponent too large");
            ++pos_;
            base = Expr::pow_int(base, std::stoi(t.text));
        }
        return base;
    }

    Expr primary() {
        const Token& t = peek();
        switch (t.kind) {
            case TokenKind::number: {
                ++pos_;
                return Expr::constant(std::strtod(t.text.c_str(), nullptr));
            }
            case TokenKind::ident: ++pos_; return Expr::variable(t.text);
            case TokenKind::sin:
            case TokenKind::cos: {
                const Op op = t.kind == TokenKind::sin ? Op::sin : Op::cos;
                ++pos_;
                expect(TokenKind::lparen, "'(' after function name");
                Expr arg = expr();
                expect(TokenKind::rparen, "')'");
                return Expr::unary(op, arg);
            }
            case TokenKind::lparen: {
                ++pos_;
                Expr inner = expr();
                expect(TokenKind::rparen, "')'");
                return inner;
            }
            case TokenKind::end: fail("unexpected end of input");
            default: fail("unexpected '" + t.text + "'");
        }
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline Expr parse(std::string_view text) { return detail::Parser(text).parse_all(); }

}  // namespace kronecker::dsl
