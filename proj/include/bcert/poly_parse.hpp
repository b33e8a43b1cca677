#pragma once

// Recursive-descent parser for polynomial expressions as they appear in system
// files: rational/decimal literals, named variables (primed names carry a
// trailing apostrophe), + - * ^, parentheses, and '/' with a constant divisor.
// Coefficients are kept exact; "0.1" parses as 1/10.

#include "polynomial.hpp"
#include "rational.hpp"

#include <cctype>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bcert {

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t column)
        : std::runtime_error(what + " (column " + std::to_string(column + 1) + ")"),
          column_(column) {}
    std::size_t column() const { return column_; }

private:
    std::size_t column_;
};

namespace detail {

class PolyParser {
public:
    PolyParser(std::string_view text, const std::vector<std::string>& vars)
        : text_(text), vars_(vars) {}

    Polynomial run() {
        Polynomial p = expr();
        skip_ws();
        if (pos_ != text_.size())
            throw ParseError("unexpected trailing input '" + remainder_preview() + "'", pos_);
        return p;
    }

private:
    Polynomial expr() {
        Polynomial acc = term();
        for (;;) {
            skip_ws();
            if (peek() == '+') {
                ++pos_;
                acc += term();
            } else if (peek() == '-') {
                ++pos_;
                acc -= term();
            } else {
                return acc;
            }
        }
    }

    Polynomial term() {
        Polynomial acc = factor();
        for (;;) {
            skip_ws();
            if (peek() == '*') {
                ++pos_;
                acc *= factor();
            } else if (peek() == '/') {
                std::size_t at = pos_;
                ++pos_;
                Polynomial d = factor();
                if (!d.is_constant())
                    throw ParseError("divisor must be a constant", at);
                Rational c = d.constant_term();
                if (c == 0) throw ParseError("division by zero", at);
                acc = Rational(1) / c * acc;
            } else {
                return acc;
            }
        }
    }

    Polynomial factor() {
        skip_ws();
        if (peek() == '-') {
            ++pos_;
            return -factor();
        }
        if (peek() == '+') {
            ++pos_;
            return factor();
        }
        Polynomial base = atom();
        skip_ws();
        if (peek() == '^') {
            ++pos_;
            skip_ws();
            std::size_t at = pos_;
            if (!std::isdigit(static_cast<unsigned char>(peek())))
                throw ParseError("exponent must be a nonnegative integer", at);
            unsigned long e = 0;
            while (std::isdigit(static_cast<unsigned char>(peek()))) {
                e = e * 10 + static_cast<unsigned long>(peek() - '0');
                if (e > 1000) throw ParseError("exponent too large", at);
                ++pos_;
            }
            return base.pow(static_cast<unsigned>(e));
        }
        return base;
    }

    Polynomial atom() {
        skip_ws();
        char c = peek();
        if (c == '(') {
            ++pos_;
            Polynomial p = expr();
            skip_ws();
            if (peek() != ')') throw ParseError("expected ')'", pos_);
            ++pos_;
            return p;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
        if (c == '\0') throw ParseError("unexpected end of input", pos_);
        throw ParseError(std::string("unexpected character '") + c + "'", pos_);
    }

    Polynomial number() {
        std::size_t start = pos_;
        while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
        if (peek() == '.') {
            ++pos_;
            if (!std::isdigit(static_cast<unsigned char>(peek()))) throw ParseError("digits expected after '.'", pos_);
            while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
        }
        if (peek() == 'e' || peek() == 'E')
            throw ParseError("exponent notation is not supported; write a fraction", pos_);
        Rational value = rational_from_string(text_.substr(start, pos_ - start));
        return Polynomial::constant(value, vars_);
    }

    Polynomial identifier() {
        std::size_t start = pos_;
        while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_') ++pos_;
        while (peek() == '\'') ++pos_;  // primed (post-jump) variables
        std::string name(text_.substr(start, pos_ - start));
        for (std::size_t i = 0; i < vars_.size(); ++i)
            if (vars_[i] == name) return Polynomial::variable(static_cast<int>(i), vars_);
        throw ParseError("unknown variable '" + name + "'", start);
    }

    char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    std::string remainder_preview() const {
        auto rest = text_.substr(pos_);
        if (rest.size() > 12) return std::string(rest.substr(0, 12)) + "...";
        return std::string(rest);
    }

    std::string_view text_;
    const std::vector<std::string>& vars_;
    std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses `text` as a polynomial over exactly the given variables.
/// Throws ParseError with a 1-based column on malformed input.
inline Polynomial parse_polynomial(std::string_view text, const std::vector<std::string>& vars) {
    return detail::PolyParser(text, vars).run();
}

}  // namespace bcert
