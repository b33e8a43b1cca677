#pragma once

// Affine expressions over unknown coefficient symbols, exact-rational. These
// are the scalar entries of constraint polynomials before lowering: every
// monomial coefficient is linear in the template unknowns.

#include "rational.hpp"

#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace bcert {

struct LinExpr {
    std::map<int, Rational> coeffs;  // unknown id -> coefficient
    Rational constant;

    LinExpr() = default;
    explicit LinExpr(Rational c) : constant(std::move(c)) {}

    static LinExpr unknown(int id, Rational c = Rational(1)) {
        LinExpr e;
        if (c != 0) e.coeffs[id] = std::move(c);
        return e;
    }

    bool is_zero() const { return coeffs.empty() && constant == 0; }
    bool is_constant() const { return coeffs.empty(); }

    LinExpr& operator+=(const LinExpr& o) {
        constant += o.constant;
        for (auto& [id, c] : o.coeffs) {
            auto [it, inserted] = coeffs.try_emplace(id, c);
            if (!inserted) {
                it->second += c;
                if (it->second == 0) coeffs.erase(it);
            }
        }
        return *this;
    }

    LinExpr& operator-=(const LinExpr& o) { return *this += -o; }

    LinExpr operator-() const {
        LinExpr r;
        r.constant = -constant;
        for (auto& [id, c] : coeffs) r.coeffs[id] = -c;
        return r;
    }

    friend LinExpr operator+(LinExpr a, const LinExpr& b) { return a += b; }
    friend LinExpr operator-(LinExpr a, const LinExpr& b) { return a += -b; }

    friend LinExpr operator*(const Rational& c, const LinExpr& e) {
        LinExpr r;
        if (c == 0) return r;
        r.constant = c * e.constant;
        for (auto& [id, k] : e.coeffs) r.coeffs[id] = c * k;
        return r;
    }

    bool operator==(const LinExpr&) const = default;

    /// Numeric value under an assignment of unknowns (by id into `values`).
    double eval(const std::vector<double>& values) const {
        double acc = to_double(constant);
        for (auto& [id, c] : coeffs) acc += to_double(c) * values[static_cast<std::size_t>(id)];
        return acc;
    }

    Rational eval_exact(const std::vector<Rational>& values) const {
        Rational acc = constant;
        for (auto& [id, c] : coeffs) acc += c * values[static_cast<std::size_t>(id)];
        return acc;
    }

    std::string str() const {
        std::ostringstream out;
        bool first = true;
        if (constant != 0 || coeffs.empty()) {
            out << constant;
            first = false;
        }
        for (auto& [id, c] : coeffs) {
            if (!first) out << " + ";
            out << c << "*u" << id;
            first = false;
        }
        return out.str();
    }
};

}  // namespace bcert
