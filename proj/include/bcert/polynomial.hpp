#pragma once

// Sparse multivariate polynomials with exact rational coefficients. A
// polynomial carries the ordered variable list it is written over; systems
// declare that list once and every polynomial of the system binds to it, so
// cross-list unification is the exception, not the rule.

#include "interval.hpp"
#include "rational.hpp"

#include <algorithm>
#include <cstddef>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bcert {

/// Product of variable powers, kept sorted by variable index with positive
/// exponents only. The empty list is the monomial 1.
struct Monomial {
    std::vector<std::pair<int, int>> powers;

    int degree() const {
        int d = 0;
        for (auto& [v, e] : powers) d += e;
        return d;
    }

    int exponent(int var) const {
        for (auto& [v, e] : powers)
            if (v == var) return e;
        return 0;
    }

    Monomial times(const Monomial& o) const {
        Monomial r;
        std::size_t i = 0, j = 0;
        while (i < powers.size() || j < o.powers.size()) {
            if (j == o.powers.size() || (i < powers.size() && powers[i].first < o.powers[j].first)) {
                r.powers.push_back(powers[i++]);
            } else if (i == powers.size() || o.powers[j].first < powers[i].first) {
                r.powers.push_back(o.powers[j++]);
            } else {
                r.powers.emplace_back(powers[i].first, powers[i].second + o.powers[j].second);
                ++i, ++j;
            }
        }
        return r;
    }

    bool operator==(const Monomial& o) const { return powers == o.powers; }
};

/// Graded order: total degree first, then a deterministic tie-break on the
/// sparse exponent vectors.
struct MonomialOrder {
    bool operator()(const Monomial& a, const Monomial& b) const {
        int da = a.degree(), db = b.degree();
        if (da != db) return da < db;
        return a.powers < b.powers;
    }
};

class Polynomial {
public:
    using TermMap = std::map<Monomial, Rational, MonomialOrder>;

    Polynomial() = default;

    explicit Polynomial(std::vector<std::string> vars) : vars_(std::move(vars)) {}

    Polynomial(Rational constant, std::vector<std::string> vars) : vars_(std::move(vars)) {
        if (constant != 0) terms_[Monomial{}] = std::move(constant);
    }

    static Polynomial constant(Rational c, std::vector<std::string> vars) {
        return Polynomial(std::move(c), std::move(vars));
    }

    static Polynomial variable(int index, std::vector<std::string> vars) {
        if (index < 0 || static_cast<std::size_t>(index) >= vars.size())
            throw std::out_of_range("variable index out of range");
        Polynomial p(std::move(vars));
        p.terms_[Monomial{{{index, 1}}}] = 1;
        return p;
    }

    static Polynomial variable(const std::string& name, std::vector<std::string> vars) {
        auto it = std::find(vars.begin(), vars.end(), name);
        if (it == vars.end()) throw std::invalid_argument("unknown variable '" + name + "'");
        int idx = static_cast<int>(it - vars.begin());
        return variable(idx, std::move(vars));
    }

    const std::vector<std::string>& vars() const { return vars_; }
    const TermMap& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }
    bool is_constant() const {
        return terms_.empty() || (terms_.size() == 1 && terms_.begin()->first.powers.empty());
    }

    Rational constant_term() const {
        auto it = terms_.find(Monomial{});
        return it == terms_.end() ? Rational(0) : it->second;
    }

    Rational coefficient(const Monomial& m) const {
        auto it = terms_.find(m);
        return it == terms_.end() ? Rational(0) : it->second;
    }

    /// Total degree; the zero polynomial reports 0.
    int total_degree() const {
        int d = 0;
        for (auto& [m, c] : terms_) d = std::max(d, m.degree());
        return d;
    }

    int degree_in(int var) const {
        int d = 0;
        for (auto& [m, c] : terms_) d = std::max(d, m.exponent(var));
        return d;
    }

    void add_term(const Monomial& m, const Rational& c) {
        if (c == 0) return;
        auto [it, inserted] = terms_.try_emplace(m, c);
        if (!inserted) {
            it->second += c;
            if (it->second == 0) terms_.erase(it);
        }
    }

    /// Reinterprets this polynomial over a different variable list, matching
    /// variables by name. Every variable actually used must be present.
    Polynomial with_vars(std::vector<std::string> newvars) const {
        if (newvars == vars_) {
            Polynomial copy = *this;
            return copy;
        }
        std::vector<int> remap(vars_.size(), -1);
        for (std::size_t i = 0; i < vars_.size(); ++i) {
            auto it = std::find(newvars.begin(), newvars.end(), vars_[i]);
            if (it != newvars.end()) remap[i] = static_cast<int>(it - newvars.begin());
        }
        Polynomial out(std::move(newvars));
        for (auto& [m, c] : terms_) {
            Monomial nm;
            for (auto& [v, e] : m.powers) {
                if (remap[v] < 0)
                    throw std::invalid_argument("variable '" + vars_[v] +
                                                "' missing from target variable list");
                nm.powers.emplace_back(remap[v], e);
            }
            std::sort(nm.powers.begin(), nm.powers.end());
            out.add_term(nm, c);
        }
        return out;
    }

    friend Polynomial operator+(const Polynomial& a, const Polynomial& b) {
        auto [x, y] = aligned(a, b);
        for (auto& [m, c] : y.terms_) x.add_term(m, c);
        return x;
    }

    friend Polynomial operator-(const Polynomial& a, const Polynomial& b) {
        auto [x, y] = aligned(a, b);
        for (auto& [m, c] : y.terms_) x.add_term(m, -c);
        return x;
    }

    Polynomial operator-() const {
        Polynomial r(vars_);
        for (auto& [m, c] : terms_) r.terms_[m] = -c;
        return r;
    }

    friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
        auto [x, y] = aligned(a, b);
        Polynomial r(x.vars_);
        for (auto& [ma, ca] : x.terms_)
            for (auto& [mb, cb] : y.terms_) r.add_term(ma.times(mb), ca * cb);
        return r;
    }

    friend Polynomial operator*(const Rational& c, const Polynomial& p) {
        Polynomial r(p.vars_);
        if (c == 0) return r;
        for (auto& [m, pc] : p.terms_) r.terms_[m] = c * pc;
        return r;
    }

    friend Polynomial operator*(const Polynomial& p, const Rational& c) { return c * p; }

    Polynomial& operator+=(const Polynomial& o) { return *this = *this + o; }
    Polynomial& operator-=(const Polynomial& o) { return *this = *this - o; }
    Polynomial& operator*=(const Polynomial& o) { return *this = *this * o; }

    bool operator==(const Polynomial& o) const {
        if (vars_ == o.vars_) return terms_ == o.terms_;
        return (*this - o).is_zero();
    }

    Polynomial pow(unsigned n) const {
        Polynomial r = constant(1, vars_);
        Polynomial base = *this;
        while (n > 0) {
            if (n & 1u) r = r * base;
            base = base * base;
            n >>= 1u;
        }
        return r;
    }

    Polynomial derivative(int var) const {
        Polynomial r(vars_);
        for (auto& [m, c] : terms_) {
            int e = m.exponent(var);
            if (e == 0) continue;
            Monomial nm;
            for (auto& [v, k] : m.powers) {
                if (v == var) {
                    if (k > 1) nm.powers.emplace_back(v, k - 1);
                } else {
                    nm.powers.emplace_back(v, k);
                }
            }
            r.add_term(nm, c * e);
        }
        return r;
    }

    /// Substitutes polynomials for variables. `map` pairs a variable name of
    /// this polynomial with its replacement; unmentioned variables stay.
    Polynomial substitute(const std::vector<std::pair<std::string, Polynomial>>& map) const {
        std::vector<Polynomial> image;
        std::vector<std::string> outvars = vars_;
        for (auto& [name, repl] : map) {
            if (std::find(vars_.begin(), vars_.end(), name) == vars_.end())
                throw std::invalid_argument("substitute: '" + name + "' is not a variable here");
            for (auto& v : repl.vars())
                if (std::find(outvars.begin(), outvars.end(), v) == outvars.end())
                    outvars.push_back(v);
        }
        image.reserve(vars_.size());
        for (std::size_t i = 0; i < vars_.size(); ++i) {
            const std::string& name = vars_[i];
            auto it = std::find_if(map.begin(), map.end(),
                                   [&](auto& kv) { return kv.first == name; });
            if (it == map.end())
                image.push_back(variable(name, outvars));
            else
                image.push_back(it->second.with_vars(outvars));
        }
        Polynomial r(outvars);
        for (auto& [m, c] : terms_) {
            Polynomial t = constant(c, outvars);
            for (auto& [v, e] : m.powers) t = t * image[v].pow(static_cast<unsigned>(e));
            r += t;
        }
        return r;
    }

    Polynomial rename_vars(const std::vector<std::pair<std::string, std::string>>& renames) const {
        std::vector<std::string> nv = vars_;
        for (auto& name : nv) {
            auto it = std::find_if(renames.begin(), renames.end(),
                                   [&](auto& kv) { return kv.first == name; });
            if (it != renames.end()) name = it->second;
        }
        Polynomial r = *this;
        r.vars_ = std::move(nv);
        return r;
    }

    /// Evaluation at a point given in variable-list order.
    double eval(const std::vector<double>& point) const {
        if (point.size() != vars_.size())
            throw std::invalid_argument("eval: point dimension mismatch");
        double acc = 0.0;
        for (auto& [m, c] : terms_) {
            double t = to_double(c);
            for (auto& [v, e] : m.powers) {
                double base = point[v];
                for (int k = 0; k < e; ++k) t *= base;
            }
            acc += t;
        }
        return acc;
    }

    Rational eval_exact(const std::vector<Rational>& point) const {
        if (point.size() != vars_.size())
            throw std::invalid_argument("eval_exact: point dimension mismatch");
        Rational acc = 0;
        for (auto& [m, c] : terms_) {
            Rational t = c;
            for (auto& [v, e] : m.powers)
                for (int k = 0; k < e; ++k) t *= point[v];
            acc += t;
        }
        return acc;
    }

    std::string str() const {
        if (terms_.empty()) return "0";
        std::ostringstream out;
        bool first = true;
        for (auto& [m, c] : terms_) {
            Rational a = c;
            if (first) {
                if (a < 0) {
                    out << "-";
                    a = -a;
                }
            } else {
                out << (a < 0 ? " - " : " + ");
                if (a < 0) a = -a;
            }
            first = false;
            bool unit = (a == 1) && !m.powers.empty();
            if (!unit) out << a;
            bool need_star = !unit;
            for (auto& [v, e] : m.powers) {
                if (need_star) out << "*";
                out << vars_[v];
                if (e > 1) out << "^" << e;
                need_star = true;
            }
        }
        return out.str();
    }

private:
    static std::pair<Polynomial, Polynomial> aligned(const Polynomial& a, const Polynomial& b) {
        if (a.vars_ == b.vars_) return {a, b};
        if (a.vars_.empty()) {
            Polynomial ac = a;
            ac.vars_ = b.vars_;
            return {ac, b};
        }
        if (b.vars_.empty()) {
            Polynomial bc = b;
            bc.vars_ = a.vars_;
            return {a, bc};
        }
        std::vector<std::string> u = a.vars_;
        for (auto& v : b.vars_)
            if (std::find(u.begin(), u.end(), v) == u.end()) u.push_back(v);
        return {a.with_vars(u), b.with_vars(u)};
    }

    std::vector<std::string> vars_;
    TermMap terms_;
};

/// Interval enclosure of p over a box given in variable-list order.
inline Interval eval_on_box(const Polynomial& p, const std::vector<Interval>& box) {
    if (box.size() != p.vars().size())
        throw std::invalid_argument("eval_on_box: box dimension mismatch");
    Interval acc = Interval::point(0.0);
    for (auto& [m, c] : p.terms()) {
        double cd = to_double(c);
        Interval t(detail::down(cd), detail::up(cd));  // conversion may round
        for (auto& [v, e] : m.powers) t = t * pow(box[v], e);
        acc = acc + t;
    }
    return acc;
}

/// Lie derivative of phi along the vector field: sum_i dphi/dx_i * f_i.
/// The field lists one component per variable of phi, in order.
inline Polynomial lie_derivative(const Polynomial& phi, const std::vector<Polynomial>& field) {
    if (field.size() != phi.vars().size())
        throw std::invalid_argument("lie_derivative: field has " + std::to_string(field.size()) +
                                    " components for " + std::to_string(phi.vars().size()) +
                                    " variables");
    Polynomial acc(phi.vars());
    for (std::size_t i = 0; i < field.size(); ++i)
        acc += phi.derivative(static_cast<int>(i)) * field[i];
    return acc;
}

/// Flattened double-precision form for hot evaluation loops (simulation,
/// sampling checks). Built once from the exact polynomial.
class CompiledPoly {
public:
    CompiledPoly() = default;

    explicit CompiledPoly(const Polynomial& p) : nvars_(p.vars().size()) {
        for (auto& [m, c] : p.terms()) {
            Term t;
            t.coeff = to_double(c);
            t.powers.assign(m.powers.begin(), m.powers.end());
            terms_.push_back(std::move(t));
        }
    }

    double eval(const double* x) const {
        double acc = 0.0;
        for (auto& t : terms_) {
            double v = t.coeff;
            for (auto& [var, e] : t.powers) {
                double base = x[var];
                for (int k = 0; k < e; ++k) v *= base;
            }
            acc += v;
        }
        return acc;
    }

    double eval(const std::vector<double>& x) const { return eval(x.data()); }

    std::size_t nvars() const { return nvars_; }

private:
    struct Term {
        double coeff;
        std::vector<std::pair<int, int>> powers;
    };
    std::vector<Term> terms_;
    std::size_t nvars_ = 0;
};

}  // namespace bcert
