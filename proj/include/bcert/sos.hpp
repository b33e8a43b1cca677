#pragma once

// SOS feasibility programs for barrier-certificate synthesis and their
// lowering to block-diagonal SDPs via Gram-matrix lifting.
//
// The continuous encoding asks that
//     -phi - mu . Init,   lambda*phi - L_f(phi) - theta . Inv,   phi - eps - eta . Unsafe
// are all SOS alongside the multipliers themselves; the hybrid encoding adds
// one jump constraint per edge:
//     gamma*phi_l(x) - phi_l'(x') - kappa . Guard(x) - sigma . Reset(x, x').
// Identity resets are compiled over unprimed x with no sigma term.

#include "linexpr.hpp"
#include "polynomial.hpp"
#include "rational.hpp"
#include "system.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace bcert {

struct UnknownInfo {
    std::string owner;  // e.g. "phi[l1]", "mu[l1][0]", "kappa[l1->l2][1]"
    Monomial mono;      // the template monomial this coefficient multiplies
};

class UnknownRegistry {
public:
    int add(std::string owner, Monomial mono) {
        infos_.push_back({std::move(owner), std::move(mono)});
        return static_cast<int>(infos_.size()) - 1;
    }

    int size() const { return static_cast<int>(infos_.size()); }
    const UnknownInfo& info(int id) const { return infos_[static_cast<std::size_t>(id)]; }

    std::vector<int> ids_of(const std::string& owner) const {
        std::vector<int> out;
        for (std::size_t i = 0; i < infos_.size(); ++i)
            if (infos_[i].owner == owner) out.push_back(static_cast<int>(i));
        return out;
    }

    /// Rebuilds the polynomial an owner's unknowns describe, at given values.
    Polynomial assemble(const std::string& owner, const std::vector<Rational>& values,
                        const std::vector<std::string>& vars) const {
        Polynomial p(vars);
        for (std::size_t i = 0; i < infos_.size(); ++i)
            if (infos_[i].owner == owner)
                p.add_term(infos_[i].mono, values[i]);
        return p;
    }

private:
    std::vector<UnknownInfo> infos_;
};

/// Polynomial whose coefficients are affine in the unknowns.
class LinPoly {
public:
    using TermMap = std::map<Monomial, LinExpr, MonomialOrder>;

    LinPoly() = default;
    explicit LinPoly(std::vector<std::string> vars) : vars_(std::move(vars)) {}

    static LinPoly from_const(const Polynomial& p) {
        LinPoly r(p.vars());
        for (auto& [m, c] : p.terms()) r.terms_[m] = LinExpr(c);
        return r;
    }

    /// Complete polynomial template of the given total degree: one fresh
    /// unknown per monomial of degree <= deg.
    static LinPoly make_template(UnknownRegistry& reg, const std::string& owner,
                                 const std::vector<std::string>& vars, int deg) {
        LinPoly r(vars);
        std::vector<Monomial> monos = monomials_up_to(static_cast<int>(vars.size()), deg);
        for (auto& m : monos) {
            int id = reg.add(owner, m);
            r.terms_[m] = LinExpr::unknown(id);
        }
        return r;
    }

    static std::vector<Monomial> monomials_up_to(int nvars, int deg) {
        std::vector<Monomial> out;
        Monomial cur;
        enumerate(nvars, deg, 0, cur, out, false);
        return out;
    }

    static std::vector<Monomial> monomials_exactly(int nvars, int deg) {
        std::vector<Monomial> out;
        Monomial cur;
        enumerate(nvars, deg, 0, cur, out, true);
        return out;
    }

    const std::vector<std::string>& vars() const { return vars_; }
    const TermMap& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }

    int degree() const {
        int d = 0;
        for (auto& [m, e] : terms_) d = std::max(d, m.degree());
        return d;
    }

    void add_term(const Monomial& m, const LinExpr& e) {
        if (e.is_zero()) return;
        auto [it, inserted] = terms_.try_emplace(m, e);
        if (!inserted) {
            it->second += e;
            if (it->second.is_zero()) terms_.erase(it);
        }
    }

    LinPoly& operator+=(const LinPoly& o) {
        check_same_vars(o);
        for (auto& [m, e] : o.terms_) add_term(m, e);
        return *this;
    }

    LinPoly& operator-=(const LinPoly& o) {
        check_same_vars(o);
        for (auto& [m, e] : o.terms_) add_term(m, -e);
        return *this;
    }

    friend LinPoly operator*(const Rational& c, const LinPoly& p) {
        LinPoly r(p.vars_);
        if (c == 0) return r;
        for (auto& [m, e] : p.terms_) r.terms_[m] = c * e;
        return r;
    }

    /// Product with a constant (known-coefficient) polynomial; dependence on
    /// unknowns stays affine. Variable lists are unified by name.
    friend LinPoly operator*(const LinPoly& p, const Polynomial& q) {
        std::vector<std::string> u = p.vars_;
        for (auto& v : q.vars())
            if (std::find(u.begin(), u.end(), v) == u.end()) u.push_back(v);
        LinPoly pa = p.with_vars(u);
        Polynomial qa = q.with_vars(u);
        LinPoly r(u);
        for (auto& [mp, e] : pa.terms_)
            for (auto& [mq, c] : qa.terms()) r.add_term(mp.times(mq), c * e);
        return r;
    }

    LinPoly derivative(int var) const {
        LinPoly r(vars_);
        for (auto& [m, e] : terms_) {
            int ex = m.exponent(var);
            if (ex == 0) continue;
            Monomial nm;
            for (auto& [v, k] : m.powers) {
                if (v == var) {
                    if (k > 1) nm.powers.emplace_back(v, k - 1);
                } else {
                    nm.powers.emplace_back(v, k);
                }
            }
            r.add_term(nm, Rational(ex) * e);
        }
        return r;
    }

    /// Reinterprets over a larger variable list (matching by name).
    LinPoly with_vars(const std::vector<std::string>& newvars) const {
        if (newvars == vars_) return *this;
        std::vector<int> remap(vars_.size(), -1);
        for (std::size_t i = 0; i < vars_.size(); ++i) {
            auto it = std::find(newvars.begin(), newvars.end(), vars_[i]);
            if (it == newvars.end())
                throw std::invalid_argument("with_vars: variable '" + vars_[i] + "' missing");
            remap[i] = static_cast<int>(it - newvars.begin());
        }
        LinPoly out(newvars);
        for (auto& [m, e] : terms_) {
            Monomial nm;
            for (auto& [v, k] : m.powers) nm.powers.emplace_back(remap[v], k);
            std::sort(nm.powers.begin(), nm.powers.end());
            out.add_term(nm, e);
        }
        return out;
    }

    LinPoly rename_vars(const std::vector<std::pair<std::string, std::string>>& renames) const {
        std::vector<std::string> nv = vars_;
        for (auto& name : nv) {
            auto it = std::find_if(renames.begin(), renames.end(),
                                   [&](auto& kv) { return kv.first == name; });
            if (it != renames.end()) name = it->second;
        }
        LinPoly r = *this;
        r.vars_ = std::move(nv);
        return r;
    }

    /// Substitutes numeric unknown values, yielding an ordinary polynomial.
    Polynomial instantiate(const std::vector<Rational>& values) const {
        Polynomial p(vars_);
        for (auto& [m, e] : terms_) p.add_term(m, e.eval_exact(values));
        return p;
    }

private:
    static void enumerate(int nvars, int budget, int var, Monomial& cur,
                          std::vector<Monomial>& out, bool exact) {
        if (var == nvars) {
            if (!exact || budget == 0) out.push_back(cur);
            return;
        }
        for (int e = 0; e <= budget; ++e) {
            if (e > 0) cur.powers.emplace_back(var, e);
            enumerate(nvars, budget - e, var + 1, cur, out, exact);
            if (e > 0) cur.powers.pop_back();
        }
    }

    void check_same_vars(const LinPoly& o) const {
        if (vars_ != o.vars_)
            throw std::invalid_argument("LinPoly arithmetic requires identical variable lists");
    }

    std::vector<std::string> vars_;
    TermMap terms_;
};

enum class ConstraintKind { init, flow, jump, unsafe, multiplier };

inline const char* to_string(ConstraintKind k) {
    switch (k) {
        case ConstraintKind::init: return "init";
        case ConstraintKind::flow: return "flow";
        case ConstraintKind::jump: return "jump";
        case ConstraintKind::unsafe: return "unsafe";
        case ConstraintKind::multiplier: return "multiplier";
    }
    return "?";
}

struct SosConstraint {
    LinPoly expr;
    ConstraintKind kind;
    std::string tag;  // "init[l1]", "jump[l1->l2]", "multiplier[mu[l1][0]]", ...

    // filled by eliminate_odd_top
    std::vector<LinExpr> zero_rows;  // unknown combinations forced to zero
    int effective_degree = -1;       // even top degree after elimination
    bool degenerate = false;         // support vanished entirely
};

struct ProgramSpec {
    std::map<std::string, Rational> lambda;  // mode id -> lambda_l
    std::map<std::string, Rational> gamma;   // "src->tgt" -> gamma, default 1
    Rational epsilon = Rational(1, 100);
    std::map<std::string, int> phi_degree;   // mode id -> template degree
    // Extra degree granted to the multiplier products over the minimum the
    // degree rule demands (products at least reach deg phi).
    int multiplier_headroom = 0;
};

struct SosProgram {
    std::vector<SosConstraint> constraints;
    UnknownRegistry unknowns;
    ProgramSpec spec;
    std::vector<std::string> vars;       // system variables
    std::vector<std::string> jump_vars;  // vars + primed
    bool eliminated = false;
};

inline int even_ceil(int k) { return k % 2 == 0 ? k : k + 1; }

inline std::string edge_key(const Transition& t) { return t.source + "->" + t.target; }

/// Builds the SOS feasibility program for the hybrid exponential condition.
/// Multiplier template degrees are chosen so each product reaches the degree
/// of the phi part, rounded up to even (multipliers must be SOS).
inline SosProgram build_program(const HybridSystem& H, const ProgramSpec& spec) {
    SosProgram prog;
    prog.spec = spec;
    prog.vars = H.vars;
    prog.jump_vars = H.jump_vars();

    for (auto& m : H.modes) {
        auto it = spec.phi_degree.find(m.id);
        if (it == spec.phi_degree.end())
            throw std::invalid_argument("no phi degree given for mode '" + m.id + "'");
        if (it->second < 1)
            throw std::invalid_argument("phi degree must be >= 1 for mode '" + m.id + "'");
        if (spec.lambda.find(m.id) == spec.lambda.end())
            throw std::invalid_argument("no lambda given for mode '" + m.id + "'");
    }
    if (spec.epsilon <= 0) throw std::invalid_argument("epsilon must be positive");
    for (auto& [e, g] : spec.gamma)
        if (g < 0) throw std::invalid_argument("gamma must be nonnegative on edge " + e);

    std::map<std::string, LinPoly> phi;
    for (auto& m : H.modes)
        phi.emplace(m.id, LinPoly::make_template(prog.unknowns, "phi[" + m.id + "]", H.vars,
                                                 spec.phi_degree.at(m.id)));

    // a multiplier vector: one template per defining inequality of `region`
    auto add_multiplied = [&](LinPoly& expr, const std::string& owner_base,
                              const std::vector<Polynomial>& region,
                              const std::vector<std::string>& tvars, int target_deg) {
        for (std::size_t i = 0; i < region.size(); ++i) {
            std::string owner = owner_base + "[" + std::to_string(i) + "]";
            int mdeg = even_ceil(std::max(0, target_deg - region[i].total_degree()));
            LinPoly mult = LinPoly::make_template(prog.unknowns, owner, tvars, mdeg);
            expr -= (mult * region[i]).with_vars(expr.vars());
            // the multiplier's own SOS constraint stays in its template
            // variables, which keeps its Gram block small
            prog.constraints.push_back({mult, ConstraintKind::multiplier,
                                        "multiplier[" + owner + "]"});
        }
    };

    for (auto& m : H.modes) {
        const int d = spec.phi_degree.at(m.id);
        const Rational lam = spec.lambda.at(m.id);

        if (!m.init.polys.empty()) {
            LinPoly expr = Rational(-1) * phi.at(m.id);
            add_multiplied(expr, "mu[" + m.id + "]", m.init.polys, H.vars,
                           d + spec.multiplier_headroom);
            // expr mutated by add_multiplied: move constraint in front of its multipliers
            prog.constraints.insert(
                prog.constraints.end() - static_cast<long>(m.init.polys.size()),
                {expr, ConstraintKind::init, "init[" + m.id + "]"});
        }

        {
            LinPoly lie(H.vars);
            for (std::size_t i = 0; i < m.field.size(); ++i)
                lie += phi.at(m.id).derivative(static_cast<int>(i)) * m.field[i];
            LinPoly expr = lam * phi.at(m.id);
            expr -= lie;
            int flow_deg = std::max(expr.degree(), d);
            add_multiplied(expr, "theta[" + m.id + "]", m.invariant.polys, H.vars, flow_deg);
            prog.constraints.insert(
                prog.constraints.end() - static_cast<long>(m.invariant.polys.size()),
                {expr, ConstraintKind::flow, "flow[" + m.id + "]"});
        }

        if (!m.unsafe.polys.empty()) {
            LinPoly expr = phi.at(m.id);
            expr -= LinPoly::from_const(Polynomial::constant(spec.epsilon, H.vars));
            add_multiplied(expr, "eta[" + m.id + "]", m.unsafe.polys, H.vars,
                           d + spec.multiplier_headroom);
            prog.constraints.insert(
                prog.constraints.end() - static_cast<long>(m.unsafe.polys.size()),
                {expr, ConstraintKind::unsafe, "unsafe[" + m.id + "]"});
        }
    }

    for (auto& t : H.transitions) {
        const std::string ek = edge_key(t);
        Rational gam = spec.gamma.count(ek) ? spec.gamma.at(ek) : Rational(1);
        int dmax = std::max(spec.phi_degree.at(t.source), spec.phi_degree.at(t.target));
        std::size_t mult_count = 0;
        LinPoly expr;
        if (t.identity_reset) {
            // post-state equals pre-state: compile over unprimed x, no sigma
            expr = gam * phi.at(t.source);
            expr -= phi.at(t.target);
            add_multiplied(expr, "kappa[" + ek + "]", t.guard.polys, H.vars, dmax);
            mult_count = t.guard.polys.size();
        } else {
            std::vector<std::pair<std::string, std::string>> to_primed;
            for (auto& v : H.vars) to_primed.emplace_back(v, v + "'");
            expr = (gam * phi.at(t.source)).with_vars(prog.jump_vars);
            expr -= phi.at(t.target).rename_vars(to_primed).with_vars(prog.jump_vars);
            add_multiplied(expr, "kappa[" + ek + "]", t.guard.polys, H.vars, dmax);
            std::vector<std::string> primed;
            for (auto& v : H.vars) primed.push_back(v + "'");
            add_multiplied(expr, "sigma[" + ek + "]", t.reset.polys, primed, dmax);
            mult_count = t.guard.polys.size() + t.reset.polys.size();
        }
        prog.constraints.insert(prog.constraints.end() - static_cast<long>(mult_count),
                                {expr, ConstraintKind::jump, "jump[" + ek + "]"});
    }

    return prog;
}

/// An SOS polynomial has even degree, so any constraint whose top-degree
/// homogeneous part is odd can only be satisfiable if that part vanishes
/// identically. This records the vanishing conditions as linear rows over the
/// unknowns (gram_lift emits them as equality rows; no symbolic substitution)
/// and lowers the constraint's effective degree until it is even.
inline SosProgram eliminate_odd_top(SosProgram prog) {
    for (auto& c : prog.constraints) {
        std::set<Monomial, MonomialOrder> alive;
        for (auto& [m, e] : c.expr.terms()) alive.insert(m);
        for (;;) {
            int top = 0;
            for (auto& m : alive) top = std::max(top, m.degree());
            if (alive.empty()) {
                c.degenerate = true;
                c.effective_degree = 0;
                break;
            }
            if (top % 2 == 0) {
                c.effective_degree = top;
                break;
            }
            for (auto it = alive.begin(); it != alive.end();) {
                if (it->degree() == top) {
                    c.zero_rows.push_back(c.expr.terms().at(*it));
                    it = alive.erase(it);
                } else {
                    ++it;
                }
            }
        }
    }
    prog.eliminated = true;
    return prog;
}

/// Block-diagonal SDP with free variables:
///   find X_b >= 0 (b = 1..nblocks), u in R^num_free
///   s.t. for each row r:  sum_b <A_rb, X_b> + g_r . u = rhs_r
///   maximizing <C, X> (the uniform-slack objective installed by gram_lift).
struct SdpProblem {
    struct Entry {
        int block, i, j;  // i <= j; A_ij = A_ji = c
        double c;
    };
    struct Row {
        std::vector<Entry> mat;
        std::vector<std::pair<int, double>> lin;  // (free var index, coefficient)
        double rhs = 0.0;
        std::string label;
    };
    struct BlockInfo {
        std::string tag;  // constraint tag, or "slack:t" / "slack:cap"
        std::vector<Monomial> basis;
        std::vector<std::string> basis_vars;
    };

    std::vector<int> block_dims;
    std::vector<BlockInfo> block_info;
    int num_free = 0;
    std::vector<Row> rows;
    std::vector<Entry> obj_mat;
    std::vector<std::pair<int, double>> obj_lin;  // objective weight on free vars
    int slack_block = -1, cap_block = -1;
    // set when a row reduces to "0 = nonzero constant" at lift time
    bool structurally_infeasible = false;
    std::string infeasibility_reason;
};

struct GramLiftOptions {
    int basis_cap = 2000;  // max monomials per block
};

/// Lowers an (eliminated) SOS program to the SDP above. Per constraint of
/// effective degree 2k the monomial basis is every monomial of degree <= k in
/// the constraint's variables; when the surviving support is homogeneous the
/// basis keeps degree exactly k. Adds the uniform slack t: each Gram block is
/// X_b + t*I with t a 1x1 PSD variable capped by t + s = 1, objective max t.
inline SdpProblem gram_lift(const SosProgram& prog, const GramLiftOptions& opts = {}) {
    if (!prog.eliminated)
        throw std::logic_error("gram_lift: run eliminate_odd_top first");
    SdpProblem sdp;
    sdp.num_free = prog.unknowns.size();

    auto add_zero_row = [&](const LinExpr& e, const std::string& label) {
        if (e.is_zero()) return;
        if (e.coeffs.empty()) {
            sdp.structurally_infeasible = true;
            sdp.infeasibility_reason =
                label + ": constant " + e.constant.str() +
                " must vanish but no unknown appears in it (degree arithmetic leaves an "
                "odd-degree term no template can cancel)";
            return;
        }
        SdpProblem::Row row;
        for (auto& [id, c] : e.coeffs) row.lin.emplace_back(id, to_double(c));
        row.rhs = -to_double(e.constant);
        row.label = label;
        sdp.rows.push_back(std::move(row));
    };

    for (auto& c : prog.constraints) {
        for (std::size_t zi = 0; zi < c.zero_rows.size(); ++zi)
            add_zero_row(c.zero_rows[zi], c.tag + ":odd[" + std::to_string(zi) + "]");
        if (c.degenerate) continue;

        const int D = c.effective_degree;
        if (D % 2 != 0) throw std::logic_error("gram_lift: odd effective degree on " + c.tag);
        const int k = D / 2;

        // support that survives elimination
        std::set<Monomial, MonomialOrder> support;
        bool homogeneous = true;
        for (auto& [m, e] : c.expr.terms()) {
            if (m.degree() > D) continue;  // zeroed by an elimination row
            support.insert(m);
            if (m.degree() != D) homogeneous = false;
        }

        const int nv = static_cast<int>(c.expr.vars().size());
        std::vector<Monomial> basis = homogeneous ? LinPoly::monomials_exactly(nv, k)
                                                  : LinPoly::monomials_up_to(nv, k);
        if (static_cast<int>(basis.size()) > opts.basis_cap)
            throw std::runtime_error("gram_lift: basis for " + c.tag + " needs " +
                                     std::to_string(basis.size()) + " monomials, cap is " +
                                     std::to_string(opts.basis_cap));

        const int b = static_cast<int>(sdp.block_dims.size());
        sdp.block_dims.push_back(static_cast<int>(basis.size()));
        sdp.block_info.push_back({c.tag, basis, c.expr.vars()});

        std::map<Monomial, SdpProblem::Row, MonomialOrder> rows;
        for (std::size_t i = 0; i < basis.size(); ++i)
            for (std::size_t j = i; j < basis.size(); ++j) {
                Monomial m = basis[i].times(basis[j]);
                rows[m].mat.push_back(
                    {b, static_cast<int>(i), static_cast<int>(j), 1.0});
            }
        for (auto& m : support) {
            const LinExpr& e = c.expr.terms().at(m);
            auto it = rows.find(m);
            if (it == rows.end()) {
                // monomial in the constraint that no basis product reaches:
                // its affine expression must vanish
                add_zero_row(e, c.tag + ":unreachable");
                continue;
            }
            for (auto& [id, coef] : e.coeffs) it->second.lin.emplace_back(id, -to_double(coef));
            it->second.rhs = to_double(e.constant);
        }
        for (auto& [m, row] : rows) {
            SdpProblem::Row r = row;
            Polynomial mono_poly(c.expr.vars());
            mono_poly.add_term(m, 1);
            r.label = c.tag + ":" + mono_poly.str();
            sdp.rows.push_back(std::move(r));
        }
    }

    // uniform slack: M_b = X_b + t I, t >= 0 (1x1 block), capped by t + s = 1
    sdp.slack_block = static_cast<int>(sdp.block_dims.size());
    sdp.block_dims.push_back(1);
    sdp.block_info.push_back({"slack:t", {Monomial{}}, {}});
    sdp.cap_block = static_cast<int>(sdp.block_dims.size());
    sdp.block_dims.push_back(1);
    sdp.block_info.push_back({"slack:cap", {Monomial{}}, {}});
    for (auto& row : sdp.rows) {
        double trace_sum = 0.0;
        for (auto& e : row.mat)
            if (e.i == e.j) trace_sum += e.c;
        if (trace_sum != 0.0) row.mat.push_back({sdp.slack_block, 0, 0, trace_sum});
    }
    {
        SdpProblem::Row cap;
        cap.mat.push_back({sdp.slack_block, 0, 0, 1.0});
        cap.mat.push_back({sdp.cap_block, 0, 0, 1.0});
        cap.rhs = 1.0;
        cap.label = "slack:cap";
        sdp.rows.push_back(std::move(cap));
    }
    sdp.obj_mat.push_back({sdp.slack_block, 0, 0, 1.0});
    return sdp;
}

/// Line-oriented dump of an SdpProblem for external cross-checks.
inline std::string dump_sdp(const SdpProblem& p) {
    std::ostringstream out;
    out.precision(17);
    out << "SDPDUMP v1\n";
    out << "blocks " << p.block_dims.size() << "\n";
    for (std::size_t b = 0; b < p.block_dims.size(); ++b)
        out << p.block_dims[b] << (b + 1 < p.block_dims.size() ? ' ' : '\n');
    if (p.block_dims.empty()) out << "\n";
    out << "free " << p.num_free << "\n";
    out << "objmat " << p.obj_mat.size() << "\n";
    for (auto& e : p.obj_mat) out << e.block << " " << e.i << " " << e.j << " " << e.c << "\n";
    out << "objlin " << p.obj_lin.size() << "\n";
    for (auto& [idx, c] : p.obj_lin) out << idx << " " << c << "\n";
    out << "rows " << p.rows.size() << "\n";
    for (auto& r : p.rows) {
        out << "row " << (r.label.empty() ? "-" : r.label) << " " << r.rhs << " " << r.mat.size()
            << " " << r.lin.size() << "\n";
        for (auto& e : r.mat)
            out << e.block << " " << e.i << " " << e.j << " " << e.c << "\n";
        for (auto& [idx, c] : r.lin) out << idx << " " << c << "\n";
    }
    return out.str();
}

inline SdpProblem parse_sdp_dump(const std::string& text) {
    std::istringstream in(text);
    std::string word;
    auto need = [&](const std::string& expect) {
        in >> word;
        if (word != expect)
            throw std::runtime_error("SDPDUMP parse: expected '" + expect + "', got '" + word +
                                     "'");
    };
    need("SDPDUMP");
    need("v1");
    need("blocks");
    std::size_t nb;
    in >> nb;
    SdpProblem p;
    p.block_dims.resize(nb);
    for (auto& d : p.block_dims) in >> d;
    p.block_info.resize(nb);
    need("free");
    in >> p.num_free;
    need("objmat");
    std::size_t cnt;
    in >> cnt;
    for (std::size_t i = 0; i < cnt; ++i) {
        SdpProblem::Entry e;
        in >> e.block >> e.i >> e.j >> e.c;
        p.obj_mat.push_back(e);
    }
    need("objlin");
    in >> cnt;
    for (std::size_t i = 0; i < cnt; ++i) {
        int idx;
        double c;
        in >> idx >> c;
        p.obj_lin.emplace_back(idx, c);
    }
    need("rows");
    std::size_t nr;
    in >> nr;
    for (std::size_t r = 0; r < nr; ++r) {
        need("row");
        SdpProblem::Row row;
        std::size_t nm, nl;
        in >> row.label >> row.rhs >> nm >> nl;
        if (row.label == "-") row.label.clear();
        for (std::size_t i = 0; i < nm; ++i) {
            SdpProblem::Entry e;
            in >> e.block >> e.i >> e.j >> e.c;
            row.mat.push_back(e);
        }
        for (std::size_t i = 0; i < nl; ++i) {
            int idx;
            double c;
            in >> idx >> c;
            row.lin.emplace_back(idx, c);
        }
        p.rows.push_back(std::move(row));
    }
    if (!in) throw std::runtime_error("SDPDUMP parse: truncated input");
    return p;
}
}  // namespace bcert
