#pragma once

// Independent certificate verification. Tier A rebuilds every sum-of-squares
// identity from the stored polynomials in exact rational arithmetic and
// compares it against the stored Gram matrix; Tier B samples the semantic
// conditions over a bounding box. A certificate is only trusted when both
// tiers pass. Trajectory simulation (plain RK4, plus a hybrid executor with
// guard bisection) provides a third, dynamics-level cross-check.

#include "certificate.hpp"
#include "sdp.hpp"
#include "sos.hpp"
#include "system.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace bcert {

struct CheckOptions {
    double coeff_tol = 1e-6;     // tier A: max |residual coefficient|
    double eig_tol = 1e-7;       // tier A: min Gram eigenvalue >= -eig_tol
    double sample_slack = 1e-6;  // tier B: allowed sign violation
    int samples = 10000;         // tier B: interior points per condition
    double box_halfwidth = 10.0;
    std::uint64_t seed = 1;
};

struct ConstraintCheck {
    std::string tag;
    double coeff_residual = 0.0;
    double min_gram_eig = 0.0;
    bool pass = false;
    std::string note;
};

struct SampleCheck {
    std::string condition;
    long samples = 0;
    double worst = 0.0;  // largest violation seen; <= slack passes
    std::vector<double> witness;
    bool pass = false;
    std::string note;
};

struct VerificationReport {
    std::vector<ConstraintCheck> constraints;
    std::vector<SampleCheck> conditions;
    bool tier_a = false;
    bool tier_b = false;
    bool pass() const { return tier_a && tier_b; }
};

namespace detail {

inline ProgramSpec spec_of(const Certificate& cert) {
    ProgramSpec spec;
    spec.lambda = cert.lambda;
    spec.gamma = cert.gamma;
    spec.epsilon = cert.epsilon;
    spec.phi_degree = cert.degree;
    spec.multiplier_headroom = cert.multiplier_headroom;
    return spec;
}

/// Values for every template unknown, looked up in the certificate by owner
/// and monomial. Unknown owners the certificate does not mention evaluate to
/// zero (a fully pruned multiplier is stored as the zero polynomial or not at
/// all).
inline std::vector<Rational> unknown_values(const SosProgram& prog, const HybridSystem& H,
                                            const Certificate& cert) {
    std::vector<std::string> primed;
    for (auto& v : H.vars) primed.push_back(v + "'");

    std::vector<Rational> vals(static_cast<std::size_t>(prog.unknowns.size()));
    for (int id = 0; id < prog.unknowns.size(); ++id) {
        const auto& info = prog.unknowns.info(id);
        const Polynomial* src = nullptr;
        const std::vector<std::string>* tvars = &H.vars;
        if (info.owner.rfind("phi[", 0) == 0) {
            std::string loc = info.owner.substr(4, info.owner.size() - 5);
            auto it = cert.phi.find(loc);
            if (it == cert.phi.end())
                throw std::invalid_argument("certificate has no barrier for location '" + loc +
                                            "'");
            src = &it->second;
        } else {
            if (info.owner.rfind("sigma[", 0) == 0) tvars = &primed;
            auto it = cert.multipliers.find(info.owner);
            if (it != cert.multipliers.end()) src = &it->second;
        }
        if (!src) continue;
        if (src->vars() != *tvars)
            throw std::invalid_argument("certificate polynomial '" + info.owner +
                                        "' is declared over the wrong variable list");
        vals[static_cast<std::size_t>(id)] = src->coefficient(info.mono);
    }
    return vals;
}

inline Polynomial gram_polynomial(const Certificate::Gram& g) {
    Polynomial q(g.basis_vars);
    for (int i = 0; i < g.mat.rows(); ++i)
        for (int j = 0; j < g.mat.cols(); ++j)
            q.add_term(g.basis[static_cast<std::size_t>(i)].times(
                           g.basis[static_cast<std::size_t>(j)]),
                       rational_from_double(g.mat(i, j)));
    return q;
}

}  // namespace detail

/// Tier A: for every constraint of the induced program, the polynomial
/// rebuilt from the certificate must match v^T M v of the stored Gram matrix
/// coefficient-by-coefficient, and M must be positive semidefinite up to
/// tolerance. All reconstruction arithmetic is exact; doubles appear only in
/// the final comparison.
inline std::vector<ConstraintCheck> check_sos_identities(const HybridSystem& H,
                                                         const Certificate& cert,
                                                         const CheckOptions& opts = {}) {
    if (cert.vars != H.vars)
        throw std::invalid_argument("certificate variable list does not match the system");
    SosProgram prog = eliminate_odd_top(build_program(H, detail::spec_of(cert)));
    std::vector<Rational> vals = detail::unknown_values(prog, H, cert);

    std::vector<ConstraintCheck> out;
    for (auto& c : prog.constraints) {
        ConstraintCheck chk;
        chk.tag = c.tag;

        Polynomial built(c.expr.vars());
        for (auto& [m, e] : c.expr.terms()) built.add_term(m, e.eval_exact(vals));

        const Certificate::Gram* g = cert.find_gram(c.tag);
        Polynomial diff = built;
        if (g && g->mat.rows() > 0) {
            diff = built - detail::gram_polynomial(*g);
            chk.min_gram_eig = detail::sym_min_eig(g->mat);
        } else if (!built.is_zero()) {
            chk.note = "no Gram matrix stored for this constraint";
        }
        double res = 0.0;
        for (auto& [m, co] : diff.terms()) res = std::max(res, std::abs(to_double(co)));
        chk.coeff_residual = res;
        chk.pass = res <= opts.coeff_tol && chk.min_gram_eig >= -opts.eig_tol;
        out.push_back(std::move(chk));
    }
    return out;
}

/// Tier B: seeded sampling of the semantic conditions inside the bounding box.
/// A region that is provably (or apparently) empty inside the box yields a
/// vacuous pass with the sampler's diagnostic preserved.
inline std::vector<SampleCheck> check_by_sampling(const HybridSystem& H, const Certificate& cert,
                                                  const CheckOptions& opts = {}) {
    if (cert.vars != H.vars)
        throw std::invalid_argument("certificate variable list does not match the system");
    const int n = H.dim();
    const double slack = opts.sample_slack;
    std::vector<SampleCheck> out;
    std::uint64_t seed = opts.seed;

    auto run_region = [&](const std::string& cond, const SemialgebraicSet& set,
                          const std::vector<Interval>& box, auto violation) {
        SampleCheck chk;
        chk.condition = cond;
        SampleResult sr = sample(set, box, opts.samples, seed++);
        chk.samples = static_cast<long>(sr.points.size());
        if (sr.points.empty()) {
            chk.note = sr.note.empty() ? "no sample points" : sr.note;
            chk.pass = true;  // vacuous: nothing to check inside the box
            out.push_back(std::move(chk));
            return;
        }
        chk.worst = -std::numeric_limits<double>::infinity();
        for (auto& x : sr.points) {
            double v = violation(x);
            if (v > chk.worst) {
                chk.worst = v;
                chk.witness = x;
            }
        }
        chk.pass = chk.worst <= slack;
        out.push_back(std::move(chk));
    };

    const auto box_n = uniform_box(-opts.box_halfwidth, opts.box_halfwidth, n);
    for (auto& m : H.modes) {
        auto pit = cert.phi.find(m.id);
        if (pit == cert.phi.end())
            throw std::invalid_argument("certificate has no barrier for location '" + m.id + "'");
        const Polynomial& phi = pit->second;
        const Rational lam = cert.lambda.count(m.id) ? cert.lambda.at(m.id) : Rational(0);
        Polynomial flow_poly = lie_derivative(phi, m.field) - lam * phi;
        const double eps = to_double(cert.epsilon);

        if (!m.init.polys.empty())
            run_region("init[" + m.id + "]", m.init, box_n,
                       [&](const std::vector<double>& x) { return phi.eval(x); });

        if (m.invariant.polys.empty()) {
            // invariant-free flow condition: plain uniform sampling of the box
            SampleCheck chk;
            chk.condition = "flow[" + m.id + "]";
            Rng rng(seed++);
            chk.worst = -std::numeric_limits<double>::infinity();
            std::vector<double> x(static_cast<std::size_t>(n));
            for (int s = 0; s < opts.samples; ++s) {
                for (auto& xi : x) xi = rng.uniform(-opts.box_halfwidth, opts.box_halfwidth);
                double v = flow_poly.eval(x);
                if (v > chk.worst) {
                    chk.worst = v;
                    chk.witness = x;
                }
            }
            chk.samples = opts.samples;
            chk.pass = chk.worst <= slack;
            out.push_back(std::move(chk));
        } else {
            run_region("flow[" + m.id + "]", m.invariant, box_n,
                       [&](const std::vector<double>& x) { return flow_poly.eval(x); });
        }

        if (!m.unsafe.polys.empty())
            run_region("unsafe[" + m.id + "]", m.unsafe, box_n,
                       [&](const std::vector<double>& x) { return eps - phi.eval(x); });
    }

    for (auto& t : H.transitions) {
        const std::string ek = edge_key(t);
        const Polynomial& phis = cert.phi.at(t.source);
        const Polynomial& phit = cert.phi.at(t.target);
        const double gam =
            to_double(cert.gamma.count(ek) ? cert.gamma.at(ek) : Rational(1));
        if (t.identity_reset) {
            run_region("jump[" + ek + "]", t.guard, box_n, [&](const std::vector<double>& x) {
                return phit.eval(x) - gam * phis.eval(x);
            });
        } else {
            // joint sampling of guard(x) and reset(x, x') over the doubled box
            SemialgebraicSet joint;
            const auto jv = H.jump_vars();
            for (auto& p : t.guard.polys) joint.polys.push_back(p.with_vars(jv));
            for (auto& p : t.reset.polys) joint.polys.push_back(p);
            run_region("jump[" + ek + "]", joint,
                       uniform_box(-opts.box_halfwidth, opts.box_halfwidth, 2 * n),
                       [&](const std::vector<double>& xy) {
                           std::vector<double> x(xy.begin(), xy.begin() + n);
                           std::vector<double> xp(xy.begin() + n, xy.end());
                           return phit.eval(xp) - gam * phis.eval(x);
                       });
        }
    }
    return out;
}

inline VerificationReport full_check(const HybridSystem& H, const Certificate& cert,
                                     const CheckOptions& opts = {}) {
    VerificationReport rep;
    rep.constraints = check_sos_identities(H, cert, opts);
    rep.tier_a = true;
    for (auto& c : rep.constraints) rep.tier_a = rep.tier_a && c.pass;
    rep.conditions = check_by_sampling(H, cert, opts);
    rep.tier_b = true;
    for (auto& c : rep.conditions) rep.tier_b = rep.tier_b && c.pass;
    return rep;
}

inline nlohmann::json report_to_json(const VerificationReport& rep) {
    nlohmann::json doc;
    doc["tier_a"] = rep.tier_a;
    doc["tier_b"] = rep.tier_b;
    doc["pass"] = rep.pass();
    doc["constraints"] = nlohmann::json::array();
    for (auto& c : rep.constraints) {
        nlohmann::json jc{{"tag", c.tag},
                          {"coeff_residual", c.coeff_residual},
                          {"min_gram_eig", c.min_gram_eig},
                          {"pass", c.pass}};
        if (!c.note.empty()) jc["note"] = c.note;
        doc["constraints"].push_back(std::move(jc));
    }
    doc["conditions"] = nlohmann::json::array();
    for (auto& c : rep.conditions) {
        nlohmann::json jc{{"condition", c.condition},
                          {"samples", c.samples},
                          {"worst_violation", c.worst},
                          {"pass", c.pass}};
        if (!c.witness.empty()) jc["witness"] = c.witness;
        if (!c.note.empty()) jc["note"] = c.note;
        doc["conditions"].push_back(std::move(jc));
    }
    return doc;
}

// ---------------------------------------------------------------------------
// Trajectory machinery

struct Trajectory {
    std::vector<double> t;
    std::vector<std::vector<double>> x;
    bool diverged = false;
};

namespace detail {

inline std::vector<double> field_at(const std::vector<Polynomial>& f,
                                    const std::vector<double>& x) {
    std::vector<double> dx(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) dx[i] = f[i].eval(x);
    return dx;
}

inline std::vector<double> rk4_step(const std::vector<Polynomial>& f,
                                    const std::vector<double>& x, double h) {
    const std::size_t n = x.size();
    std::vector<double> k1 = field_at(f, x), tmp(n);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
    std::vector<double> k2 = field_at(f, tmp);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
    std::vector<double> k3 = field_at(f, tmp);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * k3[i];
    std::vector<double> k4 = field_at(f, tmp);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

inline bool overflowed(const std::vector<double>& x) {
    for (double v : x)
        if (!std::isfinite(v) || std::abs(v) > 1e8) return true;
    return false;
}

}  // namespace detail

/// Fixed-step classical Runge-Kutta integration of one mode's field. Stops
/// early (flagged) when the state exceeds the overflow guard.
inline Trajectory simulate_continuous(const HybridSystem& H, const std::string& mode,
                                      std::vector<double> x0, double T, double h) {
    if (h <= 0 || T <= 0) throw std::invalid_argument("simulate_continuous: need h > 0, T > 0");
    const Mode& m = H.mode(mode);
    Trajectory traj;
    traj.t.push_back(0.0);
    traj.x.push_back(x0);
    std::vector<double> x = std::move(x0);
    const long steps = static_cast<long>(std::ceil(T / h - 1e-12));
    for (long s = 0; s < steps; ++s) {
        double step = std::min(h, T - static_cast<double>(s) * h);
        x = detail::rk4_step(m.field, x, step);
        traj.t.push_back(std::min(T, static_cast<double>(s + 1) * h));
        traj.x.push_back(x);
        if (detail::overflowed(x)) {
            traj.diverged = true;
            break;
        }
    }
    return traj;
}

/// Largest value of phi(x(t)) - phi(x(0)) e^{lambda t} along the trajectory.
/// Nonpositive (up to tolerance) means the exponential bound held.
inline double check_exponential_bound(const Certificate& cert, const std::string& location,
                                      const Trajectory& traj, double lambda) {
    const Polynomial& phi = cert.phi.at(location);
    if (traj.x.empty()) return 0.0;
    const double phi0 = phi.eval(traj.x.front());
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < traj.x.size(); ++i)
        worst = std::max(worst, phi.eval(traj.x[i]) - phi0 * std::exp(lambda * traj.t[i]));
    return worst;
}

enum class JumpPolicy { eager, uniform_delay };

struct HybridTrajectory {
    struct Segment {
        std::string location;
        std::vector<double> t;
        std::vector<std::vector<double>> x;
    };
    struct Jump {
        double t = 0.0;
        std::string source, target;
        std::vector<double> pre, post;
    };
    std::vector<Segment> segments;
    std::vector<Jump> jumps;
    bool blocked = false;
    bool diverged = false;
    bool zeno_capped = false;
    std::string note;
};

namespace detail {

inline bool guard_holds(const Transition& t, const std::vector<double>& x) {
    return satisfies_all(t.guard, x);
}

/// First time in (0, h] at which `pred` flips to true, resolved by bisection
/// on RK4 partial steps from `x`. Assumes pred false at 0 and true at h.
template <typename Pred>
double bisect_entry(const std::vector<Polynomial>& f, const std::vector<double>& x, double h,
                    Pred pred) {
    double lo = 0.0, hi = h;
    while (hi - lo > 1e-9) {
        double mid = 0.5 * (lo + hi);
        if (pred(rk4_step(f, x, mid)))
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

}  // namespace detail

/// Hybrid executor: RK4 segments, guard entry located by per-step sign change
/// plus bisection, jumps taken eagerly or after a seeded uniform delay while
/// the guard stays enabled. Identity resets keep the state; relational resets
/// draw the post state from the reset set (sampled inside the box). A state
/// that leaves the invariant with no enabled transition blocks the run; jump
/// counts are capped to keep Zeno-like executions finite.
inline HybridTrajectory simulate_hybrid(const HybridSystem& H, const std::string& start_loc,
                                        std::vector<double> x0, double T, double h,
                                        JumpPolicy policy, std::uint64_t seed,
                                        double box_halfwidth = 10.0) {
    if (h <= 0 || T <= 0) throw std::invalid_argument("simulate_hybrid: need h > 0, T > 0");
    constexpr int kMaxJumps = 10000;
    constexpr double kDelayCap = 0.5;  // uniform-delay draw is U(0, kDelayCap)
    const double inv_tol = 1e-6;

    HybridTrajectory out;
    Rng rng(seed);
    int loc = H.mode_index(start_loc);
    if (!H.modes[static_cast<std::size_t>(loc)].init.polys.empty() &&
        !membership(H.modes[static_cast<std::size_t>(loc)].init, x0))
        out.note = "start state is outside Init of its location";

    std::vector<double> x = std::move(x0);
    double t = 0.0;

    out.segments.push_back({H.modes[static_cast<std::size_t>(loc)].id, {t}, {x}});

    // index of the armed transition and its scheduled jump time (uniform-delay)
    int pending = -1;
    double pending_at = 0.0;

    auto do_jump = [&](int tr_idx, double jt, const std::vector<double>& pre) -> bool {
        const Transition& tr = H.transitions[static_cast<std::size_t>(tr_idx)];
        std::vector<double> post = pre;
        if (!tr.identity_reset) {
            // freeze the pre state in the reset relation, then sample the
            // primed coordinates
            std::vector<std::pair<std::string, Polynomial>> fix;
            std::vector<std::string> primed;
            for (std::size_t i = 0; i < H.vars.size(); ++i) {
                fix.emplace_back(H.vars[i],
                                 Polynomial::constant(rational_from_double(pre[i]), {}));
                primed.push_back(H.vars[i] + "'");
            }
            SemialgebraicSet image;
            for (auto& p : tr.reset.polys)
                image.polys.push_back(p.substitute(fix).with_vars(primed));
            SampleResult sr = sample(image, uniform_box(-box_halfwidth, box_halfwidth,
                                                        static_cast<int>(primed.size())),
                                     1, rng.raw());
            if (sr.points.empty()) {
                out.blocked = true;
                out.note = "reset set produced no post state: " + sr.note;
                return false;
            }
            post = sr.points.front();
        }
        out.jumps.push_back({jt, tr.source, tr.target, pre, post});
        loc = H.mode_index(tr.target);
        x = post;
        t = jt;
        out.segments.push_back({tr.target, {t}, {x}});
        pending = -1;
        if (static_cast<int>(out.jumps.size()) >= kMaxJumps) {
            out.zeno_capped = true;
            return false;
        }
        return true;
    };

    auto arm_or_jump = [&](int tr_idx, double jt, const std::vector<double>& pre) -> bool {
        if (policy == JumpPolicy::eager) return do_jump(tr_idx, jt, pre);
        pending = tr_idx;
        pending_at = jt + rng.uniform(0.0, kDelayCap);
        return true;
    };

    // a guard can already hold at the start of a segment
    {
        for (std::size_t i = 0; i < H.transitions.size(); ++i) {
            const Transition& tr = H.transitions[i];
            if (tr.source == H.modes[static_cast<std::size_t>(loc)].id &&
                detail::guard_holds(tr, x)) {
                if (!arm_or_jump(static_cast<int>(i), t, x)) return out;
                break;
            }
        }
    }

    while (t < T - 1e-12) {
        const Mode& m = H.modes[static_cast<std::size_t>(loc)];
        const double step = std::min(h, T - t);
        std::vector<double> x2 = detail::rk4_step(m.field, x, step);

        if (detail::overflowed(x2)) {
            out.diverged = true;
            break;
        }

        bool jumped = false;

        if (pending >= 0) {
            const Transition& tr = H.transitions[static_cast<std::size_t>(pending)];
            if (t + step >= pending_at) {
                double dt = std::max(0.0, pending_at - t);
                std::vector<double> pre = dt > 0 ? detail::rk4_step(m.field, x, dt) : x;
                if (detail::guard_holds(tr, pre)) {
                    if (!do_jump(pending, std::min(pending_at, T), pre)) return out;
                    jumped = true;
                }
            }
            if (!jumped && pending >= 0 && !detail::guard_holds(tr, x2)) {
                // guard about to expire: jump at the last moment it holds
                double exit = detail::bisect_entry(m.field, x, step, [&](const auto& xs) {
                    return !detail::guard_holds(tr, xs);
                });
                double jt = std::max(0.0, exit - 1e-9);
                std::vector<double> pre = jt > 0 ? detail::rk4_step(m.field, x, jt) : x;
                if (detail::guard_holds(tr, pre)) {
                    if (!do_jump(pending, t + jt, pre)) return out;
                    jumped = true;
                } else {
                    pending = -1;  // grazing contact, guard lost
                }
            }
        } else {
            double best_entry = std::numeric_limits<double>::infinity();
            int best_tr = -1;
            for (std::size_t i = 0; i < H.transitions.size(); ++i) {
                const Transition& tr = H.transitions[i];
                if (tr.source != m.id) continue;
                if (!detail::guard_holds(tr, x) && detail::guard_holds(tr, x2)) {
                    double entry = detail::bisect_entry(
                        m.field, x, step,
                        [&](const auto& xs) { return detail::guard_holds(tr, xs); });
                    if (entry < best_entry) {
                        best_entry = entry;
                        best_tr = static_cast<int>(i);
                    }
                }
            }
            if (best_tr >= 0) {
                std::vector<double> pre = detail::rk4_step(m.field, x, best_entry);
                if (policy == JumpPolicy::eager) {
                    if (!do_jump(best_tr, t + best_entry, pre)) return out;
                    jumped = true;
                } else {
                    if (!arm_or_jump(best_tr, t + best_entry, pre)) return out;
                }
            }
        }

        if (!jumped) {
            // invariant violations with no way out block the run
            bool inv_ok = true;
            for (auto& p : m.invariant.polys)
                if (p.eval(x2) < -inv_tol) inv_ok = false;
            if (!inv_ok) {
                int enabled = -1;
                for (std::size_t i = 0; i < H.transitions.size(); ++i)
                    if (H.transitions[i].source == m.id &&
                        detail::guard_holds(H.transitions[i], x2)) {
                        enabled = static_cast<int>(i);
                        break;
                    }
                if (enabled >= 0) {
                    if (!do_jump(enabled, t + step, x2)) return out;
                    jumped = true;
                } else {
                    x = x2;
                    t += step;
                    out.segments.back().t.push_back(t);
                    out.segments.back().x.push_back(x);
                    out.blocked = true;
                    out.note = "invariant violated with no enabled transition";
                    break;
                }
            }
        }

        if (!jumped) {
            x = x2;
            t += step;
            out.segments.back().t.push_back(t);
            out.segments.back().x.push_back(x);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Falsification

struct FalsifyWitness {
    std::string condition;
    std::vector<double> point;
    double violation = 0.0;
};

/// Sampling search for a point violating any semantic condition of the
/// certificate. Returns the worst witness found, or nothing if all sampled
/// points satisfy the conditions within slack.
inline std::optional<FalsifyWitness> falsify(const HybridSystem& H, const Certificate& cert,
                                             const CheckOptions& opts = {}) {
    auto conditions = check_by_sampling(H, cert, opts);
    std::optional<FalsifyWitness> worst;
    for (auto& c : conditions) {
        if (c.pass || c.witness.empty()) continue;
        if (!worst || c.worst > worst->violation)
            worst = FalsifyWitness{c.condition, c.witness, c.worst};
    }
    return worst;
}

}  // namespace bcert
