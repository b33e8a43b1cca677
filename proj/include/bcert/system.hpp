#pragma once

// Semialgebraic hybrid automata: modes with polynomial vector fields and
// invariant/init/unsafe sets, transitions with guards and resets. A continuous
// system is the one-mode, zero-transition case. Instances are immutable after
// load and safe to share across threads.

#include "interval.hpp"
#include "poly_parse.hpp"
#include "polynomial.hpp"
#include "rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace bcert {

class SystemFormatError : public std::runtime_error {
public:
    SystemFormatError(const std::string& where, const std::string& what)
        : std::runtime_error(where.empty() ? what : where + ": " + what) {}
};

/// {x | p(x) >= 0 for every p in polys}. An empty polys list stands for the
/// empty set in Init/Unsafe position; invariant position treats an empty list
/// as "no constraint" via satisfies_all below.
struct SemialgebraicSet {
    std::vector<Polynomial> polys;

    bool operator==(const SemialgebraicSet&) const = default;
};

inline bool membership(const SemialgebraicSet& s, const std::vector<double>& x) {
    if (s.polys.empty()) return false;
    for (auto& p : s.polys)
        if (p.eval(x) < 0.0) return false;
    return true;
}

/// Conjunction semantics with vacuous truth; used for invariants and guards.
inline bool satisfies_all(const SemialgebraicSet& s, const std::vector<double>& x) {
    for (auto& p : s.polys)
        if (p.eval(x) < 0.0) return false;
    return true;
}

struct Mode {
    std::string id;
    std::vector<Polynomial> field;
    SemialgebraicSet invariant;
    SemialgebraicSet init;
    SemialgebraicSet unsafe;

    bool operator==(const Mode&) const = default;
};

struct Transition {
    std::string source;
    std::string target;
    SemialgebraicSet guard;
    SemialgebraicSet reset;  // over vars + primed vars; empty when identity
    bool identity_reset = false;

    bool operator==(const Transition&) const = default;
};

struct HybridSystem {
    std::vector<std::string> vars;
    std::vector<Mode> modes;
    std::vector<Transition> transitions;

    int dim() const { return static_cast<int>(vars.size()); }
    bool continuous() const { return modes.size() == 1 && transitions.empty(); }

    int mode_index(const std::string& id) const {
        for (std::size_t i = 0; i < modes.size(); ++i)
            if (modes[i].id == id) return static_cast<int>(i);
        throw std::out_of_range("no mode with id '" + id + "'");
    }

    const Mode& mode(const std::string& id) const { return modes[mode_index(id)]; }

    /// Variable list for reset relations: x1..xn followed by x1'..xn'.
    std::vector<std::string> jump_vars() const {
        std::vector<std::string> jv = vars;
        for (auto& v : vars) jv.push_back(v + "'");
        return jv;
    }

    bool operator==(const HybridSystem&) const = default;
};

namespace detail {

inline std::string json_type_name(const nlohmann::json& j) { return j.type_name(); }

inline const nlohmann::json& expect(const nlohmann::json& obj, const char* key,
                                    const std::string& where) {
    if (!obj.is_object()) throw SystemFormatError(where, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw SystemFormatError(where, std::string("missing field '") + key + "'");
    return *it;
}

inline std::vector<Polynomial> parse_poly_array(const nlohmann::json& arr,
                                                const std::vector<std::string>& vars,
                                                const std::string& where) {
    if (!arr.is_array())
        throw SystemFormatError(where, "expected an array of polynomial strings, got " +
                                           json_type_name(arr));
    std::vector<Polynomial> out;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const auto& e = arr[i];
        std::string loc = where + "[" + std::to_string(i) + "]";
        if (!e.is_string()) throw SystemFormatError(loc, "expected a string");
        try {
            out.push_back(parse_polynomial(e.get<std::string>(), vars));
        } catch (const ParseError& pe) {
            throw SystemFormatError(loc, std::string("unparseable polynomial: ") + pe.what());
        }
    }
    return out;
}

inline void check_identifier(const std::string& name, const std::string& where) {
    if (name.empty()) throw SystemFormatError(where, "empty name");
    if (name.back() == '\'')
        throw SystemFormatError(where, "'" + name + "': trailing apostrophe is reserved for primed variables");
    if (!std::isalpha(static_cast<unsigned char>(name[0])) && name[0] != '_')
        throw SystemFormatError(where, "'" + name + "' is not a valid identifier");
    for (char c : name)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_')
            throw SystemFormatError(where, "'" + name + "' is not a valid identifier");
}

}  // namespace detail

inline HybridSystem load_system(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw SystemFormatError("", std::string("not valid JSON: ") + e.what());
    }

    HybridSystem H;
    const auto& jvars = detail::expect(doc, "vars", "top level");
    if (!jvars.is_array() || jvars.empty())
        throw SystemFormatError("vars", "expected a nonempty array of names");
    for (std::size_t i = 0; i < jvars.size(); ++i) {
        std::string loc = "vars[" + std::to_string(i) + "]";
        if (!jvars[i].is_string()) throw SystemFormatError(loc, "expected a string");
        std::string name = jvars[i].get<std::string>();
        detail::check_identifier(name, loc);
        if (std::find(H.vars.begin(), H.vars.end(), name) != H.vars.end())
            throw SystemFormatError(loc, "duplicate variable '" + name + "'");
        H.vars.push_back(name);
    }
    const std::size_t n = H.vars.size();
    const auto jump_vars = [&] {
        std::vector<std::string> jv = H.vars;
        for (auto& v : H.vars) jv.push_back(v + "'");
        return jv;
    }();

    const auto& jmodes = detail::expect(doc, "modes", "top level");
    if (!jmodes.is_array() || jmodes.empty())
        throw SystemFormatError("modes", "expected a nonempty array");
    for (std::size_t i = 0; i < jmodes.size(); ++i) {
        std::string where = "modes[" + std::to_string(i) + "]";
        const auto& jm = jmodes[i];
        Mode m;
        const auto& jid = detail::expect(jm, "id", where);
        if (!jid.is_string()) throw SystemFormatError(where + ".id", "expected a string");
        m.id = jid.get<std::string>();
        if (m.id.empty()) throw SystemFormatError(where + ".id", "empty id");
        for (auto& other : H.modes)
            if (other.id == m.id)
                throw SystemFormatError(where + ".id", "duplicate mode id '" + m.id + "'");
        m.field = detail::parse_poly_array(detail::expect(jm, "field", where), H.vars,
                                           where + ".field");
        if (m.field.size() != n)
            throw SystemFormatError(where + ".field",
                                    "dimension mismatch: " + std::to_string(m.field.size()) +
                                        " components for " + std::to_string(n) + " variables");
        auto opt_set = [&](const char* key) -> SemialgebraicSet {
            if (!jm.contains(key)) return {};
            return {detail::parse_poly_array(jm[key], H.vars, where + "." + key)};
        };
        m.invariant = opt_set("invariant");
        m.init = opt_set("init");
        m.unsafe = opt_set("unsafe");
        H.modes.push_back(std::move(m));
    }

    if (doc.contains("transitions")) {
        const auto& jtrans = doc["transitions"];
        if (!jtrans.is_array()) throw SystemFormatError("transitions", "expected an array");
        for (std::size_t i = 0; i < jtrans.size(); ++i) {
            std::string where = "transitions[" + std::to_string(i) + "]";
            const auto& jt = jtrans[i];
            Transition t;
            const std::pair<const char*, std::string*> ends[] = {{"source", &t.source},
                                                                 {"target", &t.target}};
            for (auto [key, field] : ends) {
                const auto& v = detail::expect(jt, key, where);
                if (!v.is_string())
                    throw SystemFormatError(where + "." + key, "expected a string");
                *field = v.get<std::string>();
                bool found = std::any_of(H.modes.begin(), H.modes.end(),
                                         [&](const Mode& m) { return m.id == *field; });
                if (!found)
                    throw SystemFormatError(where + "." + key,
                                            "dangling transition label '" + *field + "'");
            }
            t.guard.polys = detail::parse_poly_array(detail::expect(jt, "guard", where), H.vars,
                                                     where + ".guard");
            if (t.guard.polys.empty())
                throw SystemFormatError(where + ".guard",
                                        "guard must list at least one inequality");
            const auto& jreset = detail::expect(jt, "reset", where);
            if (jreset.is_string() && jreset.get<std::string>() == "identity") {
                t.identity_reset = true;
            } else if (jreset.is_array()) {
                t.reset.polys =
                    detail::parse_poly_array(jreset, jump_vars, where + ".reset");
                if (t.reset.polys.empty())
                    throw SystemFormatError(where + ".reset",
                                            "reset must be \"identity\" or a nonempty array");
            } else {
                throw SystemFormatError(where + ".reset",
                                        "expected \"identity\" or an array of strings");
            }
            H.transitions.push_back(std::move(t));
        }
    }
    return H;
}

inline HybridSystem load_system_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SystemFormatError(path, "cannot open file");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return load_system(buf.str());
    } catch (const SystemFormatError& e) {
        throw SystemFormatError(path, e.what());
    }
}

inline std::string render_system(const HybridSystem& H) {
    nlohmann::json doc;
    doc["vars"] = H.vars;
    doc["modes"] = nlohmann::json::array();
    auto strs = [](const std::vector<Polynomial>& ps) {
        std::vector<std::string> out;
        out.reserve(ps.size());
        for (auto& p : ps) out.push_back(p.str());
        return out;
    };
    for (auto& m : H.modes) {
        nlohmann::json jm;
        jm["id"] = m.id;
        jm["field"] = strs(m.field);
        jm["invariant"] = strs(m.invariant.polys);
        jm["init"] = strs(m.init.polys);
        jm["unsafe"] = strs(m.unsafe.polys);
        doc["modes"].push_back(std::move(jm));
    }
    doc["transitions"] = nlohmann::json::array();
    for (auto& t : H.transitions) {
        nlohmann::json jt;
        jt["source"] = t.source;
        jt["target"] = t.target;
        jt["guard"] = strs(t.guard.polys);
        if (t.identity_reset)
            jt["reset"] = "identity";
        else
            jt["reset"] = strs(t.reset.polys);
        doc["transitions"].push_back(std::move(jt));
    }
    return doc.dump(2) + "\n";
}

struct SampleResult {
    std::vector<std::vector<double>> points;
    long attempts = 0;
    double acceptance_rate = 0.0;
    std::vector<Interval> refined_box;
    bool collapsed = false;  // every dimension pinned; center emitted if member
    std::string note;
};

namespace detail {

/// True if the set provably misses the box (some inequality is negative on all
/// of it). Interval arithmetic only, so "false" is inconclusive.
inline bool box_certainly_empty(const SemialgebraicSet& s, const std::vector<Interval>& box) {
    for (auto& p : s.polys)
        if (eval_on_box(p, box).hi < 0.0) return true;
    return false;
}

/// Shrinks `box` toward the set by binary search on each face: a face slab is
/// cut only when interval arithmetic proves it contains no member. Sound; never
/// removes a point of the set. Passes repeat because tightening one dimension
/// sharpens the interval bounds used for the others.
inline bool contract_box(const SemialgebraicSet& s, std::vector<Interval>& box) {
    const int max_passes = 64, bisections = 48;
    for (int pass = 0; pass < max_passes; ++pass) {
        if (box_certainly_empty(s, box)) return false;
        bool changed = false;
        for (std::size_t d = 0; d < box.size(); ++d) {
            for (int side = 0; side < 2; ++side) {
                double keep = side == 0 ? box[d].hi : box[d].lo;  // far face stays
                double cut = side == 0 ? box[d].lo : box[d].hi;
                auto slab_empty = [&](double t) {
                    std::vector<Interval> slab = box;
                    slab[d] = side == 0 ? Interval(box[d].lo, t) : Interval(t, box[d].hi);
                    return box_certainly_empty(s, slab);
                };
                double lo = cut, hi = keep;  // invariant: slab up to `lo` is empty
                if (!slab_empty(lo)) continue;
                for (int it = 0; it < bisections; ++it) {
                    double mid = 0.5 * (lo + hi);
                    if (mid == lo || mid == hi) break;
                    if (slab_empty(mid))
                        lo = mid;
                    else
                        hi = mid;
                }
                double moved = std::abs(lo - cut);
                if (moved > 1e-13 * (1.0 + std::abs(cut))) changed = true;
                if (side == 0)
                    box[d].lo = lo;
                else
                    box[d].hi = lo;
            }
        }
        if (!changed) break;
    }
    return !box_certainly_empty(s, box);
}

/// Shortest round decimal inside the interval, falling back to the midpoint.
/// Pinned coordinates like {x = 0.5} then evaluate exactly.
inline double snap_in(const Interval& iv) {
    double m = iv.mid();
    for (int p = 0; p <= 17; ++p) {
        double scale = std::pow(10.0, p);
        double cand = std::round(m * scale) / scale;
        if (iv.contains(cand)) return cand;
    }
    return m;
}

/// Adaptive paving: subdivides `root` breadth-first, discarding sub-boxes that
/// provably miss the set. The returned leaves cover set ∩ root; sampling
/// uniformly from their union gives a far better acceptance rate than the raw
/// box when the set is small or curved. Dimensions thinner than `pin_width`
/// are never split.
inline std::vector<std::vector<Interval>> build_paving(const SemialgebraicSet& s,
                                                       const std::vector<Interval>& root,
                                                       int max_leaves, double pin_width) {
    std::vector<std::vector<Interval>> leaves;
    std::vector<std::vector<Interval>> work{root};
    std::size_t next = 0;
    while (next < work.size()) {
        if (work.size() - next + leaves.size() >= static_cast<std::size_t>(max_leaves)) {
            for (; next < work.size(); ++next) leaves.push_back(work[next]);
            break;
        }
        std::vector<Interval> box = work[next++];
        bool empty = false, inside = true;
        for (auto& p : s.polys) {
            Interval e = eval_on_box(p, box);
            if (e.hi < 0.0) {
                empty = true;
                break;
            }
            if (e.lo < 0.0) inside = false;
        }
        if (empty) continue;
        int d = -1;
        double w = 1e-7;  // resolution floor; below it boundary boxes stay
        for (std::size_t i = 0; i < box.size(); ++i) {
            if (box[i].width() >= pin_width && box[i].width() > w) {
                w = box[i].width();
                d = static_cast<int>(i);
            }
        }
        if (inside || d < 0) {
            leaves.push_back(std::move(box));
            continue;
        }
        double mid = box[d].mid();
        std::vector<Interval> left = box, right = box;
        left[d].hi = mid;
        right[d].lo = mid;
        work.push_back(std::move(left));
        work.push_back(std::move(right));
    }
    return leaves;
}

}  // namespace detail

/// Seeded rejection sampling of `set` inside `bounds`. The box is first
/// contracted with interval arithmetic so thin sets (small balls, pinned
/// coordinates) keep a usable acceptance rate. May return fewer than `count`
/// points; zero acceptances yield a diagnostic note.
inline SampleResult sample(const SemialgebraicSet& set, const std::vector<Interval>& bounds,
                           int count, std::uint64_t seed) {
    constexpr double kPinWidth = 1e-9;
    SampleResult res;
    res.refined_box = bounds;
    if (set.polys.empty()) {
        res.note = "set appears empty in box (no defining inequalities: empty set)";
        return res;
    }
    for (auto& p : set.polys)
        if (p.vars().size() != bounds.size())
            throw std::invalid_argument("sample: box dimension mismatch");
    if (!detail::contract_box(set, res.refined_box)) {
        res.note = "set appears empty in box (interval contraction proved it empty)";
        return res;
    }

    bool all_pinned = true;
    for (auto& iv : res.refined_box) all_pinned = all_pinned && iv.width() < kPinWidth;
    if (all_pinned) {
        std::vector<double> center;
        for (auto& iv : res.refined_box) center.push_back(detail::snap_in(iv));
        res.collapsed = true;
        res.attempts = 1;
        if (membership(set, center)) {
            res.points.push_back(std::move(center));
            res.acceptance_rate = 1.0;
        } else {
            res.note = "set appears empty in box (contracted to a point that fails membership)";
        }
        return res;
    }

    auto leaves = detail::build_paving(set, res.refined_box, 16384, kPinWidth);
    if (leaves.empty()) {
        res.note = "set appears empty in box (paving proved it empty)";
        return res;
    }
    for (std::size_t d = 0; d < bounds.size(); ++d) {
        Interval hull = leaves[0][d];
        for (auto& leaf : leaves) {
            hull.lo = std::min(hull.lo, leaf[d].lo);
            hull.hi = std::max(hull.hi, leaf[d].hi);
        }
        res.refined_box[d] = hull;
    }

    std::vector<double> pinned_value(bounds.size(), 0.0);
    std::vector<bool> pinned(bounds.size(), false);
    for (std::size_t d = 0; d < bounds.size(); ++d) {
        if (res.refined_box[d].width() < kPinWidth) {
            pinned[d] = true;
            pinned_value[d] = detail::snap_in(res.refined_box[d]);
        }
    }
    // volume-weighted choice among leaves keeps the union sampled uniformly
    std::vector<double> cumvol(leaves.size());
    double total = 0.0;
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        double v = 1.0;
        for (std::size_t d = 0; d < bounds.size(); ++d)
            if (!pinned[d]) v *= leaves[i][d].width();
        total += v;
        cumvol[i] = total;
    }
    if (total <= 0.0) total = 1.0;

    Rng rng(seed);
    const long budget = 100000L + 10000L * static_cast<long>(count);
    std::vector<double> x(bounds.size());
    while (static_cast<int>(res.points.size()) < count && res.attempts < budget) {
        ++res.attempts;
        double u = rng.uniform01() * total;
        std::size_t li =
            std::lower_bound(cumvol.begin(), cumvol.end(), u) - cumvol.begin();
        if (li >= leaves.size()) li = leaves.size() - 1;
        const auto& leaf = leaves[li];
        for (std::size_t d = 0; d < x.size(); ++d)
            x[d] = pinned[d] ? pinned_value[d] : rng.uniform(leaf[d].lo, leaf[d].hi);
        if (membership(set, x)) res.points.push_back(x);
    }
    res.acceptance_rate =
        res.attempts == 0 ? 0.0 : static_cast<double>(res.points.size()) / res.attempts;
    if (res.points.empty())
        res.note = "set appears empty in box (no acceptances in " +
                   std::to_string(res.attempts) + " attempts)";
    return res;
}

inline std::vector<Interval> uniform_box(double lo, double hi, int dims) {
    return std::vector<Interval>(static_cast<std::size_t>(dims), Interval(lo, hi));
}

}  // namespace bcert
