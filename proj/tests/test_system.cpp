#include <catch2/catch_amalgamated.hpp>

#include "bcert/system.hpp"

#include <cstdlib>
#include <string>
#include <vector>

using namespace bcert;

namespace {

std::string examples_dir() {
    const char* d = std::getenv("BARRIER_EXAMPLES");
    return d ? d : "examples";
}

}  // namespace

TEST_CASE("ex1 loads as a continuous system") {
    auto H = load_system_file(examples_dir() + "/ex1.json");
    REQUIRE(H.dim() == 2);
    REQUIRE(H.continuous());
    REQUIRE(H.modes.size() == 1);
    REQUIRE(H.transitions.empty());
    const Mode& m = H.modes[0];
    REQUIRE(m.field.size() == 2);
    REQUIRE(m.field[0] == parse_polynomial("x2", H.vars));
    REQUIRE(m.field[1] == parse_polynomial("-x1 + (1/3)*x1^3 - x2", H.vars));
    REQUIRE(m.init.polys.size() == 1);
    REQUIRE(m.init.polys[0] ==
            parse_polynomial("0.25 - (x1 - 1.5)^2 - x2^2", H.vars));
    REQUIRE(m.invariant.polys.empty());
}

TEST_CASE("ex2 loads as a two-mode automaton with identity resets") {
    auto H = load_system_file(examples_dir() + "/ex2.json");
    REQUIRE(H.dim() == 3);
    REQUIRE_FALSE(H.continuous());
    REQUIRE(H.modes.size() == 2);
    REQUIRE(H.transitions.size() == 2);
    REQUIRE(H.mode("1").unsafe.polys.empty());
    REQUIRE(H.mode("2").init.polys.empty());
    REQUIRE(H.mode("2").unsafe.polys.size() == 2);
    for (auto& t : H.transitions) {
        REQUIRE(t.identity_reset);
        REQUIRE(t.reset.polys.empty());
    }
    // the as-written cubic x3 term in G(1,2)
    REQUIRE(H.transitions[0].guard.polys[0].degree_in(2) == 3);
    auto Hsq = load_system_file(examples_dir() + "/ex2_guard_sq.json");
    REQUIRE(Hsq.transitions[0].guard.polys[0].degree_in(2) == 2);
}

TEST_CASE("constant-reset regression system loads") {
    auto H = load_system_file(examples_dir() + "/constant_reset.json");
    REQUIRE(H.dim() == 1);
    REQUIRE(H.modes.size() == 2);
    REQUIRE(H.transitions.size() == 2);
    const Transition& back = H.transitions[1];
    REQUIRE_FALSE(back.identity_reset);
    REQUIRE(back.reset.polys.size() == 2);
    auto jv = H.jump_vars();
    REQUIRE(jv == std::vector<std::string>{"x", "x'"});
    REQUIRE(back.reset.polys[0] == parse_polynomial("x' - 0.5", jv));
}

TEST_CASE("membership follows the sign convention") {
    auto H = load_system_file(examples_dir() + "/ex1.json");
    const auto& X0 = H.modes[0].init;
    REQUIRE(membership(X0, {1.5, 0.0}));
    REQUIRE(membership(X0, {1.9, 0.2}));
    REQUIRE_FALSE(membership(X0, {3.0, 0.0}));
    REQUIRE_FALSE(membership(X0, {0.0, 0.0}));

    SemialgebraicSet empty;
    REQUIRE_FALSE(membership(empty, {0.0, 0.0}));
    REQUIRE(satisfies_all(empty, {0.0, 0.0}));

    auto H2 = load_system_file(examples_dir() + "/ex2.json");
    REQUIRE_FALSE(membership(H2.mode("1").unsafe, {5.0, 0.0, 0.0}));
    REQUIRE(membership(H2.mode("2").unsafe, {5.0, 0.0, 0.0}));
    REQUIRE(membership(H2.mode("2").unsafe, {-3.3, 1.0, 1.0}));
    REQUIRE_FALSE(membership(H2.mode("2").unsafe, {3.0, 0.0, 0.0}));
    REQUIRE_FALSE(membership(H2.mode("2").unsafe, {11.0, 0.0, 0.0}));
}

TEST_CASE("membership agrees with direct evaluation on random points") {
    Rng rng(606);
    std::vector<std::string> vars = {"x1", "x2"};
    for (int trial = 0; trial < 20; ++trial) {
        SemialgebraicSet s;
        int m = rng.uniform_int(1, 3);
        for (int i = 0; i < m; ++i) {
            Polynomial p(vars);
            for (int t = 0; t < 4; ++t) {
                Monomial mono;
                int e1 = rng.uniform_int(0, 2), e2 = rng.uniform_int(0, 2);
                if (e1) mono.powers.emplace_back(0, e1);
                if (e2) mono.powers.emplace_back(1, e2);
                p.add_term(mono, Rational(rng.uniform_int(-4, 4)));
            }
            s.polys.push_back(p);
        }
        for (int k = 0; k < 50; ++k) {
            std::vector<double> x = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
            bool direct = true;
            for (auto& p : s.polys) direct = direct && p.eval(x) >= 0.0;
            REQUIRE(membership(s, x) == direct);
        }
    }
}

TEST_CASE("load/render round-trips") {
    for (const char* name :
         {"/ex1.json", "/ex2.json", "/ex2_guard_sq.json", "/constant_reset.json"}) {
        auto H = load_system_file(examples_dir() + name);
        auto H2 = load_system(render_system(H));
        REQUIRE(H == H2);
    }
}

TEST_CASE("load/render round-trips on random systems") {
    Rng rng(7331);
    std::vector<std::string> vars = {"a", "b"};
    for (int trial = 0; trial < 15; ++trial) {
        HybridSystem H;
        H.vars = vars;
        int nmodes = rng.uniform_int(1, 3);
        for (int i = 0; i < nmodes; ++i) {
            Mode m;
            m.id = "m" + std::to_string(i);
            for (int c = 0; c < 2; ++c) {
                Polynomial p(vars);
                for (int t = 0; t < 3; ++t) {
                    Monomial mono;
                    int e1 = rng.uniform_int(0, 2), e2 = rng.uniform_int(0, 1);
                    if (e1) mono.powers.emplace_back(0, e1);
                    if (e2) mono.powers.emplace_back(1, e2);
                    p.add_term(mono, Rational(rng.uniform_int(-9, 9), rng.uniform_int(1, 4)));
                }
                m.field.push_back(p);
            }
            if (rng.uniform01() < 0.5)
                m.init.polys.push_back(parse_polynomial("1 - a^2 - b^2", vars));
            if (rng.uniform01() < 0.5)
                m.unsafe.polys.push_back(parse_polynomial("a - 2", vars));
            H.modes.push_back(std::move(m));
        }
        if (nmodes > 1) {
            Transition t;
            t.source = "m0";
            t.target = "m1";
            t.guard.polys.push_back(parse_polynomial("a - 1", vars));
            if (rng.uniform01() < 0.5) {
                t.identity_reset = true;
            } else {
                t.reset.polys.push_back(parse_polynomial("a' - b", H.jump_vars()));
                t.reset.polys.push_back(parse_polynomial("b - a'", H.jump_vars()));
            }
            H.transitions.push_back(std::move(t));
        }
        REQUIRE(load_system(render_system(H)) == H);
    }
}

TEST_CASE("malformed documents are rejected with location info") {
    auto bad = [](const std::string& text, const std::string& needle) {
        try {
            load_system(text);
            FAIL("expected SystemFormatError for: " + text);
        } catch (const SystemFormatError& e) {
            INFO(e.what());
            REQUIRE(std::string(e.what()).find(needle) != std::string::npos);
        }
    };
    bad("{", "not valid JSON");
    bad(R"({"modes": []})", "vars");
    bad(R"({"vars": [], "modes": []})", "vars");
    bad(R"({"vars": ["x", "x"], "modes": []})", "duplicate");
    bad(R"({"vars": ["x'"], "modes": []})", "apostrophe");
    bad(R"({"vars": ["x"], "modes": []})", "modes");
    bad(R"({"vars": ["x"], "modes": [{"id": "l1"}]})", "field");
    bad(R"({"vars": ["x"], "modes": [{"id": "l1", "field": ["x", "x"]}]})",
        "dimension mismatch");
    bad(R"({"vars": ["x"], "modes": [{"id": "l1", "field": ["y"]}]})", "modes[0].field[0]");
    bad(R"({"vars": ["x"], "modes": [{"id": "l1", "field": ["x"]}, {"id": "l1", "field": ["x"]}]})",
        "duplicate mode id");
    bad(R"({"vars": ["x"], "modes": [{"id": "l1", "field": ["x"]}],
            "transitions": [{"source": "l1", "target": "l3", "guard": ["x"], "reset": "identity"}]})",
        "dangling transition label 'l3'");
    bad(R"({"vars": ["x"], "modes": [{"id": "l1", "field": ["x"]}],
            "transitions": [{"source": "l1", "target": "l1", "guard": [], "reset": "identity"}]})",
        "guard");
    bad(R"({"vars": ["x"], "modes": [{"id": "l1", "field": ["x"]}],
            "transitions": [{"source": "l1", "target": "l1", "guard": ["x"], "reset": "nope"}]})",
        "reset");
    bad(R"({"vars": ["x"], "modes": [{"id": "l1", "field": ["x"]}],
            "transitions": [{"source": "l1", "target": "l1", "guard": ["x"], "reset": ["y' - 1"]}]})",
        "reset[0]");
}

TEST_CASE("sampling a disk returns members only") {
    auto H = load_system_file(examples_dir() + "/ex1.json");
    auto res = sample(H.modes[0].init, uniform_box(-3, 3, 2), 100, 7);
    REQUIRE(res.points.size() == 100);
    for (auto& p : res.points) {
        REQUIRE(membership(H.modes[0].init, p));
        double d = (p[0] - 1.5) * (p[0] - 1.5) + p[1] * p[1];
        REQUIRE(d <= 0.25 + 1e-12);
    }
    // contraction + paving should tighten the box from [-3,3]^2 to about the disk
    REQUIRE(res.refined_box[0].lo >= 0.97);
    REQUIRE(res.refined_box[0].hi <= 2.03);
    REQUIRE(res.refined_box[1].hi <= 0.53);
    REQUIRE(res.refined_box[1].lo >= -0.53);
    REQUIRE(res.acceptance_rate > 0.5);
}

TEST_CASE("sampling is deterministic in the seed") {
    auto H = load_system_file(examples_dir() + "/ex1.json");
    auto a = sample(H.modes[0].init, uniform_box(-3, 3, 2), 25, 42);
    auto b = sample(H.modes[0].init, uniform_box(-3, 3, 2), 25, 42);
    auto c = sample(H.modes[0].init, uniform_box(-3, 3, 2), 25, 43);
    REQUIRE(a.points == b.points);
    REQUIRE(a.points != c.points);
}

TEST_CASE("sampling the empty set reports a diagnostic") {
    SemialgebraicSet empty;
    auto res = sample(empty, uniform_box(-1, 1, 2), 10, 3);
    REQUIRE(res.points.empty());
    REQUIRE(res.note.find("appears empty") != std::string::npos);

    // nonempty description, provably empty in the box
    SemialgebraicSet far;
    far.polys.push_back(parse_polynomial("x1 - 100", {"x1", "x2"}));
    auto res2 = sample(far, uniform_box(-1, 1, 2), 10, 3);
    REQUIRE(res2.points.empty());
    REQUIRE(res2.note.find("appears empty") != std::string::npos);
}

TEST_CASE("sampling the ex2 annulus guard works in a wide box") {
    auto H = load_system_file(examples_dir() + "/ex2.json");
    const auto& G21 = H.transitions[1].guard;
    auto res = sample(G21, uniform_box(-1, 1, 3), 50, 1);
    REQUIRE(res.points.size() == 50);
    for (auto& p : res.points) {
        double r2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
        REQUIRE(r2 >= 0.03 - 1e-12);
        REQUIRE(r2 <= 0.05 + 1e-12);
    }
    // tiny ball X0 inside a huge box: contraction makes this tractable
    auto res0 = sample(H.mode("1").init, uniform_box(-10, 10, 3), 200, 9);
    REQUIRE(res0.points.size() == 200);
    for (auto& p : res0.points)
        REQUIRE(p[0] * p[0] + p[1] * p[1] + p[2] * p[2] <= 0.01 + 1e-12);
    REQUIRE(res0.acceptance_rate > 0.1);
}

TEST_CASE("sampling a pinned coordinate emits the exact value") {
    auto H = load_system_file(examples_dir() + "/constant_reset.json");
    const Transition& back = H.transitions[1];
    // joint guard-and-reset set over (x, x'): x in [-0.2, 0], x' = 0.5
    SemialgebraicSet joint;
    auto jv = H.jump_vars();
    for (auto& g : back.guard.polys) joint.polys.push_back(g.with_vars(jv));
    for (auto& r : back.reset.polys) joint.polys.push_back(r);
    auto res = sample(joint, uniform_box(-10, 10, 2), 30, 11);
    REQUIRE(res.points.size() == 30);
    for (auto& p : res.points) {
        REQUIRE(p[0] >= -0.2 - 1e-9);
        REQUIRE(p[0] <= 1e-9);
        REQUIRE(p[1] == 0.5);
    }

    // reset set alone pins x' only; x stays free in the box
    auto resr = sample(back.reset, uniform_box(-10, 10, 2), 10, 12);
    REQUIRE(resr.points.size() == 10);
    for (auto& p : resr.points) REQUIRE(p[1] == 0.5);
}
