#include <catch2/catch_amalgamated.hpp>

#include "bcert/interval.hpp"
#include "bcert/poly_parse.hpp"
#include "bcert/polynomial.hpp"
#include "bcert/rational.hpp"
#include "bcert/rng.hpp"

#include <string>
#include <vector>

using namespace bcert;

namespace {

const std::vector<std::string> XY = {"x1", "x2"};

Polynomial random_poly(Rng& rng, const std::vector<std::string>& vars, int maxdeg, int nterms) {
    Polynomial p(vars);
    for (int t = 0; t < nterms; ++t) {
        Monomial m;
        int budget = rng.uniform_int(0, maxdeg);
        for (std::size_t v = 0; v < vars.size() && budget > 0; ++v) {
            int e = rng.uniform_int(0, budget);
            if (e > 0) m.powers.emplace_back(static_cast<int>(v), e);
            budget -= e;
        }
        Rational c(rng.uniform_int(-9, 9), rng.uniform_int(1, 5));
        p.add_term(m, c);
    }
    return p;
}

}  // namespace

TEST_CASE("rational literals parse exactly") {
    REQUIRE(rational_from_string("0.25") == Rational(1, 4));
    REQUIRE(rational_from_string("-3.5") == Rational(-7, 2));
    REQUIRE(rational_from_string("2/7") == Rational(2, 7));
    REQUIRE(rational_from_string("-1/8") == Rational(-1, 8));
    REQUIRE(rational_from_string("10") == Rational(10));
    REQUIRE(rational_from_string("0.86153") == Rational(86153, 100000));
    REQUIRE_THROWS_AS(rational_from_string(""), std::invalid_argument);
    REQUIRE_THROWS_AS(rational_from_string("1.2.3"), std::invalid_argument);
    REQUIRE_THROWS_AS(rational_from_string("x"), std::invalid_argument);
    REQUIRE_THROWS_AS(rational_from_string("1/0"), std::invalid_argument);
}

TEST_CASE("rng streams are deterministic") {
    Rng a(12345), b(12345);
    for (int i = 0; i < 16; ++i) REQUIRE(a.uniform01() == b.uniform01());
    Rng c(12345);
    for (int i = 0; i < 1000; ++i) {
        double u = c.uniform01();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
    Rng d(7);
    for (int i = 0; i < 1000; ++i) {
        int k = d.uniform_int(-3, 3);
        REQUIRE(k >= -3);
        REQUIRE(k <= 3);
    }
}

TEST_CASE("binomial cube expansion") {
    auto x1 = Polynomial::variable("x1", XY);
    auto one = Polynomial::constant(1, XY);
    auto cube = (x1 + one).pow(3);
    REQUIRE(cube == parse_polynomial("x1^3 + 3*x1^2 + 3*x1 + 1", XY));
    REQUIRE(cube.total_degree() == 3);
}

TEST_CASE("degree conventions") {
    Polynomial zero(XY);
    REQUIRE(zero.is_zero());
    REQUIRE(zero.total_degree() == 0);
    REQUIRE(Polynomial::constant(5, XY).total_degree() == 0);
    REQUIRE(parse_polynomial("x1^2*x2^3", XY).total_degree() == 5);
    REQUIRE(parse_polynomial("x1^2*x2^3", XY).degree_in(1) == 3);
}

TEST_CASE("ring axioms hold on random polynomials") {
    Rng rng(2024);
    for (int trial = 0; trial < 60; ++trial) {
        auto a = random_poly(rng, XY, 4, 5);
        auto b = random_poly(rng, XY, 4, 5);
        auto c = random_poly(rng, XY, 3, 4);
        REQUIRE(a + b == b + a);
        REQUIRE(a * b == b * a);
        REQUIRE((a + b) * c == a * c + b * c);
        REQUIRE((a * b) * c == a * (b * c));
        REQUIRE((a - b) + b == a);
        REQUIRE((a * Polynomial::constant(0, XY)).is_zero());
    }
}

TEST_CASE("derivative satisfies Leibniz and linearity") {
    Rng rng(99);
    for (int trial = 0; trial < 40; ++trial) {
        auto p = random_poly(rng, XY, 4, 5);
        auto q = random_poly(rng, XY, 4, 5);
        for (int v = 0; v < 2; ++v) {
            REQUIRE((p * q).derivative(v) == p.derivative(v) * q + p * q.derivative(v));
            REQUIRE((p + q).derivative(v) == p.derivative(v) + q.derivative(v));
        }
    }
    REQUIRE(parse_polynomial("x1^3*x2", XY).derivative(0) == parse_polynomial("3*x1^2*x2", XY));
    REQUIRE(Polynomial::constant(7, XY).derivative(1).is_zero());
}

TEST_CASE("derivative agrees with central differences") {
    Rng rng(555);
    const double h = 1e-6;
    for (int trial = 0; trial < 25; ++trial) {
        auto p = random_poly(rng, XY, 4, 6);
        std::vector<double> x = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
        for (int v = 0; v < 2; ++v) {
            auto xp = x, xm = x;
            xp[v] += h;
            xm[v] -= h;
            double fd = (p.eval(xp) - p.eval(xm)) / (2 * h);
            double an = p.derivative(v).eval(x);
            REQUIRE(fd == Catch::Approx(an).margin(1e-4).epsilon(1e-4));
        }
    }
}

TEST_CASE("lie derivative basics") {
    std::vector<Polynomial> rot = {parse_polynomial("x2", XY), parse_polynomial("-x1", XY)};
    auto r2 = parse_polynomial("x1^2 + x2^2", XY);
    REQUIRE(lie_derivative(r2, rot).is_zero());

    std::vector<Polynomial> f = {parse_polynomial("x2", XY),
                                 parse_polynomial("-x1 + (1/3)*x1^3 - x2", XY)};
    REQUIRE(lie_derivative(Polynomial::variable("x1", XY), f) == parse_polynomial("x2", XY));
    REQUIRE(lie_derivative(parse_polynomial("x1*x2", XY), f) ==
            parse_polynomial("x2^2 - x1^2 + (1/3)*x1^4 - x1*x2", XY));
}

TEST_CASE("lie derivative is linear and Leibniz") {
    Rng rng(31337);
    std::vector<Polynomial> f = {random_poly(rng, XY, 3, 4), random_poly(rng, XY, 3, 4)};
    for (int trial = 0; trial < 30; ++trial) {
        auto p = random_poly(rng, XY, 3, 5);
        auto q = random_poly(rng, XY, 3, 5);
        Rational a(rng.uniform_int(-5, 5)), b(rng.uniform_int(-5, 5));
        REQUIRE(lie_derivative(a * p + b * q, f) ==
                a * lie_derivative(p, f) + b * lie_derivative(q, f));
        REQUIRE(lie_derivative(p * q, f) ==
                lie_derivative(p, f) * q + p * lie_derivative(q, f));
    }
}

TEST_CASE("reference quadratic evaluates exactly") {
    auto phi = parse_polynomial(
        "-0.86153 - 0.87278*x1 - 1.1358*x2 - 0.23944*x1^2 - 0.5866*x1*x2", XY);
    REQUIRE(phi.eval_exact({Rational(0), Rational(0)}) == Rational(-86153, 100000));
    REQUIRE(phi.eval_exact({Rational(3, 2), Rational(0)}) == Rational(-8467, 3125));
    REQUIRE(phi.total_degree() == 2);
}

TEST_CASE("substitution and variable remapping") {
    auto p = parse_polynomial("x1^2 + x2", XY);
    auto s = p.substitute({{"x2", parse_polynomial("x1 + 1", XY)}});
    REQUIRE(s == parse_polynomial("x1^2 + x1 + 1", XY));

    std::vector<std::string> YX = {"x2", "x1"};
    auto q = parse_polynomial("x1 - 2*x2", YX);
    REQUIRE(q.with_vars(XY) == parse_polynomial("x1 - 2*x2", XY));
    REQUIRE_THROWS(parse_polynomial("x1*x2", XY).with_vars({"x1"}));

    auto renamed = parse_polynomial("x1 + 3*x2", XY).rename_vars({{"x2", "y"}});
    REQUIRE(renamed.vars() == std::vector<std::string>{"x1", "y"});
    REQUIRE(renamed == parse_polynomial("x1 + 3*y", {"x1", "y"}));
}

TEST_CASE("mixed variable lists unify by name") {
    auto a = parse_polynomial("x1 + 1", {"x1"});
    auto b = parse_polynomial("x2 - 1", {"x2"});
    auto sum = a + b;
    REQUIRE(sum == parse_polynomial("x1 + x2", XY));
}

TEST_CASE("parser handles expressions and errors") {
    REQUIRE(parse_polynomial("x1^2 - 2*x1*x2 + x2^2", XY) ==
            parse_polynomial("(x1 - x2)^2", XY));
    REQUIRE(parse_polynomial("0.25", XY).constant_term() == Rational(1, 4));
    REQUIRE(parse_polynomial("(1/3)*x1^3", XY).coefficient(Monomial{{{0, 3}}}) == Rational(1, 3));
    REQUIRE(parse_polynomial("1/3*x1", XY) == parse_polynomial("(x1)/3", XY));
    REQUIRE(parse_polynomial("-x1^2", XY) == -parse_polynomial("x1^2", XY));
    REQUIRE(parse_polynomial(" - ( x1 + 1 ) * ( x1 - 1 ) ", XY) ==
            parse_polynomial("1 - x1^2", XY));

    REQUIRE_THROWS_AS(parse_polynomial("x3 + 1", XY), ParseError);
    REQUIRE_THROWS_AS(parse_polynomial("x1 +", XY), ParseError);
    REQUIRE_THROWS_AS(parse_polynomial("x1 $ 2", XY), ParseError);
    REQUIRE_THROWS_AS(parse_polynomial("x1 / x2", XY), ParseError);
    REQUIRE_THROWS_AS(parse_polynomial("x1 ^ x2", XY), ParseError);
    try {
        parse_polynomial("x1 + x9", XY);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        REQUIRE(std::string(e.what()).find("x9") != std::string::npos);
        REQUIRE(e.column() == 5);
    }
}

TEST_CASE("parser accepts primed variables") {
    std::vector<std::string> jump_vars = {"x", "x'"};
    auto r = parse_polynomial("x' - 0.5", jump_vars);
    REQUIRE(r.coefficient(Monomial{{{1, 1}}}) == 1);
    REQUIRE(r.constant_term() == Rational(-1, 2));
}

TEST_CASE("compiled evaluation matches exact evaluation") {
    Rng rng(808);
    for (int trial = 0; trial < 20; ++trial) {
        auto p = random_poly(rng, XY, 5, 8);
        CompiledPoly cp(p);
        for (int k = 0; k < 10; ++k) {
            std::vector<double> x = {rng.uniform(-3, 3), rng.uniform(-3, 3)};
            REQUIRE(cp.eval(x) == Catch::Approx(p.eval(x)).margin(1e-9).epsilon(1e-12));
        }
    }
}

TEST_CASE("interval enclosure contains sampled values") {
    Rng rng(4242);
    for (int trial = 0; trial < 30; ++trial) {
        auto p = random_poly(rng, XY, 4, 6);
        double a1 = rng.uniform(-2, 0), b1 = a1 + rng.uniform(0.1, 2.0);
        double a2 = rng.uniform(-2, 0), b2 = a2 + rng.uniform(0.1, 2.0);
        std::vector<Interval> box = {{a1, b1}, {a2, b2}};
        Interval enc = eval_on_box(p, box);
        for (int k = 0; k < 20; ++k) {
            std::vector<double> x = {rng.uniform(a1, b1), rng.uniform(a2, b2)};
            double v = p.eval(x);
            REQUIRE(v >= enc.lo - 1e-9);
            REQUIRE(v <= enc.hi + 1e-9);
        }
    }
    Interval sq = eval_on_box(parse_polynomial("x1^2", XY), {{-1, 2}, {0, 1}});
    REQUIRE(sq.lo <= 0.0);
    REQUIRE(sq.hi >= 4.0);
    REQUIRE(sq.hi <= 4.0 + 1e-12);
}

TEST_CASE("polynomial printing round-trips") {
    Rng rng(17);
    for (int trial = 0; trial < 25; ++trial) {
        auto p = random_poly(rng, XY, 4, 6);
        REQUIRE(parse_polynomial(p.str(), XY) == p);
    }
    REQUIRE(Polynomial(XY).str() == "0");
}
