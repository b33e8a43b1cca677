#include <catch2/catch_amalgamated.hpp>

#include "bcert/poly_parse.hpp"
#include "bcert/rng.hpp"
#include "bcert/sdp.hpp"
#include "bcert/system.hpp"

#include <Eigen/Dense>

#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

using namespace bcert;

namespace {

std::string examples_dir() {
    const char* d = std::getenv("BARRIER_EXAMPLES");
    return d ? d : "examples";
}

SdpProblem::Row make_row(std::string label, double rhs,
                         std::vector<SdpProblem::Entry> mat,
                         std::vector<std::pair<int, double>> lin = {}) {
    SdpProblem::Row r;
    r.label = std::move(label);
    r.rhs = rhs;
    r.mat = std::move(mat);
    r.lin = std::move(lin);
    return r;
}

double sym_min_eig(const Eigen::MatrixXd& M) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

// adjoint of the row map at y, using only the problem data and a plain vector
Eigen::MatrixXd ray_adjoint_block(const SdpProblem& p, const std::vector<double>& y, int b) {
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(p.block_dims[static_cast<std::size_t>(b)],
                                              p.block_dims[static_cast<std::size_t>(b)]);
    for (std::size_t r = 0; r < p.rows.size(); ++r)
        for (auto& e : p.rows[r].mat)
            if (e.block == b) {
                M(e.i, e.j) += y[r] * e.c;
                if (e.i != e.j) M(e.j, e.i) += y[r] * e.c;
            }
    return M;
}

// A returned infeasibility ray must stand on its own: adjoint(y) negative
// semidefinite (up to tolerance), G^T y ~ 0, and b.y strictly positive.
void check_ray_external(const SdpProblem& p, const SdpSolution& s) {
    REQUIRE(s.ray_y.size() == p.rows.size());
    double by = 0.0;
    for (std::size_t r = 0; r < p.rows.size(); ++r) by += p.rows[r].rhs * s.ray_y[r];
    CHECK(by >= 1e-7);
    for (int b = 0; b < static_cast<int>(p.block_dims.size()); ++b) {
        Eigen::MatrixXd M = -ray_adjoint_block(p, s.ray_y, b);
        CHECK(sym_min_eig(M) >= -1e-6);
    }
    std::vector<double> gty(static_cast<std::size_t>(p.num_free), 0.0);
    for (std::size_t r = 0; r < p.rows.size(); ++r)
        for (auto& [idx, c] : p.rows[r].lin) gty[static_cast<std::size_t>(idx)] += c * s.ray_y[r];
    for (double v : gty) CHECK(std::abs(v) <= 1e-6);
}

// Feasible instance with a planted strictly interior primal-dual pair. All the
// data ends up O(1) so absolute and relative tolerances agree.
SdpProblem random_feasible(Rng& rng) {
    SdpProblem p;
    const int nb = rng.uniform_int(1, 3);
    for (int b = 0; b < nb; ++b) p.block_dims.push_back(rng.uniform_int(1, 5));
    p.block_info.resize(static_cast<std::size_t>(nb));
    p.num_free = rng.uniform_int(0, 3);
    const int m = rng.uniform_int(2, 9);

    std::vector<Eigen::MatrixXd> X0;
    for (int d : p.block_dims) {
        Eigen::MatrixXd B(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) B(i, j) = rng.uniform(-1.0, 1.0);
        X0.push_back(B.transpose() * B / d + 0.3 * Eigen::MatrixXd::Identity(d, d));
    }
    Eigen::VectorXd u0(p.num_free);
    for (int i = 0; i < p.num_free; ++i) u0(i) = rng.uniform(-1.0, 1.0);

    for (int r = 0; r < m; ++r) {
        SdpProblem::Row row;
        row.label = "r" + std::to_string(r);
        double rhs = 0.0;
        for (int b = 0; b < nb; ++b) {
            const int d = p.block_dims[static_cast<std::size_t>(b)];
            const int picks = rng.uniform_int(1, 3);
            for (int k = 0; k < picks; ++k) {
                int i = rng.uniform_int(0, d - 1);
                int j = rng.uniform_int(0, d - 1);
                if (i > j) std::swap(i, j);
                double c = rng.uniform(-1.0, 1.0);
                row.mat.push_back({b, i, j, c});
                rhs += (i == j ? c : 2.0 * c) * X0[static_cast<std::size_t>(b)](i, j);
            }
        }
        for (int f = 0; f < p.num_free; ++f) {
            double c = rng.uniform(-1.0, 1.0);
            row.lin.emplace_back(f, c);
            rhs += c * u0(f);
        }
        row.rhs = rhs;
        p.rows.push_back(std::move(row));
    }

    // keep every row at O(1) scale
    for (auto& row : p.rows) {
        double mx = 1.0;
        for (auto& e : row.mat) mx = std::max(mx, std::abs(e.c));
        for (auto& [idx, c] : row.lin) mx = std::max(mx, std::abs(c));
        mx = std::max(mx, std::abs(row.rhs));
        for (auto& e : row.mat) e.c /= mx;
        for (auto& [idx, c] : row.lin) c /= mx;
        row.rhs /= mx;
    }

    // dual pair: pick y0 and interior Z0, then define the objective so that
    // C = -(adjoint(y0) + Z0) and c_lin = -G^T y0
    std::vector<double> y0(p.rows.size());
    for (auto& v : y0) v = rng.uniform(-0.5, 0.5);
    for (int b = 0; b < nb; ++b) {
        const int d = p.block_dims[static_cast<std::size_t>(b)];
        Eigen::MatrixXd Dm(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) Dm(i, j) = rng.uniform(-1.0, 1.0);
        Eigen::MatrixXd Z0 = Dm.transpose() * Dm / d + 0.3 * Eigen::MatrixXd::Identity(d, d);
        Eigen::MatrixXd C = -(ray_adjoint_block(p, y0, b) + Z0);
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j)
                if (std::abs(C(i, j)) > 0) p.obj_mat.push_back({b, i, j, C(i, j)});
    }
    std::vector<double> gty(static_cast<std::size_t>(p.num_free), 0.0);
    for (std::size_t r = 0; r < p.rows.size(); ++r)
        for (auto& [idx, c] : p.rows[r].lin) gty[static_cast<std::size_t>(idx)] += c * y0[r];
    for (int f = 0; f < p.num_free; ++f) p.obj_lin.emplace_back(f, -gty[static_cast<std::size_t>(f)]);
    return p;
}

// Infeasible instance with a planted Farkas ray: adjoint(y0) = -N with N
// strictly positive definite, G orthogonal to y0, and b.y0 = 1.
SdpProblem random_infeasible(Rng& rng) {
    SdpProblem p;
    const int nb = rng.uniform_int(1, 2);
    for (int b = 0; b < nb; ++b) p.block_dims.push_back(rng.uniform_int(1, 4));
    p.block_info.resize(static_cast<std::size_t>(nb));
    p.num_free = rng.uniform_int(0, 2);
    const int m = rng.uniform_int(3, 8);

    Eigen::VectorXd y0(m);
    for (int r = 0; r < m; ++r) y0(r) = rng.uniform(-1.0, 1.0);
    int k = 0;
    for (int r = 1; r < m; ++r)
        if (std::abs(y0(r)) > std::abs(y0(k))) k = r;
    if (std::abs(y0(k)) < 0.3) y0(k) = y0(k) < 0 ? -0.7 : 0.7;

    // dense random rows except row k, which is solved for afterwards
    std::vector<std::vector<Eigen::MatrixXd>> A(static_cast<std::size_t>(m));
    for (int r = 0; r < m; ++r) {
        A[static_cast<std::size_t>(r)].resize(static_cast<std::size_t>(nb));
        for (int b = 0; b < nb; ++b) {
            const int d = p.block_dims[static_cast<std::size_t>(b)];
            Eigen::MatrixXd M = Eigen::MatrixXd::Zero(d, d);
            if (r != k) {
                for (int i = 0; i < d; ++i)
                    for (int j = i; j < d; ++j) {
                        double c = rng.uniform(-1.0, 1.0);
                        M(i, j) = c;
                        M(j, i) = c;
                    }
            }
            A[static_cast<std::size_t>(r)][static_cast<std::size_t>(b)] = M;
        }
    }
    for (int b = 0; b < nb; ++b) {
        const int d = p.block_dims[static_cast<std::size_t>(b)];
        Eigen::MatrixXd E(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) E(i, j) = rng.uniform(-1.0, 1.0);
        Eigen::MatrixXd N = E.transpose() * E / d + 0.2 * Eigen::MatrixXd::Identity(d, d);
        Eigen::MatrixXd S = Eigen::MatrixXd::Zero(d, d);
        for (int r = 0; r < m; ++r)
            if (r != k) S += y0(r) * A[static_cast<std::size_t>(r)][static_cast<std::size_t>(b)];
        A[static_cast<std::size_t>(k)][static_cast<std::size_t>(b)] = -(N + S) / y0(k);
    }

    Eigen::MatrixXd G(m, p.num_free);
    for (int r = 0; r < m; ++r)
        for (int f = 0; f < p.num_free; ++f) G(r, f) = rng.uniform(-1.0, 1.0);
    if (p.num_free > 0) {
        for (int f = 0; f < p.num_free; ++f) {
            double d = G.col(f).dot(y0) / y0.squaredNorm();
            G.col(f) -= d * y0;
        }
    }
    Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
    for (int r = 0; r < m; ++r) b(r) = rng.uniform(-1.0, 1.0);
    b += y0 * ((1.0 - b.dot(y0)) / y0.squaredNorm());

    for (int r = 0; r < m; ++r) {
        SdpProblem::Row row;
        row.label = "q" + std::to_string(r);
        row.rhs = b(r);
        for (int bb = 0; bb < nb; ++bb) {
            const auto& M = A[static_cast<std::size_t>(r)][static_cast<std::size_t>(bb)];
            for (int i = 0; i < M.rows(); ++i)
                for (int j = i; j < M.cols(); ++j)
                    if (std::abs(M(i, j)) > 0) row.mat.push_back({bb, i, j, M(i, j)});
        }
        for (int f = 0; f < p.num_free; ++f)
            if (std::abs(G(r, f)) > 0) row.lin.emplace_back(f, G(r, f));
        p.rows.push_back(std::move(row));
    }
    return p;
}

}  // namespace

TEST_CASE("single equality pins a psd scalar") {
    SdpProblem p;
    p.block_dims = {1};
    p.block_info.resize(1);
    p.rows.push_back(make_row("pin", 3.0, {{0, 0, 0, 1.0}}));
    SdpSolution s = solve_sdp(p);
    REQUIRE(s.status == SdpStatus::feasible);
    CHECK(s.X[0](0, 0) == Catch::Approx(3.0).margin(1e-6));
    auto rep = sdp_residuals(p, s);
    CHECK(rep.primal_inf <= 1e-7);
    CHECK(rep.min_eig_x >= -1e-9);
}

TEST_CASE("negative scalar requirement is certified infeasible") {
    SdpProblem p;
    p.block_dims = {1};
    p.block_info.resize(1);
    p.rows.push_back(make_row("pin", -1.0, {{0, 0, 0, 1.0}}));
    SdpSolution s = solve_sdp(p);
    REQUIRE(s.status == SdpStatus::infeasible);
    CHECK(s.ray_violation >= 1e-7);
    CHECK(s.ray_residual <= 1e-8);
    check_ray_external(p, s);
}

TEST_CASE("trace and offdiagonal constraints meet inside the cone") {
    // X is 2x2, trace X = 2, X_12 = 0.9: X = [[a, .9], [.9, 2-a]] needs
    // a(2-a) >= 0.81, satisfiable
    SdpProblem p;
    p.block_dims = {2};
    p.block_info.resize(1);
    p.rows.push_back(make_row("tr", 2.0, {{0, 0, 0, 1.0}, {0, 1, 1, 1.0}}));
    p.rows.push_back(make_row("off", 0.9, {{0, 0, 1, 0.5}}));
    SdpSolution s = solve_sdp(p);
    REQUIRE(s.status == SdpStatus::feasible);
    CHECK(s.X[0](0, 0) + s.X[0](1, 1) == Catch::Approx(2.0).margin(1e-6));
    CHECK(s.X[0](0, 1) == Catch::Approx(0.9).margin(1e-6));
    CHECK(sym_min_eig(s.X[0]) >= -1e-9);
}

TEST_CASE("free variables thread through equalities") {
    // u1 - u2 = 5, u1 + u2 = 1, X11 + u1 = 4  ->  u = (3, -2), X11 = 1
    SdpProblem p;
    p.block_dims = {1};
    p.block_info.resize(1);
    p.num_free = 2;
    p.rows.push_back(make_row("d", 5.0, {}, {{0, 1.0}, {1, -1.0}}));
    p.rows.push_back(make_row("s", 1.0, {}, {{0, 1.0}, {1, 1.0}}));
    p.rows.push_back(make_row("mix", 4.0, {{0, 0, 0, 1.0}}, {{0, 1.0}}));
    SdpSolution s = solve_sdp(p);
    REQUIRE(s.status == SdpStatus::feasible);
    CHECK(s.u[0] == Catch::Approx(3.0).margin(1e-6));
    CHECK(s.u[1] == Catch::Approx(-2.0).margin(1e-6));
    CHECK(s.X[0](0, 0) == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("objective drives the slack to its known optimum") {
    // strictly positive quartic 1 + x^2 + x^4 over basis (1, x, x^2): the
    // identity Gram is optimal and the cap row limits t to exactly 1
    SosProgram prog;
    prog.vars = {"x"};
    prog.constraints.push_back(
        {LinPoly::from_const(parse_polynomial("x^4 + x^2 + 1", {"x"})), ConstraintKind::flow,
         "pos"});
    SdpProblem p = gram_lift(eliminate_odd_top(prog));
    SdpSolution s = solve_sdp(p);
    REQUIRE(s.status == SdpStatus::feasible);
    CHECK(s.obj == Catch::Approx(1.0).margin(1e-5));
}

TEST_CASE("structural contradiction short-circuits without iterating") {
    SdpProblem p;
    p.block_dims = {1};
    p.block_info.resize(1);
    p.rows.push_back(make_row("ghost", 1.0, {}));
    SdpSolution s = solve_sdp(p);
    REQUIRE(s.status == SdpStatus::infeasible);
    CHECK(s.iterations == 0);
    CHECK(s.note.find("structural") != std::string::npos);
}

TEST_CASE("trivial zero rows are tolerated") {
    SdpProblem p;
    p.block_dims = {1};
    p.block_info.resize(1);
    p.rows.push_back(make_row("null", 0.0, {}));
    p.rows.push_back(make_row("pin", 2.0, {{0, 0, 0, 1.0}}));
    SdpSolution s = solve_sdp(p);
    REQUIRE(s.status == SdpStatus::feasible);
    CHECK(s.X[0](0, 0) == Catch::Approx(2.0).margin(1e-6));
    CHECK(s.y[0] == 0.0);
}

TEST_CASE("flagged structural infeasibility is passed through") {
    SdpProblem p;
    p.structurally_infeasible = true;
    p.infeasibility_reason = "unit[l1]: constant cannot cancel";
    SdpSolution s = solve_sdp(p);
    REQUIRE(s.status == SdpStatus::infeasible);
    CHECK(s.note.find("unit[l1]") != std::string::npos);
}

TEST_CASE("log sink receives one line per iteration") {
    SdpProblem p;
    p.block_dims = {2};
    p.block_info.resize(1);
    p.rows.push_back(make_row("tr", 2.0, {{0, 0, 0, 1.0}, {0, 1, 1, 1.0}}));
    std::ostringstream log;
    SdpSolveOptions opt;
    opt.log = &log;
    SdpSolution s = solve_sdp(p, opt);
    REQUIRE(s.status == SdpStatus::feasible);
    CHECK(log.str().find("iter 0") != std::string::npos);
    CHECK(log.str().find("mu") != std::string::npos);
}

TEST_CASE("solver runs are deterministic") {
    Rng rng(424242);
    SdpProblem p = random_feasible(rng);
    SdpSolution a = solve_sdp(p);
    SdpSolution b = solve_sdp(p);
    REQUIRE(a.status == b.status);
    CHECK(a.iterations == b.iterations);
    REQUIRE(a.u.size() == b.u.size());
    for (std::size_t i = 0; i < a.u.size(); ++i) CHECK(a.u[i] == b.u[i]);
    for (std::size_t bi = 0; bi < a.X.size(); ++bi)
        CHECK((a.X[bi] - b.X[bi]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("random interior instances all solve to strict tolerance") {
    Rng rng(20240817);
    for (int trial = 0; trial < 25; ++trial) {
        SdpProblem p = random_feasible(rng);
        SdpSolution s = solve_sdp(p);
        INFO("trial " << trial << " note " << s.note);
        REQUIRE(s.status == SdpStatus::feasible);
        auto rep = sdp_residuals(p, s);
        CHECK(rep.primal_inf <= 1e-8);
        CHECK(rep.min_eig_x >= -1e-9);
    }
}

TEST_CASE("random planted-ray instances are all certified infeasible") {
    Rng rng(917);
    for (int trial = 0; trial < 25; ++trial) {
        SdpProblem p = random_infeasible(rng);
        SdpSolution s = solve_sdp(p);
        INFO("trial " << trial << " note " << s.note);
        REQUIRE(s.status == SdpStatus::infeasible);
        CHECK(s.ray_violation >= 10.0 * 1e-8);
        CHECK(s.ray_residual <= 1e-8);
        check_ray_external(p, s);
    }
}

TEST_CASE("dump round trip solves to the same answer") {
    Rng rng(5150);
    SdpProblem p = random_feasible(rng);
    SdpProblem q = parse_sdp_dump(dump_sdp(p));
    SdpSolution a = solve_sdp(p);
    SdpSolution b = solve_sdp(q);
    REQUIRE(a.status == SdpStatus::feasible);
    REQUIRE(b.status == SdpStatus::feasible);
    CHECK(a.obj == Catch::Approx(b.obj).margin(1e-9));
    CHECK(a.iterations == b.iterations);
}

TEST_CASE("quadratic barrier synthesis instance is feasible end to end") {
    HybridSystem H = load_system_file(examples_dir() + "/ex1.json");
    ProgramSpec sp;
    sp.lambda["l1"] = Rational(-1);
    sp.phi_degree["l1"] = 2;
    SosProgram prog = build_program(H, sp);
    SdpProblem sdp = gram_lift(eliminate_odd_top(prog));
    SdpSolution s = solve_sdp(sdp);
    REQUIRE(s.status == SdpStatus::feasible);
    auto rep = sdp_residuals(sdp, s);
    CHECK(rep.primal_inf <= 1e-6);
    CHECK(rep.min_eig_x >= -1e-8);

    std::vector<Rational> u;
    for (double v : s.u) u.push_back(rational_from_double(v));
    Polynomial phi = prog.unknowns.assemble("phi[l1]", u, H.vars);

    // the certificate must be negative near the initial ball and clear the
    // margin on the unsafe ball
    CHECK(phi.eval({1.5, 0.0}) <= 1e-8);
    CHECK(phi.eval({-1.0, -1.0}) >= 1e-2 - 1e-6);

    // flow inequality sampled over a coarse grid: Lphi + phi <= tiny
    Polynomial f1 = parse_polynomial("x2", {"x1", "x2"});
    Polynomial f2 = parse_polynomial("-x1 + (1/3)*x1^3 - x2", {"x1", "x2"});
    Polynomial lie = phi.derivative(0) * f1 + phi.derivative(1) * f2;
    for (double a = -4.0; a <= 4.0; a += 0.5)
        for (double b = -4.0; b <= 4.0; b += 0.5) {
            double v = lie.eval({a, b}) + phi.eval({a, b});
            CHECK(v <= 1e-5);
        }
}

TEST_CASE("shallow decay rate at quadratic degree is certified infeasible") {
    HybridSystem H = load_system_file(examples_dir() + "/ex1.json");
    for (auto lam : {Rational(-1, 8), Rational(0)}) {
        ProgramSpec sp;
        sp.lambda["l1"] = lam;
        sp.phi_degree["l1"] = 2;
        SosProgram prog = build_program(H, sp);
        SdpProblem sdp = gram_lift(eliminate_odd_top(prog));
        SdpSolution s = solve_sdp(sdp);
        INFO("lambda " << lam.str());
        REQUIRE(s.status == SdpStatus::infeasible);
        CHECK(s.ray_violation >= 1e-7);
        check_ray_external(sdp, s);
    }
}

TEST_CASE("a nonnegative polynomial that is not a sum of squares is rejected") {
    SosProgram prog;
    prog.vars = {"x", "y"};
    prog.constraints.push_back(
        {LinPoly::from_const(
             parse_polynomial("x^4*y^2 + x^2*y^4 - 3*x^2*y^2 + 1", {"x", "y"})),
         ConstraintKind::flow, "motzkin"});
    SdpProblem p = gram_lift(eliminate_odd_top(prog));
    SdpSolution s = solve_sdp(p);
    REQUIRE(s.status == SdpStatus::infeasible);
    CHECK(s.ray_violation >= 1e-7);
    check_ray_external(p, s);
}

TEST_CASE("an explicit sum of squares is accepted") {
    SosProgram prog;
    prog.vars = {"x", "y"};
    prog.constraints.push_back(
        {LinPoly::from_const(parse_polynomial(
             "(x^2*y - 1)^2 + (x*y^2 - x)^2 + (x*y - y)^2", {"x", "y"})),
         ConstraintKind::flow, "sq"});
    SdpProblem p = gram_lift(eliminate_odd_top(prog));
    SdpSolution s = solve_sdp(p);
    REQUIRE(s.status == SdpStatus::feasible);
    auto rep = sdp_residuals(p, s);
    CHECK(rep.primal_inf <= 1e-6);
    CHECK(rep.min_eig_x >= -1e-8);
}
