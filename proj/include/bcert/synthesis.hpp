#pragma once

// Outer search over candidate decay rates and template degrees. Each grid
// cell compiles the exponential condition to an SDP, solves it, extracts a
// certificate and runs the independent checker on it; a cell only counts as
// found when the extracted certificate survives both verification tiers.
// Degree is the outer loop so the cheapest certificates are found first.

#include "certcheck.hpp"
#include "certificate.hpp"
#include "sdp.hpp"
#include "sos.hpp"
#include "system.hpp"

#include <chrono>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace bcert {

struct SearchConfig {
    std::vector<Rational> lambdas{Rational(-1), Rational(-1, 2), Rational(-1, 4),
                                  Rational(-1, 8)};
    int d_min = 2;
    int d_max = 10;
    Rational epsilon{1, 100};
    std::map<std::string, Rational> gamma;  // per edge "src->tgt", default 1

    // when nonempty this map replaces the lambda sweep: one cell per degree,
    // every mode assigned its listed value
    std::map<std::string, Rational> lambda_by_location;

    double prune_threshold = 1e-5;
    int max_prune_rounds = 5;
    int multiplier_headroom = 0;
    int jobs = 1;  // sweep_report cell parallelism

    SdpSolveOptions sdp;
    CheckOptions check;
    std::ostream* log = nullptr;
};

struct AttemptRecord {
    std::string lambda;  // exact rational text, or "per-location"
    int degree = 0;
    std::string status;  // found | infeasible | numerical | verification-failed
    std::string detail;
    int iterations = 0;
    int prune_rounds = 0;
    double wall_ms = 0.0;
};

struct SynthesisResult {
    std::optional<Certificate> certificate;
    std::vector<AttemptRecord> attempts;
    bool found() const { return certificate.has_value(); }
};

struct PruneOutcome {
    SdpProblem sdp;  // input problem plus the accumulated pin rows
    SdpSolution sol;
    int rounds = 0;
    bool gave_up = false;
    std::string reason;
};

namespace detail {

inline void check_config(const SearchConfig& cfg) {
    if (cfg.d_min < 1 || cfg.d_min > cfg.d_max)
        throw std::invalid_argument("degree range must satisfy 1 <= d_min <= d_max");
    if (cfg.epsilon <= 0) throw std::invalid_argument("epsilon must be positive");
    if (cfg.max_prune_rounds < 0 || cfg.prune_threshold < 0)
        throw std::invalid_argument("prune parameters must be nonnegative");
    if (cfg.jobs < 1) throw std::invalid_argument("jobs must be >= 1");
}

inline ProgramSpec cell_spec(const HybridSystem& H, const SearchConfig& cfg, const Rational& lam,
                             int d) {
    ProgramSpec sp;
    for (auto& m : H.modes) {
        if (!cfg.lambda_by_location.empty()) {
            auto it = cfg.lambda_by_location.find(m.id);
            if (it == cfg.lambda_by_location.end())
                throw std::invalid_argument("no lambda listed for location '" + m.id + "'");
            sp.lambda[m.id] = it->second;
        } else {
            sp.lambda[m.id] = lam;
        }
        sp.phi_degree[m.id] = d;
    }
    sp.gamma = cfg.gamma;
    sp.epsilon = cfg.epsilon;
    sp.multiplier_headroom = cfg.multiplier_headroom;
    return sp;
}

inline Certificate extract_certificate(const HybridSystem& H, const SosProgram& prog,
                                       const SdpProblem& sdp, const SdpSolution& sol,
                                       const SearchConfig& cfg, int prune_rounds) {
    Certificate cert;
    cert.vars = H.vars;
    cert.lambda = prog.spec.lambda;
    cert.gamma = prog.spec.gamma;
    cert.epsilon = prog.spec.epsilon;
    cert.degree = prog.spec.phi_degree;
    cert.multiplier_headroom = prog.spec.multiplier_headroom;

    std::vector<Rational> vals;
    vals.reserve(sol.u.size());
    for (double v : sol.u) vals.push_back(rational_from_double(v));

    std::vector<std::string> primed;
    for (auto& v : H.vars) primed.push_back(v + "'");

    std::set<std::string> owners;
    for (int id = 0; id < prog.unknowns.size(); ++id)
        owners.insert(prog.unknowns.info(id).owner);
    for (auto& o : owners) {
        if (o.rfind("phi[", 0) == 0) {
            cert.phi[o.substr(4, o.size() - 5)] = prog.unknowns.assemble(o, vals, H.vars);
        } else {
            const auto& tv = o.rfind("sigma[", 0) == 0 ? primed : H.vars;
            cert.multipliers[o] = prog.unknowns.assemble(o, vals, tv);
        }
    }

    // each constraint's polynomial equals v^T (X_b + t I) v: fold the shared
    // slack back into the stored Gram matrix
    const double t_slack =
        sdp.slack_block >= 0 ? sol.X[static_cast<std::size_t>(sdp.slack_block)](0, 0) : 0.0;
    for (std::size_t b = 0; b < sdp.block_info.size(); ++b) {
        if (static_cast<int>(b) == sdp.slack_block || static_cast<int>(b) == sdp.cap_block)
            continue;
        const auto& info = sdp.block_info[b];
        Certificate::Gram g;
        g.tag = info.tag;
        g.basis_vars = info.basis_vars;
        g.basis = info.basis;
        g.mat = sol.X[b] +
                t_slack * Eigen::MatrixXd::Identity(sol.X[b].rows(), sol.X[b].cols());
        cert.grams.push_back(std::move(g));
    }

    cert.provenance.sdp_iterations = sol.iterations;
    cert.provenance.prune_rounds = prune_rounds;
    cert.provenance.solver_note = sol.note;
    cert.provenance.tol_eq = cfg.sdp.tol_eq;
    cert.provenance.tol_psd = cfg.sdp.tol_psd;
    return cert;
}

}  // namespace detail

/// Pins every unknown whose solved value sits below the prune threshold to
/// zero (as extra equality rows) and re-solves, repeating until no new pin
/// appears or the round budget runs out. Gives up when a barrier template
/// would be pinned to the zero polynomial, or when a re-solve stops being
/// feasible.
inline PruneOutcome prune_and_retry(const SosProgram& prog, const SdpProblem& sdp,
                                    const SdpSolution& sol, const SearchConfig& cfg) {
    PruneOutcome out{sdp, sol};
    std::set<int> pinned;
    for (int round = 0; round < cfg.max_prune_rounds; ++round) {
        std::vector<int> fresh;
        for (int id = 0; id < prog.unknowns.size(); ++id)
            if (!pinned.count(id) &&
                std::abs(out.sol.u[static_cast<std::size_t>(id)]) < cfg.prune_threshold)
                fresh.push_back(id);
        if (fresh.empty()) return out;

        for (auto& m : prog.spec.phi_degree) {
            bool alive = false;
            for (int id : prog.unknowns.ids_of("phi[" + m.first + "]"))
                if (!pinned.count(id) &&
                    std::find(fresh.begin(), fresh.end(), id) == fresh.end())
                    alive = true;
            if (!alive) {
                out.gave_up = true;
                out.reason = "pruning would empty phi[" + m.first + "]";
                return out;
            }
        }

        for (int id : fresh) {
            SdpProblem::Row row;
            row.label = "prune:u" + std::to_string(id);
            row.rhs = 0.0;
            row.lin.emplace_back(id, 1.0);
            out.sdp.rows.push_back(std::move(row));
            pinned.insert(id);
        }
        out.sol = solve_sdp(out.sdp, cfg.sdp);
        ++out.rounds;
        if (out.sol.status != SdpStatus::feasible) {
            out.gave_up = true;
            out.reason = "re-solve after pruning came back " +
                         std::string(out.sol.status == SdpStatus::infeasible ? "infeasible"
                                                                             : "numerical") +
                         (out.sol.note.empty() ? "" : ": " + out.sol.note);
            return out;
        }
    }
    return out;
}

namespace detail {

struct CellOutcome {
    AttemptRecord rec;
    std::optional<Certificate> cert;
};

inline CellOutcome attempt_cell(const HybridSystem& H, const SearchConfig& cfg,
                                const std::string& lam_label, const Rational& lam, int d,
                                const SdpSolveOptions& sdp_opts) {
    CellOutcome out;
    out.rec.lambda = lam_label;
    out.rec.degree = d;
    const auto t0 = std::chrono::steady_clock::now();
    auto done = [&](std::string status, std::string detail) -> CellOutcome& {
        out.rec.status = std::move(status);
        out.rec.detail = std::move(detail);
        out.rec.wall_ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
        return out;
    };

    SosProgram prog = eliminate_odd_top(build_program(H, cell_spec(H, cfg, lam, d)));
    SdpProblem sdp = gram_lift(prog);
    SdpSolution sol = solve_sdp(sdp, sdp_opts);
    out.rec.iterations = sol.iterations;

    if (sol.status == SdpStatus::infeasible) {
        std::ostringstream why;
        why << "ray violation " << sol.ray_violation;
        if (!sol.note.empty()) why << "; " << sol.note;
        return done("infeasible", why.str());
    }
    if (sol.status == SdpStatus::numerical_failure) return done("numerical", sol.note);

    Certificate cert = extract_certificate(H, prog, sdp, sol, cfg, 0);
    VerificationReport rep = full_check(H, cert, cfg.check);
    int rounds = 0;
    if (!rep.pass()) {
        PruneOutcome po = prune_and_retry(prog, sdp, sol, cfg);
        rounds = po.rounds;
        if (po.gave_up) return done("verification-failed", po.reason);
        if (rounds > 0) {
            out.rec.iterations = po.sol.iterations;
            cert = extract_certificate(H, prog, po.sdp, po.sol, cfg, rounds);
            rep = full_check(H, cert, cfg.check);
        }
    }
    out.rec.prune_rounds = rounds;
    if (rep.pass()) {
        out.cert = std::move(cert);
        return done("found", "");
    }
    std::string why = "certificate failed verification:";
    for (auto& c : rep.constraints)
        if (!c.pass) {
            why += " " + c.tag;
            break;
        }
    for (auto& c : rep.conditions)
        if (!c.pass) {
            why += " " + c.condition;
            break;
        }
    return done("verification-failed", why);
}

struct CellPlan {
    std::string label;
    Rational lambda;
    int degree = 0;
};

inline std::vector<CellPlan> plan_cells(const SearchConfig& cfg) {
    std::vector<CellPlan> cells;
    for (int d = cfg.d_min; d <= cfg.d_max; ++d) {
        if (!cfg.lambda_by_location.empty()) {
            cells.push_back({"per-location", Rational(0), d});
        } else {
            for (auto& lam : cfg.lambdas) cells.push_back({lam.str(), lam, d});
        }
    }
    return cells;
}

}  // namespace detail

/// First cell in sweep order (ascending degree, then the lambda list) whose
/// extracted certificate passes full verification wins. When no cell does, the
/// attempts list is the exhausted-report: one record per cell with its failure
/// reason.
inline SynthesisResult synthesize(const HybridSystem& H, const SearchConfig& cfg = {}) {
    detail::check_config(cfg);
    SynthesisResult res;
    for (auto& cell : detail::plan_cells(cfg)) {
        detail::CellOutcome out =
            detail::attempt_cell(H, cfg, cell.label, cell.lambda, cell.degree, cfg.sdp);
        if (cfg.log)
            *cfg.log << "synthesize: lambda " << out.rec.lambda << " d " << out.rec.degree
                     << " -> " << out.rec.status
                     << (out.rec.detail.empty() ? "" : " (" + out.rec.detail + ")") << "\n";
        res.attempts.push_back(out.rec);
        if (out.cert) {
            res.certificate = std::move(out.cert);
            break;
        }
    }
    return res;
}

struct SweepTable {
    std::vector<AttemptRecord> cells;  // full grid, no early exit

    std::string csv() const {
        std::ostringstream out;
        out << "lambda,degree,status,iterations,prune_rounds,wall_ms,detail\n";
        for (auto& c : cells) {
            std::string note = c.detail;
            for (auto& ch : note)
                if (ch == ',') ch = ';';
            out << c.lambda << "," << c.degree << "," << c.status << "," << c.iterations << ","
                << c.prune_rounds << "," << c.wall_ms << "," << note << "\n";
        }
        return out.str();
    }
};

/// Runs every cell of the grid regardless of successes. Cells are independent,
/// so with jobs > 1 they run on a strided thread pool; the table order stays
/// the deterministic sweep order either way (solver logging is per-cell
/// suppressed in parallel mode to keep streams coherent).
inline SweepTable sweep_report(const HybridSystem& H, const SearchConfig& cfg = {}) {
    detail::check_config(cfg);
    const std::vector<detail::CellPlan> cells = detail::plan_cells(cfg);
    std::vector<detail::CellOutcome> outs(cells.size());

    SdpSolveOptions cell_opts = cfg.sdp;
    const int jobs = std::max(1, std::min<int>(cfg.jobs, static_cast<int>(cells.size())));
    if (jobs > 1) cell_opts.log = nullptr;

    auto worker = [&](int w) {
        for (std::size_t i = static_cast<std::size_t>(w); i < cells.size();
             i += static_cast<std::size_t>(jobs))
            outs[i] = detail::attempt_cell(H, cfg, cells[i].label, cells[i].lambda,
                                           cells[i].degree, cell_opts);
    };
    if (jobs == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(jobs));
        for (int w = 0; w < jobs; ++w) pool.emplace_back(worker, w);
        for (auto& th : pool) th.join();
    }

    SweepTable table;
    for (auto& o : outs) {
        if (cfg.log)
            *cfg.log << "sweep: lambda " << o.rec.lambda << " d " << o.rec.degree << " -> "
                     << o.rec.status << "\n";
        table.cells.push_back(o.rec);
    }
    return table;
}

}  // namespace bcert
