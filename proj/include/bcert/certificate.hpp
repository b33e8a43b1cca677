#pragma once

// Barrier certificates as standalone artifacts: the barrier and multiplier
// polynomials, the Gram matrix of every sum-of-squares constraint, and the
// numeric context (lambda, gamma, epsilon, tolerances) needed to re-verify the
// whole object from its serialized form alone. Coefficients are serialized as
// decimal strings that round-trip the underlying doubles exactly.

#include "polynomial.hpp"
#include "rational.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace bcert {

struct Certificate {
    std::vector<std::string> vars;

    std::map<std::string, Polynomial> phi;          // location id -> barrier
    std::map<std::string, Polynomial> multipliers;  // owner tag -> polynomial

    std::map<std::string, Rational> lambda;  // location id -> decay rate
    std::map<std::string, Rational> gamma;   // "src->tgt" -> jump scale
    Rational epsilon = Rational(1, 100);
    std::map<std::string, int> degree;  // location id -> phi template degree
    int multiplier_headroom = 0;

    struct Gram {
        std::string tag;  // constraint tag, e.g. "init[l1]"
        std::vector<std::string> basis_vars;
        std::vector<Monomial> basis;
        Eigen::MatrixXd mat;
    };
    std::vector<Gram> grams;

    struct Provenance {
        int sdp_iterations = 0;
        int prune_rounds = 0;
        std::string solver_note;
        double tol_eq = 1e-8;
        double tol_psd = 1e-9;
    } provenance;

    const Gram* find_gram(const std::string& tag) const {
        for (auto& g : grams)
            if (g.tag == tag) return &g;
        return nullptr;
    }
};

class CertificateFormatError : public std::runtime_error {
public:
    CertificateFormatError(const std::string& where, const std::string& what)
        : std::runtime_error(where.empty() ? what : where + ": " + what) {}
};

namespace detail {

/// Shortest decimal string that parses back to exactly this double.
inline std::string decimal_str(double v) {
    char buf[64];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    return buf;
}

inline std::string monomial_str(const Monomial& m, const std::vector<std::string>& vars) {
    if (m.powers.empty()) return "1";
    std::ostringstream out;
    bool first = true;
    for (auto& [v, e] : m.powers) {
        if (v < 0 || static_cast<std::size_t>(v) >= vars.size())
            throw std::out_of_range("monomial variable index out of range");
        if (!first) out << "*";
        out << vars[static_cast<std::size_t>(v)];
        if (e != 1) out << "^" << e;
        first = false;
    }
    return out.str();
}

inline Monomial monomial_from_str(const std::string& text,
                                  const std::vector<std::string>& vars,
                                  const std::string& where) {
    Monomial m;
    if (text == "1") return m;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t star = text.find('*', pos);
        std::string factor =
            star == std::string::npos ? text.substr(pos) : text.substr(pos, star - pos);
        pos = star == std::string::npos ? text.size() : star + 1;
        std::size_t caret = factor.find('^');
        std::string name = caret == std::string::npos ? factor : factor.substr(0, caret);
        int exp = 1;
        if (caret != std::string::npos) {
            try {
                exp = std::stoi(factor.substr(caret + 1));
            } catch (const std::exception&) {
                throw CertificateFormatError(where, "bad exponent in '" + factor + "'");
            }
        }
        auto it = std::find(vars.begin(), vars.end(), name);
        if (it == vars.end())
            throw CertificateFormatError(where, "unknown variable '" + name + "'");
        if (exp <= 0) throw CertificateFormatError(where, "nonpositive exponent in '" + factor + "'");
        m.powers.emplace_back(static_cast<int>(it - vars.begin()), exp);
    }
    std::sort(m.powers.begin(), m.powers.end());
    for (std::size_t i = 1; i < m.powers.size(); ++i)
        if (m.powers[i - 1].first == m.powers[i].first)
            throw CertificateFormatError(where, "repeated variable in '" + text + "'");
    return m;
}

inline nlohmann::json poly_to_json(const Polynomial& p) {
    nlohmann::json j;
    j["vars"] = p.vars();
    nlohmann::json terms = nlohmann::json::object();
    for (auto& [m, c] : p.terms()) terms[monomial_str(m, p.vars())] = decimal_str(to_double(c));
    j["terms"] = std::move(terms);
    return j;
}

inline Polynomial poly_from_json(const nlohmann::json& j, const std::string& where) {
    if (!j.is_object() || !j.contains("vars") || !j.contains("terms"))
        throw CertificateFormatError(where, "expected an object with 'vars' and 'terms'");
    std::vector<std::string> vars = j["vars"].get<std::vector<std::string>>();
    Polynomial p(vars);
    for (auto& [key, val] : j["terms"].items()) {
        if (!val.is_string()) throw CertificateFormatError(where, "coefficient must be a string");
        Rational c;
        try {
            c = rational_from_string(val.get<std::string>());
        } catch (const std::invalid_argument& e) {
            throw CertificateFormatError(where, e.what());
        }
        p.add_term(monomial_from_str(key, vars, where), c);
    }
    return p;
}

}  // namespace detail

inline nlohmann::json certificate_to_json(const Certificate& cert) {
    nlohmann::json doc;
    doc["format"] = "barrier-certificate";
    doc["version"] = 1;
    doc["vars"] = cert.vars;
    doc["epsilon"] = cert.epsilon.str();
    doc["multiplier_headroom"] = cert.multiplier_headroom;

    nlohmann::json deg = nlohmann::json::object();
    for (auto& [loc, d] : cert.degree) deg[loc] = d;
    doc["degree"] = std::move(deg);

    nlohmann::json lam = nlohmann::json::object();
    for (auto& [loc, v] : cert.lambda) lam[loc] = v.str();
    doc["lambda"] = std::move(lam);

    nlohmann::json gam = nlohmann::json::object();
    for (auto& [edge, v] : cert.gamma) gam[edge] = v.str();
    doc["gamma"] = std::move(gam);

    nlohmann::json phi = nlohmann::json::object();
    for (auto& [loc, p] : cert.phi) phi[loc] = detail::poly_to_json(p);
    doc["phi"] = std::move(phi);

    nlohmann::json mult = nlohmann::json::object();
    for (auto& [owner, p] : cert.multipliers) mult[owner] = detail::poly_to_json(p);
    doc["multipliers"] = std::move(mult);

    doc["grams"] = nlohmann::json::array();
    for (auto& g : cert.grams) {
        nlohmann::json jg;
        jg["tag"] = g.tag;
        jg["vars"] = g.basis_vars;
        std::vector<std::string> basis;
        for (auto& m : g.basis) basis.push_back(detail::monomial_str(m, g.basis_vars));
        jg["basis"] = std::move(basis);
        nlohmann::json rows = nlohmann::json::array();
        for (int i = 0; i < g.mat.rows(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (int k = 0; k < g.mat.cols(); ++k)
                row.push_back(detail::decimal_str(g.mat(i, k)));
            rows.push_back(std::move(row));
        }
        jg["mat"] = std::move(rows);
        doc["grams"].push_back(std::move(jg));
    }

    doc["provenance"] = {{"sdp_iterations", cert.provenance.sdp_iterations},
                         {"prune_rounds", cert.provenance.prune_rounds},
                         {"solver_note", cert.provenance.solver_note},
                         {"tol_eq", cert.provenance.tol_eq},
                         {"tol_psd", cert.provenance.tol_psd}};
    return doc;
}

inline std::string render_certificate(const Certificate& cert) {
    return certificate_to_json(cert).dump(2) + "\n";
}

inline Certificate parse_certificate(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw CertificateFormatError("", std::string("not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || doc.value("format", "") != "barrier-certificate")
        throw CertificateFormatError("", "not a barrier-certificate document");

    Certificate cert;
    try {
        cert.vars = doc.at("vars").get<std::vector<std::string>>();
        cert.epsilon = rational_from_string(doc.at("epsilon").get<std::string>());
        cert.multiplier_headroom = doc.value("multiplier_headroom", 0);
        for (auto& [loc, d] : doc.at("degree").items()) cert.degree[loc] = d.get<int>();
        for (auto& [loc, v] : doc.at("lambda").items())
            cert.lambda[loc] = rational_from_string(v.get<std::string>());
        // .items() must not run on a temporary: the proxy would outlive it
        const nlohmann::json gams = doc.value("gamma", nlohmann::json::object());
        for (auto& [edge, v] : gams.items())
            cert.gamma[edge] = rational_from_string(v.get<std::string>());
        for (auto& [loc, p] : doc.at("phi").items())
            cert.phi.emplace(loc, detail::poly_from_json(p, "phi." + loc));
        const nlohmann::json mults = doc.value("multipliers", nlohmann::json::object());
        for (auto& [owner, p] : mults.items())
            cert.multipliers.emplace(owner, detail::poly_from_json(p, "multipliers." + owner));
        for (auto& jg : doc.value("grams", nlohmann::json::array())) {
            Certificate::Gram g;
            g.tag = jg.at("tag").get<std::string>();
            g.basis_vars = jg.at("vars").get<std::vector<std::string>>();
            for (auto& b : jg.at("basis"))
                g.basis.push_back(detail::monomial_from_str(b.get<std::string>(), g.basis_vars,
                                                            "grams[" + g.tag + "]"));
            const auto& rows = jg.at("mat");
            const int n = static_cast<int>(rows.size());
            if (n != static_cast<int>(g.basis.size()))
                throw CertificateFormatError("grams[" + g.tag + "]",
                                             "matrix size does not match basis");
            g.mat = Eigen::MatrixXd::Zero(n, n);
            for (int i = 0; i < n; ++i) {
                if (static_cast<int>(rows[i].size()) != n)
                    throw CertificateFormatError("grams[" + g.tag + "]", "matrix is not square");
                for (int k = 0; k < n; ++k)
                    g.mat(i, k) = std::strtod(rows[i][k].get<std::string>().c_str(), nullptr);
            }
            cert.grams.push_back(std::move(g));
        }
        if (doc.contains("provenance")) {
            const auto& pv = doc["provenance"];
            cert.provenance.sdp_iterations = pv.value("sdp_iterations", 0);
            cert.provenance.prune_rounds = pv.value("prune_rounds", 0);
            cert.provenance.solver_note = pv.value("solver_note", "");
            cert.provenance.tol_eq = pv.value("tol_eq", 1e-8);
            cert.provenance.tol_psd = pv.value("tol_psd", 1e-9);
        }
    } catch (const nlohmann::json::exception& e) {
        throw CertificateFormatError("", std::string("malformed certificate: ") + e.what());
    }
    return cert;
}

inline Certificate load_certificate_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CertificateFormatError(path, "cannot open file");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_certificate(buf.str());
    } catch (const CertificateFormatError& e) {
        throw CertificateFormatError(path, e.what());
    }
}

inline void save_certificate_file(const Certificate& cert, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw CertificateFormatError(path, "cannot open file for writing");
    out << render_certificate(cert);
}

}  // namespace bcert
