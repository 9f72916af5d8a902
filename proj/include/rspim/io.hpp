#pragma once

#include <cctype>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rspim/bench.hpp"

namespace rspim {

using ordered_json = nlohmann::ordered_json;

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline bool parse_double(const std::string& tok, double& out) {
    try {
        std::size_t pos = 0;
        out = std::stod(tok, &pos);
        while (pos < tok.size() && std::isspace(static_cast<unsigned char>(tok[pos]))) ++pos;
        return pos == tok.size();
    } catch (...) {
        return false;
    }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> toks;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) toks.push_back(tok);
    if (!line.empty() && line.back() == ',') toks.emplace_back();
    return toks;
}

/// Plain numeric CSV with an optional single header row, detected by a
/// non-numeric first row. Returns the matrix and the header names if present.
inline std::pair<Eigen::MatrixXd, std::vector<std::string>> read_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::vector<std::string> names;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto toks = split_csv_line(line);
        std::vector<double> row(toks.size());
        bool numeric = true;
        for (std::size_t k = 0; k < toks.size(); ++k)
            if (!parse_double(toks[k], row[k])) { numeric = false; break; }
        if (!numeric) {
            if (first) { names = toks; first = false; continue; }
            throw std::invalid_argument(path + ": non-numeric cell outside header row");
        }
        first = false;
        if (!rows.empty() && rows.front().size() != row.size())
            throw std::invalid_argument(path + ": inconsistent column count");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::invalid_argument(path + ": no data rows");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows.front().size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return {std::move(m), std::move(names)};
}

inline Eigen::VectorXd read_vector_csv(const std::string& path) {
    auto [m, names] = read_matrix_csv(path);
    if (m.cols() != 1) throw std::invalid_argument(path + ": expected a single column");
    return m.col(0);
}

// ---- enum <-> string maps ----

inline std::string to_string(NoiseKind k) {
    switch (k) {
        case NoiseKind::gaussian: return "gaussian";
        case NoiseKind::heteroskedastic_x1: return "heteroskedastic_x1";
        case NoiseKind::student_t: return "student_t";
    }
    return "gaussian";
}

inline NoiseKind noise_from_string(const std::string& s) {
    if (s == "gaussian") return NoiseKind::gaussian;
    if (s == "heteroskedastic_x1") return NoiseKind::heteroskedastic_x1;
    if (s == "student_t") return NoiseKind::student_t;
    throw std::invalid_argument("unknown noise kind: " + s);
}

inline std::string to_string(CorrKind k) { return k == CorrKind::ar1 ? "ar1" : "equicorrelated"; }

inline CorrKind corr_from_string(const std::string& s) {
    if (s == "ar1") return CorrKind::ar1;
    if (s == "equicorrelated") return CorrKind::equicorrelated;
    throw std::invalid_argument("unknown correlation kind: " + s);
}

inline std::string to_string(SelectorKind k) {
    switch (k) {
        case SelectorKind::lasso_stability: return "lasso-stability";
        case SelectorKind::lasso: return "lasso";
        case SelectorKind::random_k: return "random";
        case SelectorKind::oracle: return "oracle";
    }
    return "lasso-stability";
}

inline SelectorKind selector_from_string(const std::string& s) {
    if (s == "lasso-stability" || s == "lasso_stability") return SelectorKind::lasso_stability;
    if (s == "lasso") return SelectorKind::lasso;
    if (s == "random" || s == "random_k") return SelectorKind::random_k;
    if (s == "oracle") return SelectorKind::oracle;
    throw std::invalid_argument("unknown selector: " + s);
}

inline MethodKind method_from_string(const std::string& s) {
    if (s == "rspim_single" || s == "single") return MethodKind::rspim_single;
    if (s == "rspim_union" || s == "union") return MethodKind::rspim_union;
    if (s == "rspim_wildboot" || s == "wildboot") return MethodKind::rspim_wildboot;
    if (s == "orth_crossfit" || s == "orth") return MethodKind::orth_crossfit;
    if (s == "debiased_lasso" || s == "debiased") return MethodKind::debiased_lasso;
    throw std::invalid_argument("unknown method: " + s);
}

inline std::string to_string(MultiplierKind k) {
    return k == MultiplierKind::rademacher ? "rademacher" : "mammen";
}

inline MultiplierKind multiplier_from_string(const std::string& s) {
    if (s == "rademacher") return MultiplierKind::rademacher;
    if (s == "mammen") return MultiplierKind::mammen;
    throw std::invalid_argument("unknown multiplier kind: " + s);
}

// ---- config (de)serialization; configs round-trip through JSON ----

inline ordered_json to_json(const DesignConfig& d) {
    ordered_json j;
    j["n"] = d.n;
    j["p"] = d.p;
    j["rho"] = d.rho;
    j["corr_kind"] = to_string(d.corr_kind);
    j["s"] = d.s;
    j["snr_beta_norm"] = d.snr_beta_norm;
    j["beta_pattern"] = d.beta_pattern == BetaPattern::equal_magnitude ? "equal_magnitude" : "custom";
    if (d.beta_pattern == BetaPattern::custom)
        j["custom_beta"] = std::vector<double>(d.custom_beta.data(), d.custom_beta.data() + d.custom_beta.size());
    j["noise_kind"] = to_string(d.noise_kind);
    j["t_df"] = d.t_df;
    j["sigma"] = d.sigma;
    return j;
}

inline void from_json(const ordered_json& j, DesignConfig& d) {
    d.n = j.value("n", d.n);
    d.p = j.value("p", d.p);
    d.rho = j.value("rho", d.rho);
    if (j.contains("corr_kind")) d.corr_kind = corr_from_string(j["corr_kind"]);
    d.s = j.value("s", d.s);
    d.snr_beta_norm = j.value("snr_beta_norm", d.snr_beta_norm);
    if (j.contains("beta_pattern") && j["beta_pattern"] == "custom") {
        d.beta_pattern = BetaPattern::custom;
        std::vector<double> v = j.value("custom_beta", std::vector<double>{});
        d.custom_beta = Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    if (j.contains("noise_kind")) d.noise_kind = noise_from_string(j["noise_kind"]);
    d.t_df = j.value("t_df", d.t_df);
    d.sigma = j.value("sigma", d.sigma);
}

inline ordered_json to_json(const SelectorConfig& s) {
    ordered_json j;
    j["kind"] = to_string(s.kind);
    j["stability"] = {{"n_subsamples", s.stability.n_subsamples},
                      {"threshold", s.stability.threshold},
                      {"q_cap", s.stability.q_cap},
                      {"lambda", s.stability.lasso.lambda}};
    j["lasso"] = {{"lambda", s.lasso.lambda},
                  {"max_iter", s.lasso.max_iter},
                  {"tol", s.lasso.tol},
                  {"standardize", s.lasso.standardize}};
    j["random_k"] = s.random_k;
    j["oracle_support"] = s.oracle_support;
    return j;
}

inline void from_json(const ordered_json& j, SelectorConfig& s) {
    if (j.contains("kind")) s.kind = selector_from_string(j["kind"]);
    if (j.contains("stability")) {
        const auto& t = j["stability"];
        s.stability.n_subsamples = t.value("n_subsamples", s.stability.n_subsamples);
        s.stability.threshold = t.value("threshold", s.stability.threshold);
        s.stability.q_cap = t.value("q_cap", s.stability.q_cap);
        s.stability.lasso.lambda = t.value("lambda", s.stability.lasso.lambda);
    }
    if (j.contains("lasso")) {
        const auto& t = j["lasso"];
        s.lasso.lambda = t.value("lambda", s.lasso.lambda);
        s.lasso.max_iter = t.value("max_iter", s.lasso.max_iter);
        s.lasso.tol = t.value("tol", s.lasso.tol);
        s.lasso.standardize = t.value("standardize", s.lasso.standardize);
    }
    s.random_k = j.value("random_k", s.random_k);
    s.oracle_support = j.value("oracle_support", s.oracle_support);
}

inline ordered_json to_json(const ExperimentConfig& c) {
    ordered_json j;
    j["design"] = to_json(c.design);
    j["method"] = method_name(c.method);
    j["selector"] = to_json(c.selector);
    j["alpha"] = c.alpha;
    j["replications"] = c.replications;
    j["shrink_c"] = c.shrink_c;
    j["r_splits"] = c.r_splits;
    j["frac_inf"] = c.frac_inf;
    j["wild_boot"] = {{"n_boot", c.wild_boot.n_boot}, {"multiplier", to_string(c.wild_boot.multiplier)}};
    j["crossfit_folds"] = c.crossfit_folds;
    j["eval_null_count"] = c.eval_null_count;
    j["master_seed"] = c.master_seed;
    j["label"] = c.label;
    return j;
}

inline void from_json(const ordered_json& j, ExperimentConfig& c) {
    if (j.contains("design")) from_json(j["design"], c.design);
    if (j.contains("method")) c.method = method_from_string(j["method"]);
    if (j.contains("selector")) from_json(j["selector"], c.selector);
    c.alpha = j.value("alpha", c.alpha);
    c.replications = j.value("replications", c.replications);
    c.shrink_c = j.value("shrink_c", c.shrink_c);
    c.r_splits = j.value("r_splits", c.r_splits);
    c.frac_inf = j.value("frac_inf", c.frac_inf);
    if (j.contains("wild_boot")) {
        const auto& w = j["wild_boot"];
        c.wild_boot.n_boot = w.value("n_boot", c.wild_boot.n_boot);
        if (w.contains("multiplier")) c.wild_boot.multiplier = multiplier_from_string(w["multiplier"]);
    }
    c.crossfit_folds = j.value("crossfit_folds", c.crossfit_folds);
    c.eval_null_count = j.value("eval_null_count", c.eval_null_count);
    c.master_seed = j.value("master_seed", c.master_seed);
    c.label = j.value("label", c.label);
}

inline ordered_json to_json(const BenchReport& r) {
    ordered_json j;
    j["method"] = r.method;
    j["label"] = r.label;
    j["alpha"] = r.alpha;
    j["shrink_c"] = r.shrink_c;
    j["replications"] = r.replications;
    auto opt = [](const std::optional<double>& v) {
        return v ? ordered_json(*v) : ordered_json(nullptr);
    };
    j["conditional_coverage"] = opt(r.conditional_coverage);
    j["mil"] = opt(r.mil);
    j["power"] = opt(r.power);
    j["null_rejection"] = opt(r.null_rejection);
    j["ks_null_plaus"] = opt(r.ks_null_plaus);
    j["false_confidence"] = opt(r.false_confidence);
    j["n_selected_total"] = r.n_selected_total;
    j["no_selection_reps"] = r.no_selection_reps;
    j["infinite_or_na_rate"] = r.infinite_or_na_rate;
    j["coverage_curve"] = ordered_json::array();
    for (const auto& [a, cov] : r.coverage_curve) j["coverage_curve"].push_back({a, cov});
    return j;
}

/// Per-replication records; coordinates are reported as 1-based labels.
inline void write_records_csv(const std::string& path, const std::vector<CoordOutcome>& records) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "rep,coord,active,beta_true,estimate,pi_truth,n_segments,lo,hi,total_length,covered,reject_null\n";
    for (const auto& r : records) {
        double lo = std::numeric_limits<double>::quiet_NaN(), hi = lo;
        int nseg = 0;
        for (const auto& s : r.segments) {
            if (s.none) continue;
            if (nseg == 0) lo = s.lo;
            hi = s.hi;
            ++nseg;
        }
        out << r.rep << ',' << (r.coord + 1) << ',' << (r.active ? 1 : 0) << ','
            << format_double(r.beta_true) << ',' << format_double(r.estimate) << ','
            << format_double(r.pi_truth) << ',' << nseg << ',' << format_double(lo) << ','
            << format_double(hi) << ',' << format_double(r.length) << ',' << (r.covered ? 1 : 0)
            << ',' << (r.reject_null ? 1 : 0) << '\n';
    }
}

inline void write_json_file(const std::string& path, const ordered_json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << '\n';
}

} // namespace rspim
