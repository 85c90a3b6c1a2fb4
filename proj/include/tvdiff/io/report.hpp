#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <tuple>
#include <string>
#include <vector>

#include "tvdiff/analytics/dic.hpp"
#include "tvdiff/analytics/trajectory.hpp"
#include "tvdiff/core/model.hpp"
#include "tvdiff/core/panel.hpp"
#include "tvdiff/io/csv.hpp"
#include "tvdiff/sampler/diagnostics.hpp"
#include "tvdiff/sampler/gibbs.hpp"

namespace tvdiff::io {

namespace fs = std::filesystem;

inline std::string pair_label(const PanelDataset& panel, const ModelData::Pair& p) {
    return panel.countries.at(p.country) + "/" + panel.products.at(p.product);
}

inline std::string join(const std::vector<double>& v, char sep = ';') {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i > 0) out += sep;
        out += format_double(v[i]);
    }
    return out;
}

inline std::vector<double> split_doubles(const std::string& s, const std::string& where, char sep = ';') {
    std::vector<double> out;
    if (s.empty()) return out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        out.push_back(parse_double(s.substr(start, pos == std::string::npos ? std::string::npos : pos - start), where,
                                   "list"));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

/// Per-draw scalars, ceilings and splines of every chain.
inline void write_draws(const fs::path& dir, const std::vector<ChainOutput>& chains, const ModelData& data,
                        const PanelDataset& panel) {
    fs::create_directories(dir);
    const std::size_t K = data.n_covariates();
    const auto cov_name = [&](std::size_t k) {
        return k < panel.covariates.size() ? panel.covariates.names[k] : "x" + std::to_string(k + 1);
    };

    CsvWriter scalars((dir / "draws.csv").string());
    std::vector<std::string> header = {"chain", "draw", "deviance", "theta_L", "theta_A", "theta_B", "k"};
    for (std::size_t n = 0; n < data.n_products(); ++n) header.push_back("tau_" + panel.products.at(n));
    for (std::size_t k = 0; k < K; ++k) header.push_back("beta_" + cov_name(k));
    for (std::size_t k = 0; k < K; ++k) header.push_back("gamma_" + cov_name(k));
    scalars.row(header);

    CsvWriter alpha((dir / "alpha_draws.csv").string());
    header = {"chain", "draw"};
    for (const auto& p : data.pairs()) header.push_back("alpha_" + pair_label(panel, p));
    alpha.row(header);

    CsvWriter splines((dir / "spline_draws.csv").string());
    splines.row({"chain", "draw", "a", "b", "k", "knots", "omega"});

    for (std::size_t c = 0; c < chains.size(); ++c)
        for (std::size_t i = 0; i < chains[c].draws.size(); ++i) {
            const ModelState& d = chains[c].draws[i];
            std::vector<std::string> row = {std::to_string(c), std::to_string(i), format_double(chains[c].deviance[i]),
                                            format_double(d.theta_L), format_double(d.theta_A),
                                            format_double(d.theta_B), std::to_string(d.spline.k())};
            for (double t : d.tau) row.push_back(format_double(t));
            for (Eigen::Index k = 0; k < d.beta.size(); ++k) row.push_back(format_double(d.beta(k)));
            for (int g : d.gamma) row.push_back(std::to_string(g));
            scalars.row(row);

            row = {std::to_string(c), std::to_string(i)};
            for (double a : d.alpha) row.push_back(format_double(a));
            alpha.row(row);

            const std::vector<double> omega(d.spline.omega.data(), d.spline.omega.data() + d.spline.omega.size());
            splines.row({std::to_string(c), std::to_string(i), format_double(d.spline.a), format_double(d.spline.b),
                         std::to_string(d.spline.k()), join(d.spline.knots), join(omega)});
        }
}

/// Reads draws back into chain outputs. Speeds and B_i(t) are not stored,
/// so those fields stay empty.
inline std::vector<ChainOutput> read_draws(const fs::path& dir) {
    const CsvTable scalars = read_csv((dir / "draws.csv").string());
    const CsvTable alpha = read_csv((dir / "alpha_draws.csv").string());
    const CsvTable splines = read_csv((dir / "spline_draws.csv").string());
    if (alpha.rows.size() != scalars.rows.size() || splines.rows.size() != scalars.rows.size())
        throw DataError(dir.string() + ": draw files have different lengths");

    std::vector<std::size_t> tau_cols, beta_cols, gamma_cols;
    for (std::size_t c = 0; c < scalars.header.size(); ++c) {
        const std::string& h = scalars.header[c];
        if (h.rfind("tau_", 0) == 0) tau_cols.push_back(c);
        if (h.rfind("beta_", 0) == 0) beta_cols.push_back(c);
        if (h.rfind("gamma_", 0) == 0) gamma_cols.push_back(c);
    }
    const int c_chain = scalars.require_column("chain"), c_dev = scalars.require_column("deviance");
    const int c_L = scalars.require_column("theta_L"), c_A = scalars.require_column("theta_A");
    const int c_B = scalars.require_column("theta_B");

    std::vector<ChainOutput> chains;
    for (std::size_t r = 0; r < scalars.rows.size(); ++r) {
        const CsvRow& row = scalars.rows[r];
        const std::string where = scalars.where(row);
        const auto cell = [&](int c) -> const std::string& { return row.cells[static_cast<std::size_t>(c)]; };
        const auto chain = static_cast<std::size_t>(parse_integer(cell(c_chain), where, "chain"));
        if (chain >= chains.size()) chains.resize(chain + 1);
        ModelState d;
        d.theta_L = parse_double(cell(c_L), where, "theta_L");
        d.theta_A = parse_double(cell(c_A), where, "theta_A");
        d.theta_B = parse_double(cell(c_B), where, "theta_B");
        for (std::size_t c : tau_cols) d.tau.push_back(parse_double(row.cells[c], where, scalars.header[c]));
        d.beta.resize(static_cast<Eigen::Index>(beta_cols.size()));
        for (std::size_t k = 0; k < beta_cols.size(); ++k)
            d.beta(static_cast<Eigen::Index>(k)) = parse_double(row.cells[beta_cols[k]], where, "beta");
        for (std::size_t c : gamma_cols)
            d.gamma.push_back(static_cast<int>(parse_integer(row.cells[c], where, scalars.header[c])));

        const CsvRow& arow = alpha.rows[r];
        for (std::size_t c = 2; c < arow.cells.size(); ++c)
            d.alpha.push_back(parse_double(arow.cells[c], alpha.where(arow), alpha.header[c]));

        const CsvRow& srow = splines.rows[r];
        const std::string swhere = splines.where(srow);
        d.spline.a = parse_double(srow.cells[2], swhere, "a");
        d.spline.b = parse_double(srow.cells[3], swhere, "b");
        d.spline.knots = split_doubles(srow.cells[5], swhere);
        const auto omega = split_doubles(srow.cells[6], swhere);
        d.spline.omega = Eigen::Map<const Eigen::VectorXd>(omega.data(), static_cast<Eigen::Index>(omega.size()));

        chains[chain].draws.push_back(std::move(d));
        chains[chain].deviance.push_back(parse_double(cell(c_dev), where, "deviance"));
    }
    return chains;
}

inline void write_band(const fs::path& path, const std::vector<BandPoint>& band) {
    CsvWriter w(path.string());
    w.row({"t", "mean", "lower", "upper"});
    for (const auto& p : band)
        w.row({format_double(p.t), format_double(p.mean), format_double(p.lower), format_double(p.upper)});
}

inline void write_dic(const fs::path& path, const std::vector<DicResult>& results) {
    CsvWriter w(path.string());
    w.row({"variant", "d_bar", "p_d", "dic", "rank"});
    std::vector<std::size_t> order(results.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return results[a].dic < results[b].dic; });
    std::vector<std::size_t> rank(results.size());
    for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r + 1;
    for (std::size_t i = 0; i < results.size(); ++i)
        w.row({results[i].variant, format_double(results[i].d_bar), format_double(results[i].p_d),
               format_double(results[i].dic), std::to_string(rank[i])});
}

inline std::vector<DicResult> read_dic(const fs::path& path) {
    const CsvTable t = read_csv(path.string());
    std::vector<DicResult> out;
    for (const CsvRow& row : t.rows) {
        const std::string where = t.where(row);
        DicResult r;
        r.variant = row.cells.at(static_cast<std::size_t>(t.require_column("variant")));
        r.d_bar = parse_double(row.cells.at(static_cast<std::size_t>(t.require_column("d_bar"))), where, "d_bar");
        r.p_d = parse_double(row.cells.at(static_cast<std::size_t>(t.require_column("p_d"))), where, "p_d");
        r.dic = parse_double(row.cells.at(static_cast<std::size_t>(t.require_column("dic"))), where, "dic");
        out.push_back(r);
    }
    return out;
}

/// Scalar selectors reported with R-hat: precisions and coefficients.
inline std::vector<std::pair<std::string, std::function<double(const ModelState&)>>> rhat_scalars(
    const ModelData& data, const PanelDataset& panel) {
    std::vector<std::pair<std::string, std::function<double(const ModelState&)>>> out = {
        {"theta_L", [](const ModelState& s) { return s.theta_L; }},
        {"theta_A", [](const ModelState& s) { return s.theta_A; }},
        {"theta_B", [](const ModelState& s) { return s.theta_B; }},
    };
    for (std::size_t k = 0; k < data.n_covariates(); ++k) {
        const std::string name = k < panel.covariates.size() ? panel.covariates.names[k] : std::to_string(k);
        out.emplace_back("beta_" + name, [k](const ModelState& s) { return s.beta(static_cast<Eigen::Index>(k)); });
    }
    return out;
}

/// Summary tables of one fitted variant.
inline DicResult write_fit_outputs(const fs::path& dir, const std::vector<ChainOutput>& chains,
                                   const ModelData& data, const PanelDataset& panel) {
    write_draws(dir, chains, data, panel);

    const DicResult dic = compute_dic(chains, data);
    write_dic(dir / "dic.csv", {dic});

    {
        const auto incl = inclusion_probabilities(chains);
        const auto rb = inclusion_probabilities_rao_blackwell(chains);
        CsvWriter w((dir / "inclusion.csv").string());
        w.row({"covariate", "inclusion", "inclusion_rao_blackwell"});
        for (std::size_t k = 0; k < incl.size(); ++k)
            w.row({k < panel.covariates.size() ? panel.covariates.names[k] : std::to_string(k), format_double(incl[k]),
                   format_double(rb[k])});
    }
    {
        CsvWriter w((dir / "rhat.csv").string());
        w.row({"parameter", "rhat"});
        if (chains.size() >= 2)
            for (const auto& [name, sel] : rhat_scalars(data, panel)) w.row({name, format_double(gelman_rubin(chains, sel))});
    }
    write_band(dir / "f_band.csv", f_band(chains, abscissa_grid(data)));
    {
        CsvWriter w((dir / "trajectories.csv").string());
        w.row({"country", "product", "year", "t", "transform", "mean", "lower", "upper"});
        for (const auto& pair : data.pairs())
            for (const auto transform : {TrajectoryTransform::linear_sum, TrajectoryTransform::exponentiated_sum})
                for (const auto& p : speed_trajectory(chains, data, pair.country, pair.product, transform))
                    w.row({panel.countries[pair.country], panel.products[pair.product], std::to_string(p.year),
                           format_double(p.t), transform == TrajectoryTransform::linear_sum ? "linear" : "exponentiated",
                           format_double(p.mean), format_double(p.lower), format_double(p.upper)});
    }
    {
        CsvWriter w((dir / "alpha_summary.csv").string());
        w.row({"country", "product", "mean", "q05", "q95", "q025", "q975"});
        for (std::size_t p = 0; p < data.pairs().size(); ++p) {
            std::vector<double> v;
            for (const auto& c : chains)
                for (const auto& d : c.draws) v.push_back(d.alpha[p]);
            double mean = 0.0;
            for (double x : v) mean += x;
            mean /= static_cast<double>(v.size());
            const auto& pair = data.pairs()[p];
            w.row({panel.countries[pair.country], panel.products[pair.product], format_double(mean),
                   format_double(quantile(v, 0.05)), format_double(quantile(v, 0.95)),
                   format_double(quantile(v, 0.025)), format_double(quantile(v, 0.975))});
        }
    }
    {
        CsvWriter w((dir / "chains.csv").string());
        w.row({"chain", "seed", "draws", "lambda_acceptance", "alpha_acceptance", "knot_acceptance", "rw_step",
               "ill_conditioned_knots", "selection_warnings"});
        for (std::size_t c = 0; c < chains.size(); ++c) {
            const auto& ch = chains[c];
            w.row({std::to_string(c), std::to_string(ch.seed), std::to_string(ch.draws.size()),
                   format_double(ch.acceptance.lambda), format_double(ch.acceptance.alpha),
                   format_double(ch.acceptance.knots), format_double(ch.rw_step),
                   std::to_string(ch.ill_conditioned_knots), std::to_string(ch.selection_warnings)});
        }
    }
    return dic;
}

/// Gaussian kernel density with Silverman's bandwidth on [0, 1].
inline std::vector<std::pair<double, double>> kernel_density(const std::vector<double>& x, std::size_t points = 101) {
    const auto n = static_cast<double>(x.size());
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    const double sd = x.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    const double h = std::max(1.06 * sd * std::pow(n, -0.2), 0.01);
    std::vector<std::pair<double, double>> out;
    for (std::size_t g = 0; g < points; ++g) {
        const double t = static_cast<double>(g) / static_cast<double>(points - 1);
        double dens = 0.0;
        for (double v : x) dens += std::exp(-0.5 * (t - v) * (t - v) / (h * h));
        out.emplace_back(t, dens / (n * h * std::sqrt(2.0 * std::numbers::pi)));
    }
    return out;
}

/// Report tables derived from a fit directory: per-chain inclusion
/// probabilities and their densities, parameter summaries, the f(t) band
/// and a per-product expected-speed table.
inline void write_report(const fs::path& fit_dir, const fs::path& out_dir) {
    const auto chains = read_draws(fit_dir);
    if (chains.empty() || chains.front().draws.empty()) throw DataError(fit_dir.string() + ": no draws to report");
    fs::create_directories(out_dir);
    const CsvTable scalars = read_csv((fit_dir / "draws.csv").string());
    std::vector<std::string> cov_names;
    for (const auto& h : scalars.header)
        if (h.rfind("gamma_", 0) == 0) cov_names.push_back(h.substr(6));

    {
        CsvWriter runs((out_dir / "inclusion_runs.csv").string());
        runs.row({"chain", "covariate", "inclusion"});
        std::vector<std::vector<double>> per_cov(cov_names.size());
        for (std::size_t c = 0; c < chains.size(); ++c) {
            if (chains[c].draws.empty()) continue;
            const auto incl = inclusion_probabilities(chains[c]);
            for (std::size_t k = 0; k < incl.size(); ++k) {
                runs.row({std::to_string(c), cov_names[k], format_double(incl[k])});
                per_cov[k].push_back(incl[k]);
            }
        }
        CsvWriter dens((out_dir / "inclusion_density.csv").string());
        dens.row({"covariate", "x", "density"});
        for (std::size_t k = 0; k < per_cov.size(); ++k)
            for (const auto& [x, d] : kernel_density(per_cov[k])) dens.row({cov_names[k], format_double(x), format_double(d)});
    }
    {
        CsvWriter w((out_dir / "parameter_summary.csv").string());
        w.row({"parameter", "mean", "sd", "q025", "q975", "rhat"});
        std::vector<std::pair<std::string, std::function<double(const ModelState&)>>> sel = {
            {"theta_L", [](const ModelState& s) { return s.theta_L; }},
            {"theta_A", [](const ModelState& s) { return s.theta_A; }},
            {"theta_B", [](const ModelState& s) { return s.theta_B; }},
            {"k", [](const ModelState& s) { return static_cast<double>(s.spline.k()); }},
        };
        for (std::size_t k = 0; k < cov_names.size(); ++k)
            sel.emplace_back("beta_" + cov_names[k], [k](const ModelState& s) { return s.beta(static_cast<Eigen::Index>(k)); });
        std::size_t min_len = chains.front().draws.size();
        for (const auto& c : chains) min_len = std::min(min_len, c.draws.size());
        for (const auto& [name, f] : sel) {
            std::vector<double> all;
            std::vector<std::vector<double>> per;
            for (const auto& c : chains) {
                per.emplace_back();
                for (const auto& d : c.draws) {
                    all.push_back(f(d));
                    if (per.back().size() < min_len) per.back().push_back(f(d));
                }
            }
            double mean = 0.0;
            for (double v : all) mean += v;
            mean /= static_cast<double>(all.size());
            double ss = 0.0;
            for (double v : all) ss += (v - mean) * (v - mean);
            const double sd = all.size() > 1 ? std::sqrt(ss / static_cast<double>(all.size() - 1)) : 0.0;
            const std::string rhat = per.size() >= 2 && min_len >= 2 ? format_double(gelman_rubin(per)) : "nan";
            w.row({name, format_double(mean), format_double(sd), format_double(quantile(all, 0.025)),
                   format_double(quantile(all, 0.975)), rhat});
        }
    }
    {
        const auto& first = chains.front().draws.front().spline;
        std::vector<double> grid(101);
        for (std::size_t g = 0; g < grid.size(); ++g) grid[g] = first.a + (first.b - first.a) * static_cast<double>(g) / 100.0;
        grid.back() = first.b;
        write_band(out_dir / "f_band.csv", f_band(chains, grid));
    }
    if (fs::exists(fit_dir / "trajectories.csv")) {
        // Average of the per-pair posterior mean speeds by product and abscissa.
        const CsvTable traj = read_csv((fit_dir / "trajectories.csv").string());
        const int c_product = traj.require_column("product"), c_t = traj.require_column("t");
        const int c_tr = traj.require_column("transform"), c_mean = traj.require_column("mean");
        std::map<std::tuple<std::string, std::string, double>, std::pair<double, std::size_t>> acc;
        for (const CsvRow& row : traj.rows) {
            const auto cell = [&](int c) -> const std::string& { return row.cells[static_cast<std::size_t>(c)]; };
            auto& a = acc[{cell(c_product), cell(c_tr), parse_double(cell(c_t), traj.where(row), "t")}];
            a.first += parse_double(cell(c_mean), traj.where(row), "mean");
            ++a.second;
        }
        CsvWriter w((out_dir / "speed_table.csv").string());
        w.row({"product", "transform", "t", "expected_speed", "pairs"});
        for (const auto& [key, a] : acc)
            w.row({std::get<0>(key), std::get<1>(key), format_double(std::get<2>(key)),
                   format_double(a.first / static_cast<double>(a.second)), std::to_string(a.second)});
    }
    if (fs::exists(fit_dir / "dic.csv")) write_dic(out_dir / "dic.csv", read_dic(fit_dir / "dic.csv"));
}

}  // namespace tvdiff::io
