#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tvdiff/analytics/dic.hpp"
#include "tvdiff/analytics/penetration.hpp"
#include "tvdiff/core/simulate.hpp"
#include "tvdiff/error.hpp"
#include "tvdiff/io/config.hpp"
#include "tvdiff/io/csv.hpp"
#include "tvdiff/io/panel_io.hpp"
#include "tvdiff/io/report.hpp"
#include "tvdiff/sampler/gibbs.hpp"

namespace fs = std::filesystem;
using namespace tvdiff;

namespace {

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> chains;
    std::optional<std::size_t> iterations;
    std::string out;
    std::string variant;
    std::string data;
};

void add_common(CLI::App* app, CommonOptions& o) {
    app->add_option("--config", o.config, "key = value configuration file");
    app->add_option("--seed", o.seed, "random seed");
    app->add_option("--chains", o.chains, "number of chains");
    app->add_option("--iterations", o.iterations, "iterations per chain");
    app->add_option("--out", o.out, "output directory");
    app->add_option("--variant", o.variant, "since-intro | calendar | invariant");
    app->add_option("--data", o.data, "directory holding adoption.csv and covariates.csv");
}

io::RunConfig resolve(const CommonOptions& o) {
    io::RunConfig c = o.config.empty() ? io::RunConfig{} : io::load_config(o.config);
    if (o.seed) c.sampler.rng_seed = *o.seed;
    if (o.chains) c.sampler.n_chains = *o.chains;
    if (o.iterations) {
        c.sampler.n_iterations = *o.iterations;
        if (!c.burn_in_set) c.sampler.burn_in = *o.iterations / 5;
    }
    if (!o.variant.empty()) c.sampler.variant = parse_variant(o.variant);
    if (!o.out.empty()) c.output_dir = o.out;
    if (!o.data.empty()) {
        c.adoption_path = (fs::path(o.data) / "adoption.csv").string();
        c.covariate_path = fs::exists(fs::path(o.data) / "covariates.csv")
                               ? (fs::path(o.data) / "covariates.csv").string()
                               : std::string();
    }
    io::validate(c);
    return c;
}

fs::path require_out(const io::RunConfig& c) {
    if (c.output_dir.empty()) throw ConfigError("no output directory (use --out or output_dir)");
    fs::create_directories(c.output_dir);
    return c.output_dir;
}

PanelDataset load_data(const io::RunConfig& c) {
    if (c.adoption_path.empty()) throw ConfigError("no adoption data (use --data or adoption_path)");
    return io::load_panel(c.adoption_path, c.covariate_path);
}

int run_simulate(const CommonOptions& o) {
    const io::RunConfig c = resolve(o);
    const fs::path out = require_out(c);
    const std::uint64_t seed = c.sampler.rng_seed;
    const SimulationTruth truth = default_truth(c.simulation, seed);
    const SimulationResult sim = simulate_panel(c.simulation, truth, seed);
    io::save_panel(sim.panel, (out / "adoption.csv").string(), (out / "covariates.csv").string());

    io::CsvWriter alpha((out / "truth_alpha.csv").string());
    alpha.row({"country", "product", "alpha"});
    const ModelData index(sim.panel, ModelVariant::time_varying_since_intro);
    for (std::size_t p = 0; p < index.pairs().size(); ++p)
        alpha.row({sim.panel.countries[index.pairs()[p].country], sim.panel.products[index.pairs()[p].product],
                   io::format_double(sim.truth.alpha[p])});

    io::CsvWriter params((out / "truth_parameters.csv").string());
    params.row({"parameter", "value"});
    params.row({"theta_L", io::format_double(sim.truth.theta_L)});
    params.row({"theta_B", io::format_double(sim.truth.theta_B)});
    for (std::size_t n = 0; n < sim.truth.tau.size(); ++n)
        params.row({"tau_" + sim.panel.products[n], io::format_double(sim.truth.tau[n])});
    for (std::size_t k = 0; k < sim.truth.gamma.size(); ++k) {
        params.row({"beta_" + sim.panel.covariates.names[k], io::format_double(sim.truth.beta(static_cast<Eigen::Index>(k)))});
        params.row({"gamma_" + sim.panel.covariates.names[k], std::to_string(sim.truth.gamma[k])});
    }
    params.row({"truncation_events", std::to_string(sim.truncation_events)});

    io::CsvWriter f((out / "truth_f.csv").string());
    f.row({"t", "f"});
    for (int g = 0; g <= 100; ++g) {
        const double t = truth.f.a + (truth.f.b - truth.f.a) * g / 100.0;
        f.row({io::format_double(t), io::format_double(spline::evaluate_f(truth.f, std::min(t, truth.f.b)))});
    }
    std::cout << "simulated " << sim.panel.series.size() << " series (" << sim.panel.countries.size()
              << " countries x " << sim.panel.products.size() << " products); truncation events "
              << sim.truncation_events << "\n";
    return 0;
}

DicResult fit_variant(const io::RunConfig& c, const PanelDataset& panel, ModelVariant variant, const fs::path& dir) {
    SamplerConfig sc = c.sampler;
    sc.variant = variant;
    const ModelData data(panel, variant);
    const auto chains = run_chains(data, c.hyper, sc);
    return io::write_fit_outputs(dir, chains, data, panel);
}

int run_fit(const CommonOptions& o) {
    const io::RunConfig c = resolve(o);
    const fs::path out = require_out(c);
    const PanelDataset panel = load_data(c);
    const DicResult dic = fit_variant(c, panel, c.sampler.variant, out);
    std::printf("variant %s: d_bar %.4f p_d %.4f dic %.4f\n", dic.variant.c_str(), dic.d_bar, dic.p_d, dic.dic);
    return 0;
}

int run_compare(const CommonOptions& o) {
    const io::RunConfig c = resolve(o);
    if (c.compare_variants.size() < 2) throw ConfigError("compare needs at least two variants");
    const fs::path out = require_out(c);
    const PanelDataset panel = load_data(c);
    std::vector<DicResult> results;
    for (ModelVariant v : c.compare_variants) results.push_back(fit_variant(c, panel, v, out / to_string(v)));
    io::write_dic(out / "dic_table.csv", results);
    for (const auto& r : results)
        std::printf("%-12s d_bar %.4f p_d %.4f dic %.4f\n", r.variant.c_str(), r.d_bar, r.p_d, r.dic);
    return 0;
}

struct TtpOptions {
    std::string speed = "constant";
    double lambda = 0.0;
    double p1 = 0.0, p2 = 0.0, t1 = 0.0;
    std::string fit, country, product, transform = "linear";
};

int run_ttp(const TtpOptions& o) {
    double dt = 0.0;
    if (o.speed == "constant") {
        dt = time_to_penetration_constant(o.lambda, o.p1, o.p2);
    } else if (o.speed == "linear") {
        dt = time_to_penetration_linear(o.lambda, o.t1, o.p1, o.p2);
    } else if (o.speed == "trajectory") {
        if (o.fit.empty() || o.country.empty() || o.product.empty())
            throw ConfigError("trajectory speed needs --fit, --country and --product");
        const io::CsvTable traj = io::read_csv((fs::path(o.fit) / "trajectories.csv").string());
        const int cc = traj.require_column("country"), cp = traj.require_column("product");
        const int ct = traj.require_column("t"), ctr = traj.require_column("transform");
        const int cm = traj.require_column("mean");
        std::vector<double> ts, vs;
        for (const auto& row : traj.rows) {
            const auto cell = [&](int c) -> const std::string& { return row.cells[static_cast<std::size_t>(c)]; };
            if (cell(cc) != o.country || cell(cp) != o.product || cell(ctr) != o.transform) continue;
            ts.push_back(io::parse_double(cell(ct), traj.where(row), "t"));
            vs.push_back(io::parse_double(cell(cm), traj.where(row), "mean"));
        }
        if (ts.empty()) throw DataError("no trajectory for " + o.country + "/" + o.product + " in " + o.fit);
        dt = time_to_penetration_numeric(interpolate_speed(ts, vs), o.p1, o.p2, o.t1);
    } else {
        throw ConfigError("--speed must be constant, linear or trajectory");
    }
    std::printf("%.5f\n", dt);
    return 0;
}

int run_report(const std::string& fit_dir, const std::string& out_dir) {
    if (fit_dir.empty()) throw ConfigError("report needs --fit DIR");
    const fs::path out = out_dir.empty() ? fs::path(fit_dir) / "report" : fs::path(out_dir);
    io::write_report(fit_dir, out);
    std::cout << "report written to " << out.string() << "\n";
    return 0;
}

int fail(ErrorCategory category, const std::string& name, const std::string& message) {
    std::cerr << "error category=" << name << " exit=" << static_cast<int>(category) << " message=\"" << message
              << "\"\n";
    return static_cast<int>(category);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical Bayesian diffusion model with time-varying speeds"};
    app.require_subcommand(1);

    CommonOptions sim_opts, fit_opts, cmp_opts;
    add_common(app.add_subcommand("simulate", "generate a synthetic panel"), sim_opts);
    add_common(app.add_subcommand("fit", "fit one model variant"), fit_opts);
    add_common(app.add_subcommand("compare", "fit several variants and rank them by DIC"), cmp_opts);

    TtpOptions ttp;
    auto* ttp_cmd = app.add_subcommand("ttp", "time to move between two penetration levels");
    ttp_cmd->add_option("--speed", ttp.speed, "constant | linear | trajectory");
    ttp_cmd->add_option("--lambda", ttp.lambda, "speed (constant) or slope (linear)");
    ttp_cmd->add_option("--p1", ttp.p1, "starting penetration level")->required();
    ttp_cmd->add_option("--p2", ttp.p2, "target penetration level")->required();
    ttp_cmd->add_option("--t1", ttp.t1, "starting time");
    ttp_cmd->add_option("--fit", ttp.fit, "fit directory (trajectory speed)");
    ttp_cmd->add_option("--country", ttp.country, "country (trajectory speed)");
    ttp_cmd->add_option("--product", ttp.product, "product (trajectory speed)");
    ttp_cmd->add_option("--transform", ttp.transform, "linear | exponentiated (trajectory speed)");

    std::string report_fit, report_out;
    auto* report_cmd = app.add_subcommand("report", "tables for plotting from a fit directory");
    report_cmd->add_option("--fit", report_fit, "fit directory");
    report_cmd->add_option("--out", report_out, "report directory (default FIT/report)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail(ErrorCategory::config, "config_error", e.what());
    }

    try {
        if (app.got_subcommand("simulate")) return run_simulate(sim_opts);
        if (app.got_subcommand("fit")) return run_fit(fit_opts);
        if (app.got_subcommand("compare")) return run_compare(cmp_opts);
        if (app.got_subcommand("ttp")) return run_ttp(ttp);
        if (app.got_subcommand("report")) return run_report(report_fit, report_out);
    } catch (const Error& e) {
        return fail(e.category(), e.category_name(), e.what());
    } catch (const std::domain_error& e) {
        return fail(ErrorCategory::config, "config_error", e.what());
    } catch (const std::invalid_argument& e) {
        return fail(ErrorCategory::config, "config_error", e.what());
    } catch (const std::exception& e) {
        return fail(ErrorCategory::numerical, "numerical_error", e.what());
    }
    return 0;
}
