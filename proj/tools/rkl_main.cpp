#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "rkl/config.hpp"
#include "rkl/edmd.hpp"
#include "rkl/errors.hpp"
#include "rkl/model_io.hpp"
#include "rkl/pipeline.hpp"
#include "rkl/rls.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir = ".";
    std::vector<std::string> overrides;
};

void add_common(CLI::App* sub, CommonArgs& args, bool config_required = true) {
    auto* c = sub->add_option("--config", args.config_path, "configuration file");
    if (config_required) c->required();
    sub->add_option("--out", args.out_dir, "output directory (created if missing)");
    sub->add_option("--set", args.overrides, "key=value override, repeatable");
}

rkl::ConfigMap load_config(const CommonArgs& args) {
    rkl::ConfigMap cfg = args.config_path.empty() ? rkl::ConfigMap{}
                                                  : rkl::ConfigMap::from_file(args.config_path);
    for (const std::string& o : args.overrides) cfg.apply_override(o);
    return cfg;
}

fs::path ensure_out(const CommonArgs& args) {
    fs::path dir(args.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw rkl::IoError("cannot create output directory '" + args.out_dir + "'");
    return dir;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw rkl::IoError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw rkl::IoError("write to '" + path.string() + "' failed");
}

rkl::ChainSpec chain_from_config(const rkl::ConfigMap& cfg) {
    rkl::ChainSpec spec;
    spec.n = cfg.get_int("chain_n", 8);
    spec.seed = cfg.get_u64("chain_seed", 1);
    const double rho = cfg.get_double("chain_spectral_radius", 0.9);
    spec.A = rkl::random_stable_matrix(spec.n, rho, cfg.get_u64("chain_matrix_seed", 42));
    const double noise = cfg.get_double("chain_noise", 1.0);
    if (!(noise > 0)) throw rkl::ConfigError("chain_noise must be positive");
    spec.noise_cov = noise * Eigen::MatrixXd::Identity(spec.n, spec.n);
    spec.validate();
    return spec;
}

rkl::BasisSpec conv_basis_from_config(const rkl::ConfigMap& cfg, int n) {
    const std::string kind = cfg.get_string("conv_basis", "identity");
    if (kind == "identity") return rkl::BasisSpec::identity(n);
    if (kind == "polynomial")
        return rkl::BasisSpec::polynomial(n, cfg.get_int("conv_poly_degree", 2));
    throw rkl::ConfigError("conv_basis must be 'identity' or 'polynomial', got '" + kind + "'");
}

int cmd_collect(const CommonArgs& args) {
    const rkl::ConfigMap cfg = load_config(args);
    const rkl::RunConfig rc = rkl::RunConfig::from_config(cfg);
    const fs::path dir = ensure_out(args);
    for (const std::uint64_t seed : rc.seeds) {
        const rkl::CollectedData data = rkl::collect_initial(rc, seed);
        const fs::path path = dir / ("dataset_seed" + std::to_string(seed) + ".csv");
        rkl::save_trajectory_csv(path.string(), data.t, data.x, data.u,
                                 rc.echo + "; collect_seed=" + std::to_string(seed));
        std::cout << "wrote " << path.string() << " (" << data.dataset.size() << " snapshots)\n";
    }
    return 0;
}

int cmd_fit(const CommonArgs& args) {
    const rkl::ConfigMap cfg = load_config(args);
    const rkl::RunConfig rc = rkl::RunConfig::from_config(cfg);
    const fs::path dir = ensure_out(args);

    const rkl::CollectedData data = rkl::collect_initial(rc, rc.seeds.front());
    const rkl::Basis phi = rkl::Basis::make(rc.state_basis);
    const rkl::Basis psi = rkl::Basis::make(rc.control_basis);
    Eigen::MatrixXd Y, Ybar;
    rkl::assemble_snapshots(data.dataset, phi, &psi, Y, Ybar);
    const rkl::WellposednessReport wp = rkl::wellposedness_report(Y);

    rkl::KoopmanModel model = rkl::fit_edmd(Y, Ybar, phi.output_dim(), rc.ridge);
    model.state_basis = rc.state_basis;
    model.control_basis = rc.control_basis;
    model.has_control = true;
    model.dt = data.dataset.dt;

    const fs::path model_path = dir / "model.bin";
    rkl::save_model(model_path.string(), model, rc.echo);

    json j;
    j["format_version"] = 1;
    j["config"] = rc.echo;
    j["wellposedness"] = {{"rank", wp.rank},
                          {"dim", wp.dim},
                          {"cond", wp.cond},
                          {"sigma_min", wp.sigma_min},
                          {"sigma_max", wp.sigma_max},
                          {"full_rank", wp.full_rank}};
    j["samples"] = model.sample_count;
    write_text(dir / "wellposedness.json", j.dump(2) + "\n");

    std::cout << "wrote " << model_path.string() << "\n" << rkl::describe(wp) << "\n";
    return 0;
}

int cmd_run(const CommonArgs& args) {
    const rkl::ConfigMap cfg = load_config(args);
    const rkl::RunConfig rc = rkl::RunConfig::from_config(cfg);
    const fs::path dir = ensure_out(args);

    const rkl::EvalReport rep = rkl::run_experiment(rc);
    write_text(dir / "report.json", rep.to_json() + "\n");

    for (const rkl::SeedResult& r : rep.per_seed) {
        std::vector<double> t(r.tip.size());
        std::vector<Eigen::VectorXd> x(r.tip.size()), u(r.tip.size());
        for (std::size_t k = 0; k < r.tip.size(); ++k) {
            t[k] = static_cast<double>(k) * rc.arm.dt;
            Eigen::VectorXd row(4);
            row << r.tip[k], r.tip_ref[k];
            x[k] = row;
            u[k] = Eigen::VectorXd(0);
        }
        const fs::path path = dir / ("tips_seed" + std::to_string(r.seed) + ".csv");
        rkl::save_trajectory_csv(path.string(), t, x, u,
                                 rc.echo + "; columns=tip_x,tip_y,ref_x,ref_y");
    }
    std::cout << "rmse " << rep.rmse_mean << " +- " << rep.rmse_std << " m, time lag "
              << rep.time_lag_mean << " s, frechet " << rep.frechet_mean << " m over "
              << rep.per_seed.size() << " seed(s)\n"
              << "wrote " << (dir / "report.json").string() << "\n";
    return 0;
}

rkl::TipTrajectory tips_from_file(const std::string& path) {
    const rkl::TrajectoryFile f = rkl::load_trajectory_csv(path);
    if (f.x.empty() || f.x[0].size() < 2)
        throw rkl::ConfigError("'" + path + "': expected at least two state columns (x0,x1)");
    rkl::TipTrajectory out(f.x.size());
    for (std::size_t k = 0; k < f.x.size(); ++k) out[k] = f.x[k].head<2>();
    return out;
}

int cmd_eval(const CommonArgs& args, const std::string& actual_path,
             const std::string& reference_path) {
    rkl::ConfigMap cfg = load_config(args);
    const fs::path dir = ensure_out(args);

    const rkl::TrajectoryFile fa = rkl::load_trajectory_csv(actual_path);
    const rkl::TipTrajectory actual = tips_from_file(actual_path);
    const rkl::TipTrajectory reference = tips_from_file(reference_path);
    const double dt = fa.t.size() > 1 ? fa.t[1] - fa.t[0] : 1.0;

    json j;
    j["format_version"] = 1;
    j["config"] = cfg.echo_line();
    j["actual"] = actual_path;
    j["reference"] = reference_path;
    j["rmse"] = rkl::rmse(actual, reference);
    j["time_lag"] = rkl::time_lag(actual, reference, dt);
    j["frechet"] = rkl::frechet_distance(actual, reference);
    const std::string text = j.dump(2) + "\n";
    write_text(dir / "eval.json", text);
    std::cout << text;
    return 0;
}

int cmd_converge(const CommonArgs& args) {
    const rkl::ConfigMap cfg = load_config(args);
    const fs::path dir = ensure_out(args);
    const rkl::ChainSpec spec = chain_from_config(cfg);
    const rkl::BasisSpec basis = conv_basis_from_config(cfg, spec.n);
    std::vector<std::uint64_t> cps = cfg.has("checkpoints")
                                         ? cfg.get_u64_list("checkpoints")
                                         : std::vector<std::uint64_t>{1000, 10000, 100000};
    const double ridge = cfg.get_double("ridge", 0.0);
    const std::uint64_t mc = cfg.get_u64("conv_mc_samples", 10'000'000);

    const auto curve = rkl::convergence_experiment(spec, basis, cps, ridge, mc);

    json j;
    j["format_version"] = 1;
    j["config"] = cfg.echo_line();
    j["chain_n"] = spec.n;
    j["basis"] = rkl::to_string(basis.kind);
    j["curve"] = json::array();
    for (const auto& pt : curve) {
        j["curve"].push_back(
            {{"N", pt.N}, {"error", pt.error}, {"rank_deficient", pt.rank_deficient}});
        std::cout << "N=" << pt.N << "  |K_N - K*|_F = " << pt.error
                  << (pt.rank_deficient ? "  (rank deficient, ridge fallback)" : "") << "\n";
    }
    write_text(dir / "converge.json", j.dump(2) + "\n");
    return 0;
}

int cmd_bench(const CommonArgs& args) {
    const rkl::ConfigMap cfg = load_config(args);
    const fs::path dir = ensure_out(args);
    const std::vector<int> dims =
        cfg.has("bench_dims") ? cfg.get_int_list("bench_dims") : std::vector<int>{10, 20, 30};
    const std::vector<std::uint64_t> sizes = cfg.has("bench_sizes")
                                                 ? cfg.get_u64_list("bench_sizes")
                                                 : std::vector<std::uint64_t>{1000, 100000};
    const int reps = cfg.get_int("bench_reps", 2000);

    const auto rows = rkl::timing_experiment(dims, sizes, reps);

    json j;
    j["format_version"] = 1;
    j["config"] = cfg.echo_line();
    j["rows"] = json::array();
    std::cout << "dim      N   rls_update_us  edmd_retrain_s\n";
    for (const auto& r : rows) {
        j["rows"].push_back({{"dim", r.dim},
                             {"dataset_size", r.dataset_size},
                             {"rls_update_us", r.rls_update_us},
                             {"edmd_retrain_s", r.edmd_retrain_s}});
        std::printf("%3d %8llu %15.3f %15.6f\n", r.dim,
                    static_cast<unsigned long long>(r.dataset_size), r.rls_update_us,
                    r.edmd_retrain_s);
    }
    write_text(dir / "bench.json", j.dump(2) + "\n");
    return 0;
}

int cmd_inspect(const std::string& model_path) {
    const rkl::LoadedModel loaded = rkl::load_model(model_path);
    std::cout << rkl::model_info(loaded.model);
    if (!loaded.config_echo.empty()) std::cout << "config: " << loaded.config_echo << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Recursive Koopman learning: collect data, fit and update lifted linear "
                 "models, run closed-loop control, evaluate tracking"};
    app.require_subcommand(1);

    CommonArgs collect_args, fit_args, run_args, eval_args, converge_args, bench_args;
    std::string eval_actual, eval_reference, inspect_model;

    add_common(app.add_subcommand("collect", "generate a dataset and write it as CSV"),
               collect_args);
    add_common(app.add_subcommand("fit", "batch EDMD fit, write model checkpoint"), fit_args);
    add_common(app.add_subcommand("run", "closed-loop episodes across seeds, write EvalReport"),
               run_args);

    auto* eval_cmd = app.add_subcommand("eval", "metrics for a saved trajectory pair");
    add_common(eval_cmd, eval_args, false);
    eval_cmd->add_option("--actual", eval_actual, "actual trajectory CSV")->required();
    eval_cmd->add_option("--reference", eval_reference, "reference trajectory CSV")->required();

    add_common(app.add_subcommand("converge", "chain convergence curve toward K*"),
               converge_args);
    add_common(app.add_subcommand("bench", "RLS vs EDMD timing table"), bench_args);

    auto* inspect_cmd = app.add_subcommand("inspect", "print checkpoint contents");
    inspect_cmd->add_option("--model", inspect_model, "model checkpoint path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand("collect")) return cmd_collect(collect_args);
        if (app.got_subcommand("fit")) return cmd_fit(fit_args);
        if (app.got_subcommand("run")) return cmd_run(run_args);
        if (app.got_subcommand("eval")) return cmd_eval(eval_args, eval_actual, eval_reference);
        if (app.got_subcommand("converge")) return cmd_converge(converge_args);
        if (app.got_subcommand("bench")) return cmd_bench(bench_args);
        if (app.got_subcommand("inspect")) return cmd_inspect(inspect_model);
    } catch (const rkl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const rkl::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 2;
    } catch (const rkl::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
