// Command-line runner: train, evaluate and compare distributed-PINN runs,
// and precompute oracle caches. Exit codes: 0 success, 2 configuration
// error, 3 numerical failure.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "dpinn/config.hpp"
#include "dpinn/evaluate.hpp"
#include "dpinn/loss.hpp"
#include "dpinn/net.hpp"
#include "dpinn/optim.hpp"
#include "dpinn/oracle.hpp"

namespace fs = std::filesystem;
using namespace dpinn;

namespace {

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&tt, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<long> budget;
    std::string out_dir;
};

RunConfig load_run_config(const std::string& path, const Overrides& ov) {
    RunConfig c = load_config_file(path);
    if (ov.seed) c.seed = *ov.seed;
    if (ov.budget) c.max_steps = *ov.budget;
    if (!ov.out_dir.empty()) c.out_dir = ov.out_dir;
    validate_config(c);
    return c;
}

struct TrainArtifacts {
    RunConfig config;
    std::vector<NetworkParameters> params;
    std::vector<MetricsRecord> history;
    long steps_run = 0;
};

TrainArtifacts run_training(const RunConfig& c) {
    const ProblemDefinition problem = make_problem(c);
    const CellGrid grid = partition(c.domain, c.nb0, c.nb1);
    const TrainingSet ts = build_training_set(problem, grid, training_options(c));

    fs::create_directories(c.out_dir);
    {
        std::ofstream cfg(fs::path(c.out_dir) / "config.resolved.cfg");
        cfg << serialize_config(c);
    }

    std::ofstream metrics(fs::path(c.out_dir) / "metrics.csv");
    metrics << "# generated " << iso_timestamp() << "\n";
    metrics << "step,j_pde,j_bc,j_ic,j_c0x,j_c0t,j_c1x,j_c1t,total\n";

    const std::string ckpt_path = (fs::path(c.out_dir) / "checkpoint.txt").string();
    TrainCallbacks cb;
    cb.checkpoint_interval = c.checkpoint_interval;
    cb.on_checkpoint = [&ckpt_path](long, std::span<const NetworkParameters> nets) {
        save_checkpoint_file(ckpt_path, nets);
    };
    cb.on_log = [&metrics](long step, const LossBreakdown& l) {
        metrics << step << "," << format_double(l.j_pde) << "," << format_double(l.j_bc) << ","
                << format_double(l.j_ic) << "," << format_double(l.j_c0x) << ","
                << format_double(l.j_c0t) << "," << format_double(l.j_c1x) << ","
                << format_double(l.j_c1t) << "," << format_double(l.total) << "\n";
        metrics.flush();
        std::cerr << "step " << step << " total " << format_double(l.total) << "\n";
    };

    std::vector<NetworkParameters> initial = init_cell_params(c, problem, grid.cell_count());
    TrainBudget budget{c.max_steps, c.loss_threshold};
    TrainResult res = train(problem, ts, std::move(initial), budget, AdamOptions{.lr = c.lr},
                            c.log_interval, cb);

    std::cout << "trained " << c.problem << ": steps=" << res.steps_run
              << " final_total=" << format_double(res.history.back().loss.total)
              << (res.hit_threshold ? " (threshold reached)" : "") << "\n";
    return {c, std::move(res.params), std::move(res.history), res.steps_run};
}

EvaluationReport run_evaluation(const RunConfig& c, const std::vector<NetworkParameters>& params,
                                const std::string& out_dir) {
    const ProblemDefinition problem = make_problem(c);
    const CellGrid grid = partition(c.domain, c.nb0, c.nb1);
    if (static_cast<int>(params.size()) != grid.cell_count())
        throw invalid_input("checkpoint holds " + std::to_string(params.size()) +
                            " cells, configuration expects " + std::to_string(grid.cell_count()));
    const auto sizes = layer_sizes_for(c, problem);
    for (const NetworkParameters& p : params)
        if (p.layer_sizes != sizes)
            throw invalid_input("checkpoint layer sizes do not match the configuration");

    StitchedField field(grid, params);
    const ReferenceFn reference = make_reference(c);
    const auto [w0, w1] = evaluation_window(c);
    const auto points = evaluation_grid(w0, w1, c.eval_n0, c.eval_n1);
    auto [report, rows] = evaluate_field(field, points, reference);

    fs::create_directories(out_dir);
    {
        std::ofstream os(fs::path(out_dir) / "evaluation.csv");
        write_evaluation_csv(os, rows, c.domain.kind, problem.output_dims);
    }
    if (c.domain.kind == AxisKind::SpaceTime) {
        for (double t : c.slices) {
            if (t < w1.lo - 1e-12 || t > w1.hi + 1e-12) continue;
            char name[64];
            std::snprintf(name, sizeof(name), "slice_t%g.csv", t);
            std::ofstream os(fs::path(out_dir) / name);
            write_slice_csv(os, field, reference, w0, t, c.eval_n0);
        }
    } else {
        {
            std::ofstream os(fs::path(out_dir) / "centerline_u.csv");
            write_centerline_u_csv(os, field, reference, c.centerline_a0, c.domain.axis1,
                                   c.centerline_points);
        }
        {
            std::ofstream os(fs::path(out_dir) / "centerline_v.csv");
            write_centerline_v_csv(os, field, reference, c.centerline_a1, c.domain.axis0,
                                   c.centerline_points);
        }
    }
    std::cout << "evaluated " << c.problem << ": " << report.summary() << "\n";
    return report;
}

int cmd_train(const std::string& config_path, const Overrides& ov) {
    const RunConfig c = load_run_config(config_path, ov);
    TrainArtifacts art = run_training(c);
    save_checkpoint_file((fs::path(c.out_dir) / "checkpoint.txt").string(), art.params);
    return 0;
}

int cmd_evaluate(const std::string& config_path, std::string checkpoint_path, const Overrides& ov) {
    const RunConfig c = load_run_config(config_path, ov);
    if (checkpoint_path.empty())
        checkpoint_path = (fs::path(c.out_dir) / "checkpoint.txt").string();
    const auto params = load_checkpoint_file(checkpoint_path);
    run_evaluation(c, params, c.out_dir);
    return 0;
}

int cmd_compare(const std::string& config_a, const std::string& config_b, const Overrides& ov) {
    Overrides ov_a = ov, ov_b = ov;
    if (!ov.out_dir.empty()) {
        ov_a.out_dir = (fs::path(ov.out_dir) / "a").string();
        ov_b.out_dir = (fs::path(ov.out_dir) / "b").string();
    }
    const RunConfig a = load_run_config(config_a, ov_a);
    const RunConfig b = load_run_config(config_b, ov_b);
    if (a.problem != b.problem)
        throw invalid_configuration("compare: both configurations must target the same problem");
    if (!domain2d_equal(a.domain, b.domain))
        throw invalid_configuration("compare: both configurations must share the domain");
    if (a.eval_n0 != b.eval_n0 || a.eval_n1 != b.eval_n1 || a.eval_a1_max != b.eval_a1_max)
        throw invalid_configuration("compare: both configurations must share the evaluation grid");

    TrainArtifacts art_a = run_training(a);
    save_checkpoint_file((fs::path(a.out_dir) / "checkpoint.txt").string(), art_a.params);
    TrainArtifacts art_b = run_training(b);
    save_checkpoint_file((fs::path(b.out_dir) / "checkpoint.txt").string(), art_b.params);

    EvaluationReport rep_a = run_evaluation(a, art_a.params, a.out_dir);
    EvaluationReport rep_b = run_evaluation(b, art_b.params, b.out_dir);

    const double ratio =
        rep_b.mse > 0.0 ? rep_a.mse / rep_b.mse : std::numeric_limits<double>::quiet_NaN();
    const std::string compare_dir = ov.out_dir.empty() ? a.out_dir : ov.out_dir;
    fs::create_directories(compare_dir);
    {
        std::ofstream os(fs::path(compare_dir) / "compare.csv");
        os << "metric,config_a,config_b,ratio_a_over_b\n";
        os << "mse," << format_double(rep_a.mse) << "," << format_double(rep_b.mse) << ","
           << format_double(ratio) << "\n";
        os << "rel_l2," << (rep_a.rel_l2 ? format_double(*rep_a.rel_l2) : "") << ","
           << (rep_b.rel_l2 ? format_double(*rep_b.rel_l2) : "") << ",";
        if (rep_a.rel_l2 && rep_b.rel_l2 && *rep_b.rel_l2 > 0.0)
            os << format_double(*rep_a.rel_l2 / *rep_b.rel_l2);
        os << "\n";
    }
    std::cout << "compare " << a.problem << ": mse_a=" << format_double(rep_a.mse)
              << " mse_b=" << format_double(rep_b.mse) << " ratio=" << format_double(ratio)
              << "\n";
    return 0;
}

int cmd_oracle_build(const std::string& config_path, const Overrides& ov) {
    const RunConfig c = load_run_config(config_path, ov);
    if (c.problem == "cavity") {
        if (c.oracle_cache.empty())
            throw invalid_configuration("oracle.cache: set a cache directory for oracle-build");
        CavityReference ref =
            cavity_reference_cached(c.cavity_reynolds, c.oracle_n, c.oracle_cache);
        std::cout << "cavity oracle ready: Re=" << format_double(ref.re) << " n=" << ref.n
                  << " iterations=" << ref.iterations << " cached in " << c.oracle_cache << "\n";
    } else {
        std::cout << c.problem
                  << ": reference solutions are computed on the fly, no cache needed\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distributed physics-informed network PDE solver"};
    app.require_subcommand(1);

    std::string config_path, config_b_path, checkpoint_path;
    Overrides ov;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run configuration file")->required();
        cmd->add_option("--out", ov.out_dir, "output directory (overrides out.dir)");
        cmd->add_option("--seed", ov.seed, "seed override");
        cmd->add_option("--budget", ov.budget, "max training steps override");
    };

    CLI::App* tr = app.add_subcommand("train", "train a run and write artifacts");
    add_common(tr);

    CLI::App* ev = app.add_subcommand("evaluate", "evaluate a checkpoint against its reference");
    add_common(ev);
    ev->add_option("--checkpoint", checkpoint_path,
                   "checkpoint file (default <out>/checkpoint.txt)");

    CLI::App* cp =
        app.add_subcommand("compare", "train and evaluate two configurations side by side");
    add_common(cp);
    cp->add_option("--config-b", config_b_path, "second run configuration file")->required();

    CLI::App* ob = app.add_subcommand("oracle-build", "precompute oracle caches for a configuration");
    add_common(ob);

    try {
        app.parse(argc, argv);
        if (tr->parsed()) return cmd_train(config_path, ov);
        if (ev->parsed()) return cmd_evaluate(config_path, checkpoint_path, ov);
        if (cp->parsed()) return cmd_compare(config_path, config_b_path, ov);
        if (ob->parsed()) return cmd_oracle_build(config_path, ov);
        return 2;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help and friends
        app.exit(e);
        return 2;
    } catch (const invalid_configuration& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const invalid_input& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const numerical_failure& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const out_of_validity& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
