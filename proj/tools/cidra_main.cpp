// cidra command-line tool: realise model grids, simulate drive cycles,
// benchmark the SVD backends, and sweep configuration sensitivity.
//
// Exit codes: 0 success, 2 validation/config error, 3 numerical failure,
// 4 setpoint outside the model grid hull, 1 other failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "cidra/cidra.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

ordered_json file_entry(const std::string& path) {
    return ordered_json{{"path", path}, {"fnv1a64", cidra::hash_hex(cidra::fnv1a64_file(path))}};
}

void write_manifest(const std::string& path, const ordered_json& j) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw cidra::validation_error("cannot open manifest for writing: " + path);
    os << j.dump(2) << "\n";
    if (!os) throw cidra::validation_error("write failure on manifest: " + path);
}

ordered_json base_manifest(const char* subcommand, std::uint64_t seed, int threads) {
    return ordered_json{{"tool", "cidra"},
                        {"version", cidra::version_string},
                        {"subcommand", subcommand},
                        {"seed", seed},
                        {"threads", threads},
                        {"inputs", ordered_json::array()},
                        {"outputs", ordered_json::array()}};
}

ordered_json config_json(const cidra::RealisationConfig& cfg) {
    return ordered_json{{"hankel_rows", cfg.hankel_rows},
                        {"hankel_cols", cfg.hankel_cols},
                        {"tlen_hours", cfg.tlen_hours},
                        {"fs_hz", cfg.fs_hz},
                        {"ts_s", cfg.ts_s},
                        {"order", cfg.order},
                        {"s_s", cfg.s_s},
                        {"s_e", cfg.s_e},
                        {"n_lambda", cfg.n_lambda},
                        {"svd", cidra::to_string(cfg.svd)}};
}

// Shared flags for everything that runs the realisation pipeline.
void add_config_options(CLI::App* sub, cidra::RealisationConfig& cfg, std::string& svd_name) {
    sub->add_option("--hankel-rows", cfg.hankel_rows, "Block-Hankel row blocks H_n");
    sub->add_option("--hankel-cols", cfg.hankel_cols, "Block-Hankel columns H_m");
    sub->add_option("--tlen-hours", cfg.tlen_hours, "Transfer-function sample length [h]");
    sub->add_option("--fs-hz", cfg.fs_hz, "Frequency-sampling rate F_s [Hz]");
    sub->add_option("--ts-s", cfg.ts_s, "Realised sampling period T_s [s]");
    sub->add_option("--order", cfg.order, "Reduced model order M");
    sub->add_option("--s-s", cfg.s_s, "Electrode-variable locations per electrode");
    sub->add_option("--s-e", cfg.s_e, "Electrolyte-variable locations across the cell");
    sub->add_option("--n-lambda", cfg.n_lambda, "Electrolyte eigenmodes in the c_e sum");
    sub->add_option("--svd", svd_name, "SVD strategy: iterative | dense")
        ->check(CLI::IsMember({"iterative", "dense"}));
}

struct GlobalOpts {
    int threads = 0;  // 0 -> CIDRA_THREADS env, then hardware
    std::uint64_t seed = 0;
};

int run_realise(const GlobalOpts& g, const std::string& params_path, const std::string& out_dir,
                std::vector<double> socs, std::vector<double> temps,
                cidra::RealisationConfig cfg, const std::string& svd_name) {
    const auto t0 = std::chrono::steady_clock::now();
    cfg.svd = cidra::svd_strategy_from_string(svd_name);
    const int threads = cidra::resolve_threads(g.threads);
    const cidra::CellParams params = cidra::load_cell_params(params_path);

    cidra::ModelGrid grid = cidra::realise_grid(params, socs, temps, cfg, threads);
    const std::vector<std::string> files = cidra::write_model_grid(grid, out_dir);

    // Keep the parameter file beside the models so `simulate` finds it.
    const fs::path params_copy = fs::path(out_dir) / "cell.params";
    fs::copy_file(params_path, params_copy, fs::copy_options::overwrite_existing);

    ordered_json man = base_manifest("realise", g.seed, threads);
    man["inputs"].push_back(file_entry(params_path));
    man["config"] = config_json(cfg);
    man["soc_grid"] = socs;
    man["temp_grid"] = temps;
    for (const auto& f : files) {
        man["outputs"].push_back(file_entry((fs::path(out_dir) / f).string()));
        man["outputs"].push_back(file_entry((fs::path(out_dir) / (f + ".labels")).string()));
    }
    man["outputs"].push_back(file_entry(params_copy.string()));
    double recon_max = 0;
    for (const auto& m : grid.models) recon_max = std::max(recon_max, m.recon_error);
    man["max_recon_error"] = recon_max;
    man["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest((fs::path(out_dir) / "manifest.json").string(), man);

    std::printf("realised %zu model(s) -> %s (max reconstruction error %.3g)\n",
                grid.models.size(), out_dir.c_str(), recon_max);
    return 0;
}

int run_simulate(const GlobalOpts& g, const std::string& models_dir, const std::string& cycle_path,
                 const std::string& out_path, const std::string& params_override, double soc0,
                 double temp, double vmin, double vmax, const cidra::PackConfig& pack) {
    const auto t0 = std::chrono::steady_clock::now();
    const int threads = cidra::resolve_threads(g.threads);
    const std::string params_path =
        params_override.empty() ? (fs::path(models_dir) / "cell.params").string()
                                : params_override;
    const cidra::CellParams params = cidra::load_cell_params(params_path);
    const cidra::ModelGrid grid = cidra::read_model_grid(models_dir);
    cidra::DriveCycle cycle = cidra::load_drive_cycle(cycle_path);
    cycle = cidra::resample_cycle(cycle, grid.models.front().T_s);

    cidra::SimOptions opt;
    opt.soc0 = soc0;
    opt.temp = temp;
    opt.vmin = vmin;
    opt.vmax = vmax;
    opt.pack = pack;
    const cidra::SimulationTrace tr = cidra::run_drive_cycle(params, grid, cycle, opt);
    cidra::write_trace_csv(tr, out_path);

    long flagged = 0;
    for (unsigned f : tr.flags) flagged += f != 0;
    ordered_json man = base_manifest("simulate", g.seed, threads);
    man["inputs"].push_back(file_entry(params_path));
    man["inputs"].push_back(file_entry(cycle_path));
    for (const auto& e : fs::directory_iterator(models_dir)) {
        if (e.path().extension() == ".cidra") man["inputs"].push_back(file_entry(e.path().string()));
    }
    std::sort(man["inputs"].begin(), man["inputs"].end(),
              [](const ordered_json& a, const ordered_json& b) {
                  return a["path"].get<std::string>() < b["path"].get<std::string>();
              });
    man["outputs"].push_back(file_entry(out_path));
    man["steps"] = tr.time.size();
    man["flagged_steps"] = flagged;
    man["final_soc"] = tr.soc(tr.soc.size() - 1);
    man["final_voltage_v"] = tr.voltage(tr.voltage.size() - 1);
    man["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(out_path + ".manifest.json", man);

    std::printf("simulated %ld step(s) -> %s (%ld flagged, final V %.4f, final soc %.4f)\n",
                static_cast<long>(tr.time.size()), out_path.c_str(), flagged,
                tr.voltage(tr.voltage.size() - 1), tr.soc(tr.soc.size() - 1));
    return 0;
}

int run_bench(const GlobalOpts& g, std::vector<long> sizes, std::vector<std::string> strat_names,
              int order, int reps, const std::string& out_path) {
    std::vector<cidra::SvdStrategy> strategies;
    for (const auto& s : strat_names) strategies.push_back(cidra::svd_strategy_from_string(s));
    const cidra::BenchReport rep = cidra::bench_svd(sizes, strategies, order, reps, g.seed);
    rep.write_text(std::cout);
    if (!out_path.empty()) {
        std::ofstream os(out_path, std::ios::trunc);
        if (!os) throw cidra::validation_error("cannot open bench output: " + out_path);
        rep.write_csv(os);
        os.close();
        ordered_json man = base_manifest("bench", g.seed, 1);
        man["outputs"].push_back(file_entry(out_path));
        write_manifest(out_path + ".manifest.json", man);
    }
    return 0;
}

int run_sensitivity(const GlobalOpts& g, const std::string& params_path, double soc, double temp,
                    int reps, const std::string& out_path, cidra::RealisationConfig cfg,
                    const std::string& svd_name) {
    cfg.svd = cidra::svd_strategy_from_string(svd_name);
    const cidra::CellParams params = cidra::load_cell_params(params_path);
    const cidra::BenchReport rep = cidra::sensitivity_sweep(params, cfg, soc, temp, reps);
    rep.write_text(std::cout);
    std::printf("\nsensitivity ranking (|median - baseline median|, most sensitive first):\n");
    for (const auto& [var, score] : cidra::sensitivity_ranking(rep))
        std::printf("  %-8s %.6f s\n", var.c_str(), score);
    if (!out_path.empty()) {
        std::ofstream os(out_path, std::ios::trunc);
        if (!os) throw cidra::validation_error("cannot open sensitivity output: " + out_path);
        rep.write_csv(os);
        os.close();
        ordered_json man = base_manifest("sensitivity", g.seed, 1);
        man["inputs"].push_back(file_entry(params_path));
        man["config"] = config_json(cfg);
        man["outputs"].push_back(file_entry(out_path));
        write_manifest(out_path + ".manifest.json", man);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cidra: reduced-order lithium-ion cell models from first-principles "
                 "transfer functions"};
    app.require_subcommand(1);
    app.set_version_flag("--version", cidra::version_string);
    app.set_config("--config", "", "Read options from an INI/TOML file (flags take precedence)");

    GlobalOpts g;
    app.add_option("--threads", g.threads,
                   "Worker threads (0: use CIDRA_THREADS env, then hardware)");
    app.add_option("--seed", g.seed, "Seed for synthetic benchmark systems");

    // --- realise ---------------------------------------------------------
    auto* re = app.add_subcommand("realise", "Generate a state-space model grid from a "
                                             "cell parameter file");
    std::string re_params, re_out, re_svd = "iterative";
    std::vector<double> re_socs{0.5}, re_temps{298.15};
    cidra::RealisationConfig re_cfg;
    re->add_option("--params", re_params, "Cell parameter file")->required();
    re->add_option("--out", re_out, "Output model directory")->required();
    re->add_option("--soc", re_socs, "SOC setpoints (comma separated)")->delimiter(',');
    re->add_option("--temp", re_temps, "Temperature setpoints [K] (comma separated)")
        ->delimiter(',');
    add_config_options(re, re_cfg, re_svd);

    // --- simulate --------------------------------------------------------
    auto* si = app.add_subcommand("simulate", "Run a drive cycle against a realised model grid");
    std::string si_models, si_cycle, si_out, si_params;
    double si_soc0 = 0.5, si_temp = 298.15;
    double si_vmin = -std::numeric_limits<double>::infinity();
    double si_vmax = std::numeric_limits<double>::infinity();
    cidra::PackConfig si_pack;
    si->add_option("--models", si_models, "Model directory from `cidra realise`")->required();
    si->add_option("--cycle", si_cycle, "Drive-cycle CSV (time_s,current_a or time_s,power_w)")
        ->required();
    si->add_option("--out", si_out, "Output trace CSV")->required();
    si->add_option("--params", si_params,
                   "Cell parameter file (default: cell.params inside the model directory)");
    si->add_option("--soc0", si_soc0, "Initial state of charge in [0,1]");
    si->add_option("--temp", si_temp, "Cell temperature [K]");
    si->add_option("--vmin", si_vmin, "Lower voltage limit for flagging [V]");
    si->add_option("--vmax", si_vmax, "Upper voltage limit for flagging [V]");
    si->add_option("--pack-series", si_pack.series, "Cells in series (power mode)");
    si->add_option("--pack-parallel", si_pack.parallel, "Cells in parallel (power mode)");
    si->add_option("--pack-eta", si_pack.motor_efficiency, "Motor efficiency (power mode)");

    // --- bench -----------------------------------------------------------
    auto* be = app.add_subcommand("bench", "Benchmark the truncated-SVD strategies on "
                                           "synthetic Hankel matrices");
    std::vector<long> be_sizes{1000, 4000};
    std::vector<std::string> be_strats{"iterative", "dense"};
    int be_order = 8, be_reps = 6;
    std::string be_out;
    be->add_option("--sizes", be_sizes, "Square Hankel sizes (comma separated)")->delimiter(',');
    be->add_option("--strategies", be_strats, "SVD strategies (comma separated)")
        ->delimiter(',');
    be->add_option("--order", be_order, "Truncation rank");
    be->add_option("--reps", be_reps, "Timed repetitions per case (minimum 6)");
    be->add_option("--out", be_out, "Write CSV report to this file");

    // --- sensitivity -----------------------------------------------------
    auto* se = app.add_subcommand("sensitivity", "One-at-a-time 50%/150% timing sweep over the "
                                                 "realisation configuration");
    std::string se_params, se_out, se_svd = "iterative";
    double se_soc = 0.5, se_temp = 298.15;
    int se_reps = 6;
    cidra::RealisationConfig se_cfg;
    // Desk-scale base so the 15-case sweep stays tractable; override freely.
    se_cfg.hankel_rows = se_cfg.hankel_cols = 600;
    se_cfg.tlen_hours = 1.0;
    se->add_option("--params", se_params, "Cell parameter file")->required();
    se->add_option("--soc", se_soc, "SOC setpoint");
    se->add_option("--temp", se_temp, "Temperature setpoint [K]");
    se->add_option("--reps", se_reps, "Timed repetitions per case (minimum 6)");
    se->add_option("--out", se_out, "Write CSV report to this file");
    add_config_options(se, se_cfg, se_svd);

    // --- make-cycle ------------------------------------------------------
    auto* mc = app.add_subcommand("make-cycle", "Write the synthetic urban/suburban/highway "
                                                "current cycle to CSV");
    double mc_duration = 1800.0, mc_rate = 4.0;
    std::string mc_out;
    mc->add_option("--duration", mc_duration, "Cycle length [s]");
    mc->add_option("--rate", mc_rate, "Sample rate [Hz]");
    mc->add_option("--out", mc_out, "Output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (re->parsed())
            return run_realise(g, re_params, re_out, re_socs, re_temps, re_cfg, re_svd);
        if (si->parsed())
            return run_simulate(g, si_models, si_cycle, si_out, si_params, si_soc0, si_temp,
                                si_vmin, si_vmax, si_pack);
        if (be->parsed()) return run_bench(g, be_sizes, be_strats, be_order, be_reps, be_out);
        if (se->parsed())
            return run_sensitivity(g, se_params, se_soc, se_temp, se_reps, se_out, se_cfg, se_svd);
        if (mc->parsed()) {
            cidra::save_drive_cycle(cidra::make_synthetic_cycle(mc_duration, mc_rate), mc_out);
            std::printf("wrote synthetic cycle -> %s\n", mc_out.c_str());
            return 0;
        }
    } catch (const cidra::validation_error& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 2;
    } catch (const cidra::hull_error& e) {
        std::fprintf(stderr, "hull error: %s\n", e.what());
        return 4;
    } catch (const cidra::numeric_error& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
