// confnav: conformal risk-controlled hazard segmentation feeding a
// risk-aware gridworld navigation agent. Subcommands cover dataset
// generation, calibration, segmentation evaluation, agent training and
// evaluation, and the end-to-end experiment pipeline.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "confnav/experiment.hpp"

namespace {

using namespace confnav;

int cmd_gen(const std::string& config_path, const std::string& out_dir,
            std::optional<std::uint64_t> seed_override) {
    ExperimentConfig cfg = load_experiment_config(config_path);
    if (seed_override) cfg.seed = *seed_override;
    build_dataset(cfg.world, cfg.scorer, cfg.counts, cfg.k_samples, cfg.seed, out_dir);
    std::cout << (std::filesystem::path(out_dir) / "manifest.json").string() << "\n";
    return 0;
}

int cmd_calibrate(const std::string& manifest_path, const std::string& method_name_str,
                  double alpha, int grid, int k, const std::string& out_path) {
    const DatasetManifest manifest = load_manifest(manifest_path);
    const Method method = method_from_string(method_name_str);
    const CalibrationRecord rec = calibrate_method(manifest, method, alpha, grid, k);
    save_calibration_record(rec, out_path);
    std::cout << out_path << "\n";
    return 0;
}

int cmd_segeval(const std::string& manifest_path, const std::vector<std::string>& predictor_paths,
                const std::string& out_dir) {
    const DatasetManifest manifest = load_manifest(manifest_path);
    std::vector<CalibrationRecord> records;
    for (const auto& p : predictor_paths) records.push_back(load_calibration_record(p));
    const SegReport report = seg_eval(manifest, records);
    std::filesystem::create_directories(out_dir);
    write_table(report.per_image, (std::filesystem::path(out_dir) / "seg_metrics.csv").string());
    write_table(report.summary, (std::filesystem::path(out_dir) / "seg_summary.csv").string());
    std::cout << (std::filesystem::path(out_dir) / "seg_summary.csv").string() << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& manifest_path,
              const std::string& predictor_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed_override, int jobs) {
    ExperimentConfig cfg = load_experiment_config(config_path);
    if (seed_override) cfg.seed = *seed_override;
    const DatasetManifest manifest = load_manifest(manifest_path);
    const CalibrationRecord rec = load_calibration_record(predictor_path);
    cfg.methods = {rec.method};

    const std::vector<CalibrationRecord> records{rec};
    const std::vector<EnvSpec> specs = build_env_specs(cfg, manifest, records);
    std::filesystem::create_directories(out_dir);
    save_env_specs(specs, manifest, out_dir);

    const std::vector<TrainJob> job_list = make_job_list(cfg);
    const std::vector<JobResult> results = run_train_jobs(cfg, specs, job_list, jobs);
    for (const JobResult& r : results) {
        const std::string stem = job_file_stem(r.job);
        write_table(curves_table(r),
                    (std::filesystem::path(out_dir) / ("curves_" + stem + ".csv")).string());
        write_table(trajectory_table(r),
                    (std::filesystem::path(out_dir) / ("traj_" + stem + ".csv")).string());
        save_qtable(r.q, (std::filesystem::path(out_dir) / ("qtable_" + stem + ".txt")).string());
    }
    write_table(job_summary_table(results),
                (std::filesystem::path(out_dir) / "summary.csv").string());
    std::cout << (std::filesystem::path(out_dir) / "summary.csv").string() << "\n";
    return 0;
}

int cmd_eval(const std::string& run_dir, const std::string& method_name_str, std::uint64_t seed,
             int env_id, int episodes, bool greedy) {
    const ExperimentConfig cfg =
        load_experiment_config((std::filesystem::path(run_dir) / "config.json").string());
    const Method method = method_from_string(method_name_str);
    const std::vector<EnvSpec> specs = load_env_specs(run_dir, cfg.methods);
    if (env_id < 0 || env_id >= static_cast<int>(specs.size())) {
        throw std::invalid_argument("env id out of range");
    }
    const EnvSpec& spec = specs[static_cast<std::size_t>(env_id)];

    const TrainJob job{method, seed, env_id};
    const QTable q = load_qtable(
        (std::filesystem::path(run_dir) / ("qtable_" + job_file_stem(job) + ".txt")).string());

    NavWorld world{spec.gt, spec.plan_for(method), spec.start, spec.goal, spec.horizon};
    NavEnv env(world, RewardParams{}, cfg.noise);
    const EvalSummary summary =
        evaluate(q, env, episodes, greedy, sub_seed(job_agent_seed(cfg.seed, seed, env_id), 7));

    std::printf("method=%s seed=%llu env=%d episodes=%d\n", method_name(method),
                static_cast<unsigned long long>(seed), env_id, episodes);
    std::printf("success_rate=%.6f mean_episodic_reward=%.6f\n", summary.success_rate,
                summary.mean_episodic_reward);
    std::printf("mean_gt_rim_dist=%.6f frac_time_in_gt_hazard=%.6f\n", summary.mean_gt_rim_dist,
                summary.frac_time_in_gt_hazard);
    std::printf("mean_episode_length=%.6f unseen_state_actions=%ld\n",
                summary.mean_episode_length, summary.unseen_state_actions);
    return 0;
}

int cmd_experiment(const std::string& config_path, const std::string& out_dir,
                   std::optional<std::uint64_t> seed_override, int jobs) {
    ExperimentConfig cfg = load_experiment_config(config_path);
    if (seed_override) cfg.seed = *seed_override;
    run_experiment(cfg, out_dir, jobs);
    std::cout << (std::filesystem::path(out_dir) / "summary_methods.csv").string() << "\n";
    return 0;
}

int cmd_report(const std::string& run_dir) {
    const Table summary = read_table((std::filesystem::path(run_dir) / "summary.csv").string());
    const auto method_col = column_index(summary, "method");
    const auto frac_col = column_index(summary, "final_frac_time_in_gt_hazard");
    const auto rim_col = column_index(summary, "final_mean_gt_rim_dist");
    const auto success_col = column_index(summary, "final_success_rate");
    const auto reward_col = column_index(summary, "final_mean_reward");

    std::vector<std::string> order;
    std::map<std::string, std::array<double, 4>> sums;
    std::map<std::string, long> counts;
    for (const auto& row : summary.rows) {
        const std::string& m = row[method_col];
        if (!counts.count(m)) order.push_back(m);
        sums[m][0] += std::stod(row[success_col]);
        sums[m][1] += std::stod(row[reward_col]);
        sums[m][2] += std::stod(row[frac_col]);
        sums[m][3] += std::stod(row[rim_col]);
        ++counts[m];
    }
    std::printf("%-10s %5s %14s %12s %12s %12s\n", "method", "jobs", "success_rate",
                "mean_reward", "hazard_time", "rim_dist");
    for (const auto& m : order) {
        const double n = static_cast<double>(counts[m]);
        std::printf("%-10s %5ld %14.4f %12.4f %12.4f %12.4f\n", m.c_str(), counts[m],
                    sums[m][0] / n, sums[m][1] / n, sums[m][2] / n, sums[m][3] / n);
    }

    const std::string seg_path = (std::filesystem::path(run_dir) / "seg_summary.csv").string();
    if (std::filesystem::exists(seg_path)) {
        const Table seg = read_table(seg_path);
        std::printf("\nsegmentation (mean +/- std, 0-100):\n");
        std::printf("%-10s %-9s %-10s %10s %10s %6s\n", "method", "level", "metric", "mean", "std",
                    "n");
        for (const auto& row : seg.rows) {
            std::printf("%-10s %-9s %-10s %10s %10s %6s\n", row[0].c_str(), row[1].c_str(),
                        row[2].c_str(), row[3].empty() ? "-" : row[3].c_str(),
                        row[4].empty() ? "-" : row[4].c_str(), row[5].c_str());
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"conformal hazard calibration and risk-aware gridworld navigation"};
    app.require_subcommand(1);

    std::string config_path;
    std::string manifest_path;
    std::string predictor_path;
    std::vector<std::string> predictor_paths;
    std::string out_path = "out";
    std::string run_dir;
    std::string method = "crc";
    double alpha = 0.1;
    int grid = 1000;
    int k = 0;
    int jobs = 1;
    int env_id = 0;
    int episodes = 10;
    bool greedy = true;
    std::uint64_t seed_value = 0;
    bool seed_given = false;

    auto* gen = app.add_subcommand("gen", "materialize a synthetic dataset");
    gen->add_option("--config", config_path, "experiment config (JSON)")->required();
    gen->add_option("--out", out_path, "output dataset directory");
    gen->add_option("--seed", seed_value, "override the config seed")
        ->each([&](const std::string&) { seed_given = true; });

    auto* calibrate = app.add_subcommand("calibrate", "calibrate one method on the CAL split");
    calibrate->add_option("--manifest", manifest_path, "dataset manifest")->required();
    calibrate->add_option("--method", method, "baseline|mc|crc|mccp")->required();
    calibrate->add_option("--alpha", alpha, "target risk level (conformal methods)");
    calibrate->add_option("--grid", grid, "lambda grid resolution G");
    calibrate->add_option("--k", k, "MC samples per image (0 = all available)");
    calibrate->add_option("--out", out_path, "output predictor record path")->required();

    auto* segeval = app.add_subcommand("segeval", "segmentation metrics on the TEST split");
    segeval->add_option("--manifest", manifest_path, "dataset manifest")->required();
    segeval->add_option("--predictor", predictor_paths, "predictor record(s)")->required();
    segeval->add_option("--out", out_path, "output directory");

    auto* train = app.add_subcommand("train", "train agents for one calibrated method");
    train->add_option("--config", config_path, "experiment config (JSON)")->required();
    train->add_option("--manifest", manifest_path, "dataset manifest")->required();
    train->add_option("--predictor", predictor_path, "predictor record")->required();
    train->add_option("--out", out_path, "output directory");
    train->add_option("--jobs", jobs, "parallel training jobs");
    train->add_option("--seed", seed_value, "override the config seed")
        ->each([&](const std::string&) { seed_given = true; });

    auto* eval = app.add_subcommand("eval", "evaluate a saved policy");
    eval->add_option("--run", run_dir, "run directory (from train/experiment)")->required();
    eval->add_option("--method", method, "baseline|mc|crc|mccp")->required();
    eval->add_option("--seed", seed_value, "training seed of the policy")->required();
    eval->add_option("--env", env_id, "environment id");
    eval->add_option("--episodes", episodes, "evaluation episodes");
    eval->add_flag("--greedy,!--epsilon-greedy", greedy, "greedy or epsilon=0.05 policy");

    auto* experiment = app.add_subcommand("experiment", "run the full pipeline");
    experiment->add_option("--config", config_path, "experiment config (JSON)")->required();
    experiment->add_option("--out", out_path, "results directory");
    experiment->add_option("--jobs", jobs, "parallel training jobs");
    experiment->add_option("--seed", seed_value, "override the config seed")
        ->each([&](const std::string&) { seed_given = true; });

    auto* report = app.add_subcommand("report", "re-read and summarize a results directory");
    report->add_option("--run", run_dir, "results directory")->required();

    CLI11_PARSE(app, argc, argv);

    const std::optional<std::uint64_t> seed_override =
        seed_given ? std::optional<std::uint64_t>(seed_value) : std::nullopt;

    try {
        if (gen->parsed()) return cmd_gen(config_path, out_path, seed_override);
        if (calibrate->parsed())
            return cmd_calibrate(manifest_path, method, alpha, grid, k, out_path);
        if (segeval->parsed()) return cmd_segeval(manifest_path, predictor_paths, out_path);
        if (train->parsed())
            return cmd_train(config_path, manifest_path, predictor_path, out_path, seed_override,
                             jobs);
        if (eval->parsed()) return cmd_eval(run_dir, method, seed_value, env_id, episodes, greedy);
        if (experiment->parsed())
            return cmd_experiment(config_path, out_path, seed_override, jobs);
        if (report->parsed()) return cmd_report(run_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
