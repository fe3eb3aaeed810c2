#pragma once
// End-to-end experiment orchestration: dataset materialization, per-method
// calibration, segmentation evaluation on the test split, navigation world
// construction, and fan-out of (method x seed x env) training jobs with
// deterministic per-job seeds. Outputs are plot-ready schema-versioned
// tables; stages share one run directory.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <future>
#include <map>
#include <optional>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "confnav/agent.hpp"
#include "confnav/conformal.hpp"
#include "confnav/env.hpp"
#include "confnav/grid.hpp"
#include "confnav/metrics.hpp"
#include "confnav/rng.hpp"
#include "confnav/synth.hpp"
#include "confnav/table.hpp"

namespace confnav {

// ---- configuration ----

struct EnvSection {
    int count = 1;
    int horizon = 1000;
    double min_sep_frac = 0.5;  // minimum start/goal separation as a fraction of max(H,W)
    int max_tries = 5000;
    int eval_episodes = 3;
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    WorldConfig world;
    ScorerConfig scorer;
    SplitCounts counts{0, 50, 50};
    int k_samples = 8;
    std::vector<Method> methods{Method::BASELINE, Method::MC, Method::CRC, Method::MCCP};
    double alpha = 0.1;
    int grid_resolution = 1000;
    AgentConfig agent;
    EnvSection envs;
    NoiseConfig noise;
    std::vector<std::uint64_t> seeds{1};
};

inline void validate(const ExperimentConfig& cfg) {
    validate(cfg.world);
    validate(cfg.scorer);
    validate(cfg.agent);
    validate(cfg.noise);
    if (cfg.methods.empty()) throw std::invalid_argument("at least one method is required");
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
    if (cfg.grid_resolution < 2) throw std::invalid_argument("grid resolution must be >= 2");
    if (cfg.k_samples < 1) throw std::invalid_argument("k must be >= 1");
    if (cfg.envs.count < 1) throw std::invalid_argument("env count must be >= 1");
    if (cfg.envs.count > cfg.counts.test) {
        throw std::invalid_argument("env count cannot exceed the test split size");
    }
    if (cfg.envs.horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    if (cfg.envs.eval_episodes < 1) throw std::invalid_argument("eval_episodes must be >= 1");
    if (cfg.seeds.empty()) throw std::invalid_argument("at least one seed is required");
}

inline void to_json(nlohmann::json& j, const ExperimentConfig& cfg) {
    j["schema"] = "confnav.experiment.v1";
    j["seed"] = cfg.seed;
    j["dataset"] = {{"world", cfg.world},
                    {"scorer", cfg.scorer},
                    {"counts",
                     {{"train", cfg.counts.train}, {"cal", cfg.counts.cal}, {"test", cfg.counts.test}}},
                    {"k", cfg.k_samples}};
    nlohmann::json methods = nlohmann::json::array();
    for (Method m : cfg.methods) methods.push_back(method_name(m));
    j["methods"] = std::move(methods);
    j["alpha"] = cfg.alpha;
    j["grid"] = cfg.grid_resolution;
    j["agent"] = {{"total_steps", cfg.agent.total_steps},
                  {"max_episode", cfg.agent.max_episode},
                  {"gamma", cfg.agent.gamma},
                  {"epsilon_start", cfg.agent.epsilon_start},
                  {"epsilon_end", cfg.agent.epsilon_end},
                  {"epsilon_frac", cfg.agent.epsilon_frac},
                  {"lr_start", cfg.agent.lr_start},
                  {"lr_end", cfg.agent.lr_end},
                  {"lr_frac", cfg.agent.lr_frac},
                  {"eval_window", cfg.agent.eval_window}};
    j["envs"] = {{"count", cfg.envs.count},
                 {"horizon", cfg.envs.horizon},
                 {"min_sep_frac", cfg.envs.min_sep_frac},
                 {"max_tries", cfg.envs.max_tries},
                 {"eval_episodes", cfg.envs.eval_episodes}};
    j["noise"] = {{"enabled", cfg.noise.enabled}, {"sigma", cfg.noise.sigma}, {"p", cfg.noise.p}};
    j["seeds"] = cfg.seeds;
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& cfg) {
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        if (d.contains("world")) cfg.world = d.at("world").get<WorldConfig>();
        if (d.contains("scorer")) cfg.scorer = d.at("scorer").get<ScorerConfig>();
        if (d.contains("counts")) {
            const auto& c = d.at("counts");
            cfg.counts.train = c.value("train", cfg.counts.train);
            cfg.counts.cal = c.value("cal", cfg.counts.cal);
            cfg.counts.test = c.value("test", cfg.counts.test);
        }
        cfg.k_samples = d.value("k", cfg.k_samples);
    }
    if (j.contains("methods")) {
        cfg.methods.clear();
        for (const auto& name : j.at("methods")) {
            cfg.methods.push_back(method_from_string(name.get<std::string>()));
        }
    }
    cfg.alpha = j.value("alpha", cfg.alpha);
    cfg.grid_resolution = j.value("grid", cfg.grid_resolution);
    if (j.contains("agent")) {
        const auto& a = j.at("agent");
        cfg.agent.total_steps = a.value("total_steps", cfg.agent.total_steps);
        cfg.agent.max_episode = a.value("max_episode", cfg.agent.max_episode);
        cfg.agent.gamma = a.value("gamma", cfg.agent.gamma);
        cfg.agent.epsilon_start = a.value("epsilon_start", cfg.agent.epsilon_start);
        cfg.agent.epsilon_end = a.value("epsilon_end", cfg.agent.epsilon_end);
        cfg.agent.epsilon_frac = a.value("epsilon_frac", cfg.agent.epsilon_frac);
        cfg.agent.lr_start = a.value("lr_start", cfg.agent.lr_start);
        cfg.agent.lr_end = a.value("lr_end", cfg.agent.lr_end);
        cfg.agent.lr_frac = a.value("lr_frac", cfg.agent.lr_frac);
        cfg.agent.eval_window = a.value("eval_window", cfg.agent.eval_window);
    }
    if (j.contains("envs")) {
        const auto& e = j.at("envs");
        cfg.envs.count = e.value("count", cfg.envs.count);
        cfg.envs.horizon = e.value("horizon", cfg.envs.horizon);
        cfg.envs.min_sep_frac = e.value("min_sep_frac", cfg.envs.min_sep_frac);
        cfg.envs.max_tries = e.value("max_tries", cfg.envs.max_tries);
        cfg.envs.eval_episodes = e.value("eval_episodes", cfg.envs.eval_episodes);
    }
    if (j.contains("noise")) {
        const auto& n = j.at("noise");
        cfg.noise.enabled = n.value("enabled", cfg.noise.enabled);
        cfg.noise.sigma = n.value("sigma", cfg.noise.sigma);
        cfg.noise.p = n.value("p", cfg.noise.p);
    }
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("config parse error in " + path + ": " + e.what());
    }
    ExperimentConfig cfg = j.get<ExperimentConfig>();
    validate(cfg);
    return cfg;
}

inline void save_experiment_config(const ExperimentConfig& cfg, const std::string& path) {
    const nlohmann::json j = cfg;
    write_text_atomic(path, j.dump(2) + "\n");
}

// ---- calibration stage ----

struct CalibrationRecord {
    Method method = Method::BASELINE;
    double lambda_hat = 0.0;
    std::optional<double> alpha;           // conformal methods only
    std::optional<double> achieved_bound;  // inflated bound at lambda_hat, conformal only
    long n_cal = 0;
    int grid_resolution = 0;
    std::optional<int> k_samples;          // sample-based methods only
    double achieved_empirical_risk = 0.0;
};

inline CalibratedPredictor predictor_from_record(const CalibrationRecord& rec) {
    CalibratedPredictor pred;
    pred.method = rec.method;
    pred.lambda_hat = Threshold(rec.lambda_hat);
    pred.mc_samples = rec.k_samples.value_or(1);
    pred.alpha = rec.alpha;
    return pred;
}

namespace detail {

inline std::vector<McCalItem> truncate_samples(std::vector<McCalItem> items, int k) {
    for (auto& item : items) {
        if (static_cast<int>(item.samples.size()) < k) {
            throw std::invalid_argument("requested K=" + std::to_string(k) +
                                        " samples but the dataset provides only " +
                                        std::to_string(item.samples.size()));
        }
        item.samples.resize(static_cast<std::size_t>(k));
    }
    return items;
}

}  // namespace detail

// Calibrates one method on the CAL split. Sample-based methods consume K
// score-map samples per image (K=0 means "all the manifest provides").
inline CalibrationRecord calibrate_method(const DatasetManifest& manifest, Method method,
                                          double alpha, int grid_resolution, int k = 0) {
    const LambdaGrid grid(grid_resolution);
    CalibrationRecord rec;
    rec.method = method;
    rec.grid_resolution = grid_resolution;

    if (method_uses_samples(method)) {
        auto items = load_mc_items(manifest, Split::CAL);
        const int k_avail = static_cast<int>(items.front().samples.size());
        const int k_used = k == 0 ? k_avail : k;
        items = detail::truncate_samples(std::move(items), k_used);
        const CalibrationSet averaged = average_samples(items);
        rec.n_cal = static_cast<long>(averaged.size());
        rec.k_samples = k_used;
        if (method == Method::MCCP) {
            const RiskLevel risk(alpha);
            const Threshold lambda = calibrate_crc(averaged, risk, grid);
            rec.lambda_hat = lambda.lambda();
            rec.alpha = alpha;
            rec.achieved_empirical_risk = empirical_risk(averaged, lambda);
        } else {  // MC: F1-tuned threshold on the averaged maps
            const Threshold lambda = fit_baseline_lambda(averaged, grid);
            rec.lambda_hat = lambda.lambda();
            rec.achieved_empirical_risk = empirical_risk(averaged, lambda);
        }
        if (rec.alpha) {
            const double n = static_cast<double>(rec.n_cal);
            rec.achieved_bound = n / (n + 1.0) * rec.achieved_empirical_risk + 1.0 / (n + 1.0);
        }
        return rec;
    }

    const CalibrationSet cal = load_calibration_set(manifest, Split::CAL);
    rec.n_cal = static_cast<long>(cal.size());
    if (method == Method::CRC) {
        const RiskLevel risk(alpha);
        const Threshold lambda = calibrate_crc(cal, risk, grid);
        rec.lambda_hat = lambda.lambda();
        rec.alpha = alpha;
        rec.achieved_empirical_risk = empirical_risk(cal, lambda);
        const double n = static_cast<double>(rec.n_cal);
        rec.achieved_bound = n / (n + 1.0) * rec.achieved_empirical_risk + 1.0 / (n + 1.0);
    } else {  // BASELINE
        const Threshold lambda = fit_baseline_lambda(cal, grid);
        rec.lambda_hat = lambda.lambda();
        rec.achieved_empirical_risk = empirical_risk(cal, lambda);
    }
    return rec;
}

inline void save_calibration_record(const CalibrationRecord& rec, const std::string& path) {
    nlohmann::json j;
    j["schema"] = "confnav.predictor.v1";
    j["method"] = method_name(rec.method);
    j["lambda_hat"] = rec.lambda_hat;
    j["n_cal"] = rec.n_cal;
    j["grid"] = rec.grid_resolution;
    j["achieved_empirical_risk"] = rec.achieved_empirical_risk;
    if (rec.alpha) j["alpha"] = *rec.alpha;
    if (rec.achieved_bound) j["achieved_bound"] = *rec.achieved_bound;
    if (rec.k_samples) j["k"] = *rec.k_samples;
    write_text_atomic(path, j.dump(2) + "\n");
}

inline CalibrationRecord load_calibration_record(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open predictor record: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("predictor record parse error in " + path + ": " + e.what());
    }
    CalibrationRecord rec;
    rec.method = method_from_string(j.at("method").get<std::string>());
    rec.lambda_hat = j.at("lambda_hat").get<double>();
    rec.n_cal = j.value("n_cal", 0l);
    rec.grid_resolution = j.value("grid", 0);
    rec.achieved_empirical_risk = j.value("achieved_empirical_risk", 0.0);
    if (j.contains("alpha")) rec.alpha = j.at("alpha").get<double>();
    if (j.contains("achieved_bound")) rec.achieved_bound = j.at("achieved_bound").get<double>();
    if (j.contains("k")) rec.k_samples = j.at("k").get<int>();
    return rec;
}

// ---- prediction on manifest items ----

inline HazardMask predict_item(const DatasetManifest& manifest, const ManifestItem& item,
                               const CalibratedPredictor& pred) {
    if (method_uses_samples(pred.method)) {
        std::vector<ScoreMap> samples;
        if (item.sample_paths.empty()) {
            samples.push_back(load_score_map(manifest.resolve(item.score_path)));
        } else {
            const int k = std::min<int>(pred.mc_samples,
                                        static_cast<int>(item.sample_paths.size()));
            for (int s = 0; s < k; ++s) {
                samples.push_back(
                    load_score_map(manifest.resolve(item.sample_paths[static_cast<std::size_t>(s)])));
            }
        }
        return predict(pred, samples);
    }
    return predict(pred, load_score_map(manifest.resolve(item.score_path)));
}

// ---- segmentation evaluation stage ----

struct SegReport {
    Table per_image;
    Table summary;
};

// Per-image pixel- and instance-level metrics on the TEST split for every
// calibrated method, plus mean +/- sample-std aggregates. Metrics are
// reported on a 0-100 scale; undefined (excluded) cells stay empty.
inline SegReport seg_eval(const DatasetManifest& manifest,
                          const std::vector<CalibrationRecord>& records,
                          double cover_frac = 0.5) {
    auto test_items = manifest.split_items(Split::TEST);
    if (test_items.empty()) throw std::runtime_error("manifest has an empty test split");
    std::sort(test_items.begin(), test_items.end(),
              [](const ManifestItem* a, const ManifestItem* b) { return a->world_id < b->world_id; });

    SegReport report;
    report.per_image.schema = "confnav.seg_metrics.v1";
    report.per_image.columns = {"image_id", "split",    "method", "precision",
                                "coverage", "f1",       "iou",    "level"};
    report.per_image.notes = {
        "metrics scaled to 0-100; empty cell = undefined denominator, excluded from aggregation",
        "conventions: empty truth excludes coverage; empty prediction vs nonempty truth "
        "excludes precision; images empty on both sides are excluded entirely"};
    report.summary.schema = "confnav.seg_summary.v1";
    report.summary.columns = {"method", "level", "metric", "mean", "std", "n"};

    const auto fmt_cell = [](const std::optional<double>& v) {
        return v ? format_double(*v * 100.0) : std::string();
    };

    for (const auto& rec : records) {
        const CalibratedPredictor pred = predictor_from_record(rec);
        std::vector<std::optional<double>> pixel_vals[4];
        std::vector<std::optional<double>> inst_vals[3];

        for (const ManifestItem* item : test_items) {
            const HazardMask truth = load_hazard_mask(manifest.resolve(item->mask_path));
            const HazardMask predicted = predict_item(manifest, *item, pred);
            const PixelMetrics pm = pixel_metrics(predicted, truth);
            const InstanceMetrics im = instance_metrics(predicted, truth, cover_frac);

            report.per_image.add_row({std::to_string(item->world_id), split_name(item->split),
                                      method_name(rec.method), fmt_cell(pm.precision),
                                      fmt_cell(pm.coverage), fmt_cell(pm.f1), fmt_cell(pm.iou),
                                      "pixel"});
            report.per_image.add_row({std::to_string(item->world_id), split_name(item->split),
                                      method_name(rec.method), fmt_cell(im.precision),
                                      fmt_cell(im.coverage), fmt_cell(im.f1), "", "instance"});

            pixel_vals[0].push_back(pm.precision);
            pixel_vals[1].push_back(pm.coverage);
            pixel_vals[2].push_back(pm.f1);
            pixel_vals[3].push_back(pm.iou);
            inst_vals[0].push_back(im.precision);
            inst_vals[1].push_back(im.coverage);
            inst_vals[2].push_back(im.f1);
        }

        const char* pixel_names[4] = {"precision", "coverage", "f1", "iou"};
        for (int i = 0; i < 4; ++i) {
            const auto agg = aggregate_defined(pixel_vals[i]);
            report.summary.add_row({method_name(rec.method), "pixel", pixel_names[i],
                                    agg ? format_double(agg->mean * 100.0) : "",
                                    agg ? format_double(agg->stddev * 100.0) : "",
                                    std::to_string(agg ? agg->n : 0)});
        }
        const char* inst_names[3] = {"precision", "coverage", "f1"};
        for (int i = 0; i < 3; ++i) {
            const auto agg = aggregate_defined(inst_vals[i]);
            report.summary.add_row({method_name(rec.method), "instance", inst_names[i],
                                    agg ? format_double(agg->mean * 100.0) : "",
                                    agg ? format_double(agg->stddev * 100.0) : "",
                                    std::to_string(agg ? agg->n : 0)});
        }
    }
    return report;
}

// ---- navigation world construction ----

struct EnvSpec {
    int env_id = 0;
    int world_id = 0;
    PixelCoord start;
    PixelCoord goal;
    int horizon = 1000;
    HazardMask gt;
    std::vector<std::pair<Method, HazardMask>> plans;  // in configured method order

    const HazardMask& plan_for(Method m) const {
        for (const auto& [method, mask] : plans) {
            if (method == m) return mask;
        }
        throw std::invalid_argument(std::string("no plan mask for method ") + method_name(m));
    }
};

// Uniform start/goal over pixels free of the ground truth and of every
// compared planning mask, with a minimum L1 separation so episodes stay
// nontrivial; shared across methods to keep comparisons paired.
inline std::pair<PixelCoord, PixelCoord> sample_start_goal(
    const HazardMask& gt, const std::vector<const HazardMask*>& plan_masks, int min_sep, Rng& rng,
    int max_tries) {
    const int h = gt.height();
    const int w = gt.width();
    const auto free = [&](PixelCoord p) {
        if (gt.at(p)) return false;
        for (const HazardMask* m : plan_masks) {
            if (m->at(p)) return false;
        }
        return true;
    };
    for (int attempt = 0; attempt < max_tries; ++attempt) {
        const PixelCoord a{rng.next_int(0, h - 1), rng.next_int(0, w - 1)};
        const PixelCoord b{rng.next_int(0, h - 1), rng.next_int(0, w - 1)};
        if (a == b || !free(a) || !free(b)) continue;
        if (std::abs(a.row - b.row) + std::abs(a.col - b.col) < min_sep) continue;
        return {a, b};
    }
    throw GenerationError("could not sample start/goal outside the planning masks; "
                          "masks may cover too much of the lattice");
}

inline std::vector<EnvSpec> build_env_specs(const ExperimentConfig& cfg,
                                            const DatasetManifest& manifest,
                                            const std::vector<CalibrationRecord>& records) {
    auto test_items = manifest.split_items(Split::TEST);
    std::sort(test_items.begin(), test_items.end(),
              [](const ManifestItem* a, const ManifestItem* b) { return a->world_id < b->world_id; });
    if (static_cast<int>(test_items.size()) < cfg.envs.count) {
        throw std::invalid_argument("not enough test items for the requested env count");
    }

    std::vector<EnvSpec> specs;
    for (int i = 0; i < cfg.envs.count; ++i) {
        const ManifestItem* item = test_items[static_cast<std::size_t>(i)];
        EnvSpec spec;
        spec.env_id = i;
        spec.world_id = item->world_id;
        spec.horizon = cfg.envs.horizon;
        spec.gt = load_hazard_mask(manifest.resolve(item->mask_path));
        for (const auto& rec : records) {
            spec.plans.emplace_back(rec.method,
                                    predict_item(manifest, *item, predictor_from_record(rec)));
        }
        std::vector<const HazardMask*> masks;
        masks.reserve(spec.plans.size());
        for (const auto& [m, mask] : spec.plans) masks.push_back(&mask);
        const int min_sep = static_cast<int>(
            cfg.envs.min_sep_frac * std::max(spec.gt.height(), spec.gt.width()));
        Rng rng = Rng::derived(cfg.seed, 0xE0000000ull + static_cast<std::uint64_t>(i));
        std::tie(spec.start, spec.goal) =
            sample_start_goal(spec.gt, masks, min_sep, rng, cfg.envs.max_tries);
        specs.push_back(std::move(spec));
    }
    return specs;
}

// ---- training jobs ----

struct TrainJob {
    Method method = Method::BASELINE;
    std::uint64_t seed = 0;
    int env_id = 0;
};

struct JobResult {
    TrainJob job;
    TrainingCurves curves;
    long episodes = 0;
    long steps = 0;
    EvalSummary eval;
    std::vector<TrajectoryRow> trajectory;  // first greedy evaluation episode
    QTable q;
};

// Paired seeding: the agent seed depends on (experiment seed, run seed,
// env) but not on the method, so method comparisons share exploration and
// episode streams.
inline std::uint64_t job_agent_seed(std::uint64_t experiment_seed, std::uint64_t run_seed,
                                    int env_id) {
    return sub_seed(sub_seed(sub_seed(experiment_seed, 0xA0000000ull), run_seed),
                    static_cast<std::uint64_t>(env_id));
}

inline JobResult run_train_job(const ExperimentConfig& cfg, const EnvSpec& spec,
                               const TrainJob& job) {
    NavWorld world{spec.gt, spec.plan_for(job.method), spec.start, spec.goal, spec.horizon};
    AgentConfig agent_cfg = cfg.agent;
    agent_cfg.seed = job_agent_seed(cfg.seed, job.seed, job.env_id);

    JobResult result;
    result.job = job;

    NavEnv env(world, RewardParams{}, cfg.noise);
    TrainResult trained = train(env, agent_cfg);
    result.curves = std::move(trained.curves);
    result.episodes = trained.episodes;
    result.steps = trained.steps;

    NavEnv eval_env(world, RewardParams{}, cfg.noise);
    result.eval = evaluate(trained.q, eval_env, cfg.envs.eval_episodes, /*greedy=*/true,
                           sub_seed(agent_cfg.seed, 7), &result.trajectory);
    result.q = std::move(trained.q);
    return result;
}

// Fan-out with bounded concurrency; results come back in job order.
inline std::vector<JobResult> run_train_jobs(const ExperimentConfig& cfg,
                                             const std::vector<EnvSpec>& specs,
                                             const std::vector<TrainJob>& jobs, int parallelism) {
    if (parallelism < 1) parallelism = 1;
    std::counting_semaphore<256> slots(std::min(parallelism, 256));
    std::vector<std::future<JobResult>> futures;
    futures.reserve(jobs.size());
    for (const TrainJob& job : jobs) {
        const EnvSpec& spec = specs[static_cast<std::size_t>(job.env_id)];
        futures.push_back(std::async(std::launch::async, [&cfg, &spec, job, &slots] {
            slots.acquire();
            try {
                JobResult r = run_train_job(cfg, spec, job);
                slots.release();
                return r;
            } catch (...) {
                slots.release();
                throw;
            }
        }));
    }
    std::vector<JobResult> results;
    results.reserve(jobs.size());
    for (auto& f : futures) results.push_back(f.get());
    return results;
}

inline std::vector<TrainJob> make_job_list(const ExperimentConfig& cfg) {
    std::vector<TrainJob> jobs;
    for (Method m : cfg.methods) {
        for (std::uint64_t s : cfg.seeds) {
            for (int e = 0; e < cfg.envs.count; ++e) {
                jobs.push_back({m, s, e});
            }
        }
    }
    return jobs;
}

// ---- table emission ----

inline Table curves_table(const JobResult& result) {
    Table t;
    t.schema = "confnav.curves.v1";
    t.columns = {"step", "metric", "value", "method", "seed"};
    const char* names[4] = {"mean_episodic_reward", "success_rate", "mean_gt_rim_dist",
                            "frac_time_in_gt_hazard"};
    for (const CurvePoint& pt : result.curves) {
        const double vals[4] = {pt.mean_episodic_reward, pt.success_rate, pt.mean_gt_rim_dist,
                                pt.frac_time_in_gt_hazard};
        for (int i = 0; i < 4; ++i) {
            t.add_row({std::to_string(pt.step), names[i], format_double(vals[i]),
                       method_name(result.job.method), std::to_string(result.job.seed)});
        }
    }
    return t;
}

inline Table trajectory_table(const JobResult& result) {
    Table t;
    t.schema = "confnav.trajectory.v1";
    t.columns = {"t",      "row",           "col",          "action",
                 "reward", "in_plan_hazard", "in_gt_hazard", "gt_rim_dist"};
    for (const TrajectoryRow& row : result.trajectory) {
        t.add_row({std::to_string(row.t), std::to_string(row.row), std::to_string(row.col),
                   action_name(row.action), format_double(row.reward),
                   row.in_plan_hazard ? "1" : "0", row.in_gt_hazard ? "1" : "0",
                   std::to_string(row.gt_rim_dist)});
    }
    return t;
}

struct MethodAggregate {
    Method method = Method::BASELINE;
    long jobs = 0;
    double final_success_rate = 0.0;
    double final_mean_reward = 0.0;
    double final_frac_time_in_gt_hazard = 0.0;
    double final_mean_gt_rim_dist = 0.0;
    double eval_success_rate = 0.0;
    double eval_frac_time_in_gt_hazard = 0.0;
    double eval_mean_gt_rim_dist = 0.0;
};

inline std::vector<MethodAggregate> aggregate_by_method(const ExperimentConfig& cfg,
                                                        const std::vector<JobResult>& results) {
    std::vector<MethodAggregate> aggs;
    for (Method m : cfg.methods) {
        MethodAggregate agg;
        agg.method = m;
        for (const JobResult& r : results) {
            if (r.job.method != m) continue;
            if (r.curves.empty()) {
                throw std::runtime_error("training produced no curve window; "
                                         "total_steps is too small for eval_window");
            }
            const CurvePoint& last = r.curves.back();
            agg.final_success_rate += last.success_rate;
            agg.final_mean_reward += last.mean_episodic_reward;
            agg.final_frac_time_in_gt_hazard += last.frac_time_in_gt_hazard;
            agg.final_mean_gt_rim_dist += last.mean_gt_rim_dist;
            agg.eval_success_rate += r.eval.success_rate;
            agg.eval_frac_time_in_gt_hazard += r.eval.frac_time_in_gt_hazard;
            agg.eval_mean_gt_rim_dist += r.eval.mean_gt_rim_dist;
            ++agg.jobs;
        }
        if (agg.jobs > 0) {
            const double n = static_cast<double>(agg.jobs);
            agg.final_success_rate /= n;
            agg.final_mean_reward /= n;
            agg.final_frac_time_in_gt_hazard /= n;
            agg.final_mean_gt_rim_dist /= n;
            agg.eval_success_rate /= n;
            agg.eval_frac_time_in_gt_hazard /= n;
            agg.eval_mean_gt_rim_dist /= n;
        }
        aggs.push_back(agg);
    }
    return aggs;
}

inline Table job_summary_table(const std::vector<JobResult>& results) {
    Table t;
    t.schema = "confnav.summary.v1";
    t.columns = {"method",
                 "seed",
                 "env",
                 "episodes",
                 "steps",
                 "final_step",
                 "final_success_rate",
                 "final_mean_reward",
                 "final_frac_time_in_gt_hazard",
                 "final_mean_gt_rim_dist",
                 "eval_success_rate",
                 "eval_mean_reward",
                 "eval_frac_time_in_gt_hazard",
                 "eval_mean_gt_rim_dist",
                 "eval_mean_episode_length",
                 "eval_unseen_state_actions"};
    for (const JobResult& r : results) {
        if (r.curves.empty()) {
            throw std::runtime_error("training produced no curve window");
        }
        const CurvePoint& last = r.curves.back();
        t.add_row({method_name(r.job.method), std::to_string(r.job.seed),
                   std::to_string(r.job.env_id), std::to_string(r.episodes),
                   std::to_string(r.steps), std::to_string(last.step),
                   format_double(last.success_rate), format_double(last.mean_episodic_reward),
                   format_double(last.frac_time_in_gt_hazard),
                   format_double(last.mean_gt_rim_dist), format_double(r.eval.success_rate),
                   format_double(r.eval.mean_episodic_reward),
                   format_double(r.eval.frac_time_in_gt_hazard),
                   format_double(r.eval.mean_gt_rim_dist),
                   format_double(r.eval.mean_episode_length),
                   std::to_string(r.eval.unseen_state_actions)});
    }
    return t;
}

inline Table method_summary_table(const std::vector<MethodAggregate>& aggs) {
    Table t;
    t.schema = "confnav.method_summary.v1";
    t.columns = {"method",
                 "jobs",
                 "final_success_rate",
                 "final_mean_reward",
                 "final_frac_time_in_gt_hazard",
                 "final_mean_gt_rim_dist",
                 "eval_success_rate",
                 "eval_frac_time_in_gt_hazard",
                 "eval_mean_gt_rim_dist"};
    for (const MethodAggregate& a : aggs) {
        t.add_row({method_name(a.method), std::to_string(a.jobs),
                   format_double(a.final_success_rate), format_double(a.final_mean_reward),
                   format_double(a.final_frac_time_in_gt_hazard),
                   format_double(a.final_mean_gt_rim_dist), format_double(a.eval_success_rate),
                   format_double(a.eval_frac_time_in_gt_hazard),
                   format_double(a.eval_mean_gt_rim_dist)});
    }
    return t;
}

// ---- file layout helpers ----

inline std::string job_file_stem(const TrainJob& job) {
    return std::string(method_name(job.method)) + "_seed" + std::to_string(job.seed) + "_env" +
           std::to_string(job.env_id);
}

inline void save_env_specs(const std::vector<EnvSpec>& specs, const DatasetManifest& manifest,
                           const std::string& out_dir) {
    nlohmann::json envs = nlohmann::json::array();
    for (const EnvSpec& spec : specs) {
        nlohmann::json plans;
        for (const auto& [method, mask] : spec.plans) {
            const std::string rel =
                std::string("plan_") + method_name(method) + "_env" + std::to_string(spec.env_id) +
                ".txt";
            save_hazard_mask(mask, (std::filesystem::path(out_dir) / rel).string());
            plans[method_name(method)] = rel;
        }
        // gt mask path relative to the run directory
        std::string gt_rel;
        for (const auto& item : manifest.items) {
            if (item.world_id == spec.world_id) {
                gt_rel = (std::filesystem::path("dataset") / item.mask_path).string();
                break;
            }
        }
        envs.push_back(nlohmann::json{{"env_id", spec.env_id},
                                      {"world_id", spec.world_id},
                                      {"gt_mask", gt_rel},
                                      {"plan_masks", plans},
                                      {"start", {spec.start.row, spec.start.col}},
                                      {"goal", {spec.goal.row, spec.goal.col}},
                                      {"horizon", spec.horizon}});
    }
    nlohmann::json j{{"schema", "confnav.worlds.v1"}, {"envs", std::move(envs)}};
    write_text_atomic((std::filesystem::path(out_dir) / "worlds.json").string(), j.dump(2) + "\n");
}

inline std::vector<EnvSpec> load_env_specs(const std::string& run_dir,
                                           const std::vector<Method>& methods) {
    const std::string path = (std::filesystem::path(run_dir) / "worlds.json").string();
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open worlds file: " + path);
    nlohmann::json j;
    in >> j;
    std::vector<EnvSpec> specs;
    for (const auto& je : j.at("envs")) {
        EnvSpec spec;
        spec.env_id = je.at("env_id").get<int>();
        spec.world_id = je.at("world_id").get<int>();
        spec.start = {je.at("start").at(0).get<int>(), je.at("start").at(1).get<int>()};
        spec.goal = {je.at("goal").at(0).get<int>(), je.at("goal").at(1).get<int>()};
        spec.horizon = je.at("horizon").get<int>();
        spec.gt = load_hazard_mask(
            (std::filesystem::path(run_dir) / je.at("gt_mask").get<std::string>()).string());
        for (Method m : methods) {
            const std::string rel = je.at("plan_masks").at(method_name(m)).get<std::string>();
            spec.plans.emplace_back(
                m, load_hazard_mask((std::filesystem::path(run_dir) / rel).string()));
        }
        specs.push_back(std::move(spec));
    }
    return specs;
}

// ---- the full pipeline ----

struct ExperimentOutput {
    DatasetManifest manifest;
    std::vector<CalibrationRecord> records;
    std::vector<EnvSpec> specs;
    std::vector<JobResult> results;
    std::vector<MethodAggregate> aggregates;
};

inline ExperimentOutput run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                                       int parallelism = 1) {
    validate(cfg);
    const std::filesystem::path out(out_dir);
    std::filesystem::create_directories(out);
    save_experiment_config(cfg, (out / "config.json").string());

    ExperimentOutput output;
    output.manifest = build_dataset(cfg.world, cfg.scorer, cfg.counts, cfg.k_samples, cfg.seed,
                                    (out / "dataset").string());

    for (Method m : cfg.methods) {
        CalibrationRecord rec =
            calibrate_method(output.manifest, m, cfg.alpha, cfg.grid_resolution, cfg.k_samples);
        save_calibration_record(
            rec, (out / (std::string("predictor_") + method_name(m) + ".json")).string());
        output.records.push_back(std::move(rec));
    }

    const SegReport seg = seg_eval(output.manifest, output.records);
    write_table(seg.per_image, (out / "seg_metrics.csv").string());
    write_table(seg.summary, (out / "seg_summary.csv").string());

    output.specs = build_env_specs(cfg, output.manifest, output.records);
    save_env_specs(output.specs, output.manifest, out_dir);

    const std::vector<TrainJob> jobs = make_job_list(cfg);
    output.results = run_train_jobs(cfg, output.specs, jobs, parallelism);

    for (const JobResult& r : output.results) {
        const std::string stem = job_file_stem(r.job);
        write_table(curves_table(r), (out / ("curves_" + stem + ".csv")).string());
        write_table(trajectory_table(r), (out / ("traj_" + stem + ".csv")).string());
        save_qtable(r.q, (out / ("qtable_" + stem + ".txt")).string());
    }

    write_table(job_summary_table(output.results), (out / "summary.csv").string());
    output.aggregates = aggregate_by_method(cfg, output.results);
    write_table(method_summary_table(output.aggregates), (out / "summary_methods.csv").string());
    return output;
}

}  // namespace confnav
