// End-to-end checks of the command-line surface: exit codes, idempotent
// regeneration, and the gen -> calibrate -> segeval -> train chain.

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "confnav/experiment.hpp"

using namespace confnav;

namespace {

const std::string binary = CONFNAV_BIN;

std::filesystem::path work_dir() {
    static const auto dir = [] {
        auto d = std::filesystem::temp_directory_path() / "confnav_cli_test";
        std::filesystem::remove_all(d);
        std::filesystem::create_directories(d);
        return d;
    }();
    return dir;
}

int run(const std::string& args) {
    const std::string cmd = binary + " " + args + " >> " + (work_dir() / "stdout.log").string() +
                            " 2>> " + (work_dir() / "stderr.log").string();
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::string write_smoke_config() {
    ExperimentConfig cfg;
    cfg.seed = 77;
    cfg.world.height = 14;
    cfg.world.width = 14;
    cfg.world.n_blobs = {2, 4};
    cfg.world.blob_radius = {1, 2};
    cfg.world.target_hazard_frac = {0.04, 0.4};
    cfg.counts = {0, 10, 6};
    cfg.k_samples = 2;
    cfg.alpha = 0.3;
    cfg.grid_resolution = 100;
    cfg.agent.total_steps = 2500;
    cfg.agent.max_episode = 80;
    cfg.agent.eval_window = 10;
    cfg.envs.count = 1;
    cfg.envs.horizon = 80;
    cfg.envs.eval_episodes = 1;
    cfg.seeds = {1};
    const std::string path = (work_dir() / "smoke.json").string();
    save_experiment_config(cfg, path);
    return path;
}

}  // namespace

TEST(Cli, MissingConfigFailsWithPathInMessage) {
    const std::string missing = (work_dir() / "nope.json").string();
    EXPECT_NE(run("gen --config " + missing + " --out " + (work_dir() / "x").string()), 0);
    const std::string err = slurp((work_dir() / "stderr.log").string());
    EXPECT_NE(err.find("nope.json"), std::string::npos) << err;
}

TEST(Cli, GenIsIdempotentAcrossReruns) {
    const std::string cfg = write_smoke_config();
    const auto out_a = work_dir() / "ds_a";
    const auto out_b = work_dir() / "ds_b";
    ASSERT_EQ(run("gen --config " + cfg + " --out " + out_a.string()), 0);
    ASSERT_EQ(run("gen --config " + cfg + " --out " + out_b.string()), 0);
    EXPECT_EQ(slurp((out_a / "manifest.json").string()), slurp((out_b / "manifest.json").string()));
    EXPECT_EQ(slurp((out_a / "mask_0000.txt").string()), slurp((out_b / "mask_0000.txt").string()));
    EXPECT_EQ(slurp((out_a / "score_0003.txt").string()),
              slurp((out_b / "score_0003.txt").string()));
}

TEST(Cli, CalibrateSegevalTrainChain) {
    const std::string cfg = write_smoke_config();
    const auto ds = work_dir() / "ds_chain";
    ASSERT_EQ(run("gen --config " + cfg + " --out " + ds.string()), 0);
    const std::string manifest = (ds / "manifest.json").string();

    // infeasible alpha exits nonzero and names the floor
    const std::string cal_fail = (work_dir() / "pred_fail.json").string();
    std::filesystem::remove(work_dir() / "stderr.log");
    EXPECT_NE(run("calibrate --manifest " + manifest + " --method crc --alpha 0.05 --grid 100" +
                  " --out " + cal_fail),
              0);
    const std::string err = slurp((work_dir() / "stderr.log").string());
    EXPECT_NE(err.find("infeasible"), std::string::npos) << err;

    const std::string crc_pred = (work_dir() / "pred_crc.json").string();
    const std::string base_pred = (work_dir() / "pred_baseline.json").string();
    ASSERT_EQ(run("calibrate --manifest " + manifest +
                  " --method crc --alpha 0.3 --grid 100 --out " + crc_pred),
              0);
    ASSERT_EQ(run("calibrate --manifest " + manifest + " --method baseline --grid 100 --out " +
                  base_pred),
              0);
    const CalibrationRecord rec = load_calibration_record(crc_pred);
    EXPECT_TRUE(rec.alpha.has_value());
    ASSERT_TRUE(rec.achieved_bound.has_value());
    EXPECT_LE(*rec.achieved_bound, 0.3);
    EXPECT_FALSE(load_calibration_record(base_pred).alpha.has_value());

    const auto seg_dir = work_dir() / "seg";
    ASSERT_EQ(run("segeval --manifest " + manifest + " --predictor " + crc_pred + " --predictor " +
                  base_pred + " --out " + seg_dir.string()),
              0);
    EXPECT_TRUE(std::filesystem::exists(seg_dir / "seg_metrics.csv"));

    const auto train_dir = work_dir() / "train";
    ASSERT_EQ(run("train --config " + cfg + " --manifest " + manifest + " --predictor " +
                  crc_pred + " --out " + train_dir.string()),
              0);
    EXPECT_TRUE(std::filesystem::exists(train_dir / "curves_crc_seed1_env0.csv"));
    EXPECT_TRUE(std::filesystem::exists(train_dir / "qtable_crc_seed1_env0.txt"));

    // eval reloads the saved policy from a full experiment run directory
    const auto run_dir = work_dir() / "run_eval";
    ASSERT_EQ(run("experiment --config " + cfg + " --out " + run_dir.string() + " --jobs 2"), 0);
    EXPECT_EQ(run("eval --run " + run_dir.string() + " --method crc --seed 1 --env 0 --episodes 3"),
              0);
    EXPECT_NE(run("eval --run " + run_dir.string() + " --method crc --seed 1 --env 9"), 0);
}

TEST(Cli, ReportReadsBackResults) {
    const std::string cfg = write_smoke_config();
    const auto run_dir = work_dir() / "run_report";
    ASSERT_EQ(run("experiment --config " + cfg + " --out " + run_dir.string()), 0);
    std::filesystem::remove(work_dir() / "stdout.log");
    ASSERT_EQ(run("report --run " + run_dir.string()), 0);
    const std::string out = slurp((work_dir() / "stdout.log").string());
    EXPECT_NE(out.find("baseline"), std::string::npos);
    EXPECT_NE(out.find("mccp"), std::string::npos);
    EXPECT_NE(out.find("segmentation"), std::string::npos);
}

TEST(Cli, UnknownSubcommandFails) {
    EXPECT_NE(run("frobnicate"), 0);
}
