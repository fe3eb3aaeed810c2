#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "confnav/grid.hpp"
#include "confnav/rng.hpp"

using namespace confnav;

namespace {

ScoreMap random_scores(int h, int w, Rng& rng) {
    ScoreMap m(h, w, 0.0);
    for (auto& v : m.values()) v = rng.next_double();
    return m;
}

HazardMask random_mask(int h, int w, double density, Rng& rng) {
    HazardMask m(h, w, 0);
    for (auto& v : m.values()) v = rng.next_bernoulli(density) ? 1 : 0;
    return m;
}

// brute-force L1 distance oracle, independent of the chamfer sweep
DistanceField brute_distance_field(const HazardMask& mask) {
    const int inf = distance_sentinel(mask.height(), mask.width());
    DistanceField out(mask.height(), mask.width(), inf);
    const auto set = hazard_set(mask);
    for (int r = 0; r < mask.height(); ++r) {
        for (int c = 0; c < mask.width(); ++c) {
            int best = inf;
            for (const auto& p : set) {
                best = std::min(best, std::abs(r - p.row) + std::abs(c - p.col));
            }
            out.at(r, c) = best;
        }
    }
    return out;
}

std::filesystem::path temp_dir() {
    auto dir = std::filesystem::temp_directory_path() / "confnav_grid_test";
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST(Threshold, EndpointsAndDirectComparison) {
    Rng rng(7);
    const ScoreMap scores = random_scores(5, 4, rng);

    const HazardMask full = threshold_mask(scores, Threshold(1.0));
    for (auto v : full.values()) EXPECT_EQ(v, 1);

    // all scores < 1, lambda=0 requires score >= 1
    const HazardMask empty = threshold_mask(scores, Threshold(0.0));
    for (auto v : empty.values()) EXPECT_EQ(v, 0);

    ScoreMap two(2, 2, 0.0);
    two.at(0, 0) = 0.9;
    two.at(0, 1) = 0.2;
    two.at(1, 0) = 0.4;
    two.at(1, 1) = 0.6;
    const HazardMask m = threshold_mask(two, Threshold(0.5));
    EXPECT_EQ(m.at(0, 0), 1);
    EXPECT_EQ(m.at(0, 1), 0);
    EXPECT_EQ(m.at(1, 0), 0);
    EXPECT_EQ(m.at(1, 1), 1);
}

TEST(Threshold, BoundaryTieIncluded) {
    ScoreMap s(1, 2, 0.0);
    s.at(0, 0) = 0.5;
    s.at(0, 1) = 0.4999;
    const HazardMask m = threshold_mask(s, Threshold(0.5));
    EXPECT_EQ(m.at(0, 0), 1);
    EXPECT_EQ(m.at(0, 1), 0);
}

TEST(Threshold, NestednessProperty) {
    Rng rng(11);
    for (int rep = 0; rep < 300; ++rep) {
        const int h = rng.next_int(1, 10);
        const int w = rng.next_int(1, 10);
        const ScoreMap scores = random_scores(h, w, rng);
        double l1 = rng.next_double();
        double l2 = rng.next_double();
        if (l1 > l2) std::swap(l1, l2);
        const HazardMask small = threshold_mask(scores, Threshold(l1));
        const HazardMask big = threshold_mask(scores, Threshold(l2));
        ASSERT_TRUE(small.same_shape(big));
        for (std::size_t i = 0; i < small.values().size(); ++i) {
            ASSERT_LE(small.values()[i], big.values()[i]);
        }
    }
}

TEST(Threshold, RejectsOutOfRangeLambda) {
    EXPECT_THROW(Threshold(-0.01), std::invalid_argument);
    EXPECT_THROW(Threshold(1.01), std::invalid_argument);
}

TEST(HazardSet, Readout) {
    HazardMask empty(3, 3, 0);
    EXPECT_TRUE(hazard_set(empty).empty());

    HazardMask full(2, 2, 1);
    const auto all = hazard_set(full);
    ASSERT_EQ(all.size(), 4u);
    EXPECT_EQ(all[0], (PixelCoord{0, 0}));
    EXPECT_EQ(all[3], (PixelCoord{1, 1}));

    HazardMask diag(2, 2, 0);
    diag.at(0, 0) = 1;
    diag.at(1, 1) = 1;
    const auto set = hazard_set(diag);
    ASSERT_EQ(set.size(), 2u);
    EXPECT_EQ(set[0], (PixelCoord{0, 0}));
    EXPECT_EQ(set[1], (PixelCoord{1, 1}));
}

TEST(DistanceField, SinglePixelAndSentinel) {
    HazardMask m(3, 3, 0);
    m.at(0, 0) = 1;
    const DistanceField d = manhattan_distance_field(m);
    EXPECT_EQ(d.at(0, 0), 0);
    EXPECT_EQ(d.at(2, 2), 4);
    EXPECT_EQ(d.at(1, 2), 3);

    HazardMask empty(4, 4, 0);
    const DistanceField sentinel = manhattan_distance_field(empty);
    for (auto v : sentinel.values()) EXPECT_EQ(v, 8);
}

TEST(DistanceField, MatchesBruteForceOracle) {
    Rng rng(23);
    for (int rep = 0; rep < 60; ++rep) {
        const int h = rng.next_int(1, 16);
        const int w = rng.next_int(1, 16);
        const HazardMask mask = random_mask(h, w, rng.next_double() * 0.4, rng);
        const DistanceField fast = manhattan_distance_field(mask);
        const DistanceField slow = brute_distance_field(mask);
        ASSERT_EQ(fast, slow) << "case " << rep << " (" << h << "x" << w << ")";
    }
}

TEST(GridIO, ScoreMapRoundTrip) {
    const auto dir = temp_dir();
    Rng rng(31);
    const ScoreMap original = random_scores(6, 5, rng);
    const std::string path = (dir / "scores.txt").string();
    save_score_map(original, path);
    const ScoreMap loaded = load_score_map(path);
    ASSERT_TRUE(loaded.same_shape(original));
    for (std::size_t i = 0; i < loaded.values().size(); ++i) {
        EXPECT_NEAR(loaded.values()[i], original.values()[i], 5e-7);
    }
}

TEST(GridIO, MaskRoundTripExact) {
    const auto dir = temp_dir();
    Rng rng(37);
    const HazardMask original = random_mask(7, 3, 0.5, rng);
    const std::string path = (dir / "mask.txt").string();
    save_hazard_mask(original, path);
    EXPECT_EQ(load_hazard_mask(path), original);
}

TEST(GridIO, ParseErrorsCarryLineNumbers) {
    const auto dir = temp_dir();

    const std::string bad_score = (dir / "bad_score.txt").string();
    {
        std::ofstream out(bad_score);
        out << "2 2\n0.1 0.2\n0.3 1.2\n";
    }
    try {
        load_score_map(bad_score);
        FAIL() << "expected parse error";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("1.2"), std::string::npos) << e.what();
    }

    const std::string bad_mask = (dir / "bad_mask.txt").string();
    {
        std::ofstream out(bad_mask);
        out << "1 2\n0 2\n";
    }
    try {
        load_hazard_mask(bad_mask);
        FAIL() << "expected parse error";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
    }

    const std::string bad_header = (dir / "bad_header.txt").string();
    {
        std::ofstream out(bad_header);
        out << "zero two\n";
    }
    EXPECT_THROW(load_score_map(bad_header), std::runtime_error);

    const std::string truncated = (dir / "truncated.txt").string();
    {
        std::ofstream out(truncated);
        out << "3 2\n0.5 0.5\n";
    }
    EXPECT_THROW(load_score_map(truncated), std::runtime_error);
}

TEST(Grid, DimensionsPreservedAndValidated) {
    Rng rng(41);
    const ScoreMap scores = random_scores(9, 2, rng);
    const HazardMask mask = threshold_mask(scores, Threshold(0.3));
    EXPECT_EQ(mask.height(), 9);
    EXPECT_EQ(mask.width(), 2);
    const DistanceField field = manhattan_distance_field(mask);
    EXPECT_EQ(field.height(), 9);
    EXPECT_EQ(field.width(), 2);

    EXPECT_THROW(ScoreMap(0, 3), std::invalid_argument);
    EXPECT_THROW(HazardMask(3, -1), std::invalid_argument);
}
