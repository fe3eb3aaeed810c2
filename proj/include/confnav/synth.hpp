#pragma once
// Seeded synthetic hazard worlds and a boundary-logistic scorer that stands
// in for a trained segmentation model: crater fields or a single connected
// water body, scored by a logistic of the signed rim distance with a
// configurable miss bias, per-pixel noise, and between-sample jitter.
//
// Every output is a pure function of (config, seed). Items draw from
// per-split sub-seed streams, so cal and test items are i.i.d. from the
// same law and adding items never perturbs earlier ones.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "confnav/conformal.hpp"
#include "confnav/grid.hpp"
#include "confnav/metrics.hpp"
#include "confnav/rng.hpp"

namespace confnav {

struct GenerationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IntRange {
    int lo = 0;
    int hi = 0;
};

struct RealRange {
    double lo = 0.0;
    double hi = 0.0;
};

enum class HazardKind { CRATERS, WATERBODY };

inline const char* hazard_kind_name(HazardKind kind) {
    return kind == HazardKind::CRATERS ? "craters" : "waterbody";
}

inline HazardKind hazard_kind_from_string(const std::string& name) {
    if (name == "craters") return HazardKind::CRATERS;
    if (name == "waterbody") return HazardKind::WATERBODY;
    throw std::invalid_argument("unknown hazard kind: " + name);
}

struct WorldConfig {
    int height = 32;
    int width = 32;
    HazardKind hazard_kind = HazardKind::CRATERS;
    IntRange n_blobs{6, 10};            // CRATERS only
    IntRange blob_radius{2, 4};
    RealRange target_hazard_frac{0.10, 0.30};
    int max_retries = 200;
};

struct ScorerConfig {
    double boundary_softness = 1.0;     // logistic width in pixels
    double noise_sigma = 0.5;           // per-pixel logit noise
    double miss_bias = -1.5;            // negative shifts scores down
    double mc_jitter_sigma = 2.0;       // between-sample logit noise
    // Structured perception failures, emulating a badly trained model. With
    // all three at their defaults the scorer reduces to the plain
    // boundary-logistic form.
    double miss_rate = 0.0;             // probability a hazard component is missed entirely
    int perception_shift = 0;           // per-component mislocalization, offsets in [-s, s]^2
    int rim_erosion = 0;                // rims thinner than this score like background
    // When set, every Monte-Carlo sample redraws the structured failures
    // (misses and offsets), so sample averages form a halo over the
    // plausible hazard extents; otherwise samples share the base perception.
    bool mc_resample_perception = false;
    // Optional wider offset range for resampled samples; 0 falls back to
    // perception_shift. Larger values widen the ensemble halo.
    int mc_sample_shift = 0;
    // Phantom responses: broad, weaker hallucinated bumps placed per image.
    // They corrupt the ranking with false-positive structure. Zero disables.
    IntRange phantom_blobs{0, 0};
    IntRange phantom_radius{3, 5};
    double phantom_strength = 0.5;      // scales the phantom distance bump
};

inline void validate(const WorldConfig& cfg) {
    if (cfg.height <= 0 || cfg.width <= 0) {
        throw std::invalid_argument("world dimensions must be positive");
    }
    if (cfg.n_blobs.lo < 1 || cfg.n_blobs.hi < cfg.n_blobs.lo) {
        throw std::invalid_argument("n_blobs range must be nonempty and >= 1");
    }
    if (cfg.blob_radius.lo < 1 || cfg.blob_radius.hi < cfg.blob_radius.lo ||
        cfg.blob_radius.hi > std::min(cfg.height, cfg.width)) {
        throw std::invalid_argument("blob_radius range must be nonempty and within the lattice");
    }
    if (!(cfg.target_hazard_frac.lo > 0.0 && cfg.target_hazard_frac.hi < 1.0 &&
          cfg.target_hazard_frac.lo <= cfg.target_hazard_frac.hi)) {
        throw std::invalid_argument("target_hazard_frac range must lie inside (0,1)");
    }
    if (cfg.max_retries < 1) throw std::invalid_argument("max_retries must be >= 1");
}

inline void validate(const ScorerConfig& cfg) {
    if (!(cfg.boundary_softness > 0.0)) {
        throw std::invalid_argument("boundary_softness must be positive");
    }
    if (cfg.noise_sigma < 0.0 || cfg.mc_jitter_sigma < 0.0) {
        throw std::invalid_argument("noise sigmas must be non-negative");
    }
    if (cfg.rim_erosion < 0) throw std::invalid_argument("rim_erosion must be non-negative");
    if (cfg.perception_shift < 0 || cfg.mc_sample_shift < 0) {
        throw std::invalid_argument("perception shifts must be non-negative");
    }
    if (!(cfg.miss_rate >= 0.0 && cfg.miss_rate < 1.0)) {
        throw std::invalid_argument("miss_rate must lie in [0,1)");
    }
    if (cfg.phantom_blobs.lo < 0 || cfg.phantom_blobs.hi < cfg.phantom_blobs.lo) {
        throw std::invalid_argument("phantom_blobs range must be nonempty and >= 0");
    }
    if (cfg.phantom_blobs.hi > 0 &&
        (cfg.phantom_radius.lo < 1 || cfg.phantom_radius.hi < cfg.phantom_radius.lo)) {
        throw std::invalid_argument("phantom_radius range must be nonempty and >= 1");
    }
    if (cfg.phantom_strength < 0.0) {
        throw std::invalid_argument("phantom_strength must be non-negative");
    }
}

// ---- world generation ----

namespace detail {

inline void stamp_disk(HazardMask& mask, int r0, int c0, int radius) {
    for (int r = std::max(0, r0 - radius); r <= std::min(mask.height() - 1, r0 + radius); ++r) {
        for (int c = std::max(0, c0 - radius); c <= std::min(mask.width() - 1, c0 + radius); ++c) {
            const int dr = r - r0;
            const int dc = c - c0;
            if (dr * dr + dc * dc <= radius * radius) mask.at(r, c) = 1;
        }
    }
}

inline HazardMask gen_craters_once(const WorldConfig& cfg, Rng& rng) {
    HazardMask mask(cfg.height, cfg.width, 0);
    const int n = rng.next_int(cfg.n_blobs.lo, cfg.n_blobs.hi);
    for (int b = 0; b < n; ++b) {
        const int r0 = rng.next_int(0, cfg.height - 1);
        const int c0 = rng.next_int(0, cfg.width - 1);
        const int radius = rng.next_int(cfg.blob_radius.lo, cfg.blob_radius.hi);
        stamp_disk(mask, r0, c0, radius);
    }
    return mask;
}

// One 4-connected blob grown by uniform frontier expansion.
inline HazardMask gen_waterbody_once(const WorldConfig& cfg, Rng& rng) {
    HazardMask mask(cfg.height, cfg.width, 0);
    const long total = static_cast<long>(cfg.height) * cfg.width;
    const double frac = rng.next_real(cfg.target_hazard_frac.lo, cfg.target_hazard_frac.hi);
    const long target = std::max<long>(1, std::lround(frac * static_cast<double>(total)));

    Grid<std::uint8_t> state(cfg.height, cfg.width, 0);  // 0 unseen, 1 frontier, 2 region
    std::vector<PixelCoord> frontier;
    const PixelCoord start{rng.next_int(0, cfg.height - 1), rng.next_int(0, cfg.width - 1)};
    state.at(start) = 2;
    mask.at(start) = 1;
    long grown = 1;

    auto push_neighbors = [&](PixelCoord q) {
        const int dr[4] = {-1, 1, 0, 0};
        const int dc[4] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
            const PixelCoord n{q.row + dr[k], q.col + dc[k]};
            if (mask.in_bounds(n) && state.at(n) == 0) {
                state.at(n) = 1;
                frontier.push_back(n);
            }
        }
    };
    push_neighbors(start);

    while (grown < target && !frontier.empty()) {
        const int pick = rng.next_int(0, static_cast<int>(frontier.size()) - 1);
        const PixelCoord q = frontier[pick];
        frontier[pick] = frontier.back();
        frontier.pop_back();
        state.at(q) = 2;
        mask.at(q) = 1;
        ++grown;
        push_neighbors(q);
    }
    return mask;
}

}  // namespace detail

inline HazardMask gen_world(const WorldConfig& cfg, std::uint64_t seed) {
    validate(cfg);
    const double total = static_cast<double>(cfg.height) * cfg.width;
    for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
        Rng rng = Rng::derived(seed, static_cast<std::uint64_t>(attempt));
        HazardMask mask = cfg.hazard_kind == HazardKind::CRATERS
                              ? detail::gen_craters_once(cfg, rng)
                              : detail::gen_waterbody_once(cfg, rng);
        const double frac = static_cast<double>(count_set(mask)) / total;
        if (frac >= cfg.target_hazard_frac.lo && frac <= cfg.target_hazard_frac.hi) {
            return mask;
        }
    }
    throw GenerationError("gen_world: retry budget exhausted; hazard fraction range " +
                          std::to_string(cfg.target_hazard_frac.lo) + ".." +
                          std::to_string(cfg.target_hazard_frac.hi) +
                          " looks infeasible for this config");
}

// ---- scoring ----

// Signed L1 rim distance: 0 on the innermost hazard ring, positive deeper
// inside, negative outside (minus the distance to the nearest hazard pixel).
inline Grid<int> signed_rim_distance(const HazardMask& mask) {
    const DistanceField d_out = manhattan_distance_field(mask);
    const DistanceField d_in = manhattan_distance_field(complement(mask));
    Grid<int> signed_dist(mask.height(), mask.width(), 0);
    for (int r = 0; r < mask.height(); ++r) {
        for (int c = 0; c < mask.width(); ++c) {
            signed_dist.at(r, c) = mask.at(r, c) ? d_in.at(r, c) - 1 : -d_out.at(r, c);
        }
    }
    return signed_dist;
}

inline double logistic(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Pixels closer than `depth` to the hazard boundary are dropped.
inline HazardMask erode_mask(const HazardMask& mask, int depth) {
    if (depth <= 0) return mask;
    const Grid<int> signed_dist = signed_rim_distance(mask);
    HazardMask out(mask.height(), mask.width(), 0);
    for (std::size_t i = 0; i < out.values().size(); ++i) {
        out.values()[i] = (mask.values()[i] && signed_dist.values()[i] >= depth) ? 1 : 0;
    }
    return out;
}

// The scorer's structured view of a mask: whole components can be missed,
// the survivors move rigidly by per-component offsets (pixels pushed off the
// lattice are dropped), and thin rims erode away.
inline HazardMask perceive_mask(const HazardMask& mask, const ScorerConfig& cfg, Rng& rng,
                                int shift) {
    HazardMask out = mask;
    if (cfg.miss_rate > 0.0 || shift > 0) {
        out = HazardMask(mask.height(), mask.width(), 0);
        for (const auto& comp : connected_components(mask)) {
            const bool missed = rng.next_bernoulli(cfg.miss_rate);
            const int dr = shift > 0 ? rng.next_int(-shift, shift) : 0;
            const int dc = shift > 0 ? rng.next_int(-shift, shift) : 0;
            if (missed) continue;
            for (const auto& p : comp) {
                const PixelCoord q{p.row + dr, p.col + dc};
                if (out.in_bounds(q)) out.at(q) = 1;
            }
        }
    }
    return erode_mask(out, cfg.rim_erosion);
}

inline HazardMask perceive_mask(const HazardMask& mask, const ScorerConfig& cfg, Rng& rng) {
    return perceive_mask(mask, cfg, rng, cfg.perception_shift);
}

namespace detail {

// Noisy logit field underlying score_world; mc_samples jitters on top of it.
// The perception seed drives the structured failures (misses, offsets,
// phantoms); the noise seed drives the per-pixel logit noise. Streams:
// 1 = pixel noise, 2 = phantom placement, 3 = component misses/offsets.
inline std::vector<double> score_logits(const HazardMask& mask, const ScorerConfig& cfg,
                                        std::uint64_t noise_seed, std::uint64_t perception_seed,
                                        int shift_override = -1) {
    validate(cfg);
    Rng perception_rng = Rng::derived(perception_seed, 3);
    const int shift = shift_override >= 0 ? shift_override : cfg.perception_shift;
    const Grid<int> signed_dist =
        signed_rim_distance(perceive_mask(mask, cfg, perception_rng, shift));

    const bool phantoms = cfg.phantom_blobs.hi > 0;
    Grid<int> phantom_dist;
    if (phantoms) {
        Rng phantom_rng = Rng::derived(perception_seed, 2);
        HazardMask phantom_mask(mask.height(), mask.width(), 0);
        const int n = phantom_rng.next_int(cfg.phantom_blobs.lo, cfg.phantom_blobs.hi);
        for (int b = 0; b < n; ++b) {
            const int r0 = phantom_rng.next_int(0, mask.height() - 1);
            const int c0 = phantom_rng.next_int(0, mask.width() - 1);
            const int radius =
                phantom_rng.next_int(cfg.phantom_radius.lo, cfg.phantom_radius.hi);
            stamp_disk(phantom_mask, r0, c0, radius);
        }
        phantom_dist = signed_rim_distance(phantom_mask);
    }

    Rng noise_rng = Rng::derived(noise_seed, 1);
    std::vector<double> logits(mask.values().size());
    std::size_t i = 0;
    for (int r = 0; r < mask.height(); ++r) {
        for (int c = 0; c < mask.width(); ++c, ++i) {
            double signal = static_cast<double>(signed_dist.at(r, c)) / cfg.boundary_softness;
            if (phantoms) {
                const double bump = cfg.phantom_strength *
                                    static_cast<double>(phantom_dist.at(r, c)) /
                                    cfg.boundary_softness;
                signal = std::max(signal, bump);
            }
            logits[i] = signal + cfg.miss_bias + cfg.noise_sigma * noise_rng.next_gaussian();
        }
    }
    return logits;
}

}  // namespace detail

inline ScoreMap score_world(const HazardMask& mask, const ScorerConfig& cfg, std::uint64_t seed) {
    const auto logits = detail::score_logits(mask, cfg, seed, seed);
    ScoreMap scores(mask.height(), mask.width(), 0.0);
    for (std::size_t i = 0; i < logits.size(); ++i) {
        scores.values()[i] = logistic(logits[i]);
    }
    return scores;
}

// K stochastic score maps sharing one base logit field (sub-stream 0), each
// with independent per-pixel jitter (sub-streams 1..K). When the scorer
// resamples perception, each sample also redraws its structured failures
// while keeping the shared noise field. Zero jitter without resampling makes
// all samples identical to score_world under the derived sub-seed.
inline std::vector<ScoreMap> mc_samples(const HazardMask& mask, const ScorerConfig& cfg,
                                        int k_samples, std::uint64_t seed) {
    if (k_samples < 1) throw std::invalid_argument("mc_samples: K must be >= 1");
    validate(cfg);
    const std::uint64_t base_seed = sub_seed(seed, 0);
    const auto base = detail::score_logits(mask, cfg, base_seed, base_seed);
    std::vector<ScoreMap> samples;
    samples.reserve(static_cast<std::size_t>(k_samples));
    for (int k = 0; k < k_samples; ++k) {
        Rng rng = Rng::derived(seed, static_cast<std::uint64_t>(k) + 1);
        const std::vector<double>* logits = &base;
        std::vector<double> reperceived;
        if (cfg.mc_resample_perception) {
            const int shift =
                cfg.mc_sample_shift > 0 ? cfg.mc_sample_shift : cfg.perception_shift;
            reperceived = detail::score_logits(
                mask, cfg, base_seed, sub_seed(seed, 0x5A00ull + static_cast<std::uint64_t>(k)),
                shift);
            logits = &reperceived;
        }
        ScoreMap s(mask.height(), mask.width(), 0.0);
        for (std::size_t i = 0; i < s.values().size(); ++i) {
            s.values()[i] = logistic((*logits)[i] + cfg.mc_jitter_sigma * rng.next_gaussian());
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

// ---- dataset materialization ----

enum class Split { TRAIN, CAL, TEST };

inline const char* split_name(Split s) {
    switch (s) {
        case Split::TRAIN: return "train";
        case Split::CAL: return "cal";
        case Split::TEST: return "test";
    }
    return "?";
}

inline Split split_from_string(const std::string& name) {
    if (name == "train") return Split::TRAIN;
    if (name == "cal") return Split::CAL;
    if (name == "test") return Split::TEST;
    throw std::invalid_argument("unknown split: " + name);
}

struct SplitCounts {
    int train = 0;
    int cal = 0;
    int test = 0;
};

struct ManifestItem {
    int world_id = 0;
    Split split = Split::CAL;
    std::string mask_path;
    std::string score_path;
    std::vector<std::string> sample_paths;  // empty means single-map only
};

struct DatasetManifest {
    std::uint64_t seed = 0;
    int k_samples = 1;
    bool generated = false;  // false for imported external data
    WorldConfig world;
    ScorerConfig scorer;
    std::vector<ManifestItem> items;
    std::string base_dir;  // resolved at load/build time, not serialized

    std::string resolve(const std::string& rel) const {
        if (base_dir.empty()) return rel;
        return (std::filesystem::path(base_dir) / rel).string();
    }

    std::vector<const ManifestItem*> split_items(Split s) const {
        std::vector<const ManifestItem*> out;
        for (const auto& item : items) {
            if (item.split == s) out.push_back(&item);
        }
        return out;
    }
};

// Per-item seed streams are keyed by (split, index-within-split) so growing
// one split never reseeds another.
inline std::uint64_t item_seed(std::uint64_t dataset_seed, Split split, int index) {
    const std::uint64_t stream =
        (static_cast<std::uint64_t>(split) << 32) | static_cast<std::uint64_t>(index);
    return sub_seed(dataset_seed, stream);
}

struct GeneratedItem {
    HazardMask mask;
    ScoreMap score;
    std::vector<ScoreMap> samples;
};

inline GeneratedItem generate_item(const WorldConfig& wcfg, const ScorerConfig& scfg,
                                   int k_samples, std::uint64_t seed) {
    GeneratedItem item;
    item.mask = gen_world(wcfg, sub_seed(seed, 0));
    const std::uint64_t score_seed = sub_seed(seed, 1);
    item.samples = mc_samples(item.mask, scfg, k_samples, score_seed);
    // single map == the shared sample base, so zero-jitter samples match it
    item.score = score_world(item.mask, scfg, sub_seed(score_seed, 0));
    return item;
}

namespace detail {

inline std::string item_file(const char* prefix, int world_id, int sample = -1) {
    char buf[64];
    if (sample < 0) {
        std::snprintf(buf, sizeof(buf), "%s_%04d.txt", prefix, world_id);
    } else {
        std::snprintf(buf, sizeof(buf), "%s_%04d_s%02d.txt", prefix, world_id, sample);
    }
    return buf;
}

}  // namespace detail

inline void save_manifest(const DatasetManifest& manifest, const std::string& path);
inline DatasetManifest load_manifest(const std::string& path);

inline DatasetManifest build_dataset(const WorldConfig& wcfg, const ScorerConfig& scfg,
                                     const SplitCounts& counts, int k_samples, std::uint64_t seed,
                                     const std::string& out_dir) {
    validate(wcfg);
    validate(scfg);
    if (counts.train < 0 || counts.cal < 1 || counts.test < 1) {
        throw std::invalid_argument(
            "split counts must have cal >= 1 and test >= 1 (train may be 0)");
    }
    if (k_samples < 1) throw std::invalid_argument("K must be >= 1");

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("cannot create dataset directory " + out_dir);

    DatasetManifest manifest;
    manifest.seed = seed;
    manifest.k_samples = k_samples;
    manifest.generated = true;
    manifest.world = wcfg;
    manifest.scorer = scfg;
    manifest.base_dir = out_dir;

    int world_id = 0;
    const std::pair<Split, int> plan[] = {
        {Split::TRAIN, counts.train}, {Split::CAL, counts.cal}, {Split::TEST, counts.test}};
    for (const auto& [split, count] : plan) {
        for (int i = 0; i < count; ++i, ++world_id) {
            const GeneratedItem gen =
                generate_item(wcfg, scfg, k_samples, item_seed(seed, split, i));
            ManifestItem item;
            item.world_id = world_id;
            item.split = split;
            item.mask_path = detail::item_file("mask", world_id);
            item.score_path = detail::item_file("score", world_id);
            save_hazard_mask(gen.mask, manifest.resolve(item.mask_path));
            save_score_map(gen.score, manifest.resolve(item.score_path));
            for (int s = 0; s < k_samples; ++s) {
                item.sample_paths.push_back(detail::item_file("score", world_id, s));
                save_score_map(gen.samples[static_cast<std::size_t>(s)],
                               manifest.resolve(item.sample_paths.back()));
            }
            manifest.items.push_back(std::move(item));
        }
    }
    save_manifest(manifest, (std::filesystem::path(out_dir) / "manifest.json").string());
    return manifest;
}

// References externally produced files unmodified, after validating that
// they parse and that each (score, mask) pair is dimension-matched.
inline DatasetManifest import_external(const std::vector<std::string>& score_files,
                                       const std::vector<std::string>& mask_files,
                                       const std::vector<Split>& splits) {
    if (score_files.size() != mask_files.size() || score_files.size() != splits.size()) {
        throw std::invalid_argument("import_external: file and split lists must align");
    }
    if (score_files.empty()) throw std::invalid_argument("import_external: no files given");

    DatasetManifest manifest;
    manifest.generated = false;
    for (std::size_t i = 0; i < score_files.size(); ++i) {
        const ScoreMap score = load_score_map(score_files[i]);
        const HazardMask mask = load_hazard_mask(mask_files[i]);
        if (score.height() != mask.height() || score.width() != mask.width()) {
            throw std::runtime_error("dimension mismatch between " + score_files[i] + " (" +
                                     std::to_string(score.height()) + "x" +
                                     std::to_string(score.width()) + ") and " + mask_files[i] +
                                     " (" + std::to_string(mask.height()) + "x" +
                                     std::to_string(mask.width()) + ")");
        }
        ManifestItem item;
        item.world_id = static_cast<int>(i);
        item.split = splits[i];
        item.mask_path = mask_files[i];
        item.score_path = score_files[i];
        manifest.items.push_back(std::move(item));
    }
    return manifest;
}

// ---- manifest JSON ----

inline void to_json(nlohmann::json& j, const WorldConfig& cfg) {
    j = nlohmann::json{{"height", cfg.height},
                       {"width", cfg.width},
                       {"hazard_kind", hazard_kind_name(cfg.hazard_kind)},
                       {"n_blobs", {cfg.n_blobs.lo, cfg.n_blobs.hi}},
                       {"blob_radius", {cfg.blob_radius.lo, cfg.blob_radius.hi}},
                       {"target_hazard_frac", {cfg.target_hazard_frac.lo, cfg.target_hazard_frac.hi}},
                       {"max_retries", cfg.max_retries}};
}

inline void from_json(const nlohmann::json& j, WorldConfig& cfg) {
    cfg.height = j.value("height", cfg.height);
    cfg.width = j.value("width", cfg.width);
    if (j.contains("hazard_kind")) {
        cfg.hazard_kind = hazard_kind_from_string(j.at("hazard_kind").get<std::string>());
    }
    if (j.contains("n_blobs")) {
        cfg.n_blobs = {j.at("n_blobs").at(0).get<int>(), j.at("n_blobs").at(1).get<int>()};
    }
    if (j.contains("blob_radius")) {
        cfg.blob_radius = {j.at("blob_radius").at(0).get<int>(),
                           j.at("blob_radius").at(1).get<int>()};
    }
    if (j.contains("target_hazard_frac")) {
        cfg.target_hazard_frac = {j.at("target_hazard_frac").at(0).get<double>(),
                                  j.at("target_hazard_frac").at(1).get<double>()};
    }
    cfg.max_retries = j.value("max_retries", cfg.max_retries);
}

inline void to_json(nlohmann::json& j, const ScorerConfig& cfg) {
    j = nlohmann::json{{"boundary_softness", cfg.boundary_softness},
                       {"noise_sigma", cfg.noise_sigma},
                       {"miss_bias", cfg.miss_bias},
                       {"mc_jitter_sigma", cfg.mc_jitter_sigma},
                       {"mc_sample_shift", cfg.mc_sample_shift},
                       {"miss_rate", cfg.miss_rate},
                       {"perception_shift", cfg.perception_shift},
                       {"rim_erosion", cfg.rim_erosion},
                       {"mc_resample_perception", cfg.mc_resample_perception},
                       {"phantom_blobs", {cfg.phantom_blobs.lo, cfg.phantom_blobs.hi}},
                       {"phantom_radius", {cfg.phantom_radius.lo, cfg.phantom_radius.hi}},
                       {"phantom_strength", cfg.phantom_strength}};
}

inline void from_json(const nlohmann::json& j, ScorerConfig& cfg) {
    cfg.boundary_softness = j.value("boundary_softness", cfg.boundary_softness);
    cfg.noise_sigma = j.value("noise_sigma", cfg.noise_sigma);
    cfg.miss_bias = j.value("miss_bias", cfg.miss_bias);
    cfg.mc_jitter_sigma = j.value("mc_jitter_sigma", cfg.mc_jitter_sigma);
    cfg.mc_sample_shift = j.value("mc_sample_shift", cfg.mc_sample_shift);
    cfg.miss_rate = j.value("miss_rate", cfg.miss_rate);
    cfg.perception_shift = j.value("perception_shift", cfg.perception_shift);
    cfg.rim_erosion = j.value("rim_erosion", cfg.rim_erosion);
    cfg.mc_resample_perception = j.value("mc_resample_perception", cfg.mc_resample_perception);
    if (j.contains("phantom_blobs")) {
        cfg.phantom_blobs = {j.at("phantom_blobs").at(0).get<int>(),
                             j.at("phantom_blobs").at(1).get<int>()};
    }
    if (j.contains("phantom_radius")) {
        cfg.phantom_radius = {j.at("phantom_radius").at(0).get<int>(),
                              j.at("phantom_radius").at(1).get<int>()};
    }
    cfg.phantom_strength = j.value("phantom_strength", cfg.phantom_strength);
}

inline void save_manifest(const DatasetManifest& manifest, const std::string& path) {
    nlohmann::json j;
    j["schema"] = "confnav.manifest.v1";
    j["seed"] = manifest.seed;
    j["k"] = manifest.k_samples;
    j["generated"] = manifest.generated;
    if (manifest.generated) {
        j["world"] = manifest.world;
        j["scorer"] = manifest.scorer;
    }
    nlohmann::json items = nlohmann::json::array();
    for (const auto& item : manifest.items) {
        nlohmann::json ji{{"world_id", item.world_id},
                          {"split", split_name(item.split)},
                          {"mask", item.mask_path},
                          {"score", item.score_path}};
        if (!item.sample_paths.empty()) ji["samples"] = item.sample_paths;
        items.push_back(std::move(ji));
    }
    j["items"] = std::move(items);
    write_text_atomic(path, j.dump(2) + "\n");
}

inline DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("manifest parse error in " + path + ": " + e.what());
    }
    DatasetManifest manifest;
    manifest.seed = j.value("seed", 0ull);
    manifest.k_samples = j.value("k", 1);
    manifest.generated = j.value("generated", false);
    if (j.contains("world")) manifest.world = j.at("world").get<WorldConfig>();
    if (j.contains("scorer")) manifest.scorer = j.at("scorer").get<ScorerConfig>();
    for (const auto& ji : j.at("items")) {
        ManifestItem item;
        item.world_id = ji.at("world_id").get<int>();
        item.split = split_from_string(ji.at("split").get<std::string>());
        item.mask_path = ji.at("mask").get<std::string>();
        item.score_path = ji.at("score").get<std::string>();
        if (ji.contains("samples")) {
            item.sample_paths = ji.at("samples").get<std::vector<std::string>>();
        }
        manifest.items.push_back(std::move(item));
    }
    manifest.base_dir = std::filesystem::path(path).parent_path().string();
    return manifest;
}

// ---- loaders feeding the conformal stage ----

inline CalibrationSet load_calibration_set(const DatasetManifest& manifest, Split split) {
    std::vector<CalItem> items;
    for (const ManifestItem* item : manifest.split_items(split)) {
        items.push_back({load_score_map(manifest.resolve(item->score_path)),
                         load_hazard_mask(manifest.resolve(item->mask_path))});
    }
    if (items.empty()) {
        throw std::runtime_error(std::string("manifest has no items in split '") +
                                 split_name(split) + "'");
    }
    return CalibrationSet(std::move(items));
}

inline std::vector<McCalItem> load_mc_items(const DatasetManifest& manifest, Split split) {
    std::vector<McCalItem> items;
    for (const ManifestItem* item : manifest.split_items(split)) {
        McCalItem mc;
        mc.truth = load_hazard_mask(manifest.resolve(item->mask_path));
        if (item->sample_paths.empty()) {
            mc.samples.push_back(load_score_map(manifest.resolve(item->score_path)));
        } else {
            for (const auto& p : item->sample_paths) {
                mc.samples.push_back(load_score_map(manifest.resolve(p)));
            }
        }
        items.push_back(std::move(mc));
    }
    if (items.empty()) {
        throw std::runtime_error(std::string("manifest has no items in split '") +
                                 split_name(split) + "'");
    }
    return items;
}

}  // namespace confnav
