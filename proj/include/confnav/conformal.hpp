#pragma once
// Conformal risk control over nested hazard masks: per-image FNR loss,
// empirical risk, the inflated-bound threshold search, the Monte-Carlo
// ensemble variant, and the two non-conformal baselines.

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "confnav/grid.hpp"
#include "confnav/metrics.hpp"

namespace confnav {

struct CalibrationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class RiskLevel {
 public:
    explicit RiskLevel(double alpha) : alpha_(alpha) {
        if (!(alpha > 0.0 && alpha < 1.0)) {
            throw std::invalid_argument("risk level alpha must lie in (0,1)");
        }
    }
    double alpha() const { return alpha_; }

 private:
    double alpha_;
};

// Uniform grid {0, 1/G, ..., 1} discretizing the threshold search. Any grid
// point satisfying the inflated bound certifies the guarantee, so rounding
// upward along the grid stays conservative.
class LambdaGrid {
 public:
    explicit LambdaGrid(int resolution) : resolution_(resolution) {
        if (resolution < 2) throw std::invalid_argument("lambda grid resolution must be >= 2");
    }
    int resolution() const { return resolution_; }
    int points() const { return resolution_ + 1; }
    double lambda_at(int k) const { return static_cast<double>(k) / resolution_; }

 private:
    int resolution_;
};

struct CalItem {
    ScoreMap scores;
    HazardMask truth;
};

class CalibrationSet {
 public:
    explicit CalibrationSet(std::vector<CalItem> items) : items_(std::move(items)) {
        if (items_.empty()) throw std::invalid_argument("calibration set must be nonempty");
        for (const auto& item : items_) {
            require_same_shape(item.scores, item.truth, "calibration item");
        }
    }

    std::size_t size() const { return items_.size(); }
    const std::vector<CalItem>& items() const { return items_; }

 private:
    std::vector<CalItem> items_;
};

// Fraction of truth-hazard pixels the prediction misses; 0 when the truth
// has no hazard pixels.
inline double fnr_loss(const HazardMask& predicted, const HazardMask& truth) {
    require_same_shape(predicted, truth, "fnr_loss");
    long hazard = 0;
    long covered = 0;
    const auto& p = predicted.values();
    const auto& t = truth.values();
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i]) {
            ++hazard;
            if (p[i]) ++covered;
        }
    }
    if (hazard == 0) return 0.0;
    return 1.0 - static_cast<double>(covered) / static_cast<double>(hazard);
}

// Mean FNR loss of the thresholded maps over the calibration set, reduced
// in item order.
inline double empirical_risk(const CalibrationSet& cal, Threshold lambda) {
    double sum = 0.0;
    for (const auto& item : cal.items()) {
        sum += fnr_loss(threshold_mask(item.scores, lambda), item.truth);
    }
    return sum / static_cast<double>(cal.size());
}

namespace detail {

// Sorted scores at truth-hazard pixels, one vector per item. Risk at any
// lambda then reduces to a suffix count with the same >= comparison the
// mask thresholding uses, so curve values match empirical_risk exactly.
inline std::vector<std::vector<double>> hazard_score_index(const CalibrationSet& cal) {
    std::vector<std::vector<double>> index;
    index.reserve(cal.size());
    for (const auto& item : cal.items()) {
        std::vector<double> scores;
        const auto& s = item.scores.values();
        const auto& t = item.truth.values();
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (t[i]) scores.push_back(s[i]);
        }
        std::sort(scores.begin(), scores.end());
        index.push_back(std::move(scores));
    }
    return index;
}

inline double risk_from_index(const std::vector<std::vector<double>>& index, double lambda) {
    const double cutoff = 1.0 - lambda;
    double sum = 0.0;
    for (const auto& scores : index) {
        if (scores.empty()) continue;
        const auto first = std::lower_bound(scores.begin(), scores.end(), cutoff);
        const long covered = static_cast<long>(scores.end() - first);
        sum += 1.0 - static_cast<double>(covered) / static_cast<double>(scores.size());
    }
    return sum / static_cast<double>(index.size());
}

}  // namespace detail

inline std::vector<double> risk_curve(const CalibrationSet& cal, const LambdaGrid& grid) {
    const auto index = detail::hazard_score_index(cal);
    std::vector<double> curve(grid.points());
    for (int k = 0; k < grid.points(); ++k) {
        curve[k] = detail::risk_from_index(index, grid.lambda_at(k));
    }
    return curve;
}

// Smallest grid lambda whose inflated empirical risk meets the target:
// (N/(N+1)) * R_hat(lambda) + 1/(N+1) <= alpha. By nestedness the feasible
// set is an upper interval of the grid, so the first hit is the infimum.
inline Threshold calibrate_crc(const CalibrationSet& cal, RiskLevel alpha, const LambdaGrid& grid) {
    const double n = static_cast<double>(cal.size());
    const double floor = 1.0 / (n + 1.0);
    if (alpha.alpha() <= floor) {
        throw CalibrationError(
            "risk level alpha=" + std::to_string(alpha.alpha()) + " is infeasible for N=" +
            std::to_string(cal.size()) + ": the bound floor 1/(N+1)=" + std::to_string(floor) +
            " requires alpha > " + std::to_string(floor));
    }
    const auto index = detail::hazard_score_index(cal);
    for (int k = 0; k < grid.points(); ++k) {
        const double lambda = grid.lambda_at(k);
        const double risk = detail::risk_from_index(index, lambda);
        if (n / (n + 1.0) * risk + floor <= alpha.alpha()) {
            return Threshold(lambda);
        }
    }
    // unreachable: lambda=1 yields full masks and zero risk
    throw CalibrationError("no feasible lambda on the grid");
}

inline ScoreMap mc_average(const std::vector<ScoreMap>& samples) {
    if (samples.empty()) throw std::invalid_argument("mc_average: empty sample list");
    ScoreMap mean(samples.front().height(), samples.front().width(), 0.0);
    for (const auto& s : samples) {
        if (!s.same_shape(mean)) {
            throw std::invalid_argument("mc_average: sample dimension mismatch");
        }
        for (std::size_t i = 0; i < mean.values().size(); ++i) {
            mean.values()[i] += s.values()[i];
        }
    }
    const double k = static_cast<double>(samples.size());
    for (auto& v : mean.values()) v /= k;
    return mean;
}

struct McCalItem {
    std::vector<ScoreMap> samples;
    HazardMask truth;
};

inline CalibrationSet average_samples(const std::vector<McCalItem>& items) {
    std::vector<CalItem> averaged;
    averaged.reserve(items.size());
    for (const auto& item : items) {
        averaged.push_back({mc_average(item.samples), item.truth});
    }
    return CalibrationSet(std::move(averaged));
}

inline Threshold calibrate_mccp(const std::vector<McCalItem>& items, RiskLevel alpha,
                                const LambdaGrid& grid) {
    return calibrate_crc(average_samples(items), alpha, grid);
}

// Grid lambda maximizing mean pixel F1 over the validation images where F1
// is defined; ties break toward smaller lambda.
inline Threshold fit_baseline_lambda(const CalibrationSet& validation, const LambdaGrid& grid) {
    double best_f1 = -1.0;
    int best_k = 0;
    for (int k = 0; k < grid.points(); ++k) {
        const Threshold lambda(grid.lambda_at(k));
        std::vector<std::optional<double>> f1s;
        f1s.reserve(validation.size());
        for (const auto& item : validation.items()) {
            f1s.push_back(pixel_metrics(threshold_mask(item.scores, lambda), item.truth).f1);
        }
        const auto agg = aggregate_defined(f1s);
        const double mean_f1 = agg ? agg->mean : 0.0;
        if (mean_f1 > best_f1) {
            best_f1 = mean_f1;
            best_k = k;
        }
    }
    return Threshold(grid.lambda_at(best_k));
}

enum class Method { BASELINE, MC, CRC, MCCP };

inline const char* method_name(Method m) {
    switch (m) {
        case Method::BASELINE: return "baseline";
        case Method::MC: return "mc";
        case Method::CRC: return "crc";
        case Method::MCCP: return "mccp";
    }
    return "?";
}

inline Method method_from_string(const std::string& name) {
    if (name == "baseline") return Method::BASELINE;
    if (name == "mc") return Method::MC;
    if (name == "crc") return Method::CRC;
    if (name == "mccp") return Method::MCCP;
    throw std::invalid_argument("unknown method: " + name);
}

inline bool method_uses_samples(Method m) { return m == Method::MC || m == Method::MCCP; }
inline bool method_is_conformal(Method m) { return m == Method::CRC || m == Method::MCCP; }

struct CalibratedPredictor {
    Method method = Method::BASELINE;
    Threshold lambda_hat{0.0};
    int mc_samples = 1;                // K, meaningful for MC/MCCP
    std::optional<double> alpha;       // CRC/MCCP only
};

inline HazardMask predict(const CalibratedPredictor& pred, const ScoreMap& scores) {
    if (method_uses_samples(pred.method)) {
        throw std::invalid_argument(std::string("predict: method ") + method_name(pred.method) +
                                    " requires a sample list, not a single map");
    }
    return threshold_mask(scores, pred.lambda_hat);
}

inline HazardMask predict(const CalibratedPredictor& pred, const std::vector<ScoreMap>& samples) {
    if (!method_uses_samples(pred.method)) {
        throw std::invalid_argument(std::string("predict: method ") + method_name(pred.method) +
                                    " takes a single map, not a sample list");
    }
    return threshold_mask(mc_average(samples), pred.lambda_hat);
}

}  // namespace confnav
