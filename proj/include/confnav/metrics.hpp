#pragma once
// Segmentation quality metrics at the pixel and instance level.
//
// Degenerate-denominator convention: a metric whose denominator is zero is
// reported as "undefined" (nullopt) and excluded from dataset aggregation
// rather than scored as an arbitrary 0 or 1. An image with empty truth
// contributes no coverage; an empty prediction against nonempty truth
// contributes no precision; an image empty on both sides contributes nothing.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "confnav/grid.hpp"

namespace confnav {

struct ConfusionCounts {
    long tp = 0;
    long fp = 0;
    long fn = 0;
    long tn = 0;
};

inline ConfusionCounts confusion_counts(const HazardMask& predicted, const HazardMask& truth) {
    require_same_shape(predicted, truth, "confusion_counts");
    ConfusionCounts counts;
    const auto& p = predicted.values();
    const auto& t = truth.values();
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] && t[i]) ++counts.tp;
        else if (p[i] && !t[i]) ++counts.fp;
        else if (!p[i] && t[i]) ++counts.fn;
        else ++counts.tn;
    }
    return counts;
}

struct PixelMetrics {
    std::optional<double> precision;
    std::optional<double> coverage;
    std::optional<double> f1;
    std::optional<double> iou;
};

inline PixelMetrics pixel_metrics_from_counts(const ConfusionCounts& c) {
    PixelMetrics m;
    if (c.tp + c.fp > 0) {
        m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    }
    if (c.tp + c.fn > 0) {
        m.coverage = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    }
    if (m.precision && m.coverage) {
        const double p = *m.precision;
        const double r = *m.coverage;
        m.f1 = (p + r > 0.0) ? 2.0 * p * r / (p + r) : 0.0;
    }
    if (c.tp + c.fp + c.fn > 0) {
        m.iou = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp + c.fn);
    }
    return m;
}

inline PixelMetrics pixel_metrics(const HazardMask& predicted, const HazardMask& truth) {
    return pixel_metrics_from_counts(confusion_counts(predicted, truth));
}

// Maximal 4-connected components of set pixels, ordered by their smallest
// (row, col) member. Component pixel lists are sorted.
using Instance = std::vector<PixelCoord>;

inline std::vector<Instance> connected_components(const HazardMask& mask) {
    const int h = mask.height();
    const int w = mask.width();
    std::vector<Instance> components;
    Grid<std::uint8_t> seen(h, w, 0);
    std::vector<PixelCoord> stack;

    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (!mask.at(r, c) || seen.at(r, c)) continue;
            Instance comp;
            stack.push_back({r, c});
            seen.at(r, c) = 1;
            while (!stack.empty()) {
                const PixelCoord q = stack.back();
                stack.pop_back();
                comp.push_back(q);
                const int dr[4] = {-1, 1, 0, 0};
                const int dc[4] = {0, 0, -1, 1};
                for (int k = 0; k < 4; ++k) {
                    const int nr = q.row + dr[k];
                    const int nc = q.col + dc[k];
                    if (mask.in_bounds(nr, nc) && mask.at(nr, nc) && !seen.at(nr, nc)) {
                        seen.at(nr, nc) = 1;
                        stack.push_back({nr, nc});
                    }
                }
            }
            std::sort(comp.begin(), comp.end());
            components.push_back(std::move(comp));
        }
    }
    return components;
}

struct InstanceMetrics {
    std::optional<double> precision;
    std::optional<double> coverage;
    std::optional<double> f1;
    long truth_instances = 0;
    long predicted_instances = 0;
    long detected_truth = 0;
    long matched_predicted = 0;
};

// A truth instance counts as detected iff at least cover_frac of its pixels
// are predicted hazardous; a predicted instance is a true positive iff it
// intersects at least one truth pixel.
inline InstanceMetrics instance_metrics(const HazardMask& predicted, const HazardMask& truth,
                                        double cover_frac = 0.5) {
    require_same_shape(predicted, truth, "instance_metrics");
    if (!(cover_frac > 0.0 && cover_frac <= 1.0)) {
        throw std::invalid_argument("cover_frac must lie in (0,1]");
    }

    InstanceMetrics m;
    const auto truth_comps = connected_components(truth);
    const auto pred_comps = connected_components(predicted);
    m.truth_instances = static_cast<long>(truth_comps.size());
    m.predicted_instances = static_cast<long>(pred_comps.size());

    for (const auto& comp : truth_comps) {
        long covered = 0;
        for (const auto& px : comp) covered += predicted.at(px) ? 1 : 0;
        if (static_cast<double>(covered) >= cover_frac * static_cast<double>(comp.size())) {
            ++m.detected_truth;
        }
    }
    for (const auto& comp : pred_comps) {
        bool hits = false;
        for (const auto& px : comp) {
            if (truth.at(px)) {
                hits = true;
                break;
            }
        }
        if (hits) ++m.matched_predicted;
    }

    if (m.truth_instances > 0) {
        m.coverage = static_cast<double>(m.detected_truth) / static_cast<double>(m.truth_instances);
    }
    if (m.predicted_instances > 0) {
        m.precision =
            static_cast<double>(m.matched_predicted) / static_cast<double>(m.predicted_instances);
    }
    if (m.precision && m.coverage) {
        const double p = *m.precision;
        const double r = *m.coverage;
        m.f1 = (p + r > 0.0) ? 2.0 * p * r / (p + r) : 0.0;
    }
    return m;
}

struct Aggregate {
    double mean = 0.0;
    double stddev = 0.0;
    long n = 0;
};

// Mean and sample standard deviation over the defined entries, reduced in
// the order given. Returns nullopt when no entry is defined.
inline std::optional<Aggregate> aggregate_defined(const std::vector<std::optional<double>>& vals) {
    Aggregate agg;
    double sum = 0.0;
    for (const auto& v : vals) {
        if (!v) continue;
        sum += *v;
        ++agg.n;
    }
    if (agg.n == 0) return std::nullopt;
    agg.mean = sum / static_cast<double>(agg.n);
    if (agg.n > 1) {
        double ss = 0.0;
        for (const auto& v : vals) {
            if (!v) continue;
            const double d = *v - agg.mean;
            ss += d * d;
        }
        agg.stddev = std::sqrt(ss / static_cast<double>(agg.n - 1));
    }
    return agg;
}

}  // namespace confnav
