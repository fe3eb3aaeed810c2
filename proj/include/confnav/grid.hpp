#pragma once
// Lattice primitives: probability score maps, binary hazard masks, the nested
// thresholding family, and L1 distance fields.
//
// Text formats (also the ingestion path for externally produced score maps):
//   score map:   first line "H W", then H lines of W probabilities in [0,1]
//   hazard mask: same header, entries 0/1

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace confnav {

struct PixelCoord {
    int row = 0;
    int col = 0;

    bool operator==(const PixelCoord&) const = default;
    auto operator<=>(const PixelCoord&) const = default;
};

template <typename T>
class Grid {
 public:
    Grid() = default;
    Grid(int height, int width, T fill = T{}) : height_(height), width_(width) {
        if (height <= 0 || width <= 0) {
            throw std::invalid_argument("grid dimensions must be positive");
        }
        values_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill);
    }

    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    bool in_bounds(int r, int c) const {
        return r >= 0 && r < height_ && c >= 0 && c < width_;
    }
    bool in_bounds(PixelCoord p) const { return in_bounds(p.row, p.col); }

    T& at(int r, int c) { return values_[index(r, c)]; }
    const T& at(int r, int c) const { return values_[index(r, c)]; }
    T& at(PixelCoord p) { return at(p.row, p.col); }
    const T& at(PixelCoord p) const { return at(p.row, p.col); }

    std::vector<T>& values() { return values_; }
    const std::vector<T>& values() const { return values_; }

    bool same_shape(const Grid& other) const {
        return height_ == other.height_ && width_ == other.width_;
    }

    bool operator==(const Grid&) const = default;

 private:
    std::size_t index(int r, int c) const {
        return static_cast<std::size_t>(r) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(c);
    }

    int height_ = 0;
    int width_ = 0;
    std::vector<T> values_;
};

using ScoreMap = Grid<double>;
using HazardMask = Grid<std::uint8_t>;
using DistanceField = Grid<int>;

// Sentinel distance for fields over an empty mask; strictly larger than any
// realizable L1 distance on the lattice.
inline int distance_sentinel(int height, int width) { return height + width; }

class Threshold {
 public:
    explicit Threshold(double lambda) : lambda_(lambda) {
        if (!(lambda >= 0.0 && lambda <= 1.0)) {
            throw std::invalid_argument("threshold lambda must lie in [0,1]");
        }
    }
    double lambda() const { return lambda_; }

    bool operator==(const Threshold&) const = default;

 private:
    double lambda_;
};

inline void require_same_shape(const ScoreMap& a, const HazardMask& b, const char* what) {
    if (a.height() != b.height() || a.width() != b.width()) {
        throw std::invalid_argument(std::string(what) + ": dimension mismatch");
    }
}

inline void require_same_shape(const HazardMask& a, const HazardMask& b, const char* what) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(what) + ": dimension mismatch");
    }
}

// Nested thresholding: pixel set iff score >= 1 - lambda. Ties at the
// boundary are included; larger lambda never removes pixels.
inline HazardMask threshold_mask(const ScoreMap& scores, Threshold lambda) {
    HazardMask mask(scores.height(), scores.width(), 0);
    const double cutoff = 1.0 - lambda.lambda();
    const auto& in = scores.values();
    auto& out = mask.values();
    for (std::size_t i = 0; i < in.size(); ++i) {
        out[i] = in[i] >= cutoff ? 1 : 0;
    }
    return mask;
}

inline std::vector<PixelCoord> hazard_set(const HazardMask& mask) {
    std::vector<PixelCoord> set;
    for (int r = 0; r < mask.height(); ++r) {
        for (int c = 0; c < mask.width(); ++c) {
            if (mask.at(r, c)) set.push_back({r, c});
        }
    }
    return set;
}

inline long count_set(const HazardMask& mask) {
    long n = 0;
    for (auto v : mask.values()) n += v ? 1 : 0;
    return n;
}

inline HazardMask complement(const HazardMask& mask) {
    HazardMask out(mask.height(), mask.width(), 0);
    for (std::size_t i = 0; i < mask.values().size(); ++i) {
        out.values()[i] = mask.values()[i] ? 0 : 1;
    }
    return out;
}

// Exact L1 distance to the nearest set pixel (two-pass chamfer sweep).
// Cells inside the mask hold 0; an empty mask yields the sentinel everywhere.
inline DistanceField manhattan_distance_field(const HazardMask& mask) {
    const int h = mask.height();
    const int w = mask.width();
    const int inf = distance_sentinel(h, w);
    DistanceField dist(h, w, inf);

    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (mask.at(r, c)) {
                dist.at(r, c) = 0;
            } else {
                int best = inf;
                if (r > 0) best = std::min(best, dist.at(r - 1, c) + 1);
                if (c > 0) best = std::min(best, dist.at(r, c - 1) + 1);
                dist.at(r, c) = std::min(dist.at(r, c), best);
            }
        }
    }
    for (int r = h - 1; r >= 0; --r) {
        for (int c = w - 1; c >= 0; --c) {
            int best = dist.at(r, c);
            if (r + 1 < h) best = std::min(best, dist.at(r + 1, c) + 1);
            if (c + 1 < w) best = std::min(best, dist.at(r, c + 1) + 1);
            dist.at(r, c) = best;
        }
    }
    return dist;
}

// ---- text I/O ----

namespace detail {

inline std::runtime_error parse_error(const std::string& path, int line, const std::string& msg) {
    return std::runtime_error(path + ":" + std::to_string(line) + ": " + msg);
}

inline std::pair<int, int> read_grid_header(std::istream& in, const std::string& path) {
    std::string header;
    if (!std::getline(in, header)) {
        throw parse_error(path, 1, "missing header line \"H W\"");
    }
    std::istringstream hs(header);
    int h = 0, w = 0;
    if (!(hs >> h >> w) || h <= 0 || w <= 0) {
        throw parse_error(path, 1, "header must be two positive integers \"H W\"");
    }
    return {h, w};
}

}  // namespace detail

inline ScoreMap load_score_map(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open score map file: " + path);
    auto [h, w] = detail::read_grid_header(in, path);
    ScoreMap map(h, w, 0.0);
    for (int r = 0; r < h; ++r) {
        std::string line;
        if (!std::getline(in, line)) {
            throw detail::parse_error(path, r + 2, "unexpected end of file");
        }
        std::istringstream ls(line);
        for (int c = 0; c < w; ++c) {
            double v = 0.0;
            if (!(ls >> v)) {
                throw detail::parse_error(path, r + 2, "expected " + std::to_string(w) + " values");
            }
            if (!(v >= 0.0 && v <= 1.0)) {
                throw detail::parse_error(path, r + 2,
                                          "score " + std::to_string(v) + " outside [0,1]");
            }
            map.at(r, c) = v;
        }
    }
    return map;
}

inline HazardMask load_hazard_mask(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open mask file: " + path);
    auto [h, w] = detail::read_grid_header(in, path);
    HazardMask mask(h, w, 0);
    for (int r = 0; r < h; ++r) {
        std::string line;
        if (!std::getline(in, line)) {
            throw detail::parse_error(path, r + 2, "unexpected end of file");
        }
        std::istringstream ls(line);
        for (int c = 0; c < w; ++c) {
            int v = -1;
            if (!(ls >> v)) {
                throw detail::parse_error(path, r + 2, "expected " + std::to_string(w) + " values");
            }
            if (v != 0 && v != 1) {
                throw detail::parse_error(path, r + 2,
                                          "mask entry " + std::to_string(v) + " not in {0,1}");
            }
            mask.at(r, c) = static_cast<std::uint8_t>(v);
        }
    }
    return mask;
}

// Writes via a temporary sibling and renames into place, so partial output
// is never visible at the final path.
inline void write_text_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write file: " + tmp);
        out << content;
        if (!out) throw std::runtime_error("write failed: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

inline void save_score_map(const ScoreMap& map, const std::string& path) {
    std::ostringstream out;
    out << map.height() << ' ' << map.width() << '\n';
    char buf[32];
    for (int r = 0; r < map.height(); ++r) {
        for (int c = 0; c < map.width(); ++c) {
            std::snprintf(buf, sizeof(buf), "%.6f", map.at(r, c));
            out << buf << (c + 1 == map.width() ? '\n' : ' ');
        }
    }
    write_text_atomic(path, out.str());
}

inline void save_hazard_mask(const HazardMask& mask, const std::string& path) {
    std::ostringstream out;
    out << mask.height() << ' ' << mask.width() << '\n';
    for (int r = 0; r < mask.height(); ++r) {
        for (int c = 0; c < mask.width(); ++c) {
            out << static_cast<int>(mask.at(r, c)) << (c + 1 == mask.width() ? '\n' : ' ');
        }
    }
    write_text_atomic(path, out.str());
}

}  // namespace confnav
