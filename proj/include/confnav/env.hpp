#pragma once
// Lattice navigation MDP over a calibrated planning mask: cardinal actions,
// goal-progress shaping with a hazard penalty branch, a compact vector-view
// observation, and an optional observation-noise harness.
//
// The reward and episode dynamics read only the planning mask; ground-truth
// fields surface exclusively through step info, so evaluation never leaks
// into the agent's world.

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "confnav/grid.hpp"
#include "confnav/rng.hpp"

namespace confnav {

enum class Action { UP = 0, RIGHT = 1, DOWN = 2, LEFT = 3 };

inline constexpr std::array<Action, 4> all_actions{Action::UP, Action::RIGHT, Action::DOWN,
                                                   Action::LEFT};

inline const char* action_name(Action a) {
    switch (a) {
        case Action::UP: return "up";
        case Action::RIGHT: return "right";
        case Action::DOWN: return "down";
        case Action::LEFT: return "left";
    }
    return "?";
}

// row/col displacement
inline std::pair<int, int> displacement(Action a) {
    switch (a) {
        case Action::UP: return {-1, 0};
        case Action::RIGHT: return {0, 1};
        case Action::DOWN: return {1, 0};
        case Action::LEFT: return {0, -1};
    }
    return {0, 0};
}

struct RewardParams {
    double kappa = 0.05;  // step cost
    double beta = 50.0;   // goal bonus
};

struct NoiseConfig {
    double sigma = 1.0;
    double p = 1.0;
    bool enabled = false;
};

inline void validate(const RewardParams& rp) {
    if (rp.kappa < 0.0 || rp.beta < 0.0) {
        throw std::invalid_argument("reward params must be non-negative");
    }
}

inline void validate(const NoiseConfig& nc) {
    if (nc.sigma < 0.0) throw std::invalid_argument("noise sigma must be non-negative");
    if (!(nc.p >= 0.0 && nc.p <= 1.0)) throw std::invalid_argument("noise p must lie in [0,1]");
}

// Vector-view state: signed goal offsets, L1 distance to the nearest
// planning-mask pixel (sentinel when the mask is empty), an inside flag, and
// four advisory legality flags ordered UP, RIGHT, DOWN, LEFT. Distance
// entries are doubles so the noise harness can perturb them.
struct Observation {
    double d_row = 0.0;
    double d_col = 0.0;
    double rim_dist = 0.0;
    bool inside = false;
    std::array<std::uint8_t, 4> legal{1, 1, 1, 1};

    double goal_distance() const { return std::abs(d_row) + std::abs(d_col); }
};

struct NavWorld {
    HazardMask gt_mask;    // evaluation only
    HazardMask plan_mask;  // drives reward and features
    PixelCoord start;
    PixelCoord goal;
    int horizon = 1000;
};

inline void validate(const NavWorld& world) {
    require_same_shape(world.gt_mask, world.plan_mask, "nav world masks");
    if (!world.gt_mask.in_bounds(world.start) || !world.gt_mask.in_bounds(world.goal)) {
        throw std::invalid_argument("start/goal must lie on the lattice");
    }
    if (world.start == world.goal) throw std::invalid_argument("start must differ from goal");
    if (world.plan_mask.at(world.start) || world.plan_mask.at(world.goal)) {
        throw std::invalid_argument("start and goal must lie outside the planning mask");
    }
    if (world.horizon < 1) throw std::invalid_argument("horizon must be >= 1");
}

struct StepInfo {
    PixelCoord pose;
    bool in_plan_hazard = false;
    bool in_gt_hazard = false;
    int gt_rim_dist = 0;
};

struct StepResult {
    Observation obs;
    double reward = 0.0;
    bool done = false;
    StepInfo info;
};

struct TrajectoryRow {
    int t = 0;
    int row = 0;
    int col = 0;
    Action action = Action::UP;
    double reward = 0.0;
    bool in_plan_hazard = false;
    bool in_gt_hazard = false;
    int gt_rim_dist = 0;
};

// Gaussian perturbation of the distance-derived observation entries, each
// clipped to its nominal bound expanded by 3*sigma. Flags are never touched.
inline Observation inject_noise(Observation obs, const NoiseConfig& cfg, Rng& rng, int height,
                                int width, int d_max) {
    if (!cfg.enabled) return obs;
    if (!rng.next_bernoulli(cfg.p)) return obs;
    const double pad = 3.0 * cfg.sigma;
    const auto clip = [](double v, double lo, double hi) {
        return v < lo ? lo : (v > hi ? hi : v);
    };
    obs.d_row = clip(obs.d_row + cfg.sigma * rng.next_gaussian(), -(height - 1) - pad,
                     (height - 1) + pad);
    obs.d_col = clip(obs.d_col + cfg.sigma * rng.next_gaussian(), -(width - 1) - pad,
                     (width - 1) + pad);
    obs.rim_dist = clip(obs.rim_dist + cfg.sigma * rng.next_gaussian(), -pad,
                        static_cast<double>(d_max) + pad);
    return obs;
}

class NavEnv {
 public:
    explicit NavEnv(NavWorld world, RewardParams reward = {}, NoiseConfig noise = {})
        : world_(std::move(world)), reward_(reward), noise_(noise), rng_(0) {
        validate(world_);
        validate(reward_);
        validate(noise_);
        plan_dist_ = manhattan_distance_field(world_.plan_mask);
        gt_dist_ = manhattan_distance_field(world_.gt_mask);
        d_max_ = distance_sentinel(world_.plan_mask.height(), world_.plan_mask.width());
    }

    const NavWorld& world() const { return world_; }
    PixelCoord pose() const { return pose_; }
    int steps() const { return steps_; }
    bool done() const { return done_; }
    int gt_rim_dist(PixelCoord q) const { return gt_dist_.at(q); }

    Observation reset(std::uint64_t seed) {
        rng_ = Rng(seed);
        pose_ = world_.start;
        steps_ = 0;
        done_ = false;
        started_ = true;
        return emit(pose_);
    }

    StepResult step(Action action) {
        if (!started_) throw std::logic_error("step called before reset");
        if (done_) throw std::logic_error("step called on a finished episode");

        const auto [dr, dc] = displacement(action);
        const PixelCoord attempted{pose_.row + dr, pose_.col + dc};
        const int h_before = goal_distance(pose_);
        // off-lattice attempts are no-ops with the standard step cost
        const PixelCoord next = world_.plan_mask.in_bounds(attempted) ? attempted : pose_;
        const int h_after = goal_distance(next);

        double reward;
        if (world_.plan_mask.at(next)) {
            reward = -1.0 - reward_.kappa;
        } else {
            const int diff = h_before - h_after;
            const double sgn = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
            reward = sgn - reward_.kappa + (next == world_.goal ? reward_.beta : 0.0);
        }

        pose_ = next;
        ++steps_;
        done_ = pose_ == world_.goal || steps_ >= world_.horizon;

        StepResult out;
        out.reward = reward;
        out.done = done_;
        out.info = info_at(pose_);
        out.obs = emit(pose_);
        return out;
    }

    // Noiseless vector-view observation at q. A direction is legal iff the
    // move stays on-lattice and lands outside the planning mask; the flags
    // are advisory features, every move remains executable.
    Observation observe(PixelCoord q) const {
        Observation obs;
        obs.d_row = static_cast<double>(world_.goal.row - q.row);
        obs.d_col = static_cast<double>(world_.goal.col - q.col);
        obs.rim_dist = static_cast<double>(plan_dist_.at(q));
        obs.inside = world_.plan_mask.at(q) != 0;
        for (std::size_t i = 0; i < all_actions.size(); ++i) {
            const auto [dr, dc] = displacement(all_actions[i]);
            const PixelCoord n{q.row + dr, q.col + dc};
            obs.legal[i] =
                (world_.plan_mask.in_bounds(n) && !world_.plan_mask.at(n)) ? 1 : 0;
        }
        return obs;
    }

    StepInfo info_at(PixelCoord q) const {
        StepInfo info;
        info.pose = q;
        info.in_plan_hazard = world_.plan_mask.at(q) != 0;
        info.in_gt_hazard = world_.gt_mask.at(q) != 0;
        info.gt_rim_dist = gt_dist_.at(q);
        return info;
    }

    int goal_distance(PixelCoord q) const {
        return std::abs(world_.goal.row - q.row) + std::abs(world_.goal.col - q.col);
    }

 private:
    Observation emit(PixelCoord q) {
        Observation obs = observe(q);
        if (noise_.enabled) {
            obs = inject_noise(obs, noise_, rng_, world_.plan_mask.height(),
                               world_.plan_mask.width(), d_max_);
        }
        return obs;
    }

    NavWorld world_;
    RewardParams reward_;
    NoiseConfig noise_;
    DistanceField plan_dist_;
    DistanceField gt_dist_;
    int d_max_ = 0;
    PixelCoord pose_{};
    int steps_ = 0;
    bool done_ = true;
    bool started_ = false;
    Rng rng_;
};

}  // namespace confnav
