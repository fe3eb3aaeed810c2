#pragma once
// Tabular Q-learning over a quantized vector-view observation. The compact
// bucket table keeps the key space small enough that no function
// approximation is needed; epsilon and learning rate decay linearly with the
// configured endpoints.

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "confnav/env.hpp"
#include "confnav/grid.hpp"
#include "confnav/rng.hpp"

namespace confnav {

struct AgentConfig {
    long total_steps = 200000;
    int max_episode = 1000;
    double gamma = 0.95;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    double epsilon_frac = 0.75;  // fraction of total steps over which epsilon decays
    double lr_start = 0.5;
    double lr_end = 0.01;
    double lr_frac = 0.9;
    int eval_window = 25;  // episodes per curve point
    std::uint64_t seed = 0;
};

inline void validate(const AgentConfig& cfg) {
    if (cfg.total_steps < 1) throw std::invalid_argument("total_steps must be >= 1");
    if (cfg.max_episode < 1) throw std::invalid_argument("max_episode must be >= 1");
    if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0,1)");
    if (cfg.epsilon_start < cfg.epsilon_end || cfg.lr_start < cfg.lr_end) {
        throw std::invalid_argument("schedules must be non-increasing");
    }
    if (!(cfg.epsilon_frac > 0.0 && cfg.epsilon_frac <= 1.0) ||
        !(cfg.lr_frac > 0.0 && cfg.lr_frac <= 1.0)) {
        throw std::invalid_argument("schedule fractions must lie in (0,1]");
    }
    if (cfg.eval_window < 1) throw std::invalid_argument("eval_window must be >= 1");
}

// Piecewise-linear decay hitting `end` exactly at frac*total, constant after.
inline double linear_schedule(double start, double end, double frac, long total, long step) {
    const double horizon = frac * static_cast<double>(total);
    const double t = horizon > 0.0 ? static_cast<double>(step) / horizon : 1.0;
    if (t >= 1.0) return end;
    return start + (end - start) * t;
}

// ---- state quantization ----

// Distance buckets: {0, 1, 2, 3-4, 5-8, >=9}; negatives clamp to 0.
inline int distance_bucket(long v) {
    if (v <= 0) return 0;
    if (v == 1) return 1;
    if (v == 2) return 2;
    if (v <= 4) return 3;
    if (v <= 8) return 4;
    return 5;
}

inline int sign_index(long v) { return v > 0 ? 2 : (v < 0 ? 0 : 1); }

inline constexpr int state_key_space = 3 * 6 * 3 * 6 * 6 * 2 * 16;

using StateKey = std::uint32_t;

// Noise-perturbed real entries round to the nearest integer before bucketing.
inline StateKey quantize(const Observation& obs) {
    const long d_row = std::lround(obs.d_row);
    const long d_col = std::lround(obs.d_col);
    const long rim = std::lround(obs.rim_dist);
    std::uint32_t key = static_cast<std::uint32_t>(sign_index(d_row));
    key = key * 6 + static_cast<std::uint32_t>(distance_bucket(std::labs(d_row)));
    key = key * 3 + static_cast<std::uint32_t>(sign_index(d_col));
    key = key * 6 + static_cast<std::uint32_t>(distance_bucket(std::labs(d_col)));
    key = key * 6 + static_cast<std::uint32_t>(distance_bucket(rim));
    key = key * 2 + (obs.inside ? 1u : 0u);
    std::uint32_t legal = 0;
    for (std::size_t i = 0; i < obs.legal.size(); ++i) {
        if (obs.legal[i]) legal |= 1u << i;
    }
    key = key * 16 + legal;
    return key;
}

using QTable = std::unordered_map<StateKey, std::array<double, 4>>;

inline int argmax_action(const std::array<double, 4>& q) {
    int best = 0;
    for (int a = 1; a < 4; ++a) {
        if (q[static_cast<std::size_t>(a)] > q[static_cast<std::size_t>(best)]) best = a;
    }
    return best;
}

// ---- training ----

struct CurvePoint {
    long step = 0;
    double mean_episodic_reward = 0.0;
    double success_rate = 0.0;
    double mean_gt_rim_dist = 0.0;
    double frac_time_in_gt_hazard = 0.0;
};

using TrainingCurves = std::vector<CurvePoint>;

struct TrainResult {
    QTable q;
    TrainingCurves curves;
    long steps = 0;
    long episodes = 0;
};

inline TrainResult train(NavEnv& env, const AgentConfig& cfg) {
    validate(cfg);
    Rng action_rng = Rng::derived(cfg.seed, 1);
    const std::uint64_t episode_stream = sub_seed(cfg.seed, 0);

    TrainResult result;
    long step = 0;
    long episode = 0;

    // rolling window accumulators
    int window_episodes = 0;
    double window_reward = 0.0;
    long window_success = 0;
    long window_steps = 0;
    long window_hazard_steps = 0;
    double window_rim_sum = 0.0;

    while (step < cfg.total_steps) {
        Observation obs = env.reset(sub_seed(episode_stream, static_cast<std::uint64_t>(episode)));
        StateKey state = quantize(obs);
        double episode_reward = 0.0;
        bool reached_goal = false;

        for (int ep_step = 0; ep_step < cfg.max_episode && !env.done(); ++ep_step) {
            const double epsilon = linear_schedule(cfg.epsilon_start, cfg.epsilon_end,
                                                   cfg.epsilon_frac, cfg.total_steps, step);
            const double lr =
                linear_schedule(cfg.lr_start, cfg.lr_end, cfg.lr_frac, cfg.total_steps, step);

            int action;
            if (action_rng.next_bernoulli(epsilon)) {
                action = action_rng.next_int(0, 3);
            } else {
                const auto it = result.q.find(state);
                action = it == result.q.end() ? 0 : argmax_action(it->second);
            }

            const StepResult sr = env.step(static_cast<Action>(action));
            const StateKey next_state = quantize(sr.obs);

            double target = sr.reward;
            if (!sr.done) {
                const auto it = result.q.find(next_state);
                const double next_max =
                    it == result.q.end()
                        ? 0.0
                        : it->second[static_cast<std::size_t>(argmax_action(it->second))];
                target += cfg.gamma * next_max;
            }
            auto& qs = result.q[state];
            qs[static_cast<std::size_t>(action)] +=
                lr * (target - qs[static_cast<std::size_t>(action)]);

            episode_reward += sr.reward;
            ++step;
            ++window_steps;
            if (sr.info.in_gt_hazard) ++window_hazard_steps;
            window_rim_sum += static_cast<double>(sr.info.gt_rim_dist);
            if (sr.done && sr.info.pose == env.world().goal) reached_goal = true;
            state = next_state;
        }

        ++episode;
        ++window_episodes;
        window_reward += episode_reward;
        if (reached_goal) ++window_success;

        if (window_episodes == cfg.eval_window) {
            CurvePoint pt;
            pt.step = step;
            pt.mean_episodic_reward = window_reward / static_cast<double>(window_episodes);
            pt.success_rate =
                static_cast<double>(window_success) / static_cast<double>(window_episodes);
            pt.mean_gt_rim_dist = window_steps > 0
                                      ? window_rim_sum / static_cast<double>(window_steps)
                                      : 0.0;
            pt.frac_time_in_gt_hazard =
                window_steps > 0 ? static_cast<double>(window_hazard_steps) /
                                       static_cast<double>(window_steps)
                                 : 0.0;
            result.curves.push_back(pt);
            window_episodes = 0;
            window_reward = 0.0;
            window_success = 0;
            window_steps = 0;
            window_hazard_steps = 0;
            window_rim_sum = 0.0;
        }
    }

    result.steps = step;
    result.episodes = episode;
    return result;
}

// ---- evaluation ----

struct EvalSummary {
    int episodes = 0;
    double success_rate = 0.0;
    double mean_episodic_reward = 0.0;
    double mean_gt_rim_dist = 0.0;
    double frac_time_in_gt_hazard = 0.0;
    double mean_episode_length = 0.0;
    long unseen_state_actions = 0;
};

// Runs the learned policy (greedy, or epsilon=0.05 when greedy is false).
// States absent from the table fall back to a uniform-random action and are
// counted. When `log` is given it captures the first episode's rows.
inline EvalSummary evaluate(const QTable& q, NavEnv& env, int episodes, bool greedy,
                            std::uint64_t seed, std::vector<TrajectoryRow>* log = nullptr) {
    if (episodes < 1) throw std::invalid_argument("evaluate: episodes must be >= 1");
    Rng rng = Rng::derived(seed, 3);
    const std::uint64_t episode_stream = sub_seed(seed, 2);
    const double epsilon = greedy ? 0.0 : 0.05;

    EvalSummary summary;
    summary.episodes = episodes;
    long total_steps = 0;
    long hazard_steps = 0;
    double rim_sum = 0.0;

    for (int e = 0; e < episodes; ++e) {
        Observation obs = env.reset(sub_seed(episode_stream, static_cast<std::uint64_t>(e)));
        double episode_reward = 0.0;
        int t = 0;
        while (!env.done()) {
            const StateKey state = quantize(obs);
            int action;
            if (epsilon > 0.0 && rng.next_bernoulli(epsilon)) {
                action = rng.next_int(0, 3);
            } else {
                const auto it = q.find(state);
                if (it == q.end()) {
                    action = rng.next_int(0, 3);
                    ++summary.unseen_state_actions;
                } else {
                    action = argmax_action(it->second);
                }
            }
            const StepResult sr = env.step(static_cast<Action>(action));
            if (log && e == 0) {
                log->push_back({t, sr.info.pose.row, sr.info.pose.col,
                                static_cast<Action>(action), sr.reward, sr.info.in_plan_hazard,
                                sr.info.in_gt_hazard, sr.info.gt_rim_dist});
            }
            episode_reward += sr.reward;
            ++total_steps;
            ++t;
            if (sr.info.in_gt_hazard) ++hazard_steps;
            rim_sum += static_cast<double>(sr.info.gt_rim_dist);
            if (sr.done && sr.info.pose == env.world().goal) {
                summary.success_rate += 1.0;
            }
            obs = sr.obs;
        }
        summary.mean_episodic_reward += episode_reward;
    }

    summary.success_rate /= static_cast<double>(episodes);
    summary.mean_episodic_reward /= static_cast<double>(episodes);
    summary.mean_episode_length = static_cast<double>(total_steps) / static_cast<double>(episodes);
    if (total_steps > 0) {
        summary.mean_gt_rim_dist = rim_sum / static_cast<double>(total_steps);
        summary.frac_time_in_gt_hazard =
            static_cast<double>(hazard_steps) / static_cast<double>(total_steps);
    }
    return summary;
}

// ---- persistence ----

inline void save_qtable(const QTable& q, const std::string& path) {
    std::map<StateKey, std::array<double, 4>> sorted(q.begin(), q.end());
    std::ostringstream out;
    out << "# schema=confnav.qtable.v1\n";
    char buf[128];
    for (const auto& [key, values] : sorted) {
        std::snprintf(buf, sizeof(buf), "%u %.17g %.17g %.17g %.17g\n", key, values[0], values[1],
                      values[2], values[3]);
        out << buf;
    }
    write_text_atomic(path, out.str());
}

inline QTable load_qtable(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open qtable: " + path);
    std::string header;
    if (!std::getline(in, header) || header != "# schema=confnav.qtable.v1") {
        throw std::runtime_error("bad qtable header in " + path);
    }
    QTable q;
    StateKey key;
    std::array<double, 4> values{};
    while (in >> key >> values[0] >> values[1] >> values[2] >> values[3]) {
        q[key] = values;
    }
    return q;
}

}  // namespace confnav
