#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "rlvr/grpo.hpp"
#include "rlvr/response.hpp"
#include "rlvr/reward.hpp"

namespace rlvr {

struct LatticeTooCoarse : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DetectionTask {
    std::string category;
    std::vector<BBox> ground_truth;  // 0 to 8 boxes
};

struct ClassificationTask {
    std::string label;
    std::vector<std::string> candidates;  // 2 to 64 labels, includes `label`
};

/// Synthetic perception query over the implicit 0-1000 x 0-1000 frame.
struct Scene {
    int id = 0;
    std::variant<DetectionTask, ClassificationTask> task;
};

/// Discretization of the detection answer space: candidate boxes have their
/// corners on a regular grid and carry one of a few confidence levels.
/// Single-box actions enumerate the whole lattice; two-box actions combine
/// the per-ground-truth best lattice anchors so a near-optimal composite
/// answer exists without the table exploding combinatorially.
struct LatticeSpec {
    int grid_step = 125;
    std::vector<double> confidence_levels = {0.30, 0.60, 0.90};
    int max_boxes_per_action = 2;  // actions carry at most two boxes
};

/// One candidate response; the payload goes between the answer tags.
struct Action {
    std::string answer_payload;
};

struct ActionTable {
    std::vector<Action> actions;
};

struct CurvePoint {
    int step = 0;  // 1-based
    double mean_reward = 0.0;
    double kl = 0.0;
    double grad_norm = 0.0;
    double best_action_probability = 0.0;
};

struct TrainingCurve {
    std::vector<CurvePoint> points;
};

struct TrainResult {
    TrainingCurve curve;
    CategoricalPolicy policy;
};

/// Wraps an action payload in the think/answer grammar with fixed placeholder
/// reasoning text; the result always parses with format_ok = true.
std::string render_response(const Action& action);

/// Deterministic enumeration of candidate responses for a scene.
/// Classification scenes get one action per candidate label. Detection scenes
/// get the "No Objects" action, every lattice box at every confidence level,
/// and two-box combinations of the per-ground-truth anchors. Throws
/// LatticeTooCoarse when some ground-truth box has no lattice box with
/// IoU >= 0.9.
ActionTable build_action_table(const Scene& scene, const LatticeSpec& lattice = {});

/// Scores every action's rendered response with the verifiable reward.
std::vector<double> action_rewards(const Scene& scene, const ActionTable& table,
                                   const RewardConfig& reward_cfg = {});

/// Expected reward of a policy over an enumerated reward vector.
double expected_reward(const CategoricalPolicy& policy, std::span<const double> rewards);

/// Samples a group of actions, serializes each through the response grammar,
/// and scores each serialized response with the verifiable reward.
Group rollout(const CategoricalPolicy& policy, const Scene& scene, const ActionTable& table,
              int group_size, std::uint64_t seed, const RewardConfig& reward_cfg = {});

/// GRPO training loop over the scenes, round-robin, one scene per group.
/// All scenes must induce action tables of equal size. Deterministic under
/// the config seed; zero steps returns an empty curve and a uniform policy.
TrainResult train(std::span<const Scene> scenes, const TrainerConfig& cfg,
                  const LatticeSpec& lattice = {}, const RewardConfig& reward_cfg = {});

/// Fixed desk-scale scenarios used by the CLI defaults.
Scene default_classification_scene();
Scene default_detection_scene();

/// A scene paired with the trainer configuration it converges under.
struct Scenario {
    Scene scene;
    TrainerConfig config;
};

/// 4 plant labels, G = 8, lr = 0.1, beta = 0.04, 500 steps.
Scenario default_classification_scenario();
/// Two lattice-aligned boxes, G = 8, lr = 0.05, beta = 0.04, 4000 steps. The
/// action table is two orders of magnitude larger than the classification
/// one, so this scenario runs longer and anneals more gently; at lr 0.1 the
/// group-relative update locks onto a sub-optimal box before better actions
/// are ever sampled.
Scenario default_detection_scenario();

/// Seeded procedural scenes (lattice-aligned ground truth).
Scene procedural_detection_scene(std::uint64_t seed, int id = 0);
Scene procedural_classification_scene(std::uint64_t seed, int id = 0);

}  // namespace rlvr
