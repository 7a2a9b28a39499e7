#include "rlvr/env.hpp"

#include <algorithm>
#include <random>

namespace rlvr {

namespace {

constexpr std::string_view kThinkPlaceholder =
    "Looking over the scene and weighing each candidate answer.";

std::vector<int> grid_coordinates(int step) {
    std::vector<int> coords;
    for (int c = 0; c <= 1000; c += step) coords.push_back(c);
    if (coords.back() != 1000) coords.push_back(1000);
    return coords;
}

std::vector<BBox> lattice_boxes(int step) {
    std::vector<int> coords = grid_coordinates(step);
    std::vector<BBox> boxes;
    for (size_t xi = 0; xi < coords.size(); ++xi) {
        for (size_t yi = 0; yi < coords.size(); ++yi) {
            for (size_t xj = xi + 1; xj < coords.size(); ++xj) {
                for (size_t yj = yi + 1; yj < coords.size(); ++yj) {
                    boxes.push_back(BBox{coords[xi], coords[yi], coords[xj], coords[yj]});
                }
            }
        }
    }
    return boxes;
}

void validate_scene(const Scene& scene) {
    if (const auto* det = std::get_if<DetectionTask>(&scene.task)) {
        if (det->category.empty()) throw std::invalid_argument("scene: empty category");
        if (det->ground_truth.size() > 8) {
            throw std::invalid_argument("scene: detection scenes carry at most 8 boxes");
        }
        for (const BBox& box : det->ground_truth) {
            if (!box.valid()) throw std::invalid_argument("scene: invalid ground-truth box");
        }
    } else {
        const auto& cls = std::get<ClassificationTask>(scene.task);
        if (cls.candidates.size() < 2 || cls.candidates.size() > 64) {
            throw std::invalid_argument("scene: classification scenes carry 2 to 64 labels");
        }
        if (std::find(cls.candidates.begin(), cls.candidates.end(), cls.label) ==
            cls.candidates.end()) {
            throw std::invalid_argument("scene: candidates must include the ground-truth label");
        }
    }
}

}  // namespace

std::string render_response(const Action& action) {
    std::string out = "<think>";
    out += kThinkPlaceholder;
    out += "</think><answer>";
    out += action.answer_payload;
    out += "</answer>";
    return out;
}

ActionTable build_action_table(const Scene& scene, const LatticeSpec& lattice) {
    validate_scene(scene);
    if (lattice.grid_step < 1 || lattice.grid_step > 1000) {
        throw std::invalid_argument("lattice: grid step out of range");
    }
    if (lattice.confidence_levels.empty() || lattice.max_boxes_per_action < 1) {
        throw std::invalid_argument("lattice: need confidence levels and a positive box limit");
    }

    ActionTable table;
    if (const auto* cls = std::get_if<ClassificationTask>(&scene.task)) {
        for (const std::string& label : cls->candidates) {
            table.actions.push_back(Action{label});
        }
        return table;
    }

    const auto& det = std::get<DetectionTask>(scene.task);
    table.actions.push_back(Action{serialize_detection_answer(DetectionAnswer::none())});

    std::vector<BBox> boxes = lattice_boxes(lattice.grid_step);
    for (const BBox& box : boxes) {
        for (double conf : lattice.confidence_levels) {
            table.actions.push_back(
                Action{serialize_detection_answer(DetectionAnswer::boxes({{box, conf}}))});
        }
    }

    // Best lattice anchor per ground-truth box; the lattice must cover each
    // box at IoU >= 0.9 so a near-optimal action exists.
    std::vector<BBox> anchors;
    for (const BBox& gt : det.ground_truth) {
        double best = 0.0;
        BBox best_box;
        for (const BBox& box : boxes) {
            double overlap = iou(box, gt);
            if (overlap > best) {
                best = overlap;
                best_box = box;
            }
        }
        if (best < 0.9) {
            throw LatticeTooCoarse("build_action_table: no lattice box reaches IoU 0.9 for (" +
                                   std::to_string(gt.x1) + "," + std::to_string(gt.y1) + "," +
                                   std::to_string(gt.x2) + "," + std::to_string(gt.y2) + ")");
        }
        if (std::find(anchors.begin(), anchors.end(), best_box) == anchors.end()) {
            anchors.push_back(best_box);
        }
    }

    if (lattice.max_boxes_per_action >= 2 && anchors.size() >= 2) {
        std::vector<Prediction> anchor_preds;
        for (const BBox& box : anchors) {
            for (double conf : lattice.confidence_levels) {
                anchor_preds.push_back(Prediction{box, conf});
            }
        }
        for (size_t i = 0; i < anchor_preds.size(); ++i) {
            for (size_t j = i + 1; j < anchor_preds.size(); ++j) {
                if (anchor_preds[i].box == anchor_preds[j].box) continue;
                table.actions.push_back(Action{serialize_detection_answer(
                    DetectionAnswer::boxes({anchor_preds[i], anchor_preds[j]}))});
            }
        }
    }
    return table;
}

std::vector<double> action_rewards(const Scene& scene, const ActionTable& table,
                                   const RewardConfig& reward_cfg) {
    std::vector<double> rewards;
    rewards.reserve(table.actions.size());
    if (const auto* det = std::get_if<DetectionTask>(&scene.task)) {
        std::vector<GroundTruthInstance> gts;
        for (const BBox& box : det->ground_truth) gts.push_back({det->category, box});
        for (const Action& action : table.actions) {
            rewards.push_back(detection_reward(render_response(action), gts, reward_cfg).total);
        }
    } else {
        const auto& cls = std::get<ClassificationTask>(scene.task);
        for (const Action& action : table.actions) {
            rewards.push_back(
                classification_reward(render_response(action), cls.label, reward_cfg).total);
        }
    }
    return rewards;
}

double expected_reward(const CategoricalPolicy& policy, std::span<const double> rewards) {
    std::vector<double> probs = policy.probabilities();
    if (probs.size() != rewards.size()) {
        throw SupportMismatch("expected_reward: policy and reward vector sizes differ");
    }
    double value = 0.0;
    for (size_t a = 0; a < probs.size(); ++a) value += probs[a] * rewards[a];
    return value;
}

Group rollout(const CategoricalPolicy& policy, const Scene& scene, const ActionTable& table,
              int group_size, std::uint64_t seed, const RewardConfig& reward_cfg) {
    if (policy.action_count() != table.actions.size()) {
        throw SupportMismatch("rollout: policy is not indexed over the action table");
    }
    Group group = sample_group(policy, group_size, seed);
    group.query_id = scene.id;
    group.responses.reserve(group.actions.size());
    for (int a : group.actions) {
        group.responses.push_back(render_response(table.actions[static_cast<size_t>(a)]));
    }

    group.rewards.reserve(group.actions.size());
    if (const auto* det = std::get_if<DetectionTask>(&scene.task)) {
        std::vector<GroundTruthInstance> gts;
        for (const BBox& box : det->ground_truth) gts.push_back({det->category, box});
        for (const std::string& response : group.responses) {
            group.rewards.push_back(detection_reward(response, gts, reward_cfg).total);
        }
    } else {
        const auto& cls = std::get<ClassificationTask>(scene.task);
        for (const std::string& response : group.responses) {
            group.rewards.push_back(classification_reward(response, cls.label, reward_cfg).total);
        }
    }
    return group;
}

TrainResult train(std::span<const Scene> scenes, const TrainerConfig& cfg,
                  const LatticeSpec& lattice, const RewardConfig& reward_cfg) {
    if (scenes.empty()) throw std::invalid_argument("train: need at least one scene");

    std::vector<ActionTable> tables;
    std::vector<std::vector<double>> rewards;
    std::vector<size_t> best_action;
    for (const Scene& scene : scenes) {
        tables.push_back(build_action_table(scene, lattice));
        rewards.push_back(action_rewards(scene, tables.back(), reward_cfg));
        best_action.push_back(static_cast<size_t>(
            std::max_element(rewards.back().begin(), rewards.back().end()) -
            rewards.back().begin()));
        if (tables.back().actions.size() != tables.front().actions.size()) {
            throw std::invalid_argument("train: scenes must induce equally sized action tables");
        }
    }

    TrainResult result;
    result.policy.logits.assign(tables.front().actions.size(), 0.0);
    ReferencePolicy ref(result.policy);

    for (int step = 0; step < cfg.steps; ++step) {
        size_t scene_index = static_cast<size_t>(step) % scenes.size();
        std::uint64_t step_seed = mix_seed(cfg.seed + static_cast<std::uint64_t>(step));
        Group group = rollout(result.policy, scenes[scene_index], tables[scene_index],
                              cfg.group_size, step_seed, reward_cfg);
        group.advantages = group_advantages(group.rewards, cfg.std_floor);
        StepStats stats;
        try {
            stats = grpo_step(result.policy, ref, group, cfg);
        } catch (const NonFiniteGradient& e) {
            throw NonFiniteGradient("step " + std::to_string(step + 1) + ": " + e.what());
        }

        CurvePoint point;
        point.step = step + 1;
        point.mean_reward = stats.mean_reward;
        point.kl = stats.kl;
        point.grad_norm = stats.grad_norm;
        point.best_action_probability =
            result.policy.probabilities()[best_action[scene_index]];
        result.curve.points.push_back(point);
    }
    return result;
}

Scene default_classification_scene() {
    Scene scene;
    scene.id = 0;
    scene.task = ClassificationTask{"daisy", {"rose", "tulip", "daisy", "orchid"}};
    return scene;
}

Scene default_detection_scene() {
    Scene scene;
    scene.id = 0;
    scene.task = DetectionTask{"dog", {BBox{125, 125, 375, 375}, BBox{500, 250, 875, 625}}};
    return scene;
}

Scenario default_classification_scenario() {
    Scenario scenario;
    scenario.scene = default_classification_scene();
    scenario.config.group_size = 8;
    scenario.config.learning_rate = 0.1;
    scenario.config.beta = 0.04;
    scenario.config.steps = 500;
    return scenario;
}

Scenario default_detection_scenario() {
    Scenario scenario;
    scenario.scene = default_detection_scene();
    scenario.config.group_size = 8;
    scenario.config.learning_rate = 0.05;
    scenario.config.beta = 0.04;
    scenario.config.steps = 4000;
    return scenario;
}

Scene procedural_detection_scene(std::uint64_t seed, int id) {
    std::mt19937_64 rng(mix_seed(seed));
    std::vector<int> coords = grid_coordinates(125);
    auto pick = [&rng](size_t n) { return static_cast<size_t>(rng() % n); };

    size_t count = 1 + pick(3);
    std::vector<BBox> boxes;
    for (size_t i = 0; i < count; ++i) {
        size_t xi = pick(coords.size() - 1);
        size_t xj = xi + 1 + pick(coords.size() - 1 - xi);
        size_t yi = pick(coords.size() - 1);
        size_t yj = yi + 1 + pick(coords.size() - 1 - yi);
        boxes.push_back(BBox{coords[xi], coords[yi], coords[xj], coords[yj]});
    }
    Scene scene;
    scene.id = id;
    scene.task = DetectionTask{"object", std::move(boxes)};
    return scene;
}

Scene procedural_classification_scene(std::uint64_t seed, int id) {
    static const std::vector<std::string> kPool = {
        "rose",     "tulip",  "daisy",    "orchid", "marigold", "dandelion",
        "lavender", "peony",  "magnolia", "lotus",  "iris",     "poppy",
        "camellia", "azalea", "begonia",  "dahlia"};
    std::mt19937_64 rng(mix_seed(seed));
    size_t count = 2 + static_cast<size_t>(rng() % 7);

    std::vector<std::string> pool = kPool;
    for (size_t i = 0; i + 1 < pool.size(); ++i) {
        size_t j = i + static_cast<size_t>(rng() % (pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    std::vector<std::string> candidates(pool.begin(), pool.begin() + count);

    Scene scene;
    scene.id = id;
    scene.task =
        ClassificationTask{candidates[static_cast<size_t>(rng() % count)], std::move(candidates)};
    return scene;
}

}  // namespace rlvr
