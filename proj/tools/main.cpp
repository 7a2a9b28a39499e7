#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rlvr/data.hpp"
#include "rlvr/env.hpp"
#include "rlvr/eval.hpp"
#include "rlvr/grpo.hpp"
#include "rlvr/reward.hpp"

using json = nlohmann::ordered_json;

namespace {

std::string fixed6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string table_cell(const std::optional<double>& v) {
    if (!v.has_value()) return "-";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.1f", *v * 100.0);
    return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw rlvr::ParseError("cannot write " + path);
    out << content;
}

std::vector<rlvr::GroundTruthInstance> instances_for(const rlvr::AnnotationSet& ann, int image_id,
                                                     const std::string& category) {
    std::vector<rlvr::GroundTruthInstance> gts;
    for (const rlvr::AnnotationInstance& inst : ann.instances) {
        if (inst.image_id == image_id && inst.category == category) {
            gts.push_back({inst.category, inst.box});
        }
    }
    return gts;
}

json breakdown_to_json(const rlvr::ResponseRecord& record, const rlvr::RewardBreakdown& b) {
    json entry;
    entry["image_id"] = record.image_id;
    entry["category"] = record.category;
    if (b.r_iou.has_value()) entry["r_iou"] = *b.r_iou;
    if (b.r_conf.has_value()) entry["r_conf"] = *b.r_conf;
    if (b.r_acc.has_value()) entry["r_acc"] = *b.r_acc;
    entry["r_format"] = b.r_format;
    entry["total"] = b.total;
    return entry;
}

struct RewardArgs {
    std::string annotations;
    std::string responses;
    std::string task = "detection";
    std::string out;
    rlvr::RewardConfig config;
};

int cmd_reward(const RewardArgs& args) {
    rlvr::AnnotationSet ann = rlvr::load_annotations(args.annotations);
    rlvr::ResponseLog log = rlvr::read_response_log(args.responses, ann);

    std::string lines;
    double sum_iou = 0.0;
    double sum_conf = 0.0;
    double sum_acc = 0.0;
    double sum_format = 0.0;
    double sum_total = 0.0;
    for (const rlvr::ResponseRecord& record : log.records) {
        rlvr::RewardBreakdown b;
        if (args.task == "detection") {
            auto gts = instances_for(ann, record.image_id, record.category);
            b = rlvr::detection_reward(record.response, gts, args.config);
            sum_iou += *b.r_iou;
            sum_conf += *b.r_conf;
        } else {
            // Classification logs carry the ground-truth label in the
            // category field; the annotation categories are the label set.
            b = rlvr::classification_reward(record.response, record.category, args.config);
            sum_acc += *b.r_acc;
        }
        sum_format += b.r_format;
        sum_total += b.total;
        lines += breakdown_to_json(record, b).dump();
        lines += '\n';
    }

    double n = log.records.empty() ? 1.0 : static_cast<double>(log.records.size());
    json aggregate;
    aggregate["count"] = log.records.size();
    if (args.task == "detection") {
        aggregate["mean_r_iou"] = sum_iou / n;
        aggregate["mean_r_conf"] = sum_conf / n;
    } else {
        aggregate["mean_r_acc"] = sum_acc / n;
    }
    aggregate["mean_r_format"] = sum_format / n;
    aggregate["mean_total"] = sum_total / n;
    lines += json{{"aggregate", aggregate}}.dump();
    lines += '\n';

    if (!args.out.empty()) write_text_file(args.out, lines);

    std::cout << "records " << log.records.size() << "\n";
    if (args.task == "detection") {
        std::cout << "mean_r_iou " << fixed6(sum_iou / n) << "\n";
        std::cout << "mean_r_conf " << fixed6(sum_conf / n) << "\n";
    } else {
        std::cout << "mean_r_acc " << fixed6(sum_acc / n) << "\n";
    }
    std::cout << "mean_r_format " << fixed6(sum_format / n) << "\n";
    std::cout << "mean_total " << fixed6(sum_total / n) << "\n";
    return 0;
}

struct EvalArgs {
    std::string annotations;
    std::string responses;
    std::string out;
    bool judge = false;
    int max_dets = 100;
    std::vector<double> thresholds;
};

int cmd_eval(const EvalArgs& args) {
    rlvr::AnnotationSet ann = rlvr::load_annotations(args.annotations);
    rlvr::ResponseLog log = rlvr::read_response_log(args.responses, ann);

    rlvr::EvalConfig cfg;
    cfg.judge_mode = args.judge;
    cfg.max_detections = args.max_dets;
    if (!args.thresholds.empty()) cfg.iou_thresholds = args.thresholds;

    std::vector<rlvr::ImageResult> results = rlvr::assemble_image_results(ann, log);
    std::vector<rlvr::ExistenceJudgment> judgments;
    if (args.judge) judgments = rlvr::extract_judgments(log);
    rlvr::APResult ap = rlvr::evaluate(results, cfg, judgments);

    const char* headers[] = {"mAP", "AP_50", "AP_75", "AP_s", "AP_m", "AP_l"};
    const std::optional<double> values[] = {ap.map,      ap.ap50,      ap.ap75,
                                            ap.ap_small, ap.ap_medium, ap.ap_large};
    for (const char* h : headers) std::printf("%8s", h);
    std::printf("\n");
    for (const auto& v : values) std::printf("%8s", table_cell(v).c_str());
    std::printf("\n");

    if (!args.out.empty()) {
        json doc;
        const char* keys[] = {"map", "ap50", "ap75", "ap_small", "ap_medium", "ap_large"};
        for (int i = 0; i < 6; ++i) {
            if (values[i].has_value()) {
                doc[keys[i]] = *values[i];
            } else {
                doc[keys[i]] = nullptr;
            }
        }
        write_text_file(args.out, doc.dump(2) + "\n");
    }
    return 0;
}

struct TrainArgs {
    std::string scenario = "classification";
    std::string annotations;
    int image_id = -1;
    std::string category;
    std::optional<std::uint64_t> scene_seed;
    std::string out;
    // overrides of the scenario preset, applied only when passed
    std::optional<int> steps;
    std::optional<int> group_size;
    std::optional<double> beta;
    std::optional<double> lr;
    std::optional<std::uint64_t> seed;
    std::optional<double> std_floor;
    double tau = 0.5;
    int grid_step = 125;
};

int cmd_train_sim(const TrainArgs& args) {
    rlvr::Scenario scenario = args.scenario == "detection"
                                  ? rlvr::default_detection_scenario()
                                  : rlvr::default_classification_scenario();
    if (args.scene_seed.has_value()) {
        scenario.scene = args.scenario == "detection"
                             ? rlvr::procedural_detection_scene(*args.scene_seed)
                             : rlvr::procedural_classification_scene(*args.scene_seed);
    }
    if (!args.annotations.empty()) {
        if (args.scenario != "detection") {
            throw std::invalid_argument("train-sim: annotation scenes are detection-only");
        }
        if (args.image_id < 0 || args.category.empty()) {
            throw std::invalid_argument(
                "train-sim: --annotations requires --image-id and --category");
        }
        rlvr::AnnotationSet ann = rlvr::load_annotations(args.annotations);
        if (ann.find_image(args.image_id) == nullptr) {
            throw rlvr::UnknownId("train-sim: unknown image id " + std::to_string(args.image_id));
        }
        if (!ann.has_category(args.category)) {
            throw rlvr::UnknownCategory("train-sim: unknown category '" + args.category + "'");
        }
        std::vector<rlvr::BBox> boxes;
        for (const auto& gt : instances_for(ann, args.image_id, args.category)) {
            boxes.push_back(gt.box);
        }
        scenario.scene.id = args.image_id;
        scenario.scene.task = rlvr::DetectionTask{args.category, std::move(boxes)};
    }

    if (args.steps.has_value()) scenario.config.steps = *args.steps;
    if (args.group_size.has_value()) scenario.config.group_size = *args.group_size;
    if (args.beta.has_value()) scenario.config.beta = *args.beta;
    if (args.lr.has_value()) scenario.config.learning_rate = *args.lr;
    if (args.seed.has_value()) scenario.config.seed = *args.seed;
    if (args.std_floor.has_value()) scenario.config.std_floor = *args.std_floor;

    rlvr::LatticeSpec lattice;
    lattice.grid_step = args.grid_step;
    rlvr::RewardConfig reward_cfg;
    reward_cfg.tau = args.tau;

    rlvr::ActionTable table = rlvr::build_action_table(scenario.scene, lattice);
    std::vector<double> rewards = rlvr::action_rewards(scenario.scene, table, reward_cfg);
    rlvr::CategoricalPolicy uniform;
    uniform.logits.assign(table.actions.size(), 0.0);
    double initial = rlvr::expected_reward(uniform, rewards);

    std::vector<rlvr::Scene> scenes = {scenario.scene};
    rlvr::TrainResult result = rlvr::train(scenes, scenario.config, lattice, reward_cfg);
    double final_expected = rlvr::expected_reward(result.policy, rewards);

    size_t best = static_cast<size_t>(std::max_element(rewards.begin(), rewards.end()) -
                                      rewards.begin());
    double best_probability = result.policy.probabilities()[best];

    if (!args.out.empty()) {
        std::string lines;
        for (const rlvr::CurvePoint& point : result.curve.points) {
            json entry;
            entry["step"] = point.step;
            entry["mean_reward"] = point.mean_reward;
            entry["kl"] = point.kl;
            entry["grad_norm"] = point.grad_norm;
            entry["best_action_probability"] = point.best_action_probability;
            lines += entry.dump();
            lines += '\n';
        }
        write_text_file(args.out, lines);
    }

    std::cout << "scenario " << args.scenario << "\n";
    std::cout << "actions " << table.actions.size() << "\n";
    std::cout << "steps " << result.curve.points.size() << "\n";
    std::cout << "initial_expected_reward " << fixed6(initial) << "\n";
    std::cout << "final_expected_reward " << fixed6(final_expected) << "\n";
    std::cout << "final_best_action_probability " << fixed6(best_probability) << "\n";
    return 0;
}

struct SampleArgs {
    std::string annotations;
    int shots = 1;
    std::vector<std::string> categories;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_sample(const SampleArgs& args) {
    rlvr::AnnotationSet ann = rlvr::load_annotations(args.annotations);
    rlvr::AnnotationSet subset = rlvr::few_shot_sample(ann, args.shots, args.categories, args.seed);
    if (!args.out.empty()) {
        rlvr::write_annotations(subset, args.out);
    } else {
        std::cout << rlvr::annotations_to_json(subset);
    }
    std::cerr << "images " << subset.images.size() << " instances " << subset.instances.size()
              << " categories " << subset.categories.size() << "\n";
    return 0;
}

struct PromptArgs {
    std::string task;
    std::string category;
};

int cmd_prompts(const PromptArgs& args) {
    std::optional<std::string> category;
    if (!args.category.empty()) category = args.category;
    if (args.task == "detection") {
        std::cout << rlvr::build_prompt(rlvr::detection_prompt_template(), category) << "\n";
    } else if (args.task == "classification") {
        std::cout << rlvr::build_prompt(rlvr::classification_prompt_template(), category) << "\n";
    } else {
        std::cout << rlvr::build_prompt(rlvr::existence_prompt_template(), category) << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Verifiable-reward toolkit: response parsing, detection/classification rewards, "
                 "COCO-style mAP evaluation, and a GRPO training simulator"};
    app.require_subcommand(1);

    RewardArgs reward_args;
    CLI::App* reward = app.add_subcommand("reward", "Score a response log against annotations");
    reward->add_option("--annotations", reward_args.annotations, "Annotation JSON file")
        ->required();
    reward->add_option("--responses", reward_args.responses, "Response log (JSONL)")->required();
    reward->add_option("--task", reward_args.task, "detection or classification")
        ->check(CLI::IsMember({"detection", "classification"}));
    reward->add_option("--tau", reward_args.config.tau, "IoU threshold (default 0.5)");
    reward->add_option("--w-iou", reward_args.config.w_iou, "IoU component weight");
    reward->add_option("--w-conf", reward_args.config.w_conf, "Confidence component weight");
    reward->add_option("--w-format", reward_args.config.w_format, "Format component weight");
    reward->add_option("--w-acc", reward_args.config.w_acc, "Accuracy component weight");
    reward->add_option("--out", reward_args.out, "Write per-record breakdowns (JSONL)");

    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "COCO-style mAP evaluation of a response log");
    eval->add_option("--annotations", eval_args.annotations, "Annotation JSON file")->required();
    eval->add_option("--responses", eval_args.responses, "Response log (JSONL)")->required();
    eval->add_flag("--judge", eval_args.judge, "Gate detection by existence judgments");
    eval->add_option("--max-dets", eval_args.max_dets, "Max detections per image per category");
    eval->add_option("--thresholds", eval_args.thresholds, "IoU thresholds")->delimiter(',');
    eval->add_option("--out", eval_args.out, "Write the result record (JSON)");

    TrainArgs train_args;
    CLI::App* train_sim = app.add_subcommand("train-sim", "GRPO training on a synthetic scene");
    train_sim->add_option("--scenario", train_args.scenario, "classification or detection")
        ->check(CLI::IsMember({"classification", "detection"}));
    train_sim->add_option("--annotations", train_args.annotations,
                          "Build the scene from an annotation file");
    train_sim->add_option("--image-id", train_args.image_id, "Image id within --annotations");
    train_sim->add_option("--category", train_args.category, "Category within --annotations");
    train_sim->add_option("--scene-seed", train_args.scene_seed, "Procedurally generated scene");
    train_sim->add_option("--steps", train_args.steps, "Training steps");
    train_sim->add_option("--group-size", train_args.group_size, "Group size G");
    train_sim->add_option("--beta", train_args.beta, "KL coefficient");
    train_sim->add_option("--lr", train_args.lr, "Learning rate");
    train_sim->add_option("--seed", train_args.seed, "Sampling seed");
    train_sim->add_option("--std-floor", train_args.std_floor, "Advantage std floor");
    train_sim->add_option("--tau", train_args.tau, "Reward IoU threshold");
    train_sim->add_option("--grid-step", train_args.grid_step, "Lattice grid step");
    train_sim->add_option("--out", train_args.out, "Write the training curve (JSONL)");

    SampleArgs sample_args;
    CLI::App* sample = app.add_subcommand("sample", "Few-shot subset of an annotation file");
    sample->add_option("--annotations", sample_args.annotations, "Annotation JSON file")
        ->required();
    sample->add_option("--shots", sample_args.shots, "Images per category")->required();
    sample->add_option("--categories", sample_args.categories, "Category names")
        ->required()
        ->delimiter(',');
    sample->add_option("--seed", sample_args.seed, "Sampling seed");
    sample->add_option("--out", sample_args.out, "Write the subset annotation file");

    PromptArgs prompt_args;
    CLI::App* prompts = app.add_subcommand("prompts", "Print a golden prompt");
    prompts->add_option("--task", prompt_args.task, "detection, classification, or existence")
        ->required()
        ->check(CLI::IsMember({"detection", "classification", "existence"}));
    prompts->add_option("--category", prompt_args.category, "Category for the detection slot");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (reward->parsed()) return cmd_reward(reward_args);
        if (eval->parsed()) return cmd_eval(eval_args);
        if (train_sim->parsed()) return cmd_train_sim(train_args);
        if (sample->parsed()) return cmd_sample(sample_args);
        if (prompts->parsed()) return cmd_prompts(prompt_args);
    } catch (const rlvr::NonFiniteGradient& e) {
        std::cerr << "error: non-finite gradient at " << e.what() << "\n";
        return 1;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
