#include "rlvr/reward.hpp"

#include <algorithm>
#include <numeric>

namespace rlvr {

double iou(const BBox& a, const BBox& b) {
    long long ix = std::max(0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
    long long iy = std::max(0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
    long long intersection = ix * iy;
    long long union_area = a.area() + b.area() - intersection;
    if (union_area <= 0) return 0.0;
    return static_cast<double>(intersection) / static_cast<double>(union_area);
}

MatchResult match_predictions(std::span<const Prediction> predictions,
                              std::span<const GroundTruthInstance> ground_truth,
                              const RewardConfig& cfg) {
    std::vector<size_t> order(predictions.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return predictions[a].confidence > predictions[b].confidence;
    });

    MatchResult result;
    result.pairs.reserve(predictions.size());
    std::vector<bool> used(ground_truth.size(), false);

    for (size_t idx : order) {
        const Prediction& pred = predictions[idx];
        double best_iou = 0.0;
        size_t best_gt = ground_truth.size();
        for (size_t j = 0; j < ground_truth.size(); ++j) {
            if (used[j]) continue;
            double overlap = iou(pred.box, ground_truth[j].box);
            if (overlap > best_iou) {
                best_iou = overlap;
                best_gt = j;
            }
        }
        // A zero-overlap pair never consumes a ground-truth box, even at tau 0.
        if (best_gt < ground_truth.size() && best_iou > 0.0 && best_iou >= cfg.tau) {
            used[best_gt] = true;
            result.pairs.push_back({best_iou, pred.confidence});
        } else {
            result.pairs.push_back({0.0, pred.confidence});
        }
    }
    return result;
}

RewardBreakdown detection_reward(std::string_view response,
                                 std::span<const GroundTruthInstance> ground_truth,
                                 const RewardConfig& cfg) {
    RewardBreakdown out;
    out.r_iou = 0.0;
    out.r_conf = 0.0;

    ParsedResponse parsed = parse_response(response);
    if (!parsed.format_ok) return out;

    DetectionParseResult det = parse_detection_answer(parsed.answer_raw);
    // An unverifiable payload forfeits the format component as well.
    if (!det.ok()) return out;

    out.r_format = 1.0;
    if (det.answer.no_objects) {
        double value = ground_truth.empty() ? 1.0 : 0.0;
        out.r_iou = value;
        out.r_conf = value;
    } else {
        MatchResult match = match_predictions(det.answer.predictions, ground_truth, cfg);
        double iou_sum = 0.0;
        double conf_sum = 0.0;
        for (const MatchedPair& pair : match.pairs) {
            iou_sum += pair.iou;
            conf_sum += pair.iou != 0.0 ? pair.confidence : 1.0 - pair.confidence;
        }
        double n = static_cast<double>(match.pairs.size());
        out.r_iou = iou_sum / n;
        out.r_conf = conf_sum / n;
    }
    out.total = cfg.w_iou * *out.r_iou + cfg.w_conf * *out.r_conf + cfg.w_format * out.r_format;
    return out;
}

RewardBreakdown classification_reward(std::string_view response, std::string_view gt_label,
                                      const RewardConfig& cfg) {
    RewardBreakdown out;
    out.r_acc = 0.0;

    ParsedResponse parsed = parse_response(response);
    if (!parsed.format_ok) return out;

    out.r_format = 1.0;
    ClassificationParseResult cls = parse_classification_answer(parsed.answer_raw);
    if (cls.ok() && cls.label == normalize_label(gt_label)) {
        out.r_acc = 1.0;
    }
    out.total = cfg.w_acc * *out.r_acc + cfg.w_format * out.r_format;
    return out;
}

int verify_exact(std::string_view prediction, std::string_view ground_truth) {
    return normalize_label(prediction) == normalize_label(ground_truth) ? 1 : 0;
}

}  // namespace rlvr
