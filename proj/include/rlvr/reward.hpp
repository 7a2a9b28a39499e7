#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rlvr/response.hpp"

namespace rlvr {

/// One annotated object: category label plus a valid 0-1000 box.
struct GroundTruthInstance {
    std::string category;
    BBox box;
};

struct RewardConfig {
    /// IoU threshold below which a prediction/ground-truth pair is invalid.
    double tau = 0.5;
    // Per-component multipliers; the composite reward is their weighted sum.
    double w_iou = 1.0;
    double w_conf = 1.0;
    double w_format = 1.0;
    double w_acc = 1.0;
};

/// Per-prediction (iou, confidence) pairs in descending-confidence order.
/// iou is 0 for unmatched predictions and >= tau otherwise.
struct MatchedPair {
    double iou = 0.0;
    double confidence = 0.0;
};

struct MatchResult {
    std::vector<MatchedPair> pairs;
};

/// Verifiable reward components. r_iou/r_conf are populated for detection,
/// r_acc for classification; total is the weighted sum of the populated
/// components plus the format component.
struct RewardBreakdown {
    std::optional<double> r_iou;
    std::optional<double> r_conf;
    std::optional<double> r_acc;
    double r_format = 0.0;
    double total = 0.0;
};

/// Intersection-over-union of two valid boxes. Symmetric, in [0, 1],
/// and 1 exactly when the boxes are identical.
double iou(const BBox& a, const BBox& b);

/// Greedy confidence-ordered matching. Predictions are sorted by descending
/// confidence (ties keep emission order); each prediction takes the unmatched
/// ground-truth box of maximal IoU, or stays unmatched (iou 0) when that IoU
/// is below tau, in which case the ground-truth box remains available. Each
/// ground-truth box matches at most one prediction. Ground truths are assumed
/// to share the prediction's category.
MatchResult match_predictions(std::span<const Prediction> predictions,
                              std::span<const GroundTruthInstance> ground_truth,
                              const RewardConfig& cfg);

/// Composite detection reward: r_iou is the mean IoU over the predicted
/// boxes, r_conf the mean per-box confidence reward (c when matched, 1-c when
/// unmatched), r_format the grammar check. A malformed response or an
/// unparseable answer payload zeroes every component. A "No Objects" answer
/// earns r_iou = r_conf = 1 against empty ground truth and 0 otherwise;
/// predicted boxes against empty ground truth are all unmatched.
RewardBreakdown detection_reward(std::string_view response,
                                 std::span<const GroundTruthInstance> ground_truth,
                                 const RewardConfig& cfg = {});

/// Classification reward: r_acc is 1 iff the normalized answer equals the
/// normalized ground-truth label, r_format the grammar check. An empty answer
/// payload keeps the format component but cannot earn accuracy.
RewardBreakdown classification_reward(std::string_view response, std::string_view gt_label,
                                      const RewardConfig& cfg = {});

/// Binary verification rule: 1 iff prediction and ground truth are equal
/// after label normalization.
int verify_exact(std::string_view prediction, std::string_view ground_truth);

}  // namespace rlvr
