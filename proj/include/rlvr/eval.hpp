#pragma once

#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rlvr/data.hpp"
#include "rlvr/response.hpp"

namespace rlvr {

struct MissingJudgment : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InconsistentDimensions : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// COCO-convention IoU thresholds 0.50, 0.55, ..., 0.95.
std::vector<double> default_iou_thresholds();

struct EvalConfig {
    std::vector<double> iou_thresholds = default_iou_thresholds();
    // Size-bucket boundaries in squared pixels (COCO convention 32^2 / 96^2);
    // ground-truth areas are mapped from 0-1000 coordinates through the image
    // pixel dimensions.
    double small_area_max = 32.0 * 32.0;
    double medium_area_max = 96.0 * 96.0;
    bool judge_mode = false;
    int max_detections = 100;  // per image per category
};

/// Parsed predictions and ground truth for one image, keyed by category.
struct ImageResult {
    int image_id = 0;
    int width = 0;
    int height = 0;
    std::map<std::string, std::vector<Prediction>> predictions;
    std::map<std::string, std::vector<BBox>> ground_truth;
};

struct ExistenceJudgment {
    int image_id = 0;
    std::string category;
    bool present = false;
};

/// Entries are undefined (and excluded from averages) when the corresponding
/// slice has no ground truth, e.g. a size bucket nothing falls into.
struct APResult {
    std::optional<double> map;
    std::optional<double> ap50;
    std::optional<double> ap75;
    std::optional<double> ap_small;
    std::optional<double> ap_medium;
    std::optional<double> ap_large;
};

enum class SizeBucket { Small, Medium, Large };

/// Buckets a ground-truth box by its pixel area: area < small_area_max is
/// small, area < medium_area_max is medium, anything else large.
SizeBucket bucket_of(const BBox& gt, int image_width, int image_height, const EvalConfig& cfg);

/// One category across images, the input unit of compute_ap.
struct CategoryResult {
    struct ImageEntry {
        int image_id = 0;
        std::vector<Prediction> predictions;
        std::vector<BBox> ground_truth;
    };
    std::vector<ImageEntry> images;
};

/// Average precision at one IoU threshold: global confidence-descending
/// ranking (ties by image id then emission order), per-image greedy matching
/// where each prediction takes the available ground-truth box of maximal IoU
/// and each ground truth matches at most once, then 101-point interpolated AP
/// over the precision envelope. nullopt when the category has no ground
/// truth.
std::optional<double> compute_ap(const CategoryResult& category, double threshold,
                                 const EvalConfig& cfg);

/// Full evaluation over the per-image results.
///
/// Both modes evaluate a (image, category) pair only when the category is
/// present in that image's ground truth; judge mode additionally drops the
/// pair's predictions when its existence judgment says absent. Judge mode
/// requires a judgment for every evaluated pair (MissingJudgment).
///
/// mAP averages AP over categories and thresholds; AP50/AP75 are single
/// thresholds. Size buckets restrict the ground truth by pixel area: a
/// prediction matched to an out-of-bucket ground truth is dropped from that
/// bucket's ranking, unmatched predictions stay false positives.
APResult evaluate(std::span<const ImageResult> results, const EvalConfig& cfg,
                  std::span<const ExistenceJudgment> judgments = {});

/// Builds per-image results from annotations plus a response log. Responses
/// that fail the grammar or payload parse contribute no predictions, as does
/// the "No Objects" answer.
std::vector<ImageResult> assemble_image_results(const AnnotationSet& ann,
                                                const ResponseLog& log);

/// Reads existence judgments out of the log's judge_response fields: a
/// format-valid answer normalizing to "yes" means present, anything else
/// absent. Records without a judge_response yield no judgment.
std::vector<ExistenceJudgment> extract_judgments(const ResponseLog& log);

}  // namespace rlvr
