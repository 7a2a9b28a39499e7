#include "rlvr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "rlvr/reward.hpp"

namespace rlvr {

namespace {

constexpr double kThresholdEps = 1e-9;

struct RankedDetection {
    size_t entry_index = 0;  // into the per-category image entries
    int image_id = 0;
    int order = 0;  // emission order within the (image, category) list
    Prediction prediction;
};

// Per-image prediction cap, by descending confidence (ties keep emission
// order), then global confidence ranking with (image id, emission order)
// tie-breaks.
std::vector<RankedDetection> rank_detections(const CategoryResult& category, int max_detections) {
    std::vector<RankedDetection> ranked;
    for (size_t e = 0; e < category.images.size(); ++e) {
        const auto& entry = category.images[e];
        std::vector<size_t> order(entry.predictions.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            return entry.predictions[a].confidence > entry.predictions[b].confidence;
        });
        size_t keep = std::min<size_t>(order.size(), static_cast<size_t>(max_detections));
        for (size_t k = 0; k < keep; ++k) {
            ranked.push_back(RankedDetection{e, entry.image_id, static_cast<int>(order[k]),
                                             entry.predictions[order[k]]});
        }
    }
    std::sort(ranked.begin(), ranked.end(), [](const RankedDetection& a, const RankedDetection& b) {
        if (a.prediction.confidence != b.prediction.confidence) {
            return a.prediction.confidence > b.prediction.confidence;
        }
        if (a.image_id != b.image_id) return a.image_id < b.image_id;
        return a.order < b.order;
    });
    return ranked;
}

// Greedy per-image matching in ranked order; returns, per ranked detection,
// the matched ground-truth index within its image entry, or -1.
std::vector<int> match_at_threshold(const CategoryResult& category,
                                    const std::vector<RankedDetection>& ranked,
                                    double threshold) {
    std::vector<std::vector<bool>> used(category.images.size());
    for (size_t e = 0; e < category.images.size(); ++e) {
        used[e].assign(category.images[e].ground_truth.size(), false);
    }

    std::vector<int> matches(ranked.size(), -1);
    for (size_t r = 0; r < ranked.size(); ++r) {
        const RankedDetection& det = ranked[r];
        const auto& gts = category.images[det.entry_index].ground_truth;
        double best_iou = 0.0;
        int best_gt = -1;
        for (size_t j = 0; j < gts.size(); ++j) {
            if (used[det.entry_index][j]) continue;
            double overlap = iou(det.prediction.box, gts[j]);
            if (overlap > best_iou) {
                best_iou = overlap;
                best_gt = static_cast<int>(j);
            }
        }
        if (best_gt >= 0 && best_iou >= threshold) {
            used[det.entry_index][static_cast<size_t>(best_gt)] = true;
            matches[r] = best_gt;
        }
    }
    return matches;
}

// 101-point interpolated AP from a ranked TP/FP sequence. `included` marks
// ranked detections that take part (bucket slices drop some); tp marks true
// positives among the included ones.
double interpolated_ap(const std::vector<bool>& included, const std::vector<bool>& tp,
                       int total_gt) {
    std::vector<double> precision;
    std::vector<double> recall;
    int cum_tp = 0;
    int cum_fp = 0;
    for (size_t r = 0; r < included.size(); ++r) {
        if (!included[r]) continue;
        if (tp[r]) {
            ++cum_tp;
        } else {
            ++cum_fp;
        }
        precision.push_back(static_cast<double>(cum_tp) /
                            static_cast<double>(cum_tp + cum_fp));
        recall.push_back(static_cast<double>(cum_tp) / static_cast<double>(total_gt));
    }

    for (size_t i = precision.size(); i-- > 1;) {
        precision[i - 1] = std::max(precision[i - 1], precision[i]);
    }

    double sum = 0.0;
    size_t idx = 0;
    for (int j = 0; j <= 100; ++j) {
        double target = static_cast<double>(j) / 100.0;
        while (idx < recall.size() && recall[idx] < target) ++idx;
        if (idx < recall.size()) sum += precision[idx];
    }
    return sum / 101.0;
}

struct CategorySlices {
    std::optional<double> overall;
    std::optional<double> small;
    std::optional<double> medium;
    std::optional<double> large;
};

// AP for one category at one threshold, overall and per size bucket. Bucket
// slices reuse the single matching pass: predictions matched to an
// out-of-bucket ground truth are dropped, unmatched ones stay false
// positives, and recall is measured against the bucket's ground-truth count.
CategorySlices category_slices(const CategoryResult& category,
                               const std::vector<RankedDetection>& ranked,
                               const std::vector<int>& matches,
                               const std::vector<std::vector<SizeBucket>>& gt_buckets,
                               bool with_buckets) {
    CategorySlices out;

    int total_gt = 0;
    for (const auto& entry : category.images) total_gt += static_cast<int>(entry.ground_truth.size());
    if (total_gt == 0) return out;

    std::vector<bool> included(ranked.size(), true);
    std::vector<bool> tp(ranked.size(), false);
    for (size_t r = 0; r < ranked.size(); ++r) tp[r] = matches[r] >= 0;
    out.overall = interpolated_ap(included, tp, total_gt);

    if (!with_buckets) return out;
    for (SizeBucket bucket : {SizeBucket::Small, SizeBucket::Medium, SizeBucket::Large}) {
        int bucket_gt = 0;
        for (const auto& buckets : gt_buckets) {
            bucket_gt += static_cast<int>(std::count(buckets.begin(), buckets.end(), bucket));
        }
        if (bucket_gt == 0) continue;

        std::vector<bool> bucket_included(ranked.size(), true);
        std::vector<bool> bucket_tp(ranked.size(), false);
        for (size_t r = 0; r < ranked.size(); ++r) {
            if (matches[r] < 0) continue;  // unmatched stays a false positive
            SizeBucket gt_bucket =
                gt_buckets[ranked[r].entry_index][static_cast<size_t>(matches[r])];
            if (gt_bucket == bucket) {
                bucket_tp[r] = true;
            } else {
                bucket_included[r] = false;
            }
        }
        double value = interpolated_ap(bucket_included, bucket_tp, bucket_gt);
        if (bucket == SizeBucket::Small) out.small = value;
        if (bucket == SizeBucket::Medium) out.medium = value;
        if (bucket == SizeBucket::Large) out.large = value;
    }
    return out;
}

void validate_config(const EvalConfig& cfg) {
    if (cfg.iou_thresholds.empty()) throw std::invalid_argument("eval: no IoU thresholds");
    double prev = 0.0;
    for (double t : cfg.iou_thresholds) {
        if (!(t > prev && t <= 1.0)) {
            throw std::invalid_argument(
                "eval: thresholds must be strictly increasing within (0, 1]");
        }
        prev = t;
    }
    if (!(cfg.small_area_max > 0.0) || !(cfg.medium_area_max > cfg.small_area_max)) {
        throw std::invalid_argument("eval: size boundaries must be positive and increasing");
    }
    if (cfg.max_detections < 1) throw std::invalid_argument("eval: max_detections must be >= 1");
}

std::optional<double> mean_of(const std::vector<double>& values) {
    if (values.empty()) return std::nullopt;
    return std::accumulate(values.begin(), values.end(), 0.0) /
           static_cast<double>(values.size());
}

}  // namespace

std::vector<double> default_iou_thresholds() {
    std::vector<double> thresholds;
    for (int i = 50; i <= 95; i += 5) thresholds.push_back(static_cast<double>(i) / 100.0);
    return thresholds;
}

SizeBucket bucket_of(const BBox& gt, int image_width, int image_height, const EvalConfig& cfg) {
    if (image_width <= 0 || image_height <= 0) {
        throw InconsistentDimensions("bucket_of: image dimensions must be positive");
    }
    double width_px = static_cast<double>(gt.x2 - gt.x1) * image_width / 1000.0;
    double height_px = static_cast<double>(gt.y2 - gt.y1) * image_height / 1000.0;
    double area = width_px * height_px;
    if (area < cfg.small_area_max) return SizeBucket::Small;
    if (area < cfg.medium_area_max) return SizeBucket::Medium;
    return SizeBucket::Large;
}

std::optional<double> compute_ap(const CategoryResult& category, double threshold,
                                 const EvalConfig& cfg) {
    int total_gt = 0;
    for (const auto& entry : category.images) total_gt += static_cast<int>(entry.ground_truth.size());
    if (total_gt == 0) return std::nullopt;

    std::vector<RankedDetection> ranked = rank_detections(category, cfg.max_detections);
    std::vector<int> matches = match_at_threshold(category, ranked, threshold);
    return category_slices(category, ranked, matches, {}, false).overall;
}

APResult evaluate(std::span<const ImageResult> results, const EvalConfig& cfg,
                  std::span<const ExistenceJudgment> judgments) {
    validate_config(cfg);

    std::map<std::pair<int, std::string>, bool> judgment_map;
    for (const ExistenceJudgment& j : judgments) {
        judgment_map[{j.image_id, j.category}] = j.present;
    }

    std::set<std::string> category_names;
    for (const ImageResult& image : results) {
        for (const auto& [name, gts] : image.ground_truth) {
            if (!gts.empty()) category_names.insert(name);
        }
    }

    std::vector<double> all_ap;
    std::vector<double> ap50_values;
    std::vector<double> ap75_values;
    std::vector<double> small_values;
    std::vector<double> medium_values;
    std::vector<double> large_values;

    for (const std::string& name : category_names) {
        CategoryResult category;
        std::vector<std::vector<SizeBucket>> gt_buckets;
        for (const ImageResult& image : results) {
            auto gt_it = image.ground_truth.find(name);
            if (gt_it == image.ground_truth.end() || gt_it->second.empty()) continue;

            CategoryResult::ImageEntry entry;
            entry.image_id = image.image_id;
            entry.ground_truth = gt_it->second;

            bool keep_predictions = true;
            if (cfg.judge_mode) {
                auto j_it = judgment_map.find({image.image_id, name});
                if (j_it == judgment_map.end()) {
                    throw MissingJudgment("evaluate: no existence judgment for image " +
                                          std::to_string(image.image_id) + ", category '" +
                                          name + "'");
                }
                keep_predictions = j_it->second;
            }
            if (keep_predictions) {
                auto pred_it = image.predictions.find(name);
                if (pred_it != image.predictions.end()) entry.predictions = pred_it->second;
            }

            std::vector<SizeBucket> buckets;
            buckets.reserve(entry.ground_truth.size());
            for (const BBox& gt : entry.ground_truth) {
                buckets.push_back(bucket_of(gt, image.width, image.height, cfg));
            }
            gt_buckets.push_back(std::move(buckets));
            category.images.push_back(std::move(entry));
        }
        if (category.images.empty()) continue;

        std::vector<RankedDetection> ranked = rank_detections(category, cfg.max_detections);
        for (double threshold : cfg.iou_thresholds) {
            std::vector<int> matches = match_at_threshold(category, ranked, threshold);
            CategorySlices slices = category_slices(category, ranked, matches, gt_buckets, true);
            if (!slices.overall.has_value()) continue;

            all_ap.push_back(*slices.overall);
            if (std::abs(threshold - 0.50) < kThresholdEps) ap50_values.push_back(*slices.overall);
            if (std::abs(threshold - 0.75) < kThresholdEps) ap75_values.push_back(*slices.overall);
            if (slices.small.has_value()) small_values.push_back(*slices.small);
            if (slices.medium.has_value()) medium_values.push_back(*slices.medium);
            if (slices.large.has_value()) large_values.push_back(*slices.large);
        }
    }

    APResult result;
    result.map = mean_of(all_ap);
    result.ap50 = mean_of(ap50_values);
    result.ap75 = mean_of(ap75_values);
    result.ap_small = mean_of(small_values);
    result.ap_medium = mean_of(medium_values);
    result.ap_large = mean_of(large_values);
    return result;
}

std::vector<ImageResult> assemble_image_results(const AnnotationSet& ann,
                                                const ResponseLog& log) {
    std::map<int, ImageResult> by_id;
    for (const ImageInfo& image : ann.images) {
        ImageResult result;
        result.image_id = image.id;
        result.width = image.width;
        result.height = image.height;
        by_id[image.id] = std::move(result);
    }
    for (const AnnotationInstance& inst : ann.instances) {
        by_id[inst.image_id].ground_truth[inst.category].push_back(inst.box);
    }
    for (const ResponseRecord& record : log.records) {
        ParsedResponse parsed = parse_response(record.response);
        if (!parsed.format_ok) continue;
        DetectionParseResult det = parse_detection_answer(parsed.answer_raw);
        if (!det.ok() || det.answer.no_objects) continue;
        auto& preds = by_id[record.image_id].predictions[record.category];
        preds.insert(preds.end(), det.answer.predictions.begin(), det.answer.predictions.end());
    }

    std::vector<ImageResult> results;
    results.reserve(by_id.size());
    for (auto& [id, result] : by_id) results.push_back(std::move(result));
    return results;
}

std::vector<ExistenceJudgment> extract_judgments(const ResponseLog& log) {
    std::map<std::pair<int, std::string>, bool> judgment_map;
    for (const ResponseRecord& record : log.records) {
        if (!record.judge_response.has_value()) continue;
        ParsedResponse parsed = parse_response(*record.judge_response);
        bool present = false;
        if (parsed.format_ok) {
            ClassificationParseResult answer = parse_classification_answer(parsed.answer_raw);
            present = answer.ok() && answer.label == "yes";
        }
        judgment_map[{record.image_id, record.category}] = present;
    }

    std::vector<ExistenceJudgment> judgments;
    judgments.reserve(judgment_map.size());
    for (const auto& [key, present] : judgment_map) {
        judgments.push_back(ExistenceJudgment{key.first, key.second, present});
    }
    return judgments;
}

}  // namespace rlvr
