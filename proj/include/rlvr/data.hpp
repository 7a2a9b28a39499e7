#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rlvr/response.hpp"

namespace rlvr {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnknownCategory : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MissingCategory : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnknownId : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ImageInfo {
    int id = 0;
    int width = 0;
    int height = 0;
    std::string file_name;
};

struct CategoryInfo {
    int id = 0;
    std::string name;
};

struct AnnotationInstance {
    int image_id = 0;
    int category_id = 0;
    std::string category;               // resolved category name
    BBox box;                           // normalized 0-1000 coordinates
    std::array<double, 4> pixel_bbox{};  // original [x, y, w, h] in pixels
};

struct AnnotationSet {
    std::vector<ImageInfo> images;
    std::vector<CategoryInfo> categories;
    std::vector<AnnotationInstance> instances;

    const ImageInfo* find_image(int id) const;
    bool has_category(std::string_view name) const;
};

/// Converts a COCO-style pixel box [x, y, w, h] to the 0-1000 integer space,
/// rounding half away from zero. Throws ValidationError when the converted
/// box violates the BBox invariants.
BBox normalize_pixel_box(double x, double y, double w, double h, int image_width,
                         int image_height);

/// Annotation ingestion: JSON with images[] (id, width, height, file_name
/// optional), categories[] (id, name) and annotations[] (image_id,
/// category_id, bbox as [x, y, w, h] in pixels). Unknown fields are ignored
/// so full COCO files load. Throws ParseError on malformed input and
/// ValidationError naming the offending image/category/annotation.
AnnotationSet parse_annotations(const std::string& json_text);
AnnotationSet load_annotations(const std::filesystem::path& path);

std::string annotations_to_json(const AnnotationSet& ann);
void write_annotations(const AnnotationSet& ann, const std::filesystem::path& path);

/// Few-shot subset: selects min(shots, available) images per requested
/// category uniformly without replacement, deterministic under the seed, and
/// retains all instances of the selected images for the requested categories.
AnnotationSet few_shot_sample(const AnnotationSet& ann, int shots,
                              std::span<const std::string> categories, std::uint64_t seed);

enum class TaskKind { Detection, Classification };

struct PromptTemplate {
    TaskKind kind = TaskKind::Detection;
    std::string text;
};

/// Golden prompt templates, embedded verbatim.
const PromptTemplate& detection_prompt_template();
const PromptTemplate& classification_prompt_template();
/// Existence-judgment prompt used by judge-mode evaluation. Not part of the
/// golden template pair; defined by this project.
const PromptTemplate& existence_prompt_template();

/// Substitutes every '{category}' slot. Detection and existence templates
/// require a category (MissingCategory otherwise); the classification
/// template is returned byte-identical.
std::string build_prompt(const PromptTemplate& tmpl,
                         const std::optional<std::string>& category = std::nullopt);

struct ResponseRecord {
    int image_id = 0;
    std::string category;
    std::string response;
    std::optional<std::string> judge_response;
};

struct ResponseLog {
    std::vector<ResponseRecord> records;
};

/// Line-delimited JSON records {image_id, category, response,
/// judge_response?}. Ids must resolve against the annotation set (UnknownId).
ResponseLog parse_response_log(const std::string& text, const AnnotationSet& ann);
ResponseLog read_response_log(const std::filesystem::path& path, const AnnotationSet& ann);

std::string response_log_to_jsonl(const ResponseLog& log);
void write_response_log(const ResponseLog& log, const std::filesystem::path& path);

}  // namespace rlvr
