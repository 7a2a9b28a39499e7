#include "rlvr/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rlvr/grpo.hpp"

namespace rlvr {

using json = nlohmann::ordered_json;

namespace {

int require_int(const json& obj, const char* key, const std::string& context) {
    if (!obj.contains(key)) throw ParseError(context + ": missing field '" + key + "'");
    const json& v = obj.at(key);
    if (!v.is_number_integer() && !v.is_number_unsigned()) {
        throw ParseError(context + ": field '" + key + "' must be an integer");
    }
    return v.get<int>();
}

double require_number(const json& v, const char* what, const std::string& context) {
    if (!v.is_number()) throw ParseError(context + ": " + what + " must be a number");
    return v.get<double>();
}

std::string require_string(const json& obj, const char* key, const std::string& context) {
    if (!obj.contains(key)) throw ParseError(context + ": missing field '" + key + "'");
    const json& v = obj.at(key);
    if (!v.is_string()) throw ParseError(context + ": field '" + key + "' must be a string");
    return v.get<std::string>();
}

int round_half_away(double v) { return static_cast<int>(std::round(v)); }

}  // namespace

const ImageInfo* AnnotationSet::find_image(int id) const {
    for (const ImageInfo& image : images) {
        if (image.id == id) return &image;
    }
    return nullptr;
}

bool AnnotationSet::has_category(std::string_view name) const {
    return std::any_of(categories.begin(), categories.end(),
                       [&](const CategoryInfo& c) { return c.name == name; });
}

BBox normalize_pixel_box(double x, double y, double w, double h, int image_width,
                         int image_height) {
    if (image_width <= 0 || image_height <= 0) {
        throw ValidationError("normalize_pixel_box: image dimensions must be positive");
    }
    if (!(w > 0.0) || !(h > 0.0)) {
        throw ValidationError("normalize_pixel_box: box width and height must be positive");
    }
    BBox box;
    box.x1 = round_half_away(x * 1000.0 / image_width);
    box.y1 = round_half_away(y * 1000.0 / image_height);
    box.x2 = round_half_away((x + w) * 1000.0 / image_width);
    box.y2 = round_half_away((y + h) * 1000.0 / image_height);
    if (!box.valid()) {
        std::ostringstream msg;
        msg << "normalize_pixel_box: [" << x << ", " << y << ", " << w << ", " << h
            << "] in a " << image_width << "x" << image_height
            << " image maps to an invalid 0-1000 box";
        throw ValidationError(msg.str());
    }
    return box;
}

AnnotationSet parse_annotations(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("annotations: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("annotations: top level must be an object");
    if (!doc.contains("images") || !doc["images"].is_array()) {
        throw ParseError("annotations: missing 'images' array");
    }
    if (!doc.contains("categories") || !doc["categories"].is_array()) {
        throw ParseError("annotations: missing 'categories' array");
    }

    AnnotationSet ann;
    std::set<int> image_ids;
    for (size_t i = 0; i < doc["images"].size(); ++i) {
        std::string context = "images[" + std::to_string(i) + "]";
        const json& entry = doc["images"][i];
        if (!entry.is_object()) throw ParseError(context + ": must be an object");
        ImageInfo image;
        image.id = require_int(entry, "id", context);
        image.width = require_int(entry, "width", context);
        image.height = require_int(entry, "height", context);
        if (entry.contains("file_name") && entry["file_name"].is_string()) {
            image.file_name = entry["file_name"].get<std::string>();
        }
        if (image.width <= 0 || image.height <= 0) {
            throw ValidationError(context + ": dimensions must be positive");
        }
        if (!image_ids.insert(image.id).second) {
            throw ValidationError(context + ": duplicate image id " + std::to_string(image.id));
        }
        ann.images.push_back(std::move(image));
    }

    std::set<int> category_ids;
    std::set<std::string> category_names;
    for (size_t i = 0; i < doc["categories"].size(); ++i) {
        std::string context = "categories[" + std::to_string(i) + "]";
        const json& entry = doc["categories"][i];
        if (!entry.is_object()) throw ParseError(context + ": must be an object");
        CategoryInfo category;
        category.id = require_int(entry, "id", context);
        category.name = require_string(entry, "name", context);
        if (category.name.empty()) throw ValidationError(context + ": empty category name");
        if (!category_ids.insert(category.id).second) {
            throw ValidationError(context + ": duplicate category id " +
                                  std::to_string(category.id));
        }
        if (!category_names.insert(category.name).second) {
            throw ValidationError(context + ": duplicate category name '" + category.name + "'");
        }
        ann.categories.push_back(std::move(category));
    }

    if (doc.contains("annotations")) {
        if (!doc["annotations"].is_array()) {
            throw ParseError("annotations: 'annotations' must be an array");
        }
        for (size_t i = 0; i < doc["annotations"].size(); ++i) {
            std::string context = "annotations[" + std::to_string(i) + "]";
            const json& entry = doc["annotations"][i];
            if (!entry.is_object()) throw ParseError(context + ": must be an object");

            AnnotationInstance inst;
            inst.image_id = require_int(entry, "image_id", context);
            inst.category_id = require_int(entry, "category_id", context);
            if (!entry.contains("bbox") || !entry["bbox"].is_array() ||
                entry["bbox"].size() != 4) {
                throw ParseError(context + ": bbox must be [x, y, w, h]");
            }
            for (size_t k = 0; k < 4; ++k) {
                inst.pixel_bbox[k] = require_number(entry["bbox"][k], "bbox entry", context);
            }

            const ImageInfo* image = ann.find_image(inst.image_id);
            if (image == nullptr) {
                throw ValidationError(context + ": unknown image id " +
                                      std::to_string(inst.image_id));
            }
            auto cat = std::find_if(ann.categories.begin(), ann.categories.end(),
                                    [&](const CategoryInfo& c) { return c.id == inst.category_id; });
            if (cat == ann.categories.end()) {
                throw ValidationError(context + ": unknown category id " +
                                      std::to_string(inst.category_id));
            }
            inst.category = cat->name;
            try {
                inst.box = normalize_pixel_box(inst.pixel_bbox[0], inst.pixel_bbox[1],
                                               inst.pixel_bbox[2], inst.pixel_bbox[3],
                                               image->width, image->height);
            } catch (const ValidationError& e) {
                throw ValidationError(context + ": " + e.what());
            }
            ann.instances.push_back(std::move(inst));
        }
    }
    return ann;
}

AnnotationSet load_annotations(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("annotations: cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_annotations(buffer.str());
}

std::string annotations_to_json(const AnnotationSet& ann) {
    json doc;
    doc["images"] = json::array();
    for (const ImageInfo& image : ann.images) {
        json entry;
        entry["id"] = image.id;
        entry["width"] = image.width;
        entry["height"] = image.height;
        if (!image.file_name.empty()) entry["file_name"] = image.file_name;
        doc["images"].push_back(std::move(entry));
    }
    doc["categories"] = json::array();
    for (const CategoryInfo& category : ann.categories) {
        doc["categories"].push_back({{"id", category.id}, {"name", category.name}});
    }
    doc["annotations"] = json::array();
    for (const AnnotationInstance& inst : ann.instances) {
        json entry;
        entry["image_id"] = inst.image_id;
        entry["category_id"] = inst.category_id;
        entry["bbox"] = {inst.pixel_bbox[0], inst.pixel_bbox[1], inst.pixel_bbox[2],
                         inst.pixel_bbox[3]};
        doc["annotations"].push_back(std::move(entry));
    }
    return doc.dump(2) + "\n";
}

void write_annotations(const AnnotationSet& ann, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("annotations: cannot write " + path.string());
    out << annotations_to_json(ann);
}

AnnotationSet few_shot_sample(const AnnotationSet& ann, int shots,
                              std::span<const std::string> categories, std::uint64_t seed) {
    if (shots < 0) throw std::invalid_argument("few_shot_sample: shots must be >= 0");

    std::vector<std::string> requested;
    for (const std::string& name : categories) {
        if (!ann.has_category(name)) {
            throw UnknownCategory("few_shot_sample: unknown category '" + name + "'");
        }
        if (std::find(requested.begin(), requested.end(), name) == requested.end()) {
            requested.push_back(name);
        }
    }

    std::mt19937_64 rng(mix_seed(seed));
    std::set<int> selected_images;
    for (const std::string& name : requested) {
        std::set<int> candidate_set;
        for (const AnnotationInstance& inst : ann.instances) {
            if (inst.category == name) candidate_set.insert(inst.image_id);
        }
        std::vector<int> candidates(candidate_set.begin(), candidate_set.end());
        size_t take = std::min<size_t>(static_cast<size_t>(shots), candidates.size());
        // Partial Fisher-Yates; the modulo bias is negligible at these ranges.
        for (size_t i = 0; i < take; ++i) {
            size_t j = i + static_cast<size_t>(rng() % (candidates.size() - i));
            std::swap(candidates[i], candidates[j]);
            selected_images.insert(candidates[i]);
        }
    }

    AnnotationSet subset;
    for (const ImageInfo& image : ann.images) {
        if (selected_images.count(image.id) > 0) subset.images.push_back(image);
    }
    for (const CategoryInfo& category : ann.categories) {
        if (std::find(requested.begin(), requested.end(), category.name) != requested.end()) {
            subset.categories.push_back(category);
        }
    }
    for (const AnnotationInstance& inst : ann.instances) {
        if (selected_images.count(inst.image_id) > 0 &&
            std::find(requested.begin(), requested.end(), inst.category) != requested.end()) {
            subset.instances.push_back(inst);
        }
    }
    return subset;
}

namespace {

const PromptTemplate kDetectionPrompt{
    TaskKind::Detection,
    "Detect all objects belonging to the category '{category}' in the image, and provide the "
    "bounding boxes (between 0 and 1000, integer) and confidence (between 0 and 1, with two "
    "decimal places). If no object belonging to the category '{category}' in the image, return "
    "'No Objects'. Output the thinking process in <think> </think> and final answer in <answer> "
    "</answer> tags. The output answer format should be as follows: <think> ... "
    "</think><answer>[{'Position': [x1, y1, x2, y2], 'Confidence': number}, ...]</answer> Please "
    "strictly follow the format."};

const PromptTemplate kClassificationPrompt{
    TaskKind::Classification,
    "This is an image containing a plant. Please identify the species of the plant based on the "
    "image. Output the thinking process in <think> </think> and final answer in </think> "
    "</answer> tags. The output answer format should be as follows: <think> ... </think> "
    "</think>species name</answer> Please strictly follow the format."};

const PromptTemplate kExistencePrompt{
    TaskKind::Detection,
    "Is there any '{category}' in the image? Answer yes or no inside the answer tag. Output the "
    "thinking process in <think> </think> and final answer in <answer> </answer> tags."};

}  // namespace

const PromptTemplate& detection_prompt_template() { return kDetectionPrompt; }
const PromptTemplate& classification_prompt_template() { return kClassificationPrompt; }
const PromptTemplate& existence_prompt_template() { return kExistencePrompt; }

std::string build_prompt(const PromptTemplate& tmpl, const std::optional<std::string>& category) {
    constexpr std::string_view kSlot = "{category}";
    if (tmpl.text.find(kSlot) == std::string::npos) return tmpl.text;
    if (!category.has_value()) {
        throw MissingCategory("build_prompt: this template requires a category");
    }
    std::string out = tmpl.text;
    size_t pos = 0;
    while ((pos = out.find(kSlot, pos)) != std::string::npos) {
        out.replace(pos, kSlot.size(), *category);
        pos += category->size();
    }
    return out;
}

ResponseLog parse_response_log(const std::string& text, const AnnotationSet& ann) {
    ResponseLog log;
    std::istringstream in(text);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json entry;
        try {
            entry = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError("response log line " + std::to_string(line_no) + ": " + e.what());
        }
        std::string context = "response log line " + std::to_string(line_no);
        if (!entry.is_object()) throw ParseError(context + ": must be an object");

        ResponseRecord record;
        record.image_id = require_int(entry, "image_id", context);
        record.category = require_string(entry, "category", context);
        record.response = require_string(entry, "response", context);
        if (entry.contains("judge_response") && !entry["judge_response"].is_null()) {
            if (!entry["judge_response"].is_string()) {
                throw ParseError(context + ": field 'judge_response' must be a string");
            }
            record.judge_response = entry["judge_response"].get<std::string>();
        }

        if (ann.find_image(record.image_id) == nullptr) {
            throw UnknownId(context + ": unknown image id " + std::to_string(record.image_id));
        }
        if (!ann.has_category(record.category)) {
            throw UnknownId(context + ": unknown category '" + record.category + "'");
        }
        log.records.push_back(std::move(record));
    }
    return log;
}

ResponseLog read_response_log(const std::filesystem::path& path, const AnnotationSet& ann) {
    std::ifstream in(path);
    if (!in) throw ParseError("response log: cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_response_log(buffer.str(), ann);
}

std::string response_log_to_jsonl(const ResponseLog& log) {
    std::string out;
    for (const ResponseRecord& record : log.records) {
        json entry;
        entry["image_id"] = record.image_id;
        entry["category"] = record.category;
        entry["response"] = record.response;
        if (record.judge_response.has_value()) entry["judge_response"] = *record.judge_response;
        out += entry.dump();
        out += '\n';
    }
    return out;
}

void write_response_log(const ResponseLog& log, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("response log: cannot write " + path.string());
    out << response_log_to_jsonl(log);
}

}  // namespace rlvr
