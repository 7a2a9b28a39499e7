#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace rlvr {

/// Result of applying the <think>/<answer> response grammar to raw model
/// output. `format_ok` is true iff the text is exactly one <think>...</think>
/// block followed by exactly one <answer>...</answer> block, with nothing but
/// whitespace outside the blocks. Each of the four tags must appear exactly
/// once anywhere in the text. `think` and `answer_raw` hold the inner content
/// verbatim (whitespace preserved) and are empty when the format is invalid.
struct ParsedResponse {
    bool format_ok = false;
    std::string think;
    std::string answer_raw;
};

/// Axis-aligned box in the 0-1000 normalized integer coordinate system.
struct BBox {
    int x1 = 0;
    int y1 = 0;
    int x2 = 0;
    int y2 = 0;

    long long area() const {
        return static_cast<long long>(x2 - x1) * static_cast<long long>(y2 - y1);
    }
    /// 0 <= x1 < x2 <= 1000 and 0 <= y1 < y2 <= 1000.
    bool valid() const {
        return 0 <= x1 && x1 < x2 && x2 <= 1000 && 0 <= y1 && y1 < y2 && y2 <= 1000;
    }

    friend bool operator==(const BBox&, const BBox&) = default;
};

/// One detected box with its confidence in [0, 1].
struct Prediction {
    BBox box;
    double confidence = 0.0;

    friend bool operator==(const Prediction&, const Prediction&) = default;
};

/// Detection answer payload: either a non-empty list of predictions or the
/// "No Objects" sentinel.
struct DetectionAnswer {
    bool no_objects = false;
    std::vector<Prediction> predictions;  // non-empty iff !no_objects

    static DetectionAnswer none() { return DetectionAnswer{true, {}}; }
    static DetectionAnswer boxes(std::vector<Prediction> preds) {
        return DetectionAnswer{false, std::move(preds)};
    }

    friend bool operator==(const DetectionAnswer&, const DetectionAnswer&) = default;
};

enum class AnswerError {
    None,
    MalformedAnswer,    // payload is neither the sentinel nor a parseable list
    InvalidBox,         // a Position quadruple violates the BBox invariants
    InvalidConfidence,  // a Confidence value is outside [0, 1]
    EmptyAnswer,        // classification payload empty after trimming
};

const char* answer_error_name(AnswerError err);

struct DetectionParseResult {
    AnswerError error = AnswerError::None;
    DetectionAnswer answer;

    bool ok() const { return error == AnswerError::None; }
};

struct ClassificationParseResult {
    AnswerError error = AnswerError::None;
    std::string label;  // trimmed, case-folded, inner whitespace collapsed

    bool ok() const { return error == AnswerError::None; }
};

/// Applies the response grammar. Never fails: malformed input yields
/// format_ok = false. Pure; repeated calls on the same input agree.
ParsedResponse parse_response(std::string_view raw);

/// Parses a detection answer payload. Accepts the sentinel "No Objects"
/// (case-insensitive, surrounding whitespace ignored) or a list of
/// {'Position': [x1, y1, x2, y2], 'Confidence': c} records. Keys and strings
/// may be single- or double-quoted; key order within a record is free;
/// list order is preserved. Confidences with more than two decimals are
/// accepted.
DetectionParseResult parse_detection_answer(std::string_view answer_raw);

/// Normalizes a classification answer payload: trims surrounding whitespace,
/// lower-cases ASCII letters, collapses internal whitespace runs to single
/// spaces. EmptyAnswer when nothing remains.
ClassificationParseResult parse_classification_answer(std::string_view answer_raw);

/// Emits the single-quoted record syntax with confidences rendered to two
/// decimal places, or the literal sentinel "No Objects".
/// parse_detection_answer(serialize_detection_answer(a)) reproduces `a` up to
/// two-decimal confidence rounding.
std::string serialize_detection_answer(const DetectionAnswer& answer);

/// Shared label normalization: trim, ASCII case-fold, collapse whitespace.
std::string normalize_label(std::string_view text);

}  // namespace rlvr
