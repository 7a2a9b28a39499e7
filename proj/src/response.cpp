#include "rlvr/response.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <vector>

namespace rlvr {

namespace {

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::string_view kAnswerOpen = "<answer>";
constexpr std::string_view kAnswerClose = "</answer>";
constexpr std::string_view kWhitespace = " \t\r\n\f\v";
constexpr std::string_view kNoObjectsSentinel = "No Objects";

bool whitespace_only(std::string_view s) {
    return s.find_first_not_of(kWhitespace) == std::string_view::npos;
}

std::vector<size_t> find_all(std::string_view text, std::string_view needle) {
    std::vector<size_t> positions;
    size_t pos = text.find(needle);
    while (pos != std::string_view::npos) {
        positions.push_back(pos);
        pos = text.find(needle, pos + 1);
    }
    return positions;
}

std::string_view trim(std::string_view s) {
    size_t begin = s.find_first_not_of(kWhitespace);
    if (begin == std::string_view::npos) return {};
    size_t end = s.find_last_not_of(kWhitespace);
    return s.substr(begin, end - begin + 1);
}

bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(a[i])) !=
            std::tolower(static_cast<unsigned char>(b[i]))) {
            return false;
        }
    }
    return true;
}

// Minimal scanner for the record-list payload grammar.
struct Scanner {
    std::string_view text;
    size_t pos = 0;

    void skip_ws() {
        while (pos < text.size() && kWhitespace.find(text[pos]) != std::string_view::npos) ++pos;
    }
    bool done() const { return pos >= text.size(); }
    char peek() const { return text[pos]; }
    bool eat(char c) {
        if (!done() && text[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }

    // Quoted string with either quote character; no escape handling, the
    // grammar only carries the two fixed key words.
    bool read_string(std::string& out) {
        if (done() || (text[pos] != '\'' && text[pos] != '"')) return false;
        char quote = text[pos++];
        size_t end = text.find(quote, pos);
        if (end == std::string_view::npos) return false;
        out.assign(text.substr(pos, end - pos));
        pos = end + 1;
        return true;
    }

    bool read_number(double& out) {
        size_t start = pos;
        while (pos < text.size()) {
            char c = text[pos];
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '+' || c == '-' ||
                c == '.' || c == 'e' || c == 'E') {
                ++pos;
            } else {
                break;
            }
        }
        if (pos == start) return false;
        auto result = std::from_chars(text.data() + start, text.data() + pos, out);
        return result.ec == std::errc{} && result.ptr == text.data() + pos;
    }
};

bool integral_in_range(double v, int lo, int hi) {
    return std::isfinite(v) && v == std::floor(v) && v >= lo && v <= hi;
}

// One {'Position': [...], 'Confidence': c} record. Keys may appear in either
// order but each exactly once.
AnswerError parse_record(Scanner& sc, Prediction& out) {
    sc.skip_ws();
    if (!sc.eat('{')) return AnswerError::MalformedAnswer;

    bool have_position = false;
    bool have_confidence = false;
    double coords[4] = {0, 0, 0, 0};
    double confidence = 0.0;

    while (true) {
        sc.skip_ws();
        std::string key;
        if (!sc.read_string(key)) return AnswerError::MalformedAnswer;
        sc.skip_ws();
        if (!sc.eat(':')) return AnswerError::MalformedAnswer;
        sc.skip_ws();

        if (key == "Position") {
            if (have_position) return AnswerError::MalformedAnswer;
            if (!sc.eat('[')) return AnswerError::MalformedAnswer;
            for (int i = 0; i < 4; ++i) {
                sc.skip_ws();
                if (!sc.read_number(coords[i])) return AnswerError::MalformedAnswer;
                sc.skip_ws();
                if (i < 3 && !sc.eat(',')) return AnswerError::MalformedAnswer;
            }
            if (!sc.eat(']')) return AnswerError::MalformedAnswer;
            have_position = true;
        } else if (key == "Confidence") {
            if (have_confidence) return AnswerError::MalformedAnswer;
            if (!sc.read_number(confidence)) return AnswerError::MalformedAnswer;
            have_confidence = true;
        } else {
            return AnswerError::MalformedAnswer;
        }

        sc.skip_ws();
        if (sc.eat(',')) continue;
        if (sc.eat('}')) break;
        return AnswerError::MalformedAnswer;
    }

    if (!have_position || !have_confidence) return AnswerError::MalformedAnswer;

    for (double c : coords) {
        if (!integral_in_range(c, 0, 1000)) return AnswerError::InvalidBox;
    }
    out.box = BBox{static_cast<int>(coords[0]), static_cast<int>(coords[1]),
                   static_cast<int>(coords[2]), static_cast<int>(coords[3])};
    if (!out.box.valid()) return AnswerError::InvalidBox;
    if (!(std::isfinite(confidence) && confidence >= 0.0 && confidence <= 1.0)) {
        return AnswerError::InvalidConfidence;
    }
    out.confidence = confidence;
    return AnswerError::None;
}

}  // namespace

const char* answer_error_name(AnswerError err) {
    switch (err) {
        case AnswerError::None: return "None";
        case AnswerError::MalformedAnswer: return "MalformedAnswer";
        case AnswerError::InvalidBox: return "InvalidBox";
        case AnswerError::InvalidConfidence: return "InvalidConfidence";
        case AnswerError::EmptyAnswer: return "EmptyAnswer";
    }
    return "Unknown";
}

ParsedResponse parse_response(std::string_view raw) {
    ParsedResponse parsed;

    auto think_open = find_all(raw, kThinkOpen);
    auto think_close = find_all(raw, kThinkClose);
    auto answer_open = find_all(raw, kAnswerOpen);
    auto answer_close = find_all(raw, kAnswerClose);
    if (think_open.size() != 1 || think_close.size() != 1 || answer_open.size() != 1 ||
        answer_close.size() != 1) {
        return parsed;
    }

    size_t to = think_open[0];
    size_t tc = think_close[0];
    size_t ao = answer_open[0];
    size_t ac = answer_close[0];
    if (!(to < tc && tc < ao && ao < ac)) return parsed;

    size_t think_begin = to + kThinkOpen.size();
    size_t answer_begin = ao + kAnswerOpen.size();
    if (!whitespace_only(raw.substr(0, to)) ||
        !whitespace_only(raw.substr(tc + kThinkClose.size(), ao - (tc + kThinkClose.size()))) ||
        !whitespace_only(raw.substr(ac + kAnswerClose.size()))) {
        return parsed;
    }

    parsed.format_ok = true;
    parsed.think.assign(raw.substr(think_begin, tc - think_begin));
    parsed.answer_raw.assign(raw.substr(answer_begin, ac - answer_begin));
    return parsed;
}

DetectionParseResult parse_detection_answer(std::string_view answer_raw) {
    DetectionParseResult result;

    if (iequals(trim(answer_raw), kNoObjectsSentinel)) {
        result.answer = DetectionAnswer::none();
        return result;
    }

    Scanner sc{answer_raw};
    sc.skip_ws();
    if (!sc.eat('[')) {
        result.error = AnswerError::MalformedAnswer;
        return result;
    }

    std::vector<Prediction> predictions;
    while (true) {
        Prediction pred;
        AnswerError err = parse_record(sc, pred);
        if (err != AnswerError::None) {
            result.error = err;
            return result;
        }
        predictions.push_back(pred);
        sc.skip_ws();
        if (sc.eat(',')) continue;
        if (sc.eat(']')) break;
        result.error = AnswerError::MalformedAnswer;
        return result;
    }
    sc.skip_ws();
    if (!sc.done()) {
        result.error = AnswerError::MalformedAnswer;
        return result;
    }

    result.answer = DetectionAnswer::boxes(std::move(predictions));
    return result;
}

ClassificationParseResult parse_classification_answer(std::string_view answer_raw) {
    ClassificationParseResult result;
    result.label = normalize_label(answer_raw);
    if (result.label.empty()) {
        result.error = AnswerError::EmptyAnswer;
    }
    return result;
}

std::string serialize_detection_answer(const DetectionAnswer& answer) {
    if (answer.no_objects) return std::string(kNoObjectsSentinel);

    std::string out = "[";
    char buf[96];
    for (size_t i = 0; i < answer.predictions.size(); ++i) {
        const Prediction& p = answer.predictions[i];
        std::snprintf(buf, sizeof(buf), "{'Position': [%d, %d, %d, %d], 'Confidence': %.2f}",
                      p.box.x1, p.box.y1, p.box.x2, p.box.y2, p.confidence);
        if (i > 0) out += ", ";
        out += buf;
    }
    out += "]";
    return out;
}

std::string normalize_label(std::string_view text) {
    std::string_view trimmed = trim(text);
    std::string out;
    out.reserve(trimmed.size());
    bool pending_space = false;
    for (char c : trimmed) {
        if (kWhitespace.find(c) != std::string_view::npos) {
            pending_space = true;
            continue;
        }
        if (pending_space) {
            out += ' ';
            pending_space = false;
        }
        out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

}  // namespace rlvr
