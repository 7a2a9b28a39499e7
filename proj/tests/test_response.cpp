#include <doctest.h>

#include <random>
#include <string>

#include "rlvr/response.hpp"

using namespace rlvr;

TEST_CASE("parse_response accepts the canonical template instance") {
    ParsedResponse parsed = parse_response("<think>reasoning</think><answer>cat</answer>");
    CHECK(parsed.format_ok);
    CHECK(parsed.think == "reasoning");
    CHECK(parsed.answer_raw == "cat");
}

TEST_CASE("parse_response rejects tag-free and reordered input") {
    CHECK_FALSE(parse_response("cat").format_ok);
    CHECK_FALSE(parse_response("<answer>cat</answer><think>r</think>").format_ok);
}

TEST_CASE("parse_response allows only whitespace outside the blocks") {
    CHECK(parse_response("  <think>a</think>\n\t<answer>b</answer>  \n").format_ok);
    CHECK_FALSE(parse_response("x<think>a</think><answer>b</answer>").format_ok);
    CHECK_FALSE(parse_response("<think>a</think>x<answer>b</answer>").format_ok);
    CHECK_FALSE(parse_response("<think>a</think><answer>b</answer>x").format_ok);
}

TEST_CASE("parse_response preserves inner whitespace and allows empty blocks") {
    ParsedResponse parsed = parse_response("<think>  a\n b </think><answer> x </answer>");
    CHECK(parsed.format_ok);
    CHECK(parsed.think == "  a\n b ");
    CHECK(parsed.answer_raw == " x ");
    CHECK(parse_response("<think></think><answer></answer>").format_ok);
}

TEST_CASE("parse_response requires each tag exactly once") {
    CHECK_FALSE(parse_response("<think>a</think><answer>b</answer><answer>c</answer>").format_ok);
    CHECK_FALSE(parse_response("<think>a<think>b</think></think><answer>c</answer>").format_ok);
    CHECK_FALSE(parse_response("<think>a</think><answer>b").format_ok);
    CHECK_FALSE(parse_response("<think>a</think>").format_ok);
}

TEST_CASE("parse_response is pure") {
    const std::string inputs[] = {"<think>a</think><answer>b</answer>", "garbage", ""};
    for (const std::string& input : inputs) {
        ParsedResponse first = parse_response(input);
        ParsedResponse second = parse_response(input);
        CHECK(first.format_ok == second.format_ok);
        CHECK(first.think == second.think);
        CHECK(first.answer_raw == second.answer_raw);
    }
}

TEST_CASE("zero or repeated answer tags always invalidate") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 200; ++i) {
        std::string body = "<think>t</think>";
        int copies = static_cast<int>(rng() % 2) * 2;  // 0 or 2
        for (int c = 0; c < copies; ++c) body += "<answer>x</answer>";
        CHECK_FALSE(parse_response(body).format_ok);
    }
}

TEST_CASE("parse_detection_answer parses the record list") {
    DetectionParseResult result =
        parse_detection_answer("[{'Position': [100, 200, 300, 400], 'Confidence': 0.95}]");
    REQUIRE(result.ok());
    REQUIRE(result.answer.predictions.size() == 1);
    CHECK(result.answer.predictions[0].box == BBox{100, 200, 300, 400});
    CHECK(result.answer.predictions[0].confidence == doctest::Approx(0.95));
}

TEST_CASE("parse_detection_answer handles the sentinel case-insensitively") {
    CHECK(parse_detection_answer("No Objects").answer.no_objects);
    CHECK(parse_detection_answer("  no objects \n").answer.no_objects);
    CHECK(parse_detection_answer("NO OBJECTS").answer.no_objects);
}

TEST_CASE("parse_detection_answer rejects invalid boxes and confidences") {
    CHECK(parse_detection_answer("[{'Position': [300, 200, 100, 400], 'Confidence': 0.5}]").error ==
          AnswerError::InvalidBox);
    CHECK(parse_detection_answer("[{'Position': [100, 100, 100, 400], 'Confidence': 0.5}]").error ==
          AnswerError::InvalidBox);
    CHECK(parse_detection_answer("[{'Position': [0, 0, 1001, 10], 'Confidence': 0.5}]").error ==
          AnswerError::InvalidBox);
    CHECK(parse_detection_answer("[{'Position': [0, 0, 10.5, 10], 'Confidence': 0.5}]").error ==
          AnswerError::InvalidBox);
    CHECK(parse_detection_answer("[{'Position': [0, 0, 10, 10], 'Confidence': 1.5}]").error ==
          AnswerError::InvalidConfidence);
    CHECK(parse_detection_answer("[{'Position': [0, 0, 10, 10], 'Confidence': -0.1}]").error ==
          AnswerError::InvalidConfidence);
}

TEST_CASE("parse_detection_answer rejects structural garbage") {
    CHECK(parse_detection_answer("").error == AnswerError::MalformedAnswer);
    CHECK(parse_detection_answer("[]").error == AnswerError::MalformedAnswer);
    CHECK(parse_detection_answer("hello").error == AnswerError::MalformedAnswer);
    CHECK(parse_detection_answer("[{'Position': [1, 2, 3").error == AnswerError::MalformedAnswer);
    CHECK(parse_detection_answer("[{'Pos': [0, 0, 10, 10], 'Confidence': 0.5}]").error ==
          AnswerError::MalformedAnswer);
    CHECK(parse_detection_answer("[{'Position': [0, 0, 10, 10]}]").error ==
          AnswerError::MalformedAnswer);
    CHECK(parse_detection_answer("[{'Position': [0, 0, 10, 10], 'Confidence': 0.5}] tail").error ==
          AnswerError::MalformedAnswer);
}

TEST_CASE("parse_detection_answer tolerates quoting, key order, and long decimals") {
    DetectionParseResult dq =
        parse_detection_answer(R"([{"Position": [0, 0, 10, 10], "Confidence": 0.5}])");
    CHECK(dq.ok());
    DetectionParseResult flipped =
        parse_detection_answer("[{'Confidence': 0.5, 'Position': [0, 0, 10, 10]}]");
    REQUIRE(flipped.ok());
    CHECK(flipped.answer.predictions[0].box == BBox{0, 0, 10, 10});
    DetectionParseResult long_decimals =
        parse_detection_answer("[{'Position': [0, 0, 10, 10], 'Confidence': 0.4567}]");
    REQUIRE(long_decimals.ok());
    CHECK(long_decimals.answer.predictions[0].confidence == doctest::Approx(0.4567));
}

TEST_CASE("parse_classification_answer normalizes labels") {
    CHECK(parse_classification_answer("  English Marigold ").label == "english marigold");
    CHECK(parse_classification_answer("pug").label == "pug");
    CHECK(parse_classification_answer("a\t b\n\nc").label == "a b c");
    CHECK(parse_classification_answer("").error == AnswerError::EmptyAnswer);
    CHECK(parse_classification_answer("  \n ").error == AnswerError::EmptyAnswer);
}

TEST_CASE("serialize_detection_answer emits the single-quoted record syntax") {
    CHECK(serialize_detection_answer(DetectionAnswer::boxes({{BBox{0, 0, 1000, 1000}, 1.0}})) ==
          "[{'Position': [0, 0, 1000, 1000], 'Confidence': 1.00}]");
    CHECK(serialize_detection_answer(DetectionAnswer::none()) == "No Objects");
    CHECK(serialize_detection_answer(DetectionAnswer::boxes({{BBox{10, 20, 30, 40}, 0.456}})) ==
          "[{'Position': [10, 20, 30, 40], 'Confidence': 0.46}]");
    CHECK(serialize_detection_answer(DetectionAnswer::boxes(
              {{BBox{1, 2, 3, 4}, 0.3}, {BBox{5, 6, 7, 8}, 0.6}})) ==
          "[{'Position': [1, 2, 3, 4], 'Confidence': 0.30}, "
          "{'Position': [5, 6, 7, 8], 'Confidence': 0.60}]");
}

TEST_CASE("round trip holds for two-decimal confidences") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 500; ++i) {
        DetectionAnswer answer;
        if (rng() % 10 == 0) {
            answer = DetectionAnswer::none();
        } else {
            size_t count = 1 + rng() % 4;
            std::vector<Prediction> preds;
            for (size_t k = 0; k < count; ++k) {
                int x1 = static_cast<int>(rng() % 1000);
                int x2 = x1 + 1 + static_cast<int>(rng() % (1000 - x1));
                int y1 = static_cast<int>(rng() % 1000);
                int y2 = y1 + 1 + static_cast<int>(rng() % (1000 - y1));
                double conf = static_cast<double>(rng() % 101) / 100.0;
                preds.push_back({BBox{x1, y1, x2, y2}, conf});
            }
            answer = DetectionAnswer::boxes(std::move(preds));
        }
        DetectionParseResult reparsed = parse_detection_answer(serialize_detection_answer(answer));
        REQUIRE(reparsed.ok());
        CHECK(reparsed.answer == answer);
    }
}
