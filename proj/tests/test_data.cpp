#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "rlvr/data.hpp"

using namespace rlvr;

namespace {

const char* kMinimal = R"({
    "images": [{"id": 1, "width": 640, "height": 480, "file_name": "a.jpg"}],
    "categories": [{"id": 7, "name": "cat"}],
    "annotations": [{"image_id": 1, "category_id": 7, "bbox": [0, 0, 320, 240]}]
})";

AnnotationSet five_image_set() {
    std::string text = R"({"images": [)";
    for (int i = 1; i <= 5; ++i) {
        if (i > 1) text += ",";
        text += R"({"id": )" + std::to_string(i) + R"(, "width": 1000, "height": 1000})";
    }
    text += R"(], "categories": [{"id": 1, "name": "cat"}, {"id": 2, "name": "dog"}],
              "annotations": [)";
    for (int i = 1; i <= 5; ++i) {
        if (i > 1) text += ",";
        text += R"({"image_id": )" + std::to_string(i) +
                R"(, "category_id": 1, "bbox": [10, 10, 100, 100]})";
    }
    text += R"(,{"image_id": 3, "category_id": 2, "bbox": [200, 200, 100, 100]}]})";
    return parse_annotations(text);
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("rlvr_test_" + std::to_string(std::rand()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("parse_annotations loads a minimal file") {
    AnnotationSet ann = parse_annotations(kMinimal);
    REQUIRE(ann.images.size() == 1);
    REQUIRE(ann.categories.size() == 1);
    REQUIRE(ann.instances.size() == 1);
    CHECK(ann.images[0].file_name == "a.jpg");
    CHECK(ann.instances[0].category == "cat");
    // Pixel box (0, 0, 320, 240) in a 640x480 image normalizes to (0, 0, 500, 500).
    CHECK(ann.instances[0].box == BBox{0, 0, 500, 500});
}

TEST_CASE("parse_annotations validates referential integrity") {
    CHECK_THROWS_AS(parse_annotations(R"({
        "images": [{"id": 1, "width": 640, "height": 480}],
        "categories": [{"id": 7, "name": "cat"}],
        "annotations": [{"image_id": 2, "category_id": 7, "bbox": [0, 0, 10, 10]}]
    })"),
                    ValidationError);
    CHECK_THROWS_AS(parse_annotations(R"({
        "images": [{"id": 1, "width": 640, "height": 480}],
        "categories": [{"id": 7, "name": "cat"}],
        "annotations": [{"image_id": 1, "category_id": 8, "bbox": [0, 0, 10, 10]}]
    })"),
                    ValidationError);
}

TEST_CASE("parse_annotations rejects malformed documents") {
    CHECK_THROWS_AS(parse_annotations("not json"), ParseError);
    CHECK_THROWS_AS(parse_annotations("[]"), ParseError);
    CHECK_THROWS_AS(parse_annotations(R"({"images": []})"), ParseError);
    CHECK_THROWS_AS(parse_annotations(R"({
        "images": [{"id": 1, "width": 640, "height": 480}],
        "categories": [{"id": 7, "name": "cat"}],
        "annotations": [{"image_id": 1, "category_id": 7, "bbox": [0, 0, 10]}]
    })"),
                    ParseError);
}

TEST_CASE("parse_annotations rejects duplicates and bad dimensions") {
    CHECK_THROWS_AS(parse_annotations(R"({
        "images": [{"id": 1, "width": 640, "height": 480},
                   {"id": 1, "width": 640, "height": 480}],
        "categories": []
    })"),
                    ValidationError);
    CHECK_THROWS_AS(parse_annotations(R"({
        "images": [{"id": 1, "width": 0, "height": 480}],
        "categories": []
    })"),
                    ValidationError);
}

TEST_CASE("parse_annotations ignores unknown fields") {
    AnnotationSet ann = parse_annotations(R"({
        "info": {"year": 2017},
        "licenses": [],
        "images": [{"id": 1, "width": 640, "height": 480, "license": 3}],
        "categories": [{"id": 7, "name": "cat", "supercategory": "animal"}],
        "annotations": [{"image_id": 1, "category_id": 7, "bbox": [0, 0, 320, 240],
                         "iscrowd": 0, "area": 76800.0}]
    })");
    CHECK(ann.instances.size() == 1);
}

TEST_CASE("normalize_pixel_box rounds half away from zero and validates") {
    CHECK(normalize_pixel_box(0, 0, 320, 240, 640, 480) == BBox{0, 0, 500, 500});
    // 1 * 1000 / 640 = 1.5625 -> 2
    CHECK(normalize_pixel_box(1, 0, 319, 240, 640, 480).x1 == 2);
    CHECK_THROWS_AS(normalize_pixel_box(0, 0, 0.1, 5, 1000, 1000), ValidationError);
    CHECK_THROWS_AS(normalize_pixel_box(900, 0, 200, 10, 1000, 1000), ValidationError);
    CHECK_THROWS_AS(normalize_pixel_box(0, 0, -5, 5, 1000, 1000), ValidationError);
}

TEST_CASE("normalization is idempotent on already-normalized coordinates") {
    BBox box{10, 20, 400, 600};
    BBox once = normalize_pixel_box(box.x1, box.y1, box.x2 - box.x1, box.y2 - box.y1, 1000, 1000);
    CHECK(once == box);
    BBox twice =
        normalize_pixel_box(once.x1, once.y1, once.x2 - once.x1, once.y2 - once.y1, 1000, 1000);
    CHECK(twice == once);
}

TEST_CASE("few_shot_sample selects the requested number of images") {
    AnnotationSet ann = five_image_set();
    std::vector<std::string> cats = {"cat"};

    AnnotationSet one = few_shot_sample(ann, 1, cats, 42);
    CHECK(one.images.size() == 1);
    CHECK(one.categories.size() == 1);
    CHECK(one.instances.size() == 1);

    AnnotationSet capped = few_shot_sample(ann, 16, cats, 42);
    CHECK(capped.images.size() == 5);  // only 5 available
}

TEST_CASE("few_shot_sample is deterministic and a subset") {
    AnnotationSet ann = five_image_set();
    std::vector<std::string> cats = {"cat", "dog"};
    AnnotationSet a = few_shot_sample(ann, 2, cats, 7);
    AnnotationSet b = few_shot_sample(ann, 2, cats, 7);
    REQUIRE(a.images.size() == b.images.size());
    for (size_t i = 0; i < a.images.size(); ++i) CHECK(a.images[i].id == b.images[i].id);

    for (const AnnotationInstance& inst : a.instances) {
        CHECK(ann.find_image(inst.image_id) != nullptr);
        bool requested = inst.category == "cat" || inst.category == "dog";
        CHECK(requested);
    }

    AnnotationSet c = few_shot_sample(ann, 2, cats, 8);
    (void)c;  // different seed must still be valid; contents may differ
    CHECK_THROWS_AS(few_shot_sample(ann, 2, std::vector<std::string>{"unicorn"}, 7),
                    UnknownCategory);
}

TEST_CASE("few_shot_sample keeps co-occurring instances of requested categories") {
    AnnotationSet ann = five_image_set();
    // Image 3 carries both a cat and a dog instance; requesting dog picks image
    // 3 and must keep its cat instance too when cat is also requested.
    std::vector<std::string> cats = {"cat", "dog"};
    AnnotationSet subset = few_shot_sample(ann, 5, cats, 1);
    bool has_dog = false;
    for (const auto& inst : subset.instances) has_dog |= inst.category == "dog";
    CHECK(has_dog);
}

TEST_CASE("build_prompt substitutes every category slot") {
    std::string prompt = build_prompt(detection_prompt_template(), std::string("dog"));
    CHECK(prompt.find("belonging to the category 'dog' in the image") != std::string::npos);
    CHECK(prompt.find("{category}") == std::string::npos);
    CHECK(prompt.find("return 'No Objects'") != std::string::npos);

    CHECK(build_prompt(classification_prompt_template()) == classification_prompt_template().text);
    CHECK_THROWS_AS(build_prompt(detection_prompt_template()), MissingCategory);
}

TEST_CASE("response log round trip") {
    AnnotationSet ann = five_image_set();
    ResponseLog log;
    log.records.push_back({1, "cat", "<think>a</think><answer>No Objects</answer>", std::nullopt});
    log.records.push_back({3, "dog", "<think>b</think><answer>x</answer>",
                           std::string("<think>c</think><answer>yes</answer>")});

    std::string jsonl = response_log_to_jsonl(log);
    ResponseLog parsed = parse_response_log(jsonl, ann);
    REQUIRE(parsed.records.size() == 2);
    CHECK(parsed.records[0].image_id == 1);
    CHECK(parsed.records[0].category == "cat");
    CHECK(parsed.records[0].response == log.records[0].response);
    CHECK_FALSE(parsed.records[0].judge_response.has_value());
    CHECK(parsed.records[1].judge_response == log.records[1].judge_response);

    CHECK(response_log_to_jsonl(parsed) == jsonl);
}

TEST_CASE("response log validation") {
    AnnotationSet ann = five_image_set();
    CHECK(parse_response_log("", ann).records.empty());
    CHECK(parse_response_log("\n  \n", ann).records.empty());
    CHECK_THROWS_AS(parse_response_log(R"({"image_id": 99, "category": "cat", "response": "r"})",
                                       ann),
                    UnknownId);
    CHECK_THROWS_AS(parse_response_log(R"({"image_id": 1, "category": "emu", "response": "r"})",
                                       ann),
                    UnknownId);
    CHECK_THROWS_AS(parse_response_log("{broken", ann), ParseError);
    CHECK_THROWS_AS(parse_response_log(R"({"image_id": 1, "category": "cat"})", ann), ParseError);
}

TEST_CASE("annotation files round trip through disk") {
    TempDir dir;
    AnnotationSet ann = five_image_set();
    std::filesystem::path path = dir.path / "ann.json";
    write_annotations(ann, path);
    AnnotationSet loaded = load_annotations(path);
    REQUIRE(loaded.images.size() == ann.images.size());
    REQUIRE(loaded.instances.size() == ann.instances.size());
    for (size_t i = 0; i < ann.instances.size(); ++i) {
        CHECK(loaded.instances[i].box == ann.instances[i].box);
        CHECK(loaded.instances[i].category == ann.instances[i].category);
    }
    CHECK_THROWS_AS(load_annotations(dir.path / "missing.json"), ParseError);
}

TEST_CASE("response logs round trip through disk") {
    TempDir dir;
    AnnotationSet ann = five_image_set();
    ResponseLog log;
    log.records.push_back({2, "cat", "<think>a</think><answer>No Objects</answer>", std::nullopt});
    std::filesystem::path path = dir.path / "log.jsonl";
    write_response_log(log, path);
    ResponseLog loaded = read_response_log(path, ann);
    REQUIRE(loaded.records.size() == 1);
    CHECK(loaded.records[0].image_id == 2);
}
