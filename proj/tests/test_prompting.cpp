#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>
#include <regex>

#include "hvqa/common.hpp"
#include "hvqa/prompting.hpp"

using namespace hvqa;

namespace {

VqaInstance golden_instance() { return read_instances_file(HVQA_FIXTURES "/golden_instance.jsonl").at(0); }

std::string golden(const std::string& name) { return read_text_file(HVQA_FIXTURES "/golden/" + name); }

std::size_t count_matches(const std::string& text, const std::regex& re) {
    return static_cast<std::size_t>(std::distance(std::sregex_iterator(text.begin(), text.end(), re), std::sregex_iterator()));
}

}  // namespace

TEST_CASE("joint prompt matches the golden file") {
    const auto bundle = build_joint_prompt(golden_instance());
    CHECK(bundle.text == golden("joint.txt"));
    CHECK(bundle.expected_letters == 4);
    CHECK(count_matches(bundle.text, std::regex("Q[0-9]+ \\(level [0-9]+\\):")) == 4);
}

TEST_CASE("step prompts match the golden files") {
    const auto inst = golden_instance();
    std::vector<std::string> priors;
    for (std::size_t l = 1; l <= inst.depth(); ++l) {
        CHECK(build_step_prompt(inst, l, priors).text == golden("step_" + std::to_string(l) + ".txt"));
        priors.push_back(inst.per_level[l - 1].gold_label());
    }
}

TEST_CASE("step prompt known facts") {
    const auto inst = golden_instance();
    CHECK(build_step_prompt(inst, 1, {}).text.find("Known facts: None.\n") != std::string::npos);
    const auto text = build_step_prompt(inst, 3, {"animalia", "chordata"}).text;
    CHECK(text.find("Known facts: Level 1 = animalia; Level 2 = chordata.\n") != std::string::npos);
    const auto facts = parse_known_facts(text);
    REQUIRE(facts.size() == 2);
    CHECK(facts[1] == std::pair<int, std::string>{2, "chordata"});
    CHECK(parse_known_facts(build_step_prompt(inst, 1, {}).text).empty());
    CHECK_THROWS_AS(build_step_prompt(inst, 3, {"only one"}), std::invalid_argument);
    CHECK_THROWS_AS(build_step_prompt(inst, 9, {}), std::out_of_range);
    CHECK(build_independent_prompt(inst, 3).text.find("Known facts: None.\n") != std::string::npos);
}

TEST_CASE("single-level joint prompt asks for one letter") {
    auto inst = golden_instance();
    inst.per_level.resize(1);
    const auto text = build_joint_prompt(inst).text;
    CHECK(text.find("Return EXACTLY 1 capital letters separated by single spaces,\n") != std::string::npos);
    CHECK(count_matches(text, std::regex("Q[0-9]+ \\(level [0-9]+\\):")) == 1);
}

TEST_CASE("joint answers parse left to right") {
    auto letters = [](const ParsedAnswer& a) { return render_letters(a.letters); };
    const auto a = parse_joint_answer("B D A C", 4);
    CHECK(letters(a) == "B D A C");
    CHECK(a.status == ParseStatus::kOk);
    const auto b = parse_joint_answer("The answers: A, then B!", 2);
    CHECK(letters(b) == "A B");
    CHECK(b.status == ParseStatus::kOk);
    const auto c = parse_joint_answer("Z x 9", 2);
    CHECK(letters(c) == "? ?");
    CHECK(c.status == ParseStatus::kFailed);
    const auto d = parse_joint_answer("A B", 4);
    CHECK(letters(d) == "A B ? ?");
    CHECK(d.status == ParseStatus::kPartial);
    CHECK(letters(parse_joint_answer("BDAC", 4)) == "B D A C");
    CHECK(letters(parse_joint_answer("b d", 2)) == "? ?");
    ParseOptions fold;
    fold.case_fold = true;
    CHECK(letters(parse_joint_answer("b d", 2, fold)) == "B D");
}

TEST_CASE("letters outside the offered options fail") {
    const auto a = parse_joint_answer("C A", std::vector<std::string>{"AB", "ABCD"});
    CHECK(render_letters(a.letters) == "? A");
    CHECK(a.status == ParseStatus::kPartial);
}

TEST_CASE("step answers") {
    CHECK(render_letters(parse_step_answer("C").letters) == "C");
    CHECK(render_letters(parse_step_answer(" Answer: B.").letters) == "B");
    const auto empty = parse_step_answer("");
    CHECK(render_letters(empty.letters) == "?");
    CHECK(empty.status == ParseStatus::kFailed);
    CHECK(render_letters(parse_step_answer("D", "ABC").letters) == "?");
}

TEST_CASE("render then parse round-trips") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 10000; ++trial) {
        const std::size_t n = 1 + rng() % 12;
        std::vector<Letter> letters;
        for (std::size_t i = 0; i < n; ++i) letters.emplace_back(static_cast<char>('A' + rng() % 4));
        const auto parsed = parse_joint_answer(render_letters(letters), n);
        REQUIRE(parsed.letters == letters);
    }
}
