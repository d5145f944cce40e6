#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hvqa/instances.hpp"

namespace hvqa {

// Literal filled in for a prior level whose answer could not be parsed.
inline constexpr std::string_view kUnknownFact = "UNKNOWN";

struct PromptBundle {
    std::string text;
    std::size_t expected_letters = 1;
    // Allowed letters for each answer position, e.g. "ABCD" or "AB".
    std::vector<std::string> letter_vocabulary;
};

// nullopt is the FAIL sentinel.
using Letter = std::optional<char>;

enum class ParseStatus { kOk, kPartial, kFailed };
std::string_view to_string(ParseStatus status);

struct ParsedAnswer {
    std::vector<Letter> letters;
    std::string raw;
    ParseStatus status = ParseStatus::kFailed;
};

struct ParseOptions {
    // Accept lowercase a-d runs as answers. Off by default: the format asks for capitals.
    bool case_fold = false;
};

/*
 * Prompt templates. Slots: {L}, {known_facts}, {level}, {question}, {options},
 * {k}, {blocks}. The conditioned-step template repeats the current-level
 * question the way the reference prompt figure does; the joint template
 * states that nothing is known yet and lists every level's question.
 */
inline constexpr std::string_view kStepTemplate =
    "You are a taxonomist.\n"
    "Known facts: {known_facts}\n"
    "Based on taxonomy and the known facts above, where does the organism in the image fall in terms of {level}?\n"
    "Question (current level): {question}\n"
    "{options}\n"
    "Answer with the option's letter from the given choices directly.";

inline constexpr std::string_view kJointTemplate =
    "Known facts: None.\n"
    "You are a taxonomist. Answer the following multiple-choice\n"
    "questions about the organism in the image.\n"
    "Return EXACTLY {L} capital letters separated by single spaces,\n"
    "one per question, in order (e.g., \"B D A C ...\").\n"
    "For each question, choose ONLY from the letters shown with its options.\n"
    "Do not output any words or explanations.\n"
    "\n"
    "{blocks}";

inline constexpr std::string_view kJointBlockTemplate = "Q{k} (level {k}): {question}\n{options}\n";

// "A. x  B. y  C. z  D. w"
std::string render_options(const LevelQuestion& question);

// "None." or "Level 1 = a; Level 2 = b."
std::string render_known_facts(const std::vector<std::string>& prior_answers);

// Inverse of render_known_facts on a full prompt; empty when the line reads None.
std::vector<std::pair<int, std::string>> parse_known_facts(std::string_view prompt);

PromptBundle build_joint_prompt(const VqaInstance& instance);

// level is 1-based over instance.per_level; prior_answers holds level-1 labels.
PromptBundle build_step_prompt(const VqaInstance& instance, std::size_t level,
                               const std::vector<std::string>& prior_answers);

// Step prompt with "Known facts: None." at every level.
PromptBundle build_independent_prompt(const VqaInstance& instance, std::size_t level);
// Step prompt for one question given the labels chosen before it.
PromptBundle step_bundle(const LevelQuestion& question, const std::vector<std::string>& prior_answers);

ParsedAnswer parse_joint_answer(std::string_view raw, std::size_t expected, const ParseOptions& options = {});
// Positions whose letter is outside its vocabulary become FAIL.
ParsedAnswer parse_joint_answer(std::string_view raw, const std::vector<std::string>& vocabulary,
                                const ParseOptions& options = {});
ParsedAnswer parse_step_answer(std::string_view raw, std::string_view vocabulary = kOptionLetters,
                               const ParseOptions& options = {});

// Letters joined by single spaces; FAIL renders as "?".
std::string render_letters(const std::vector<Letter>& letters);

}  // namespace hvqa
