#include "hvqa/prompting.hpp"

#include <cctype>
#include <map>

namespace hvqa {

std::string_view to_string(ParseStatus status) {
    switch (status) {
        case ParseStatus::kOk: return "ok";
        case ParseStatus::kPartial: return "partial";
        case ParseStatus::kFailed: return "failed";
    }
    return "failed";
}

namespace {

// Single pass, so substituted text is never re-scanned for slots.
std::string fill(std::string_view tmpl, const std::map<std::string_view, std::string>& slots) {
    std::string out;
    out.reserve(tmpl.size() + 256);
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            const auto close = tmpl.find('}', i);
            if (close != std::string_view::npos) {
                auto it = slots.find(tmpl.substr(i + 1, close - i - 1));
                if (it != slots.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out += tmpl[i++];
    }
    return out;
}

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

// Answer letters are alphabetic runs made only of A-D ("B", "BDAC"); words
// such as "Answer" or "ANSWER" are skipped whole.
std::vector<char> scan_letters(std::string_view raw, const ParseOptions& options, std::size_t limit) {
    std::vector<char> found;
    std::size_t i = 0;
    while (i < raw.size() && found.size() < limit) {
        if (!is_alpha(raw[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < raw.size() && is_alpha(raw[j])) ++j;
        const std::string_view run = raw.substr(i, j - i);
        bool all_upper = true;
        bool all_lower = true;
        for (char c : run) {
            all_upper = all_upper && c >= 'A' && c <= 'D';
            all_lower = all_lower && c >= 'a' && c <= 'd';
        }
        if (all_upper || (options.case_fold && all_lower)) {
            for (char c : run) {
                if (found.size() == limit) break;
                found.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
            }
        }
        i = j;
    }
    return found;
}

ParsedAnswer finish(std::string_view raw, std::vector<Letter> letters) {
    ParsedAnswer out;
    out.raw = std::string(raw);
    std::size_t valid = 0;
    for (const auto& l : letters) valid += l.has_value() ? 1 : 0;
    out.status = valid == letters.size() ? ParseStatus::kOk : (valid == 0 ? ParseStatus::kFailed : ParseStatus::kPartial);
    out.letters = std::move(letters);
    return out;
}

}  // namespace

std::string render_options(const LevelQuestion& question) {
    std::string out;
    for (std::size_t i = 0; i < question.options.size(); ++i) {
        if (i > 0) out += "  ";
        out += kOptionLetters[i];
        out += ". ";
        out += question.options[i];
    }
    return out;
}

std::string render_known_facts(const std::vector<std::string>& prior_answers) {
    if (prior_answers.empty()) return "None.";
    std::string out;
    for (std::size_t i = 0; i < prior_answers.size(); ++i) {
        if (i > 0) out += "; ";
        out += "Level " + std::to_string(i + 1) + " = " + prior_answers[i];
    }
    out += '.';
    return out;
}

std::vector<std::pair<int, std::string>> parse_known_facts(std::string_view prompt) {
    constexpr std::string_view kPrefix = "Known facts: ";
    std::vector<std::pair<int, std::string>> facts;
    std::size_t start = 0;
    while (start < prompt.size()) {
        auto end = prompt.find('\n', start);
        if (end == std::string_view::npos) end = prompt.size();
        std::string_view line = prompt.substr(start, end - start);
        start = end + 1;
        if (line.substr(0, kPrefix.size()) != kPrefix) continue;
        line.remove_prefix(kPrefix.size());
        if (line == "None.") return facts;
        if (!line.empty() && line.back() == '.') line.remove_suffix(1);
        // Entries are "Level <k> = <label>" joined by "; "; a label may itself
        // contain "; ", so split only where the next entry header follows.
        std::size_t pos = 0;
        while (pos < line.size()) {
            if (line.substr(pos, 6) != "Level ") break;
            std::size_t p = pos + 6;
            int level = 0;
            while (p < line.size() && std::isdigit(static_cast<unsigned char>(line[p]))) {
                level = level * 10 + (line[p] - '0');
                ++p;
            }
            if (line.substr(p, 3) != " = ") break;
            p += 3;
            const std::string next_header = "; Level " + std::to_string(level + 1) + " = ";
            auto stop = line.find(next_header, p);
            if (stop == std::string_view::npos) stop = line.size();
            facts.emplace_back(level, std::string(line.substr(p, stop - p)));
            pos = stop == line.size() ? stop : stop + 2;
        }
        return facts;
    }
    return facts;
}

PromptBundle build_joint_prompt(const VqaInstance& instance) {
    PromptBundle bundle;
    std::string blocks;
    for (std::size_t k = 0; k < instance.per_level.size(); ++k) {
        const auto& q = instance.per_level[k];
        blocks += fill(kJointBlockTemplate, {{"k", std::to_string(k + 1)},
                                             {"question", q.question_text},
                                             {"options", render_options(q)}});
        bundle.letter_vocabulary.emplace_back(q.letters());
    }
    bundle.text = fill(kJointTemplate, {{"L", std::to_string(instance.per_level.size())}, {"blocks", blocks}});
    bundle.expected_letters = instance.per_level.size();
    return bundle;
}

PromptBundle build_step_prompt(const VqaInstance& instance, std::size_t level,
                               const std::vector<std::string>& prior_answers) {
    if (level < 1 || level > instance.per_level.size()) {
        throw std::out_of_range("build_step_prompt: level " + std::to_string(level) + " outside 1.." +
                                std::to_string(instance.per_level.size()));
    }
    if (prior_answers.size() != level - 1) {
        throw std::invalid_argument("build_step_prompt: level " + std::to_string(level) + " needs " +
                                    std::to_string(level - 1) + " prior answers, got " +
                                    std::to_string(prior_answers.size()));
    }
    return step_bundle(instance.per_level[level - 1], prior_answers);
}

PromptBundle build_independent_prompt(const VqaInstance& instance, std::size_t level) {
    if (level < 1 || level > instance.per_level.size()) {
        throw std::out_of_range("build_independent_prompt: level " + std::to_string(level) + " outside 1.." +
                                std::to_string(instance.per_level.size()));
    }
    return step_bundle(instance.per_level[level - 1], {});
}

PromptBundle step_bundle(const LevelQuestion& q, const std::vector<std::string>& prior_answers) {
    PromptBundle bundle;
    bundle.text = fill(kStepTemplate, {{"known_facts", render_known_facts(prior_answers)},
                                       {"level", q.level_name},
                                       {"question", q.question_text},
                                       {"options", render_options(q)}});
    bundle.expected_letters = 1;
    bundle.letter_vocabulary.emplace_back(q.letters());
    return bundle;
}

ParsedAnswer parse_joint_answer(std::string_view raw, std::size_t expected, const ParseOptions& options) {
    return parse_joint_answer(raw, std::vector<std::string>(expected, std::string(kOptionLetters)), options);
}

ParsedAnswer parse_joint_answer(std::string_view raw, const std::vector<std::string>& vocabulary,
                                const ParseOptions& options) {
    if (vocabulary.empty()) throw std::invalid_argument("parse_joint_answer: expected >= 1 letters");
    const auto found = scan_letters(raw, options, vocabulary.size());
    std::vector<Letter> letters(vocabulary.size());
    for (std::size_t i = 0; i < found.size(); ++i) {
        if (vocabulary[i].find(found[i]) != std::string::npos) letters[i] = found[i];
    }
    return finish(raw, std::move(letters));
}

ParsedAnswer parse_step_answer(std::string_view raw, std::string_view vocabulary, const ParseOptions& options) {
    return parse_joint_answer(raw, std::vector<std::string>{std::string(vocabulary)}, options);
}

std::string render_letters(const std::vector<Letter>& letters) {
    std::string out;
    for (std::size_t i = 0; i < letters.size(); ++i) {
        if (i > 0) out += ' ';
        out += letters[i].value_or('?');
    }
    return out;
}

}  // namespace hvqa
