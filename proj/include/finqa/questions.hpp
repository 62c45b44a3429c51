#pragma once

#include "finqa/errors.hpp"
#include "finqa/gateway.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace finqa::qbank {

enum class Letter { A, B, C, D };

char letter_char(Letter letter);
Letter letter_from_char(char c);   // throws SchemaError for anything outside A-D
int letter_index(Letter letter);

struct Question {
    std::string id;
    std::string topic;
    std::string stem;
    std::array<std::string, 4> options;   // indexed A..D
    Letter ground_truth = Letter::A;
    std::optional<std::string> hint;
    std::optional<std::string> explanation;

    const std::string& option(Letter letter) const { return options[static_cast<size_t>(letter_index(letter))]; }
};

struct QuestionSet {
    std::string name;
    std::string source;
    std::vector<Question> questions;
};

struct TableSpec {
    std::optional<std::string> caption;
    std::vector<std::string> column_names;
    std::vector<std::vector<std::string>> rows;
};

/// Accepts either a bare JSON array of questions or an object
/// {name, source, questions}. Violations raise SchemaError with a
/// JSON-pointer-style locator; duplicate ids raise DuplicateIdError.
QuestionSet load_question_set(const std::string& path);
QuestionSet parse_question_set(const std::string& json_text, const std::string& set_name);
void save_question_set(const QuestionSet& set, const std::string& path);

/// One bullet per row. Two-column rows render "• label: value"; wider rows
/// join the remaining cells as "column: value" pairs.
std::string linearize_table(const TableSpec& table);

/// Collision-check canonical form: trimmed, case-folded, '$' and ',' stripped,
/// whitespace collapsed, and trailing thousand/million unit words folded into
/// the number. Never used for display.
std::string normalize_answer(std::string_view text);

struct ConversionMeta {
    std::string id;
    std::string topic;
    std::optional<std::string> hint;
    std::optional<std::string> explanation;
};

struct ConversionRecord {
    Question question;
    std::vector<std::string> distractors;   // as returned, in reply order
    int attempts = 1;
};

/// One chat call asking for exactly 3 distractors similar to the correct
/// answer, one deterministic seeded shuffle of the 4 options. A normalized
/// collision triggers a single retry call, then DistractorCollisionError.
ConversionRecord convert_to_mcq(gateway::ChatBackend& backend, const std::string& stem,
                                const std::string& correct_answer, long long seed,
                                const ConversionMeta& meta = {},
                                const gateway::RetryPolicy& retry = {});

} // namespace finqa::qbank
