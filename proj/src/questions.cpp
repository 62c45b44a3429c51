#include "finqa/questions.hpp"

#include "finqa/util.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <random>
#include <regex>
#include <set>

namespace finqa::qbank {

using nlohmann::json;

char letter_char(Letter letter) {
    return static_cast<char>('A' + letter_index(letter));
}

Letter letter_from_char(char c) {
    switch (c) {
        case 'A': return Letter::A;
        case 'B': return Letter::B;
        case 'C': return Letter::C;
        case 'D': return Letter::D;
        default: throw SchemaError(std::string("invalid option letter '") + c + "'");
    }
}

int letter_index(Letter letter) {
    return static_cast<int>(letter);
}

// ---------------------------------------------------------------------------
// Loading

namespace {

Question parse_question(const json& item, const std::string& pointer) {
    if (!item.is_object()) throw SchemaError(pointer + ": question must be an object");
    Question q;

    q.id = item.value("id", "");
    if (q.id.empty()) throw SchemaError(pointer + "/id: required non-empty string");
    q.topic = item.value("topic", "");
    if (q.topic.empty()) throw SchemaError(pointer + "/topic: required non-empty string");
    q.stem = item.value("stem", "");
    if (q.stem.empty()) throw SchemaError(pointer + "/stem: required non-empty string");

    if (!item.contains("options") || !item["options"].is_object()) {
        throw SchemaError(pointer + "/options: required object with keys A-D");
    }
    const auto& options = item["options"];
    if (options.size() != 4) {
        throw SchemaError(pointer + "/options: expected exactly 4 options, got " +
                          std::to_string(options.size()) + " (question " + q.id + ")");
    }
    for (char c = 'A'; c <= 'D'; ++c) {
        std::string key(1, c);
        if (!options.contains(key) || !options[key].is_string() ||
            options[key].get<std::string>().empty()) {
            throw SchemaError(pointer + "/options/" + key + ": required non-empty string (question " +
                              q.id + ")");
        }
        q.options[static_cast<size_t>(c - 'A')] = options[key].get<std::string>();
    }
    for (int i = 0; i < 4; ++i) {
        for (int j = i + 1; j < 4; ++j) {
            if (q.options[static_cast<size_t>(i)] == q.options[static_cast<size_t>(j)]) {
                throw SchemaError(pointer + "/options: options " + std::string(1, char('A' + i)) +
                                  " and " + std::string(1, char('A' + j)) +
                                  " are identical (question " + q.id + ")");
            }
        }
    }

    std::string truth = item.value("ground_truth", "");
    if (truth.size() != 1 || truth[0] < 'A' || truth[0] > 'D') {
        throw SchemaError(pointer + "/ground_truth: must be one of A, B, C, D (question " + q.id +
                          ")");
    }
    q.ground_truth = letter_from_char(truth[0]);

    if (item.contains("hint") && !item["hint"].is_null()) {
        if (!item["hint"].is_string()) throw SchemaError(pointer + "/hint: must be a string");
        q.hint = item["hint"].get<std::string>();
    }
    if (item.contains("explanation") && !item["explanation"].is_null()) {
        if (!item["explanation"].is_string()) {
            throw SchemaError(pointer + "/explanation: must be a string");
        }
        q.explanation = item["explanation"].get<std::string>();
    }
    return q;
}

} // namespace

QuestionSet parse_question_set(const std::string& json_text, const std::string& set_name) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::exception& ex) {
        throw SchemaError("question set is not valid JSON: " + std::string(ex.what()));
    }

    QuestionSet set;
    set.name = set_name;
    const json* questions = nullptr;
    std::string prefix;
    if (root.is_array()) {
        questions = &root;
        prefix = "";
    } else if (root.is_object() && root.contains("questions") && root["questions"].is_array()) {
        set.name = root.value("name", set_name);
        set.source = root.value("source", "");
        questions = &root["questions"];
        prefix = "/questions";
    } else {
        throw SchemaError("question set must be a JSON array or an object with a 'questions' array");
    }

    std::set<std::string> seen;
    size_t i = 0;
    for (const auto& item : *questions) {
        Question q = parse_question(item, prefix + "/" + std::to_string(i));
        if (!seen.insert(q.id).second) {
            throw DuplicateIdError("duplicate question id '" + q.id + "'");
        }
        set.questions.push_back(std::move(q));
        ++i;
    }
    return set;
}

QuestionSet load_question_set(const std::string& path) {
    std::string name = path;
    size_t slash = name.find_last_of("/\\");
    if (slash != std::string::npos) name = name.substr(slash + 1);
    size_t dot = name.find_last_of('.');
    if (dot != std::string::npos) name = name.substr(0, dot);
    QuestionSet set = parse_question_set(util::read_file(path), name);
    if (set.source.empty()) set.source = path;
    return set;
}

void save_question_set(const QuestionSet& set, const std::string& path) {
    json root;
    root["name"] = set.name;
    root["source"] = set.source;
    json questions = json::array();
    for (const auto& q : set.questions) {
        json item;
        item["id"] = q.id;
        item["topic"] = q.topic;
        item["stem"] = q.stem;
        json options;
        for (int i = 0; i < 4; ++i) {
            options[std::string(1, static_cast<char>('A' + i))] = q.options[static_cast<size_t>(i)];
        }
        item["options"] = std::move(options);
        item["ground_truth"] = std::string(1, letter_char(q.ground_truth));
        if (q.hint) item["hint"] = *q.hint;
        if (q.explanation) item["explanation"] = *q.explanation;
        questions.push_back(std::move(item));
    }
    root["questions"] = std::move(questions);
    util::write_file(path, root.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Table linearization

std::string linearize_table(const TableSpec& table) {
    if (table.rows.empty()) throw EmptyTableError("table has no rows");
    for (size_t r = 0; r < table.rows.size(); ++r) {
        if (table.rows[r].size() != table.column_names.size()) {
            throw SchemaError("table row " + std::to_string(r) + " has " +
                              std::to_string(table.rows[r].size()) + " cells, expected " +
                              std::to_string(table.column_names.size()));
        }
    }

    std::string out;
    if (table.caption && !table.caption->empty()) {
        out += *table.caption;
        out += "\n";
    }
    for (size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        out += "\xe2\x80\xa2 ";   // •
        if (row.size() == 1) {
            out += row[0];
        } else if (row.size() == 2) {
            out += row[0] + ": " + row[1];
        } else {
            out += row[0] + ": ";
            for (size_t c = 1; c < row.size(); ++c) {
                if (c > 1) out += ", ";
                out += table.column_names[c] + ": " + row[c];
            }
        }
        if (r + 1 < table.rows.size()) out += "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Normalization

std::string normalize_answer(std::string_view text) {
    std::string stripped;
    stripped.reserve(text.size());
    for (char c : text) {
        if (c == '$' || c == ',') continue;
        stripped.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    // Collapse runs of whitespace and trim.
    std::string collapsed;
    bool pending_space = false;
    for (char c : stripped) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !collapsed.empty();
        } else {
            if (pending_space) collapsed.push_back(' ');
            pending_space = false;
            collapsed.push_back(c);
        }
    }

    static const std::regex unit_pattern(R"(^(\d+(?:\.\d+)?) (thousand|million)$)");
    std::smatch match;
    if (std::regex_match(collapsed, match, unit_pattern)) {
        long double value = std::strtold(match[1].str().c_str(), nullptr);
        value *= match[2].str() == "thousand" ? 1000.0L : 1000000.0L;
        char buf[64];
        if (std::fabs(value - std::round(value)) < 1e-6L) {
            std::snprintf(buf, sizeof(buf), "%.0Lf", value);
        } else {
            std::snprintf(buf, sizeof(buf), "%.12Lg", value);
        }
        return buf;
    }
    return collapsed;
}

// ---------------------------------------------------------------------------
// MCQ conversion

namespace {

const std::regex kMoneyPattern(R"(^\$\d{1,3}(,\d{3})*(\.\d+)?$)");
const std::regex kPlainNumber(R"(^\d+(\.\d+)?$)");

std::string group_thousands(const std::string& digits) {
    size_t dot = digits.find('.');
    std::string integer = dot == std::string::npos ? digits : digits.substr(0, dot);
    std::string fraction = dot == std::string::npos ? "" : digits.substr(dot);
    std::string grouped;
    int count = 0;
    for (size_t i = integer.size(); i-- > 0;) {
        grouped.insert(grouped.begin(), integer[i]);
        if (++count == 3 && i > 0) {
            grouped.insert(grouped.begin(), ',');
            count = 0;
        }
    }
    return grouped + fraction;
}

// When the correct answer is numeric but not money-formatted while every
// distractor is, re-render it in the distractors' style so the option set
// reads uniformly. The normalized form itself is never shown.
std::string harmonize_display(const std::string& correct,
                              const std::vector<std::string>& distractors) {
    if (std::regex_match(correct, kMoneyPattern)) return correct;
    for (const auto& d : distractors) {
        if (!std::regex_match(d, kMoneyPattern)) return correct;
    }
    std::string normalized = normalize_answer(correct);
    if (!std::regex_match(normalized, kPlainNumber)) return correct;
    return "$" + group_thousands(normalized);
}

std::vector<std::string> request_distractors(gateway::ChatBackend& backend,
                                             const std::string& stem,
                                             const std::string& correct_answer,
                                             const std::string& tag,
                                             const gateway::RetryPolicy& retry) {
    gateway::ChatRequest request;
    request.model = backend.profile().model;
    request.tag = tag;
    request.messages = {{gateway::Role::User,
                         "Propose exactly 3 distractor options for the finance question below. "
                         "Each distractor must be incorrect but reasonably similar to the correct "
                         "answer in form and magnitude. Return only a numbered list with one "
                         "distractor per line.\n\nQuestion: " +
                             stem + "\n\nCorrect answer: " + correct_answer}};
    gateway::ChatResponse response = gateway::complete(backend, request, retry);
    std::vector<std::string> items = util::parse_list_items(response.content);
    if (items.size() != 3) {
        throw MalformedDistractorsError("expected 3 distractors, parsed " +
                                        std::to_string(items.size()));
    }
    return items;
}

bool has_collision(const std::string& correct, const std::vector<std::string>& distractors) {
    std::set<std::string> seen{normalize_answer(correct)};
    for (const auto& d : distractors) {
        if (!seen.insert(normalize_answer(d)).second) return true;
    }
    return false;
}

} // namespace

ConversionRecord convert_to_mcq(gateway::ChatBackend& backend, const std::string& stem,
                                const std::string& correct_answer, long long seed,
                                const ConversionMeta& meta, const gateway::RetryPolicy& retry) {
    if (correct_answer.empty()) throw InvalidRequestError("correct_answer must be non-empty");

    std::string base_id = meta.id.empty() ? "mcq-" + util::hex_digest(stem) : meta.id;

    ConversionRecord record;
    std::vector<std::string> distractors =
        request_distractors(backend, stem, correct_answer, "MCQ:" + base_id + ":0", retry);
    if (has_collision(correct_answer, distractors)) {
        record.attempts = 2;
        distractors =
            request_distractors(backend, stem, correct_answer, "MCQ:" + base_id + ":1", retry);
        if (has_collision(correct_answer, distractors)) {
            throw DistractorCollisionError("distractors collide with the answer or each other "
                                           "after retry (question " +
                                           base_id + ")");
        }
    }
    record.distractors = distractors;

    std::array<std::string, 4> texts = {harmonize_display(correct_answer, distractors),
                                        distractors[0], distractors[1], distractors[2]};
    // Seeded Fisher-Yates, hand-rolled so the permutation is identical across
    // platforms and standard libraries.
    std::array<int, 4> order = {0, 1, 2, 3};
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    for (int i = 3; i > 0; --i) {
        int j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
        std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
    }

    Question q;
    q.id = base_id;
    q.topic = meta.topic;
    q.stem = stem;
    q.hint = meta.hint;
    q.explanation = meta.explanation;
    for (int slot = 0; slot < 4; ++slot) {
        int source = order[static_cast<size_t>(slot)];
        q.options[static_cast<size_t>(slot)] = texts[static_cast<size_t>(source)];
        if (source == 0) q.ground_truth = static_cast<Letter>(slot);
    }
    record.question = std::move(q);
    return record;
}

} // namespace finqa::qbank
