#pragma once

#include "finqa/errors.hpp"
#include "finqa/pipeline.hpp"
#include "finqa/questions.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace finqa::eval {

struct RunConfig {
    std::vector<pipeline::Mode> modes;
    std::string backend_name;
    int concurrency = 4;
    long long seed = 0;
    std::string output_path;
    std::string trace_path;   // empty = traces not persisted
    bool resume = true;
};

struct QuestionResult {
    std::string question_id;
    pipeline::Mode mode = pipeline::Mode::M0;
    std::string category;
    std::optional<qbank::Letter> predicted;   // empty when invalid or errored
    bool invalid = false;                     // completed but no parseable letter
    bool correct = false;
    long long calls = 0;
    long long prompt_tokens = 0;
    long long completion_tokens = 0;
    std::string trace_ref;
    std::optional<std::string> error;

    std::string to_json_line() const;
    static QuestionResult from_json_line(const std::string& line);   // throws SchemaError
};

struct ModeStats {
    long long completed = 0;   // non-errored attempts (invalid included)
    long long correct = 0;
    long long invalid = 0;
    long long errored = 0;
    long long calls = 0;            // over completed attempts only
    long long prompt_tokens = 0;
    long long completion_tokens = 0;

    double accuracy() const { return completed > 0 ? static_cast<double>(correct) / static_cast<double>(completed) : 0.0; }
};

struct EvalReport {
    std::vector<pipeline::Mode> modes;                       // present, M0..M3 order
    std::map<pipeline::Mode, ModeStats> overall;
    std::vector<std::string> categories;                     // canonical order first
    std::map<std::string, std::map<pipeline::Mode, ModeStats>> per_category;
    std::optional<double> gain;                              // fraction, M3 - M0
    bool gain_incomplete = false;                            // a single-mode file, etc.
};

/// Runs every question once per requested mode under a bounded worker pool,
/// streaming one JSONL result per completed item. With resume on, (question,
/// mode) pairs already in the output file are skipped, and the final report
/// is computed from the persisted file either way.
EvalReport evaluate(const qbank::QuestionSet& set, const RunConfig& config,
                    const pipeline::Deps& deps);

/// Deterministic aggregation of a results file. Throws SchemaError on an
/// empty or malformed file.
EvalReport aggregate(const std::string& results_path);

/// format is "text", "csv", or "svg"; anything else raises UnsupportedFormat.
std::string render_report(const EvalReport& report, const std::string& format);

} // namespace finqa::eval
