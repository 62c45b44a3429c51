#include "finqa/eval.hpp"

#include "finqa/roles.hpp"
#include "finqa/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

namespace finqa::eval {

using nlohmann::json;
using pipeline::Mode;

// ---------------------------------------------------------------------------
// Result line (de)serialization

std::string QuestionResult::to_json_line() const {
    json j;
    j["qid"] = question_id;
    j["mode"] = pipeline::mode_name(mode);
    j["category"] = category;
    if (error) {
        j["predicted"] = nullptr;
    } else if (invalid) {
        j["predicted"] = "invalid";
    } else {
        j["predicted"] = std::string(1, qbank::letter_char(*predicted));
    }
    j["correct"] = correct;
    j["calls"] = calls;
    j["prompt_tokens"] = prompt_tokens;
    j["completion_tokens"] = completion_tokens;
    j["trace"] = trace_ref;
    j["error"] = error ? json(*error) : json(nullptr);
    return j.dump();
}

QuestionResult QuestionResult::from_json_line(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& ex) {
        throw SchemaError("result line is not valid JSON: " + std::string(ex.what()));
    }
    if (!j.is_object() || !j.contains("qid") || !j.contains("mode")) {
        throw SchemaError("result line missing qid/mode");
    }
    QuestionResult r;
    r.question_id = j["qid"].get<std::string>();
    r.mode = pipeline::mode_from_name(j["mode"].get<std::string>());
    r.category = j.value("category", "");
    r.correct = j.value("correct", false);
    r.calls = j.value("calls", 0LL);
    r.prompt_tokens = j.value("prompt_tokens", 0LL);
    r.completion_tokens = j.value("completion_tokens", 0LL);
    r.trace_ref = j.value("trace", "");
    if (j.contains("error") && !j["error"].is_null()) {
        r.error = j["error"].get<std::string>();
    }
    if (!j.contains("predicted")) throw SchemaError("result line missing predicted");
    if (j["predicted"].is_null()) {
        if (!r.error) throw SchemaError("null prediction without error");
    } else {
        std::string p = j["predicted"].get<std::string>();
        if (p == "invalid") {
            r.invalid = true;
        } else if (p.size() == 1 && p[0] >= 'A' && p[0] <= 'D') {
            r.predicted = qbank::letter_from_char(p[0]);
        } else {
            throw SchemaError("bad predicted value '" + p + "'");
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Evaluate

namespace {

bool is_header_line(const std::string& line) {
    if (line.empty() || line[0] != '{') return false;
    try {
        json j = json::parse(line);
        return j.is_object() && j.contains("schema") &&
               j["schema"].get<std::string>().rfind("finqa.results", 0) == 0;
    } catch (const json::exception&) {
        return false;
    }
}

std::string header_line(const RunConfig& config) {
    json j;
    j["schema"] = "finqa.results/1";
    j["backend"] = config.backend_name;
    json modes = json::array();
    for (Mode m : config.modes) modes.push_back(pipeline::mode_name(m));
    j["modes"] = std::move(modes);
    j["seed"] = config.seed;
    j["created_at_ms"] = util::wall_ms();
    return j.dump();
}

struct ResumeState {
    std::set<std::pair<std::string, std::string>> done;   // (qid, mode)
    bool file_exists = false;
};

// Reads an existing results file, drops a trailing partial line if the
// previous run was cut off mid-write, and returns the completed pairs.
ResumeState scan_existing(const std::string& path) {
    ResumeState state;
    if (!std::filesystem::exists(path)) return state;
    state.file_exists = true;

    std::string content = util::read_file(path);
    std::vector<std::string> good_lines;
    bool needs_rewrite = false;

    size_t pos = 0;
    while (pos < content.size()) {
        size_t eol = content.find('\n', pos);
        if (eol == std::string::npos) {
            needs_rewrite = true;   // partial trailing line
            break;
        }
        std::string line = content.substr(pos, eol - pos);
        pos = eol + 1;
        if (line.empty()) continue;
        if (is_header_line(line)) {
            good_lines.push_back(line);
            continue;
        }
        try {
            QuestionResult r = QuestionResult::from_json_line(line);
            state.done.emplace(r.question_id, pipeline::mode_name(r.mode));
            good_lines.push_back(line);
        } catch (const SchemaError&) {
            needs_rewrite = true;
            break;
        }
    }

    if (needs_rewrite) {
        std::string rewritten;
        for (const auto& line : good_lines) {
            rewritten += line;
            rewritten += '\n';
        }
        util::write_file(path, rewritten);
    }
    return state;
}

struct WorkItem {
    const qbank::Question* question;
    Mode mode;
};

} // namespace

EvalReport evaluate(const qbank::QuestionSet& set, const RunConfig& config,
                    const pipeline::Deps& deps) {
    if (config.modes.empty()) throw MissingDependencyError("no modes requested");
    if (config.output_path.empty()) throw MissingDependencyError("output path required");
    if (config.concurrency < 1) throw MissingDependencyError("concurrency must be >= 1");
    if (deps.backend == nullptr) throw MissingDependencyError("evaluate requires a backend");
    if (deps.registry == nullptr) throw MissingDependencyError("evaluate requires a role registry");
    for (Mode m : config.modes) {
        if ((m == Mode::M1 || m == Mode::M3) && (deps.index == nullptr || deps.provider == nullptr)) {
            throw MissingDependencyError(std::string(pipeline::mode_name(m)) +
                                         " requested without an index/provider");
        }
    }

    ResumeState resume;
    if (config.resume) resume = scan_existing(config.output_path);

    std::ofstream out(config.output_path, std::ios::app);
    if (!out) throw IoError("cannot open results file: " + config.output_path);
    if (!resume.file_exists) {
        out << header_line(config) << "\n";
        out.flush();
    }

    std::ofstream trace_out;
    if (!config.trace_path.empty()) {
        trace_out.open(config.trace_path, std::ios::app);
        if (!trace_out) throw IoError("cannot open trace file: " + config.trace_path);
    }

    // Deterministic work order: modes in request order, questions in set
    // order. At concurrency 1 the results file order matches it exactly.
    std::vector<WorkItem> items;
    for (Mode mode : config.modes) {
        for (const auto& q : set.questions) {
            if (resume.done.count({q.id, pipeline::mode_name(mode)}) > 0) continue;
            items.push_back({&q, mode});
        }
    }

    std::mutex writer_mutex;
    std::atomic<size_t> next{0};

    auto worker = [&]() {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= items.size()) return;
            const WorkItem& item = items[i];

            QuestionResult result;
            result.question_id = item.question->id;
            result.mode = item.mode;
            result.trace_ref = item.question->id + ":" + pipeline::mode_name(item.mode);
            try {
                result.category = deps.registry->category_of(item.question->topic);
            } catch (const UnknownTopicError&) {
                result.category = "Unregistered";
            }

            std::string trace_json;
            try {
                pipeline::PipelineTrace trace = pipeline::run(*item.question, item.mode, deps);
                result.calls = static_cast<long long>(trace.calls.size());
                for (const auto& call : trace.calls) {
                    result.prompt_tokens += call.prompt_tokens;
                    result.completion_tokens += call.completion_tokens;
                }
                if (trace.final_output.answer) {
                    result.predicted = trace.final_output.answer;
                    result.correct = *result.predicted == item.question->ground_truth;
                } else {
                    result.invalid = true;
                    result.correct = false;
                }
                trace_json = trace.to_json();
            } catch (const pipeline::PipelineRunError& e) {
                result.error = e.what();
                result.calls = static_cast<long long>(e.completed_calls().size());
                for (const auto& call : e.completed_calls()) {
                    result.prompt_tokens += call.prompt_tokens;
                    result.completion_tokens += call.completion_tokens;
                }
            } catch (const Error& e) {
                result.error = e.what();
            }

            std::lock_guard<std::mutex> lock(writer_mutex);
            out << result.to_json_line() << "\n";
            out.flush();
            if (trace_out.is_open() && !trace_json.empty()) {
                trace_out << trace_json << "\n";
                trace_out.flush();
            }
        }
    };

    int thread_count = std::min<int>(config.concurrency, static_cast<int>(items.size()));
    if (thread_count <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<size_t>(thread_count));
        for (int t = 0; t < thread_count; ++t) threads.emplace_back(worker);
        for (auto& thread : threads) thread.join();
    }
    out.flush();

    return aggregate(config.output_path);
}

// ---------------------------------------------------------------------------
// Aggregate

EvalReport aggregate(const std::string& results_path) {
    std::vector<std::string> lines = util::read_lines(results_path);

    std::vector<QuestionResult> results;
    size_t line_no = 0;
    for (const auto& line : lines) {
        ++line_no;
        if (line.empty()) continue;
        if (is_header_line(line)) continue;
        try {
            results.push_back(QuestionResult::from_json_line(line));
        } catch (const SchemaError& e) {
            throw SchemaError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (results.empty()) throw SchemaError("results file has no result lines: " + results_path);

    EvalReport report;
    std::set<Mode> seen_modes;
    for (const auto& r : results) seen_modes.insert(r.mode);
    report.modes.assign(seen_modes.begin(), seen_modes.end());

    auto add = [](ModeStats& stats, const QuestionResult& r) {
        if (r.error) {
            ++stats.errored;
            return;
        }
        ++stats.completed;
        if (r.correct) ++stats.correct;
        if (r.invalid) ++stats.invalid;
        stats.calls += r.calls;
        stats.prompt_tokens += r.prompt_tokens;
        stats.completion_tokens += r.completion_tokens;
    };

    std::set<std::string> seen_categories;
    for (const auto& r : results) {
        add(report.overall[r.mode], r);
        std::string category = r.category.empty() ? "Unregistered" : r.category;
        seen_categories.insert(category);
        add(report.per_category[category][r.mode], r);
    }

    // Canonical category order first, anything else alphabetically after.
    for (const auto& c : roles::RoleRegistry::canonical_categories()) {
        if (seen_categories.erase(c) > 0) report.categories.push_back(c);
    }
    for (const auto& c : seen_categories) report.categories.push_back(c);

    bool has_m0 = report.overall.count(Mode::M0) > 0;
    bool has_m3 = report.overall.count(Mode::M3) > 0;
    if (has_m0 && has_m3) {
        report.gain = report.overall[Mode::M3].accuracy() - report.overall[Mode::M0].accuracy();
    } else {
        report.gain_incomplete = true;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

std::string pct(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", fraction * 100.0);
    return buf;
}

std::string pct_signed(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%+.2f", fraction * 100.0);
    return buf;
}

std::string display_mode(Mode mode) {
    switch (mode) {
        case Mode::M0: return "M-0";
        case Mode::M1: return "M-1";
        case Mode::M2: return "M-2";
        case Mode::M3: return "M-3";
    }
    return "M-0";
}

const ModeStats* stats_for(const std::map<Mode, ModeStats>& by_mode, Mode mode) {
    auto it = by_mode.find(mode);
    return it == by_mode.end() ? nullptr : &it->second;
}

std::string render_text(const EvalReport& report) {
    const int name_width = 42;
    std::string out;

    auto pad = [](std::string s, size_t width) {
        if (s.size() < width) s += std::string(width - s.size(), ' ');
        return s;
    };
    auto rpad = [](std::string s, size_t width) {
        if (s.size() < width) s = std::string(width - s.size(), ' ') + s;
        return s;
    };

    out += pad("Category", name_width);
    for (Mode m : report.modes) out += rpad(display_mode(m), 9);
    if (report.gain) out += rpad("Gain", 9);
    out += "\n";
    out += std::string(name_width + report.modes.size() * 9 + (report.gain ? 9 : 0), '-') + "\n";

    for (const auto& category : report.categories) {
        out += pad(category, name_width);
        const auto& by_mode = report.per_category.at(category);
        for (Mode m : report.modes) {
            const ModeStats* stats = stats_for(by_mode, m);
            out += rpad(stats && stats->completed > 0 ? pct(stats->accuracy()) : "-", 9);
        }
        if (report.gain) {
            const ModeStats* m0 = stats_for(by_mode, Mode::M0);
            const ModeStats* m3 = stats_for(by_mode, Mode::M3);
            if (m0 && m3 && m0->completed > 0 && m3->completed > 0) {
                out += rpad(pct_signed(m3->accuracy() - m0->accuracy()), 9);
            } else {
                out += rpad("-", 9);
            }
        }
        out += "\n";
    }

    out += pad("Overall", name_width);
    for (Mode m : report.modes) {
        const ModeStats* stats = stats_for(report.overall, m);
        out += rpad(stats ? pct(stats->accuracy()) : "-", 9);
    }
    if (report.gain) out += rpad(pct_signed(*report.gain), 9);
    out += "\n\n";

    for (Mode m : report.modes) {
        const ModeStats& stats = report.overall.at(m);
        out += display_mode(m) + ": " + std::to_string(stats.completed) + " completed, " +
               std::to_string(stats.calls) + " calls, " +
               std::to_string(stats.prompt_tokens + stats.completion_tokens) + " tokens (" +
               std::to_string(stats.prompt_tokens) + " prompt / " +
               std::to_string(stats.completion_tokens) + " completion), " +
               std::to_string(stats.invalid) + " invalid, " + std::to_string(stats.errored) +
               " errored\n";
    }
    if (report.gain_incomplete) {
        out += "gain: incomplete (requires both M-0 and M-3 results)\n";
    }
    return out;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

std::string render_csv(const EvalReport& report) {
    std::string out = "category";
    for (Mode m : report.modes) out += "," + display_mode(m);
    if (report.gain) out += ",gain";
    out += "\n";

    auto row = [&](const std::string& name, const std::map<Mode, ModeStats>& by_mode) {
        out += csv_escape(name);
        for (Mode m : report.modes) {
            const ModeStats* stats = stats_for(by_mode, m);
            out += ",";
            out += stats && stats->completed > 0 ? pct(stats->accuracy()) : "";
        }
        if (report.gain) {
            const ModeStats* m0 = stats_for(by_mode, Mode::M0);
            const ModeStats* m3 = stats_for(by_mode, Mode::M3);
            out += ",";
            if (m0 && m3 && m0->completed > 0 && m3->completed > 0) {
                out += pct_signed(m3->accuracy() - m0->accuracy());
            }
        }
        out += "\n";
    };

    for (const auto& category : report.categories) row(category, report.per_category.at(category));
    row("overall", report.overall);
    return out;
}

std::string render_svg(const EvalReport& report) {
    const double bar_width = 16.0;
    const double bar_gap = 3.0;
    const double group_gap = 28.0;
    const double left = 56.0;
    const double top = 24.0;
    const double plot_height = 280.0;
    const size_t mode_count = report.modes.size();

    const char* palette[4] = {"#9e9e9e", "#8bb8e8", "#f2b267", "#7fbf7f"};

    double group_width = mode_count * bar_width + (mode_count - 1) * bar_gap;
    double width = left + report.categories.size() * (group_width + group_gap) + 24.0;
    double height = top + plot_height + 96.0;

    std::string out;
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                  "viewBox=\"0 0 %.0f %.0f\" font-family=\"sans-serif\" font-size=\"10\">\n",
                  width, height, width, height);
    out += buf;

    // Y axis with gridlines every 20%.
    for (int tick = 0; tick <= 100; tick += 20) {
        double y = top + plot_height * (1.0 - tick / 100.0);
        std::snprintf(buf, sizeof(buf),
                      "  <line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                      "stroke=\"#dddddd\"/>\n",
                      left, y, width - 12.0, y);
        out += buf;
        std::snprintf(buf, sizeof(buf),
                      "  <text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%d%%</text>\n",
                      left - 6.0, y + 3.0, tick);
        out += buf;
    }

    double x = left;
    for (const auto& category : report.categories) {
        std::snprintf(buf, sizeof(buf), "  <g class=\"bar-group\" data-category=\"%s\">\n",
                      category.c_str());
        out += buf;
        const auto& by_mode = report.per_category.at(category);
        for (size_t i = 0; i < report.modes.size(); ++i) {
            Mode m = report.modes[i];
            const ModeStats* stats = stats_for(by_mode, m);
            double accuracy = stats && stats->completed > 0 ? stats->accuracy() : 0.0;
            double h = plot_height * accuracy;
            double bx = x + i * (bar_width + bar_gap);
            std::snprintf(buf, sizeof(buf),
                          "    <rect class=\"bar mode-%s\" x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" "
                          "height=\"%.1f\" fill=\"%s\"/>\n",
                          pipeline::mode_name(m), bx, top + plot_height - h, bar_width, h,
                          palette[static_cast<int>(m) % 4]);
            out += buf;
        }
        std::snprintf(buf, sizeof(buf),
                      "    <text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\" "
                      "transform=\"rotate(-35 %.1f %.1f)\">%s</text>\n",
                      x + group_width / 2.0, top + plot_height + 14.0, x + group_width / 2.0,
                      top + plot_height + 14.0, category.c_str());
        out += buf;
        out += "  </g>\n";
        x += group_width + group_gap;
    }

    // Legend.
    double lx = left;
    for (size_t i = 0; i < report.modes.size(); ++i) {
        Mode m = report.modes[i];
        std::snprintf(buf, sizeof(buf),
                      "  <rect x=\"%.1f\" y=\"%.1f\" width=\"10\" height=\"10\" fill=\"%s\"/>\n",
                      lx, height - 18.0, palette[static_cast<int>(m) % 4]);
        out += buf;
        std::snprintf(buf, sizeof(buf), "  <text x=\"%.1f\" y=\"%.1f\">%s</text>\n", lx + 14.0,
                      height - 9.0, display_mode(m).c_str());
        out += buf;
        lx += 64.0;
    }

    out += "</svg>\n";
    return out;
}

} // namespace

std::string render_report(const EvalReport& report, const std::string& format) {
    if (format == "text") return render_text(report);
    if (format == "csv") return render_csv(report);
    if (format == "svg") return render_svg(report);
    throw UnsupportedFormatError("unsupported report format '" + format +
                                 "' (expected text, csv, or svg)");
}

} // namespace finqa::eval
