#include "finqa/agents.hpp"
#include "finqa/corpus.hpp"
#include "finqa/errors.hpp"
#include "finqa/eval.hpp"
#include "finqa/gateway.hpp"
#include "finqa/pipeline.hpp"
#include "finqa/questions.hpp"
#include "finqa/roles.hpp"
#include "finqa/util.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <memory>

namespace {

using nlohmann::json;
using namespace finqa;

// Exit codes: 0 success, 1 usage, 2 dependency/config, 3 runtime.
constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct GlobalOptions {
    bool json_errors = false;
};

void print_error(const GlobalOptions& global, const char* kind, const std::string& message) {
    if (global.json_errors) {
        json j;
        j["error"] = {{"type", kind}, {"message", message}};
        std::cerr << j.dump() << "\n";
    } else {
        std::cerr << "error: " << message << "\n";
    }
}

bool is_config_class_error(const Error& e) {
    return dynamic_cast<const MissingDependencyError*>(&e) != nullptr ||
           dynamic_cast<const SchemaError*>(&e) != nullptr ||
           dynamic_cast<const UnknownTopicError*>(&e) != nullptr ||
           dynamic_cast<const EmptyCorpusError*>(&e) != nullptr ||
           dynamic_cast<const EmptyDocumentError*>(&e) != nullptr ||
           dynamic_cast<const CorruptIndexError*>(&e) != nullptr ||
           dynamic_cast<const IoError*>(&e) != nullptr ||
           dynamic_cast<const UnsupportedFormatError*>(&e) != nullptr;
}

template <typename Fn>
int run_guarded(const GlobalOptions& global, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        print_error(global, e.kind(), e.what());
        return is_config_class_error(e) ? kExitConfig : kExitRuntime;
    } catch (const std::exception& e) {
        print_error(global, "Unexpected", e.what());
        return kExitRuntime;
    }
}

// ---------------------------------------------------------------------------
// Shared option bundles

struct BackendOptions {
    std::string backend_name;
    std::string config_path;
    std::string script_path;
};

void add_backend_options(CLI::App* cmd, BackendOptions& opts) {
    cmd->add_option("--backend", opts.backend_name,
                    "Backend profile name from --config, or 'scripted' with --script");
    cmd->add_option("--config", opts.config_path, "Backend config JSON file");
    cmd->add_option("--script", opts.script_path,
                    "Scripted replies JSON file (tag -> text) for offline runs");
}

std::unique_ptr<gateway::ChatBackend> make_backend(const BackendOptions& opts) {
    if (!opts.script_path.empty() || opts.backend_name == "scripted") {
        if (opts.script_path.empty()) {
            throw MissingDependencyError("scripted backend requires --script FILE");
        }
        json root;
        try {
            root = json::parse(util::read_file(opts.script_path));
        } catch (const json::exception& ex) {
            throw SchemaError("script file is not valid JSON: " + std::string(ex.what()));
        }
        gateway::BackendProfile profile = gateway::ScriptedBackend::default_profile();
        const json* script_obj = &root;
        if (root.is_object() && root.contains("script")) {
            script_obj = &root["script"];
            if (root.contains("profile") && root["profile"].is_object()) {
                const auto& p = root["profile"];
                profile.model = p.value("model", profile.model);
                profile.supports_system_prompt =
                    p.value("supports_system_prompt", profile.supports_system_prompt);
            }
        }
        if (!script_obj->is_object()) {
            throw SchemaError("script file must be a JSON object mapping tag -> reply");
        }
        std::map<std::string, std::string> script;
        for (const auto& [tag, reply] : script_obj->items()) {
            if (!reply.is_string()) throw SchemaError("script entry '" + tag + "' must be a string");
            script[tag] = reply.get<std::string>();
        }
        return std::make_unique<gateway::ScriptedBackend>(std::move(script), std::move(profile));
    }

    if (opts.backend_name.empty()) {
        throw MissingDependencyError("no backend selected; pass --backend NAME --config FILE "
                                     "or --script FILE");
    }
    if (opts.config_path.empty()) {
        throw MissingDependencyError("--backend requires --config FILE");
    }
    gateway::BackendConfig config = gateway::load_backend_config(opts.config_path);
    return std::make_unique<gateway::HttpBackend>(gateway::find_backend(config, opts.backend_name));
}

std::unique_ptr<corpus::EmbeddingProvider> make_provider_for_index(
    const corpus::VectorIndex& index, const std::string& config_path) {
    if (index.provider_id.rfind("fake-hash", 0) == 0) {
        return std::make_unique<corpus::HashEmbeddingProvider>(index.dims);
    }
    if (config_path.empty()) {
        throw MissingDependencyError("index was built with provider '" + index.provider_id +
                                     "'; pass --config with an embedding endpoint");
    }
    gateway::BackendConfig config = gateway::load_backend_config(config_path);
    if (!config.embedding) {
        throw MissingDependencyError("config has no 'embedding' section for provider '" +
                                     index.provider_id + "'");
    }
    gateway::EmbeddingProfile profile = *config.embedding;
    profile.model = index.provider_id;
    return std::make_unique<corpus::HttpEmbeddingProvider>(std::move(profile));
}

roles::RoleRegistry load_registry_or_builtin(const std::string& path) {
    if (path.empty()) return roles::RoleRegistry::builtin();
    return roles::RoleRegistry::load_file(path);
}

std::vector<pipeline::Mode> parse_modes_csv(const std::string& csv) {
    std::vector<pipeline::Mode> modes;
    size_t pos = 0;
    while (pos <= csv.size()) {
        size_t comma = csv.find(',', pos);
        std::string token =
            util::trim(csv.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
        if (!token.empty()) modes.push_back(pipeline::mode_from_name(token));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (modes.empty()) throw SchemaError("no modes parsed from '" + csv + "'");
    return modes;
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_index(const std::string& corpus_dir, const std::string& out_path, int chunk_size,
              int overlap, const std::string& provider_name, int dims,
              const std::string& config_path) {
    corpus::RetrievalConfig cfg;
    cfg.chunk_size_words = chunk_size;
    cfg.overlap_words = overlap;

    std::unique_ptr<corpus::EmbeddingProvider> provider;
    if (provider_name == "fake") {
        provider = std::make_unique<corpus::HashEmbeddingProvider>(dims);
    } else {
        if (config_path.empty()) {
            throw MissingDependencyError("provider '" + provider_name +
                                         "' requires --config with an embedding endpoint");
        }
        gateway::BackendConfig config = gateway::load_backend_config(config_path);
        if (!config.embedding) {
            throw MissingDependencyError("config has no 'embedding' section");
        }
        gateway::EmbeddingProfile profile = *config.embedding;
        if (provider_name != "default") profile.model = provider_name;
        provider = std::make_unique<corpus::HttpEmbeddingProvider>(std::move(profile));
    }

    std::vector<corpus::SourceDocument> docs = corpus::load_corpus_dir(corpus_dir);
    corpus::VectorIndex index = corpus::build_index(docs, *provider, cfg);
    corpus::save_index(index, out_path);
    std::cout << "indexed " << index.passages.size() << " passages (dims " << index.dims
              << ") -> " << out_path << "\n";
    return 0;
}

int cmd_ask(const std::string& question_path, const std::string& question_id,
            const std::string& mode_name, const BackendOptions& backend_opts,
            const std::string& index_path, const std::string& registry_path,
            const std::string& trace_out, bool trace_io, int k_override) {
    pipeline::Mode mode = pipeline::mode_from_name(mode_name);
    qbank::QuestionSet set = qbank::load_question_set(question_path);
    if (set.questions.empty()) throw SchemaError("question file has no questions");

    const qbank::Question* question = &set.questions.front();
    if (!question_id.empty()) {
        question = nullptr;
        for (const auto& q : set.questions) {
            if (q.id == question_id) {
                question = &q;
                break;
            }
        }
        if (question == nullptr) {
            throw SchemaError("no question with id '" + question_id + "' in " + question_path);
        }
    }

    std::unique_ptr<gateway::ChatBackend> backend = make_backend(backend_opts);
    roles::RoleRegistry registry = load_registry_or_builtin(registry_path);

    corpus::VectorIndex index;
    std::unique_ptr<corpus::EmbeddingProvider> provider;
    pipeline::Deps deps;
    deps.backend = backend.get();
    deps.registry = &registry;
    deps.trace_io = trace_io;
    if (mode == pipeline::Mode::M1 || mode == pipeline::Mode::M3) {
        if (index_path.empty()) {
            throw MissingDependencyError(std::string(pipeline::mode_name(mode)) +
                                         " requires --index FILE");
        }
        index = corpus::load_index(index_path);
        provider = make_provider_for_index(index, backend_opts.config_path);
        deps.index = &index;
        deps.provider = provider.get();
        deps.retrieval = index.config;
        if (k_override > 0) deps.retrieval.k = k_override;
    }

    pipeline::PipelineTrace trace = pipeline::run(*question, mode, deps);
    if (!trace_out.empty()) {
        std::ofstream out(trace_out, std::ios::app);
        if (!out) throw IoError("cannot write trace file: " + trace_out);
        out << trace.to_json() << "\n";
    }

    if (trace.final_output.answer) {
        std::cout << qbank::letter_char(*trace.final_output.answer) << "\n";
    } else {
        std::cout << "invalid\n";
    }
    return 0;
}

int cmd_eval(const std::string& question_path, const std::string& modes_csv,
             const std::string& out_path, const BackendOptions& backend_opts,
             const std::string& index_path, const std::string& registry_path, int concurrency,
             long long seed, bool no_resume, const std::string& trace_out, bool trace_io) {
    qbank::QuestionSet set = qbank::load_question_set(question_path);

    eval::RunConfig config;
    config.modes = parse_modes_csv(modes_csv);
    config.backend_name = backend_opts.backend_name.empty()
                              ? (backend_opts.script_path.empty() ? "" : "scripted")
                              : backend_opts.backend_name;
    config.concurrency = concurrency;
    config.seed = seed;
    config.output_path = out_path;
    config.trace_path = trace_out;
    config.resume = !no_resume;

    std::unique_ptr<gateway::ChatBackend> backend = make_backend(backend_opts);
    roles::RoleRegistry registry = load_registry_or_builtin(registry_path);

    corpus::VectorIndex index;
    std::unique_ptr<corpus::EmbeddingProvider> provider;
    pipeline::Deps deps;
    deps.backend = backend.get();
    deps.registry = &registry;
    deps.trace_io = trace_io;
    bool needs_index = false;
    for (pipeline::Mode m : config.modes) {
        if (m == pipeline::Mode::M1 || m == pipeline::Mode::M3) needs_index = true;
    }
    if (needs_index) {
        if (index_path.empty()) {
            throw MissingDependencyError("requested modes need --index FILE");
        }
        index = corpus::load_index(index_path);
        provider = make_provider_for_index(index, backend_opts.config_path);
        deps.index = &index;
        deps.provider = provider.get();
        deps.retrieval = index.config;
    }

    eval::EvalReport report = eval::evaluate(set, config, deps);
    std::cout << eval::render_report(report, "text");
    std::cout << "results -> " << out_path << "\n";
    return 0;
}

int cmd_report(const std::string& results_path, const std::string& format,
               const std::string& out_path) {
    eval::EvalReport report = eval::aggregate(results_path);
    std::string rendered = eval::render_report(report, format);
    if (out_path.empty()) {
        std::cout << rendered;
    } else {
        util::write_file(out_path, rendered);
        std::cout << "report -> " << out_path << "\n";
    }
    return 0;
}

int cmd_convert(const std::string& in_path, const std::string& out_path,
                const std::string& report_path, const BackendOptions& backend_opts,
                long long seed) {
    json root;
    try {
        root = json::parse(util::read_file(in_path));
    } catch (const json::exception& ex) {
        throw SchemaError("input is not valid JSON: " + std::string(ex.what()));
    }
    const json* items = nullptr;
    if (root.is_array()) {
        items = &root;
    } else if (root.is_object() && root.contains("items") && root["items"].is_array()) {
        items = &root["items"];
    } else {
        throw SchemaError("input must be a JSON array or an object with an 'items' array");
    }

    std::unique_ptr<gateway::ChatBackend> backend = make_backend(backend_opts);

    qbank::QuestionSet set;
    set.name = "converted";
    set.source = in_path;
    json conversion_report = json::array();

    size_t i = 0;
    for (const auto& item : *items) {
        std::string where = "/" + std::to_string(i);
        if (!item.is_object()) throw SchemaError(where + ": item must be an object");
        qbank::ConversionMeta meta;
        meta.id = item.value("id", "");
        meta.topic = item.value("topic", "");
        std::string stem = item.value("stem", "");
        std::string correct = item.value("correct_answer", "");
        if (stem.empty()) throw SchemaError(where + "/stem: required non-empty string");
        if (correct.empty()) throw SchemaError(where + "/correct_answer: required non-empty string");
        if (item.contains("hint") && item["hint"].is_string()) {
            meta.hint = item["hint"].get<std::string>();
        }
        if (item.contains("explanation") && item["explanation"].is_string()) {
            meta.explanation = item["explanation"].get<std::string>();
        }

        long long item_seed =
            seed ^ static_cast<long long>(util::fnv1a64(meta.id.empty() ? stem : meta.id));
        qbank::ConversionRecord record =
            qbank::convert_to_mcq(*backend, stem, correct, item_seed, meta);
        json entry;
        entry["id"] = record.question.id;
        entry["distractors"] = record.distractors;
        entry["attempts"] = record.attempts;
        entry["ground_truth"] = std::string(1, qbank::letter_char(record.question.ground_truth));
        conversion_report.push_back(std::move(entry));
        set.questions.push_back(std::move(record.question));
        ++i;
    }

    qbank::save_question_set(set, out_path);
    if (!report_path.empty()) {
        util::write_file(report_path, conversion_report.dump(2) + "\n");
    }
    std::cout << "converted " << set.questions.size() << " questions -> " << out_path << "\n";
    return 0;
}

int cmd_roles(const std::string& topic, const std::string& registry_path) {
    roles::RoleRegistry registry = load_registry_or_builtin(registry_path);
    if (!topic.empty()) {
        roles::RoleRegistry::Resolved resolved = registry.resolve_role(topic);
        std::cout << resolved.prompt.text << "\n";
        if (resolved.fallback) {
            std::cerr << "note: topic '" << topic << "' is not registered; generic fallback used\n";
        }
        return 0;
    }
    for (const auto& entry : registry.entries()) {
        std::cout << entry.topic << "\t" << entry.category << "\t" << entry.role_text << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    GlobalOptions global;

    CLI::App app{"finqa - role-aware multi-agent financial QA pipeline"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_flag("--json-errors", global.json_errors,
                 "Emit machine-readable error JSON on stderr");

    // index
    auto* index_cmd = app.add_subcommand("index", "Chunk and embed a corpus into a vector index");
    std::string corpus_dir, index_out, provider_name = "fake", index_config;
    int chunk_size = 400, overlap = 50, dims = 64;
    index_cmd->add_option("--corpus", corpus_dir, "Directory of plain-text documents")->required();
    index_cmd->add_option("--out", index_out, "Output index file")->required();
    index_cmd->add_option("--chunk-size", chunk_size, "Chunk size in words (default 400)");
    index_cmd->add_option("--overlap", overlap, "Window overlap in words (default 50)");
    index_cmd->add_option("--provider", provider_name,
                          "Embedding provider: 'fake' or a model name served by the config's "
                          "embedding endpoint (default fake)");
    index_cmd->add_option("--dims", dims, "Vector dims for the fake provider (default 64)");
    index_cmd->add_option("--config", index_config, "Backend config JSON file");

    // ask
    auto* ask_cmd = app.add_subcommand("ask", "Run one question through a mode");
    std::string ask_question, ask_id, ask_mode, ask_index, ask_registry, ask_trace = "trace.jsonl";
    bool ask_trace_io = false;
    int ask_k = 0;
    BackendOptions ask_backend;
    ask_cmd->add_option("--question", ask_question, "Question set JSON file")->required();
    ask_cmd->add_option("--id", ask_id, "Question id (default: first in file)");
    ask_cmd->add_option("--mode", ask_mode, "Mode: M0, M1, M2, or M3")->required();
    add_backend_options(ask_cmd, ask_backend);
    ask_cmd->add_option("--index", ask_index, "Vector index file (required for M1/M3)");
    ask_cmd->add_option("--registry", ask_registry, "Role registry JSON (default: built-in)");
    ask_cmd->add_option("--trace-out", ask_trace, "Trace JSONL output (default trace.jsonl)");
    ask_cmd->add_flag("--trace-io", ask_trace_io, "Include full request/response bodies in traces");
    ask_cmd->add_option("--k", ask_k, "Top-k retrieval override");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a question set across modes");
    std::string eval_questions, eval_modes = "M0,M1,M2,M3", eval_out, eval_index, eval_registry,
                eval_trace;
    int eval_concurrency = 4;
    long long eval_seed = 0;
    bool eval_no_resume = false, eval_trace_io = false;
    BackendOptions eval_backend;
    eval_cmd->add_option("--questions", eval_questions, "Question set JSON file")->required();
    eval_cmd->add_option("--modes", eval_modes, "Comma-separated modes (default M0,M1,M2,M3)");
    eval_cmd->add_option("--out", eval_out, "Results JSONL output file")->required();
    add_backend_options(eval_cmd, eval_backend);
    eval_cmd->add_option("--index", eval_index, "Vector index file (required for M1/M3)");
    eval_cmd->add_option("--registry", eval_registry, "Role registry JSON (default: built-in)");
    eval_cmd->add_option("--concurrency", eval_concurrency, "Worker count (default 4)");
    eval_cmd->add_option("--seed", eval_seed, "Run seed recorded in the results header");
    eval_cmd->add_flag("--no-resume", eval_no_resume,
                       "Re-run everything even if the output file already has results");
    eval_cmd->add_option("--trace-out", eval_trace, "Trace JSONL output file");
    eval_cmd->add_flag("--trace-io", eval_trace_io,
                       "Include full request/response bodies in traces");

    // report
    auto* report_cmd = app.add_subcommand("report", "Render a results file as text, CSV, or SVG");
    std::string report_results, report_format = "text", report_out;
    report_cmd->add_option("--results", report_results, "Results JSONL file")->required();
    report_cmd->add_option("--format", report_format, "text, csv, or svg (default text)");
    report_cmd->add_option("--out", report_out, "Output file (default: stdout)");

    // convert
    auto* convert_cmd =
        app.add_subcommand("convert", "Convert free-response items to multiple choice");
    std::string convert_in, convert_out, convert_report;
    long long convert_seed = 0;
    BackendOptions convert_backend;
    convert_cmd->add_option("--in", convert_in, "Free-response JSON file")->required();
    convert_cmd->add_option("--out", convert_out, "MCQ question set output file")->required();
    convert_cmd->add_option("--report", convert_report, "Conversion report JSON output");
    add_backend_options(convert_cmd, convert_backend);
    convert_cmd->add_option("--seed", convert_seed, "Shuffle seed (default 0)");

    // roles
    auto* roles_cmd = app.add_subcommand("roles", "Inspect the topic role registry");
    std::string roles_topic, roles_registry;
    roles_cmd->add_option("--topic", roles_topic, "Print the role prompt for one topic");
    roles_cmd->add_option("--registry", roles_registry, "Role registry JSON (default: built-in)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    if (index_cmd->parsed()) {
        return run_guarded(global, [&] {
            return cmd_index(corpus_dir, index_out, chunk_size, overlap, provider_name, dims,
                             index_config);
        });
    }
    if (ask_cmd->parsed()) {
        return run_guarded(global, [&] {
            return cmd_ask(ask_question, ask_id, ask_mode, ask_backend, ask_index, ask_registry,
                           ask_trace, ask_trace_io, ask_k);
        });
    }
    if (eval_cmd->parsed()) {
        return run_guarded(global, [&] {
            return cmd_eval(eval_questions, eval_modes, eval_out, eval_backend, eval_index,
                            eval_registry, eval_concurrency, eval_seed, eval_no_resume, eval_trace,
                            eval_trace_io);
        });
    }
    if (report_cmd->parsed()) {
        return run_guarded(global,
                           [&] { return cmd_report(report_results, report_format, report_out); });
    }
    if (convert_cmd->parsed()) {
        return run_guarded(global, [&] {
            return cmd_convert(convert_in, convert_out, convert_report, convert_backend,
                               convert_seed);
        });
    }
    if (roles_cmd->parsed()) {
        return run_guarded(global, [&] { return cmd_roles(roles_topic, roles_registry); });
    }
    return kExitUsage;
}
