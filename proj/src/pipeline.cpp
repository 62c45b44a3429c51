#include "finqa/pipeline.hpp"

#include "finqa/util.hpp"

#include <json.hpp>

#include <stdexcept>

namespace finqa::pipeline {

using nlohmann::json;

const char* mode_name(Mode mode) {
    switch (mode) {
        case Mode::M0: return "M0";
        case Mode::M1: return "M1";
        case Mode::M2: return "M2";
        case Mode::M3: return "M3";
    }
    return "M0";
}

Mode mode_from_name(const std::string& name) {
    if (name == "M0" || name == "m0") return Mode::M0;
    if (name == "M1" || name == "m1") return Mode::M1;
    if (name == "M2" || name == "m2") return Mode::M2;
    if (name == "M3" || name == "m3") return Mode::M3;
    throw SchemaError("unknown mode '" + name + "' (expected M0..M3)");
}

int expected_calls(Mode mode) {
    switch (mode) {
        case Mode::M0: return 1;
        case Mode::M1: return 2;
        case Mode::M2: return 3;
        case Mode::M3: return 4;
    }
    return 1;
}

const char* agent_name(Agent agent) {
    switch (agent) {
        case Agent::BG: return "BG";
        case Agent::ER: return "ER";
        case Agent::XR: return "XR";
    }
    return "BG";
}

namespace {

std::vector<Agent> expected_order(Mode mode) {
    switch (mode) {
        case Mode::M0: return {Agent::BG};
        case Mode::M1: return {Agent::ER, Agent::BG};
        case Mode::M2: return {Agent::BG, Agent::XR, Agent::BG};
        case Mode::M3: return {Agent::ER, Agent::BG, Agent::XR, Agent::BG};
    }
    return {Agent::BG};
}

bool uses_evidence(Mode mode) { return mode == Mode::M1 || mode == Mode::M3; }
bool uses_critique(Mode mode) { return mode == Mode::M2 || mode == Mode::M3; }

} // namespace

void PipelineTrace::validate() const {
    std::vector<Agent> order = expected_order(mode);
    if (calls.size() != order.size()) {
        throw std::logic_error("trace for " + std::string(mode_name(mode)) + " has " +
                               std::to_string(calls.size()) + " calls, expected " +
                               std::to_string(order.size()));
    }
    for (size_t i = 0; i < order.size(); ++i) {
        if (calls[i].agent != order[i]) {
            throw std::logic_error("trace call " + std::to_string(i) + " is " +
                                   agent_name(calls[i].agent) + ", expected " +
                                   agent_name(order[i]));
        }
    }
    if (evidence.has_value() != uses_evidence(mode)) {
        throw std::logic_error("evidence presence does not match mode");
    }
    if (initial.has_value() != uses_critique(mode) ||
        critique.has_value() != uses_critique(mode)) {
        throw std::logic_error("draft/critique presence does not match mode");
    }
}

namespace {

json generator_output_json(const agents::GeneratorOutput& output) {
    json j;
    if (output.answer) {
        j["answer"] = std::string(1, qbank::letter_char(*output.answer));
    } else {
        j["answer"] = nullptr;
    }
    j["reasoning"] = output.reasoning;
    j["raw"] = output.raw;
    return j;
}

json call_record_json(const CallRecord& call) {
    json j;
    j["agent"] = agent_name(call.agent);
    j["pass_index"] = call.pass_index;
    j["request_digest"] = call.request_digest;
    j["response_digest"] = call.response_digest;
    j["prompt_tokens"] = call.prompt_tokens;
    j["completion_tokens"] = call.completion_tokens;
    j["latency_ms"] = call.latency_ms;
    if (call.usage_missing) j["usage_missing"] = true;
    if (call.request_body) j["request_body"] = *call.request_body;
    if (call.response_body) j["response_body"] = *call.response_body;
    return j;
}

} // namespace

std::string PipelineTrace::to_json() const {
    json j;
    j["schema"] = "finqa.trace/1";
    j["question_id"] = question_id;
    j["mode"] = mode_name(mode);
    json calls_json = json::array();
    for (const auto& call : calls) calls_json.push_back(call_record_json(call));
    j["calls"] = std::move(calls_json);
    if (evidence) {
        json e;
        if (evidence->hint) e["hint"] = *evidence->hint;
        e["summaries"] = evidence->summaries;
        e["no_evidence"] = evidence->no_evidence;
        if (evidence->malformed_warning) e["malformed_warning"] = true;
        j["evidence"] = std::move(e);
    }
    if (initial) j["initial"] = generator_output_json(*initial);
    if (critique) {
        json c;
        c["text"] = critique->text;
        c["reviewer_topic"] = critique->reviewer_topic;
        if (critique->warning) c["warning"] = true;
        j["critique"] = std::move(c);
    }
    j["final"] = generator_output_json(final_output);
    j["wall_ms"] = wall_ms;
    return j.dump();
}

namespace {

std::vector<CallRecord> build_records(const gateway::RecordingBackend& recorder,
                                      const std::vector<std::pair<Agent, int>>& labels,
                                      bool trace_io) {
    const auto& entries = recorder.entries();
    std::vector<CallRecord> records;
    records.reserve(entries.size());
    for (size_t i = 0; i < entries.size() && i < labels.size(); ++i) {
        const auto& entry = entries[i];
        CallRecord record;
        record.agent = labels[i].first;
        record.pass_index = labels[i].second;
        record.request_digest = util::hex_digest(entry.request_json);
        record.response_digest = util::hex_digest(entry.response_content);
        record.prompt_tokens = entry.prompt_tokens;
        record.completion_tokens = entry.completion_tokens;
        record.latency_ms = entry.latency_ms;
        record.usage_missing = entry.usage_missing;
        if (trace_io) {
            record.request_body = entry.request_json;
            record.response_body = entry.response_content;
        }
        records.push_back(std::move(record));
    }
    return records;
}

} // namespace

PipelineTrace run(const qbank::Question& question, Mode mode, const Deps& deps) {
    if (deps.backend == nullptr) throw MissingDependencyError("pipeline requires a backend");
    if (uses_evidence(mode)) {
        if (deps.index == nullptr) {
            throw MissingDependencyError(std::string(mode_name(mode)) +
                                         " requires a vector index");
        }
        if (deps.provider == nullptr) {
            throw MissingDependencyError(std::string(mode_name(mode)) +
                                         " requires an embedding provider");
        }
    }
    if (uses_critique(mode) && deps.registry == nullptr) {
        throw MissingDependencyError(std::string(mode_name(mode)) + " requires a role registry");
    }

    const prompts::PromptLibrary& library =
        deps.prompt_library ? *deps.prompt_library : prompts::PromptLibrary::defaults();

    gateway::RecordingBackend recorder(*deps.backend);
    std::vector<std::pair<Agent, int>> labels;

    PipelineTrace trace;
    trace.question_id = question.id;
    trace.mode = mode;

    long long t0 = util::steady_ms();
    try {
        if (uses_evidence(mode)) {
            trace.evidence = agents::retrieve_and_summarize(recorder, question, *deps.index,
                                                            *deps.provider, deps.retrieval,
                                                            library, deps.retry);
            labels.emplace_back(Agent::ER, 0);
        }

        if (mode == Mode::M0 || mode == Mode::M1) {
            std::optional<agents::ContextBlock> context;
            if (trace.evidence) {
                context = agents::render_context(trace.evidence, std::nullopt);
            }
            trace.final_output =
                agents::generate(recorder, question, context, 0, library, deps.retry);
            labels.emplace_back(Agent::BG, 0);
        } else {
            std::optional<agents::ContextBlock> first_context;
            if (trace.evidence) {
                first_context = agents::render_context(trace.evidence, std::nullopt);
            }
            trace.initial =
                agents::generate(recorder, question, first_context, 0, library, deps.retry);
            labels.emplace_back(Agent::BG, 0);

            trace.critique = agents::review(recorder, question, *trace.initial, trace.evidence,
                                            *deps.registry, library, deps.retry);
            labels.emplace_back(Agent::XR, 0);

            // Second pass context: critique alone for M2, evidence plus
            // critique for M3. Always a fresh conversation.
            agents::ContextBlock second_context =
                agents::render_context(trace.evidence, trace.critique);
            trace.final_output =
                agents::generate(recorder, question, second_context, 1, library, deps.retry);
            labels.emplace_back(Agent::BG, 1);
        }
    } catch (const Error& e) {
        throw PipelineRunError(std::string(e.what()), question.id, mode,
                               build_records(recorder, labels, deps.trace_io));
    }
    trace.wall_ms = util::steady_ms() - t0;
    trace.calls = build_records(recorder, labels, deps.trace_io);
    trace.validate();
    return trace;
}

} // namespace finqa::pipeline
