#pragma once

#include "finqa/agents.hpp"
#include "finqa/corpus.hpp"
#include "finqa/errors.hpp"
#include "finqa/gateway.hpp"
#include "finqa/prompts.hpp"
#include "finqa/questions.hpp"
#include "finqa/roles.hpp"

#include <optional>
#include <string>
#include <vector>

namespace finqa::pipeline {

/// The four agent wirings. Call sequences are fixed:
///   M0: [BG]   M1: [ER, BG]   M2: [BG, XR, BG]   M3: [ER, BG, XR, BG]
enum class Mode { M0, M1, M2, M3 };

const char* mode_name(Mode mode);
Mode mode_from_name(const std::string& name);   // throws SchemaError
int expected_calls(Mode mode);                  // 1, 2, 3, 4

enum class Agent { BG, ER, XR };
const char* agent_name(Agent agent);

/// One successful chat completion. Digests are content hashes of the
/// serialized request and the reply text; bodies are populated only when
/// trace_io is on.
struct CallRecord {
    Agent agent = Agent::BG;
    int pass_index = 0;
    std::string request_digest;
    std::string response_digest;
    long long prompt_tokens = 0;
    long long completion_tokens = 0;
    long long latency_ms = 0;
    bool usage_missing = false;
    std::optional<std::string> request_body;
    std::optional<std::string> response_body;
};

struct PipelineTrace {
    std::string question_id;
    Mode mode = Mode::M0;
    std::vector<CallRecord> calls;
    std::optional<agents::EvidenceBundle> evidence;   // present iff mode uses ER
    std::optional<agents::GeneratorOutput> initial;   // present iff mode uses XR
    std::optional<agents::Critique> critique;         // present iff mode uses XR
    agents::GeneratorOutput final_output;
    long long wall_ms = 0;

    /// Enforces the per-mode call count, agent order, and field presence.
    void validate() const;

    std::string to_json() const;
};

struct Deps {
    gateway::ChatBackend* backend = nullptr;
    const corpus::VectorIndex* index = nullptr;            // M1/M3
    corpus::EmbeddingProvider* provider = nullptr;         // M1/M3
    const roles::RoleRegistry* registry = nullptr;         // M2/M3
    corpus::RetrievalConfig retrieval;
    const prompts::PromptLibrary* prompt_library = nullptr;   // defaults when null
    gateway::RetryPolicy retry;
    bool trace_io = false;
};

/// Backend failure mid-run; completed call records are preserved for
/// diagnosis and the eval harness records the question as errored.
class PipelineRunError : public Error {
public:
    PipelineRunError(std::string message, std::string question_id, Mode mode,
                     std::vector<CallRecord> completed)
        : Error(std::move(message)),
          question_id_(std::move(question_id)),
          mode_(mode),
          completed_(std::move(completed)) {}

    const char* kind() const noexcept override { return "PipelineRunError"; }
    const std::string& question_id() const { return question_id_; }
    Mode mode() const { return mode_; }
    const std::vector<CallRecord>& completed_calls() const { return completed_; }

private:
    std::string question_id_;
    Mode mode_;
    std::vector<CallRecord> completed_;
};

/// Runs one question through one mode. Throws MissingDependencyError before
/// any call when deps are incomplete, PipelineRunError on backend failure.
PipelineTrace run(const qbank::Question& question, Mode mode, const Deps& deps);

} // namespace finqa::pipeline
