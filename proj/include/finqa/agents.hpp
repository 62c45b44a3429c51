#pragma once

#include "finqa/corpus.hpp"
#include "finqa/errors.hpp"
#include "finqa/gateway.hpp"
#include "finqa/prompts.hpp"
#include "finqa/questions.hpp"
#include "finqa/roles.hpp"

#include <optional>
#include <string>
#include <vector>

namespace finqa::agents {

/// Draft or final answer from the generator. `answer` is empty when no
/// letter could be extracted; the raw text is kept so a reviewer can still
/// audit it and scoring can record the question as invalid.
struct GeneratorOutput {
    std::optional<qbank::Letter> answer;
    std::string reasoning;   // raw minus the final-answer line, when one exists
    std::string raw;
};

struct EvidenceBundle {
    std::optional<std::string> hint;
    std::vector<std::string> summaries;   // retrieval relevance order
    bool no_evidence = false;
    bool malformed_warning = false;
};

struct Critique {
    std::string text;
    std::string reviewer_topic;
    bool warning = false;
};

/// Rendered context handed to the generator: hint, then evidence summaries,
/// then critique — present parts only. Sources are kept so evidence can be
/// shed summary-by-summary on context overflow.
struct ContextBlock {
    std::string rendered;
    bool has_hint = false;
    bool has_evidence = false;
    bool has_critique = false;

    std::optional<std::string> hint;
    std::vector<std::string> summaries;
    std::optional<std::string> critique;
};

/// Throws BothAbsentError when neither argument is present.
ContextBlock render_context(const std::optional<EvidenceBundle>& evidence,
                            const std::optional<Critique>& critique);

/// Drops the last evidence summary and re-renders. Returns false when there
/// is nothing left to drop. The critique is never removed.
bool shrink_evidence(ContextBlock& context);

struct ExtractedAnswer {
    qbank::Letter letter = qbank::Letter::A;
    size_t line_begin = std::string::npos;   // span of the sentinel line, npos if fallback
    size_t line_end = std::string::npos;
};

/// Answer-letter extraction: the last "Final Answer" (any case) followed by
/// optional punctuation and a letter A-D wins; otherwise the last standalone
/// "(A)".."(D)" or a line-leading "A." / "A)" token. std::nullopt when none
/// apply.
std::optional<ExtractedAnswer> try_extract_answer(const std::string& raw);

/// Same rules; throws UnparseableError instead of returning nullopt.
qbank::Letter extract_answer(const std::string& raw);

/// One fresh-conversation chat call: CoT instruction, stem, labeled options,
/// plus the context block when present. On ContextOverflow the evidence
/// summaries are dropped last-to-first and the call retried.
GeneratorOutput generate(gateway::ChatBackend& backend, const qbank::Question& question,
                         const std::optional<ContextBlock>& context, int pass_index,
                         const prompts::PromptLibrary& prompts = prompts::PromptLibrary::defaults(),
                         const gateway::RetryPolicy& retry = {});

/// Embeds the stem, retrieves top-k passages, and asks the backend to
/// summarize them under the evidence-retriever rules. A reply of exactly
/// "[NO EVIDENCE]" yields an empty, flagged bundle; a reply that is neither
/// a list nor the sentinel becomes a single summary with a warning.
EvidenceBundle retrieve_and_summarize(
    gateway::ChatBackend& backend, const qbank::Question& question,
    const corpus::VectorIndex& index, corpus::EmbeddingProvider& provider,
    const corpus::RetrievalConfig& cfg,
    const prompts::PromptLibrary& prompts = prompts::PromptLibrary::defaults(),
    const gateway::RetryPolicy& retry = {});

/// One chat call with the topic's role prompt applied (the only agent that
/// receives one) and the reviewer instruction block, question, draft, and
/// any evidence in the user body.
Critique review(gateway::ChatBackend& backend, const qbank::Question& question,
                const GeneratorOutput& draft, const std::optional<EvidenceBundle>& evidence,
                const roles::RoleRegistry& registry,
                const prompts::PromptLibrary& prompts = prompts::PromptLibrary::defaults(),
                const gateway::RetryPolicy& retry = {});

/// "BG:<question>:<pass>" etc.; scripted backends key replies on these.
std::string call_tag(const char* agent, const std::string& question_id, int pass_index);

} // namespace finqa::agents
