#include "finqa/agents.hpp"

#include "finqa/util.hpp"

#include <cctype>
#include <regex>

namespace finqa::agents {

std::string call_tag(const char* agent, const std::string& question_id, int pass_index) {
    return std::string(agent) + ":" + question_id + ":" + std::to_string(pass_index);
}

// ---------------------------------------------------------------------------
// Answer extraction

namespace {

bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

std::optional<ExtractedAnswer> last_sentinel_match(const std::string& raw) {
    static const std::regex sentinel(R"(final\s+answer[\s:*=.\-]*\(?([A-Da-d])\)?)",
                                     std::regex::icase);
    std::optional<ExtractedAnswer> best;
    for (auto it = std::sregex_iterator(raw.begin(), raw.end(), sentinel);
         it != std::sregex_iterator(); ++it) {
        const auto& match = *it;
        size_t end = static_cast<size_t>(match.position(0) + match.length(0));
        if (end < raw.size() && is_word_char(raw[end])) continue;   // "B" inside a word
        char letter = static_cast<char>(std::toupper(static_cast<unsigned char>(
            match.str(1)[0])));
        ExtractedAnswer extracted;
        extracted.letter = qbank::letter_from_char(letter);
        size_t pos = static_cast<size_t>(match.position(0));
        size_t line_begin = raw.rfind('\n', pos);
        extracted.line_begin = line_begin == std::string::npos ? 0 : line_begin + 1;
        size_t line_end = raw.find('\n', pos);
        extracted.line_end = line_end == std::string::npos ? raw.size() : line_end + 1;
        best = extracted;
    }
    return best;
}

std::optional<ExtractedAnswer> last_fallback_match(const std::string& raw) {
    std::optional<size_t> best_pos;
    char best_letter = 0;

    // Parenthesized standalone letter anywhere.
    static const std::regex paren(R"(\(([A-D])\))");
    for (auto it = std::sregex_iterator(raw.begin(), raw.end(), paren);
         it != std::sregex_iterator(); ++it) {
        best_pos = static_cast<size_t>(it->position(0));
        best_letter = it->str(1)[0];
    }

    // "A." or "A)" at line start.
    size_t line_start = 0;
    while (line_start <= raw.size()) {
        size_t eol = raw.find('\n', line_start);
        size_t line_end = eol == std::string::npos ? raw.size() : eol;
        size_t i = line_start;
        while (i < line_end && (raw[i] == ' ' || raw[i] == '\t')) ++i;
        bool shaped = i + 1 < line_end && raw[i] >= 'A' && raw[i] <= 'D' &&
                      (raw[i + 1] == '.' || raw[i + 1] == ')');
        if (shaped) {
            bool boundary = i + 2 >= line_end || raw[i + 2] == ' ' || raw[i + 2] == '\t';
            if (boundary && (!best_pos || i > *best_pos)) {
                best_pos = i;
                best_letter = raw[i];
            }
        }
        if (eol == std::string::npos) break;
        line_start = eol + 1;
    }

    if (!best_pos) return std::nullopt;
    ExtractedAnswer extracted;
    extracted.letter = qbank::letter_from_char(best_letter);
    return extracted;
}

} // namespace

std::optional<ExtractedAnswer> try_extract_answer(const std::string& raw) {
    if (auto sentinel = last_sentinel_match(raw)) return sentinel;
    return last_fallback_match(raw);
}

qbank::Letter extract_answer(const std::string& raw) {
    if (auto extracted = try_extract_answer(raw)) return extracted->letter;
    throw UnparseableError("no answer letter found in model output");
}

// ---------------------------------------------------------------------------
// Context rendering

namespace {

std::string render_parts(const ContextBlock& block) {
    std::vector<std::string> sections;
    if (block.has_hint) sections.push_back("Hint: " + *block.hint);
    if (block.has_evidence) {
        std::string section = "Evidence:";
        for (size_t i = 0; i < block.summaries.size(); ++i) {
            section += "\n" + std::to_string(i + 1) + ". " + block.summaries[i];
        }
        sections.push_back(std::move(section));
    }
    if (block.has_critique) sections.push_back("Expert critique:\n" + *block.critique);

    std::string rendered;
    for (size_t i = 0; i < sections.size(); ++i) {
        if (i > 0) rendered += "\n\n";
        rendered += sections[i];
    }
    return rendered;
}

} // namespace

ContextBlock render_context(const std::optional<EvidenceBundle>& evidence,
                            const std::optional<Critique>& critique) {
    if (!evidence && !critique) {
        throw BothAbsentError("render_context needs evidence or critique");
    }
    ContextBlock block;
    if (evidence) {
        if (evidence->hint && !evidence->hint->empty()) {
            block.hint = evidence->hint;
            block.has_hint = true;
        }
        if (!evidence->no_evidence && !evidence->summaries.empty()) {
            block.summaries = evidence->summaries;
            block.has_evidence = true;
        }
    }
    if (critique) {
        block.critique = critique->text;
        block.has_critique = true;
    }
    block.rendered = render_parts(block);
    return block;
}

bool shrink_evidence(ContextBlock& context) {
    if (context.summaries.empty()) return false;
    context.summaries.pop_back();
    context.has_evidence = !context.summaries.empty();
    context.rendered = render_parts(context);
    return true;
}

// ---------------------------------------------------------------------------
// Base generator

namespace {

std::string bg_user_body(const qbank::Question& q, const std::optional<ContextBlock>& context,
                         const prompts::PromptLibrary& prompts) {
    std::string context_text;
    if (context && !context->rendered.empty()) {
        context_text = "\n\n" + context->rendered;
    }
    std::string body = prompts.base_generator.render({
        {"stem", q.stem},
        {"option_a", q.options[0]},
        {"option_b", q.options[1]},
        {"option_c", q.options[2]},
        {"option_d", q.options[3]},
        {"context", context_text},
    });
    while (!body.empty() && std::isspace(static_cast<unsigned char>(body.back()))) body.pop_back();
    return body;
}

} // namespace

GeneratorOutput generate(gateway::ChatBackend& backend, const qbank::Question& question,
                         const std::optional<ContextBlock>& context, int pass_index,
                         const prompts::PromptLibrary& prompts,
                         const gateway::RetryPolicy& retry) {
    std::optional<ContextBlock> working = context;
    gateway::ChatResponse response;
    for (;;) {
        gateway::ChatRequest request;
        request.model = backend.profile().model;
        request.tag = call_tag("BG", question.id, pass_index);
        // Fresh conversation every pass: a single user turn, nothing carried.
        request.messages = {{gateway::Role::User, bg_user_body(question, working, prompts)}};
        try {
            response = gateway::complete(backend, request, retry);
            break;
        } catch (const ContextOverflowError&) {
            if (!working || !shrink_evidence(*working)) throw;
        }
    }

    GeneratorOutput output;
    output.raw = response.content;
    output.reasoning = response.content;
    if (auto extracted = try_extract_answer(response.content)) {
        output.answer = extracted->letter;
        if (extracted->line_begin != std::string::npos) {
            std::string reasoning = response.content;
            reasoning.erase(extracted->line_begin, extracted->line_end - extracted->line_begin);
            while (!reasoning.empty() &&
                   std::isspace(static_cast<unsigned char>(reasoning.back()))) {
                reasoning.pop_back();
            }
            output.reasoning = std::move(reasoning);
        }
    }
    return output;
}

// ---------------------------------------------------------------------------
// Evidence retriever

EvidenceBundle retrieve_and_summarize(gateway::ChatBackend& backend,
                                      const qbank::Question& question,
                                      const corpus::VectorIndex& index,
                                      corpus::EmbeddingProvider& provider,
                                      const corpus::RetrievalConfig& cfg,
                                      const prompts::PromptLibrary& prompts,
                                      const gateway::RetryPolicy& retry) {
    // Retrieval queries use the stem alone; options would pull in distractor
    // vocabulary, and the hint is attached to the context afterward.
    corpus::EmbeddingVector query = corpus::embed(provider, {question.stem})[0];
    std::vector<corpus::SearchHit> hits = corpus::search(index, query, cfg.k);

    std::string body = "Question: " + question.stem + "\n\nRetrieved passages:";
    for (size_t i = 0; i < hits.size(); ++i) {
        body += "\n\n[" + std::to_string(i + 1) + "] " + hits[i].passage.text;
    }

    std::string system_text = prompts.evidence_retriever_system.render({});
    while (!system_text.empty() &&
           std::isspace(static_cast<unsigned char>(system_text.back()))) {
        system_text.pop_back();
    }

    gateway::ChatRequest request;
    request.model = backend.profile().model;
    request.tag = call_tag("ER", question.id, 0);
    if (backend.profile().supports_system_prompt) {
        request.messages = {{gateway::Role::System, system_text}, {gateway::Role::User, body}};
    } else {
        request.messages = {{gateway::Role::User, system_text + "\n\n" + body}};
    }

    gateway::ChatResponse response = gateway::complete(backend, request, retry);

    EvidenceBundle bundle;
    bundle.hint = question.hint;
    std::string trimmed = util::trim(response.content);
    if (trimmed == "[NO EVIDENCE]") {
        bundle.no_evidence = true;
        return bundle;
    }
    bundle.summaries = util::parse_list_items(response.content);
    if (bundle.summaries.empty()) {
        // Neither a list nor the sentinel: keep the whole reply as one
        // summary and flag it.
        bundle.summaries.push_back(trimmed);
        bundle.malformed_warning = true;
    }
    return bundle;
}

// ---------------------------------------------------------------------------
// Expert reviewer

Critique review(gateway::ChatBackend& backend, const qbank::Question& question,
                const GeneratorOutput& draft, const std::optional<EvidenceBundle>& evidence,
                const roles::RoleRegistry& registry, const prompts::PromptLibrary& prompts,
                const gateway::RetryPolicy& retry) {
    roles::RoleRegistry::Resolved role = registry.resolve_role(question.topic);

    std::string instructions = prompts.expert_reviewer_instructions.render({});
    while (!instructions.empty() &&
           std::isspace(static_cast<unsigned char>(instructions.back()))) {
        instructions.pop_back();
    }

    std::string body = instructions;
    body += "\n\nQuestion: " + question.stem + "\n\nOptions:";
    for (int i = 0; i < 4; ++i) {
        body += "\n" + std::string(1, static_cast<char>('A' + i)) + ") " +
                question.options[static_cast<size_t>(i)];
    }
    if (draft.answer) {
        body += "\n\nCandidate answer: " + std::string(1, qbank::letter_char(*draft.answer));
        body += "\n\nCandidate reasoning:\n" + (draft.reasoning.empty() ? draft.raw : draft.reasoning);
    } else {
        body += "\n\nCandidate answer: (no letter could be parsed)";
        body += "\n\nCandidate raw response:\n" + draft.raw;
    }
    if (evidence && !evidence->no_evidence && !evidence->summaries.empty()) {
        body += "\n\nEvidence:";
        for (size_t i = 0; i < evidence->summaries.size(); ++i) {
            body += "\n" + std::to_string(i + 1) + ". " + evidence->summaries[i];
        }
    }

    gateway::ChatRequest request;
    request.model = backend.profile().model;
    request.tag = call_tag("XR", question.id, 0);
    request.messages = roles::apply_role(backend.profile(), role.prompt, body);

    gateway::ChatResponse response = gateway::complete(backend, request, retry);

    Critique critique;
    critique.reviewer_topic = role.prompt.topic;
    critique.text = util::trim(response.content);
    if (critique.text.empty()) {
        critique.text = "(no critique)";
        critique.warning = true;
    }
    return critique;
}

} // namespace finqa::agents
