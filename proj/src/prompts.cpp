#include "finqa/prompts.hpp"

#include "finqa/util.hpp"

#include <filesystem>

namespace finqa::prompts {

std::string PromptTemplate::render(const std::map<std::string, std::string>& slots) const {
    std::string out;
    out.reserve(body.size());
    size_t pos = 0;
    while (pos < body.size()) {
        size_t open = body.find("{{", pos);
        if (open == std::string::npos) {
            out.append(body, pos, std::string::npos);
            break;
        }
        out.append(body, pos, open - pos);
        size_t close = body.find("}}", open + 2);
        if (close == std::string::npos) {
            throw UnresolvedSlotError("template '" + name + "' has an unterminated slot");
        }
        std::string slot = body.substr(open + 2, close - open - 2);
        auto it = slots.find(slot);
        if (it == slots.end()) {
            throw UnresolvedSlotError("template '" + name + "' slot '" + slot + "' not filled");
        }
        out += it->second;
        pos = close + 2;
    }
    return out;
}

namespace {

const char* kBaseGenerator =
    "Think step by step to solve the following finance question. Show your reasoning, "
    "then end with one line: 'Final Answer: <A|B|C|D>'.\n"
    "\n"
    "Question: {{stem}}\n"
    "\n"
    "Options:\n"
    "A) {{option_a}}\n"
    "B) {{option_b}}\n"
    "C) {{option_c}}\n"
    "D) {{option_d}}{{context}}\n";

const char* kEvidenceRetrieverSystem =
    "As an Evidence Retriever Agent, you are tasked with summarizing textbook passages "
    "that underpin the question being asked. Follow these rules:\n"
    "\n"
    "- Carefully read the question and identify the key concepts or formulas that need support\n"
    "- For each chunk, produce a few-sentence summary that preserves all numbers, concepts, and equations\n"
    "- Return the summaries in a list in relevance order\n"
    "- Do not invent facts or extract beyond the retrieved text\n"
    "- If no retrieved chunk supports the query, output [NO EVIDENCE] and nothing else\n";

const char* kExpertReviewerInstructions =
    "As an expert of your domain, think step-by-step to critically review the answer and "
    "reasoning for the finance question given. Conduct an in-depth review of the of the "
    "answer and reasoning, and provide a detailed critique. Follow these rules:\n"
    "\n"
    "- Read the question and candidate answer and reasoning\n"
    "- Determine whether the answer correctly interpreted the questions and addressed every part\n"
    "- Verify conceptual correctness against your financial domain's theory\n"
    "- Recompute every numeric value and calculation\n"
    "- Identify any weaknesses or inconsistencies you find\n"
    "- Provide specific suggestions for improvement, if any\n";

} // namespace

const PromptLibrary& PromptLibrary::defaults() {
    static const PromptLibrary library = {
        {"base_generator", kBaseGenerator},
        {"evidence_retriever_system", kEvidenceRetrieverSystem},
        {"expert_reviewer_instructions", kExpertReviewerInstructions},
    };
    return library;
}

PromptLibrary PromptLibrary::load_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    PromptLibrary library = defaults();
    auto maybe_load = [&](PromptTemplate& t) {
        fs::path file = fs::path(dir) / (t.name + ".txt");
        if (fs::exists(file)) t.body = util::read_file(file.string());
    };
    maybe_load(library.base_generator);
    maybe_load(library.evidence_retriever_system);
    maybe_load(library.expert_reviewer_instructions);
    return library;
}

} // namespace finqa::prompts
