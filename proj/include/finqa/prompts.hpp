#pragma once

#include "finqa/errors.hpp"

#include <map>
#include <string>

namespace finqa::prompts {

/// Text with {{slot}} placeholders. Rendering with an unfilled slot throws
/// UnresolvedSlotError; unused values are ignored.
struct PromptTemplate {
    std::string name;
    std::string body;

    std::string render(const std::map<std::string, std::string>& slots) const;
};

/// The three agent prompt texts. Defaults are compiled in; load_dir overrides
/// any of them from <dir>/<name>.txt so deployments can tune wording without
/// rebuilding.
struct PromptLibrary {
    PromptTemplate base_generator;              // slots: stem, option_a..option_d, context
    PromptTemplate evidence_retriever_system;   // no slots
    PromptTemplate expert_reviewer_instructions; // no slots

    static const PromptLibrary& defaults();
    static PromptLibrary load_dir(const std::string& dir);
};

} // namespace finqa::prompts
