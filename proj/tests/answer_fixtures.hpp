#pragma once

#include "finqa/questions.hpp"

#include <optional>
#include <string>
#include <vector>

namespace finqa::testing {

struct AnswerCase {
    std::string raw;
    std::optional<qbank::Letter> expected;   // nullopt = unparseable
};

/// Crafted model outputs covering the extraction rules: sentinel present,
/// duplicated, punctuation/markdown variants, fallback patterns, and garbage.
inline const std::vector<AnswerCase>& answer_cases() {
    using qbank::Letter;
    static const std::vector<AnswerCase> cases = {
        // Sentinel forms
        {"Final Answer: B", Letter::B},
        {"The yield is 2/50 = 4%.\nFinal Answer: B", Letter::B},
        {"Final Answer: A ... wait, that is wrong. Final Answer: C", Letter::C},
        {"final answer: d", Letter::D},
        {"FINAL ANSWER - (B)", Letter::B},
        {"**Final Answer: C**", Letter::C},
        {"Final Answer B", Letter::B},
        {"Final Answer: (A)", Letter::A},
        {"Final Answer:\nB", Letter::B},
        {"Some reasoning first.\n\nFinal answer: a", Letter::A},
        {"first guess was (A), but...\nFinal Answer: D", Letter::D},
        {"Options were A. B. C. D. in the stem. Final Answer: (C)", Letter::C},
        {"Computation gives 109. Final Answer: B", Letter::B},
        // Fallback forms
        {"The answer is definitely option (D)", Letter::D},
        {"I considered (A) and (B) but settle on (C)", Letter::C},
        {"B) $109,000", Letter::B},
        {"Let me think.\nC. The third option is right.", Letter::C},
        {"Reasoning here.\nA) first choice looks best", Letter::A},
        {"D. is my answer\nbut actually no\nB. final choice", Letter::B},
        {"the strongest candidate is (B).", Letter::B},
        // Garbage / unparseable
        {"Final Answer: E", std::nullopt},
        {"Final Answer: Brazil", std::nullopt},
        {"no letter anywhere in this text", std::nullopt},
        {"", std::nullopt},
        {"The total is 42.", std::nullopt},
        {"Balance sheets (BS) summarize positions", std::nullopt},
    };
    return cases;
}

} // namespace finqa::testing
