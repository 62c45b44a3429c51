#pragma once

#include "finqa/agents.hpp"
#include "finqa/corpus.hpp"
#include "finqa/gateway.hpp"
#include "finqa/pipeline.hpp"
#include "finqa/questions.hpp"

#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace finqa::testing {

inline qbank::Question make_question(const std::string& id, const std::string& topic = "Dividend",
                                     qbank::Letter truth = qbank::Letter::B,
                                     const std::string& hint = "a helpful hint") {
    qbank::Question q;
    q.id = id;
    q.topic = topic;
    q.stem = "What is the value asked about in " + id + "?";
    q.options = {"10", "20", "30", "40"};
    q.ground_truth = truth;
    if (!hint.empty()) q.hint = hint;
    return q;
}

/// Full script for one question: draft + final answers, three evidence
/// summaries, and a critique, keyed by the pipeline's call tags.
inline void add_question_script(std::map<std::string, std::string>& script,
                                const qbank::Question& q, char draft_letter, char final_letter) {
    script["BG:" + q.id + ":0"] =
        std::string("Working through the numbers step by step gives the draft result.\n") +
        "Final Answer: " + draft_letter;
    script["ER:" + q.id + ":0"] =
        "1. First summary fact for " + q.id + ".\n2. Second summary fact.\n3. Third summary fact.";
    script["XR:" + q.id + ":0"] =
        "The draft applied the right formula; double-check the arithmetic in step 2.";
    script["BG:" + q.id + ":1"] =
        std::string("After the critique the computation still stands.\n") + "Final Answer: " +
        final_letter;
    }

/// Index over `count` synthetic passages embedded with the hash provider.
inline corpus::VectorIndex make_hash_index(int count = 8, int dims = 32) {
    std::vector<corpus::SourceDocument> docs;
    for (int i = 0; i < count; ++i) {
        corpus::SourceDocument doc;
        doc.doc_id = "doc" + std::to_string(i);
        doc.title = doc.doc_id;
        doc.body = "passage " + std::to_string(i) +
                   " covers dividends interest rates and payout analysis topic " +
                   std::to_string(i);
        docs.push_back(std::move(doc));
    }
    corpus::HashEmbeddingProvider provider(dims);
    corpus::RetrievalConfig cfg;
    cfg.chunk_size_words = 64;
    cfg.overlap_words = 8;
    return corpus::build_index(docs, provider, cfg);
}

/// Index of `count` random unit vectors, for search-oracle style tests.
inline corpus::VectorIndex make_random_index(int count, int dims, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    corpus::VectorIndex index;
    index.dims = dims;
    index.provider_id = "fake-hash-v1";
    for (int i = 0; i < count; ++i) {
        corpus::Passage p;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%06d", i);
        p.passage_id = std::string("p#") + buf;
        p.doc_id = "synthetic";
        p.ordinal = i;
        p.text = "vector passage " + std::to_string(i);
        p.word_count = 3;
        index.passages.push_back(std::move(p));

        corpus::EmbeddingVector v;
        v.dims = dims;
        double norm_sq = 0.0;
        std::vector<double> raw(static_cast<size_t>(dims));
        for (auto& x : raw) {
            x = normal(rng);
            norm_sq += x * x;
        }
        double norm = std::sqrt(norm_sq);
        for (double x : raw) v.values.push_back(static_cast<float>(x / norm));
        index.vectors.push_back(std::move(v));
    }
    return index;
}

inline corpus::EmbeddingVector random_unit_query(int dims, std::mt19937& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    corpus::EmbeddingVector v;
    v.dims = dims;
    double norm_sq = 0.0;
    std::vector<double> raw(static_cast<size_t>(dims));
    for (auto& x : raw) {
        x = normal(rng);
        norm_sq += x * x;
    }
    double norm = std::sqrt(norm_sq);
    for (double x : raw) v.values.push_back(static_cast<float>(x / norm));
    return v;
}

/// Brute-force search oracle: score every passage, full-sort under the
/// documented tie rule, take k. Kept independent of corpus::search.
inline std::vector<std::pair<std::string, double>> brute_force_search(
    const corpus::VectorIndex& index, const corpus::EmbeddingVector& query, int k) {
    std::vector<std::pair<std::string, double>> scored;
    for (size_t i = 0; i < index.passages.size(); ++i) {
        double dot = 0.0, qn = 0.0, vn = 0.0;
        for (size_t d = 0; d < query.values.size(); ++d) {
            double a = query.values[d];
            double b = index.vectors[i].values[d];
            dot += a * b;
            qn += a * a;
            vn += b * b;
        }
        double denom = std::sqrt(qn) * std::sqrt(vn);
        scored.emplace_back(index.passages[i].passage_id, denom < 1e-300 ? 0.0 : dot / denom);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (scored.size() > static_cast<size_t>(k)) scored.resize(static_cast<size_t>(k));
    return scored;
}

class TempDir {
public:
    explicit TempDir(const std::string& label) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("finqa_" + label + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

} // namespace finqa::testing
