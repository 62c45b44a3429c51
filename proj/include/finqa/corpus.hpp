#pragma once

#include "finqa/errors.hpp"
#include "finqa/gateway.hpp"

#include <memory>
#include <string>
#include <vector>

namespace finqa::corpus {

struct SourceDocument {
    std::string doc_id;
    std::string title;
    std::string body;
};

struct Passage {
    std::string passage_id;   // "<doc_id>#<ordinal, zero-padded>"
    std::string doc_id;
    int ordinal = 0;
    std::string text;
    int word_count = 0;
};

struct EmbeddingVector {
    int dims = 0;
    std::vector<float> values;   // unit-normalized when stored in an index
};

struct RetrievalConfig {
    int k = 3;
    int chunk_size_words = 400;
    int overlap_words = 50;
};

void validate_config(const RetrievalConfig& cfg);

/// Sliding word windows of chunk_size_words advancing by (size - overlap);
/// the final window may be shorter. Passage text is the window's words
/// joined by single spaces, so concatenating passages minus their overlaps
/// reproduces the document's word sequence.
std::vector<Passage> chunk_document(const SourceDocument& doc, const RetrievalConfig& cfg);

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::vector<std::vector<float>> embed_batch(const std::vector<std::string>& texts) = 0;
    virtual std::string provider_id() const = 0;
    virtual int dims() const = 0;
};

/// One unit-normalized vector per input text, in input order. Throws
/// ProviderError / DimensionMismatchError.
std::vector<EmbeddingVector> embed(EmbeddingProvider& provider,
                                   const std::vector<std::string>& texts);

/// Deterministic offline provider: words are hashed into buckets with a
/// signed contribution, then the vector is normalized. Stable across runs
/// and platforms (FNV-1a, no std::hash).
class HashEmbeddingProvider : public EmbeddingProvider {
public:
    explicit HashEmbeddingProvider(int dims = 64);
    std::vector<std::vector<float>> embed_batch(const std::vector<std::string>& texts) override;
    std::string provider_id() const override { return "fake-hash-v1"; }
    int dims() const override { return dims_; }

private:
    int dims_;
};

/// OpenAI-compatible /embeddings endpoint client.
class HttpEmbeddingProvider : public EmbeddingProvider {
public:
    explicit HttpEmbeddingProvider(gateway::EmbeddingProfile profile,
                                   std::shared_ptr<gateway::HttpTransport> transport = nullptr);
    std::vector<std::vector<float>> embed_batch(const std::vector<std::string>& texts) override;
    std::string provider_id() const override { return profile_.model; }
    /// Unknown until the first call; 0 means "accept what the server sends".
    int dims() const override { return dims_; }

private:
    gateway::EmbeddingProfile profile_;
    std::shared_ptr<gateway::HttpTransport> transport_;
    int dims_ = 0;
};

struct VectorIndex {
    std::vector<Passage> passages;
    std::vector<EmbeddingVector> vectors;   // parallel to passages
    std::string provider_id;
    int dims = 0;
    RetrievalConfig config;
    long long built_at = 0;                 // unix seconds; 0 after load_index
};

VectorIndex build_index(const std::vector<SourceDocument>& docs, EmbeddingProvider& provider,
                        const RetrievalConfig& cfg);

struct SearchHit {
    Passage passage;
    double score = 0.0;   // cosine similarity in [-1, 1]
};

/// Exact top-k by cosine similarity; ties broken by passage_id ascending.
/// Result length is min(k, passage count).
std::vector<SearchHit> search(const VectorIndex& index, const EmbeddingVector& query, int k);

/// Binary index file: magic + version header, passage records, then raw
/// little-endian float32 vector payloads. Writing is deterministic, so two
/// builds over the same corpus with the same provider hash identically.
void save_index(const VectorIndex& index, const std::string& path);
VectorIndex load_index(const std::string& path);

/// One document per regular file in `dir`; filename stem becomes doc_id.
std::vector<SourceDocument> load_corpus_dir(const std::string& dir);

} // namespace finqa::corpus
