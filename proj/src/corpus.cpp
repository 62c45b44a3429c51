#include "finqa/corpus.hpp"

#include "finqa/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <queue>

namespace finqa::corpus {

using nlohmann::json;

void validate_config(const RetrievalConfig& cfg) {
    if (cfg.k < 1) throw InvalidRequestError("retrieval k must be >= 1");
    if (cfg.chunk_size_words < 1) throw InvalidRequestError("chunk_size_words must be positive");
    if (cfg.overlap_words < 0 || cfg.overlap_words >= cfg.chunk_size_words) {
        throw InvalidRequestError("overlap_words must be in [0, chunk_size_words)");
    }
}

namespace {

std::string passage_id_for(const std::string& doc_id, int ordinal) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06d", ordinal);
    return doc_id + "#" + buf;
}

} // namespace

std::vector<Passage> chunk_document(const SourceDocument& doc, const RetrievalConfig& cfg) {
    validate_config(cfg);
    std::vector<std::string> words = util::split_words(doc.body);
    if (words.empty()) throw EmptyDocumentError("document '" + doc.doc_id + "' has no words");

    const size_t size = static_cast<size_t>(cfg.chunk_size_words);
    const size_t stride = size - static_cast<size_t>(cfg.overlap_words);

    std::vector<Passage> passages;
    int ordinal = 0;
    for (size_t start = 0; start < words.size(); start += stride) {
        size_t end = std::min(start + size, words.size());
        std::string text;
        for (size_t i = start; i < end; ++i) {
            if (i > start) text.push_back(' ');
            text += words[i];
        }
        Passage p;
        p.passage_id = passage_id_for(doc.doc_id, ordinal);
        p.doc_id = doc.doc_id;
        p.ordinal = ordinal;
        p.word_count = static_cast<int>(end - start);
        p.text = std::move(text);
        passages.push_back(std::move(p));
        ++ordinal;
    }
    return passages;
}

std::vector<EmbeddingVector> embed(EmbeddingProvider& provider,
                                   const std::vector<std::string>& texts) {
    if (texts.empty()) throw ProviderError("embed called with no texts");
    std::vector<std::vector<float>> raw = provider.embed_batch(texts);
    if (raw.size() != texts.size()) {
        throw ProviderError("provider returned " + std::to_string(raw.size()) + " vectors for " +
                            std::to_string(texts.size()) + " texts");
    }
    std::vector<EmbeddingVector> out;
    out.reserve(raw.size());
    int dims = 0;
    for (auto& values : raw) {
        if (values.empty()) throw ProviderError("provider returned an empty vector");
        if (dims == 0) {
            dims = static_cast<int>(values.size());
        } else if (static_cast<int>(values.size()) != dims) {
            throw DimensionMismatchError("provider returned vectors of dims " +
                                         std::to_string(dims) + " and " +
                                         std::to_string(values.size()) + " in one batch");
        }
        double norm_sq = 0.0;
        for (float v : values) norm_sq += static_cast<double>(v) * static_cast<double>(v);
        double norm = std::sqrt(norm_sq);
        if (norm < 1e-12) {
            values.assign(values.size(), 0.0f);
            values[0] = 1.0f;
        } else {
            for (float& v : values) v = static_cast<float>(static_cast<double>(v) / norm);
        }
        out.push_back({dims, std::move(values)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Providers

HashEmbeddingProvider::HashEmbeddingProvider(int dims) : dims_(dims) {
    if (dims_ < 1) throw ProviderError("hash provider dims must be positive");
}

std::vector<std::vector<float>> HashEmbeddingProvider::embed_batch(
    const std::vector<std::string>& texts) {
    std::vector<std::vector<float>> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        std::vector<float> vec(static_cast<size_t>(dims_), 0.0f);
        for (const auto& word : util::split_words(util::to_lower(text))) {
            std::uint64_t h = util::fnv1a64(word);
            size_t bucket = static_cast<size_t>(h % static_cast<std::uint64_t>(dims_));
            float sign = ((h >> 32) & 1u) != 0 ? 1.0f : -1.0f;
            vec[bucket] += sign;
        }
        out.push_back(std::move(vec));
    }
    return out;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(gateway::EmbeddingProfile profile,
                                             std::shared_ptr<gateway::HttpTransport> transport)
    : profile_(std::move(profile)),
      transport_(transport ? std::move(transport) : gateway::make_httplib_transport()) {}

std::vector<std::vector<float>> HttpEmbeddingProvider::embed_batch(
    const std::vector<std::string>& texts) {
    std::string api_key;
    if (!profile_.auth_env_var.empty()) {
        const char* value = std::getenv(profile_.auth_env_var.c_str());
        if (value == nullptr || *value == '\0') {
            throw AuthError("environment variable " + profile_.auth_env_var +
                            " is not set for the embedding endpoint");
        }
        api_key = value;
    }

    json body;
    body["model"] = profile_.model;
    body["input"] = texts;

    std::vector<std::pair<std::string, std::string>> headers;
    if (!api_key.empty()) headers.emplace_back("Authorization", "Bearer " + api_key);

    std::string url = profile_.endpoint;
    while (!url.empty() && url.back() == '/') url.pop_back();
    url += "/embeddings";

    gateway::HttpResult result = transport_->post(url, headers, body.dump());
    if (result.status != 200) {
        throw ProviderError("embedding endpoint returned HTTP " + std::to_string(result.status) +
                            ": " + result.body);
    }
    json payload;
    try {
        payload = json::parse(result.body);
    } catch (const json::exception& ex) {
        throw ProviderError(std::string("embedding response is not valid JSON: ") + ex.what());
    }
    if (!payload.contains("data") || !payload["data"].is_array()) {
        throw ProviderError("embedding response has no data array");
    }
    std::vector<std::vector<float>> out;
    for (const auto& item : payload["data"]) {
        if (!item.contains("embedding") || !item["embedding"].is_array()) {
            throw ProviderError("embedding entry has no embedding array");
        }
        std::vector<float> vec;
        vec.reserve(item["embedding"].size());
        for (const auto& v : item["embedding"]) vec.push_back(v.get<float>());
        if (dims_ == 0) dims_ = static_cast<int>(vec.size());
        out.push_back(std::move(vec));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Index build / search

VectorIndex build_index(const std::vector<SourceDocument>& docs, EmbeddingProvider& provider,
                        const RetrievalConfig& cfg) {
    validate_config(cfg);
    if (docs.empty()) throw EmptyCorpusError("no documents to index");

    VectorIndex index;
    index.config = cfg;
    index.provider_id = provider.provider_id();

    std::vector<std::string> texts;
    for (const auto& doc : docs) {
        for (auto& passage : chunk_document(doc, cfg)) {
            texts.push_back(passage.text);
            index.passages.push_back(std::move(passage));
        }
    }

    std::vector<EmbeddingVector> vectors = embed(provider, texts);
    index.dims = vectors.front().dims;
    index.vectors = std::move(vectors);
    index.built_at = std::chrono::duration_cast<std::chrono::seconds>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count();
    return index;
}

namespace {

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    double dot = 0.0, norm_a = 0.0, norm_b = 0.0;
    for (size_t i = 0; i < a.values.size(); ++i) {
        double x = a.values[i];
        double y = b.values[i];
        dot += x * y;
        norm_a += x * x;
        norm_b += y * y;
    }
    double denom = std::sqrt(norm_a) * std::sqrt(norm_b);
    if (denom < 1e-300) return 0.0;
    return dot / denom;
}

struct HeapEntry {
    double score;
    size_t idx;
};

} // namespace

std::vector<SearchHit> search(const VectorIndex& index, const EmbeddingVector& query, int k) {
    if (index.passages.empty()) throw EmptyIndexError("index has no passages");
    if (k < 1) throw InvalidRequestError("k must be >= 1");
    if (query.dims != index.dims || static_cast<int>(query.values.size()) != index.dims) {
        throw DimensionMismatchError("query dims " + std::to_string(query.dims) +
                                     " != index dims " + std::to_string(index.dims));
    }

    // Worst-of-heap top-k selection; "worse" = lower score, or equal score
    // with a later passage_id.
    auto worse = [&](const HeapEntry& a, const HeapEntry& b) {
        if (a.score != b.score) return a.score < b.score;
        return index.passages[a.idx].passage_id > index.passages[b.idx].passage_id;
    };
    auto heap_cmp = [&](const HeapEntry& a, const HeapEntry& b) { return worse(b, a); };

    size_t want = std::min<size_t>(static_cast<size_t>(k), index.passages.size());
    std::priority_queue<HeapEntry, std::vector<HeapEntry>, decltype(heap_cmp)> heap(heap_cmp);
    for (size_t i = 0; i < index.passages.size(); ++i) {
        HeapEntry entry{cosine(query, index.vectors[i]), i};
        if (heap.size() < want) {
            heap.push(entry);
        } else if (worse(heap.top(), entry)) {
            heap.pop();
            heap.push(entry);
        }
    }

    std::vector<SearchHit> hits(heap.size());
    for (size_t pos = heap.size(); pos-- > 0;) {
        const HeapEntry& top = heap.top();
        hits[pos] = {index.passages[top.idx], top.score};
        heap.pop();
    }
    return hits;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr char kMagic[4] = {'F', 'Q', 'I', 'X'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_str(std::string& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out += s;
}

void put_f32(std::string& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof(bits));
    put_u32(out, bits);
}

class Reader {
public:
    explicit Reader(std::string data) : data_(std::move(data)) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + static_cast<size_t>(i)])) << (8 * i);
        }
        pos_ += 4;
        return v;
    }

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + static_cast<size_t>(i)])) << (8 * i);
        }
        pos_ += 8;
        return v;
    }

    std::string str() {
        std::uint32_t len = u32();
        need(len);
        std::string out = data_.substr(pos_, len);
        pos_ += len;
        return out;
    }

    float f32() {
        std::uint32_t bits = u32();
        float f;
        std::memcpy(&f, &bits, sizeof(f));
        return f;
    }

    bool at_end() const { return pos_ == data_.size(); }

private:
    void need(size_t n) {
        if (pos_ + n > data_.size()) throw CorruptIndexError("index file truncated");
    }
    std::string data_;
    size_t pos_ = 0;
};

} // namespace

void save_index(const VectorIndex& index, const std::string& path) {
    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_str(out, index.provider_id);
    put_u32(out, static_cast<std::uint32_t>(index.dims));
    put_u32(out, static_cast<std::uint32_t>(index.config.k));
    put_u32(out, static_cast<std::uint32_t>(index.config.chunk_size_words));
    put_u32(out, static_cast<std::uint32_t>(index.config.overlap_words));
    put_u64(out, static_cast<std::uint64_t>(index.passages.size()));
    for (const auto& p : index.passages) {
        put_str(out, p.passage_id);
        put_str(out, p.doc_id);
        put_u32(out, static_cast<std::uint32_t>(p.ordinal));
        put_u32(out, static_cast<std::uint32_t>(p.word_count));
        put_str(out, p.text);
    }
    for (const auto& vec : index.vectors) {
        for (float f : vec.values) put_f32(out, f);
    }
    util::write_file(path, out);
}

VectorIndex load_index(const std::string& path) {
    std::string raw = util::read_file(path);
    if (raw.size() < 8 || std::memcmp(raw.data(), kMagic, 4) != 0) {
        throw CorruptIndexError("not an index file: " + path);
    }
    Reader r(raw.substr(4));
    std::uint32_t version = r.u32();
    if (version != kVersion) {
        throw CorruptIndexError("unsupported index version " + std::to_string(version));
    }
    VectorIndex index;
    index.provider_id = r.str();
    index.dims = static_cast<int>(r.u32());
    index.config.k = static_cast<int>(r.u32());
    index.config.chunk_size_words = static_cast<int>(r.u32());
    index.config.overlap_words = static_cast<int>(r.u32());
    std::uint64_t count = r.u64();
    index.passages.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        Passage p;
        p.passage_id = r.str();
        p.doc_id = r.str();
        p.ordinal = static_cast<int>(r.u32());
        p.word_count = static_cast<int>(r.u32());
        p.text = r.str();
        index.passages.push_back(std::move(p));
    }
    index.vectors.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        EmbeddingVector vec;
        vec.dims = index.dims;
        vec.values.reserve(static_cast<size_t>(index.dims));
        for (int d = 0; d < index.dims; ++d) vec.values.push_back(r.f32());
        index.vectors.push_back(std::move(vec));
    }
    if (!r.at_end()) throw CorruptIndexError("trailing bytes in index file");
    index.built_at = 0;
    return index;
}

std::vector<SourceDocument> load_corpus_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw IoError("corpus path is not a directory: " + dir);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<SourceDocument> docs;
    for (const auto& file : files) {
        SourceDocument doc;
        doc.doc_id = file.stem().string();
        doc.title = doc.doc_id;
        doc.body = util::read_file(file.string());
        docs.push_back(std::move(doc));
    }
    if (docs.empty()) throw EmptyCorpusError("no files in corpus directory: " + dir);
    return docs;
}

} // namespace finqa::corpus
