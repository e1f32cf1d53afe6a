#pragma once

#include "persona/types.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace persona::rag {

enum class DocKind { kProductDescription, kComplianceConstraint, kMessagingGuideline };
std::string to_string(DocKind kind);
DocKind doc_kind_from_string(const std::string& s);

struct KnowledgeChunk {
    std::string chunk_id;  // "DOC-<doc>-<n>"
    std::string doc_id;
    std::string text;      // at most 120 words
    DocKind kind = DocKind::kProductDescription;
};

// Deterministic signed-hash term-frequency embedder with optional
// inverse-document-frequency weights; always L2-normalized.
struct Embedder {
    static constexpr int kDims = 1024;
    std::unordered_map<std::string, double> idf;  // empty: uniform weights

    Eigen::VectorXd embed(const std::string& text) const;
};

// Stateless default embedder (uniform term weights).
Eigen::VectorXd embed(const std::string& text);

struct ChunkStore {
    std::vector<KnowledgeChunk> chunks;
    Embedder embedder;                       // idf fitted over the chunks
    std::vector<Eigen::VectorXd> vectors;    // parallel to chunks
};

// Reads every *.txt under `dir`. Each file starts with `id: <doc_id>` and
// `kind: <doc_kind>` header lines; the body is paragraph-split and re-packed
// greedily into chunks of at most 120 words.
ChunkStore ingest_corpus(const std::filesystem::path& dir);

struct RagQuery {
    Product product = Product::kCreditCard;
    Channel channel = Channel::kEmail;
    Timing timing = Timing::kMidMonth;
    Level level = Level::kLow;
    IntentState intent = IntentState::kBrowsing;
    int segment = 0;
    std::string text;  // template string plus product keyword synonyms
};

RagQuery build_query(const PersonalizationAction& action, int segment, IntentState intent);

struct ScoredChunk {
    const KnowledgeChunk* chunk = nullptr;
    double score = 0;
};

// Top-k by cosine similarity, ties broken by chunk_id; the result always
// contains at least one compliance_constraint chunk when the store has one.
std::vector<ScoredChunk> retrieve(const ChunkStore& store, const std::string& query_text,
                                  int k = 4);

std::string assemble_prompt(const RagQuery& query, const std::vector<ScoredChunk>& chunks);

struct ClientConfig {
    std::string mode = "offline";  // "offline" or "http"
    std::string base_url;
    std::string model;
    std::string api_key_env = "PERSONA_API_KEY";
    double temperature = 0.2;
    int timeout_seconds = 30;
    int max_retries = 2;
};

// Offline mode fills the JSON template deterministically from the top chunk;
// http mode calls a chat-completions endpoint and returns the first choice.
// Transport failure after retries throws GenerationError.
std::string generate(const std::string& prompt, const RagQuery& query,
                     const std::vector<ScoredChunk>& chunks, const ClientConfig& config);

struct GeneratedMessage {
    std::string message;
    std::vector<std::string> citations;
    std::string product;
    std::string channel;
    std::string raw;
    bool valid_json = false;
    bool citations_present = false;
    bool citations_correct = false;
    int word_count = 0;
};

// Repair passes in order: strip code fences, extract the first balanced-brace
// object, drop trailing commas, normalize smart quotes. Idempotent.
std::string repair(const std::string& raw);

// Parse failure is encoded as valid_json = false (counted in error_rate),
// not an exception. Missing product/channel keys are backfilled.
GeneratedMessage repair_and_parse(const std::string& raw, const std::string& fallback_product,
                                  const std::string& fallback_channel);

GeneratedMessage& validate_citations(GeneratedMessage& msg,
                                     const std::vector<ScoredChunk>& retrieved);

struct GenerationMetrics {
    double response_rate = 0;
    double json_validity = 0;
    double citation_presence = 0;
    double citation_correctness = 0;
    double avg_message_length = 0;  // words, over valid messages
    double error_rate = 0;          // 1 - json_validity after repair
    double distinct_2 = 0;
    int n_requests = 0;
};

// `responded[i]` is false when transport failed and no raw text exists.
GenerationMetrics score_generation(const std::vector<GeneratedMessage>& messages,
                                   const std::vector<bool>& responded);

struct RagRequest {
    int64_t customer_id = 0;
    PersonalizationAction action;
    int segment_id = 0;
    IntentState intent = IntentState::kBrowsing;
};

struct RagRunResult {
    std::vector<GeneratedMessage> messages;  // all, in request order
    std::vector<bool> responded;
    GenerationMetrics metrics;
};

RagRunResult run_batch(const ChunkStore& store, const std::vector<RagRequest>& requests,
                       const ClientConfig& config, int k = 4);

// Shipped file: only citation-correct messages are written.
void write_messages_jsonl(const std::filesystem::path& path, const RagRunResult& result);
void write_metrics_json(const std::filesystem::path& path, const GenerationMetrics& metrics);

}  // namespace persona::rag
