#include "persona/rag.hpp"

#include "persona/errors.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

namespace persona::rag {

namespace {

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : text) {
        if (std::isalnum(static_cast<unsigned char>(ch))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        } else if (!cur.empty()) {
            tokens.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(cur);
    return tokens;
}

uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

int count_words(const std::string& s) {
    std::istringstream ss(s);
    std::string w;
    int n = 0;
    while (ss >> w) ++n;
    return n;
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

const std::map<Product, std::string>& product_synonyms() {
    // Keyword expansions steering retrieval toward each product's documents.
    static const std::map<Product, std::string> table = {
        {Product::kCreditCard, "credit card cashback rewards everyday spending"},
        {Product::kSavings, "savings account deposit interest emergency fund"},
        {Product::kPersonalLoan, "personal loan installment borrowing fixed rate"},
        {Product::kMortgage, "mortgage home loan refinance property"},
        {Product::kInvestment, "investment brokerage portfolio funds markets"},
        {Product::kCd, "certificate of deposit cd fixed term guaranteed yield"}};
    return table;
}

const std::map<Channel, std::string>& channel_cta() {
    static const std::map<Channel, std::string> table = {
        {Channel::kEmail, "Reply to this email or visit our site to learn more."},
        {Channel::kPush, "Tap the notification to explore the offer."},
        {Channel::kSms, "Text YES to get started today."},
        {Channel::kInApp, "Open the offers tab in the app to begin."}};
    return table;
}

std::string first_sentence(const std::string& text) {
    size_t end = text.find_first_of(".!?");
    if (end == std::string::npos) return trim(text);
    return trim(text.substr(0, end + 1));
}

std::string truncate_words(const std::string& s, int max_words) {
    std::istringstream ss(s);
    std::string w, out;
    int n = 0;
    while (ss >> w && n < max_words) {
        if (n > 0) out += ' ';
        out += w;
        ++n;
    }
    return out;
}

}  // namespace

std::string to_string(DocKind kind) {
    switch (kind) {
        case DocKind::kProductDescription: return "product_description";
        case DocKind::kComplianceConstraint: return "compliance_constraint";
        case DocKind::kMessagingGuideline: return "messaging_guideline";
    }
    throw DataError("unknown doc kind");
}

DocKind doc_kind_from_string(const std::string& s) {
    if (s == "product_description") return DocKind::kProductDescription;
    if (s == "compliance_constraint") return DocKind::kComplianceConstraint;
    if (s == "messaging_guideline") return DocKind::kMessagingGuideline;
    throw IngestError("unknown doc kind: " + s);
}

Eigen::VectorXd Embedder::embed(const std::string& text) const {
    auto tokens = tokenize(text);
    if (tokens.empty()) throw DataError("embed: empty text");
    std::map<std::string, int> tf;
    for (const auto& t : tokens) ++tf[t];
    Eigen::VectorXd v = Eigen::VectorXd::Zero(kDims);
    for (const auto& [token, count] : tf) {
        uint64_t h = fnv1a64(token);
        int idx = static_cast<int>(h % kDims);
        double sign = ((h >> 32) & 1) ? 1.0 : -1.0;
        double w = 1.0 + std::log(static_cast<double>(count));
        auto it = idf.find(token);
        if (it != idf.end()) w *= it->second;
        v(idx) += sign * w;
    }
    double norm = v.norm();
    if (norm <= 0) throw DataError("embed: degenerate text");
    return v / norm;
}

Eigen::VectorXd embed(const std::string& text) { return Embedder{}.embed(text); }

ChunkStore ingest_corpus(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw IngestError("corpus directory missing: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.path().extension() == ".txt") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IngestError("empty corpus: " + dir.string());

    ChunkStore store;
    std::set<std::string> seen_docs;
    for (const auto& file : files) {
        std::ifstream f(file, std::ios::binary);
        if (!f) throw IngestError("cannot read " + file.string());
        std::string line, doc_id, kind_str;
        // Header: `id:` and `kind:` lines before the body.
        while (std::getline(f, line)) {
            std::string t = trim(line);
            if (t.rfind("id:", 0) == 0) {
                doc_id = trim(t.substr(3));
            } else if (t.rfind("kind:", 0) == 0) {
                kind_str = trim(t.substr(5));
            } else if (t.empty() && (doc_id.empty() || kind_str.empty())) {
                continue;
            } else {
                break;
            }
            if (!doc_id.empty() && !kind_str.empty()) {
                line.clear();
                break;
            }
        }
        if (doc_id.empty() || kind_str.empty())
            throw IngestError("missing id/kind header in " + file.string());
        if (!seen_docs.insert(doc_id).second)
            throw IngestError("duplicate doc id '" + doc_id + "' in " + file.string());
        DocKind kind = doc_kind_from_string(kind_str);

        // Paragraph split on blank lines.
        std::vector<std::string> paragraphs;
        std::string para = trim(line);
        while (std::getline(f, line)) {
            std::string t = trim(line);
            if (t.empty()) {
                if (!para.empty()) paragraphs.push_back(para);
                para.clear();
            } else {
                if (!para.empty()) para += ' ';
                para += t;
            }
        }
        if (!para.empty()) paragraphs.push_back(para);
        if (paragraphs.empty()) throw IngestError("empty document body in " + file.string());

        // Greedy re-pack to at most 120 words per chunk, order preserved.
        int n = 0;
        std::string current;
        int current_words = 0;
        auto flush = [&]() {
            if (current.empty()) return;
            KnowledgeChunk c;
            c.doc_id = doc_id;
            c.kind = kind;
            c.text = current;
            c.chunk_id = "DOC-" + doc_id + "-" + std::to_string(++n);
            store.chunks.push_back(std::move(c));
            current.clear();
            current_words = 0;
        };
        for (const auto& p : paragraphs) {
            for (const auto& word : [&] {
                     std::vector<std::string> ws;
                     std::istringstream ss(p);
                     std::string w;
                     while (ss >> w) ws.push_back(w);
                     return ws;
                 }()) {
                if (current_words == 120) flush();
                if (!current.empty()) current += ' ';
                current += word;
                ++current_words;
            }
        }
        flush();
    }

    // Inverse-document-frequency over chunks, smoothed.
    std::map<std::string, int> df;
    for (const auto& c : store.chunks) {
        std::set<std::string> uniq;
        for (const auto& t : tokenize(c.text)) uniq.insert(t);
        for (const auto& t : uniq) ++df[t];
    }
    double n_chunks = static_cast<double>(store.chunks.size());
    for (const auto& [token, count] : df)
        store.embedder.idf[token] = std::log((1.0 + n_chunks) / (1.0 + count)) + 1.0;

    store.vectors.reserve(store.chunks.size());
    for (const auto& c : store.chunks) store.vectors.push_back(store.embedder.embed(c.text));
    return store;
}

RagQuery build_query(const PersonalizationAction& action, int segment, IntentState intent) {
    RagQuery q;
    q.product = action.product;
    q.channel = action.channel;
    q.timing = action.timing;
    q.level = action.level;
    q.intent = intent;
    q.segment = segment;
    q.text = "product:" + persona::to_string(action.product) +
             " channel:" + persona::to_string(action.channel) +
             " timing:" + persona::to_string(action.timing) +
             " level:" + persona::to_string(action.level) + " intent:" + persona::to_string(intent) +
             " segment:" + std::to_string(segment) + " " + product_synonyms().at(action.product);
    return q;
}

std::vector<ScoredChunk> retrieve(const ChunkStore& store, const std::string& query_text, int k) {
    if (store.chunks.empty()) throw DataError("retrieve: empty chunk store");
    if (k < 1) throw DataError("retrieve: k must be >= 1");
    Eigen::VectorXd q = store.embedder.embed(query_text);
    std::vector<size_t> order(store.chunks.size());
    std::vector<double> score(store.chunks.size());
    for (size_t i = 0; i < store.chunks.size(); ++i) {
        order[i] = i;
        score[i] = q.dot(store.vectors[i]);
    }
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (score[a] != score[b]) return score[a] > score[b];
        return store.chunks[a].chunk_id < store.chunks[b].chunk_id;
    });
    size_t take = std::min(static_cast<size_t>(k), order.size());
    std::vector<ScoredChunk> out;
    for (size_t i = 0; i < take; ++i)
        out.push_back({&store.chunks[order[i]], score[order[i]]});

    // Compliance guarantee: the audit trail requires at least one constraint
    // chunk in every retrieved context.
    bool has_compliance = std::any_of(out.begin(), out.end(), [](const ScoredChunk& s) {
        return s.chunk->kind == DocKind::kComplianceConstraint;
    });
    if (!has_compliance) {
        for (size_t i = take; i < order.size(); ++i) {
            if (store.chunks[order[i]].kind == DocKind::kComplianceConstraint) {
                out.back() = {&store.chunks[order[i]], score[order[i]]};
                break;
            }
        }
    }
    return out;
}

std::string assemble_prompt(const RagQuery& query, const std::vector<ScoredChunk>& chunks) {
    if (chunks.empty()) throw DataError("assemble_prompt: no chunks");
    std::ostringstream p;
    p << "You write one short marketing message for a retail bank customer.\n"
      << "Respond with a single JSON object with keys message, citations, product, channel.\n"
      << "citations must list only chunk ids shown below. Keep the message under 60 words.\n"
      << "Make no claims that are not supported by the provided context.\n\n"
      << "Prediction:\n"
      << "  product: " << persona::to_string(query.product) << "\n"
      << "  channel: " << persona::to_string(query.channel) << "\n"
      << "  timing: " << persona::to_string(query.timing) << "\n"
      << "  level: " << persona::to_string(query.level) << "\n"
      << "  intent: " << persona::to_string(query.intent) << "\n"
      << "  segment: " << query.segment << "\n\n"
      << "Context:\n";
    for (const auto& sc : chunks) p << "[" << sc.chunk->chunk_id << "] " << sc.chunk->text << "\n";
    return p.str();
}

namespace {

std::string generate_offline(const RagQuery& query, const std::vector<ScoredChunk>& chunks) {
    const KnowledgeChunk& top = *chunks.front().chunk;
    std::string body = first_sentence(top.text);
    std::string cta = channel_cta().at(query.channel);
    int budget = 60 - count_words(cta);
    std::string message = truncate_words(body, budget);
    if (!message.empty() && message.back() != '.' && message.back() != '!' &&
        message.back() != '?')
        message += '.';
    message += ' ' + cta;
    nlohmann::json j = {{"message", message},
                        {"citations", {top.chunk_id}},
                        {"product", persona::to_string(query.product)},
                        {"channel", persona::to_string(query.channel)}};
    return j.dump();
}

std::string generate_http(const std::string& prompt, const ClientConfig& cfg) {
    nlohmann::json body = {{"model", cfg.model},
                           {"temperature", cfg.temperature},
                           {"messages", {{{"role", "user"}, {"content", prompt}}}}};
    httplib::Client client(cfg.base_url);
    client.set_connection_timeout(cfg.timeout_seconds, 0);
    client.set_read_timeout(cfg.timeout_seconds, 0);
    httplib::Headers headers;
    const char* key = std::getenv(cfg.api_key_env.c_str());
    if (key != nullptr && *key != '\0')
        headers.emplace("Authorization", std::string("Bearer ") + key);

    std::string payload = body.dump();
    for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
        auto res = client.Post("/v1/chat/completions", headers, payload, "application/json");
        if (!res) continue;  // transport failure, retry
        if (res->status < 200 || res->status >= 300)
            throw GenerationError("endpoint returned status " + std::to_string(res->status));
        try {
            nlohmann::json j = nlohmann::json::parse(res->body);
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw GenerationError(std::string("malformed completion envelope: ") + e.what());
        }
    }
    throw GenerationError("transport failure after " + std::to_string(cfg.max_retries + 1) +
                          " attempts");
}

}  // namespace

std::string generate(const std::string& prompt, const RagQuery& query,
                     const std::vector<ScoredChunk>& chunks, const ClientConfig& config) {
    if (chunks.empty()) throw DataError("generate: no retrieved chunks");
    if (config.mode == "offline") return generate_offline(query, chunks);
    if (config.mode == "http") return generate_http(prompt, config);
    throw ConfigError("unknown rag mode: " + config.mode);
}

std::string repair(const std::string& raw) {
    std::string s = raw;
    // 1. Strip code fences.
    size_t fence = s.find("```");
    if (fence != std::string::npos) {
        size_t start = s.find('\n', fence);
        size_t close = s.rfind("```");
        if (start != std::string::npos && close > fence)
            s = s.substr(start + 1, close - start - 1);
    }
    // 2. First balanced-brace object, string- and escape-aware.
    size_t open = s.find('{');
    if (open != std::string::npos) {
        int depth = 0;
        bool in_string = false, escaped = false;
        for (size_t i = open; i < s.size(); ++i) {
            char ch = s[i];
            if (escaped) {
                escaped = false;
            } else if (ch == '\\' && in_string) {
                escaped = true;
            } else if (ch == '"') {
                in_string = !in_string;
            } else if (!in_string && ch == '{') {
                ++depth;
            } else if (!in_string && ch == '}') {
                if (--depth == 0) {
                    s = s.substr(open, i - open + 1);
                    break;
                }
            }
        }
    }
    // 3. Trailing commas before closing brackets.
    s = std::regex_replace(s, std::regex(",\\s*([}\\]])"), "$1");
    // 4. Smart quotes to straight quotes.
    struct Sub {
        const char* from;
        const char* to;
    };
    for (const Sub& sub : {Sub{"\xE2\x80\x9C", "\""}, Sub{"\xE2\x80\x9D", "\""},
                           Sub{"\xE2\x80\x98", "'"}, Sub{"\xE2\x80\x99", "'"}}) {
        size_t pos = 0;
        while ((pos = s.find(sub.from, pos)) != std::string::npos) {
            s.replace(pos, 3, sub.to);
            pos += 1;
        }
    }
    return s;
}

GeneratedMessage repair_and_parse(const std::string& raw, const std::string& fallback_product,
                                  const std::string& fallback_channel) {
    if (raw.empty()) throw DataError("repair_and_parse: empty raw text");
    GeneratedMessage msg;
    msg.raw = raw;
    msg.product = fallback_product;
    msg.channel = fallback_channel;
    nlohmann::json j = nlohmann::json::parse(repair(raw), nullptr, false);
    if (j.is_discarded() || !j.is_object()) return msg;
    if (!j.contains("message") || !j["message"].is_string()) return msg;
    if (!j.contains("citations") || !j["citations"].is_array()) return msg;
    std::string message = j["message"].get<std::string>();
    if (message.empty()) return msg;
    std::vector<std::string> citations;
    for (const auto& c : j["citations"]) {
        if (!c.is_string()) return msg;
        citations.push_back(c.get<std::string>());
    }
    msg.valid_json = true;
    msg.message = std::move(message);
    msg.citations = std::move(citations);
    msg.word_count = count_words(msg.message);
    if (j.contains("product") && j["product"].is_string())
        msg.product = j["product"].get<std::string>();
    if (j.contains("channel") && j["channel"].is_string())
        msg.channel = j["channel"].get<std::string>();
    return msg;
}

GeneratedMessage& validate_citations(GeneratedMessage& msg,
                                     const std::vector<ScoredChunk>& retrieved) {
    std::set<std::string> ids;
    for (const auto& sc : retrieved) ids.insert(sc.chunk->chunk_id);
    msg.citations_present = msg.valid_json && !msg.citations.empty();
    msg.citations_correct =
        msg.citations_present && std::all_of(msg.citations.begin(), msg.citations.end(),
                                             [&](const std::string& c) { return ids.count(c) > 0; });
    return msg;
}

GenerationMetrics score_generation(const std::vector<GeneratedMessage>& messages,
                                   const std::vector<bool>& responded) {
    if (messages.empty()) throw DataError("score_generation: empty batch");
    if (messages.size() != responded.size())
        throw DataError("score_generation: responded flags mismatch");
    GenerationMetrics m;
    m.n_requests = static_cast<int>(messages.size());
    double n = static_cast<double>(m.n_requests);
    int n_resp = 0, n_valid = 0, n_present = 0, n_correct = 0;
    double total_words = 0;
    std::set<std::string> distinct;
    long long total_bigrams = 0;
    for (size_t i = 0; i < messages.size(); ++i) {
        const auto& msg = messages[i];
        if (responded[i]) ++n_resp;
        if (msg.valid_json) {
            ++n_valid;
            total_words += msg.word_count;
            auto tokens = tokenize(msg.message);
            for (size_t t = 1; t < tokens.size(); ++t) {
                distinct.insert(tokens[t - 1] + " " + tokens[t]);
                ++total_bigrams;
            }
        }
        if (msg.citations_present) ++n_present;
        if (msg.citations_correct) ++n_correct;
    }
    m.response_rate = n_resp / n;
    m.json_validity = n_valid / n;
    m.citation_presence = n_present / n;
    m.citation_correctness = n_correct / n;
    m.error_rate = 1.0 - m.json_validity;
    m.avg_message_length = n_valid > 0 ? total_words / n_valid : 0.0;
    m.distinct_2 = total_bigrams > 0
                       ? static_cast<double>(distinct.size()) / static_cast<double>(total_bigrams)
                       : 0.0;
    return m;
}

RagRunResult run_batch(const ChunkStore& store, const std::vector<RagRequest>& requests,
                       const ClientConfig& config, int k) {
    if (requests.empty()) throw DataError("run_batch: no requests");
    RagRunResult out;
    for (const auto& req : requests) {
        RagQuery query = build_query(req.action, req.segment_id, req.intent);
        auto chunks = retrieve(store, query.text, k);
        std::string prompt = assemble_prompt(query, chunks);
        GeneratedMessage msg;
        bool responded = true;
        try {
            std::string raw = generate(prompt, query, chunks, config);
            msg = repair_and_parse(raw, persona::to_string(req.action.product),
                                   persona::to_string(req.action.channel));
        } catch (const GenerationError&) {
            responded = false;
            msg.product = persona::to_string(req.action.product);
            msg.channel = persona::to_string(req.action.channel);
        }
        validate_citations(msg, chunks);
        out.messages.push_back(std::move(msg));
        out.responded.push_back(responded);
    }
    out.metrics = score_generation(out.messages, out.responded);
    return out;
}

void write_messages_jsonl(const std::filesystem::path& path, const RagRunResult& result) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path.string());
    for (const auto& msg : result.messages) {
        if (!msg.citations_correct) continue;  // grounding contract: ship only audited messages
        nlohmann::json j = {{"message", msg.message},     {"citations", msg.citations},
                            {"product", msg.product},     {"channel", msg.channel},
                            {"word_count", msg.word_count}};
        f << j.dump() << '\n';
    }
}

void write_metrics_json(const std::filesystem::path& path, const GenerationMetrics& metrics) {
    nlohmann::json j = {{"response_rate", metrics.response_rate},
                        {"json_validity", metrics.json_validity},
                        {"citation_presence", metrics.citation_presence},
                        {"citation_correctness", metrics.citation_correctness},
                        {"avg_message_length", metrics.avg_message_length},
                        {"error_rate", metrics.error_rate},
                        {"distinct_2", metrics.distinct_2},
                        {"n_requests", metrics.n_requests}};
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path.string());
    f << j.dump(2) << '\n';
}

}  // namespace persona::rag
