#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "text2sql/errors.hpp"
#include "text2sql/prompts.hpp"
#include "text2sql/text_util.hpp"

namespace text2sql {

// ---------------------------------------------------------------------------
// Embeddings
// ---------------------------------------------------------------------------

struct EmbeddingVector {
    std::vector<double> values;
    double norm = 0.0;

    static EmbeddingVector of(std::vector<double> values) {
        EmbeddingVector v;
        double sq = 0.0;
        for (double x : values) sq += x * x;
        v.values = std::move(values);
        v.norm = std::sqrt(sq);
        return v;
    }

    std::size_t dimension() const { return values.size(); }
};

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::size_t dimension() const = 0;

    EmbeddingVector embed(const std::string& text) {
        if (trim(text).empty()) raise(ErrorCode::invalid_input, "cannot embed empty text");
        return do_embed(text);
    }

protected:
    virtual EmbeddingVector do_embed(const std::string& text) = 0;
};

// Deterministic hashed bag-of-words embedder. Each lower-cased token lands in
// one of `dimension` buckets with a hash-derived sign; the result is
// L2-normalized, so identical texts embed identically and the norm is 1.
class OfflineEmbedder : public Embedder {
public:
    explicit OfflineEmbedder(std::size_t dimension = 384) : dim_(dimension) {
        if (dim_ == 0) raise(ErrorCode::invalid_input, "embedder dimension must be positive");
    }

    std::size_t dimension() const override { return dim_; }

protected:
    EmbeddingVector do_embed(const std::string& text) override {
        std::vector<double> values(dim_, 0.0);
        for (const auto& token : tokenize(text)) {
            std::uint64_t h = fnv1a64(token);
            double sign = ((h >> 32) & 1u) ? 1.0 : -1.0;
            values[h % dim_] += sign;
        }
        auto v = EmbeddingVector::of(std::move(values));
        if (v.norm == 0.0) {
            // opposite-sign tokens cancelled each other out; fall back to a
            // single whole-text bucket so the vector stays nonzero
            v.values.assign(dim_, 0.0);
            v.values[fnv1a64(trim(text)) % dim_] = 1.0;
            v.norm = 1.0;
        }
        for (double& x : v.values) x /= v.norm;
        v.norm = 1.0;
        return v;
    }

private:
    std::size_t dim_;
};

// ---------------------------------------------------------------------------
// Chat / structured completion
// ---------------------------------------------------------------------------

struct PromptRequest {
    std::string template_id;
    std::map<std::string, std::string> slots;
    std::string expected_shape;
};

struct StructuredResponse {
    std::string shape_id;
    json payload;
};

// Builds a request against the registry, checking that the template exists
// and every declared slot is filled.
inline PromptRequest make_request(const std::string& template_id,
                                  std::map<std::string, std::string> slots) {
    const PromptTemplate& tpl = PromptRegistry::instance().get(template_id);
    for (const auto& slot : tpl.slots) {
        if (!slots.count(slot))
            raise(ErrorCode::invalid_input,
                  "template '" + template_id + "' slot '" + slot + "' not filled");
    }
    return PromptRequest{template_id, std::move(slots), tpl.shape_id};
}

class ChatProvider {
public:
    virtual ~ChatProvider() = default;

    // Validates the model output against the expected shape; one reprompt on
    // a schema-invalid reply, then MalformedResponse.
    StructuredResponse complete(const PromptRequest& request) {
        if (!PromptRegistry::instance().knows(request.template_id))
            raise(ErrorCode::invalid_input, "unknown template '" + request.template_id + "'");
        calls_.fetch_add(1, std::memory_order_relaxed);
        json payload = do_complete(request, "");
        std::string why;
        if (ShapeRegistry::instance().validate(request.expected_shape, payload, &why))
            return {request.expected_shape, payload};
        calls_.fetch_add(1, std::memory_order_relaxed);
        payload = do_complete(request, why);
        if (ShapeRegistry::instance().validate(request.expected_shape, payload, &why))
            return {request.expected_shape, payload};
        raise(ErrorCode::malformed_response,
              "response for '" + request.template_id + "' failed shape check: " + why);
    }

    std::size_t call_count() const { return calls_.load(std::memory_order_relaxed); }

protected:
    // `rejection` is empty on the first attempt and carries the shape-check
    // failure on the reprompt.
    virtual json do_complete(const PromptRequest& request, const std::string& rejection) = 0;

private:
    std::atomic<std::size_t> calls_{0};
};

// Exactly v responses; a failing call aborts the whole batch, never a
// partial result. Aggregation downstream must not depend on order.
inline std::vector<StructuredResponse> vote_complete(ChatProvider& provider,
                                                     const PromptRequest& request, int v) {
    if (v < 1) raise(ErrorCode::invalid_input, "vote count must be >= 1");
    std::vector<StructuredResponse> responses;
    responses.reserve(static_cast<std::size_t>(v));
    for (int i = 0; i < v; ++i) responses.push_back(provider.complete(request));
    return responses;
}

// Scripted chat provider: responses are keyed by (template_id, fingerprint of
// slot values). A key may hold a sequence of payloads consumed call by call;
// the last payload repeats once the sequence is exhausted.
class FixtureChat : public ChatProvider {
public:
    static std::string fingerprint(const std::map<std::string, std::string>& slots) {
        std::uint64_t hash = 14695981039346656037ull;
        for (const auto& [name, value] : slots) {
            hash = fnv1a64(name, hash);
            hash = fnv1a64("\x1f", hash);
            hash = fnv1a64(value, hash);
            hash = fnv1a64("\x1e", hash);
        }
        return to_hex(hash);
    }

    void script(const std::string& template_id, const std::map<std::string, std::string>& slots,
                json payload) {
        std::lock_guard lock(mu_);
        fixtures_[key(template_id, fingerprint(slots))].push_back(std::move(payload));
    }

    void script_many(const std::string& template_id,
                     const std::map<std::string, std::string>& slots, std::vector<json> payloads) {
        std::lock_guard lock(mu_);
        auto& seq = fixtures_[key(template_id, fingerprint(slots))];
        for (auto& p : payloads) seq.push_back(std::move(p));
    }

    // Layout: <dir>/<template_id>/<fingerprint>.json, file content either one
    // payload or an array of payloads.
    void load_directory(const std::filesystem::path& dir) {
        namespace fs = std::filesystem;
        if (!fs::exists(dir)) return;
        for (const auto& tpl_dir : fs::directory_iterator(dir)) {
            if (!tpl_dir.is_directory()) continue;
            const std::string template_id = tpl_dir.path().filename().string();
            for (const auto& file : fs::directory_iterator(tpl_dir.path())) {
                if (file.path().extension() != ".json") continue;
                std::ifstream in(file.path());
                json content;
                try {
                    in >> content;
                } catch (const json::exception& e) {
                    raise(ErrorCode::io_error,
                          "unreadable fixture " + file.path().string() + ": " + e.what());
                }
                std::lock_guard lock(mu_);
                auto& seq = fixtures_[key(template_id, file.path().stem().string())];
                if (content.is_array())
                    for (auto& p : content) seq.push_back(std::move(p));
                else
                    seq.push_back(std::move(content));
            }
        }
    }

    void reset_cursors() {
        std::lock_guard lock(mu_);
        cursors_.clear();
    }

protected:
    json do_complete(const PromptRequest& request, const std::string&) override {
        const std::string k = key(request.template_id, fingerprint(request.slots));
        std::lock_guard lock(mu_);
        auto it = fixtures_.find(k);
        if (it == fixtures_.end())
            raise(ErrorCode::missing_fixture, "no scripted response for " + k);
        std::size_t& cursor = cursors_[k];
        const auto& seq = it->second;
        json payload = seq[std::min(cursor, seq.size() - 1)];
        ++cursor;
        return payload;
    }

private:
    static std::string key(const std::string& template_id, const std::string& fp) {
        return template_id + "/" + fp;
    }

    std::map<std::string, std::vector<json>> fixtures_;
    std::map<std::string, std::size_t> cursors_;
    std::mutex mu_;
};

// ---------------------------------------------------------------------------
// Reranking
// ---------------------------------------------------------------------------

class Reranker {
public:
    virtual ~Reranker() = default;

    double rerank(const std::string& query, const std::string& candidate) {
        if (trim(query).empty() || trim(candidate).empty())
            raise(ErrorCode::invalid_input, "rerank inputs must be nonempty");
        double score = do_rerank(query, candidate);
        return std::min(1.0, std::max(0.0, score));
    }

protected:
    virtual double do_rerank(const std::string& query, const std::string& candidate) = 0;
};

// Token-set Jaccard overlap; symmetric and monotone in lexical overlap.
class JaccardReranker : public Reranker {
protected:
    double do_rerank(const std::string& query, const std::string& candidate) override {
        auto a = token_set(query);
        auto b = token_set(candidate);
        std::size_t inter = 0;
        for (const auto& t : a) inter += b.count(t);
        std::size_t uni = a.size() + b.size() - inter;
        if (uni == 0) return 0.0;
        return static_cast<double>(inter) / static_cast<double>(uni);
    }
};

// ---------------------------------------------------------------------------
// Remote (HTTP) providers
// ---------------------------------------------------------------------------

struct HttpProviderConfig {
    std::string url;           // e.g. http://host:port/path
    std::string model;
    std::string api_key_env;   // name of the env var holding the key
    int max_retries = 2;       // transport retries beyond the first attempt
    int backoff_ms = 100;
};

namespace detail {

inline std::string api_key_from_env(const std::string& env_name) {
    if (env_name.empty()) return "";
    const char* value = std::getenv(env_name.c_str());
    return value ? value : "";
}

// Splits "http://host:port/path" into client base and path.
inline std::pair<std::string, std::string> split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    auto path_start = url.find('/', host_start);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace detail

}  // namespace text2sql

#ifdef TEXT2SQL_ENABLE_HTTP
#include <httplib.h>

namespace text2sql {

namespace detail {

// POSTs a JSON body, retrying transport failures with linear backoff.
inline json http_post_json(const HttpProviderConfig& config, const json& body) {
    auto [base, path] = split_url(config.url);
    std::string last_error;
    for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(config.backoff_ms * attempt));
        httplib::Client client(base);
        client.set_connection_timeout(10);
        client.set_read_timeout(60);
        httplib::Headers headers;
        const std::string key = api_key_from_env(config.api_key_env);
        if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);
        auto res = client.Post(path, headers, body.dump(), "application/json");
        if (!res) {
            last_error = "transport error " + httplib::to_string(res.error());
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            last_error = "HTTP status " + std::to_string(res->status);
            continue;
        }
        try {
            return json::parse(res->body);
        } catch (const json::exception& e) {
            last_error = std::string("unparseable body: ") + e.what();
        }
    }
    raise(ErrorCode::provider_unavailable,
          config.url + " failed after " + std::to_string(config.max_retries + 1) +
              " attempts: " + last_error);
}

}  // namespace detail

class HttpChatProvider : public ChatProvider {
public:
    explicit HttpChatProvider(HttpProviderConfig config) : config_(std::move(config)) {}

protected:
    json do_complete(const PromptRequest& request, const std::string& rejection) override {
        const PromptTemplate& tpl = PromptRegistry::instance().get(request.template_id);
        std::string prompt = PromptRegistry::render(tpl, request.slots);
        if (!rejection.empty())
            prompt += "\n\nYour previous reply was rejected (" + rejection +
                      "). Reply again with JSON matching the required shape.";
        json response = detail::http_post_json(config_, {{"model", config_.model},
                                                         {"prompt", prompt}});
        // either {"content": "<json text>"} or the payload itself
        if (response.is_object() && response.contains("content") &&
            response["content"].is_string()) {
            try {
                return json::parse(response["content"].get<std::string>());
            } catch (const json::exception&) {
                return json{{"unparseable", response["content"]}};
            }
        }
        return response;
    }

private:
    HttpProviderConfig config_;
};

class HttpEmbedder : public Embedder {
public:
    HttpEmbedder(HttpProviderConfig config, std::size_t dimension)
        : config_(std::move(config)), dim_(dimension) {}

    std::size_t dimension() const override { return dim_; }

protected:
    EmbeddingVector do_embed(const std::string& text) override {
        json response =
            detail::http_post_json(config_, {{"model", config_.model}, {"input", text}});
        if (!response.contains("embedding") || !response["embedding"].is_array())
            raise(ErrorCode::provider_unavailable, "embedding response missing 'embedding'");
        auto v = EmbeddingVector::of(response["embedding"].get<std::vector<double>>());
        if (v.dimension() != dim_)
            raise(ErrorCode::dimension_mismatch,
                  "provider returned dimension " + std::to_string(v.dimension()) +
                      ", configured " + std::to_string(dim_));
        if (v.norm == 0.0) raise(ErrorCode::invalid_input, "provider returned a zero vector");
        return v;
    }

private:
    HttpProviderConfig config_;
    std::size_t dim_;
};

class HttpReranker : public Reranker {
public:
    explicit HttpReranker(HttpProviderConfig config) : config_(std::move(config)) {}

protected:
    double do_rerank(const std::string& query, const std::string& candidate) override {
        json response = detail::http_post_json(
            config_, {{"model", config_.model}, {"query", query}, {"candidate", candidate}});
        if (!response.contains("score") || !response["score"].is_number())
            raise(ErrorCode::provider_unavailable, "rerank response missing 'score'");
        return response["score"].get<double>();
    }

private:
    HttpProviderConfig config_;
};

}  // namespace text2sql
#endif  // TEXT2SQL_ENABLE_HTTP
