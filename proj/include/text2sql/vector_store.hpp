#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "text2sql/errors.hpp"
#include "text2sql/providers.hpp"

namespace text2sql {

// ---------------------------------------------------------------------------
// Categories and metadata
// ---------------------------------------------------------------------------

enum class Category {
    description,
    dependency,
    table_name,
    connected_tables,
    entity,
    init,
    normalized,
    main_clause,
    similar,
};

enum class SourceKind { document, example };

inline std::string_view category_name(Category c) {
    switch (c) {
        case Category::description: return "description";
        case Category::dependency: return "dependency";
        case Category::table_name: return "table_name";
        case Category::connected_tables: return "connected_tables";
        case Category::entity: return "entity";
        case Category::init: return "init";
        case Category::normalized: return "normalized";
        case Category::main_clause: return "main_clause";
        case Category::similar: return "similar";
    }
    return "?";
}

inline Category parse_category(std::string_view name) {
    for (Category c : {Category::description, Category::dependency, Category::table_name,
                       Category::connected_tables, Category::entity, Category::init,
                       Category::normalized, Category::main_clause, Category::similar}) {
        if (category_name(c) == name) return c;
    }
    raise(ErrorCode::invalid_input, "unknown category '" + std::string(name) + "'");
}

inline std::string_view source_kind_name(SourceKind k) {
    return k == SourceKind::document ? "document" : "example";
}

inline SourceKind parse_source_kind(std::string_view name) {
    if (name == "document") return SourceKind::document;
    if (name == "example") return SourceKind::example;
    raise(ErrorCode::invalid_input, "unknown source kind '" + std::string(name) + "'");
}

inline bool category_valid_for(SourceKind kind, Category category) {
    switch (category) {
        case Category::description:
        case Category::dependency:
        case Category::table_name:
        case Category::connected_tables:
            return kind == SourceKind::document;
        case Category::entity:
            return true;
        case Category::init:
        case Category::normalized:
        case Category::main_clause:
        case Category::similar:
            return kind == SourceKind::example;
    }
    return false;
}

struct EmbeddingEntry {
    std::string id;
    EmbeddingVector vector;
    std::string text;
    Category category = Category::description;
    SourceKind source_kind = SourceKind::document;
    std::string ref_id;  // owning TableDocument name or ExampleRecord id
};

struct MetadataFilter {
    std::set<Category> categories;          // empty = no restriction
    std::optional<SourceKind> source_kind;

    bool accepts(const EmbeddingEntry& entry) const {
        if (source_kind && *source_kind != entry.source_kind) return false;
        if (!categories.empty() && !categories.count(entry.category)) return false;
        return true;
    }
};

struct QueryHit {
    EmbeddingEntry entry;
    double similarity = 0.0;
};

// ---------------------------------------------------------------------------
// Similarity kernel: Sim(x,y) = (cos(x,y) + 1) / 2, range [0,1]
// ---------------------------------------------------------------------------

inline double similarity(const EmbeddingVector& x, const EmbeddingVector& y) {
    if (x.dimension() != y.dimension())
        raise(ErrorCode::dimension_mismatch,
              std::to_string(x.dimension()) + " vs " + std::to_string(y.dimension()));
    if (x.norm == 0.0 || y.norm == 0.0)
        raise(ErrorCode::invalid_input, "similarity of a zero vector is undefined");
    double dot = 0.0;
    for (std::size_t i = 0; i < x.values.size(); ++i) dot += x.values[i] * y.values[i];
    double cosine = dot / (x.norm * y.norm);
    cosine = std::min(1.0, std::max(-1.0, cosine));
    return (cosine + 1.0) / 2.0;
}

// ---------------------------------------------------------------------------
// Store: exhaustive flat-scan search over an in-memory collection.
// Concurrency contract: many readers or one writer.
// ---------------------------------------------------------------------------

class VectorStore {
public:
    explicit VectorStore(std::size_t dimension) : dim_(dimension) {
        if (dim_ == 0) raise(ErrorCode::invalid_input, "store dimension must be positive");
    }

    VectorStore(VectorStore&& other) noexcept
        : dim_(other.dim_),
          entries_(std::move(other.entries_)),
          by_id_(std::move(other.by_id_)),
          queries_(other.queries_.load()) {}

    VectorStore& operator=(VectorStore&& other) noexcept {
        dim_ = other.dim_;
        entries_ = std::move(other.entries_);
        by_id_ = std::move(other.by_id_);
        queries_ = other.queries_.load();
        return *this;
    }

    std::size_t dimension() const { return dim_; }

    std::size_t size() const {
        std::shared_lock lock(mu_);
        return entries_.size();
    }

    std::string add(EmbeddingEntry entry) {
        if (entry.id.empty()) raise(ErrorCode::invalid_input, "entry id must be nonempty");
        if (entry.ref_id.empty()) raise(ErrorCode::invalid_input, "entry ref_id must be nonempty");
        if (!category_valid_for(entry.source_kind, entry.category))
            raise(ErrorCode::invalid_input,
                  "category '" + std::string(category_name(entry.category)) +
                      "' is not valid for source kind '" +
                      std::string(source_kind_name(entry.source_kind)) + "'");
        if (entry.vector.dimension() != dim_)
            raise(ErrorCode::dimension_mismatch,
                  "entry dimension " + std::to_string(entry.vector.dimension()) +
                      ", store dimension " + std::to_string(dim_));
        if (entry.vector.norm == 0.0)
            raise(ErrorCode::invalid_input, "entry vector must be nonzero");
        std::unique_lock lock(mu_);
        if (by_id_.count(entry.id)) raise(ErrorCode::duplicate_id, entry.id);
        by_id_.emplace(entry.id, entries_.size());
        entries_.push_back(std::move(entry));
        return entries_.back().id;
    }

    std::optional<EmbeddingEntry> get(const std::string& id) const {
        std::shared_lock lock(mu_);
        auto it = by_id_.find(id);
        if (it == by_id_.end()) return std::nullopt;
        return entries_[it->second];
    }

    // Top-n by similarity, descending, ties broken by ascending id. Equals a
    // brute-force filtered scan by construction.
    std::vector<QueryHit> query(const EmbeddingVector& query_vector, const MetadataFilter& filter,
                                std::size_t n) const {
        if (n == 0) raise(ErrorCode::invalid_input, "query limit must be >= 1");
        if (query_vector.dimension() != dim_)
            raise(ErrorCode::dimension_mismatch,
                  "query dimension " + std::to_string(query_vector.dimension()) +
                      ", store dimension " + std::to_string(dim_));
        queries_.fetch_add(1, std::memory_order_relaxed);
        std::shared_lock lock(mu_);
        std::vector<QueryHit> hits;
        for (const auto& entry : entries_) {
            if (!filter.accepts(entry)) continue;
            hits.push_back({entry, similarity(query_vector, entry.vector)});
        }
        std::sort(hits.begin(), hits.end(), [](const QueryHit& a, const QueryHit& b) {
            if (a.similarity != b.similarity) return a.similarity > b.similarity;
            return a.entry.id < b.entry.id;
        });
        if (hits.size() > n) hits.resize(n);
        return hits;
    }

    std::vector<EmbeddingEntry> all() const {
        std::shared_lock lock(mu_);
        return entries_;
    }

    std::vector<EmbeddingEntry> entries_for(SourceKind kind, const std::string& ref_id) const {
        std::shared_lock lock(mu_);
        std::vector<EmbeddingEntry> out;
        for (const auto& e : entries_)
            if (e.source_kind == kind && e.ref_id == ref_id) out.push_back(e);
        return out;
    }

    // Removes every entry owned by (kind, ref_id); required before retraining
    // a document or example. Returns the number of entries removed.
    std::size_t purge(SourceKind kind, const std::string& ref_id) {
        std::unique_lock lock(mu_);
        std::size_t before = entries_.size();
        entries_.erase(std::remove_if(entries_.begin(), entries_.end(),
                                      [&](const EmbeddingEntry& e) {
                                          return e.source_kind == kind && e.ref_id == ref_id;
                                      }),
                       entries_.end());
        by_id_.clear();
        for (std::size_t i = 0; i < entries_.size(); ++i) by_id_.emplace(entries_[i].id, i);
        return before - entries_.size();
    }

    // Number of query() calls served; lets tests prove a retrieval stage was
    // never evaluated.
    std::size_t query_count() const { return queries_.load(std::memory_order_relaxed); }

    // -----------------------------------------------------------------------
    // Persistence: line-delimited JSON, one header record then one entry per
    // line. Doubles survive the round trip bit-exactly (max_digits10 dump).
    // -----------------------------------------------------------------------

    void persist(const std::filesystem::path& path) const {
        std::shared_lock lock(mu_);
        std::ofstream out(path, std::ios::trunc);
        if (!out) raise(ErrorCode::io_error, "cannot write " + path.string());
        json header{{"format", "text2sql-embeddings"},
                    {"version", 1},
                    {"dimension", dim_},
                    {"count", entries_.size()}};
        out << header.dump() << "\n";
        for (const auto& e : entries_) {
            json record{{"id", e.id},
                        {"category", category_name(e.category)},
                        {"source_kind", source_kind_name(e.source_kind)},
                        {"ref_id", e.ref_id},
                        {"text", e.text},
                        {"vector", e.vector.values}};
            out << record.dump() << "\n";
        }
        if (!out) raise(ErrorCode::io_error, "short write to " + path.string());
    }

    static VectorStore load(const std::filesystem::path& path,
                            std::optional<std::size_t> expected_dimension = std::nullopt) {
        std::ifstream in(path);
        if (!in) raise(ErrorCode::corrupt_store, "cannot open " + path.string());
        std::string line;
        if (!std::getline(in, line)) raise(ErrorCode::corrupt_store, "empty store file");
        json header;
        try {
            header = json::parse(line);
        } catch (const json::exception&) {
            raise(ErrorCode::corrupt_store, "unparseable header in " + path.string());
        }
        if (!header.is_object() || header.value("format", "") != "text2sql-embeddings" ||
            !header.contains("dimension") || !header.contains("count"))
            raise(ErrorCode::corrupt_store, "bad header in " + path.string());
        const std::size_t dim = header["dimension"].get<std::size_t>();
        if (expected_dimension && *expected_dimension != dim)
            raise(ErrorCode::dimension_mismatch,
                  "store dimension " + std::to_string(dim) + ", configured " +
                      std::to_string(*expected_dimension));
        VectorStore store(dim);
        const std::size_t count = header["count"].get<std::size_t>();
        std::size_t seen = 0;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            json record;
            try {
                record = json::parse(line);
                EmbeddingEntry e;
                e.id = record.at("id").get<std::string>();
                e.category = parse_category(record.at("category").get<std::string>());
                e.source_kind = parse_source_kind(record.at("source_kind").get<std::string>());
                e.ref_id = record.at("ref_id").get<std::string>();
                e.text = record.at("text").get<std::string>();
                e.vector = EmbeddingVector::of(record.at("vector").get<std::vector<double>>());
                store.add(std::move(e));
            } catch (const Error& e) {
                raise(ErrorCode::corrupt_store, std::string("bad record: ") + e.what());
            } catch (const json::exception& e) {
                raise(ErrorCode::corrupt_store, std::string("bad record: ") + e.what());
            }
            ++seen;
        }
        if (seen != count)
            raise(ErrorCode::corrupt_store, "expected " + std::to_string(count) +
                                                " entries, found " + std::to_string(seen));
        return store;
    }

private:
    std::size_t dim_;
    std::vector<EmbeddingEntry> entries_;
    std::unordered_map<std::string, std::size_t> by_id_;
    mutable std::shared_mutex mu_;
    mutable std::atomic<std::size_t> queries_{0};
};

}  // namespace text2sql
