#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "text2sql/errors.hpp"
#include "text2sql/providers.hpp"
#include "text2sql/sql_scan.hpp"
#include "text2sql/text_util.hpp"
#include "text2sql/vector_store.hpp"

namespace text2sql {

// ---------------------------------------------------------------------------
// Example model
// ---------------------------------------------------------------------------

struct EntitySpec {
    std::string label;
    std::string kind;  // category | metric | identifier
    std::map<std::string, std::string> attributes;
};

struct DataSourceRef {
    std::string table;
    std::vector<std::string> columns;
};

struct OperationSpec {
    std::string operation;
    std::string target;
    std::string condition;
};

struct ExampleRecord {
    std::string id;
    std::string initial_question;
    std::optional<std::string> sql;
    std::string normalized;
    std::string main_clause;
    std::string details;
    std::vector<EntitySpec> entities;
    std::vector<DataSourceRef> data_sources;
    std::vector<OperationSpec> operations;
    std::vector<std::string> variations;

    json to_json() const {
        json ents = json::array();
        for (const auto& e : entities)
            ents.push_back({{"label", e.label}, {"kind", e.kind}, {"attributes", e.attributes}});
        json sources = json::array();
        for (const auto& s : data_sources)
            sources.push_back({{"table", s.table}, {"columns", s.columns}});
        json ops = json::array();
        for (const auto& o : operations)
            ops.push_back(
                {{"operation", o.operation}, {"target", o.target}, {"condition", o.condition}});
        json out{{"id", id},
                 {"initial_question", initial_question},
                 {"normalized", normalized},
                 {"main_clause", main_clause},
                 {"details", details},
                 {"entities", ents},
                 {"data_sources", sources},
                 {"operations", ops},
                 {"variations", variations}};
        if (sql) out["sql"] = *sql;
        return out;
    }

    static ExampleRecord from_json(const json& j) {
        ExampleRecord r;
        r.id = j.at("id").get<std::string>();
        r.initial_question = j.value("initial_question", "");
        if (j.contains("sql") && j["sql"].is_string()) r.sql = j["sql"].get<std::string>();
        r.normalized = j.value("normalized", "");
        r.main_clause = j.value("main_clause", "");
        r.details = j.value("details", "");
        for (const auto& e : j.value("entities", json::array())) {
            EntitySpec spec;
            spec.label = e.at("label").get<std::string>();
            spec.kind = e.value("kind", "category");
            if (e.contains("attributes") && e["attributes"].is_object())
                for (auto it = e["attributes"].begin(); it != e["attributes"].end(); ++it)
                    spec.attributes[it.key()] =
                        it.value().is_string() ? it.value().get<std::string>() : it.value().dump();
            r.entities.push_back(std::move(spec));
        }
        for (const auto& s : j.value("data_sources", json::array()))
            r.data_sources.push_back({s.at("table").get<std::string>(),
                                      s.value("columns", std::vector<std::string>{})});
        for (const auto& o : j.value("operations", json::array()))
            r.operations.push_back({o.at("operation").get<std::string>(), o.value("target", ""),
                                    o.value("condition", "")});
        r.variations = j.value("variations", std::vector<std::string>{});
        return r;
    }

    std::vector<std::string> entity_labels() const {
        std::vector<std::string> labels;
        for (const auto& e : entities) labels.push_back(e.label);
        return labels;
    }
};

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

class ExamplePipeline {
public:
    struct Extraction {
        std::string normalized;
        std::vector<EntitySpec> entities;
        std::vector<DataSourceRef> data_sources;
        std::vector<OperationSpec> operations;
    };

    ExamplePipeline(ChatProvider& chat, Embedder& embedder, VectorStore& store,
                    int variation_count = 3)
        : chat_(chat), embedder_(embedder), store_(store), variation_count_(variation_count) {}

    int variation_count() const { return variation_count_; }

    // One LLM call returns the normalized question plus entities, data
    // sources and operations. Without SQL the data sources stay empty; with
    // SQL they are cross-checked against the tables the SQL actually names.
    Extraction normalize_and_extract(const std::string& question,
                                     const std::optional<std::string>& sql) {
        if (trim(question).empty()) raise(ErrorCode::invalid_input, "empty question");
        auto response = chat_.complete(make_request(
            "normalize_and_extract", {{"question", question}, {"sql", sql ? *sql : ""}}));
        Extraction result;
        const json& payload = response.payload;
        result.normalized = trim(payload.at("normalized").get<std::string>());
        if (result.normalized.empty())
            raise(ErrorCode::malformed_response, "normalized question is empty");
        for (const auto& e : payload.at("entities")) {
            EntitySpec spec;
            spec.label = trim(e.at("label").get<std::string>());
            spec.kind = casefold(trim(e.at("kind").get<std::string>()));
            if (spec.label.empty()) raise(ErrorCode::malformed_response, "entity label empty");
            if (spec.kind != "category" && spec.kind != "metric" && spec.kind != "identifier")
                raise(ErrorCode::malformed_response, "entity kind '" + spec.kind + "' unknown");
            if (e.contains("attributes") && e["attributes"].is_object())
                for (auto it = e["attributes"].begin(); it != e["attributes"].end(); ++it)
                    spec.attributes[it.key()] =
                        it.value().is_string() ? it.value().get<std::string>() : it.value().dump();
            result.entities.push_back(std::move(spec));
        }
        for (const auto& o : payload.at("operations"))
            result.operations.push_back({o.at("operation").get<std::string>(),
                                         o.value("target", ""), o.value("condition", "")});

        if (!sql || trim(*sql).empty()) {
            // no SQL, no assumptions: data sources must stay empty
            return result;
        }

        std::set<std::string> sql_tables;
        try {
            sql_tables = extract_sql_tables(*sql);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::no_tables_found) throw;
        }
        for (const auto& s : payload.at("data_sources")) {
            DataSourceRef ref;
            ref.table = trim(s.at("table").get<std::string>());
            std::set<std::string> dedup;
            for (const auto& c : s.at("columns")) {
                std::string col = trim(c.get<std::string>());
                if (!col.empty() && dedup.insert(col).second) ref.columns.push_back(col);
            }
            // only tables the SQL really references survive
            if (sql_tables.count(casefold(ref.table))) result.data_sources.push_back(std::move(ref));
        }

        // leak check: the normalized text must not carry a table identifier
        // out of the SQL unless the user said that word themselves
        auto normalized_tokens = token_set(result.normalized);
        auto question_tokens = token_set(question);
        for (const auto& table : sql_tables) {
            if (normalized_tokens.count(table) && !question_tokens.count(table))
                raise(ErrorCode::normalization_leak,
                      "normalized text leaks table '" + table + "'");
        }
        return result;
    }

    // Main clause vs modifier details. A modifier-free question keeps its
    // full text as the main clause and empty details.
    std::pair<std::string, std::string> split_main_clause(const std::string& question) {
        if (trim(question).empty()) raise(ErrorCode::invalid_input, "empty question");
        auto request = make_request("split_main_clause", {{"question", question}});
        for (int attempt = 0; attempt < 2; ++attempt) {
            auto response = chat_.complete(request);
            std::string main_clause = trim(response.payload.at("main_clause").get<std::string>());
            std::string details = trim(response.payload.at("details").get<std::string>());
            if (!main_clause.empty()) return {main_clause, details};
        }
        raise(ErrorCode::malformed_response, "main clause came back empty");
    }

    // k distinct rephrasings, none byte-equal to the normalized question.
    std::vector<std::string> generate_variations(const std::string& normalized,
                                                 const std::optional<std::string>& sql, int k) {
        if (trim(normalized).empty()) raise(ErrorCode::invalid_input, "empty normalized question");
        if (k < 1) raise(ErrorCode::invalid_input, "variation count must be >= 1");
        auto request = make_request("generate_variations", {{"normalized", normalized},
                                                            {"sql", sql ? *sql : ""},
                                                            {"count", std::to_string(k)}});
        for (int attempt = 0; attempt < 2; ++attempt) {
            auto response = chat_.complete(request);
            std::vector<std::string> variations;
            std::set<std::string> seen;
            for (const auto& v : response.payload.at("variations")) {
                std::string text = trim(v.get<std::string>());
                if (text.empty() || text == normalized) continue;
                if (seen.insert(text).second) variations.push_back(text);
                if (variations.size() == static_cast<std::size_t>(k)) break;
            }
            if (variations.size() == static_cast<std::size_t>(k)) return variations;
        }
        raise(ErrorCode::degenerate_variations,
              "model failed to produce " + std::to_string(k) + " distinct variations");
    }

    // The example's embedding cloud: init, normalized, main_clause, one
    // similar entry per variation, and one entity entry joining the labels.
    // With the default three variations that is seven embeddings.
    std::vector<EmbeddingEntry> train_example(const ExampleRecord& record) {
        if (record.id.empty()) raise(ErrorCode::invalid_input, "example record has no id");
        if (record.normalized.empty())
            raise(ErrorCode::invalid_input, "example record is not normalized");
        std::vector<EmbeddingEntry> entries;
        auto push = [&](const std::string& suffix, Category category, const std::string& text) {
            EmbeddingEntry e;
            e.id = "ex:" + record.id + ":" + suffix;
            e.category = category;
            e.source_kind = SourceKind::example;
            e.ref_id = record.id;
            e.text = text;
            e.vector = embedder_.embed(text);
            entries.push_back(std::move(e));
        };
        push("init", Category::init, record.initial_question);
        push("normalized", Category::normalized, record.normalized);
        push("main_clause", Category::main_clause, record.main_clause);
        for (std::size_t i = 0; i < record.variations.size(); ++i)
            push("similar:" + std::to_string(i), Category::similar, record.variations[i]);
        std::string entity_text = join(record.entity_labels(), "; ");
        if (!entity_text.empty()) push("entity", Category::entity, entity_text);

        if (!store_.entries_for(SourceKind::example, record.id).empty())
            raise(ErrorCode::retrain_conflict,
                  "example '" + record.id + "' already trained; purge it first");
        try {
            for (auto& e : entries) store_.add(e);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::duplicate_id)
                raise(ErrorCode::retrain_conflict,
                      "example '" + record.id + "' already trained; purge it first");
            throw;
        }
        return entries;
    }

    // Full ingestion of one question/SQL pair.
    ExampleRecord build_record(const std::string& id, const std::string& question,
                               const std::optional<std::string>& sql) {
        ExampleRecord record;
        record.id = id;
        record.initial_question = trim(question);
        if (sql && !trim(*sql).empty()) record.sql = *sql;
        auto extraction = normalize_and_extract(record.initial_question, record.sql);
        record.normalized = extraction.normalized;
        record.entities = std::move(extraction.entities);
        record.data_sources = std::move(extraction.data_sources);
        record.operations = std::move(extraction.operations);
        auto [main_clause, details] = split_main_clause(record.initial_question);
        record.main_clause = main_clause;
        record.details = details;
        record.variations = generate_variations(record.normalized, record.sql, variation_count_);
        return record;
    }

private:
    ChatProvider& chat_;
    Embedder& embedder_;
    VectorStore& store_;
    int variation_count_;
};

}  // namespace text2sql
