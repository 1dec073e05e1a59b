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
#include "text2sql/text_util.hpp"
#include "text2sql/vector_store.hpp"

namespace text2sql {

// ---------------------------------------------------------------------------
// Table documentation model
// ---------------------------------------------------------------------------

struct ColumnDescription {
    std::string column;
    std::string description;
};

struct TableDocument {
    std::string name;
    std::string summary;
    std::string purpose;
    std::string dependencies_thoughts;
    std::vector<std::string> keys;
    std::vector<std::string> connected_tables;
    std::vector<ColumnDescription> columns;
    std::vector<std::string> entities;
    std::vector<std::string> strong_entities;
    std::string raw_text;

    std::set<std::string> column_names() const {
        std::set<std::string> names;
        for (const auto& c : columns) names.insert(c.column);
        return names;
    }

    json to_json() const {
        json cols = json::array();
        for (const auto& c : columns)
            cols.push_back({{"column", c.column}, {"description", c.description}});
        return json{{"name", name},
                    {"summary", summary},
                    {"purpose", purpose},
                    {"dependencies_thoughts", dependencies_thoughts},
                    {"keys", keys},
                    {"connected_tables", connected_tables},
                    {"columns", cols},
                    {"entities", entities},
                    {"strong_entities", strong_entities},
                    {"raw_text", raw_text}};
    }

    static TableDocument from_json(const json& j) {
        TableDocument doc;
        doc.name = j.at("name").get<std::string>();
        doc.summary = j.value("summary", "");
        doc.purpose = j.value("purpose", "");
        doc.dependencies_thoughts = j.value("dependencies_thoughts", "");
        doc.keys = j.value("keys", std::vector<std::string>{});
        doc.connected_tables = j.value("connected_tables", std::vector<std::string>{});
        for (const auto& c : j.value("columns", json::array()))
            doc.columns.push_back(
                {c.at("column").get<std::string>(), c.value("description", "")});
        doc.entities = j.value("entities", std::vector<std::string>{});
        doc.strong_entities = j.value("strong_entities", std::vector<std::string>{});
        doc.raw_text = j.value("raw_text", "");
        return doc;
    }
};

struct SchemaColumn {
    std::string name;
    std::string type;
    bool key = false;
};

struct TableSchema {
    std::string table;
    std::vector<SchemaColumn> columns;

    void validate() const {
        if (table.empty()) raise(ErrorCode::invalid_input, "schema table name is empty");
        if (columns.empty()) raise(ErrorCode::invalid_input, "schema has no columns");
        std::set<std::string> seen;
        for (const auto& c : columns) {
            if (c.name.empty()) raise(ErrorCode::invalid_input, "schema column name is empty");
            if (!seen.insert(c.name).second)
                raise(ErrorCode::invalid_input, "duplicate schema column '" + c.name + "'");
        }
    }

    std::string render() const {
        std::string out = "table " + table + "\n";
        for (const auto& c : columns) {
            out += "  " + c.name + " " + c.type;
            if (c.key) out += " [key]";
            out += "\n";
        }
        return out;
    }
};

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

class DocPipeline {
public:
    DocPipeline(ChatProvider& chat, Embedder& embedder, VectorStore& store)
        : chat_(chat), embedder_(embedder), store_(store) {}

    // Structural extraction; entities stay empty for the voting step.
    TableDocument structure_document(const std::string& raw_text) {
        if (trim(raw_text).empty()) raise(ErrorCode::invalid_input, "empty documentation text");
        auto response = chat_.complete(make_request("structure_document", {{"raw_text", raw_text}}));
        TableDocument doc = parse_structured(response.payload);
        doc.raw_text = raw_text;
        validate_structure(doc);
        return doc;
    }

    // Voting entity extraction. Support is counted over case-folded,
    // whitespace-normalized labels, once per run. Labels seen in a single
    // run only are dropped; unanimous labels form the strong tier. v = 1
    // degenerates to both sets equal to the single run.
    std::pair<std::vector<std::string>, std::vector<std::string>> extract_entities(
        const TableDocument& doc, int v, bool strong_requires_unanimity = true) {
        if (v < 1) raise(ErrorCode::invalid_input, "vote count must be >= 1");
        auto request =
            make_request("extract_entities", {{"document", doc.to_json().dump(2)}});
        auto responses = vote_complete(chat_, request, v);

        std::map<std::string, int> support;
        for (const auto& response : responses) {
            std::set<std::string> seen;
            for (const auto& raw : response.payload.at("entities")) {
                std::string label = normalize_label(raw.get<std::string>());
                if (!label.empty()) seen.insert(label);
            }
            for (const auto& label : seen) support[label] += 1;
        }

        const int keep_at = v == 1 ? 1 : 2;
        const int strong_at = strong_requires_unanimity ? v : keep_at;
        std::vector<std::pair<std::string, int>> kept;
        for (const auto& [label, count] : support)
            if (count >= keep_at) kept.emplace_back(label, count);
        std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });

        std::vector<std::string> entities, strong;
        for (const auto& [label, count] : kept) {
            entities.push_back(label);
            if (count >= strong_at) strong.push_back(label);
        }
        return {entities, strong};
    }

    // Free-text description from a bare schema. The result is meant to feed
    // structure_document.
    std::string generate_document_from_schema(const TableSchema& schema,
                                              const std::string& domain_hint = "") {
        schema.validate();
        auto request = make_request("generate_document_from_schema",
                                    {{"schema", schema.render()}, {"domain_hint", domain_hint}});
        for (int attempt = 0; attempt < 2; ++attempt) {
            auto response = chat_.complete(request);
            std::string text = response.payload.at("text").get<std::string>();
            if (generated_text_ok(text, schema)) return text;
        }
        raise(ErrorCode::malformed_response,
              "generated description misses a mandated section or column for table '" +
                  schema.table + "'");
    }

    // Emits the training embeddings for one fully populated document:
    // description, dependency and table_name entries, one connected_tables
    // entry per neighbour and one entity entry per entity.
    std::vector<EmbeddingEntry> train_document(const TableDocument& doc) {
        if (doc.name.empty()) raise(ErrorCode::invalid_input, "document has no name");
        std::vector<EmbeddingEntry> entries;
        auto push = [&](const std::string& id, Category category, const std::string& text) {
            EmbeddingEntry e;
            e.id = id;
            e.category = category;
            e.source_kind = SourceKind::document;
            e.ref_id = doc.name;
            e.text = text;
            e.vector = embedder_.embed(text);
            entries.push_back(std::move(e));
        };

        std::vector<std::string> column_digest;
        for (const auto& c : doc.columns) column_digest.push_back(c.column + ": " + c.description);
        push("doc:" + doc.name + ":description", Category::description,
             render_slots(kLongDescriptionTemplate, {{"name", doc.name},
                                                     {"summary", doc.summary},
                                                     {"purpose", doc.purpose},
                                                     {"columns", join(column_digest, "; ")}}));
        push("doc:" + doc.name + ":dependency", Category::dependency,
             render_slots(kDependencyTemplate, {{"dependencies_thoughts", doc.dependencies_thoughts},
                                                {"keys", join(doc.keys, ", ")}}));
        push("doc:" + doc.name + ":table_name", Category::table_name,
             render_slots(kShortDescriptionTemplate,
                          {{"name", doc.name}, {"summary", doc.summary}}));
        for (const auto& other : doc.connected_tables)
            push("doc:" + doc.name + ":connected:" + other, Category::connected_tables,
                 render_slots(kConnectedTemplate, {{"name", doc.name}, {"other", other}}));
        for (std::size_t i = 0; i < doc.entities.size(); ++i)
            push("doc:" + doc.name + ":entity:" + std::to_string(i), Category::entity,
                 doc.entities[i]);

        if (!store_.entries_for(SourceKind::document, doc.name).empty())
            raise(ErrorCode::retrain_conflict,
                  "document '" + doc.name + "' already trained; purge it first");
        try {
            for (auto& e : entries) store_.add(e);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::duplicate_id)
                raise(ErrorCode::retrain_conflict,
                      "document '" + doc.name + "' already trained; purge it first");
            throw;
        }
        return entries;
    }

private:
    static TableDocument parse_structured(const json& payload) {
        TableDocument doc;
        doc.name = trim(payload.at("name").get<std::string>());
        doc.summary = payload.at("summary").get<std::string>();
        doc.purpose = payload.at("purpose").get<std::string>();
        doc.dependencies_thoughts = payload.at("dependencies_thoughts").get<std::string>();
        doc.keys = payload.at("keys").get<std::vector<std::string>>();
        for (const auto& c : payload.at("columns"))
            doc.columns.push_back({trim(c.at("column").get<std::string>()),
                                   c.at("description").get<std::string>()});
        // deduplicate connected tables, drop self-references
        std::set<std::string> seen;
        for (const auto& t : payload.at("connected_tables")) {
            std::string name = trim(t.get<std::string>());
            if (name.empty() || name == doc.name) continue;
            if (seen.insert(name).second) doc.connected_tables.push_back(name);
        }
        return doc;
    }

    static void validate_structure(const TableDocument& doc) {
        if (doc.name.empty())
            raise(ErrorCode::inconsistent_extraction, "field 'name' is empty");
        std::set<std::string> cols;
        for (const auto& c : doc.columns) {
            if (c.column.empty())
                raise(ErrorCode::inconsistent_extraction, "field 'columns' holds an empty name");
            if (!cols.insert(c.column).second)
                raise(ErrorCode::inconsistent_extraction,
                      "field 'columns' duplicates '" + c.column + "'");
        }
        for (const auto& k : doc.keys)
            if (!cols.count(k))
                raise(ErrorCode::inconsistent_extraction,
                      "field 'keys' names '" + k + "' which is not a column");
    }

    static bool generated_text_ok(const std::string& text, const TableSchema& schema) {
        for (const char* section : {"Table Description", "Columns Description",
                                    "Potential Dependencies"})
            if (text.find(section) == std::string::npos) return false;
        for (const auto& c : schema.columns)
            if (text.find(c.name) == std::string::npos) return false;
        return true;
    }

    ChatProvider& chat_;
    Embedder& embedder_;
    VectorStore& store_;
};

}  // namespace text2sql
