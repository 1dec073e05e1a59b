#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "text2sql/errors.hpp"
#include "text2sql/text_util.hpp"

namespace text2sql {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Response shapes
//
// A shape is a small structural schema written as JSON:
//   "string" | "number" | "boolean" | "object" | "any"   primitive checks
//   [element]                                            homogeneous array
//   {"field": shape, "?opt": shape}                      object, extra fields ok
// ---------------------------------------------------------------------------

namespace detail {

inline bool shape_matches(const json& shape, const json& value, const std::string& path,
                          std::string* why) {
    auto fail = [&](const std::string& message) {
        if (why) *why = path + ": " + message;
        return false;
    };
    if (shape.is_string()) {
        const std::string kind = shape.get<std::string>();
        if (kind == "any") return true;
        if (kind == "string") return value.is_string() ? true : fail("expected string");
        if (kind == "number") return value.is_number() ? true : fail("expected number");
        if (kind == "boolean") return value.is_boolean() ? true : fail("expected boolean");
        if (kind == "object") return value.is_object() ? true : fail("expected object");
        return fail("unknown shape kind '" + kind + "'");
    }
    if (shape.is_array()) {
        if (!value.is_array()) return fail("expected array");
        const json& element = shape.at(0);
        for (std::size_t i = 0; i < value.size(); ++i) {
            if (!shape_matches(element, value[i], path + "[" + std::to_string(i) + "]", why))
                return false;
        }
        return true;
    }
    if (shape.is_object()) {
        if (!value.is_object()) return fail("expected object");
        for (auto it = shape.begin(); it != shape.end(); ++it) {
            std::string field = it.key();
            bool optional = !field.empty() && field.front() == '?';
            if (optional) field = field.substr(1);
            if (!value.contains(field)) {
                if (optional) continue;
                return fail("missing required field '" + field + "'");
            }
            if (!shape_matches(it.value(), value.at(field), path + "." + field, why)) return false;
        }
        return true;
    }
    return fail("malformed shape spec");
}

}  // namespace detail

class ShapeRegistry {
public:
    static ShapeRegistry& instance() {
        static ShapeRegistry registry;
        return registry;
    }

    bool knows(const std::string& shape_id) const { return shapes_.count(shape_id) > 0; }

    bool validate(const std::string& shape_id, const json& payload, std::string* why) const {
        auto it = shapes_.find(shape_id);
        if (it == shapes_.end()) {
            if (why) *why = "unknown shape '" + shape_id + "'";
            return false;
        }
        return detail::shape_matches(it->second, payload, "$", why);
    }

private:
    ShapeRegistry() {
        shapes_["table_document"] = json{
            {"name", "string"},
            {"summary", "string"},
            {"purpose", "string"},
            {"dependencies_thoughts", "string"},
            {"keys", json::array({"string"})},
            {"connected_tables", json::array({"string"})},
            {"columns", json::array({json{{"column", "string"}, {"description", "string"}}})},
        };
        shapes_["entity_list"] = json{{"entities", json::array({"string"})}};
        shapes_["free_text"] = json{{"text", "string"}};
        shapes_["normalize_extract"] = json{
            {"normalized", "string"},
            {"entities", json::array({json{
                             {"label", "string"}, {"kind", "string"}, {"?attributes", "object"}}})},
            {"data_sources",
             json::array({json{{"table", "string"}, {"columns", json::array({"string"})}}})},
            {"operations", json::array({json{{"operation", "string"},
                                             {"?target", "string"},
                                             {"?condition", "string"}}})},
        };
        shapes_["main_clause_split"] = json{{"main_clause", "string"}, {"details", "string"}};
        shapes_["variations"] = json{{"variations", json::array({"string"})}};
        shapes_["table_selection"] = json{
            {"selections",
             json::array({json{{"table", "string"}, {"justification", "string"}}})}};
        shapes_["entity_mappings"] = json{
            {"mappings", json::array({json{{"entity", "string"},
                                           {"tables", json::array({"string"})},
                                           {"classification", "string"},
                                           {"?access_note", "string"}}})}};
        shapes_["table_list"] = json{{"tables", json::array({"string"})}};
        shapes_["sql_generation"] = json{{"sql", "string"}, {"?notes", "string"}};
    }

    std::map<std::string, json> shapes_;
};

// ---------------------------------------------------------------------------
// Prompt templates
// ---------------------------------------------------------------------------

struct PromptTemplate {
    std::string id;
    std::string body;                 // text with {slot} placeholders
    std::vector<std::string> slots;   // every one must be filled
    std::string shape_id;             // expected response shape
};

class PromptRegistry {
public:
    static PromptRegistry& instance() {
        static PromptRegistry registry;
        return registry;
    }

    const PromptTemplate& get(const std::string& id) const {
        auto it = templates_.find(id);
        if (it == templates_.end()) raise(ErrorCode::invalid_input, "unknown template '" + id + "'");
        return it->second;
    }

    bool knows(const std::string& id) const { return templates_.count(id) > 0; }

    static std::string render(const PromptTemplate& tpl,
                              const std::map<std::string, std::string>& slots) {
        std::string out = tpl.body;
        for (const auto& [name, value] : slots) {
            const std::string placeholder = "{" + name + "}";
            std::size_t pos = 0;
            while ((pos = out.find(placeholder, pos)) != std::string::npos) {
                out.replace(pos, placeholder.size(), value);
                pos += value.size();
            }
        }
        return out;
    }

private:
    void add(PromptTemplate tpl) { templates_.emplace(tpl.id, std::move(tpl)); }

    PromptRegistry() {
        add({"structure_document",
             "Read the table documentation below and produce a JSON object with the fields "
             "name, summary, purpose, dependencies_thoughts, keys, connected_tables and "
             "columns (each column as {\"column\", \"description\"}). keys must be a subset "
             "of the column names. connected_tables lists related tables mentioned in the "
             "text, typically reachable through *_id key columns.\n\nDocumentation:\n{raw_text}",
             {"raw_text"},
             "table_document"});
        add({"extract_entities",
             "Given the structured table description below, list complex domain entities "
             "that can be logically inferred from the table's content and purpose, not just "
             "restated column names. Reply as JSON {\"entities\": [\"...\"]}.\n\n{document}",
             {"document"},
             "entity_list"});
        add({"generate_document_from_schema",
             "Write a free-text description of the database table defined below. Use exactly "
             "the section headers \"Table Description\", \"Columns Description\" and "
             "\"Potential Dependencies\". Describe every column by name, highlight key and "
             "sort-key columns, and suggest plausible relationships to other tables. "
             "Domain hint: {domain_hint}\n\nSchema:\n{schema}\n\nReply as JSON "
             "{\"text\": \"...\"}.",
             {"schema", "domain_hint"},
             "free_text"});
        add({"normalize_and_extract",
             "Analyze the user question and the SQL answer (when given) and reply as JSON "
             "with fields normalized, entities, data_sources, operations.\n"
             "Normalization rules: remove database-specific names (table and column names); "
             "remove display instructions such as show, display, generate chart; generalize "
             "conditions (e.g. a concrete year becomes some time range); abstract specific "
             "ids, names and numbers; keep the directive form.\n"
             "entities: the core data elements requested, each as {\"label\", \"kind\", "
             "\"attributes\"} where kind is category, metric or identifier.\n"
             "data_sources: tables and the columns used, extracted from the SQL; when no SQL "
             "is given leave data_sources empty rather than guessing.\n"
             "operations: aggregations, grouping and filters as {\"operation\", \"target\", "
             "\"condition\"} with conditions in human-readable form.\n\n"
             "Question: {question}\nSQL: {sql}",
             {"question", "sql"},
             "normalize_extract"});
        add({"split_main_clause",
             "Split the user question into the main clause (the primary data request, "
             "without filters, grouping or ordering) and the details (all remaining "
             "modifiers). Reply as JSON {\"main_clause\": \"...\", \"details\": \"...\"}.\n\n"
             "Examples:\n"
             "Question: Show me a list of sales transactions for Q4, including product "
             "details and revenue\n"
             "{\"main_clause\": \"list of sales transactions\", \"details\": \"for Q4, "
             "including product details and revenue\"}\n"
             "Question: Display the number of active users by country over the past month\n"
             "{\"main_clause\": \"number of active users\", \"details\": \"by country over "
             "the past month\"}\n"
             "Question: Get the total revenue for each department last year\n"
             "{\"main_clause\": \"total revenue for each department\", \"details\": \"over a "
             "defined timeframe\"}\n\n"
             "Question: {question}",
             {"question"},
             "main_clause_split"});
        add({"generate_variations",
             "Produce {count} distinct rephrasings of the normalized question below. Each "
             "variation must request the same data as the SQL answer, none may repeat the "
             "normalized question verbatim. Reply as JSON {\"variations\": [\"...\"]}.\n\n"
             "Normalized question: {normalized}\nSQL: {sql}",
             {"normalized", "sql", "count"},
             "variations"});
        add({"select_tables",
             "Select the database tables required to answer the question and justify each "
             "selection. Choose only from the candidate tables. Reply as JSON "
             "{\"selections\": [{\"table\": \"...\", \"justification\": \"...\"}]}.\n\n"
             "Question: {question}\nCandidate tables:\n{candidates}\nBusiness rules:\n{rules}\n"
             "Reference SQL (for validation): {sql}",
             {"question", "candidates", "rules", "sql"},
             "table_selection"});
        add({"classify_entities",
             "Derive domain entities from the table selections below and classify each as "
             "minor (a specific attribute, mapped to a single table) or major (a concept "
             "spanning several tables or business logic). For each entity give the tables "
             "needed to access it and a short access note (column, aggregation or join). "
             "Reply as JSON {\"mappings\": [{\"entity\", \"tables\", \"classification\", "
             "\"access_note\"}]}.\n\nSelections:\n{selections}\nClassification rules:\n"
             "{class_rules}",
             {"selections", "class_rules"},
             "entity_mappings"});
        add({"select_tables_by_rules",
             "Using only the business rules below, pick the tables the question needs. "
             "Reply as JSON {\"tables\": [\"...\"]}.\n\nQuestion: {normalized}\n"
             "Business rules:\n{rules}",
             {"normalized", "rules"},
             "table_list"});
        add({"refine_tables",
             "Refine the candidate table list for the question down to the tables the SQL "
             "will actually need. Work step by step:\n"
             "1. Table coverage analysis: review each candidate's description and columns "
             "to check whether the required characteristics are present.\n"
             "2. Comprehensive coverage: keep every table that may hold needed data even "
             "when the question does not name it, including linked or dependent tables.\n"
             "3. Business logic: apply the domain instructions and business rules.\n"
             "Reply as JSON {\"tables\": [\"...\"]} naming only candidate tables.\n\n"
             "Question: {normalized}\nDomain instructions:\n{instructions}\n"
             "Business rules:\n{rules}\nCandidate tables:\n{candidates}",
             {"normalized", "instructions", "rules", "candidates"},
             "table_list"});
        add({"generate_sql_example_driven",
             "Write the SQL query answering the user question. Lean on the reference "
             "examples: reuse their patterns and structure. The table descriptions are "
             "supporting context. Do not introduce operations the question does not ask "
             "for, follow the schema strictly, and minimize the number of tables used. "
             "Reply as JSON {\"sql\": \"...\", \"notes\": \"...\"}.\n\n"
             "Question: {question}\nNormalized: {normalized}\n"
             "Reference examples:\n{examples}\nTables:\n{tables}\n{violation}",
             {"question", "normalized", "examples", "tables", "violation"},
             "sql_generation"});
        add({"generate_sql_documentation_driven",
             "Write the SQL query answering the user question from the table documentation "
             "below. Use only tables from the provided set, construct joins that follow the "
             "documented relationships and keys, validate that the chosen tables satisfy "
             "the request, and keep the table count minimal. The SQL snippets are "
             "non-mandatory reference templates only. Reply as JSON {\"sql\": \"...\", "
             "\"notes\": \"...\"}.\n\n"
             "Question: {question}\nNormalized: {normalized}\nTables:\n{tables}\n"
             "Reference snippets:\n{templates}\n{violation}",
             {"question", "normalized", "tables", "templates", "violation"},
             "sql_generation"});
    }

    std::map<std::string, PromptTemplate> templates_;
};

// Fixed description templates used when documents are turned into embeddings.
inline constexpr std::string_view kLongDescriptionTemplate =
    "Table {name}. {summary} Purpose: {purpose} Columns: {columns}";
inline constexpr std::string_view kShortDescriptionTemplate = "{name}: {summary}";
inline constexpr std::string_view kDependencyTemplate = "{dependencies_thoughts} Keys: {keys}";
inline constexpr std::string_view kConnectedTemplate = "{name} ↔ {other}";

inline std::string render_slots(std::string_view tpl,
                                const std::map<std::string, std::string>& slots) {
    PromptTemplate t{"", std::string(tpl), {}, ""};
    return PromptRegistry::render(t, slots);
}

}  // namespace text2sql
