#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "text2sql/doc_pipeline.hpp"
#include "text2sql/errors.hpp"
#include "text2sql/example_pipeline.hpp"
#include "text2sql/providers.hpp"
#include "text2sql/sql_scan.hpp"

namespace text2sql {

struct TableJustification {
    std::string table;
    std::string justification;
};

struct DomainEntityMapping {
    std::string entity;
    std::vector<std::string> tables;
    std::string classification;  // "minor" | "major"
    std::string access_note;     // column, aggregation or join description
    std::vector<std::string> example_ids;

    json to_json() const {
        return json{{"entity", entity},
                    {"tables", tables},
                    {"classification", classification},
                    {"access_note", access_note},
                    {"example_ids", example_ids}};
    }

    static DomainEntityMapping from_json(const json& j) {
        DomainEntityMapping m;
        m.entity = j.at("entity").get<std::string>();
        m.tables = j.at("tables").get<std::vector<std::string>>();
        m.classification = j.at("classification").get<std::string>();
        m.access_note = j.value("access_note", "");
        m.example_ids = j.value("example_ids", std::vector<std::string>{});
        return m;
    }
};

struct DomainInstruction {
    std::string text;
    std::vector<DomainEntityMapping> mappings;
};

// Default classification guidance; a kb-local file can replace it.
inline constexpr std::string_view kDefaultClassRules =
    "minor: a specific attribute or discrete data point served by one table, usually one "
    "column or a simple aggregation.\n"
    "major: a generalized concept that needs several tables, joins or business logic.";

class DomainInstructionPipeline {
public:
    struct SelectionResult {
        std::vector<TableJustification> selections;
        std::vector<std::string> warnings;
    };

    struct ClassificationResult {
        std::vector<DomainEntityMapping> mappings;
        std::vector<std::string> warnings;
    };

    explicit DomainInstructionPipeline(ChatProvider& chat) : chat_(chat) {}

    // LLM table selection for one example, restricted to the candidates.
    // Selections the reference SQL never touches are flagged, not dropped:
    // relevant tables are not always named in the question.
    SelectionResult select_tables_with_justification(
        const ExampleRecord& example, const std::vector<TableDocument>& candidates,
        const std::vector<std::string>& rules) {
        if (!example.sql) raise(ErrorCode::invalid_input, "example has no SQL to validate against");
        if (candidates.empty()) raise(ErrorCode::invalid_input, "candidate table list is empty");

        std::set<std::string> candidate_names;
        std::vector<std::string> digest;
        for (const auto& doc : candidates) {
            candidate_names.insert(doc.name);
            digest.push_back(doc.name + ": " + doc.summary);
        }
        auto response = chat_.complete(make_request(
            "select_tables", {{"question", example.normalized.empty() ? example.initial_question
                                                                      : example.normalized},
                              {"candidates", join(digest, "\n")},
                              {"rules", join(rules, "\n")},
                              {"sql", *example.sql}}));

        std::set<std::string> sql_tables;
        try {
            sql_tables = extract_sql_tables(*example.sql);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::no_tables_found) throw;
        }

        SelectionResult result;
        for (const auto& s : response.payload.at("selections")) {
            TableJustification tj{trim(s.at("table").get<std::string>()),
                                  trim(s.at("justification").get<std::string>())};
            if (tj.table.empty() || tj.justification.empty()) continue;
            if (!candidate_names.count(tj.table)) {
                result.warnings.push_back("selection '" + tj.table +
                                          "' is not a candidate table; dropped");
                continue;
            }
            if (!sql_tables.count(casefold(tj.table)))
                result.warnings.push_back("selection '" + tj.table +
                                          "' does not appear in the example SQL");
            result.selections.push_back(std::move(tj));
        }
        if (result.selections.empty())
            raise(ErrorCode::no_tables_selected, "model selected no usable tables");
        return result;
    }

    // Minor entities map to exactly one table; a minor mapping citing several
    // tables is reclassified major with a warning.
    ClassificationResult classify_entities(const std::vector<TableJustification>& selections,
                                           const std::string& class_rules) {
        if (selections.empty()) raise(ErrorCode::invalid_input, "no selections to classify");
        std::vector<std::string> digest;
        for (const auto& s : selections) digest.push_back(s.table + ": " + s.justification);
        auto response = chat_.complete(make_request(
            "classify_entities",
            {{"selections", join(digest, "\n")}, {"class_rules", class_rules}}));

        ClassificationResult result;
        for (const auto& m : response.payload.at("mappings")) {
            DomainEntityMapping mapping;
            mapping.entity = trim(m.at("entity").get<std::string>());
            mapping.tables = m.at("tables").get<std::vector<std::string>>();
            mapping.classification = casefold(trim(m.at("classification").get<std::string>()));
            mapping.access_note = trim(m.value("access_note", ""));
            if (mapping.entity.empty() || mapping.tables.empty())
                raise(ErrorCode::malformed_response, "mapping misses entity or tables");
            if (mapping.classification != "minor" && mapping.classification != "major")
                raise(ErrorCode::malformed_response,
                      "classification '" + mapping.classification + "' unknown");
            if (mapping.classification == "minor" && mapping.tables.size() > 1) {
                result.warnings.push_back("minor entity '" + mapping.entity +
                                          "' cites several tables; reclassified major");
                mapping.classification = "major";
            }
            result.mappings.push_back(std::move(mapping));
        }
        return result;
    }

    ChatProvider& chat() { return chat_; }

private:
    ChatProvider& chat_;
};

// Pure templated synthesis: identical mapping sets produce byte-identical
// text regardless of input order. Duplicates by (entity, tables,
// classification) merge, keeping the union of provenance ids.
inline DomainInstruction synthesize_instructions(std::vector<DomainEntityMapping> mappings) {
    for (auto& m : mappings) {
        std::sort(m.tables.begin(), m.tables.end());
        m.tables.erase(std::unique(m.tables.begin(), m.tables.end()), m.tables.end());
    }
    std::sort(mappings.begin(), mappings.end(), [](const auto& a, const auto& b) {
        if (a.entity != b.entity) return a.entity < b.entity;
        if (a.classification != b.classification) return a.classification < b.classification;
        return a.tables < b.tables;
    });
    std::vector<DomainEntityMapping> unique;
    for (auto& m : mappings) {
        if (!unique.empty() && unique.back().entity == m.entity &&
            unique.back().classification == m.classification && unique.back().tables == m.tables) {
            auto& ids = unique.back().example_ids;
            ids.insert(ids.end(), m.example_ids.begin(), m.example_ids.end());
            continue;
        }
        unique.push_back(std::move(m));
    }
    for (auto& m : unique) {
        std::sort(m.example_ids.begin(), m.example_ids.end());
        m.example_ids.erase(std::unique(m.example_ids.begin(), m.example_ids.end()),
                            m.example_ids.end());
    }

    std::string text = "# Domain instructions\n";
    std::string majors, minors;
    for (const auto& m : unique) {
        if (m.classification == "major") {
            majors += "\n## " + m.entity + "\n";
            majors += "Tables: " + join(m.tables, " + ") + ".";
            if (!m.access_note.empty()) majors += " " + m.access_note;
            majors += "\n";
        } else {
            minors += "- " + m.entity + " → table: " + join(m.tables, ", ") +
                      ", column/aggregation: " + (m.access_note.empty() ? "-" : m.access_note) +
                      "\n";
        }
    }
    if (!majors.empty()) text += "\n# Major entities\n" + majors;
    if (!minors.empty()) text += "\n# Minor entities\n\n" + minors;
    return DomainInstruction{text, std::move(unique)};
}

}  // namespace text2sql
