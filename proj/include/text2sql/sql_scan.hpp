#pragma once

#include <cctype>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "text2sql/errors.hpp"
#include "text2sql/text_util.hpp"

namespace text2sql {

// Keyword scanner over FROM/JOIN clauses, not a SQL parser. Good enough to
// recover the referenced tables from ordinary analytical queries.
namespace sqlscan {

struct Token {
    std::string text;   // case-folded for identifiers/keywords
    bool is_word = false;
};

inline std::vector<Token> lex(std::string_view sql) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    const std::size_t n = sql.size();
    auto is_ident = [](unsigned char c) { return std::isalnum(c) || c == '_' || c == '$'; };
    while (i < n) {
        unsigned char c = static_cast<unsigned char>(sql[i]);
        if (std::isspace(c)) {
            ++i;
            continue;
        }
        if (c == '\'' || c == '"' || c == '`') {
            // string literal or quoted identifier; quoted identifiers come
            // back as word tokens so quoted table names still count
            char quote = static_cast<char>(c);
            std::string body;
            ++i;
            while (i < n && sql[i] != quote) body.push_back(sql[i++]);
            if (i < n) ++i;  // closing quote
            if (quote != '\'') tokens.push_back({casefold(body), true});
            continue;
        }
        if (c == '-' && i + 1 < n && sql[i + 1] == '-') {  // line comment
            while (i < n && sql[i] != '\n') ++i;
            continue;
        }
        if (is_ident(c)) {
            std::string word;
            while (i < n && is_ident(static_cast<unsigned char>(sql[i])))
                word.push_back(sql[i++]);
            tokens.push_back({casefold(word), true});
            continue;
        }
        tokens.push_back({std::string(1, static_cast<char>(c)), false});
        ++i;
    }
    return tokens;
}

inline bool is_clause_keyword(const std::string& word) {
    static const std::set<std::string> keywords = {
        "select", "where",  "group",  "order", "having", "limit",  "offset", "union",
        "on",     "join",   "inner",  "left",  "right",  "full",   "outer",  "cross",
        "natural", "using", "when",   "and",   "or",     "not",    "set",    "values",
        "window", "qualify", "fetch", "as",    "from",   "intersect", "except"};
    return keywords.count(word) > 0;
}

}  // namespace sqlscan

// Tables named after FROM (including comma lists) and JOIN, alias-stripped and
// case-folded. Dotted references keep their full qualified form.
inline std::set<std::string> extract_sql_tables(const std::string& sql) {
    using sqlscan::Token;
    auto tokens = sqlscan::lex(sql);
    std::set<std::string> tables;

    auto read_table_ref = [&](std::size_t& i) -> bool {
        if (i >= tokens.size()) return false;
        if (!tokens[i].is_word) return false;  // subquery "(" or stray symbol
        if (sqlscan::is_clause_keyword(tokens[i].text)) return false;
        std::string name = tokens[i].text;
        ++i;
        while (i + 1 < tokens.size() && !tokens[i].is_word && tokens[i].text == "." &&
               tokens[i + 1].is_word) {
            name += "." + tokens[i + 1].text;
            i += 2;
        }
        tables.insert(name);
        // skip an alias: "AS alias" or a bare identifier
        if (i < tokens.size() && tokens[i].is_word && tokens[i].text == "as") {
            ++i;
            if (i < tokens.size() && tokens[i].is_word) ++i;
        } else if (i < tokens.size() && tokens[i].is_word &&
                   !sqlscan::is_clause_keyword(tokens[i].text)) {
            ++i;
        }
        return true;
    };

    for (std::size_t i = 0; i < tokens.size();) {
        if (tokens[i].is_word && tokens[i].text == "from") {
            ++i;
            if (read_table_ref(i)) {
                while (i < tokens.size() && !tokens[i].is_word && tokens[i].text == ",") {
                    ++i;
                    if (!read_table_ref(i)) break;
                }
            }
            continue;
        }
        if (tokens[i].is_word && tokens[i].text == "join") {
            ++i;
            read_table_ref(i);
            continue;
        }
        ++i;
    }

    if (tables.empty())
        raise(ErrorCode::no_tables_found, "no FROM/JOIN table references in SQL");
    return tables;
}

}  // namespace text2sql
