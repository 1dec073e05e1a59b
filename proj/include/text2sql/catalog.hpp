#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "text2sql/doc_pipeline.hpp"
#include "text2sql/errors.hpp"
#include "text2sql/example_pipeline.hpp"

namespace text2sql {

namespace detail {

template <typename Record>
void save_jsonl(const std::filesystem::path& path, const std::map<std::string, Record>& records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) raise(ErrorCode::io_error, "cannot write " + path.string());
    for (const auto& [_, record] : records) out << record.to_json().dump() << "\n";
}

template <typename Record>
std::map<std::string, Record> load_jsonl(const std::filesystem::path& path,
                                         std::string (*key_of)(const Record&)) {
    std::map<std::string, Record> records;
    if (!std::filesystem::exists(path)) return records;
    std::ifstream in(path);
    if (!in) raise(ErrorCode::io_error, "cannot read " + path.string());
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        try {
            Record record = Record::from_json(json::parse(line));
            records.emplace(key_of(record), std::move(record));
        } catch (const json::exception& e) {
            raise(ErrorCode::corrupt_store, path.string() + ": " + e.what());
        }
    }
    return records;
}

}  // namespace detail

class DocumentCatalog {
public:
    void put(TableDocument doc) { docs_[doc.name] = std::move(doc); }

    std::optional<TableDocument> get(const std::string& name) const {
        auto it = docs_.find(name);
        if (it == docs_.end()) return std::nullopt;
        return it->second;
    }

    bool contains(const std::string& name) const { return docs_.count(name) > 0; }
    std::size_t size() const { return docs_.size(); }

    std::vector<TableDocument> all() const {
        std::vector<TableDocument> out;
        out.reserve(docs_.size());
        for (const auto& [_, doc] : docs_) out.push_back(doc);
        return out;
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(docs_.size());
        for (const auto& [name, _] : docs_) out.push_back(name);
        return out;
    }

    void save(const std::filesystem::path& path) const { detail::save_jsonl(path, docs_); }

    static DocumentCatalog load(const std::filesystem::path& path) {
        DocumentCatalog catalog;
        catalog.docs_ = detail::load_jsonl<TableDocument>(
            path, +[](const TableDocument& d) { return d.name; });
        return catalog;
    }

private:
    std::map<std::string, TableDocument> docs_;
};

class ExampleCatalog {
public:
    void put(ExampleRecord record) { examples_[record.id] = std::move(record); }

    std::optional<ExampleRecord> get(const std::string& id) const {
        auto it = examples_.find(id);
        if (it == examples_.end()) return std::nullopt;
        return it->second;
    }

    bool contains(const std::string& id) const { return examples_.count(id) > 0; }
    std::size_t size() const { return examples_.size(); }

    std::vector<ExampleRecord> all() const {
        std::vector<ExampleRecord> out;
        out.reserve(examples_.size());
        for (const auto& [_, record] : examples_) out.push_back(record);
        return out;
    }

    void save(const std::filesystem::path& path) const { detail::save_jsonl(path, examples_); }

    static ExampleCatalog load(const std::filesystem::path& path) {
        ExampleCatalog catalog;
        catalog.examples_ = detail::load_jsonl<ExampleRecord>(
            path, +[](const ExampleRecord& r) { return r.id; });
        return catalog;
    }

private:
    std::map<std::string, ExampleRecord> examples_;
};

}  // namespace text2sql
