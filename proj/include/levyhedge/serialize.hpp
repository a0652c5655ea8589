#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "levyhedge/config.hpp"
#include "levyhedge/errors.hpp"
#include "levyhedge/version.hpp"

namespace levyhedge {

using Json = nlohmann::ordered_json; // stable key order

inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string output_header(const std::string& config_hash) {
    return "# levyhedge " + std::string(kVersion) + " config=" + config_hash;
}

// CSV per the output contract: UTF-8, LF endings, '.' decimal, header row,
// preceded by a comment line carrying library version and config hash.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::string& config_hash,
              const std::vector<std::string>& columns)
        : out_(path, std::ios::binary) {
        if (!out_) throw ConfigError("cannot open output file: " + path.string());
        out_ << output_header(config_hash) << "\n";
        for (std::size_t i = 0; i < columns.size(); ++i)
            out_ << (i ? "," : "") << columns[i];
        out_ << "\n";
        width_ = columns.size();
    }

    void row(const std::vector<double>& values) {
        if (values.size() != width_)
            throw PreconditionViolated("csv row width mismatch");
        for (std::size_t i = 0; i < values.size(); ++i)
            out_ << (i ? "," : "") << format_number(values[i]);
        out_ << "\n";
    }

    void raw_row(const std::vector<std::string>& cells) {
        if (cells.size() != width_)
            throw PreconditionViolated("csv row width mismatch");
        for (std::size_t i = 0; i < cells.size(); ++i)
            out_ << (i ? "," : "") << cells[i];
        out_ << "\n";
    }

private:
    std::ofstream out_;
    std::size_t width_ = 0;
};

// JSON files carry the same provenance as top-level fields.
inline void write_json(const std::filesystem::path& path, Json body,
                       const std::string& config_hash) {
    Json doc;
    doc["version"] = kVersion;
    doc["config"] = config_hash;
    for (auto& [k, v] : body.items()) doc[k] = std::move(v);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open output file: " + path.string());
    out << doc.dump(2) << "\n";
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open output file: " + path.string());
    out << text;
}

} // namespace levyhedge
