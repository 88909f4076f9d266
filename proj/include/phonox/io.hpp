#pragma once

// Output helpers: shortest round-trip number formatting, CSV tables and
// atomic file replacement.

#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "phonox/error.hpp"

namespace phonox::io {

/// Shortest decimal string that parses back to exactly `v`.
inline std::string format_double(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::array<char, 32> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc{}) {
        throw Error("format_double: conversion failed");
    }
    return std::string(buf.data(), end);
}

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header)
        : header_(std::move(header)) {}

    class Row {
    public:
        Row& add(double v) { cells_.push_back(format_double(v)); return *this; }
        Row& add(std::optional<double> v) { cells_.push_back(v ? format_double(*v) : std::string{}); return *this; }
        Row& add(long long v) { cells_.push_back(std::to_string(v)); return *this; }
        Row& add(int v) { return add(static_cast<long long>(v)); }
        Row& add(std::size_t v) { cells_.push_back(std::to_string(v)); return *this; }
        Row& add(std::string_view s) { cells_.push_back(quote(s)); return *this; }
        Row& add(const char* s) { return add(std::string_view(s)); }

    private:
        friend class CsvTable;
        static std::string quote(std::string_view s)
        {
            if (s.find_first_of(",\"\n") == std::string_view::npos) {
                return std::string(s);
            }
            std::string out = "\"";
            for (char c : s) {
                if (c == '"') out += '"';
                out += c;
            }
            return out + "\"";
        }
        std::vector<std::string> cells_;
    };

    Row& row()
    {
        rows_.emplace_back();
        return rows_.back();
    }

    const std::vector<std::string>& header() const noexcept { return header_; }
    std::size_t size() const noexcept { return rows_.size(); }

    std::string str() const
    {
        std::string out;
        append_line(out, header_);
        for (const auto& r : rows_) {
            if (r.cells_.size() != header_.size()) {
                throw Error("CsvTable: row width does not match header");
            }
            append_line(out, r.cells_);
        }
        return out;
    }

private:
    static void append_line(std::string& out, const std::vector<std::string>& cells)
    {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += cells[i];
        }
        out += '\n';
    }

    std::vector<std::string> header_;
    std::vector<Row> rows_;
};

/// Writes to `<path>.tmp` and renames over `path`.
inline void write_atomic(const std::filesystem::path& path, std::string_view content)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) {
            throw Error("cannot open " + tmp.string() + " for writing");
        }
        os.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!os) {
            throw Error("write to " + tmp.string() + " failed");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw Error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
    }
}

} // namespace phonox::io
