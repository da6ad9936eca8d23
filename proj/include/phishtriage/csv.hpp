#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace phishtriage::csv {

/// Minimal RFC 4180 reader: header row required, quoted fields may contain
/// separators, doubled quotes and newlines.
class Table {
public:
    static Table read(const std::filesystem::path& path);
    static Table parse(std::string_view text, const std::string& origin = "<memory>");

    const std::vector<std::string>& header() const noexcept { return header_; }
    std::size_t rows() const noexcept { return rows_.size(); }
    std::size_t column(std::string_view name) const;
    bool has_column(std::string_view name) const;
    const std::string& at(std::size_t row, std::size_t col) const { return rows_.at(row).at(col); }
    const std::string& at(std::size_t row, std::string_view name) const {
        return at(row, column(name));
    }
    double number(std::size_t row, std::string_view name) const;

private:
    std::string origin_;
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

class Writer {
public:
    explicit Writer(const std::filesystem::path& path);
    void row(const std::vector<std::string>& fields);

private:
    std::ofstream out_;
};

std::string escape(std::string_view field);
/// Shortest round-trip decimal representation.
std::string fmt(double v);

}  // namespace phishtriage::csv
