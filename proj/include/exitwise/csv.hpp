#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace exitwise {

// Renders a double with 9 significant digits, enough to round-trip single
// precision.
std::string format_float(double v);

// Comma-separated rows with a mandatory header; values are pre-rendered
// strings. Written atomically.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);

    CsvWriter& begin_row();
    CsvWriter& cell(const std::string& s);
    CsvWriter& cell(double v);
    CsvWriter& cell(std::int64_t v);
    CsvWriter& cell(int v);
    CsvWriter& cell(const std::optional<double>& v);  // empty field when absent

    std::string str() const;
    void write(const std::filesystem::path& path) const;

private:
    std::size_t columns_;
    std::string out_;
    std::size_t row_cells_ = 0;
    bool in_row_ = false;
    void end_row_if_open();
};

// Minimal reader for the library's own CSV outputs: returns header and rows
// of string cells.
struct CsvData {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  // -1 when absent
};

CsvData read_csv(const std::filesystem::path& path);

}  // namespace exitwise
