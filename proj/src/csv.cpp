#include "exitwise/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "exitwise/errors.hpp"
#include "exitwise/io_util.hpp"

namespace exitwise {

std::string format_float(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
    if (header.empty()) throw ParameterError("CSV header must not be empty");
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out_ += ",";
        out_ += header[i];
    }
    out_ += "\n";
}

void CsvWriter::end_row_if_open() {
    if (!in_row_) return;
    if (row_cells_ != columns_)
        throw ParameterError("CSV row has " + std::to_string(row_cells_) +
                             " cells, header has " + std::to_string(columns_));
    out_ += "\n";
    in_row_ = false;
}

CsvWriter& CsvWriter::begin_row() {
    end_row_if_open();
    in_row_ = true;
    row_cells_ = 0;
    return *this;
}

CsvWriter& CsvWriter::cell(const std::string& s) {
    if (!in_row_) throw ParameterError("CSV cell outside a row");
    if (s.find_first_of(",\n\"") != std::string::npos)
        throw ParameterError("CSV cells must not contain commas, quotes or newlines");
    if (row_cells_) out_ += ",";
    out_ += s;
    ++row_cells_;
    return *this;
}

CsvWriter& CsvWriter::cell(double v) { return cell(format_float(v)); }
CsvWriter& CsvWriter::cell(std::int64_t v) { return cell(std::to_string(v)); }
CsvWriter& CsvWriter::cell(int v) { return cell(std::to_string(v)); }
CsvWriter& CsvWriter::cell(const std::optional<double>& v) {
    return v.has_value() ? cell(*v) : cell(std::string());
}

std::string CsvWriter::str() const {
    std::string s = out_;
    if (in_row_) {
        if (row_cells_ != columns_)
            throw ParameterError("CSV row is incomplete");
        s += "\n";
    }
    return s;
}

void CsvWriter::write(const std::filesystem::path& path) const {
    write_file_atomic(path, str());
}

int CsvData::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

CsvData read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open CSV: " + path.string());
    CsvData data;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.push_back("");
        if (first) {
            data.header = cells;
            first = false;
        } else {
            data.rows.push_back(cells);
        }
    }
    if (first) throw FormatError(path.string() + ": CSV has no header row");
    return data;
}

}  // namespace exitwise
