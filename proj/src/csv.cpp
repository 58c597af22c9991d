#include "enkf/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace enkf {

std::string format_double(double value) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    return buffer;
}

void CsvTable::add_row(const std::vector<double>& values) {
    std::vector<std::string> row;
    row.reserve(values.size());
    for (double v : values) row.push_back(format_double(v));
    rows.push_back(std::move(row));
}

void CsvTable::add_row(std::vector<std::string> values) { rows.push_back(std::move(values)); }

std::string CsvTable::to_string() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out << ',';
        out << header[i];
    }
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << row[i];
        }
        out << '\n';
    }
    return out.str();
}

void CsvTable::write(const std::string& path) const {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot open " + path + " for writing");
    file << to_string();
}

CsvTable CsvTable::read(const std::string& path) {
    std::ifstream file(path);
    if (!file) throw std::runtime_error("cannot open " + path);
    CsvTable table;
    std::string line;
    bool first = true;
    while (std::getline(file, line)) {
        std::vector<std::string> fields;
        std::string field;
        std::istringstream ls(line);
        while (std::getline(ls, field, ',')) fields.push_back(field);
        if (line.empty()) continue;
        if (first) {
            table.header = std::move(fields);
            first = false;
        } else {
            table.rows.push_back(std::move(fields));
        }
    }
    return table;
}

}  // namespace enkf
