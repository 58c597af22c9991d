#pragma once

#include <string>
#include <vector>

namespace enkf {

/// Shortest round-trip decimal representation of a double.
std::string format_double(double value);

/// Minimal CSV table with a mandatory header row. Output is byte-stable:
/// the same table always renders to the same string.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add_row(const std::vector<double>& values);
    void add_row(std::vector<std::string> values);

    std::string to_string() const;
    void write(const std::string& path) const;
    static CsvTable read(const std::string& path);
};

}  // namespace enkf
