#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "docsr/errors.hpp"

namespace docsr {

// Minimal CSV handling for the project's log and index files (fields are
// never quoted and never contain commas).
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const CsvTable& table);
std::vector<std::string> split_csv_line(const std::string& line);
std::string join_csv(const std::vector<std::string>& fields);

}  // namespace docsr
