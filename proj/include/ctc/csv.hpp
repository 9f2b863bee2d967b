#pragma once

#include "ctc/errors.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace ctc {

/// Shortest decimal text that parses back to the same double.
std::string format_exact(double value);

/// Strict decimal parse; rejects trailing garbage.
double parse_double(const std::string& text);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// Reads a plain comma-separated file (no quoting) with a header row.
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace ctc
