#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace bucketwatch {

// Shortest decimal that round-trips to the same double (at most 17
// significant digits).
std::string format_double(double v);

// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

std::vector<std::string_view> split_fields(std::string_view line, char sep = ',');

// Strict numeric parsing: the whole field must be consumed.
bool parse_double(std::string_view field, double& out);

}  // namespace bucketwatch
