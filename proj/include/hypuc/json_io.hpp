#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

namespace hypuc {

using json = nlohmann::json;

// Deterministic JSON text: object keys sorted, floating-point numbers written
// with 17 significant digits so every double survives a round trip bit-exactly.
// Non-finite floats are written as null.
std::string dump_canonical(const json& value, int indent = 2);

// Formats one double with 17 significant digits (the on-disk number format).
std::string format_double(double v);

json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace hypuc
