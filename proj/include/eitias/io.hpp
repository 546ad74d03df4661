#pragma once

#include <eitias/common.hpp>

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace eitias {

using Json = nlohmann::json;

// Writes to a sibling temporary file and renames it over the target.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

Json read_json(const std::filesystem::path& path);
void write_json_atomic(const std::filesystem::path& path, const Json& j, int indent = 1);

Json to_json(const Vector& v);
Vector vector_from_json(const Json& j);
// Row-major nested arrays.
Json to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);

}  // namespace eitias
