#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace kdpg {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string file_sha256(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
/// Writes atomically enough for our purposes (truncate + write); throws on failure.
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace kdpg
