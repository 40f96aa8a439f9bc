#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace tmpred {

/// Shortest decimal string that round-trips to the same double. Locale-free.
std::string format_double(double v);

/// Strict full-string numeric parsers (locale-free). Return false on any
/// trailing garbage, empty input, or overflow.
bool parse_double(std::string_view s, double& out);
bool parse_int64(std::string_view s, std::int64_t& out);
bool parse_int(std::string_view s, int& out);

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

/// FNV-1a 64-bit hash, used for config fingerprints in manifests.
std::uint64_t fnv1a64(std::string_view s);
std::string to_hex(std::uint64_t v);

} // namespace tmpred
