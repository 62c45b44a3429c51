#pragma once

#include "finqa/errors.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace finqa::util {

/// FNV-1a 64-bit over raw bytes.
std::uint64_t fnv1a64(std::string_view data);

/// FNV-1a 64-bit rendered as 16 lowercase hex chars. Used for content digests.
std::string hex_digest(std::string_view data);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool starts_with_icase(std::string_view s, std::string_view prefix);

/// Whitespace-separated tokens.
std::vector<std::string> split_words(std::string_view text);
long long count_words(std::string_view text);

/// Items of a numbered ("1." / "1)") or bulleted ("-", "*", "•") list.
/// Continuation lines are folded into the current item with a space.
/// Returns an empty vector when no list marker is present.
std::vector<std::string> parse_list_items(std::string_view text);

std::string read_file(const std::string& path);            // throws IoError
void write_file(const std::string& path, std::string_view content);
std::vector<std::string> read_lines(const std::string& path);

/// Milliseconds since the steady-clock epoch; monotonic within a process.
long long steady_ms();
/// Wall-clock milliseconds since the Unix epoch.
long long wall_ms();

} // namespace finqa::util
