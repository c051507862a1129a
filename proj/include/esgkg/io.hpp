#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace esgkg {

// Whole-file binary read. Throws UnreadableFile.
std::string read_file(const std::filesystem::path& path);

// Atomic-ish write: writes to path directly, creating parent directories.
void write_file(const std::filesystem::path& path, std::string_view content);

// RFC 4180 CSV. Fields containing comma, quote or newline are quoted,
// embedded quotes doubled. parse_csv returns all rows including the header.
std::string csv_escape(std::string_view field);
std::string csv_join(const std::vector<std::string>& fields);
std::vector<std::vector<std::string>> parse_csv(std::string_view content);

// Lowercase hex SHA-256 digest of `data`.
std::string sha256_hex(std::string_view data);

// Shortest text form that round-trips the double (%.17g with cleanup).
std::string format_double(double v);

// Runs fn(i) for i in [0, count) on up to `workers` threads. Results are
// written by index, so output order never depends on scheduling.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn);

// ASCII helpers. std::isupper and friends take int and choke on UTF-8
// continuation bytes, so the pipeline uses these throughout.
inline bool ascii_upper(char c) { return c >= 'A' && c <= 'Z'; }
inline bool ascii_lower(char c) { return c >= 'a' && c <= 'z'; }
inline bool ascii_digit(char c) { return c >= '0' && c <= '9'; }
inline bool ascii_alpha(char c) { return ascii_upper(c) || ascii_lower(c); }
inline bool ascii_alnum(char c) { return ascii_alpha(c) || ascii_digit(c); }
inline char to_upper_ascii(char c) { return ascii_lower(c) ? static_cast<char>(c - 'a' + 'A') : c; }
inline char to_lower_ascii(char c) { return ascii_upper(c) ? static_cast<char>(c - 'A' + 'a') : c; }

std::string trim(std::string_view s);
std::vector<std::string> split_ws(std::string_view s);

}  // namespace esgkg
