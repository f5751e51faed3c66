#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace driftscope {

// Calendar date, ISO-8601 (YYYY-MM-DD). Validated on parse.
struct Date {
  int year = 0;
  int month = 0;
  int day = 0;

  static std::optional<Date> parse(std::string_view text);
  std::string to_string() const;

  friend auto operator<=>(const Date&, const Date&) = default;
};

// FNV-1a 64-bit. Content checksums only, not cryptographic.
class Fnv1a64 {
 public:
  void update(std::string_view bytes);
  void update(const void* data, std::size_t size);
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::uint64_t fnv1a64(std::string_view bytes);
std::string checksum_hex(std::uint64_t value);
std::optional<std::uint64_t> parse_checksum_hex(std::string_view text);

// Shortest-round-trip style numeric formatting for exports: %.9g for float
// payloads, chosen so a float parses back bit-identical.
std::string format_real(double value);
std::string format_real(float value);

std::string read_file(const std::string& path);

// Minimal CSV with RFC-4180 quoting. Rows are LF-terminated.
std::string csv_escape(std::string_view field);
void csv_write_row(std::ostream& out, const std::vector<std::string>& fields);
std::vector<std::string> csv_parse_line(std::string_view line);

std::string to_lower_ascii(std::string_view s);

}  // namespace driftscope
