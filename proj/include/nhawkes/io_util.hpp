#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nhawkes {

/// Seed and configuration hash stamped into every artifact the tools write.
struct Provenance {
  std::uint64_t seed = 0;
  std::string config_hash;  // 16 hex digits
};

/// FNV-1a 64 of `text`, rendered as 16 lowercase hex digits.
std::string hash_hex(std::string_view text);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

double parse_double(std::string_view text);
long long parse_int(std::string_view text);

std::vector<std::string_view> split(std::string_view line, char sep);

/// Leading `# key=value` lines of a CSV file. Reading stops (without
/// consuming) at the first non-comment line.
using CommentMap = std::map<std::string, std::string>;
CommentMap read_comment_header(std::istream& in);
void write_comment(std::ostream& out, std::string_view key, std::string_view value);
void write_provenance(std::ostream& out, const std::optional<Provenance>& prov);

}  // namespace nhawkes
