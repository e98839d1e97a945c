#include "nhawkes/io_util.hpp"

#include "nhawkes/error.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>

namespace nhawkes {

std::string hash_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw ArgumentError("cannot format number");
  return std::string(buf, ptr);
}

static std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view text) {
  text = trim(text);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ArgumentError("not a number: '" + std::string(text) + "'");
  return v;
}

long long parse_int(std::string_view text) {
  text = trim(text);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ArgumentError("not an integer: '" + std::string(text) + "'");
  return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

CommentMap read_comment_header(std::istream& in) {
  CommentMap out;
  std::string line;
  while (in.peek() == '#') {
    std::getline(in, line);
    std::string_view body = trim(std::string_view(line).substr(1));
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) continue;
    out.emplace(std::string(trim(body.substr(0, eq))), std::string(trim(body.substr(eq + 1))));
  }
  return out;
}

void write_comment(std::ostream& out, std::string_view key, std::string_view value) {
  out << "# " << key << '=' << value << '\n';
}

void write_provenance(std::ostream& out, const std::optional<Provenance>& prov) {
  if (!prov) return;
  write_comment(out, "seed", std::to_string(prov->seed));
  write_comment(out, "config_hash", prov->config_hash);
}

}  // namespace nhawkes
