#pragma once

// Minimal CSV emission and parsing (RFC-4180-style quoting). Fields are
// quoted only when they contain a comma, quote, or line break; embedded
// quotes are doubled. Numbers print via to_chars (shortest round-trip), so
// emitted files are byte-stable for identical inputs.

#include <charconv>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace regent::csv {

inline std::string number(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string number(std::uint64_t v) { return std::to_string(v); }
inline std::string number(std::int64_t v) { return std::to_string(v); }
inline std::string number(int v) { return std::to_string(v); }

inline std::string quote(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline void write_row(std::ostream& out,
                      const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << quote(fields[i]);
  }
  out << '\n';
}

// Parses quoted CSV back into rows; accepts \n and \r\n row endings and
// skips a trailing empty line. Throws on an unterminated quoted field.
inline std::vector<std::vector<std::string>> parse(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
    any = false;
  };
  char c;
  while (in.get(c)) {
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        any = true;
        break;
      case ',':
        end_field();
        any = true;
        break;
      case '\r':
        break;
      case '\n':
        end_row();
        break;
      default:
        field += c;
        any = true;
    }
  }
  if (quoted) throw std::runtime_error("unterminated quoted CSV field");
  if (any || !field.empty() || !row.empty()) end_row();
  return rows;
}

}  // namespace regent::csv
