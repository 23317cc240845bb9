#pragma once

// RFC-4180 tables: comma separated, CRLF records, fields quoted when they
// contain a comma, quote, CR or LF.

#include <string>
#include <string_view>
#include <vector>

#include "swapsim/errors.hpp"

namespace swapsim::csv {

using Row = std::vector<std::string>;

inline std::string quote(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string write(const std::vector<Row>& rows) {
  std::string out;
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += quote(row[i]);
    }
    out += "\r\n";
  }
  return out;
}

/// Accepts CRLF or bare LF record endings. A trailing line break does not
/// start an empty record.
inline std::vector<Row> parse(std::string_view text) {
  std::vector<Row> rows;
  Row row;
  std::string field;
  bool quoted = false, after_quote = false, any = false;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    after_quote = false;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
    any = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c != '"') {
        field += c;
      } else if (i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else {
        quoted = false;
        after_quote = true;
      }
      continue;
    }
    any = true;
    if (c == '"') {
      if (!field.empty() || after_quote) throw Error("csv: quote inside unquoted field");
      quoted = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      ++i;
      end_row();
    } else if (c == '\n') {
      end_row();
    } else {
      if (after_quote) throw Error("csv: characters after closing quote");
      field += c;
    }
  }
  if (quoted) throw Error("csv: unterminated quoted field");
  if (any) end_row();
  return rows;
}

}  // namespace swapsim::csv
