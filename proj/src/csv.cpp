#include "tmap/csv.hpp"

namespace tmap::csv {

std::vector<Record> parse(std::string_view text) {
  std::vector<Record> out;
  std::size_t i = 0;
  std::size_t line = 1;
  if (text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;

  while (i < text.size()) {
    Record rec;
    rec.line = line;
    std::string field;
    bool at_field_start = true;
    bool row_done = false;
    while (!row_done) {
      if (i >= text.size()) {
        rec.fields.push_back(std::move(field));
        break;
      }
      char c = text[i];
      if (at_field_start && c == '"') {
        ++i;
        for (;;) {
          if (i >= text.size()) throw ParseError(rec.line, "unterminated quoted field");
          char q = text[i];
          if (q == '"') {
            if (i + 1 < text.size() && text[i + 1] == '"') {
              field.push_back('"');
              i += 2;
              continue;
            }
            ++i;
            break;
          }
          if (q == '\n') ++line;
          field.push_back(q);
          ++i;
        }
        if (i < text.size() && text[i] != ',' && text[i] != '\n' && text[i] != '\r')
          throw ParseError(rec.line, "unexpected character after closing quote");
        at_field_start = false;
        continue;
      }
      if (c == ',') {
        rec.fields.push_back(std::move(field));
        field.clear();
        at_field_start = true;
        ++i;
      } else if (c == '\r' || c == '\n') {
        rec.fields.push_back(std::move(field));
        if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
        ++i;
        ++line;
        row_done = true;
      } else if (c == '"') {
        throw ParseError(rec.line, "stray quote inside unquoted field");
      } else {
        field.push_back(c);
        at_field_start = false;
        ++i;
      }
    }
    bool blank = rec.fields.size() == 1 && rec.fields[0].empty();
    if (!blank) out.push_back(std::move(rec));
  }
  return out;
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string join_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += escape(fields[i]);
  }
  return out;
}

}  // namespace tmap::csv
