#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "tmap/types.hpp"

namespace tmap::csv {

struct Record {
  std::size_t line = 0;  // 1-based line where the record starts
  std::vector<std::string> fields;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// RFC 4180 reader: comma separator, double-quote quoting, LF or CRLF
/// record ends. Blank lines are skipped.
std::vector<Record> parse(std::string_view text);

std::string escape(std::string_view field);
std::string join_row(const std::vector<std::string>& fields);

}  // namespace tmap::csv
