#pragma once

#include <istream>
#include <optional>
#include <string>
#include <vector>

namespace drl::csv {

struct Record {
  std::vector<std::string> fields;
  std::size_t line = 0;  // 1-based line where the record starts
};

// RFC 4180 reader: comma separated, double-quote escaping, quoted fields may
// span lines. CRLF and LF line endings are both accepted.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  // Next record, or nullopt at end of input. Throws drl::Error(kParse) on an
  // unterminated quoted field or stray quote.
  std::optional<Record> next();

  // Discards input up to and including the next newline; used to resume
  // after a malformed record.
  void skip_line();

 private:
  std::istream& in_;
  std::size_t line_ = 1;
};

}  // namespace drl::csv
