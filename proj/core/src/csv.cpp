#include "csv.hpp"

#include "drl/error.hpp"

namespace drl::csv {

std::optional<Record> Reader::next() {
  Record record;
  record.line = line_;
  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;
  bool any = false;

  for (;;) {
    const int c = in_.get();
    if (c == std::char_traits<char>::eof()) {
      if (in_quotes) {
        throw Error(ErrorKind::kParse,
                    "line " + std::to_string(record.line) + ": unterminated quoted field");
      }
      if (!any) return std::nullopt;
      record.fields.push_back(std::move(field));
      return record;
    }
    any = true;
    const char ch = static_cast<char>(c);

    if (in_quotes) {
      if (ch == '"') {
        if (in_.peek() == '"') {
          in_.get();
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++line_;
        field.push_back(ch);
      }
      continue;
    }

    switch (ch) {
      case '"':
        if (!field.empty() || field_was_quoted) {
          throw Error(ErrorKind::kParse,
                      "line " + std::to_string(line_) + ": unexpected quote inside field");
        }
        in_quotes = true;
        field_was_quoted = true;
        break;
      case ',':
        record.fields.push_back(std::move(field));
        field.clear();
        field_was_quoted = false;
        break;
      case '\r':
        if (in_.peek() == '\n') break;
        [[fallthrough]];
      case '\n':
        ++line_;
        record.fields.push_back(std::move(field));
        return record;
      default:
        if (field_was_quoted) {
          throw Error(ErrorKind::kParse,
                      "line " + std::to_string(line_) + ": text after closing quote");
        }
        field.push_back(ch);
    }
  }
}

void Reader::skip_line() {
  for (int c = in_.get(); c != std::char_traits<char>::eof(); c = in_.get()) {
    if (c == '\n') {
      ++line_;
      return;
    }
  }
}

}  // namespace drl::csv
