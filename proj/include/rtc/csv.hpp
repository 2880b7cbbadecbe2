#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rtc::csv {

// RFC 4180 reader over an in-memory buffer. Handles a UTF-8 BOM, CRLF line
// endings, quoted fields with doubled quotes, and skips blank lines.
// Unquoted fields are trimmed of surrounding spaces.
class reader {
public:
  explicit reader(std::string_view content);

  std::vector<std::string> const& header() const { return header_; }
  std::optional<std::size_t> column(std::string_view name) const;

  // Fills row with the next record. Short rows are padded with empty fields.
  bool next(std::vector<std::string>& row);

  std::size_t line() const { return line_; }

private:
  bool read_record(std::vector<std::string>& out);

  std::string_view content_;
  std::size_t pos_{0U};
  std::size_t line_{0U};
  std::vector<std::string> header_;
};

class writer {
public:
  void row(std::initializer_list<std::string_view> fields);
  void row(std::vector<std::string> const& fields);

  std::string const& str() const { return out_; }
  std::string release() { return std::move(out_); }

private:
  void field(std::string_view f, bool first);

  std::string out_;
};

}  // namespace rtc::csv
