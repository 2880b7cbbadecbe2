#include "rtc/csv.hpp"

namespace rtc::csv {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace

reader::reader(std::string_view content) : content_{content} {
  if (content_.substr(0, 3) == "\xEF\xBB\xBF") {
    content_.remove_prefix(3);
  }
  read_record(header_);
}

std::optional<std::size_t> reader::column(std::string_view name) const {
  for (auto i = 0U; i != header_.size(); ++i) {
    if (header_[i] == name) {
      return i;
    }
  }
  return std::nullopt;
}

bool reader::next(std::vector<std::string>& row) {
  if (!read_record(row)) {
    return false;
  }
  if (row.size() < header_.size()) {
    row.resize(header_.size());
  }
  return true;
}

bool reader::read_record(std::vector<std::string>& out) {
  // Skip blank lines.
  while (pos_ < content_.size() &&
         (content_[pos_] == '\n' || content_[pos_] == '\r')) {
    if (content_[pos_] == '\n') {
      ++line_;
    }
    ++pos_;
  }
  if (pos_ >= content_.size()) {
    return false;
  }

  ++line_;
  auto n = std::size_t{0U};
  auto emit = [&](std::string_view f, bool quoted) {
    if (n == out.size()) {
      out.emplace_back();
    }
    out[n].assign(quoted ? f : trim(f));
    ++n;
  };

  auto quoted_buf = std::string{};
  while (true) {
    auto const start = pos_;
    if (pos_ < content_.size() && content_[pos_] == '"') {
      quoted_buf.clear();
      ++pos_;
      while (pos_ < content_.size()) {
        auto const c = content_[pos_];
        if (c == '"') {
          if (pos_ + 1 < content_.size() && content_[pos_ + 1] == '"') {
            quoted_buf.push_back('"');
            pos_ += 2;
            continue;
          }
          ++pos_;
          break;
        }
        if (c == '\n') {
          ++line_;
        }
        quoted_buf.push_back(c);
        ++pos_;
      }
      // Tolerate garbage between the closing quote and the delimiter.
      while (pos_ < content_.size() && content_[pos_] != ',' &&
             content_[pos_] != '\n' && content_[pos_] != '\r') {
        ++pos_;
      }
      emit(quoted_buf, true);
    } else {
      while (pos_ < content_.size() && content_[pos_] != ',' &&
             content_[pos_] != '\n' && content_[pos_] != '\r') {
        ++pos_;
      }
      emit(content_.substr(start, pos_ - start), false);
    }

    if (pos_ >= content_.size()) {
      break;
    }
    if (content_[pos_] == ',') {
      ++pos_;
      if (pos_ >= content_.size()) {
        emit({}, false);
        break;
      }
      continue;
    }
    // End of record.
    if (content_[pos_] == '\r') {
      ++pos_;
    }
    if (pos_ < content_.size() && content_[pos_] == '\n') {
      ++pos_;
    }
    break;
  }
  out.resize(n);
  return true;
}

void writer::field(std::string_view f, bool const first) {
  if (!first) {
    out_.push_back(',');
  }
  auto const padded = !f.empty() && (f.front() == ' ' || f.front() == '\t' ||
                                     f.back() == ' ' || f.back() == '\t');
  if (!padded && f.find_first_of(",\"\r\n") == std::string_view::npos) {
    out_.append(f);
    return;
  }
  out_.push_back('"');
  for (auto const c : f) {
    if (c == '"') {
      out_.push_back('"');
    }
    out_.push_back(c);
  }
  out_.push_back('"');
}

void writer::row(std::initializer_list<std::string_view> fields) {
  auto first = true;
  for (auto const f : fields) {
    field(f, first);
    first = false;
  }
  out_.push_back('\n');
}

void writer::row(std::vector<std::string> const& fields) {
  auto first = true;
  for (auto const& f : fields) {
    field(f, first);
    first = false;
  }
  out_.push_back('\n');
}

}  // namespace rtc::csv
