#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rtc::zip {

struct entry_info {
  std::string name_;
  std::uint16_t method_{0U};  // 0 stored, 8 deflate
  std::uint32_t crc32_{0U};
  std::uint64_t compressed_size_{0U};
  std::uint64_t uncompressed_size_{0U};
  std::uint64_t local_header_offset_{0U};
};

// True iff the bytes start with a local file header or an empty-archive
// end-of-central-directory record.
bool has_zip_magic(std::string_view bytes);

// Random-access reader over a ZIP file on disk (Zip64 aware).
class reader {
public:
  explicit reader(std::filesystem::path const& path);

  std::vector<entry_info> const& entries() const { return entries_; }
  std::optional<entry_info> find(std::string_view name) const;

  // Inflates the entry and verifies its CRC. Throws load_error.
  std::string read(entry_info const& e);
  std::optional<std::string> read(std::string_view name);

private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::uint64_t file_size_{0U};
  std::vector<entry_info> entries_;
};

// Writes a deflate-compressed archive. Entry timestamps are fixed at
// 1980-01-01 00:00 so identical input yields identical bytes.
class writer {
public:
  void add(std::string const& name, std::string_view data);

  std::string finish();

private:
  std::string out_;
  std::vector<entry_info> entries_;
};

}  // namespace rtc::zip
