#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace rtc {

// Writes to a temporary sibling, fsyncs, then renames over path so readers
// never observe a partial file. Throws fatal_io_error when the device is
// full, io_error otherwise. With replace = false an existing file is left
// untouched and false is returned.
bool write_file_atomic(std::filesystem::path const& path, std::string_view data,
                       bool replace = true);

std::string read_file(std::filesystem::path const& path);

}  // namespace rtc
