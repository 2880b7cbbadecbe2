#include "rtc/zip.hpp"

#include <algorithm>
#include <array>
#include <cstring>

#include "zlib.h"

#include "rtc/error.hpp"

namespace rtc::zip {

namespace {

constexpr std::uint32_t kLocalHeaderSig = 0x04034b50U;
constexpr std::uint32_t kCentralHeaderSig = 0x02014b50U;
constexpr std::uint32_t kEndOfCentralDirSig = 0x06054b50U;
constexpr std::uint32_t kZip64EndSig = 0x06064b50U;
constexpr std::uint32_t kZip64LocatorSig = 0x07064b50U;
constexpr std::uint16_t kDosDate1980 = (0U << 9U) | (1U << 5U) | 1U;

std::uint16_t get16(char const* p) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(p[0]) |
                                    (static_cast<unsigned char>(p[1]) << 8U));
}

std::uint32_t get32(char const* p) {
  return static_cast<std::uint32_t>(get16(p)) |
         (static_cast<std::uint32_t>(get16(p + 2)) << 16U);
}

std::uint64_t get64(char const* p) {
  return static_cast<std::uint64_t>(get32(p)) |
         (static_cast<std::uint64_t>(get32(p + 4)) << 32U);
}

void put16(std::string& out, std::uint16_t const v) {
  out.push_back(static_cast<char>(v & 0xFFU));
  out.push_back(static_cast<char>((v >> 8U) & 0xFFU));
}

void put32(std::string& out, std::uint32_t const v) {
  put16(out, static_cast<std::uint16_t>(v & 0xFFFFU));
  put16(out, static_cast<std::uint16_t>(v >> 16U));
}

}  // namespace

bool has_zip_magic(std::string_view bytes) {
  return bytes.size() >= 4 && (get32(bytes.data()) == kLocalHeaderSig ||
                               get32(bytes.data()) == kEndOfCentralDirSig);
}

reader::reader(std::filesystem::path const& path)
    : path_{path}, in_{path, std::ios::binary} {
  if (!in_) {
    throw load_error{"cannot open zip " + path.string()};
  }
  in_.seekg(0, std::ios::end);
  file_size_ = static_cast<std::uint64_t>(in_.tellg());

  // The end-of-central-directory record sits in the last 64 KiB + 22 bytes.
  auto const tail_size = std::min<std::uint64_t>(file_size_, 65535U + 22U);
  auto tail = std::string(tail_size, '\0');
  in_.seekg(static_cast<std::streamoff>(file_size_ - tail_size));
  in_.read(tail.data(), static_cast<std::streamsize>(tail_size));

  auto eocd = std::string::npos;
  for (auto i = static_cast<std::int64_t>(tail_size) - 22; i >= 0; --i) {
    if (get32(tail.data() + i) == kEndOfCentralDirSig) {
      eocd = static_cast<std::size_t>(i);
      break;
    }
  }
  if (eocd == std::string::npos) {
    throw load_error{"not a zip archive (no end of central directory): " +
                     path.string()};
  }

  auto const* e = tail.data() + eocd;
  std::uint64_t count = get16(e + 10);
  std::uint64_t cd_size = get32(e + 12);
  std::uint64_t cd_offset = get32(e + 16);

  if (eocd >= 20 && get32(tail.data() + eocd - 20) == kZip64LocatorSig) {
    auto const z64_offset = get64(tail.data() + eocd - 20 + 8);
    auto z64 = std::array<char, 56>{};
    in_.seekg(static_cast<std::streamoff>(z64_offset));
    in_.read(z64.data(), z64.size());
    if (!in_ || get32(z64.data()) != kZip64EndSig) {
      throw load_error{"corrupt zip64 end record: " + path.string()};
    }
    count = get64(z64.data() + 32);
    cd_size = get64(z64.data() + 40);
    cd_offset = get64(z64.data() + 48);
  }

  if (cd_offset + cd_size > file_size_) {
    throw load_error{"truncated zip archive: " + path.string()};
  }

  auto cd = std::string(cd_size, '\0');
  in_.seekg(static_cast<std::streamoff>(cd_offset));
  in_.read(cd.data(), static_cast<std::streamsize>(cd_size));
  if (!in_) {
    throw load_error{"cannot read central directory: " + path.string()};
  }

  auto pos = std::size_t{0U};
  for (auto i = 0ULL; i != count; ++i) {
    if (pos + 46 > cd.size() || get32(cd.data() + pos) != kCentralHeaderSig) {
      throw load_error{"corrupt central directory: " + path.string()};
    }
    auto const* h = cd.data() + pos;
    auto info = entry_info{};
    info.method_ = get16(h + 10);
    info.crc32_ = get32(h + 16);
    info.compressed_size_ = get32(h + 20);
    info.uncompressed_size_ = get32(h + 24);
    auto const name_len = get16(h + 28);
    auto const extra_len = get16(h + 30);
    auto const comment_len = get16(h + 32);
    info.local_header_offset_ = get32(h + 42);
    if (pos + 46 + name_len + extra_len + comment_len > cd.size()) {
      throw load_error{"corrupt central directory: " + path.string()};
    }
    info.name_.assign(h + 46, name_len);

    // Zip64 extended information replaces saturated 32-bit fields in order.
    auto const* x = h + 46 + name_len;
    auto const* x_end = x + extra_len;
    while (x + 4 <= x_end) {
      auto const id = get16(x);
      auto const len = get16(x + 2);
      if (id == 0x0001U) {
        auto const* v = x + 4;
        if (info.uncompressed_size_ == 0xFFFFFFFFU && v + 8 <= x + 4 + len) {
          info.uncompressed_size_ = get64(v);
          v += 8;
        }
        if (info.compressed_size_ == 0xFFFFFFFFU && v + 8 <= x + 4 + len) {
          info.compressed_size_ = get64(v);
          v += 8;
        }
        if (info.local_header_offset_ == 0xFFFFFFFFU && v + 8 <= x + 4 + len) {
          info.local_header_offset_ = get64(v);
        }
      }
      x += 4 + len;
    }

    entries_.push_back(std::move(info));
    pos += 46U + name_len + extra_len + comment_len;
  }
}

std::optional<entry_info> reader::find(std::string_view name) const {
  for (auto const& e : entries_) {
    if (e.name_ == name) {
      return e;
    }
    // Tolerate feeds zipped with a top-level directory.
    if (auto const slash = e.name_.rfind('/');
        slash != std::string::npos && e.name_.substr(slash + 1) == name) {
      return e;
    }
  }
  return std::nullopt;
}

std::string reader::read(entry_info const& e) {
  auto header = std::array<char, 30>{};
  in_.clear();
  in_.seekg(static_cast<std::streamoff>(e.local_header_offset_));
  in_.read(header.data(), header.size());
  if (!in_ || get32(header.data()) != kLocalHeaderSig) {
    throw load_error{"corrupt local header for " + e.name_ + " in " +
                     path_.string()};
  }
  auto const data_offset =
      e.local_header_offset_ + 30U + get16(header.data() + 26) +
      get16(header.data() + 28);
  if (data_offset + e.compressed_size_ > file_size_) {
    throw load_error{"truncated entry " + e.name_ + " in " + path_.string()};
  }

  auto compressed = std::string(e.compressed_size_, '\0');
  in_.seekg(static_cast<std::streamoff>(data_offset));
  in_.read(compressed.data(), static_cast<std::streamsize>(e.compressed_size_));
  if (!in_) {
    throw load_error{"cannot read entry " + e.name_};
  }

  auto out = std::string{};
  if (e.method_ == 0U) {
    out = std::move(compressed);
  } else if (e.method_ == 8U) {
    out.resize(e.uncompressed_size_);
    auto zs = z_stream{};
    if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) {
      throw load_error{"inflateInit failed"};
    }
    auto in_pos = std::uint64_t{0U};
    auto out_pos = std::uint64_t{0U};
    auto ret = Z_OK;
    auto spare = Bytef{};
    constexpr auto kChunk = std::uint64_t{1U} << 30U;
    while (ret == Z_OK) {
      if (zs.avail_in == 0U && in_pos < compressed.size()) {
        auto const n = std::min(kChunk, compressed.size() - in_pos);
        zs.next_in = reinterpret_cast<Bytef*>(compressed.data() + in_pos);
        zs.avail_in = static_cast<uInt>(n);
        in_pos += n;
      }
      if (zs.avail_out == 0U) {
        if (out_pos >= out.size()) {
          // Output is full; one spare byte lets the end of stream be read
          // and exposes any excess data.
          zs.next_out = &spare;
          zs.avail_out = 1U;
          ret = inflate(&zs, Z_NO_FLUSH);
          break;
        }
        auto const n = std::min(kChunk, out.size() - out_pos);
        zs.next_out = reinterpret_cast<Bytef*>(out.data() + out_pos);
        zs.avail_out = static_cast<uInt>(n);
        out_pos += n;
      }
      ret = inflate(&zs, Z_NO_FLUSH);
    }
    auto const produced = zs.total_out;
    inflateEnd(&zs);
    if (ret != Z_STREAM_END || produced != e.uncompressed_size_) {
      throw load_error{"corrupt deflate stream for " + e.name_ + " in " +
                       path_.string()};
    }
  } else {
    throw load_error{"unsupported compression method " +
                     std::to_string(e.method_) + " for " + e.name_};
  }

  auto crc = crc32(0L, Z_NULL, 0);
  for (auto off = std::size_t{0U}; off < out.size();) {
    auto const n = std::min<std::size_t>(out.size() - off, 1U << 30U);
    crc = crc32(crc, reinterpret_cast<Bytef const*>(out.data() + off),
                static_cast<uInt>(n));
    off += n;
  }
  if (crc != e.crc32_) {
    throw load_error{"crc mismatch for " + e.name_ + " in " + path_.string()};
  }
  return out;
}

std::optional<std::string> reader::read(std::string_view name) {
  auto const e = find(name);
  if (!e) {
    return std::nullopt;
  }
  return read(*e);
}

void writer::add(std::string const& name, std::string_view data) {
  // TODO: emit Zip64 records so single-day bundles above 4 GiB can be written.
  if (data.size() >= 0xFFFFFFFFU || out_.size() >= 0xFFFFFFFFU) {
    throw io_error{"zip entry too large for a non-zip64 archive: " + name};
  }

  auto const crc = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<Bytef const*>(data.data()),
            static_cast<uInt>(data.size())));

  auto zs = z_stream{};
  if (deflateInit2(&zs, 6, Z_DEFLATED, -MAX_WBITS, 8, Z_DEFAULT_STRATEGY) !=
      Z_OK) {
    throw io_error{"deflateInit failed"};
  }
  auto compressed = std::string(deflateBound(&zs, static_cast<uLong>(data.size())), '\0');
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());
  zs.next_out = reinterpret_cast<Bytef*>(compressed.data());
  zs.avail_out = static_cast<uInt>(compressed.size());
  auto const ret = deflate(&zs, Z_FINISH);
  compressed.resize(zs.total_out);
  deflateEnd(&zs);
  if (ret != Z_STREAM_END) {
    throw io_error{"deflate failed for " + name};
  }

  auto info = entry_info{name, 8U, crc, compressed.size(), data.size(),
                         out_.size()};
  put32(out_, kLocalHeaderSig);
  put16(out_, 20U);  // version needed
  put16(out_, 0U);  // flags
  put16(out_, 8U);
  put16(out_, 0U);  // time
  put16(out_, kDosDate1980);
  put32(out_, crc);
  put32(out_, static_cast<std::uint32_t>(compressed.size()));
  put32(out_, static_cast<std::uint32_t>(data.size()));
  put16(out_, static_cast<std::uint16_t>(name.size()));
  put16(out_, 0U);
  out_ += name;
  out_ += compressed;
  entries_.push_back(std::move(info));
}

std::string writer::finish() {
  auto const cd_offset = out_.size();
  for (auto const& e : entries_) {
    put32(out_, kCentralHeaderSig);
    put16(out_, 20U);  // version made by
    put16(out_, 20U);  // version needed
    put16(out_, 0U);
    put16(out_, e.method_);
    put16(out_, 0U);
    put16(out_, kDosDate1980);
    put32(out_, e.crc32_);
    put32(out_, static_cast<std::uint32_t>(e.compressed_size_));
    put32(out_, static_cast<std::uint32_t>(e.uncompressed_size_));
    put16(out_, static_cast<std::uint16_t>(e.name_.size()));
    put16(out_, 0U);  // extra
    put16(out_, 0U);  // comment
    put16(out_, 0U);  // disk
    put16(out_, 0U);  // internal attrs
    put32(out_, 0U);  // external attrs
    put32(out_, static_cast<std::uint32_t>(e.local_header_offset_));
    out_ += e.name_;
  }
  auto const cd_size = out_.size() - cd_offset;
  put32(out_, kEndOfCentralDirSig);
  put16(out_, 0U);
  put16(out_, 0U);
  put16(out_, static_cast<std::uint16_t>(entries_.size()));
  put16(out_, static_cast<std::uint16_t>(entries_.size()));
  put32(out_, static_cast<std::uint32_t>(cd_size));
  put32(out_, static_cast<std::uint32_t>(cd_offset));
  put16(out_, 0U);
  entries_.clear();
  return std::move(out_);
}

}  // namespace rtc::zip
