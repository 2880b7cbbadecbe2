#include "rtc/file_util.hpp"

#include <cerrno>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include "rtc/error.hpp"

namespace rtc {

namespace {

[[noreturn]] void fail(std::string const& what, std::filesystem::path const& p,
                       int const err) {
  auto const msg = what + " " + p.string() + ": " + std::strerror(err);
  if (err == ENOSPC || err == EDQUOT) {
    throw fatal_io_error{msg};
  }
  throw io_error{msg};
}

struct fd_guard {
  ~fd_guard() {
    if (fd_ != -1) {
      ::close(fd_);
    }
  }
  int fd_{-1};
};

}  // namespace

bool write_file_atomic(std::filesystem::path const& path,
                       std::string_view data, bool const replace) {
  auto const dir = path.has_parent_path() ? path.parent_path()
                                          : std::filesystem::path{"."};
  auto ec = std::error_code{};
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    fail("cannot create directory", dir, ec.value());
  }

  auto tmpl = (dir / ("." + path.filename().string() + ".tmp.XXXXXX")).string();
  auto fd = fd_guard{::mkstemp(tmpl.data())};
  if (fd.fd_ == -1) {
    fail("cannot create temporary file for", path, errno);
  }
  auto const tmp = std::filesystem::path{tmpl};
  auto cleanup = [&](char const* what, int const err) {
    ::close(fd.fd_);
    fd.fd_ = -1;
    ::unlink(tmp.c_str());
    fail(what, path, err);
  };

  auto const* p = data.data();
  auto remaining = data.size();
  while (remaining != 0U) {
    auto const n = ::write(fd.fd_, p, remaining);
    if (n < 0) {
      if (errno == EINTR) {
        continue;
      }
      cleanup("cannot write", errno);
    }
    p += n;
    remaining -= static_cast<std::size_t>(n);
  }
  if (::fchmod(fd.fd_, 0644) != 0 || ::fsync(fd.fd_) != 0) {
    cleanup("cannot sync", errno);
  }
  if (::close(fd.fd_) != 0) {
    fd.fd_ = -1;
    auto const err = errno;
    ::unlink(tmp.c_str());
    fail("cannot close", path, err);
  }
  fd.fd_ = -1;
  if (!replace) {
    // link() refuses to replace an existing name, unlike rename().
    auto const rc = ::link(tmp.c_str(), path.c_str());
    auto const err = errno;
    ::unlink(tmp.c_str());
    if (rc == 0) {
      return true;
    }
    if (err == EEXIST) {
      return false;
    }
    fail("cannot link into", path, err);
  }
  if (::rename(tmp.c_str(), path.c_str()) != 0) {
    auto const err = errno;
    ::unlink(tmp.c_str());
    fail("cannot rename into", path, err);
  }
  return true;
}

std::string read_file(std::filesystem::path const& path) {
  auto in = std::ifstream{path, std::ios::binary};
  if (!in) {
    throw io_error{"cannot open " + path.string()};
  }
  return {std::istreambuf_iterator<char>{in}, std::istreambuf_iterator<char>{}};
}

}  // namespace rtc
