#pragma once

#include <stdexcept>
#include <string>

namespace rtc {

struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A caller passed a value outside the documented domain.
struct invalid_parameter : error {
  using error::error;
};

struct not_found : error {
  using error::error;
};

// GTFS or archive input that cannot be loaded at all.
struct load_error : error {
  using error::error;
};

// An observation timestamp too far from the service date to belong to it.
struct out_of_window : error {
  using error::error;
};

struct contract_violation : error {
  using error::error;
};

struct io_error : error {
  using error::error;
};

// Unrecoverable I/O (disk full, unwritable archive).
struct fatal_io_error : io_error {
  using io_error::io_error;
};

}  // namespace rtc
