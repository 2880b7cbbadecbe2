#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <future>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string_view>
#include <vector>

#include "rtc/gtfs_model.hpp"
#include "rtc/model.hpp"

namespace rtc {

enum class resolution_status {
  resolved_same_day,
  resolved_window,
  no_trip_id,
  unknown_trip_id
};

std::string_view to_string(resolution_status);

struct resolution_outcome {
  resolution_status status_{resolution_status::unknown_trip_id};
  scheduled_trip const* trip_{nullptr};
  std::optional<date> source_snapshot_date_;
  // Keeps trip_ alive even if the window evicts the snapshot.
  std::shared_ptr<timetable_snapshot const> snapshot_;

  bool resolved() const { return trip_ != nullptr; }
};

using snapshot_loader = std::function<timetable_snapshot(
    std::filesystem::path const&, date)>;

std::filesystem::path timetable_path(std::filesystem::path const& archive_root,
                                     date d);

// Day offsets in probe order: 0, -1, +1, -2, +2, ...
std::vector<int> probe_order(int days_before, int days_after);

// Timetable snapshots around a target date. The target snapshot is loaded
// eagerly; offset days load on first use, at most once concurrently per day,
// and are kept in an LRU of bounded size.
class resolution_window {
public:
  static std::unique_ptr<resolution_window> build(
      std::filesystem::path const& archive_root, date target_date,
      int days_before, int days_after, snapshot_loader loader = {},
      std::size_t cache_capacity = 0U);

  date target_date() const { return target_date_; }
  int days_before() const { return days_before_; }
  int days_after() const { return days_after_; }

  // Offsets whose archive file exists, in probe order.
  std::vector<int> const& available_offsets() const { return available_; }
  std::size_t missing_days() const { return missing_days_; }
  std::size_t failed_loads() const { return failed_loads_; }
  std::size_t loads_performed() const { return loads_; }
  std::size_t same_day_inactive() const { return same_day_inactive_; }

  std::shared_ptr<timetable_snapshot const> target() const { return target_; }

  // nullptr when the day is outside the window, missing, or failed to load.
  std::shared_ptr<timetable_snapshot const> snapshot(int offset);

  resolution_outcome resolve(std::optional<std::string> const& trip_id);
  resolution_outcome resolve(vehicle_position_record const& r) {
    return resolve(r.trip_id_);
  }

private:
  resolution_window() = default;

  std::filesystem::path archive_root_;
  date target_date_;
  int days_before_{0};
  int days_after_{0};
  snapshot_loader loader_;
  std::size_t capacity_{1U};

  std::shared_ptr<timetable_snapshot const> target_;
  std::vector<int> available_;
  std::size_t missing_days_{0U};

  std::mutex mutex_;
  std::map<int, std::shared_ptr<timetable_snapshot const>> cache_;
  std::list<int> lru_;  // front = most recent
  std::map<int, std::shared_future<std::shared_ptr<timetable_snapshot const>>>
      in_flight_;
  std::atomic_size_t failed_loads_{0U};
  std::atomic_size_t loads_{0U};
  std::atomic_size_t same_day_inactive_{0U};
};

}  // namespace rtc
