#include "rtc/trip_resolver.hpp"

#include <algorithm>

#include "rtc/error.hpp"
#include "rtc/log.hpp"

namespace fs = std::filesystem;

namespace rtc {

std::string_view to_string(resolution_status const s) {
  switch (s) {
    case resolution_status::resolved_same_day: return "resolved_same_day";
    case resolution_status::resolved_window: return "resolved_window";
    case resolution_status::no_trip_id: return "no_trip_id";
    case resolution_status::unknown_trip_id: return "unknown_trip_id";
  }
  return "unknown_trip_id";
}

fs::path timetable_path(fs::path const& archive_root, date const d) {
  return archive_root / "gtfs" / (format_iso_date(d) + ".zip");
}

std::vector<int> probe_order(int const days_before, int const days_after) {
  auto out = std::vector<int>{0};
  for (auto k = 1; k <= std::max(days_before, days_after); ++k) {
    if (k <= days_before) {
      out.push_back(-k);
    }
    if (k <= days_after) {
      out.push_back(k);
    }
  }
  return out;
}

std::unique_ptr<resolution_window> resolution_window::build(
    fs::path const& archive_root, date const target_date,
    int const days_before, int const days_after, snapshot_loader loader,
    std::size_t const cache_capacity) {
  if (days_before < 0 || days_after < 0) {
    throw invalid_parameter{"window sizes must be non-negative"};
  }
  auto w = std::unique_ptr<resolution_window>{new resolution_window{}};
  w->archive_root_ = archive_root;
  w->target_date_ = target_date;
  w->days_before_ = days_before;
  w->days_after_ = days_after;
  w->loader_ = loader ? std::move(loader) : snapshot_loader{load_timetable};
  w->capacity_ = cache_capacity != 0U
                     ? cache_capacity
                     : static_cast<std::size_t>(days_before + days_after + 1);

  auto const target_file = timetable_path(archive_root, target_date);
  if (!fs::exists(target_file)) {
    throw not_found{"no timetable archived for " +
                    format_iso_date(target_date) + " (" +
                    target_file.string() + ")"};
  }
  w->target_ = std::make_shared<timetable_snapshot const>(
      w->loader_(target_file, target_date));
  ++w->loads_;

  for (auto const offset : probe_order(days_before, days_after)) {
    if (offset == 0 ||
        fs::exists(timetable_path(archive_root, add_days(target_date, offset)))) {
      w->available_.push_back(offset);
    } else {
      ++w->missing_days_;
    }
  }
  return w;
}

std::shared_ptr<timetable_snapshot const> resolution_window::snapshot(
    int const offset) {
  if (offset == 0) {
    return target_;
  }
  if (offset < -days_before_ || offset > days_after_ ||
      std::find(begin(available_), end(available_), offset) == end(available_)) {
    return nullptr;
  }

  auto lock = std::unique_lock{mutex_};
  if (auto const it = cache_.find(offset); it != end(cache_)) {
    lru_.remove(offset);
    lru_.push_front(offset);
    return it->second;
  }
  if (auto const it = in_flight_.find(offset); it != end(in_flight_)) {
    auto f = it->second;
    lock.unlock();
    return f.get();
  }

  auto promise =
      std::promise<std::shared_ptr<timetable_snapshot const>>{};
  in_flight_.emplace(offset, promise.get_future().share());
  lock.unlock();

  auto const d = add_days(target_date_, offset);
  auto loaded = std::shared_ptr<timetable_snapshot const>{};
  try {
    loaded = std::make_shared<timetable_snapshot const>(
        loader_(timetable_path(archive_root_, d), d));
    ++loads_;
  } catch (std::exception const& e) {
    ++failed_loads_;
    log::warn("window_snapshot_load_failed",
              {{"date", format_iso_date(d)}, {"error", e.what()}});
  }

  lock.lock();
  // Failed days stay cached as nullptr so they are not retried.
  cache_[offset] = loaded;
  lru_.push_front(offset);
  // The target is held outside the cache, so offset days get capacity - 1.
  while (lru_.size() + 1U > capacity_ && lru_.size() > 1U) {
    cache_.erase(lru_.back());
    lru_.pop_back();
  }
  in_flight_.erase(offset);
  lock.unlock();
  promise.set_value(loaded);
  return loaded;
}

resolution_outcome resolution_window::resolve(
    std::optional<std::string> const& trip_id) {
  if (!trip_id.has_value() || trip_id->empty()) {
    return {resolution_status::no_trip_id, nullptr, std::nullopt, nullptr};
  }
  if (auto const* trip = target_->find_trip(*trip_id); trip != nullptr) {
    if (!target_->service_active(trip->service_id_, target_date_)) {
      ++same_day_inactive_;
    }
    return {resolution_status::resolved_same_day, trip, target_date_, target_};
  }
  for (auto const offset : available_) {
    if (offset == 0) {
      continue;
    }
    auto const snap = snapshot(offset);
    if (snap == nullptr) {
      continue;
    }
    if (auto const* trip = snap->find_trip(*trip_id); trip != nullptr) {
      return {resolution_status::resolved_window, trip, snap->snapshot_date_,
              snap};
    }
  }
  return {resolution_status::unknown_trip_id, nullptr, std::nullopt, nullptr};
}

}  // namespace rtc
