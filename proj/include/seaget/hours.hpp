#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace seaget {

struct PoiCatalog;

/// Half-open [start, end) in minutes after local midnight.
struct OpenInterval {
  int start_minute = 0;
  int end_minute = 0;
  friend bool operator==(const OpenInterval&, const OpenInterval&) = default;
};

enum class HoursKey { poi, category };

/// Opening hours per POI with a per-category fallback. Days run 0 = Monday
/// to 6 = Sunday. A key that is listed is closed on any day/time not covered
/// by one of its intervals; unlisted keys follow `default_open`.
class OperationalHoursTable {
 public:
  using Week = std::array<std::vector<OpenInterval>, 7>;

  explicit OperationalHoursTable(bool default_open = true) : default_open_(default_open) {}

  /// close_minute > 1440 spills into the next day. Overlaps are merged.
  void add(HoursKey key_type, std::size_t key, int day, int open_minute, int close_minute);

  bool is_open(std::size_t poi_id, std::size_t category_id, std::int64_t local_timestamp) const;

  bool default_open() const noexcept { return default_open_; }
  const Week* find(HoursKey key_type, std::size_t key) const;
  std::size_t skipped_keys() const noexcept { return skipped_keys_; }
  void note_skipped_key() noexcept { ++skipped_keys_; }

 private:
  bool default_open_;
  std::map<std::size_t, Week> by_poi_;
  std::map<std::size_t, Week> by_category_;
  std::size_t skipped_keys_ = 0;
};

/// Reads `key_type,key,day_of_week,open_minute,close_minute` rows. Lines
/// starting with '#' and a leading header row are ignored. With a catalog,
/// keys are raw POI/category ids (unknown ones are counted and skipped);
/// without one they are dense integers.
OperationalHoursTable load_operational_hours(const std::filesystem::path& path,
                                             const PoiCatalog* catalog = nullptr,
                                             bool default_open = true);
OperationalHoursTable parse_operational_hours(const std::string& text,
                                              const PoiCatalog* catalog = nullptr,
                                              bool default_open = true);

}  // namespace seaget
