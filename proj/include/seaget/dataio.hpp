#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace seaget {

enum class Season : std::uint8_t { winter = 0, spring = 1, summer = 2, autumn = 3 };
inline constexpr std::size_t kSeasonCount = 4;

enum class Hemisphere { northern, southern };

struct CheckIn {
  std::size_t user_id = 0;
  std::size_t poi_id = 0;
  std::size_t category_id = 0;
  double lat = 0.0;
  double lon = 0.0;
  std::int64_t utc_timestamp = 0;  // seconds since epoch
  std::int32_t tz_offset = 0;      // minutes

  std::int64_t local_timestamp() const noexcept {
    return utc_timestamp + static_cast<std::int64_t>(tz_offset) * 60;
  }
};

/// Visits of one user, ordered by local time.
struct Trajectory {
  std::size_t id = 0;
  std::size_t user_id = 0;
  std::vector<CheckIn> checkins;

  std::size_t size() const noexcept { return checkins.size(); }
};

/// Raw string id <-> dense integer, dense ids in first-intern order.
class IdMap {
 public:
  std::size_t intern(const std::string& raw);
  std::optional<std::size_t> find(const std::string& raw) const;
  const std::string& raw(std::size_t dense) const { return raw_.at(dense); }
  std::size_t size() const noexcept { return raw_.size(); }

 private:
  std::vector<std::string> raw_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct PoiInfo {
  std::size_t category_id = 0;
  double lat = 0.0;
  double lon = 0.0;
  std::size_t frequency = 0;  // check-in count
};

struct PoiCatalog {
  std::vector<PoiInfo> pois;
  std::vector<std::string> category_names;
  IdMap user_ids;
  IdMap poi_ids;
  IdMap category_ids;

  std::size_t poi_count() const noexcept { return pois.size(); }
  std::size_t category_count() const noexcept { return category_ids.size(); }
  std::size_t user_count() const noexcept { return user_ids.size(); }
};

struct ParsedLog {
  std::vector<CheckIn> checkins;
  PoiCatalog catalog;
  std::size_t rows = 0;
  std::size_t malformed = 0;
  std::size_t first_malformed_line = 0;
};

/// Parses the 8-column tab-separated check-in log
///   user, poi, category, category name, lat, lon, tz offset (minutes),
///   UTC time ("Tue Apr 03 18:00:06 +0000 2012").
/// Malformed rows are skipped; more than 1% of them is a FormatError.
ParsedLog parse_checkins(const std::filesystem::path& path);
ParsedLog parse_checkins_text(const std::string& text);

/// Parses the UTC time column; nullopt when malformed.
std::optional<std::int64_t> parse_utc_time(const std::string& text);
/// "YYYY-MM-DDTHH:MM" or "YYYY-MM-DDTHH:MM:SS" (a space may replace the T),
/// read as local wall-clock seconds since the epoch.
std::optional<std::int64_t> parse_local_datetime(std::string_view text);
std::string format_local_datetime(std::int64_t local_timestamp);

enum class FilterMode { fixed_point, single_pass };

/// Drops POIs and users with fewer than `min_count` check-ins. In fixed-point
/// mode the two criteria are reapplied until neither removes anything.
std::vector<CheckIn> filter_min_activity(std::vector<CheckIn> checkins, std::size_t min_count = 10,
                                         FilterMode mode = FilterMode::fixed_point);

/// Per user, splits the time-ordered visits wherever the gap to the previous
/// visit exceeds `max_gap_seconds`; single-visit trajectories are dropped.
std::vector<Trajectory> segment_trajectories(std::vector<CheckIn> checkins,
                                             std::int64_t max_gap_seconds = 24 * 3600);

struct DatasetSplit {
  std::vector<Trajectory> train;
  std::vector<Trajectory> validation;
  std::vector<Trajectory> test;
  PoiCatalog catalog;
  std::size_t excluded_validation = 0;
  std::size_t excluded_test = 0;
};

/// Seeded 80/10/10 split by trajectory, then drops validation/test
/// trajectories that mention a user or POI absent from the training part.
/// The catalog is copied through unchanged.
DatasetSplit split_random(std::vector<Trajectory> trajectories, std::uint64_t seed,
                          const PoiCatalog& catalog);

/// Re-numbers users, POIs and categories densely over the training part
/// (keeping their relative order) and recomputes POI frequencies from it.
DatasetSplit compact_ids(const DatasetSplit& split);

Season assign_season(std::int64_t local_timestamp, Hemisphere hemisphere = Hemisphere::northern);
/// 0 = Monday ... 6 = Sunday.
int day_of_week(std::int64_t local_timestamp) noexcept;
int minute_of_day(std::int64_t local_timestamp) noexcept;
/// Local seconds-since-midnight / 86400, in [0, 1).
double time_of_day_fraction(std::int64_t local_timestamp) noexcept;

struct PreprocessOptions {
  std::size_t min_count = 10;
  FilterMode filter_mode = FilterMode::fixed_point;
  std::int64_t max_gap_seconds = 24 * 3600;
  std::uint64_t seed = 42;
};

struct DatasetStats {
  std::size_t users = 0;
  std::size_t pois = 0;
  std::size_t categories = 0;
  std::size_t checkins = 0;
  std::size_t trajectories = 0;
};

struct PreprocessResult {
  DatasetStats stats;
  DatasetSplit split;
};

/// Activity filter, segmentation and singleton removal. In fixed-point mode
/// the three steps repeat until the surviving check-ins stop changing, so the
/// result is a fixed point of the whole pipeline.
std::vector<Trajectory> build_trajectories(std::vector<CheckIn> checkins,
                                           const PreprocessOptions& options);
DatasetStats compute_stats(const std::vector<Trajectory>& trajectories);

PreprocessResult preprocess(const ParsedLog& log, const PreprocessOptions& options);

/// Persisted layout under `dir`: train.tsv, val.tsv, test.tsv and idmap.tsv.
void write_split(const std::filesystem::path& dir, const DatasetSplit& split);
DatasetSplit read_split(const std::filesystem::path& dir);

/// All check-ins of a trajectory list, in trajectory order.
std::vector<CheckIn> flatten(const std::vector<Trajectory>& trajectories);

}  // namespace seaget
