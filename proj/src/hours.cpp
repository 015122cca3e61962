#include "seaget/hours.hpp"

#include <algorithm>
#include <sstream>

#include "seaget/dataio.hpp"
#include "seaget/errors.hpp"
#include "seaget/text.hpp"

namespace seaget {

namespace {

constexpr int kMinutesPerDay = 1440;

void insert_merged(std::vector<OpenInterval>& day, OpenInterval iv) {
  if (iv.end_minute <= iv.start_minute) return;
  day.push_back(iv);
  std::sort(day.begin(), day.end(), [](const OpenInterval& a, const OpenInterval& b) {
    return a.start_minute < b.start_minute;
  });
  std::vector<OpenInterval> merged;
  for (const auto& x : day) {
    if (!merged.empty() && x.start_minute <= merged.back().end_minute) {
      merged.back().end_minute = std::max(merged.back().end_minute, x.end_minute);
    } else {
      merged.push_back(x);
    }
  }
  day = std::move(merged);
}

bool covered(const std::vector<OpenInterval>& day, int minute) {
  return std::any_of(day.begin(), day.end(), [minute](const OpenInterval& iv) {
    return iv.start_minute <= minute && minute < iv.end_minute;
  });
}

}  // namespace

void OperationalHoursTable::add(HoursKey key_type, std::size_t key, int day, int open_minute,
                                int close_minute) {
  if (day < 0 || day > 6) throw ContractError("hours: day_of_week must be 0..6");
  if (open_minute < 0 || open_minute >= kMinutesPerDay || close_minute <= open_minute ||
      close_minute > 2 * kMinutesPerDay)
    throw ContractError("hours: interval must satisfy 0 <= open < 1440 and open < close <= 2880");
  Week& week = (key_type == HoursKey::poi ? by_poi_ : by_category_)[key];
  insert_merged(week[static_cast<std::size_t>(day)],
                {open_minute, std::min(close_minute, kMinutesPerDay)});
  if (close_minute > kMinutesPerDay) {
    insert_merged(week[static_cast<std::size_t>((day + 1) % 7)],
                  {0, close_minute - kMinutesPerDay});
  }
}

const OperationalHoursTable::Week* OperationalHoursTable::find(HoursKey key_type,
                                                               std::size_t key) const {
  const auto& m = key_type == HoursKey::poi ? by_poi_ : by_category_;
  const auto it = m.find(key);
  return it == m.end() ? nullptr : &it->second;
}

bool OperationalHoursTable::is_open(std::size_t poi_id, std::size_t category_id,
                                    std::int64_t local_timestamp) const {
  const Week* week = find(HoursKey::poi, poi_id);
  if (week == nullptr) week = find(HoursKey::category, category_id);
  if (week == nullptr) return default_open_;
  return covered((*week)[static_cast<std::size_t>(day_of_week(local_timestamp))],
                 minute_of_day(local_timestamp));
}

OperationalHoursTable parse_operational_hours(const std::string& text, const PoiCatalog* catalog,
                                              bool default_open) {
  OperationalHoursTable table(default_open);
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = trim(line);
    if (row.empty() || row[0] == '#') continue;
    const bool header = first && row.substr(0, 8) == "key_type";
    first = false;
    if (header) continue;
    const auto f = split(row, ',');
    if (f.size() != 5) throw FormatError("hours: expected 5 columns", line_no);
    const std::string_view kind = trim(f[0]);
    HoursKey key_type;
    if (kind == "poi") {
      key_type = HoursKey::poi;
    } else if (kind == "category") {
      key_type = HoursKey::category;
    } else {
      throw FormatError("hours: key_type must be poi or category", line_no);
    }
    const std::string key_text(trim(f[1]));
    std::optional<std::size_t> key;
    if (catalog != nullptr) {
      key = key_type == HoursKey::poi ? catalog->poi_ids.find(key_text)
                                      : catalog->category_ids.find(key_text);
    } else if (const auto k = parse_int(key_text); k && *k >= 0) {
      key = static_cast<std::size_t>(*k);
    } else {
      throw FormatError("hours: key must be a non-negative integer", line_no);
    }
    const auto day = parse_int(trim(f[2]));
    const auto open = parse_int(trim(f[3]));
    const auto close = parse_int(trim(f[4]));
    if (!day || !open || !close) throw FormatError("hours: non-numeric day or minute", line_no);
    if (!key) {
      table.note_skipped_key();
      continue;
    }
    try {
      table.add(key_type, *key, static_cast<int>(*day), static_cast<int>(*open),
                static_cast<int>(*close));
    } catch (const ContractError& e) {
      throw FormatError(e.what(), line_no);
    }
  }
  return table;
}

OperationalHoursTable load_operational_hours(const std::filesystem::path& path,
                                             const PoiCatalog* catalog, bool default_open) {
  return parse_operational_hours(read_file(path), catalog, default_open);
}

}  // namespace seaget
