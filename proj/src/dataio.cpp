#include "seaget/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "seaget/errors.hpp"
#include "seaget/rng.hpp"
#include "seaget/text.hpp"

namespace seaget {

std::size_t IdMap::intern(const std::string& raw) {
  const auto [it, inserted] = index_.try_emplace(raw, raw_.size());
  if (inserted) raw_.push_back(raw);
  return it->second;
}

std::optional<std::size_t> IdMap::find(const std::string& raw) const {
  const auto it = index_.find(raw);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

namespace {

constexpr std::int64_t kDay = 86400;

std::int64_t floor_div(std::int64_t a, std::int64_t b) noexcept {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::optional<unsigned> month_number(std::string_view name) {
  static constexpr std::string_view kMonths[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                                 "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
  for (unsigned i = 0; i < 12; ++i)
    if (kMonths[i] == name) return i + 1;
  return std::nullopt;
}

}  // namespace

std::optional<std::int64_t> parse_utc_time(const std::string& text) {
  // "Tue Apr 03 18:00:06 +0000 2012"
  const auto tok = split_whitespace(text);
  if (tok.size() != 6) return std::nullopt;
  const auto month = month_number(tok[1]);
  const auto day = parse_int(tok[2]);
  const auto year = parse_int(tok[5]);
  if (!month || !day || !year) return std::nullopt;
  const auto hms = split(tok[3], ':');
  if (hms.size() != 3) return std::nullopt;
  const auto hh = parse_int(hms[0]);
  const auto mm = parse_int(hms[1]);
  const auto ss = parse_int(hms[2]);
  if (!hh || !mm || !ss || *hh < 0 || *hh > 23 || *mm < 0 || *mm > 59 || *ss < 0 || *ss > 60)
    return std::nullopt;
  const std::string_view zone = tok[4];
  if (zone.size() != 5 || (zone[0] != '+' && zone[0] != '-')) return std::nullopt;
  const auto zh = parse_int(zone.substr(1, 2));
  const auto zm = parse_int(zone.substr(3, 2));
  if (!zh || !zm) return std::nullopt;

  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year(static_cast<int>(*year)),
                           std::chrono::month(*month),
                           std::chrono::day(static_cast<unsigned>(*day))};
  if (!ymd.ok()) return std::nullopt;
  const std::int64_t days = sys_days(ymd).time_since_epoch().count();
  std::int64_t t = days * kDay + *hh * 3600 + *mm * 60 + *ss;
  const std::int64_t zone_seconds = (*zh * 60 + *zm) * 60;
  t -= zone[0] == '+' ? zone_seconds : -zone_seconds;
  return t;
}

std::optional<std::int64_t> parse_local_datetime(std::string_view text) {
  if (text.size() != 16 && text.size() != 19) return std::nullopt;
  if (text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') || text[13] != ':')
    return std::nullopt;
  if (text.size() == 19 && text[16] != ':') return std::nullopt;
  const auto year = parse_int(text.substr(0, 4));
  const auto month = parse_int(text.substr(5, 2));
  const auto day = parse_int(text.substr(8, 2));
  const auto hh = parse_int(text.substr(11, 2));
  const auto mm = parse_int(text.substr(14, 2));
  const auto ss = text.size() == 19 ? parse_int(text.substr(17, 2)) : std::optional<std::int64_t>(0);
  if (!year || !month || !day || !hh || !mm || !ss) return std::nullopt;
  if (*month < 1 || *month > 12 || *day < 1 || *hh < 0 || *hh > 23 || *mm < 0 || *mm > 59 ||
      *ss < 0 || *ss > 59)
    return std::nullopt;
  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year(static_cast<int>(*year)),
                           std::chrono::month(static_cast<unsigned>(*month)),
                           std::chrono::day(static_cast<unsigned>(*day))};
  if (!ymd.ok()) return std::nullopt;
  return sys_days(ymd).time_since_epoch().count() * kDay + *hh * 3600 + *mm * 60 + *ss;
}

std::string format_local_datetime(std::int64_t local_timestamp) {
  using namespace std::chrono;
  const std::int64_t days = floor_div(local_timestamp, kDay);
  const std::int64_t secs = local_timestamp - days * kDay;
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(secs / 3600), static_cast<int>(secs / 60 % 60),
                static_cast<int>(secs % 60));
  return buf;
}

ParsedLog parse_checkins_text(const std::string& text) {
  ParsedLog log;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++log.rows;
    const auto f = seaget::split(line, '\t');
    auto bad = [&] {
      ++log.malformed;
      if (log.first_malformed_line == 0) log.first_malformed_line = line_no;
    };
    if (f.size() != 8) {
      bad();
      continue;
    }
    const auto lat = parse_double(f[4]);
    const auto lon = parse_double(f[5]);
    const auto tz = parse_int(f[6]);
    const auto utc = parse_utc_time(std::string(f[7]));
    if (!lat || !lon || !tz || !utc || *lat < -90.0 || *lat > 90.0 || *lon < -180.0 ||
        *lon > 180.0 || std::abs(*tz) > 24 * 60 || f[0].empty() || f[1].empty() || f[2].empty()) {
      bad();
      continue;
    }
    PoiCatalog& cat = log.catalog;
    CheckIn c;
    c.user_id = cat.user_ids.intern(std::string(f[0]));
    c.category_id = cat.category_ids.intern(std::string(f[2]));
    if (c.category_id == cat.category_names.size()) cat.category_names.emplace_back(f[3]);
    c.poi_id = cat.poi_ids.intern(std::string(f[1]));
    if (c.poi_id == cat.pois.size()) cat.pois.push_back(PoiInfo{c.category_id, *lat, *lon, 0});
    ++cat.pois[c.poi_id].frequency;
    c.lat = *lat;
    c.lon = *lon;
    c.tz_offset = static_cast<std::int32_t>(*tz);
    c.utc_timestamp = *utc;
    log.checkins.push_back(c);
  }
  if (log.malformed * 100 > log.rows) {
    throw FormatError("check-in log: " + std::to_string(log.malformed) + " of " +
                          std::to_string(log.rows) + " rows malformed; first offending row",
                      log.first_malformed_line);
  }
  return log;
}

ParsedLog parse_checkins(const std::filesystem::path& path) {
  return parse_checkins_text(read_file(path));
}

std::vector<CheckIn> filter_min_activity(std::vector<CheckIn> checkins, std::size_t min_count,
                                         FilterMode mode) {
  if (min_count < 1) throw ContractError("filter_min_activity: min_count must be >= 1");
  for (;;) {
    const std::size_t before = checkins.size();
    std::unordered_map<std::size_t, std::size_t> per_poi;
    for (const auto& c : checkins) ++per_poi[c.poi_id];
    std::erase_if(checkins, [&](const CheckIn& c) { return per_poi[c.poi_id] < min_count; });
    std::unordered_map<std::size_t, std::size_t> per_user;
    for (const auto& c : checkins) ++per_user[c.user_id];
    std::erase_if(checkins, [&](const CheckIn& c) { return per_user[c.user_id] < min_count; });
    if (mode == FilterMode::single_pass || checkins.size() == before) break;
  }
  if (checkins.empty()) throw DegenerateError("filter_min_activity: no check-ins survive");
  return checkins;
}

std::vector<Trajectory> segment_trajectories(std::vector<CheckIn> checkins,
                                             std::int64_t max_gap_seconds) {
  std::stable_sort(checkins.begin(), checkins.end(), [](const CheckIn& a, const CheckIn& b) {
    if (a.user_id != b.user_id) return a.user_id < b.user_id;
    return a.local_timestamp() < b.local_timestamp();
  });
  std::vector<Trajectory> out;
  Trajectory cur;
  auto flush = [&] {
    if (cur.checkins.size() >= 2) {
      cur.id = out.size();
      out.push_back(std::move(cur));
    }
    cur = Trajectory{};
  };
  for (const auto& c : checkins) {
    if (!cur.checkins.empty() &&
        (c.user_id != cur.user_id ||
         c.local_timestamp() - cur.checkins.back().local_timestamp() > max_gap_seconds)) {
      flush();
    }
    if (cur.checkins.empty()) cur.user_id = c.user_id;
    cur.checkins.push_back(c);
  }
  flush();
  return out;
}

std::vector<CheckIn> flatten(const std::vector<Trajectory>& trajectories) {
  std::vector<CheckIn> out;
  for (const auto& t : trajectories) out.insert(out.end(), t.checkins.begin(), t.checkins.end());
  return out;
}

DatasetSplit split_random(std::vector<Trajectory> trajectories, std::uint64_t seed,
                          const PoiCatalog& catalog) {
  const std::size_t n = trajectories.size();
  if (n < 10) throw ContractError("split_random: need at least 10 trajectories, got " + std::to_string(n));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed, RngStream::split);
  rng.shuffle(std::span<std::size_t>(order));

  const auto n_train = static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n)));
  DatasetSplit split;
  split.catalog = catalog;
  for (std::size_t i = 0; i < n; ++i) {
    auto& part = i < n_train ? split.train : (i < n_train + n_val ? split.validation : split.test);
    part.push_back(std::move(trajectories[order[i]]));
  }
  auto by_id = [](const Trajectory& a, const Trajectory& b) { return a.id < b.id; };
  std::sort(split.train.begin(), split.train.end(), by_id);
  std::sort(split.validation.begin(), split.validation.end(), by_id);
  std::sort(split.test.begin(), split.test.end(), by_id);

  std::set<std::size_t> users;
  std::set<std::size_t> pois;
  for (const auto& t : split.train) {
    users.insert(t.user_id);
    for (const auto& c : t.checkins) pois.insert(c.poi_id);
  }
  auto unseen = [&](const Trajectory& t) {
    if (!users.contains(t.user_id)) return true;
    return std::any_of(t.checkins.begin(), t.checkins.end(),
                       [&](const CheckIn& c) { return !pois.contains(c.poi_id); });
  };
  split.excluded_validation = std::erase_if(split.validation, unseen);
  split.excluded_test = std::erase_if(split.test, unseen);
  return split;
}

DatasetSplit compact_ids(const DatasetSplit& split) {
  const PoiCatalog& old = split.catalog;
  std::set<std::size_t> users;
  std::set<std::size_t> pois;
  for (const auto& t : split.train) {
    users.insert(t.user_id);
    for (const auto& c : t.checkins) pois.insert(c.poi_id);
  }
  std::set<std::size_t> cats;
  for (std::size_t p : pois) cats.insert(old.pois.at(p).category_id);

  DatasetSplit out;
  out.excluded_validation = split.excluded_validation;
  out.excluded_test = split.excluded_test;
  PoiCatalog& cat = out.catalog;
  std::unordered_map<std::size_t, std::size_t> user_map, poi_map, cat_map;
  for (std::size_t u : users) user_map[u] = cat.user_ids.intern(old.user_ids.raw(u));
  for (std::size_t c : cats) {
    cat_map[c] = cat.category_ids.intern(old.category_ids.raw(c));
    cat.category_names.push_back(old.category_names.at(c));
  }
  for (std::size_t p : pois) {
    poi_map[p] = cat.poi_ids.intern(old.poi_ids.raw(p));
    const PoiInfo& info = old.pois.at(p);
    cat.pois.push_back(PoiInfo{cat_map.at(info.category_id), info.lat, info.lon, 0});
  }

  auto remap = [&](const std::vector<Trajectory>& in, bool count) {
    std::vector<Trajectory> res;
    res.reserve(in.size());
    for (const auto& t : in) {
      Trajectory r;
      r.id = t.id;
      r.user_id = user_map.at(t.user_id);
      for (CheckIn c : t.checkins) {
        c.user_id = r.user_id;
        c.poi_id = poi_map.at(c.poi_id);
        c.category_id = cat.pois[c.poi_id].category_id;
        if (count) ++cat.pois[c.poi_id].frequency;
        r.checkins.push_back(c);
      }
      res.push_back(std::move(r));
    }
    return res;
  };
  out.train = remap(split.train, true);
  out.validation = remap(split.validation, false);
  out.test = remap(split.test, false);
  return out;
}

Season assign_season(std::int64_t local_timestamp, Hemisphere hemisphere) {
  using namespace std::chrono;
  const sys_days day{days{floor_div(local_timestamp, kDay)}};
  const unsigned month = static_cast<unsigned>(year_month_day(day).month());
  // Dec-Feb -> 0, Mar-May -> 1, Jun-Aug -> 2, Sep-Nov -> 3.
  unsigned s = (month % 12) / 3;
  if (hemisphere == Hemisphere::southern) s = (s + 2) % 4;
  return static_cast<Season>(s);
}

int day_of_week(std::int64_t local_timestamp) noexcept {
  // 1970-01-01 was a Thursday.
  const std::int64_t days = floor_div(local_timestamp, kDay);
  return static_cast<int>(((days + 3) % 7 + 7) % 7);
}

int minute_of_day(std::int64_t local_timestamp) noexcept {
  const std::int64_t s = local_timestamp - floor_div(local_timestamp, kDay) * kDay;
  return static_cast<int>(s / 60);
}

double time_of_day_fraction(std::int64_t local_timestamp) noexcept {
  const std::int64_t s = local_timestamp - floor_div(local_timestamp, kDay) * kDay;
  return static_cast<double>(s) / static_cast<double>(kDay);
}

std::vector<Trajectory> build_trajectories(std::vector<CheckIn> checkins,
                                           const PreprocessOptions& options) {
  if (options.filter_mode == FilterMode::single_pass) {
    return segment_trajectories(
        filter_min_activity(std::move(checkins), options.min_count, FilterMode::single_pass),
        options.max_gap_seconds);
  }
  for (;;) {
    const std::size_t before = checkins.size();
    auto trajectories = segment_trajectories(
        filter_min_activity(std::move(checkins), options.min_count, FilterMode::fixed_point),
        options.max_gap_seconds);
    checkins = flatten(trajectories);
    if (checkins.empty()) throw DegenerateError("preprocess: no trajectories survive");
    if (checkins.size() == before) return trajectories;
  }
}

DatasetStats compute_stats(const std::vector<Trajectory>& trajectories) {
  std::set<std::size_t> users, pois, cats;
  DatasetStats s;
  for (const auto& t : trajectories) {
    for (const auto& c : t.checkins) {
      users.insert(c.user_id);
      pois.insert(c.poi_id);
      cats.insert(c.category_id);
      ++s.checkins;
    }
  }
  s.users = users.size();
  s.pois = pois.size();
  s.categories = cats.size();
  s.trajectories = trajectories.size();
  return s;
}

PreprocessResult preprocess(const ParsedLog& log, const PreprocessOptions& options) {
  auto trajectories = build_trajectories(log.checkins, options);
  PreprocessResult res;
  res.stats = compute_stats(trajectories);
  res.split = compact_ids(split_random(std::move(trajectories), options.seed, log.catalog));
  return res;
}

namespace {

void write_trajectories(const std::filesystem::path& file, const std::vector<Trajectory>& ts) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write " + file.string());
  for (const auto& t : ts) {
    out << t.user_id;
    for (const auto& c : t.checkins) {
      out << '\t' << c.poi_id << ',' << c.category_id << ',' << c.local_timestamp() << ','
          << static_cast<int>(assign_season(c.local_timestamp()));
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + file.string());
}

std::vector<Trajectory> read_trajectories(const std::filesystem::path& file,
                                          const PoiCatalog& catalog) {
  const std::string text = read_file(file);
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<Trajectory> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = seaget::split(line, '\t');
    Trajectory t;
    t.id = out.size();
    const auto user = parse_int(f[0]);
    if (!user || *user < 0 || static_cast<std::size_t>(*user) >= catalog.user_count())
      throw FormatError(file.filename().string() + ": bad user id", line_no);
    t.user_id = static_cast<std::size_t>(*user);
    for (std::size_t i = 1; i < f.size(); ++i) {
      const auto v = split(f[i], ',');
      if (v.size() != 4) throw FormatError(file.filename().string() + ": bad visit tuple", line_no);
      const auto poi = parse_int(v[0]);
      const auto cat = parse_int(v[1]);
      const auto ts = parse_int(v[2]);
      if (!poi || !cat || !ts || *poi < 0 || static_cast<std::size_t>(*poi) >= catalog.poi_count() ||
          *cat < 0 || static_cast<std::size_t>(*cat) >= catalog.category_count())
        throw FormatError(file.filename().string() + ": bad visit tuple", line_no);
      CheckIn c;
      c.user_id = t.user_id;
      c.poi_id = static_cast<std::size_t>(*poi);
      c.category_id = static_cast<std::size_t>(*cat);
      c.lat = catalog.pois[c.poi_id].lat;
      c.lon = catalog.pois[c.poi_id].lon;
      c.utc_timestamp = *ts;
      c.tz_offset = 0;
      t.checkins.push_back(c);
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

void write_split(const std::filesystem::path& dir, const DatasetSplit& split) {
  std::filesystem::create_directories(dir);
  write_trajectories(dir / "train.tsv", split.train);
  write_trajectories(dir / "val.tsv", split.validation);
  write_trajectories(dir / "test.tsv", split.test);

  std::ofstream out(dir / "idmap.tsv", std::ios::binary);
  if (!out) throw IoError("cannot write " + (dir / "idmap.tsv").string());
  const PoiCatalog& c = split.catalog;
  out << "# seaget idmap v1\n";
  for (std::size_t i = 0; i < c.user_count(); ++i) out << "user\t" << i << '\t' << c.user_ids.raw(i) << '\n';
  for (std::size_t i = 0; i < c.category_count(); ++i)
    out << "category\t" << i << '\t' << c.category_ids.raw(i) << '\t' << c.category_names[i] << '\n';
  for (std::size_t i = 0; i < c.poi_count(); ++i) {
    const PoiInfo& p = c.pois[i];
    out << "poi\t" << i << '\t' << c.poi_ids.raw(i) << '\t' << p.category_id << '\t'
        << format_double(p.lat) << '\t' << format_double(p.lon) << '\t' << p.frequency << '\n';
  }
  if (!out) throw IoError("write failed for idmap.tsv");
}

DatasetSplit read_split(const std::filesystem::path& dir) {
  DatasetSplit split;
  PoiCatalog& c = split.catalog;
  const std::string text = read_file(dir / "idmap.tsv");
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto f = seaget::split(line, '\t');
    auto expect_dense = [&](IdMap& map, std::size_t idx) {
      const auto dense = parse_int(f[1]);
      if (!dense || static_cast<std::size_t>(*dense) != map.size() || idx != map.size())
        throw FormatError("idmap.tsv: ids must be dense and ordered", line_no);
      map.intern(std::string(f[2]));
    };
    if (f[0] == "user" && f.size() == 3) {
      expect_dense(c.user_ids, c.user_ids.size());
    } else if (f[0] == "category" && f.size() == 4) {
      expect_dense(c.category_ids, c.category_names.size());
      c.category_names.emplace_back(f[3]);
    } else if (f[0] == "poi" && f.size() == 7) {
      expect_dense(c.poi_ids, c.pois.size());
      const auto cat = parse_int(f[3]);
      const auto lat = parse_double(f[4]);
      const auto lon = parse_double(f[5]);
      const auto freq = parse_int(f[6]);
      if (!cat || !lat || !lon || !freq || *cat < 0 || *freq < 0)
        throw FormatError("idmap.tsv: bad poi row", line_no);
      c.pois.push_back(PoiInfo{static_cast<std::size_t>(*cat), *lat, *lon,
                               static_cast<std::size_t>(*freq)});
    } else {
      throw FormatError("idmap.tsv: unrecognized row", line_no);
    }
  }
  for (const auto& p : c.pois)
    if (p.category_id >= c.category_count()) throw FormatError("idmap.tsv: poi category out of range");
  split.train = read_trajectories(dir / "train.tsv", c);
  split.validation = read_trajectories(dir / "val.tsv", c);
  split.test = read_trajectories(dir / "test.tsv", c);
  return split;
}

}  // namespace seaget
