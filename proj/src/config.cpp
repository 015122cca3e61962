#include "seaget/config.hpp"

#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "seaget/errors.hpp"
#include "seaget/text.hpp"

namespace seaget {

namespace {

using Setter = std::function<void(RunConfig&, std::string_view)>;

std::int64_t to_int(std::string_view key, std::string_view v) {
  const auto n = parse_int(trim(v));
  if (!n) throw FormatError("config: " + std::string(key) + " expects an integer, got '" + std::string(v) + "'");
  return *n;
}

std::size_t to_count(std::string_view key, std::string_view v) {
  const auto n = to_int(key, v);
  if (n < 0) throw FormatError("config: " + std::string(key) + " must be non-negative");
  return static_cast<std::size_t>(n);
}

double to_real(std::string_view key, std::string_view v) {
  const auto x = parse_double(trim(v));
  if (!x) throw FormatError("config: " + std::string(key) + " expects a number, got '" + std::string(v) + "'");
  return *x;
}

std::vector<std::size_t> to_counts(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  for (auto part : split(v, ',')) out.push_back(to_count(key, part));
  return out;
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"paths.checkins", [](RunConfig& c, std::string_view v) { c.checkins = std::string(trim(v)); }},
      {"paths.hours", [](RunConfig& c, std::string_view v) { c.hours = std::string(trim(v)); }},
      {"paths.workdir", [](RunConfig& c, std::string_view v) { c.workdir = std::string(trim(v)); }},
      {"data.min_count", [](RunConfig& c, std::string_view v) { c.preprocess.min_count = to_count("min_count", v); }},
      {"data.filter_mode", [](RunConfig& c, std::string_view v) { c.preprocess.filter_mode = parse_filter_mode(trim(v)); }},
      {"data.max_gap_hours",
       [](RunConfig& c, std::string_view v) { c.preprocess.max_gap_seconds = to_int("max_gap_hours", v) * 3600; }},
      {"data.split_seed",
       [](RunConfig& c, std::string_view v) { c.preprocess.seed = static_cast<std::uint64_t>(to_count("split_seed", v)); }},
      {"data.hemisphere", [](RunConfig& c, std::string_view v) { c.train.hemisphere = parse_hemisphere(trim(v)); }},
      {"train.learning_rate", [](RunConfig& c, std::string_view v) { c.train.learning_rate = to_real("learning_rate", v); }},
      {"train.batch_size", [](RunConfig& c, std::string_view v) { c.train.batch_size = to_count("batch_size", v); }},
      {"train.epochs", [](RunConfig& c, std::string_view v) { c.train.epochs = to_count("epochs", v); }},
      {"train.dropout", [](RunConfig& c, std::string_view v) { c.train.dropout = to_real("dropout", v); }},
      {"train.lr_scheduler_factor",
       [](RunConfig& c, std::string_view v) { c.train.lr_scheduler_factor = to_real("lr_scheduler_factor", v); }},
      {"train.weight_decay", [](RunConfig& c, std::string_view v) { c.train.weight_decay = to_real("weight_decay", v); }},
      {"train.seed", [](RunConfig& c, std::string_view v) { c.train.seed = static_cast<std::uint64_t>(to_count("seed", v)); }},
      {"train.alpha", [](RunConfig& c, std::string_view v) { c.train.alpha = to_real("alpha", v); }},
      {"train.beta", [](RunConfig& c, std::string_view v) { c.train.beta = to_real("beta", v); }},
      {"train.scheduler_patience",
       [](RunConfig& c, std::string_view v) { c.train.scheduler_patience = to_count("scheduler_patience", v); }},
      {"train.min_learning_rate",
       [](RunConfig& c, std::string_view v) { c.train.min_learning_rate = to_real("min_learning_rate", v); }},
      {"train.eval_ks", [](RunConfig& c, std::string_view v) { c.train.eval_ks = to_counts("eval_ks", v); }},
      {"model.poi_width", [](RunConfig& c, std::string_view v) { c.train.widths.poi = to_count("poi_width", v); }},
      {"model.time_width", [](RunConfig& c, std::string_view v) { c.train.widths.time = to_count("time_width", v); }},
      {"model.season_width", [](RunConfig& c, std::string_view v) { c.train.widths.season = to_count("season_width", v); }},
      {"model.ff_width", [](RunConfig& c, std::string_view v) { c.train.ff_width = to_count("ff_width", v); }},
      {"model.encoder_layers", [](RunConfig& c, std::string_view v) { c.train.encoder_layers = to_count("encoder_layers", v); }},
      {"model.heads", [](RunConfig& c, std::string_view v) { c.train.heads = to_count("heads", v); }},
      {"model.gcn_hidden_layers",
       [](RunConfig& c, std::string_view v) { c.train.gcn_hidden_layers = to_count("gcn_hidden_layers", v); }},
      {"model.edge_weighting",
       [](RunConfig& c, std::string_view v) { c.train.edge_weighting = parse_edge_weighting(trim(v)); }},
  };
  return table;
}

}  // namespace

EdgeWeighting parse_edge_weighting(std::string_view s) {
  if (s == "transition_count") return EdgeWeighting::transition_count;
  if (s == "popularity_product") return EdgeWeighting::popularity_product;
  throw FormatError("unknown edge weighting '" + std::string(s) + "'");
}

Hemisphere parse_hemisphere(std::string_view s) {
  if (s == "northern") return Hemisphere::northern;
  if (s == "southern") return Hemisphere::southern;
  throw FormatError("unknown hemisphere '" + std::string(s) + "'");
}

FilterMode parse_filter_mode(std::string_view s) {
  if (s == "fixed_point") return FilterMode::fixed_point;
  if (s == "single_pass") return FilterMode::single_pass;
  throw FormatError("unknown filter mode '" + std::string(s) + "'");
}

std::string to_string(EdgeWeighting w) {
  return w == EdgeWeighting::transition_count ? "transition_count" : "popularity_product";
}
std::string to_string(Hemisphere h) { return h == Hemisphere::northern ? "northern" : "southern"; }
std::string to_string(FilterMode m) { return m == FilterMode::fixed_point ? "fixed_point" : "single_pass"; }

RunConfig parse_run_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw FormatError("config: " + e.message(), e.line());
  }
  RunConfig config;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw FormatError("config: key '" + section + "' must sit inside a section");
    for (const auto& [key, value] : body) {
      const auto it = setters().find(section + "." + key);
      if (it == setters().end()) throw FormatError("config: unknown key [" + section + "] " + key);
      it->second(config, value.data());
    }
  }
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_file(path));
}

std::string format_run_config(const RunConfig& c) {
  std::ostringstream out;
  const auto& t = c.train;
  std::string ks;
  for (auto k : t.eval_ks) ks += (ks.empty() ? "" : ",") + std::to_string(k);
  out << "[paths]\n"
      << "checkins = " << c.checkins.string() << "\n"
      << "hours = " << c.hours.string() << "\n"
      << "workdir = " << c.workdir.string() << "\n\n"
      << "[data]\n"
      << "min_count = " << c.preprocess.min_count << "\n"
      << "filter_mode = " << to_string(c.preprocess.filter_mode) << "\n"
      << "max_gap_hours = " << c.preprocess.max_gap_seconds / 3600 << "\n"
      << "split_seed = " << c.preprocess.seed << "\n"
      << "hemisphere = " << to_string(t.hemisphere) << "\n\n"
      << "[train]\n"
      << "learning_rate = " << format_double(t.learning_rate) << "\n"
      << "batch_size = " << t.batch_size << "\n"
      << "epochs = " << t.epochs << "\n"
      << "dropout = " << format_double(t.dropout) << "\n"
      << "lr_scheduler_factor = " << format_double(t.lr_scheduler_factor) << "\n"
      << "weight_decay = " << format_double(t.weight_decay) << "\n"
      << "seed = " << t.seed << "\n"
      << "alpha = " << format_double(t.alpha) << "\n"
      << "beta = " << format_double(t.beta) << "\n"
      << "scheduler_patience = " << t.scheduler_patience << "\n"
      << "min_learning_rate = " << format_double(t.min_learning_rate) << "\n"
      << "eval_ks = " << ks << "\n\n"
      << "[model]\n"
      << "poi_width = " << t.widths.poi << "\n"
      << "time_width = " << t.widths.time << "\n"
      << "season_width = " << t.widths.season << "\n"
      << "ff_width = " << t.ff_width << "\n"
      << "encoder_layers = " << t.encoder_layers << "\n"
      << "heads = " << t.heads << "\n"
      << "gcn_hidden_layers = " << t.gcn_hidden_layers << "\n"
      << "edge_weighting = " << to_string(t.edge_weighting) << "\n";
  return out.str();
}

}  // namespace seaget
