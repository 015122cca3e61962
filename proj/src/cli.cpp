#include "seaget/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "seaget/checkpoint.hpp"
#include "seaget/config.hpp"
#include "seaget/errors.hpp"
#include "seaget/text.hpp"
#include "seaget/trainer.hpp"

namespace seaget {

namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <class T>
struct Flag {
  T value{};
  CLI::Option* opt = nullptr;
  bool given() const { return opt != nullptr && opt->count() > 0; }
};

template <class T>
CLI::Option* option(CLI::App* app, const std::string& name, Flag<T>& flag, const std::string& help) {
  flag.opt = app->add_option(name, flag.value, help);
  return flag.opt;
}

struct TrainFlags {
  Flag<double> alpha, beta, lr, dropout, weight_decay, scheduler_factor;
  Flag<std::size_t> epochs, batch_size, patience, poi_width, time_width, season_width, ff_width,
      layers, heads, gcn_layers;
  Flag<std::uint64_t> seed;
  Flag<std::string> edge_weighting, hemisphere;

  void add(CLI::App* app) {
    option(app, "--alpha", alpha, "Unique-user vs check-in weight in [0,1]");
    option(app, "--beta", beta, "Recent vs past weight in [0,1]");
    option(app, "--lr", lr, "Initial learning rate");
    option(app, "--dropout", dropout, "Dropout rate");
    option(app, "--weight-decay", weight_decay, "AdamW weight decay");
    option(app, "--lr-factor", scheduler_factor, "Plateau learning-rate factor");
    option(app, "--epochs", epochs, "Training epochs");
    option(app, "--batch-size", batch_size, "Trajectories per batch");
    option(app, "--patience", patience, "Plateau patience in epochs");
    option(app, "--poi-width", poi_width, "POI/user embedding width");
    option(app, "--time-width", time_width, "Time/category embedding width");
    option(app, "--season-width", season_width, "Season embedding width");
    option(app, "--ff-width", ff_width, "Encoder feed-forward width (0 = 4d)");
    option(app, "--layers", layers, "Encoder layers");
    option(app, "--heads", heads, "Attention heads");
    option(app, "--gcn-layers", gcn_layers, "GCN hidden layers");
    option(app, "--seed", seed, "Training seed");
    option(app, "--edge-weighting", edge_weighting, "transition_count or popularity_product");
    option(app, "--hemisphere", hemisphere, "northern or southern");
  }

  void apply(TrainConfig& t) const {
    if (alpha.given()) t.alpha = alpha.value;
    if (beta.given()) t.beta = beta.value;
    if (lr.given()) t.learning_rate = lr.value;
    if (dropout.given()) t.dropout = dropout.value;
    if (weight_decay.given()) t.weight_decay = weight_decay.value;
    if (scheduler_factor.given()) t.lr_scheduler_factor = scheduler_factor.value;
    if (epochs.given()) t.epochs = epochs.value;
    if (batch_size.given()) t.batch_size = batch_size.value;
    if (patience.given()) t.scheduler_patience = patience.value;
    if (poi_width.given()) t.widths.poi = poi_width.value;
    if (time_width.given()) t.widths.time = time_width.value;
    if (season_width.given()) t.widths.season = season_width.value;
    if (ff_width.given()) t.ff_width = ff_width.value;
    if (layers.given()) t.encoder_layers = layers.value;
    if (heads.given()) t.heads = heads.value;
    if (gcn_layers.given()) t.gcn_hidden_layers = gcn_layers.value;
    if (seed.given()) t.seed = seed.value;
    if (edge_weighting.given()) t.edge_weighting = parse_edge_weighting(edge_weighting.value);
    if (hemisphere.given()) t.hemisphere = parse_hemisphere(hemisphere.value);
  }
};

struct Common {
  Flag<std::string> config;
  Flag<std::string> workdir;

  void add(CLI::App* app) {
    option(app, "--config", config, "INI run configuration")->check(CLI::ExistingFile);
    option(app, "--workdir", workdir, "Directory holding the preprocessed split and outputs");
  }

  RunConfig load() const {
    RunConfig c = config.given() ? load_run_config(config.value) : RunConfig{};
    if (workdir.given()) c.workdir = workdir.value;
    return c;
  }
};

fs::path require_workdir(const RunConfig& c) {
  if (c.workdir.empty()) throw UsageError("--workdir (or [paths] workdir) is required");
  return c.workdir;
}

bool on_off(const std::string& v, const std::string& flag) {
  if (v == "on") return true;
  if (v == "off") return false;
  throw UsageError(flag + " expects on or off, got '" + v + "'");
}

EvalGranularity parse_granularity(const std::string& v) {
  if (v == "position") return EvalGranularity::position;
  if (v == "trajectory") return EvalGranularity::trajectory;
  throw UsageError("--eval-granularity expects position or trajectory, got '" + v + "'");
}

std::vector<double> parse_grid(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  for (auto part : split(text, ',')) {
    const auto v = parse_double(trim(part));
    if (!v || *v < 0.0 || *v > 1.0) throw UsageError(flag + ": '" + std::string(part) + "' is not in [0, 1]");
    out.push_back(*v);
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("write failed for " + path.string());
}

ModelInputs inputs_for(const DatasetSplit& split, const CheckpointMeta& meta) {
  return prepare_inputs(split, meta.alpha, meta.beta, parse_edge_weighting(meta.edge_weighting),
                        meta.recent_cutoff);
}

void require_compatible(const ModelConfig& c, const DatasetSplit& split, const ModelInputs& inputs) {
  auto check = [](std::size_t model, std::size_t data, const char* what) {
    if (model != data) {
      throw FormatError(std::string("checkpoint does not match the workdir: ") + what + " " +
                        std::to_string(model) + " vs " + std::to_string(data));
    }
  };
  check(c.num_pois, split.catalog.poi_count(), "POI count");
  check(c.num_categories, split.catalog.category_count(), "category count");
  check(c.num_users, split.catalog.user_count(), "user count");
  check(c.feature_width, inputs.graph.feature_width(), "feature width");
}

OperationalHoursTable hours_or_open(const fs::path& path, const PoiCatalog& catalog) {
  return path.empty() ? OperationalHoursTable(true) : load_operational_hours(path, &catalog);
}

std::string stats_line(const DatasetStats& s) {
  std::ostringstream o;
  o << s.users << ' ' << s.pois << ' ' << s.categories << ' ' << s.checkins << ' ' << s.trajectories;
  return o.str();
}

// ---- preprocess ----------------------------------------------------------

struct PreprocessCmd {
  Common common;
  Flag<std::string> input;
  Flag<std::uint64_t> seed;
  Flag<std::size_t> min_count;
  Flag<std::string> filter_mode;
  Flag<std::int64_t> max_gap_hours;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("preprocess", "Filter, segment and split a check-in log");
    common.add(sub);
    option(sub, "--input", input, "Tab-separated check-in log");
    option(sub, "--seed", seed, "Split seed");
    option(sub, "--min-count", min_count, "Minimum check-ins per user and per POI");
    option(sub, "--filter-mode", filter_mode, "fixed_point or single_pass");
    option(sub, "--max-gap-hours", max_gap_hours, "Trajectory break threshold in hours");
  }

  int run(std::ostream& out) const {
    RunConfig c = common.load();
    if (input.given()) c.checkins = input.value;
    if (seed.given()) c.preprocess.seed = seed.value;
    if (min_count.given()) c.preprocess.min_count = min_count.value;
    if (filter_mode.given()) c.preprocess.filter_mode = parse_filter_mode(filter_mode.value);
    if (max_gap_hours.given()) c.preprocess.max_gap_seconds = max_gap_hours.value * 3600;
    if (c.checkins.empty()) throw UsageError("--input (or [paths] checkins) is required");
    const fs::path workdir = require_workdir(c);
    if (!fs::is_regular_file(c.checkins)) throw IoError("input not found: " + c.checkins.string());

    const ParsedLog log = parse_checkins(c.checkins);
    const PreprocessResult r = preprocess(log, c.preprocess);
    fs::create_directories(workdir);
    write_split(workdir, r.split);
    write_text(workdir / "stats.txt", "users pois categories checkins trajectories\n" + stats_line(r.stats) + "\n");
    out << stats_line(r.stats) << '\n';
    return kExitOk;
  }
};

// ---- build-graph ---------------------------------------------------------

struct BuildGraphCmd {
  Common common;
  TrainFlags flags;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("build-graph", "Compute popularity and the trajectory flow map");
    common.add(sub);
    flags.add(sub);
  }

  int run(std::ostream& out) const {
    RunConfig c = common.load();
    flags.apply(c.train);
    c.train.validate();
    const fs::path workdir = require_workdir(c);
    const DatasetSplit split = read_split(workdir);
    const ModelInputs in = prepare_inputs(split, c.train.alpha, c.train.beta, c.train.edge_weighting);
    {
      std::ofstream f(workdir / "popularity.csv");
      write_popularity_csv(f, in.popularity);
    }
    {
      std::ofstream f(workdir / "graph_nodes.csv");
      write_nodes_csv(f, in.flow_map);
    }
    {
      std::ofstream f(workdir / "graph_edges.csv");
      write_edges_csv(f, in.flow_map);
    }
    out << "nodes " << in.flow_map.node_count() << " edges " << in.flow_map.edges.size()
        << " features " << in.graph.feature_width() << '\n';
    return kExitOk;
  }
};

// ---- train ---------------------------------------------------------------

struct TrainCmd {
  Common common;
  TrainFlags flags;
  Flag<std::string> checkpoint;
  Flag<std::string> log_path;
  bool quiet = false;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("train", "Train a model on the preprocessed split");
    common.add(sub);
    flags.add(sub);
    option(sub, "--checkpoint", checkpoint, "Output checkpoint (default <workdir>/model.ckpt)");
    option(sub, "--log", log_path, "Epoch CSV (default <workdir>/train_log.csv)");
    sub->add_flag("--quiet", quiet, "Do not print per-epoch progress");
  }

  int run(std::ostream& out) const {
    RunConfig c = common.load();
    flags.apply(c.train);
    c.train.validate();
    const fs::path workdir = require_workdir(c);
    const fs::path ckpt = checkpoint.given() ? fs::path(checkpoint.value) : workdir / "model.ckpt";
    const fs::path log_file = log_path.given() ? fs::path(log_path.value) : workdir / "train_log.csv";

    const DatasetSplit split = read_split(workdir);
    const ModelInputs in = prepare_inputs(split, c.train.alpha, c.train.beta, c.train.edge_weighting);
    TrainOptions opts;
    opts.checkpoint_path = ckpt;
    if (!quiet) {
      opts.on_epoch = [&out](const EpochLog& e) {
        out << "epoch " << e.epoch << " lr " << e.learning_rate << " train " << e.train_total
            << " val " << e.validation_total << '\n';
      };
    }
    TrainResult r = train(c.train, split, in, opts);
    save_checkpoint(ckpt, r.model, r.meta);
    std::ofstream f(log_file);
    write_training_log(f, r.log);
    out << "best epoch " << r.best_epoch << " validation loss " << r.best_validation_loss
        << "\ncheckpoint " << ckpt.string() << '\n';
    return kExitOk;
  }
};

// ---- evaluate / baseline -------------------------------------------------

struct EvalFlags {
  std::string split = "test";
  std::string filter = "off";
  std::string granularity = "position";
  Flag<std::string> hours;
  Flag<std::string> output;

  void add(CLI::App* sub) {
    sub->add_option("--split", split, "test or val")->check(CLI::IsMember({"test", "val"}));
    sub->add_option("--filter", filter, "Operational-hours filter: on or off");
    sub->add_option("--eval-granularity", granularity, "position or trajectory");
    option(sub, "--hours", hours, "Operational hours CSV (key_type,key,day,open,close)");
    option(sub, "--output", output, "Report CSV path");
  }

  const std::vector<Trajectory>& pick(const DatasetSplit& s) const {
    return split == "val" ? s.validation : s.test;
  }
};

struct EvaluateCmd {
  Common common;
  EvalFlags eval;
  Flag<std::string> checkpoint;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("evaluate", "Acc@k and MRR of a checkpoint");
    common.add(sub);
    eval.add(sub);
    option(sub, "--checkpoint", checkpoint, "Checkpoint (default <workdir>/model.ckpt)");
  }

  int run(std::ostream& out) const {
    const RunConfig c = common.load();
    const fs::path workdir = require_workdir(c);
    const bool filter = on_off(eval.filter, "--filter");
    Checkpoint ck = load_checkpoint(checkpoint.given() ? fs::path(checkpoint.value) : workdir / "model.ckpt");
    const DatasetSplit split = read_split(workdir);
    const ModelInputs in = inputs_for(split, ck.meta);
    require_compatible(ck.model.config, split, in);

    const fs::path hours_path = eval.hours.given() ? fs::path(eval.hours.value) : c.hours;
    const OperationalHoursTable table = hours_or_open(hours_path, split.catalog);
    EvalOptions opts;
    opts.ks = c.train.eval_ks;
    opts.granularity = parse_granularity(eval.granularity);
    opts.hours = filter ? &table : nullptr;
    opts.hemisphere = c.train.hemisphere;
    const EvalReport report = evaluate(ck.model, in, eval.pick(split), opts);
    print_report_table(out, report);
    std::ofstream f(eval.output.given() ? fs::path(eval.output.value) : workdir / ("eval_" + eval.split + ".csv"));
    write_report_csv(f, report);
    return kExitOk;
  }
};

struct BaselineCmd {
  Common common;
  EvalFlags eval;
  TrainFlags flags;
  std::string kind = "both";

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("baseline", "Popularity and first-order Markov reference rankings");
    common.add(sub);
    eval.add(sub);
    flags.add(sub);
    sub->add_option("--kind", kind, "popularity, markov or both")
        ->check(CLI::IsMember({"popularity", "markov", "both"}));
  }

  int run(std::ostream& out) const {
    RunConfig c = common.load();
    flags.apply(c.train);
    c.train.validate();
    const fs::path workdir = require_workdir(c);
    const bool filter = on_off(eval.filter, "--filter");
    const DatasetSplit split = read_split(workdir);
    const ModelInputs in = prepare_inputs(split, c.train.alpha, c.train.beta, c.train.edge_weighting);
    const fs::path hours_path = eval.hours.given() ? fs::path(eval.hours.value) : c.hours;
    const OperationalHoursTable table = hours_or_open(hours_path, split.catalog);
    EvalOptions opts;
    opts.ks = c.train.eval_ks;
    opts.granularity = parse_granularity(eval.granularity);
    opts.hours = filter ? &table : nullptr;

    std::ostringstream csv;
    csv << "baseline,";
    bool header = false;
    auto emit = [&](const std::string& name, const EvalReport& r) {
      out << name << '\n';
      print_report_table(out, r);
      std::ostringstream one;
      write_report_csv(one, r);
      const std::string text = one.str();
      const auto nl = text.find('\n');
      if (!header) {
        csv << text.substr(0, nl + 1);
        header = true;
      }
      csv << name << ',' << text.substr(nl + 1);
    };
    if (kind != "markov") emit("popularity", baseline_popularity(in, eval.pick(split), opts));
    if (kind != "popularity") {
      emit("markov", baseline_markov(markov_counts(split.train, split.catalog.poi_count()), in,
                                     eval.pick(split), opts));
    }
    write_text(eval.output.given() ? fs::path(eval.output.value) : workdir / ("baseline_" + eval.split + ".csv"),
               csv.str());
    return kExitOk;
  }
};

// ---- sweep ---------------------------------------------------------------

struct SweepCmd {
  Common common;
  TrainFlags flags;
  EvalFlags eval;
  std::string alphas = "0.33,0.5,0.67";
  std::string betas = "0.33,0.5,0.67";

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("sweep", "Train and evaluate over an alpha x beta grid");
    common.add(sub);
    flags.add(sub);
    eval.add(sub);
    sub->add_option("--alphas", alphas, "Comma-separated alpha values");
    sub->add_option("--betas", betas, "Comma-separated beta values");
  }

  int run(std::ostream& out) const {
    RunConfig c = common.load();
    flags.apply(c.train);
    c.train.validate();
    const fs::path workdir = require_workdir(c);
    const auto a = parse_grid(alphas, "--alphas");
    const auto b = parse_grid(betas, "--betas");
    const bool filter = on_off(eval.filter, "--filter");
    const DatasetSplit split = read_split(workdir);
    const fs::path hours_path = eval.hours.given() ? fs::path(eval.hours.value) : c.hours;
    const OperationalHoursTable table = hours_or_open(hours_path, split.catalog);
    EvalOptions opts;
    opts.ks = c.train.eval_ks;
    opts.granularity = parse_granularity(eval.granularity);
    opts.hours = filter ? &table : nullptr;
    opts.hemisphere = c.train.hemisphere;
    const auto cells = sweep_alpha_beta(c.train, split, a, b, opts);
    print_sweep_table(out, cells);
    std::ofstream f(eval.output.given() ? fs::path(eval.output.value) : workdir / "sweep.csv");
    write_sweep_csv(f, cells);
    return kExitOk;
  }
};

// ---- recommend -----------------------------------------------------------

struct RecommendCmd {
  Common common;
  Flag<std::string> checkpoint;
  std::string user;
  std::string trajectory;
  Flag<std::string> at;
  std::size_t k = 10;
  std::string filter = "on";
  Flag<std::string> hours;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("recommend", "Top-k next POIs for a visit prefix");
    common.add(sub);
    option(sub, "--checkpoint", checkpoint, "Checkpoint (default <workdir>/model.ckpt)");
    sub->add_option("--user", user, "Raw user id")->required();
    sub->add_option("--trajectory", trajectory, "Visits as poi@YYYY-MM-DDTHH:MM[:SS],...")->required();
    option(sub, "--at", at, "Local query time (default: last visit)");
    sub->add_option("--k", k, "Number of recommendations")->check(CLI::PositiveNumber);
    sub->add_option("--filter", filter, "Operational-hours filter: on or off");
    option(sub, "--hours", hours, "Operational hours CSV");
  }

  Trajectory parse_visits(const PoiCatalog& catalog, std::size_t user_id) const {
    Trajectory t;
    t.user_id = user_id;
    for (auto item : split(trajectory, ',')) {
      item = trim(item);
      const auto at_sign = item.rfind('@');
      if (at_sign == std::string_view::npos) {
        throw UsageError("--trajectory: '" + std::string(item) + "' is not poi@time");
      }
      const std::string raw_poi(item.substr(0, at_sign));
      const auto poi = catalog.poi_ids.find(raw_poi);
      if (!poi) throw UsageError("unknown POI " + raw_poi);
      const auto when = parse_local_datetime(item.substr(at_sign + 1));
      if (!when) throw UsageError("--trajectory: bad time in '" + std::string(item) + "'");
      CheckIn c;
      c.user_id = user_id;
      c.poi_id = *poi;
      c.category_id = catalog.pois[*poi].category_id;
      c.lat = catalog.pois[*poi].lat;
      c.lon = catalog.pois[*poi].lon;
      c.utc_timestamp = *when;
      t.checkins.push_back(c);
    }
    if (t.checkins.empty()) throw UsageError("--trajectory is empty");
    return t;
  }

  int run(std::ostream& out, std::ostream& err) const {
    const RunConfig c = common.load();
    const fs::path workdir = require_workdir(c);
    const bool use_filter = on_off(filter, "--filter");
    Checkpoint ck = load_checkpoint(checkpoint.given() ? fs::path(checkpoint.value) : workdir / "model.ckpt");
    const DatasetSplit split = read_split(workdir);
    const ModelInputs in = inputs_for(split, ck.meta);
    require_compatible(ck.model.config, split, in);

    const auto user_id = split.catalog.user_ids.find(user);
    if (!user_id) throw UsageError("unknown user " + user);
    const Trajectory t = parse_visits(split.catalog, *user_id);
    std::int64_t query = t.checkins.back().local_timestamp();
    if (at.given()) {
      const auto v = parse_local_datetime(at.value);
      if (!v) throw UsageError("--at: bad time '" + at.value + "'");
      query = *v;
    }

    const Trajectory* ptr = &t;
    const SequenceBatch batch = make_batch(std::span<const Trajectory* const>(&ptr, 1), 0, c.train.hemisphere);
    Tape tape;
    Rng unused(0, RngStream::dropout);
    const ForwardPass fp = forward(tape, ck.model, in.graph, batch, false, unused);
    const auto row = fp.poi_logits.value().row(t.size() - 1);
    std::vector<double> scores(row.begin(), row.end());

    if (use_filter) {
      const fs::path hours_path = hours.given() ? fs::path(hours.value) : c.hours;
      const OperationalHoursTable table = hours_or_open(hours_path, split.catalog);
      FilterResult fr = operational_filter(scores, table, in.poi_categories, query);
      if (fr.fallback) {
        err << "warning: every POI is closed at " << format_local_datetime(query)
            << "; showing the unfiltered ranking\n";
      }
      scores = std::move(fr.logits);
    }

    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (std::isfinite(scores[i])) ids.push_back(i);
    }
    std::stable_sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    if (ids.size() < k) {
      err << "warning: only " << ids.size() << " POIs are open at " << format_local_datetime(query)
          << "; returning " << ids.size() << '\n';
    }
    ids.resize(std::min(ids.size(), k));

    out << "rank\tpoi_id\tcategory\tscore\n";
    out << std::fixed << std::setprecision(6);
    for (std::size_t r = 0; r < ids.size(); ++r) {
      const auto& info = split.catalog.pois[ids[r]];
      out << r + 1 << '\t' << split.catalog.poi_ids.raw(ids[r]) << '\t'
          << split.catalog.category_names[info.category_id] << '\t' << scores[ids[r]] << '\n';
    }
    out.unsetf(std::ios::floatfield);
    return kExitOk;
  }
};

// ---- export-embeddings ---------------------------------------------------

struct ExportCmd {
  Common common;
  Flag<std::string> checkpoint;
  Flag<std::string> out_dir;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("export-embeddings",
                                   "Write POI embeddings and the transition attention map");
    common.add(sub);
    option(sub, "--checkpoint", checkpoint, "Checkpoint (default <workdir>/model.ckpt)");
    option(sub, "--out-dir", out_dir, "Output directory (default <workdir>)");
  }

  int run(std::ostream& out) const {
    const RunConfig c = common.load();
    const fs::path workdir = require_workdir(c);
    Checkpoint ck = load_checkpoint(checkpoint.given() ? fs::path(checkpoint.value) : workdir / "model.ckpt");
    const DatasetSplit split = read_split(workdir);
    const ModelInputs in = inputs_for(split, ck.meta);
    require_compatible(ck.model.config, split, in);
    const fs::path dir = out_dir.given() ? fs::path(out_dir.value) : workdir;
    fs::create_directories(dir);

    Tape tape;
    Rng unused(0, RngStream::dropout);
    const Var e_p = gcn_forward(tape, in.graph, ck.model.gcn, false, unused);
    const Var phi = transition_attention(tape, in.graph.features, in.graph.laplacian, ck.model.attention);
    write_matrix(dir / "poi_embeddings.sgmx", e_p.value());
    write_matrix(dir / "transition_attention.sgmx", phi.value());
    out << "poi_embeddings " << shape_string(e_p.value()) << "\ntransition_attention "
        << shape_string(phi.value()) << '\n';
    return kExitOk;
  }
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Season-aware next-POI recommendation", "seaget");
  app.require_subcommand(1);
  PreprocessCmd preprocess_cmd;
  BuildGraphCmd graph_cmd;
  TrainCmd train_cmd;
  EvaluateCmd evaluate_cmd;
  SweepCmd sweep_cmd;
  RecommendCmd recommend_cmd;
  BaselineCmd baseline_cmd;
  ExportCmd export_cmd;
  preprocess_cmd.add(app);
  graph_cmd.add(app);
  train_cmd.add(app);
  evaluate_cmd.add(app);
  sweep_cmd.add(app);
  recommend_cmd.add(app);
  baseline_cmd.add(app);
  export_cmd.add(app);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "preprocess") return preprocess_cmd.run(out);
    if (name == "build-graph") return graph_cmd.run(out);
    if (name == "train") return train_cmd.run(out);
    if (name == "evaluate") return evaluate_cmd.run(out);
    if (name == "sweep") return sweep_cmd.run(out);
    if (name == "recommend") return recommend_cmd.run(out, err);
    if (name == "baseline") return baseline_cmd.run(out);
    if (name == "export-embeddings") return export_cmd.run(out);
    err << "error: unhandled subcommand " << name << '\n';
    return kExitUsage;
  } catch (const TrainingDiverged& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace seaget
