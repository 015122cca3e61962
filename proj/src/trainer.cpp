#include "seaget/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

#include "seaget/optim.hpp"

namespace seaget {

namespace {

bool in_unit(double x) { return x >= 0.0 && x <= 1.0; }

std::vector<std::vector<const Trajectory*>> batches_of(const std::vector<Trajectory>& trajs,
                                                       std::span<const std::size_t> order,
                                                       std::size_t batch_size) {
  std::vector<std::vector<const Trajectory*>> out;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    auto& b = out.emplace_back();
    for (std::size_t j = i; j < std::min(order.size(), i + batch_size); ++j) b.push_back(&trajs[order[j]]);
  }
  return out;
}

std::vector<std::size_t> identity_order(std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  return order;
}

const char* weighting_name(EdgeWeighting w) {
  return w == EdgeWeighting::transition_count ? "transition_count" : "popularity_product";
}

}  // namespace

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ContractError(what);
  };
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(batch_size > 0, "batch_size must be positive");
  require(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
  require(lr_scheduler_factor > 0.0 && lr_scheduler_factor <= 1.0,
          "lr_scheduler_factor must lie in (0, 1]");
  require(weight_decay >= 0.0, "weight_decay must be non-negative");
  require(in_unit(alpha), "alpha must lie in [0, 1]");
  require(in_unit(beta), "beta must lie in [0, 1]");
  require(scheduler_patience > 0, "scheduler_patience must be positive");
  require(min_learning_rate >= 0.0, "min_learning_rate must be non-negative");
  require(!eval_ks.empty(), "eval_ks must not be empty");
  for (auto k : eval_ks) require(k > 0, "eval_ks entries must be positive");
  require(widths.poi > 0 && widths.time > 0 && widths.season > 0, "embedding widths must be positive");
  require(encoder_layers > 0, "encoder_layers must be positive");
  require(heads > 0 && widths.checkin() % heads == 0,
          "heads must divide the check-in width " + std::to_string(widths.checkin()));
}

ModelInputs prepare_inputs(const DatasetSplit& split, double alpha, double beta,
                           EdgeWeighting weighting, std::optional<std::int64_t> recent_cutoff) {
  const auto checkins = flatten(split.train);
  PopularityParams params;
  params.alpha = alpha;
  params.beta = beta;
  params.recent_cutoff = recent_cutoff ? *recent_cutoff : default_recent_cutoff(checkins);
  ModelInputs in;
  in.popularity = compute_popularity(checkins, split.catalog.poi_count(), params);
  in.flow_map = build_flow_map(split.train, split.catalog, in.popularity, weighting);
  in.graph = build_graph_matrices(in.flow_map);
  for (const auto& p : split.catalog.pois) in.poi_categories.push_back(p.category_id);
  return in;
}

ModelConfig model_config(const TrainConfig& config, const DatasetSplit& split,
                         const ModelInputs& inputs) {
  ModelConfig c;
  c.num_pois = split.catalog.poi_count();
  c.num_categories = split.catalog.category_count();
  c.num_users = split.catalog.user_count();
  c.feature_width = inputs.graph.feature_width();
  c.widths = config.widths;
  c.gcn_hidden_layers = config.gcn_hidden_layers;
  c.encoder_layers = config.encoder_layers;
  c.heads = config.heads;
  c.ff_width = config.ff_width;
  c.dropout = config.dropout;
  return c;
}

LossSummary dataset_loss(ModelState& model, const ModelInputs& inputs,
                         const std::vector<Trajectory>& trajectories, std::size_t batch_size,
                         Hemisphere hemisphere) {
  LossSummary s;
  Rng unused(0, RngStream::dropout);
  const auto order = identity_order(trajectories.size());
  for (const auto& batch_ptrs : batches_of(trajectories, order, batch_size)) {
    const SequenceBatch batch = make_batch(batch_ptrs, 0, hemisphere);
    Tape tape;
    const ForwardPass fp = forward(tape, model, inputs.graph, batch, false, unused);
    const LossParts loss = joint_loss(fp.poi_logits, fp.raw, batch);
    const double n = static_cast<double>(batch.valid_targets());
    s.poi += n * loss.poi;
    s.time += n * loss.time;
    s.category += n * loss.category;
    s.targets += batch.valid_targets();
  }
  if (s.targets > 0) {
    const double n = static_cast<double>(s.targets);
    s.poi /= n;
    s.time /= n;
    s.category /= n;
  }
  s.total = combine_losses(s.poi, s.time, s.category);
  return s;
}

TrainResult train(const TrainConfig& config, const DatasetSplit& split, const ModelInputs& inputs,
                  const TrainOptions& options) {
  config.validate();
  if (split.train.empty()) throw DegenerateError("training part is empty");

  TrainResult result;
  ModelState model = ModelState::init(model_config(config, split, inputs), config.seed);
  result.meta.alpha = config.alpha;
  result.meta.beta = config.beta;
  result.meta.recent_cutoff = inputs.popularity.params.recent_cutoff;
  result.meta.seed = config.seed;
  result.meta.edge_weighting = weighting_name(config.edge_weighting);
  result.best_validation_loss = std::numeric_limits<double>::infinity();

  Rng shuffle_rng(config.seed, RngStream::shuffle);
  Rng dropout_rng(config.seed, RngStream::dropout);
  OptimizerState opt;
  opt.learning_rate = config.learning_rate;
  opt.weight_decay = config.weight_decay;
  const std::vector<Parameter*> params = model.parameters();
  std::vector<std::size_t> order = identity_order(split.train.size());
  std::filesystem::path last_good;
  std::size_t stale_epochs = 0;

  auto diverged = [&](const std::string& what, std::size_t epoch) {
    return TrainingDiverged("non-finite " + what + " in epoch " + std::to_string(epoch) +
                                (last_good.empty() ? std::string("; no checkpoint written")
                                                   : "; last good checkpoint: " + last_good.string()),
                            last_good);
  };

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    EpochLog log;
    log.epoch = epoch;
    log.learning_rate = opt.learning_rate;
    std::size_t targets = 0;
    for (const auto& batch_ptrs : batches_of(split.train, order, config.batch_size)) {
      const SequenceBatch batch = make_batch(batch_ptrs, 0, config.hemisphere);
      Tape tape;
      model.zero_grad();
      const ForwardPass fp = forward(tape, model, inputs.graph, batch, true, dropout_rng);
      const LossParts loss = joint_loss(fp.poi_logits, fp.raw, batch);
      if (!std::isfinite(loss.total.value()(0, 0))) throw diverged("loss", epoch);
      tape.backward(loss.total);
      try {
        adamw_step(params, opt);
      } catch (const NumericalError&) {
        throw diverged("gradient", epoch);
      }
      const double n = static_cast<double>(batch.valid_targets());
      log.train_poi += n * loss.poi;
      log.train_time += n * loss.time;
      log.train_category += n * loss.category;
      targets += batch.valid_targets();
    }
    const double n = static_cast<double>(std::max<std::size_t>(targets, 1));
    log.train_poi /= n;
    log.train_time /= n;
    log.train_category /= n;
    log.train_total = combine_losses(log.train_poi, log.train_time, log.train_category);

    log.validation_total =
        split.validation.empty()
            ? log.train_total
            : dataset_loss(model, inputs, split.validation, config.batch_size, config.hemisphere).total;
    if (!std::isfinite(log.validation_total)) throw diverged("validation loss", epoch);

    if (log.validation_total < result.best_validation_loss) {
      result.best_validation_loss = log.validation_total;
      result.best_epoch = epoch;
      result.model = model;
      result.meta.epoch = epoch;
      result.meta.validation_loss = log.validation_total;
      result.meta.dropout_rng_counter = dropout_rng.counter();
      result.meta.shuffle_rng_counter = shuffle_rng.counter();
      stale_epochs = 0;
      if (!options.checkpoint_path.empty()) {
        save_checkpoint(options.checkpoint_path, result.model, result.meta);
        last_good = options.checkpoint_path;
      }
    } else if (++stale_epochs >= config.scheduler_patience) {
      opt.learning_rate = std::max(opt.learning_rate * config.lr_scheduler_factor,
                                   config.min_learning_rate);
      stale_epochs = 0;
    }
    result.log.push_back(log);
    if (options.on_epoch) options.on_epoch(log);
  }

  if (result.best_epoch == 0) {
    result.model = std::move(model);
    result.best_validation_loss = std::numeric_limits<double>::quiet_NaN();
  }
  return result;
}

namespace {

void add_prediction(MetricAccumulator& acc, std::vector<double> scores, const Trajectory& t,
                    std::size_t i, const std::vector<std::size_t>& poi_categories,
                    const EvalOptions& options) {
  const CheckIn& target = t.checkins[i + 1];
  if (options.hours != nullptr) {
    scores = operational_filter(scores, *options.hours, poi_categories, target.local_timestamp()).logits;
  }
  acc.add(rank_of(scores, target.poi_id));
}

std::pair<std::size_t, std::size_t> prediction_range(const Trajectory& t, EvalGranularity g) {
  const std::size_t last = t.size() - 1;  // exclusive end over prefix positions
  return g == EvalGranularity::position ? std::pair{std::size_t{0}, last} : std::pair{last - 1, last};
}

void require_evaluable(const std::vector<Trajectory>& trajectories) {
  for (const auto& t : trajectories) {
    if (t.size() < 2) {
      throw ContractError("trajectory " + std::to_string(t.id) + " has fewer than 2 check-ins");
    }
  }
}

}  // namespace

EvalReport evaluate_scores(const std::vector<Trajectory>& trajectories,
                           const std::vector<std::size_t>& poi_categories, const EvalOptions& options,
                           const ScoreFn& scores) {
  require_evaluable(trajectories);
  MetricAccumulator acc(options.ks);
  for (const auto& t : trajectories) {
    const auto [begin, end] = prediction_range(t, options.granularity);
    for (std::size_t i = begin; i < end; ++i) add_prediction(acc, scores(t, i), t, i, poi_categories, options);
  }
  return acc.report();
}

EvalReport evaluate(ModelState& model, const ModelInputs& inputs,
                    const std::vector<Trajectory>& trajectories, const EvalOptions& options) {
  require_evaluable(trajectories);
  MetricAccumulator acc(options.ks);
  Rng unused(0, RngStream::dropout);
  const auto order = identity_order(trajectories.size());
  const std::size_t n = model.config.num_pois;
  for (const auto& batch_ptrs : batches_of(trajectories, order, std::max<std::size_t>(options.batch_size, 1))) {
    const SequenceBatch batch = make_batch(batch_ptrs, 0, options.hemisphere);
    Tape tape;
    const ForwardPass fp = forward(tape, model, inputs.graph, batch, false, unused);
    const Tensor& logits = fp.poi_logits.value();
    for (std::size_t b = 0; b < batch_ptrs.size(); ++b) {
      const Trajectory& t = *batch_ptrs[b];
      const auto [begin, end] = prediction_range(t, options.granularity);
      for (std::size_t i = begin; i < end; ++i) {
        const auto row = logits.row(b * batch.max_len + i);
        add_prediction(acc, std::vector<double>(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(n)),
                       t, i, inputs.poi_categories, options);
      }
    }
  }
  return acc.report();
}

MarkovTable markov_counts(const std::vector<Trajectory>& train, std::size_t poi_count) {
  MarkovTable table;
  table.rows.resize(poi_count);
  for (const auto& t : train) {
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
      const auto from = t.checkins[i].poi_id;
      const auto to = t.checkins[i + 1].poi_id;
      if (from >= poi_count || to >= poi_count) throw ContractError("markov_counts: POI id out of range");
      ++table.rows[from][to];
    }
  }
  return table;
}

std::vector<double> markov_scores(const MarkovTable& table, std::span<const double> popularity,
                                  std::size_t current) {
  if (current >= table.rows.size()) throw ContractError("markov_scores: POI id out of range");
  const auto& row = table.rows[current];
  if (row.empty()) return {popularity.begin(), popularity.end()};
  std::vector<double> scores(popularity.size(), 0.0);
  for (const auto& [to, count] : row) scores[to] = static_cast<double>(count);
  return scores;
}

std::vector<double> raw_popularity(const PopularityStats& stats) {
  std::vector<double> out;
  out.reserve(stats.pois.size());
  for (const auto& p : stats.pois) out.push_back(p.raw);
  return out;
}

EvalReport baseline_popularity(const ModelInputs& inputs, const std::vector<Trajectory>& trajectories,
                               const EvalOptions& options) {
  const auto pop = raw_popularity(inputs.popularity);
  return evaluate_scores(trajectories, inputs.poi_categories, options,
                         [&](const Trajectory&, std::size_t) { return pop; });
}

EvalReport baseline_markov(const MarkovTable& table, const ModelInputs& inputs,
                           const std::vector<Trajectory>& trajectories, const EvalOptions& options) {
  const auto pop = raw_popularity(inputs.popularity);
  return evaluate_scores(trajectories, inputs.poi_categories, options,
                         [&](const Trajectory& t, std::size_t i) {
                           return markov_scores(table, pop, t.checkins[i].poi_id);
                         });
}

std::vector<SweepCell> sweep_alpha_beta(const TrainConfig& config, const DatasetSplit& split,
                                        std::span<const double> alphas, std::span<const double> betas,
                                        const EvalOptions& options) {
  if (alphas.empty() || betas.empty()) throw ContractError("sweep grid must not be empty");
  std::vector<SweepCell> cells;
  for (double a : alphas) {
    for (double b : betas) {
      TrainConfig c = config;
      c.alpha = a;
      c.beta = b;
      const ModelInputs inputs = prepare_inputs(split, a, b, c.edge_weighting);
      TrainResult r = train(c, split, inputs);
      cells.push_back({a, b, evaluate(r.model, inputs, split.test, options)});
    }
  }
  return cells;
}

void write_training_log(std::ostream& out, const std::vector<EpochLog>& log) {
  out << "epoch,lr,train_poi,train_time,train_cat,train_total,val_total\n";
  out << std::setprecision(10);
  for (const auto& e : log) {
    out << e.epoch << ',' << e.learning_rate << ',' << e.train_poi << ',' << e.train_time << ','
        << e.train_category << ',' << e.train_total << ',' << e.validation_total << '\n';
  }
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepCell>& cells) {
  out << "alpha,beta";
  if (!cells.empty()) {
    for (auto k : cells.front().report.ks) out << ",acc@" << k;
  }
  out << ",mrr,count\n";
  for (const auto& c : cells) {
    out << std::setprecision(4) << c.alpha << ',' << c.beta << std::fixed << std::setprecision(6);
    for (double a : c.report.accuracy) out << ',' << a;
    out << ',' << c.report.mrr << ',' << c.report.count << '\n';
    out.unsetf(std::ios::floatfield);
  }
}

void print_sweep_table(std::ostream& out, const std::vector<SweepCell>& cells) {
  out << std::setw(6) << "alpha" << std::setw(6) << "beta";
  if (!cells.empty()) {
    for (auto k : cells.front().report.ks) out << std::setw(9) << ("Acc@" + std::to_string(k));
  }
  out << std::setw(9) << "MRR" << '\n';
  for (const auto& c : cells) {
    out << std::fixed << std::setprecision(2) << std::setw(6) << c.alpha << std::setw(6) << c.beta
        << std::setprecision(4);
    for (double a : c.report.accuracy) out << std::setw(9) << a;
    out << std::setw(9) << c.report.mrr << '\n';
    out.unsetf(std::ios::floatfield);
  }
}

}  // namespace seaget
