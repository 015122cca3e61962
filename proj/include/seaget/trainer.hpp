#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "seaget/checkpoint.hpp"
#include "seaget/dataio.hpp"
#include "seaget/errors.hpp"
#include "seaget/flowgraph.hpp"
#include "seaget/hours.hpp"
#include "seaget/metrics.hpp"
#include "seaget/model.hpp"
#include "seaget/popularity.hpp"

namespace seaget {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 16;
  std::size_t epochs = 200;
  double dropout = 0.3;
  double lr_scheduler_factor = 0.1;
  double weight_decay = 5e-4;
  std::uint64_t seed = 42;
  double alpha = 0.5;
  double beta = 0.33;
  std::size_t scheduler_patience = 5;
  double min_learning_rate = 1e-6;
  std::vector<std::size_t> eval_ks{1, 5, 10, 20};
  EmbeddingWidths widths;
  std::size_t ff_width = 0;  // 0 means 4 * d
  std::size_t encoder_layers = 2;
  std::size_t heads = 2;
  std::size_t gcn_hidden_layers = 2;
  EdgeWeighting edge_weighting = EdgeWeighting::transition_count;
  Hemisphere hemisphere = Hemisphere::northern;

  /// Throws ContractError on an out-of-range field.
  void validate() const;
};

/// Everything derived from the training part that the model consumes.
struct ModelInputs {
  PopularityStats popularity;
  TrajectoryFlowMap flow_map;
  GraphMatrices graph;
  std::vector<std::size_t> poi_categories;
};

/// `recent_cutoff` defaults to the end of the training span minus 90 days.
ModelInputs prepare_inputs(const DatasetSplit& split, double alpha, double beta,
                           EdgeWeighting weighting = EdgeWeighting::transition_count,
                           std::optional<std::int64_t> recent_cutoff = std::nullopt);

ModelConfig model_config(const TrainConfig& config, const DatasetSplit& split,
                         const ModelInputs& inputs);

struct EpochLog {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double train_poi = 0.0;
  double train_time = 0.0;
  double train_category = 0.0;
  double train_total = 0.0;
  double validation_total = 0.0;
};

struct TrainOptions {
  /// When set, the best model so far is written here after every improvement.
  std::filesystem::path checkpoint_path;
  std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult {
  ModelState model;  // best-validation snapshot
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_validation_loss = 0.0;
  CheckpointMeta meta;
};

/// A loss or gradient went non-finite. `last_good` is the most recent
/// checkpoint written, empty if none was.
class TrainingDiverged : public NumericalError {
 public:
  TrainingDiverged(const std::string& what, std::filesystem::path last_good)
      : NumericalError(what), last_good_(std::move(last_good)) {}
  const std::filesystem::path& last_good() const noexcept { return last_good_; }

 private:
  std::filesystem::path last_good_;
};

/// Shuffled mini-batch AdamW with reduce-on-plateau on the validation loss.
/// Validation falls back to the training loss when the validation part is
/// empty.
TrainResult train(const TrainConfig& config, const DatasetSplit& split, const ModelInputs& inputs,
                  const TrainOptions& options = {});

struct LossSummary {
  double poi = 0.0;
  double time = 0.0;
  double category = 0.0;
  double total = 0.0;
  std::size_t targets = 0;
};

/// Joint loss averaged over every supervised position (dropout off).
LossSummary dataset_loss(ModelState& model, const ModelInputs& inputs,
                         const std::vector<Trajectory>& trajectories, std::size_t batch_size,
                         Hemisphere hemisphere = Hemisphere::northern);

enum class EvalGranularity { position, trajectory };

struct EvalOptions {
  std::vector<std::size_t> ks{1, 5, 10, 20};
  EvalGranularity granularity = EvalGranularity::position;
  /// Operational filter, queried at each target visit's local time. Off when null.
  const OperationalHoursTable* hours = nullptr;
  std::size_t batch_size = 16;
  Hemisphere hemisphere = Hemisphere::northern;
};

/// Scores for one prediction: trajectory `t`, predicting check-in `i + 1`
/// from the prefix ending at `i`.
using ScoreFn = std::function<std::vector<double>(const Trajectory& t, std::size_t i)>;

/// Ranks the true next POI for every prediction point and accumulates metrics.
EvalReport evaluate_scores(const std::vector<Trajectory>& trajectories,
                           const std::vector<std::size_t>& poi_categories, const EvalOptions& options,
                           const ScoreFn& scores);

/// Model evaluation; reads but never writes the parameters.
EvalReport evaluate(ModelState& model, const ModelInputs& inputs,
                    const std::vector<Trajectory>& trajectories, const EvalOptions& options);

/// Transition counts between consecutive check-ins of the training part.
struct MarkovTable {
  std::vector<std::map<std::size_t, std::size_t>> rows;
};

MarkovTable markov_counts(const std::vector<Trajectory>& train, std::size_t poi_count);

/// Counts out of `current`, or `popularity` when that row is empty.
std::vector<double> markov_scores(const MarkovTable& table, std::span<const double> popularity,
                                  std::size_t current);

std::vector<double> raw_popularity(const PopularityStats& stats);

EvalReport baseline_popularity(const ModelInputs& inputs, const std::vector<Trajectory>& trajectories,
                               const EvalOptions& options);
EvalReport baseline_markov(const MarkovTable& table, const ModelInputs& inputs,
                           const std::vector<Trajectory>& trajectories, const EvalOptions& options);

struct SweepCell {
  double alpha = 0.0;
  double beta = 0.0;
  EvalReport report;
};

/// Independent train + evaluate per (alpha, beta), alpha-major, shared seed.
std::vector<SweepCell> sweep_alpha_beta(const TrainConfig& config, const DatasetSplit& split,
                                        std::span<const double> alphas, std::span<const double> betas,
                                        const EvalOptions& options);

void write_training_log(std::ostream& out, const std::vector<EpochLog>& log);
void write_sweep_csv(std::ostream& out, const std::vector<SweepCell>& cells);
void print_sweep_table(std::ostream& out, const std::vector<SweepCell>& cells);

}  // namespace seaget
