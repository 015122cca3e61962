#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "seaget/dataio.hpp"
#include "seaget/trainer.hpp"

namespace seaget {

/// Training settings plus the file locations one run needs.
struct RunConfig {
  TrainConfig train;
  std::filesystem::path checkins;
  std::filesystem::path hours;
  std::filesystem::path workdir;
  PreprocessOptions preprocess;
};

/// INI text with [paths], [data], [train] and [model] sections, e.g.
///
///   [train]
///   learning_rate = 0.001
///   eval_ks = 1,5,10,20
///
/// Unknown sections or keys and unparsable values raise FormatError.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Inverse of parse_run_config; every key is written.
std::string format_run_config(const RunConfig& config);

EdgeWeighting parse_edge_weighting(std::string_view s);
Hemisphere parse_hemisphere(std::string_view s);
FilterMode parse_filter_mode(std::string_view s);
std::string to_string(EdgeWeighting w);
std::string to_string(Hemisphere h);
std::string to_string(FilterMode m);

}  // namespace seaget
