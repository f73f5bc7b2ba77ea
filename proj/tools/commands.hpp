#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lbcnn/dataset.hpp"
#include "lbcnn/network.hpp"

namespace lbcnn::cli {

/// "icosphere:N[:radius]", "torus:R:S", "grid:NX:NY" or a path to an OFF file.
TriMesh resolve_mesh(const std::string& spec);

struct DataSource {
  std::optional<BumpParams> generate;
  std::uint64_t generate_seed = 0;
  std::string csv_path;
};

struct RunConfig {
  std::string mesh = "icosphere:3";
  OperatorKind kind = OperatorKind::laplace_beltrami;
  PolyFamily family = PolyFamily::chebyshev;
  double inflation = kDefaultLambdaInflation;
  int coarsening_levels = 0;  // 0: sum of the layers' pool exponents
  int order_seed = 0;
  NetworkSpec network;
  TrainConfig train;
  DataSource data;
  SplitFractions split;
  std::uint64_t split_seed = 0;
};

/// Validates against the config schema; throws InputError on unknown keys or bad values.
RunConfig parse_run_config(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& config);
nlohmann::json to_json(const Metrics& m);

/// Hierarchy depth the config needs.
int hierarchy_depth(const RunConfig& config);

struct TrainOutcome {
  Model model;
  std::vector<EpochRecord> history;
  Splits splits;
  Metrics train_metrics;
  Metrics val_metrics;
  Metrics test_metrics;
};

/// Data -> hierarchy -> train -> evaluate.
TrainOutcome run_training(const RunConfig& config, Exec exec = Exec::parallel);

/// Entry point shared by the executable and the tests. Returns the process exit
/// code: 0 success, 1 user or config error, 2 numerical failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lbcnn::cli
