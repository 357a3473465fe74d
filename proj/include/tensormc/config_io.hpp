#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tensormc/cost_model.hpp"
#include "tensormc/explorer.hpp"
#include "tensormc/kernels.hpp"
#include "tensormc/memsim.hpp"
#include "tensormc/tensor.hpp"

namespace tmc {

// One experiment document. Every section is optional in the JSON; omitted
// fields keep the defaults below and the effective values are echoed into
// every report.
struct ExperimentConfig {
  std::vector<std::string> tensor_paths;
  std::vector<std::string> trace_paths;
  int rank = 16;
  std::vector<int> modes;  // empty = all modes
  MttkrpVariant approach = MttkrpVariant::OutputOrder;
  std::uint64_t seed = 0;
  std::string out_dir;
  bool merge_duplicates = false;
  ElementWidths widths;
  MemControllerConfig controller;
  DramModel dram;
  ParamGrid grid;
  FpgaResources fpga;
};

ExperimentConfig parse_experiment_config(const std::string& json_text);

std::string stats_json(const TensorStats& stats);
std::string sim_report_json(const SimReport& report);
std::string explore_report_json(const ExploreReport& report, const FpgaResources& fpga,
                                const DramModel& dram);
std::string explore_ranking_csv(const ExploreReport& report);

struct MttkrpRunMeta {
  MttkrpVariant variant = MttkrpVariant::Coo;
  int output_mode = 0;
  int rank = 0;
  std::uint64_t seed = 0;
  Index nnz = 0;
  int num_modes = 0;
};

std::string mttkrp_report_json(const MttkrpRunMeta& meta, const AccessCounters& counters,
                               const CostPrediction& prediction, const Reconciliation* recon,
                               std::uint64_t trace_bytes);

std::string cp_als_report_json(const CpAlsResult& result);

// Row-major rows, one line each, 17 significant digits.
std::string matrix_to_text(const FactorMatrix& m);

std::string memcontroller_config_json(const MemControllerConfig& config);

}  // namespace tmc
