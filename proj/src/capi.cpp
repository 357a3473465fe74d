#include "tensormc.h"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

#include "json.hpp"
#include "tensormc/config_io.hpp"
#include "tensormc/cost_model.hpp"
#include "tensormc/errors.hpp"
#include "tensormc/explorer.hpp"
#include "tensormc/kernels.hpp"
#include "tensormc/memsim.hpp"
#include "tensormc/tensor.hpp"
#include "tensormc/trace.hpp"

struct tmc_tensor_s {
  tmc::SparseTensorCOO tensor;
};

struct tmc_trace_s {
  tmc::AccessTrace trace;
};

struct tmc_result_s {
  tmc::MttkrpResult result;
  tmc::MttkrpRunMeta meta;
  tmc::CostPrediction prediction;
  bool instrumented = false;
  tmc::Reconciliation recon;
};

namespace {

thread_local std::string g_last_error;

tmc_status fail(tmc_status status, const char* what) {
  g_last_error = what;
  return status;
}

template <typename Fn>
tmc_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    return fn();
  } catch (const tmc::ParseError& e) {
    return fail(TMC_ERR_PARSE, e.what());
  } catch (const tmc::ValidationError& e) {
    return fail(TMC_ERR_VALIDATION, e.what());
  } catch (const tmc::ReconcileError& e) {
    return fail(TMC_ERR_RECONCILE, e.what());
  } catch (const tmc::InfeasibleError& e) {
    return fail(TMC_ERR_INFEASIBLE, e.what());
  } catch (const tmc::IoError& e) {
    return fail(TMC_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(TMC_ERR_INTERNAL, e.what());
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

tmc::ExperimentConfig config_or_default(const char* config_json) {
  if (!config_json || !*config_json) return {};
  return tmc::parse_experiment_config(config_json);
}

tmc_result_s run_variant(const tmc::SparseTensorCOO& t, tmc::MttkrpVariant variant, int mode,
                         int rank, std::uint64_t seed, const tmc::ExperimentConfig& cfg) {
  if (mode < 0 || mode >= t.num_modes) throw tmc::ValidationError("output mode out of range");
  if (rank < 1) throw tmc::ValidationError("rank must be at least 1");

  tmc_result_s out;
  const auto factors = tmc::make_random_factors(t, rank, seed);
  out.result = tmc::run_mttkrp(variant, t, factors, mode,
                               tmc::Index(cfg.controller.remapper.max_address_pointers),
                               cfg.widths);
  out.meta = {variant, mode, rank, seed, t.nnz(), t.num_modes};

  const tmc::Index i_out = t.mode_lengths[mode];
  tmc::Index i_in = i_out;
  if (variant == tmc::MttkrpVariant::InputOrder)
    i_in = t.mode_lengths[tmc::pick_input_mode(t, mode)];
  out.prediction = tmc::predict(variant, t.num_modes, t.nnz(), rank, i_out, i_in, cfg.widths);
  if (variant != tmc::MttkrpVariant::Coo) {
    out.instrumented = true;
    out.recon =
        tmc::reconcile(out.result.counters, variant, t.num_modes, t.nnz(), rank, i_out, i_in);
  }
  return out;
}

}  // namespace

extern "C" {

const char* tmc_version(void) { return "1.0.0"; }

const char* tmc_status_name(tmc_status status) {
  switch (status) {
    case TMC_OK: return "ok";
    case TMC_ERR_USAGE: return "usage";
    case TMC_ERR_PARSE: return "parse";
    case TMC_ERR_VALIDATION: return "validation";
    case TMC_ERR_RECONCILE: return "reconcile";
    case TMC_ERR_INFEASIBLE: return "infeasible";
    case TMC_ERR_IO: return "io";
    case TMC_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* tmc_last_error(void) { return g_last_error.c_str(); }

void tmc_string_free(char* text) { std::free(text); }

tmc_status tmc_tensor_parse_file(const char* path, int merge_duplicates, tmc_tensor** out) {
  if (!path || !out) return fail(TMC_ERR_USAGE, "null argument");
  return guarded([&] {
    tmc::ParseOptions opts;
    opts.duplicates =
        merge_duplicates ? tmc::DuplicatePolicy::MergeSum : tmc::DuplicatePolicy::Reject;
    auto* handle = new tmc_tensor_s{tmc::parse_frostt_file(path, opts)};
    *out = handle;
    return TMC_OK;
  });
}

tmc_status tmc_tensor_parse_text(const char* text, int merge_duplicates, tmc_tensor** out) {
  if (!text || !out) return fail(TMC_ERR_USAGE, "null argument");
  return guarded([&] {
    tmc::ParseOptions opts;
    opts.duplicates =
        merge_duplicates ? tmc::DuplicatePolicy::MergeSum : tmc::DuplicatePolicy::Reject;
    auto* handle = new tmc_tensor_s{tmc::parse_frostt_text(text, opts)};
    *out = handle;
    return TMC_OK;
  });
}

void tmc_tensor_free(tmc_tensor* tensor) { delete tensor; }

int32_t tmc_tensor_num_modes(const tmc_tensor* tensor) {
  return tensor ? tensor->tensor.num_modes : -1;
}

int64_t tmc_tensor_nnz(const tmc_tensor* tensor) { return tensor ? tensor->tensor.nnz() : -1; }

int64_t tmc_tensor_mode_length(const tmc_tensor* tensor, int32_t mode) {
  if (!tensor || mode < 0 || mode >= tensor->tensor.num_modes) return -1;
  return tensor->tensor.mode_lengths[mode];
}

tmc_status tmc_tensor_stats_json(const tmc_tensor* tensor, int32_t rank, char** json) {
  if (!tensor || !json) return fail(TMC_ERR_USAGE, "null argument");
  return guarded([&] {
    *json = copy_string(tmc::stats_json(tmc::tensor_stats(tensor->tensor, rank)));
    return TMC_OK;
  });
}

tmc_status tmc_mttkrp(const tmc_tensor* tensor, const char* approach, int32_t mode,
                      int32_t rank, uint64_t seed, const char* config_json, tmc_result** out) {
  if (!tensor || !approach || !out) return fail(TMC_ERR_USAGE, "null argument");
  const auto variant = tmc::variant_from_name(approach);
  if (!variant) return fail(TMC_ERR_USAGE, "unknown approach name");
  return guarded([&] {
    const auto cfg = config_or_default(config_json);
    *out = new tmc_result_s(run_variant(tensor->tensor, *variant, mode, rank, seed, cfg));
    return TMC_OK;
  });
}

void tmc_result_free(tmc_result* result) { delete result; }

tmc_status tmc_result_matrix_text(const tmc_result* result, char** text) {
  if (!result || !text) return fail(TMC_ERR_USAGE, "null argument");
  return guarded([&] {
    *text = copy_string(tmc::matrix_to_text(result->result.matrix));
    return TMC_OK;
  });
}

tmc_status tmc_result_report_json(const tmc_result* result, char** json) {
  if (!result || !json) return fail(TMC_ERR_USAGE, "null argument");
  return guarded([&] {
    *json = copy_string(tmc::mttkrp_report_json(
        result->meta, result->result.counters, result->prediction,
        result->instrumented ? &result->recon : nullptr, result->result.trace.total_bytes()));
    return TMC_OK;
  });
}

int32_t tmc_result_reconciled(const tmc_result* result) {
  if (!result) return 0;
  return !result->instrumented || result->recon.match() ? 1 : 0;
}

tmc_status tmc_result_trace(const tmc_result* result, tmc_trace** out) {
  if (!result || !out) return fail(TMC_ERR_USAGE, "null argument");
  return guarded([&] {
    *out = new tmc_trace_s{result->result.trace};
    return TMC_OK;
  });
}

tmc_status tmc_mttkrp_crosscheck_json(const tmc_tensor* tensor, int32_t mode, int32_t rank,
                                      uint64_t seed, const char* config_json, char** json) {
  if (!tensor || !json) return fail(TMC_ERR_USAGE, "null argument");
  return guarded([&] {
    const auto cfg = config_or_default(config_json);
    const auto& t = tensor->tensor;
    const tmc::MttkrpVariant variants[] = {
        tmc::MttkrpVariant::Coo, tmc::MttkrpVariant::OutputOrder,
        tmc::MttkrpVariant::InputOrder, tmc::MttkrpVariant::Remap};

    std::vector<tmc::FactorMatrix> matrices;
    nlohmann::json report;
    report["format_version"] = 1;
    report["output_mode"] = mode;
    report["rank"] = rank;
    report["seed"] = seed;
    nlohmann::json recon = nlohmann::json::object();
    for (const auto v : variants) {
      auto res = run_variant(t, v, mode, rank, seed, cfg);
      recon[tmc::variant_name(v)] = !res.instrumented || res.recon.match();
      matrices.push_back(std::move(res.result.matrix));
    }
    report["reconciled"] = recon;

    const auto deviation = [](const tmc::FactorMatrix& a, const tmc::FactorMatrix& b) {
      double worst = 0.0;
      for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double denom = std::max({std::fabs(a.data[i]), std::fabs(b.data[i]), 1e-300});
        worst = std::max(worst, std::fabs(a.data[i] - b.data[i]) / denom);
      }
      return worst;
    };

    double pairwise = 0.0;
    nlohmann::json pairs = nlohmann::json::object();
    for (std::size_t a = 0; a < matrices.size(); ++a)
      for (std::size_t b = a + 1; b < matrices.size(); ++b) {
        const double d = deviation(matrices[a], matrices[b]);
        pairs[std::string(tmc::variant_name(variants[a])) + "_vs_" +
              tmc::variant_name(variants[b])] = d;
        pairwise = std::max(pairwise, d);
      }
    report["pairwise_deviations"] = pairs;
    report["max_pairwise_deviation"] = pairwise;

    double dense_elements = 1.0;
    for (const auto len : t.mode_lengths) dense_elements *= double(len);
    if (dense_elements <= 1e6) {
      const auto factors = tmc::make_random_factors(t, rank, seed);
      const auto oracle = tmc::dense_oracle(t, factors, mode);
      double worst = 0.0;
      for (const auto& m : matrices) worst = std::max(worst, deviation(m, oracle));
      report["max_oracle_deviation"] = worst;
    }
    *json = copy_string(report.dump(2) + "\n");
    return TMC_OK;
  });
}

tmc_status tmc_cp_als_json(const tmc_tensor* tensor, int32_t rank, int32_t max_iters,
                           double fit_tolerance, uint64_t seed, char** json) {
  if (!tensor || !json) return fail(TMC_ERR_USAGE, "null argument");
  return guarded([&] {
    tmc::CpAlsOptions opts;
    opts.max_iters = max_iters;
    opts.fit_tolerance = fit_tolerance;
    opts.seed = seed;
    const auto result = tmc::cp_als(tensor->tensor, rank, opts);
    *json = copy_string(tmc::cp_als_report_json(result));
    return TMC_OK;
  });
}

tmc_status tmc_trace_read_text(const char* path, tmc_trace** out) {
  if (!path || !out) return fail(TMC_ERR_USAGE, "null argument");
  return guarded([&] {
    *out = new tmc_trace_s{tmc::read_trace_text_file(path)};
    return TMC_OK;
  });
}

tmc_status tmc_trace_read_binary(const char* path, tmc_trace** out) {
  if (!path || !out) return fail(TMC_ERR_USAGE, "null argument");
  return guarded([&] {
    *out = new tmc_trace_s{tmc::read_trace_binary_file(path)};
    return TMC_OK;
  });
}

tmc_status tmc_trace_write_text(const tmc_trace* trace, const char* path) {
  if (!trace || !path) return fail(TMC_ERR_USAGE, "null argument");
  return guarded([&] {
    tmc::write_trace_text_file(trace->trace, path);
    return TMC_OK;
  });
}

tmc_status tmc_trace_write_binary(const tmc_trace* trace, const char* path) {
  if (!trace || !path) return fail(TMC_ERR_USAGE, "null argument");
  return guarded([&] {
    tmc::write_trace_binary_file(trace->trace, path);
    return TMC_OK;
  });
}

int64_t tmc_trace_num_events(const tmc_trace* trace) {
  return trace ? int64_t(trace->trace.events.size()) : -1;
}

void tmc_trace_free(tmc_trace* trace) { delete trace; }

tmc_status tmc_simulate_json(const tmc_trace* trace, const char* config_json,
                             char** report_json) {
  if (!trace || !report_json) return fail(TMC_ERR_USAGE, "null argument");
  return guarded([&] {
    const auto cfg = config_or_default(config_json);
    const auto report = tmc::simulate(trace->trace, cfg.controller, cfg.dram);
    *report_json = copy_string(tmc::sim_report_json(report));
    return TMC_OK;
  });
}

tmc_status tmc_explore_json(const tmc_trace* const* traces, int32_t num_traces,
                            const char* config_json, int32_t threads, int32_t modular,
                            char** report_json, char** ranking_csv) {
  if (!traces || num_traces < 1 || !report_json) return fail(TMC_ERR_USAGE, "null argument");
  for (int32_t i = 0; i < num_traces; ++i)
    if (!traces[i]) return fail(TMC_ERR_USAGE, "null trace handle");
  return guarded([&] {
    const auto cfg = config_or_default(config_json);
    std::vector<tmc::AccessTrace> datasets;
    datasets.reserve(num_traces);
    for (int32_t i = 0; i < num_traces; ++i) datasets.push_back(traces[i]->trace);
    const unsigned nthreads = threads > 0 ? unsigned(threads) : 0;
    const auto report =
        modular ? tmc::explore_modular(datasets, cfg.grid, cfg.controller, cfg.fpga, cfg.dram,
                                       nthreads)
                : tmc::explore(datasets, cfg.grid, cfg.controller, cfg.fpga, cfg.dram, nthreads);
    *report_json = copy_string(tmc::explore_report_json(report, cfg.fpga, cfg.dram));
    if (ranking_csv) *ranking_csv = copy_string(tmc::explore_ranking_csv(report));
    return TMC_OK;
  });
}

}  // extern "C"
