#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tensormc.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 6;

// CLI-relevant subset of the experiment document. The full text is forwarded
// to the library, which owns the controller/dram/grid/fpga sections.
struct CliConfig {
  std::vector<std::string> tensors;
  std::vector<std::string> traces;
  std::vector<int> modes;
  std::string approach;
  int rank = 16;
  std::uint64_t seed = 0;
  std::string out_dir;
  bool merge_duplicates = false;
  std::string raw;
};

int fail(int code, const std::string& message) {
  std::cerr << "error: " << message << "\n";
  return code;
}

int fail_api(tmc_status status) {
  std::cerr << "error (" << tmc_status_name(status) << "): " << tmc_last_error() << "\n";
  return static_cast<int>(status);
}

bool read_file(const std::string& path, std::string& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream buf;
  buf << in.rdbuf();
  out = buf.str();
  return in.good() || in.eof();
}

bool write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) return false;
  out << content;
  return out.good();
}

int load_cli_config(const std::string& path, CliConfig& cfg) {
  if (!read_file(path, cfg.raw)) return fail(kExitIo, "cannot read config file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(cfg.raw);
  } catch (const nlohmann::json::exception& e) {
    return fail(2, std::string("config: ") + e.what());
  }
  try {
    if (j.contains("tensors")) cfg.tensors = j["tensors"].get<std::vector<std::string>>();
    if (j.contains("tensor")) cfg.tensors = {j["tensor"].get<std::string>()};
    if (j.contains("traces")) cfg.traces = j["traces"].get<std::vector<std::string>>();
    if (j.contains("trace")) cfg.traces = {j["trace"].get<std::string>()};
    if (j.contains("modes")) cfg.modes = j["modes"].get<std::vector<int>>();
    if (j.contains("mode")) cfg.modes = {j["mode"].get<int>()};
    if (j.contains("approach")) cfg.approach = j["approach"].get<std::string>();
    if (j.contains("rank")) cfg.rank = j["rank"].get<int>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("merge_duplicates")) cfg.merge_duplicates = j["merge_duplicates"].get<bool>();
  } catch (const nlohmann::json::exception& e) {
    return fail(2, std::string("config: ") + e.what());
  }
  return kExitOk;
}

int ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) return fail(kExitIo, "cannot create output directory: " + dir);
  return kExitOk;
}

// RAII wrappers over the C handles.
struct Tensor {
  tmc_tensor* handle = nullptr;
  ~Tensor() { tmc_tensor_free(handle); }
};
struct Trace {
  tmc_trace* handle = nullptr;
  Trace() = default;
  explicit Trace(tmc_trace* h) : handle(h) {}
  Trace(Trace&& o) noexcept : handle(o.handle) { o.handle = nullptr; }
  Trace& operator=(Trace&& o) noexcept {
    std::swap(handle, o.handle);
    return *this;
  }
  Trace(const Trace&) = delete;
  ~Trace() { tmc_trace_free(handle); }
};
struct Result {
  tmc_result* handle = nullptr;
  ~Result() { tmc_result_free(handle); }
};
struct ApiString {
  char* text = nullptr;
  ~ApiString() { tmc_string_free(text); }
  std::string str() const { return text ? text : ""; }
};

int load_tensor(const CliConfig& cfg, Tensor& tensor) {
  if (cfg.tensors.empty()) return fail(kExitUsage, "no tensor given (--tensor or config)");
  const auto status = tmc_tensor_parse_file(cfg.tensors.front().c_str(),
                                            cfg.merge_duplicates ? 1 : 0, &tensor.handle);
  if (status != TMC_OK) return fail_api(status);
  return kExitOk;
}

// Trace files may be binary or text; the binary magic decides.
int load_trace(const std::string& path, Trace& trace) {
  auto status = tmc_trace_read_binary(path.c_str(), &trace.handle);
  if (status == TMC_ERR_PARSE) status = tmc_trace_read_text(path.c_str(), &trace.handle);
  if (status != TMC_OK) return fail_api(status);
  return kExitOk;
}

std::vector<std::string> expand_approaches(const std::string& approach) {
  if (approach == "all") return {"coo", "a1", "a2", "remap"};
  return {approach};
}

unsigned env_threads() {
  const char* raw = std::getenv("MTTKRP_MEMSIM_THREADS");
  if (!raw || !*raw) return 0;
  const long v = std::strtol(raw, nullptr, 10);
  return v > 0 ? unsigned(v) : 0;
}

int cmd_stats(const CliConfig& cfg) {
  Tensor tensor;
  if (const int rc = load_tensor(cfg, tensor)) return rc;
  ApiString json;
  const auto status = tmc_tensor_stats_json(tensor.handle, cfg.rank, &json.text);
  if (status != TMC_OK) return fail_api(status);
  if (cfg.out_dir.empty()) {
    std::cout << json.str();
    return kExitOk;
  }
  if (const int rc = ensure_out_dir(cfg.out_dir)) return rc;
  const auto path = cfg.out_dir + "/stats.json";
  if (!write_file(path, json.str())) return fail(kExitIo, "cannot write " + path);
  return kExitOk;
}

int cmd_mttkrp(const CliConfig& cfg, bool emit_trace) {
  if (cfg.out_dir.empty()) return fail(kExitUsage, "mttkrp needs --out");
  if (const int rc = ensure_out_dir(cfg.out_dir)) return rc;
  Tensor tensor;
  if (const int rc = load_tensor(cfg, tensor)) return rc;

  std::vector<int> modes = cfg.modes;
  if (modes.empty())
    for (int m = 0; m < tmc_tensor_num_modes(tensor.handle); ++m) modes.push_back(m);
  const std::string approach = cfg.approach.empty() ? "a1" : cfg.approach;
  const auto approaches = expand_approaches(approach);
  const char* config_json = cfg.raw.empty() ? nullptr : cfg.raw.c_str();

  bool reconciled = true;
  for (const int mode : modes) {
    for (const auto& name : approaches) {
      Result result;
      auto status = tmc_mttkrp(tensor.handle, name.c_str(), mode, cfg.rank, cfg.seed,
                               config_json, &result.handle);
      if (status != TMC_OK) return fail_api(status);

      const std::string stem = cfg.out_dir + "/mode" + std::to_string(mode) + "_" + name;
      ApiString matrix;
      status = tmc_result_matrix_text(result.handle, &matrix.text);
      if (status != TMC_OK) return fail_api(status);
      if (!write_file(stem + ".mtx", matrix.str()))
        return fail(kExitIo, "cannot write " + stem + ".mtx");

      ApiString report;
      status = tmc_result_report_json(result.handle, &report.text);
      if (status != TMC_OK) return fail_api(status);
      if (!write_file(stem + "_counters.json", report.str()))
        return fail(kExitIo, "cannot write " + stem + "_counters.json");

      if (emit_trace && name != "coo") {
        Trace trace;
        status = tmc_result_trace(result.handle, &trace.handle);
        if (status != TMC_OK) return fail_api(status);
        status = tmc_trace_write_text(trace.handle, (stem + ".trace").c_str());
        if (status != TMC_OK) return fail_api(status);
      }

      if (!tmc_result_reconciled(result.handle)) {
        std::cerr << "error (reconcile): measured accesses for mode " << mode << " approach "
                  << name << " disagree with the model\n";
        reconciled = false;
      }
    }
    if (approach == "all") {
      ApiString crosscheck;
      const auto status = tmc_mttkrp_crosscheck_json(tensor.handle, mode, cfg.rank, cfg.seed,
                                                     config_json, &crosscheck.text);
      if (status != TMC_OK) return fail_api(status);
      const auto path = cfg.out_dir + "/mode" + std::to_string(mode) + "_crosscheck.json";
      if (!write_file(path, crosscheck.str())) return fail(kExitIo, "cannot write " + path);
    }
  }
  return reconciled ? kExitOk : static_cast<int>(TMC_ERR_RECONCILE);
}

int cmd_simulate(const CliConfig& cfg, const std::string& trace_path, bool emit_trace) {
  const char* config_json = cfg.raw.empty() ? nullptr : cfg.raw.c_str();

  Trace trace;
  std::string source = trace_path;
  if (source.empty() && !cfg.traces.empty()) source = cfg.traces.front();
  if (!source.empty()) {
    if (const int rc = load_trace(source, trace)) return rc;
  } else {
    Tensor tensor;
    if (const int rc = load_tensor(cfg, tensor)) return rc;
    const std::string approach = cfg.approach.empty() ? "a1" : cfg.approach;
    if (approach == "all" || approach == "coo")
      return fail(kExitUsage, "simulate needs an instrumented approach (a1, a2 or remap)");
    const int mode = cfg.modes.empty() ? 0 : cfg.modes.front();
    Result result;
    auto status = tmc_mttkrp(tensor.handle, approach.c_str(), mode, cfg.rank, cfg.seed,
                             config_json, &result.handle);
    if (status != TMC_OK) return fail_api(status);
    status = tmc_result_trace(result.handle, &trace.handle);
    if (status != TMC_OK) return fail_api(status);
    if (emit_trace && !cfg.out_dir.empty()) {
      if (const int rc = ensure_out_dir(cfg.out_dir)) return rc;
      const auto path = cfg.out_dir + "/generated.trace";
      status = tmc_trace_write_text(trace.handle, path.c_str());
      if (status != TMC_OK) return fail_api(status);
    }
  }

  ApiString report;
  const auto status = tmc_simulate_json(trace.handle, config_json, &report.text);
  if (status != TMC_OK) return fail_api(status);
  if (cfg.out_dir.empty()) {
    std::cout << report.str();
    return kExitOk;
  }
  if (const int rc = ensure_out_dir(cfg.out_dir)) return rc;
  const auto path = cfg.out_dir + "/simreport.json";
  if (!write_file(path, report.str())) return fail(kExitIo, "cannot write " + path);
  return kExitOk;
}

int cmd_explore(const CliConfig& cfg, const std::vector<std::string>& trace_flags,
                bool modular) {
  const char* config_json = cfg.raw.empty() ? nullptr : cfg.raw.c_str();

  std::vector<Trace> traces;
  const auto& paths = trace_flags.empty() ? cfg.traces : trace_flags;
  for (const auto& path : paths) {
    Trace t;
    if (const int rc = load_trace(path, t)) return rc;
    traces.push_back(std::move(t));
  }
  if (traces.empty()) {
    // No trace files: derive one dataset per configured tensor.
    if (cfg.tensors.empty())
      return fail(kExitUsage, "explore needs dataset traces (--trace) or tensors in the config");
    const std::string approach = cfg.approach.empty() ? "a1" : cfg.approach;
    if (approach == "all" || approach == "coo")
      return fail(kExitUsage, "explore needs an instrumented approach (a1, a2 or remap)");
    const int mode = cfg.modes.empty() ? 0 : cfg.modes.front();
    for (const auto& tensor_path : cfg.tensors) {
      Tensor tensor;
      auto status = tmc_tensor_parse_file(tensor_path.c_str(), cfg.merge_duplicates ? 1 : 0,
                                          &tensor.handle);
      if (status != TMC_OK) return fail_api(status);
      Result result;
      status = tmc_mttkrp(tensor.handle, approach.c_str(), mode, cfg.rank, cfg.seed,
                          config_json, &result.handle);
      if (status != TMC_OK) return fail_api(status);
      Trace t;
      status = tmc_result_trace(result.handle, &t.handle);
      if (status != TMC_OK) return fail_api(status);
      traces.push_back(std::move(t));
    }
  }

  std::vector<const tmc_trace*> handles;
  handles.reserve(traces.size());
  for (const auto& t : traces) handles.push_back(t.handle);

  ApiString report, csv;
  const auto status =
      tmc_explore_json(handles.data(), int32_t(handles.size()), config_json,
                       int32_t(env_threads()), modular ? 1 : 0, &report.text, &csv.text);
  if (status != TMC_OK) return fail_api(status);

  if (cfg.out_dir.empty()) {
    std::cout << report.str();
    return kExitOk;
  }
  if (const int rc = ensure_out_dir(cfg.out_dir)) return rc;
  const auto json_path = cfg.out_dir + "/explore_report.json";
  if (!write_file(json_path, report.str())) return fail(kExitIo, "cannot write " + json_path);
  const auto csv_path = cfg.out_dir + "/explore_ranking.csv";
  if (!write_file(csv_path, csv.str())) return fail(kExitIo, "cannot write " + csv_path);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse MTTKRP kernels, access-cost model, and memory-controller simulator"};
  app.require_subcommand(1);

  std::string config_path, tensor_path, approach, out_dir, trace_path;
  std::vector<std::string> trace_paths;
  std::vector<int> modes;
  int rank = -1;
  std::int64_t seed = -1;
  bool merge_duplicates = false, emit_trace = false, modular = false;

  const auto add_common = [&](CLI::App* cmd, bool with_tensor) {
    cmd->add_option("--config", config_path, "experiment config JSON");
    if (with_tensor) cmd->add_option("--tensor", tensor_path, "tensor file");
    cmd->add_option("--rank", rank, "factor matrix rank");
    cmd->add_option("--seed", seed, "random seed");
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_flag("--merge-duplicates", merge_duplicates, "sum duplicate coordinates");
  };

  auto* stats = app.add_subcommand("stats", "tensor shape, density and size report");
  add_common(stats, true);

  auto* mttkrp = app.add_subcommand("mttkrp", "run MTTKRP kernels with access instrumentation");
  add_common(mttkrp, true);
  mttkrp->add_option("--mode", modes, "output mode(s), default all");
  mttkrp->add_option("--approach", approach, "coo, a1, a2, remap or all");
  mttkrp->add_flag("--emit-trace", emit_trace, "write access trace files");

  auto* simulate = app.add_subcommand("simulate", "replay a trace through the controller model");
  add_common(simulate, true);
  simulate->add_option("--trace", trace_path, "access trace file (text or binary)");
  simulate->add_option("--mode", modes, "output mode when generating a trace");
  simulate->add_option("--approach", approach, "kernel used when generating a trace");
  simulate->add_flag("--emit-trace", emit_trace, "keep the generated trace");

  auto* explore = app.add_subcommand("explore", "sweep controller configs under a budget");
  add_common(explore, true);
  explore->add_option("--trace", trace_paths, "dataset trace file(s)");
  explore->add_option("--mode", modes, "output mode when generating traces");
  explore->add_option("--approach", approach, "kernel used when generating traces");
  explore->add_flag("--modular", modular, "module-by-module sweep instead of exhaustive");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  CliConfig cfg;
  if (!config_path.empty()) {
    if (const int rc = load_cli_config(config_path, cfg)) return rc;
  }
  if (!tensor_path.empty()) cfg.tensors = {tensor_path};
  if (!modes.empty()) cfg.modes = modes;
  if (!approach.empty()) cfg.approach = approach;
  if (rank >= 0) cfg.rank = rank;
  if (seed >= 0) cfg.seed = std::uint64_t(seed);
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (merge_duplicates) cfg.merge_duplicates = true;
  if (cfg.rank < 1) return fail(kExitUsage, "rank must be at least 1");
  if (!cfg.approach.empty() && cfg.approach != "all" && cfg.approach != "coo" &&
      cfg.approach != "a1" && cfg.approach != "a2" && cfg.approach != "remap")
    return fail(kExitUsage, "unknown approach: " + cfg.approach);

  if (stats->parsed()) return cmd_stats(cfg);
  if (mttkrp->parsed()) return cmd_mttkrp(cfg, emit_trace);
  if (simulate->parsed()) return cmd_simulate(cfg, trace_path, emit_trace);
  if (explore->parsed()) return cmd_explore(cfg, trace_paths, modular);
  return kExitUsage;
}
