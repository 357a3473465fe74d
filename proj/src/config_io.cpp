#include "tensormc/config_io.hpp"

#include <cstdio>

#include "json.hpp"
#include "tensormc/errors.hpp"

namespace tmc {

namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

std::string double17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json widths_to_json(const ElementWidths& w) {
  return {{"coordinate_bytes", w.coordinate_bytes},
          {"value_bytes", w.value_bytes},
          {"matrix_element_bytes", w.matrix_element_bytes}};
}

json routing_to_json(const RoutingTable& r) {
  json j = json::object();
  for (int k = 0; k < kNumAccessKinds; ++k)
    j[access_kind_name(static_cast<AccessKind>(k))] =
        engine_kind_name(r.route[static_cast<std::size_t>(k)]);
  return j;
}

json controller_to_json(const MemControllerConfig& c) {
  json j;
  j["cache"] = {{"line_width_bytes", c.cache.line_width_bytes},
                {"num_lines", c.cache.num_lines},
                {"associativity", c.cache.associativity},
                {"hit_time_ns", c.cache.hit_time_ns},
                {"shared_factor_matrices", c.cache.shared_factor_matrices}};
  j["dma"] = {{"num_dmas", c.dma.num_dmas},
              {"buffers_per_dma", c.dma.buffers_per_dma},
              {"buffer_size_bytes", c.dma.buffer_size_bytes},
              {"element_width_bytes", c.dma.element_width_bytes}};
  j["remapper"] = {{"dma_buffer_size_bytes", c.remapper.dma_buffer_size_bytes},
                   {"tensor_element_width_bytes", c.remapper.tensor_element_width_bytes},
                   {"max_address_pointers", c.remapper.max_address_pointers}};
  j["routing"] = routing_to_json(c.routing);
  if (!c.factor_regions.empty()) {
    json regions = json::array();
    for (const auto& r : c.factor_regions) regions.push_back({{"base", r.base}, {"size", r.size}});
    j["factor_regions"] = regions;
  }
  return j;
}

json dram_to_json(const DramModel& d) {
  return {{"row_buffer_size_bytes", d.row_buffer_size_bytes},
          {"t_row_hit_ns", d.t_row_hit_ns},
          {"t_row_miss_ns", d.t_row_miss_ns},
          {"burst_bytes", d.burst_bytes},
          {"stream_bandwidth_bytes_per_ns", d.stream_bandwidth_bytes_per_ns}};
}

json fpga_to_json(const FpgaResources& f) {
  return {{"bram_bits", f.bram_bits},
          {"uram_bits", f.uram_bits},
          {"memory_interface_width_bits", f.memory_interface_width_bits},
          {"pooled", f.pooled}};
}

json engine_report_to_json(const EngineReport& e) {
  return {{"busy_ns", e.busy_ns},
          {"completion_ns", e.completion_ns},
          {"events", e.events},
          {"bytes_moved", e.bytes_moved}};
}

json ranked_to_json(const RankedConfig& r, bool with_per_dataset) {
  json j;
  j["grid_index"] = r.grid_index;
  j["t_avg_ns"] = r.t_avg_ns;
  j["resource_bits"] = r.resource_bits;
  j["config"] = controller_to_json(r.config);
  if (with_per_dataset) j["per_dataset_ns"] = r.per_dataset_ns;
  return j;
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

void read_routing(const json& j, RoutingTable& routing) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto kind = access_kind_from_name(it.key());
    if (!kind) throw ParseError("unknown access kind in routing table: " + it.key());
    const std::string engine_name = it.value().get<std::string>();
    const auto engine = engine_kind_from_name(engine_name);
    if (!engine) throw ParseError("unknown engine in routing table: " + engine_name);
    routing[*kind] = *engine;
  }
}

void read_controller(const json& j, MemControllerConfig& c) {
  if (auto it = j.find("cache"); it != j.end()) {
    read_field(*it, "line_width_bytes", c.cache.line_width_bytes);
    read_field(*it, "num_lines", c.cache.num_lines);
    read_field(*it, "associativity", c.cache.associativity);
    read_field(*it, "hit_time_ns", c.cache.hit_time_ns);
    read_field(*it, "shared_factor_matrices", c.cache.shared_factor_matrices);
  }
  if (auto it = j.find("dma"); it != j.end()) {
    read_field(*it, "num_dmas", c.dma.num_dmas);
    read_field(*it, "buffers_per_dma", c.dma.buffers_per_dma);
    read_field(*it, "buffer_size_bytes", c.dma.buffer_size_bytes);
    read_field(*it, "element_width_bytes", c.dma.element_width_bytes);
  }
  if (auto it = j.find("remapper"); it != j.end()) {
    read_field(*it, "dma_buffer_size_bytes", c.remapper.dma_buffer_size_bytes);
    read_field(*it, "tensor_element_width_bytes", c.remapper.tensor_element_width_bytes);
    read_field(*it, "max_address_pointers", c.remapper.max_address_pointers);
  }
  if (auto it = j.find("routing"); it != j.end()) read_routing(*it, c.routing);
}

template <typename T>
void read_list(const json& j, const char* key, std::vector<T>& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  if (it->is_array())
    out = it->get<std::vector<T>>();
  else
    out = {it->get<T>()};
}

void read_grid(const json& j, ParamGrid& g) {
  read_list(j, "cache_line_width_bytes", g.cache_line_width_bytes);
  read_list(j, "cache_num_lines", g.cache_num_lines);
  read_list(j, "cache_associativity", g.cache_associativity);
  read_list(j, "dma_num_dmas", g.dma_num_dmas);
  read_list(j, "dma_buffers_per_dma", g.dma_buffers_per_dma);
  read_list(j, "dma_buffer_size_bytes", g.dma_buffer_size_bytes);
  read_list(j, "remapper_buffer_size_bytes", g.remapper_buffer_size_bytes);
  read_list(j, "remapper_max_pointers", g.remapper_max_pointers);
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  ExperimentConfig cfg;
  try {
    const json j = json::parse(json_text);
    if (!j.is_object()) throw ParseError("experiment config must be a JSON object");

    read_list(j, "tensors", cfg.tensor_paths);
    if (auto it = j.find("tensor"); it != j.end())
      cfg.tensor_paths = {it->get<std::string>()};
    read_list(j, "traces", cfg.trace_paths);
    if (auto it = j.find("trace"); it != j.end()) cfg.trace_paths = {it->get<std::string>()};

    read_field(j, "rank", cfg.rank);
    read_list(j, "modes", cfg.modes);
    if (auto it = j.find("mode"); it != j.end()) cfg.modes = {it->get<int>()};
    if (auto it = j.find("approach"); it != j.end()) {
      const std::string name = it->get<std::string>();
      const auto v = variant_from_name(name);
      if (!v) throw ParseError("unknown approach: " + name);
      cfg.approach = *v;
    }
    read_field(j, "seed", cfg.seed);
    read_field(j, "out_dir", cfg.out_dir);
    read_field(j, "merge_duplicates", cfg.merge_duplicates);

    if (auto it = j.find("widths"); it != j.end()) {
      read_field(*it, "coordinate_bytes", cfg.widths.coordinate_bytes);
      read_field(*it, "value_bytes", cfg.widths.value_bytes);
      read_field(*it, "matrix_element_bytes", cfg.widths.matrix_element_bytes);
    }
    if (auto it = j.find("controller"); it != j.end()) read_controller(*it, cfg.controller);
    if (auto it = j.find("dram"); it != j.end()) {
      read_field(*it, "row_buffer_size_bytes", cfg.dram.row_buffer_size_bytes);
      read_field(*it, "t_row_hit_ns", cfg.dram.t_row_hit_ns);
      read_field(*it, "t_row_miss_ns", cfg.dram.t_row_miss_ns);
      read_field(*it, "burst_bytes", cfg.dram.burst_bytes);
      read_field(*it, "stream_bandwidth_bytes_per_ns", cfg.dram.stream_bandwidth_bytes_per_ns);
    }
    if (auto it = j.find("grid"); it != j.end()) read_grid(*it, cfg.grid);
    if (auto it = j.find("fpga"); it != j.end()) {
      read_field(*it, "bram_bits", cfg.fpga.bram_bits);
      read_field(*it, "uram_bits", cfg.fpga.uram_bits);
      read_field(*it, "memory_interface_width_bits", cfg.fpga.memory_interface_width_bits);
      read_field(*it, "pooled", cfg.fpga.pooled);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("experiment config: ") + e.what());
  }
  if (cfg.rank < 1) throw ValidationError("rank must be at least 1");
  return cfg;
}

std::string stats_json(const TensorStats& stats) {
  json j;
  j["format_version"] = kFormatVersion;
  j["modes"] = stats.num_modes;
  j["dims"] = stats.mode_lengths;
  j["nnz"] = stats.nnz;
  j["density"] = stats.density;
  j["tensor_bytes"] = stats.tensor_bytes;
  j["factor_bytes"] = stats.factor_matrix_bytes;
  return j.dump(2) + "\n";
}

std::string sim_report_json(const SimReport& report) {
  json j;
  j["format_version"] = kFormatVersion;
  j["total_time_ns"] = report.total_time_ns;
  j["engines"] = {{"cache", engine_report_to_json(report.cache)},
                  {"dma", engine_report_to_json(report.dma)},
                  {"remapper", engine_report_to_json(report.remapper)}};
  j["cache_hits"] = report.cache_hits;
  j["cache_misses"] = report.cache_misses;
  j["dma_transfers"] = report.dma_transfers;
  j["remapper_element_stores"] = report.remapper_element_stores;
  j["remapper_pointer_events"] = report.remapper_pointer_events;
  j["config"] = controller_to_json(report.config);
  j["dram"] = dram_to_json(report.dram);
  return j.dump(2) + "\n";
}

std::string explore_report_json(const ExploreReport& report, const FpgaResources& fpga,
                                const DramModel& dram) {
  json j;
  j["format_version"] = kFormatVersion;
  j["modular"] = report.modular;
  j["passes"] = report.passes;
  j["grid_cardinality"] = report.grid_cardinality;
  j["feasible_count"] = report.feasible_count;
  j["infeasible_count"] = report.infeasible_count;
  j["best"] = ranked_to_json(report.best, true);
  json ranking = json::array();
  for (const auto& r : report.ranking) ranking.push_back(ranked_to_json(r, false));
  j["ranking"] = ranking;
  j["fpga"] = fpga_to_json(fpga);
  j["dram"] = dram_to_json(dram);
  return j.dump(2) + "\n";
}

std::string explore_ranking_csv(const ExploreReport& report) {
  std::string out =
      "rank,grid_index,t_avg_ns,resource_bits,cache_line_width_bytes,cache_num_lines,"
      "cache_associativity,dma_num_dmas,dma_buffers_per_dma,dma_buffer_size_bytes,"
      "remapper_buffer_size_bytes,remapper_max_pointers\n";
  std::size_t place = 1;
  for (const auto& r : report.ranking) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%zu,%llu,%s,%llu,%llu,%llu,%llu,%u,%u,%llu,%llu,%llu\n",
                  place++, (unsigned long long)r.grid_index, double17(r.t_avg_ns).c_str(),
                  (unsigned long long)r.resource_bits,
                  (unsigned long long)r.config.cache.line_width_bytes,
                  (unsigned long long)r.config.cache.num_lines,
                  (unsigned long long)r.config.cache.associativity, r.config.dma.num_dmas,
                  r.config.dma.buffers_per_dma,
                  (unsigned long long)r.config.dma.buffer_size_bytes,
                  (unsigned long long)r.config.remapper.dma_buffer_size_bytes,
                  (unsigned long long)r.config.remapper.max_address_pointers);
    out += buf;
  }
  return out;
}

std::string mttkrp_report_json(const MttkrpRunMeta& meta, const AccessCounters& counters,
                               const CostPrediction& prediction, const Reconciliation* recon,
                               std::uint64_t trace_bytes) {
  json j;
  j["format_version"] = kFormatVersion;
  j["approach"] = variant_name(meta.variant);
  j["output_mode"] = meta.output_mode;
  j["rank"] = meta.rank;
  j["seed"] = meta.seed;
  j["nnz"] = meta.nnz;
  j["modes"] = meta.num_modes;
  j["counters"] = {{"tensor_element_loads", counters.tensor_element_loads},
                   {"tensor_element_stores", counters.tensor_element_stores},
                   {"factor_row_loads", counters.factor_row_loads},
                   {"factor_row_stores", counters.factor_row_stores},
                   {"partial_row_stores", counters.partial_row_stores},
                   {"partial_row_loads", counters.partial_row_loads},
                   {"pointer_loads", counters.pointer_loads},
                   {"pointer_stores", counters.pointer_stores},
                   {"fma_count", counters.fma_count}};
  j["cost_model"] = {{"approach", variant_name(prediction.variant)},
                     {"total_computations", prediction.total_computations},
                     {"total_accesses", prediction.total_accesses},
                     {"partial_sum_elements", prediction.partial_sum_elements},
                     {"remap_overhead", prediction.remap_overhead},
                     {"total_bytes", prediction.total_bytes}};
  if (recon) {
    j["reconciliation"] = {{"measured_accesses", recon->measured_accesses},
                           {"predicted_accesses", recon->predicted_accesses},
                           {"accesses_match", recon->accesses_match},
                           {"measured_fma", recon->measured_fma},
                           {"predicted_fma", recon->predicted_fma},
                           {"fma_match", recon->fma_match},
                           {"match", recon->match()}};
  }
  j["trace_bytes"] = trace_bytes;
  return j.dump(2) + "\n";
}

std::string cp_als_report_json(const CpAlsResult& result) {
  json j;
  j["format_version"] = kFormatVersion;
  j["rank"] = result.factors.empty() ? 0 : result.factors.front().rank;
  j["iterations"] = result.iterations;
  j["fit_history"] = result.fit_history;
  j["final_fit"] = result.fit_history.empty() ? 0.0 : result.fit_history.back();
  j["lambda"] = result.lambda;
  j["gram_regularized"] = result.gram_regularized;
  j["max_unit_norm_deviation"] = result.max_unit_norm_deviation;
  return j.dump(2) + "\n";
}

std::string matrix_to_text(const FactorMatrix& m) {
  std::string out;
  out.reserve(std::size_t(m.rows) * m.rank * 24);
  for (Index r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.rank; ++c) {
      if (c) out += ' ';
      out += double17(m.at(r, c));
    }
    out += '\n';
  }
  return out;
}

std::string memcontroller_config_json(const MemControllerConfig& config) {
  return controller_to_json(config).dump(2) + "\n";
}

}  // namespace tmc
