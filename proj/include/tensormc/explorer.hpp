#pragma once

#include <cstdint>
#include <vector>

#include "tensormc/memsim.hpp"
#include "tensormc/trace.hpp"

namespace tmc {

struct FpgaResources {
  std::uint64_t bram_bits = 90'000'000;
  std::uint64_t uram_bits = 270'000'000;
  std::uint32_t memory_interface_width_bits = 512;
  // Pooled: one on-chip budget of bram + uram bits. When false, the cache
  // must fit BRAM and the DMA/remapper stores must fit URAM.
  bool pooled = true;

  void validate() const;
};

struct ResourceUsage {
  std::uint64_t cache_bits = 0;      // data + tag + valid per line
  std::uint64_t dma_bits = 0;        // num_dmas * buffers_per_dma * buffer bytes
  std::uint64_t remapper_buffer_bits = 0;
  std::uint64_t pointer_bits = 0;    // 32 bits per resident address pointer

  std::uint64_t total() const {
    return cache_bits + dma_bits + remapper_buffer_bits + pointer_bits;
  }
};

// On-chip memory footprint of a controller configuration. Cache tags cover a
// 40-bit address space.
ResourceUsage resource_usage(const MemControllerConfig& config);

// total <= budget at the boundary counts as fitting.
bool fits(const MemControllerConfig& config, const FpgaResources& fpga);

// Candidate value lists, swept exhaustively in lexicographic order (the last
// field varies fastest).
struct ParamGrid {
  std::vector<std::uint64_t> cache_line_width_bytes{64};
  std::vector<std::uint64_t> cache_num_lines{256};
  std::vector<std::uint64_t> cache_associativity{4};
  std::vector<std::uint32_t> dma_num_dmas{1};
  std::vector<std::uint32_t> dma_buffers_per_dma{2};
  std::vector<std::uint64_t> dma_buffer_size_bytes{4096};
  std::vector<std::uint64_t> remapper_buffer_size_bytes{4096};
  std::vector<std::uint64_t> remapper_max_pointers{1024};

  void validate() const;  // lists non-empty, every value >= 1
  std::uint64_t cardinality() const;
  MemControllerConfig config_at(std::uint64_t index, const MemControllerConfig& base) const;
};

struct RankedConfig {
  std::uint64_t grid_index = 0;
  MemControllerConfig config;
  double t_avg_ns = 0.0;  // unweighted mean of per-dataset total times
  std::uint64_t resource_bits = 0;
  std::vector<double> per_dataset_ns;
};

struct ExploreReport {
  RankedConfig best;
  std::vector<RankedConfig> ranking;  // feasible configs, best first
  std::uint64_t grid_cardinality = 0;
  std::uint64_t feasible_count = 0;
  std::uint64_t infeasible_count = 0;
  bool modular = false;  // heuristic search, not exhaustive
  int passes = 1;
};

// Exhaustive sweep. Every feasible configuration is simulated against every
// dataset trace; ranking order is (t_avg, resource bits, grid index).
// `threads` caps concurrent evaluations (0 or 1 = sequential); results are
// identical regardless. Throws InfeasibleError when nothing fits.
ExploreReport explore(const std::vector<AccessTrace>& datasets, const ParamGrid& grid,
                      const MemControllerConfig& base, const FpgaResources& fpga,
                      const DramModel& dram, unsigned threads = 0);

// Module-by-module coordinate descent: optimizes the cache lists first with
// the other engines at their list-front defaults, then the DMA lists, then
// the remapper lists, `passes` times. Cheaper than the exhaustive sweep and
// flagged as heuristic; its best t_avg is never below the exhaustive one.
ExploreReport explore_modular(const std::vector<AccessTrace>& datasets, const ParamGrid& grid,
                              const MemControllerConfig& base, const FpgaResources& fpga,
                              const DramModel& dram, unsigned threads = 0, int passes = 1);

}  // namespace tmc
