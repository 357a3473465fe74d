#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "tensormc/trace.hpp"

namespace tmc {

enum class EngineKind { Cache = 0, Dma = 1, Remapper = 2, None = 3 };

const char* engine_kind_name(EngineKind e);
std::optional<EngineKind> engine_kind_from_name(std::string_view name);

struct CacheConfig {
  std::uint64_t line_width_bytes = 64;  // power of two
  std::uint64_t num_lines = 256;
  std::uint64_t associativity = 4;  // divides num_lines; == num_lines is fully associative
  double hit_time_ns = 1.0;
  // When > 1 and factor regions are supplied, the sets are split into this
  // many groups and each factor matrix is confined to one group.
  std::uint32_t shared_factor_matrices = 1;
};

struct DmaConfig {
  std::uint32_t num_dmas = 1;
  std::uint32_t buffers_per_dma = 2;
  std::uint64_t buffer_size_bytes = 4096;
  std::uint32_t element_width_bytes = 4;  // element-wise transfer granule
};

struct RemapperConfig {
  std::uint64_t dma_buffer_size_bytes = 4096;
  std::uint32_t tensor_element_width_bytes = 16;
  std::uint64_t max_address_pointers = 1024;
};

// Which engine services each access kind. Defaults: random factor-row loads
// hit the cache; stream traffic and element-wise partial stores go to the
// DMA engine; tensor scatter stores and pointer traffic go to the remapper.
struct RoutingTable {
  std::array<EngineKind, kNumAccessKinds> route;
  RoutingTable();
  EngineKind& operator[](AccessKind k) { return route[static_cast<std::size_t>(k)]; }
  EngineKind operator[](AccessKind k) const { return route[static_cast<std::size_t>(k)]; }
};

struct AddressRegion {
  std::uint64_t base = 0;
  std::uint64_t size = 0;
};

struct MemControllerConfig {
  CacheConfig cache;
  DmaConfig dma;
  RemapperConfig remapper;
  RoutingTable routing;
  // Factor-matrix regions of the trace's address map, in mode order. Only
  // consulted when cache.shared_factor_matrices > 1.
  std::vector<AddressRegion> factor_regions;

  void validate() const;  // throws ValidationError
};

struct DramModel {
  std::uint64_t row_buffer_size_bytes = 8192;
  double t_row_hit_ns = 25.0;
  double t_row_miss_ns = 75.0;
  std::uint64_t burst_bytes = 64;
  double stream_bandwidth_bytes_per_ns = 16.0;

  void validate() const;
};

struct EngineReport {
  double busy_ns = 0.0;
  double completion_ns = 0.0;
  std::uint64_t events = 0;
  std::uint64_t bytes_moved = 0;
};

struct SimReport {
  EngineReport cache;
  EngineReport dma;
  EngineReport remapper;
  double total_time_ns = 0.0;  // engines run concurrently: max completion
  std::uint64_t cache_hits = 0;
  std::uint64_t cache_misses = 0;
  std::uint64_t dma_transfers = 0;
  std::uint64_t remapper_element_stores = 0;
  std::uint64_t remapper_pointer_events = 0;
  MemControllerConfig config;  // effective configuration echo
  DramModel dram;
};

struct EventTiming {
  std::uint64_t sequence = 0;
  EngineKind engine = EngineKind::None;
  double start_ns = 0.0;
  double end_ns = 0.0;
};

// Trace-driven run. Each engine services its events in trace order as an
// independent server (weak consistency: same-address ordering across engines
// is not modeled). DMA channels split the engine's queue round-robin.
SimReport simulate(const AccessTrace& trace, const MemControllerConfig& config,
                   const DramModel& dram, std::vector<EventTiming>* timings = nullptr);

// Set-associative LRU lookup state. set = (address / line_width) mod num_sets;
// an access spanning lines costs one lookup per touched line.
class CacheModel {
 public:
  CacheModel(const CacheConfig& config, const std::vector<AddressRegion>& factor_regions);

  struct Outcome {
    std::uint64_t hits = 0;
    std::uint64_t misses = 0;
    double latency_ns = 0.0;
  };
  Outcome access(std::uint64_t address, std::uint64_t size, const DramModel& dram);

  std::uint64_t num_sets() const { return num_sets_; }

 private:
  struct Way {
    std::uint64_t line = 0;
    std::uint64_t stamp = 0;
    bool valid = false;
  };
  std::uint64_t set_of_line(std::uint64_t line, std::uint64_t address) const;

  CacheConfig config_;
  std::vector<AddressRegion> regions_;
  std::uint64_t num_sets_ = 1;
  std::uint64_t group_count_ = 1;
  std::uint64_t sets_per_group_ = 1;
  std::uint64_t clock_ = 0;
  std::vector<Way> ways_;  // num_sets * associativity
};

// Open-row latch of one memory channel.
struct RowBuffer {
  std::optional<std::uint64_t> open_row;
  double access(std::uint64_t address, const DramModel& dram);
};

// Latency of one bulk transfer staged through `num_buffers` buffers of
// `chunk_bytes`: each chunk pays a row activation plus burst-quantized
// streaming, with activations overlapping earlier chunks' data phases when
// more than one buffer is available.
double stream_transfer_latency(std::uint64_t length, std::uint64_t chunk_bytes,
                               std::uint32_t num_buffers, const DramModel& dram);

// Row-buffer-aware cost of touching size/element_width consecutive elements.
double elementwise_latency(std::uint64_t address, std::uint64_t size,
                           std::uint64_t element_width, RowBuffer& row, const DramModel& dram);

}  // namespace tmc
