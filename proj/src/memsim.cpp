#include "tensormc/memsim.hpp"

#include <algorithm>
#include <cmath>

#include "tensormc/errors.hpp"

namespace tmc {

namespace {

constexpr std::array<const char*, 4> kEngineNames = {"cache", "dma", "remapper", "none"};

bool is_power_of_two(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

}  // namespace

const char* engine_kind_name(EngineKind e) { return kEngineNames[static_cast<int>(e)]; }

std::optional<EngineKind> engine_kind_from_name(std::string_view name) {
  for (int i = 0; i < 4; ++i)
    if (name == kEngineNames[i]) return static_cast<EngineKind>(i);
  return std::nullopt;
}

RoutingTable::RoutingTable() {
  route[static_cast<std::size_t>(AccessKind::TensorLoadStream)] = EngineKind::Dma;
  route[static_cast<std::size_t>(AccessKind::TensorStoreElementwise)] = EngineKind::Remapper;
  route[static_cast<std::size_t>(AccessKind::FactorRowLoadRandom)] = EngineKind::Cache;
  route[static_cast<std::size_t>(AccessKind::FactorRowStoreStream)] = EngineKind::Dma;
  route[static_cast<std::size_t>(AccessKind::PartialStoreElementwise)] = EngineKind::Dma;
  route[static_cast<std::size_t>(AccessKind::PartialLoadStream)] = EngineKind::Dma;
  route[static_cast<std::size_t>(AccessKind::PointerLoad)] = EngineKind::Remapper;
  route[static_cast<std::size_t>(AccessKind::PointerStore)] = EngineKind::Remapper;
}

void MemControllerConfig::validate() const {
  if (!is_power_of_two(cache.line_width_bytes))
    throw ValidationError("cache line width must be a power of two");
  if (cache.num_lines < 1) throw ValidationError("cache needs at least one line");
  if (cache.associativity < 1 || cache.associativity > cache.num_lines ||
      cache.num_lines % cache.associativity != 0)
    throw ValidationError("cache associativity must divide the line count");
  if (cache.hit_time_ns < 0) throw ValidationError("cache hit time must be non-negative");
  if (cache.shared_factor_matrices < 1)
    throw ValidationError("shared_factor_matrices must be at least 1");
  std::uint64_t sets = cache.num_lines / cache.associativity;
  if (cache.shared_factor_matrices > sets)
    throw ValidationError("cannot split the cache into more groups than sets");
  if (dma.num_dmas < 1) throw ValidationError("need at least one DMA channel");
  if (dma.buffers_per_dma < 1) throw ValidationError("need at least one DMA buffer");
  if (!is_power_of_two(dma.buffer_size_bytes))
    throw ValidationError("DMA buffer size must be a power of two");
  if (dma.element_width_bytes < 1) throw ValidationError("DMA element width must be positive");
  if (!is_power_of_two(remapper.dma_buffer_size_bytes))
    throw ValidationError("remapper buffer size must be a power of two");
  if (remapper.tensor_element_width_bytes < 1)
    throw ValidationError("remapper element width must be positive");
  if (remapper.max_address_pointers < 1)
    throw ValidationError("remapper needs at least one address pointer");
}

void DramModel::validate() const {
  if (row_buffer_size_bytes < 1 || burst_bytes < 1)
    throw ValidationError("row buffer and burst sizes must be positive");
  if (burst_bytes > row_buffer_size_bytes)
    throw ValidationError("burst cannot exceed the row buffer");
  if (t_row_hit_ns <= 0 || t_row_miss_ns < t_row_hit_ns)
    throw ValidationError("need t_row_miss >= t_row_hit > 0");
  if (stream_bandwidth_bytes_per_ns <= 0)
    throw ValidationError("stream bandwidth must be positive");
}

CacheModel::CacheModel(const CacheConfig& config, const std::vector<AddressRegion>& regions)
    : config_(config), regions_(regions) {
  num_sets_ = config.num_lines / config.associativity;
  group_count_ = 1;
  sets_per_group_ = num_sets_;
  if (config.shared_factor_matrices > 1 && !regions_.empty()) {
    group_count_ = std::min<std::uint64_t>(config.shared_factor_matrices, num_sets_);
    sets_per_group_ = num_sets_ / group_count_;
  }
  ways_.assign(num_sets_ * config.associativity, Way{});
}

std::uint64_t CacheModel::set_of_line(std::uint64_t line, std::uint64_t address) const {
  if (group_count_ == 1) return line % num_sets_;
  std::uint64_t group = 0;
  for (std::size_t i = 0; i < regions_.size(); ++i) {
    if (address >= regions_[i].base && address < regions_[i].base + regions_[i].size) {
      group = i % group_count_;
      break;
    }
  }
  return group * sets_per_group_ + line % sets_per_group_;
}

CacheModel::Outcome CacheModel::access(std::uint64_t address, std::uint64_t size,
                                       const DramModel& dram) {
  if (size == 0) throw ValidationError("zero-size cache access");
  Outcome out;
  const std::uint64_t lw = config_.line_width_bytes;
  const std::uint64_t first = address / lw;
  const std::uint64_t last = (address + size - 1) / lw;
  const double miss_ns =
      dram.t_row_miss_ns + double(lw) / dram.stream_bandwidth_bytes_per_ns;
  for (std::uint64_t line = first; line <= last; ++line) {
    const std::uint64_t set = set_of_line(line, address);
    Way* base = &ways_[set * config_.associativity];
    Way* hit = nullptr;
    for (std::uint64_t w = 0; w < config_.associativity; ++w)
      if (base[w].valid && base[w].line == line) {
        hit = &base[w];
        break;
      }
    ++clock_;
    if (hit) {
      hit->stamp = clock_;
      out.hits++;
      out.latency_ns += config_.hit_time_ns;
      continue;
    }
    Way* victim = &base[0];
    for (std::uint64_t w = 0; w < config_.associativity; ++w) {
      if (!base[w].valid) {
        victim = &base[w];
        break;
      }
      if (base[w].stamp < victim->stamp) victim = &base[w];
    }
    victim->valid = true;
    victim->line = line;
    victim->stamp = clock_;
    out.misses++;
    out.latency_ns += miss_ns;
  }
  return out;
}

double RowBuffer::access(std::uint64_t address, const DramModel& dram) {
  const std::uint64_t row = address / dram.row_buffer_size_bytes;
  if (open_row && *open_row == row) return dram.t_row_hit_ns;
  open_row = row;
  return dram.t_row_miss_ns;
}

double stream_transfer_latency(std::uint64_t length, std::uint64_t chunk_bytes,
                               std::uint32_t num_buffers, const DramModel& dram) {
  if (length == 0) throw ValidationError("zero-length stream transfer");
  if (chunk_bytes == 0 || num_buffers == 0)
    throw ValidationError("stream transfer needs a buffer");
  const std::uint64_t chunks = (length + chunk_bytes - 1) / chunk_bytes;

  // Two stages per chunk: row activation, then burst-quantized data. With B
  // buffers a chunk's activation may overlap earlier data phases, but at
  // most B chunks are in flight.
  std::vector<double> done(chunks, 0.0);
  double act_free = 0.0;   // activation engine availability
  double data_free = 0.0;  // data bus availability
  for (std::uint64_t i = 0; i < chunks; ++i) {
    const std::uint64_t bytes = std::min<std::uint64_t>(chunk_bytes, length - i * chunk_bytes);
    const std::uint64_t bursts = (bytes + dram.burst_bytes - 1) / dram.burst_bytes;
    const double data_ns =
        double(bursts) * double(dram.burst_bytes) / dram.stream_bandwidth_bytes_per_ns;
    double start = act_free;
    if (i >= num_buffers) start = std::max(start, done[i - num_buffers]);
    const double act_end = start + dram.t_row_miss_ns;
    const double data_end = std::max(act_end, data_free) + data_ns;
    act_free = act_end;
    data_free = data_end;
    done[i] = data_end;
  }
  return done[chunks - 1];
}

double elementwise_latency(std::uint64_t address, std::uint64_t size,
                           std::uint64_t element_width, RowBuffer& row, const DramModel& dram) {
  if (size == 0) throw ValidationError("zero-size element-wise transfer");
  if (element_width == 0) throw ValidationError("element width must be positive");
  const std::uint64_t elements = (size + element_width - 1) / element_width;
  double total = 0.0;
  for (std::uint64_t k = 0; k < elements; ++k)
    total += row.access(address + k * element_width, dram);
  return total;
}

SimReport simulate(const AccessTrace& trace, const MemControllerConfig& config,
                   const DramModel& dram, std::vector<EventTiming>* timings) {
  config.validate();
  dram.validate();

  SimReport report;
  report.config = config;
  report.dram = dram;

  CacheModel cache(config.cache, config.factor_regions);
  double cache_completion = 0.0;

  std::vector<double> dma_completion(config.dma.num_dmas, 0.0);
  std::vector<RowBuffer> dma_rows(config.dma.num_dmas);
  std::uint64_t dma_rr = 0;

  double remap_completion = 0.0;
  RowBuffer remap_row;

  if (timings) timings->reserve(trace.events.size());

  for (std::size_t i = 1; i < trace.events.size(); ++i)
    if (trace.events[i].sequence <= trace.events[i - 1].sequence)
      throw ValidationError("trace sequence numbers must be strictly increasing");

  for (const auto& e : trace.events) {
    const EngineKind engine = config.routing[e.kind];
    double start = 0.0, end = 0.0;
    switch (engine) {
      case EngineKind::Cache: {
        auto out = cache.access(e.address, e.size, dram);
        start = cache_completion;
        end = start + out.latency_ns;
        cache_completion = end;
        report.cache.busy_ns += out.latency_ns;
        report.cache.events++;
        report.cache.bytes_moved += e.size;
        report.cache_hits += out.hits;
        report.cache_misses += out.misses;
        break;
      }
      case EngineKind::Dma: {
        const std::uint64_t ch = dma_rr++ % config.dma.num_dmas;
        double latency;
        if (access_kind_is_elementwise(e.kind))
          latency = elementwise_latency(e.address, e.size, config.dma.element_width_bytes,
                                        dma_rows[ch], dram);
        else
          latency = stream_transfer_latency(e.size, config.dma.buffer_size_bytes,
                                            config.dma.buffers_per_dma, dram);
        start = dma_completion[ch];
        end = start + latency;
        dma_completion[ch] = end;
        report.dma.busy_ns += latency;
        report.dma.events++;
        report.dma.bytes_moved += e.size;
        report.dma_transfers++;
        break;
      }
      case EngineKind::Remapper: {
        double latency;
        if (e.kind == AccessKind::PointerLoad || e.kind == AccessKind::PointerStore) {
          latency = remap_row.access(e.address, dram);
          report.remapper_pointer_events++;
        } else if (access_kind_is_elementwise(e.kind)) {
          const std::uint64_t width = e.kind == AccessKind::TensorStoreElementwise
                                          ? config.remapper.tensor_element_width_bytes
                                          : config.dma.element_width_bytes;
          latency = elementwise_latency(e.address, e.size, width, remap_row, dram);
        } else {
          latency = stream_transfer_latency(e.size, config.remapper.dma_buffer_size_bytes, 1,
                                            dram);
        }
        if (e.kind == AccessKind::TensorStoreElementwise) report.remapper_element_stores++;
        start = remap_completion;
        end = start + latency;
        remap_completion = end;
        report.remapper.busy_ns += latency;
        report.remapper.events++;
        report.remapper.bytes_moved += e.size;
        break;
      }
      case EngineKind::None:
        throw ValidationError(std::string("no engine routes access kind ") +
                              access_kind_name(e.kind));
    }
    if (timings) timings->push_back({e.sequence, engine, start, end});
  }

  report.cache.completion_ns = cache_completion;
  report.dma.completion_ns = *std::max_element(dma_completion.begin(), dma_completion.end());
  report.remapper.completion_ns = remap_completion;
  report.total_time_ns = std::max(
      {report.cache.completion_ns, report.dma.completion_ns, report.remapper.completion_ns});
  return report;
}

}  // namespace tmc
