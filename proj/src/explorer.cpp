#include "tensormc/explorer.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <functional>
#include <thread>
#include <unordered_map>

#include "tensormc/errors.hpp"

namespace tmc {

namespace {

std::uint64_t floor_log2(std::uint64_t v) {
  std::uint64_t r = 0;
  while (v >>= 1) ++r;
  return r;
}

std::uint64_t ceil_log2(std::uint64_t v) {
  const std::uint64_t f = floor_log2(v);
  return (std::uint64_t(1) << f) == v ? f : f + 1;
}

constexpr int kNumFields = 8;

std::array<std::uint64_t, kNumFields> grid_sizes(const ParamGrid& g) {
  return {g.cache_line_width_bytes.size(), g.cache_num_lines.size(),
          g.cache_associativity.size(),    g.dma_num_dmas.size(),
          g.dma_buffers_per_dma.size(),    g.dma_buffer_size_bytes.size(),
          g.remapper_buffer_size_bytes.size(), g.remapper_max_pointers.size()};
}

std::uint64_t index_of_positions(const std::array<std::uint64_t, kNumFields>& pos,
                                 const std::array<std::uint64_t, kNumFields>& sizes) {
  std::uint64_t index = 0;
  for (int f = 0; f < kNumFields; ++f) index = index * sizes[f] + pos[f];
  return index;
}

MemControllerConfig config_from_positions(const ParamGrid& g,
                                          const std::array<std::uint64_t, kNumFields>& pos,
                                          const MemControllerConfig& base) {
  MemControllerConfig c = base;
  c.cache.line_width_bytes = g.cache_line_width_bytes[pos[0]];
  c.cache.num_lines = g.cache_num_lines[pos[1]];
  c.cache.associativity = g.cache_associativity[pos[2]];
  c.dma.num_dmas = g.dma_num_dmas[pos[3]];
  c.dma.buffers_per_dma = g.dma_buffers_per_dma[pos[4]];
  c.dma.buffer_size_bytes = g.dma_buffer_size_bytes[pos[5]];
  c.remapper.dma_buffer_size_bytes = g.remapper_buffer_size_bytes[pos[6]];
  c.remapper.max_address_pointers = g.remapper_max_pointers[pos[7]];
  return c;
}

struct Eval {
  bool feasible = false;
  double t_avg = 0.0;
  std::uint64_t resource = 0;
  std::vector<double> per_dataset;
};

Eval evaluate_config(const MemControllerConfig& cfg, const std::vector<AccessTrace>& datasets,
                     const FpgaResources& fpga, const DramModel& dram) {
  Eval ev;
  try {
    cfg.validate();
  } catch (const ValidationError&) {
    return ev;
  }
  if (!fits(cfg, fpga)) return ev;
  ev.per_dataset.reserve(datasets.size());
  double sum = 0.0;
  try {
    for (const auto& d : datasets) {
      const SimReport r = simulate(d, cfg, dram);
      ev.per_dataset.push_back(r.total_time_ns);
      sum += r.total_time_ns;
    }
  } catch (const ValidationError&) {
    ev.per_dataset.clear();
    return ev;
  }
  ev.t_avg = sum / double(datasets.size());
  ev.resource = resource_usage(cfg).total();
  ev.feasible = true;
  return ev;
}

// Evaluates evals[i] for every index in `work`, on up to `threads` threads.
// Slots are disjoint, so workers need no synchronization beyond the cursor.
void evaluate_many(const std::vector<std::uint64_t>& work,
                   const std::function<Eval(std::uint64_t)>& eval_at, std::vector<Eval>& evals,
                   unsigned threads) {
  if (threads <= 1 || work.size() <= 1) {
    for (std::size_t i = 0; i < work.size(); ++i) evals[i] = eval_at(work[i]);
    return;
  }
  std::atomic<std::size_t> cursor{0};
  const unsigned n = unsigned(std::min<std::size_t>(threads, work.size()));
  std::vector<std::thread> pool;
  pool.reserve(n);
  for (unsigned t = 0; t < n; ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = cursor.fetch_add(1)) < work.size();) evals[i] = eval_at(work[i]);
    });
  for (auto& th : pool) th.join();
}

bool ranked_before(const RankedConfig& a, const RankedConfig& b) {
  if (a.t_avg_ns != b.t_avg_ns) return a.t_avg_ns < b.t_avg_ns;
  if (a.resource_bits != b.resource_bits) return a.resource_bits < b.resource_bits;
  return a.grid_index < b.grid_index;
}

void check_inputs(const std::vector<AccessTrace>& datasets, const ParamGrid& grid,
                  const FpgaResources& fpga, const DramModel& dram) {
  if (datasets.empty()) throw ValidationError("explorer needs at least one dataset trace");
  grid.validate();
  fpga.validate();
  dram.validate();
}

}  // namespace

void FpgaResources::validate() const {
  if (bram_bits < 1 || uram_bits < 1)
    throw ValidationError("on-chip memory budgets must be positive");
  if (memory_interface_width_bits < 1)
    throw ValidationError("memory interface width must be positive");
}

ResourceUsage resource_usage(const MemControllerConfig& config) {
  ResourceUsage u;
  const std::uint64_t lw = config.cache.line_width_bytes;
  const std::uint64_t sets = config.cache.num_lines / std::max<std::uint64_t>(
                                                          config.cache.associativity, 1);
  const std::uint64_t offset_bits = floor_log2(lw);
  const std::uint64_t index_bits = ceil_log2(std::max<std::uint64_t>(sets, 1));
  const std::uint64_t kAddressBits = 40;
  const std::uint64_t tag_bits =
      kAddressBits > offset_bits + index_bits ? kAddressBits - offset_bits - index_bits : 0;
  u.cache_bits = config.cache.num_lines * (lw * 8 + tag_bits + 1);
  u.dma_bits = std::uint64_t(config.dma.num_dmas) * config.dma.buffers_per_dma *
               config.dma.buffer_size_bytes * 8;
  u.remapper_buffer_bits = config.remapper.dma_buffer_size_bytes * 8;
  u.pointer_bits = config.remapper.max_address_pointers * 32;
  return u;
}

bool fits(const MemControllerConfig& config, const FpgaResources& fpga) {
  const ResourceUsage u = resource_usage(config);
  if (fpga.pooled) return u.total() <= fpga.bram_bits + fpga.uram_bits;
  return u.cache_bits <= fpga.bram_bits &&
         u.dma_bits + u.remapper_buffer_bits + u.pointer_bits <= fpga.uram_bits;
}

void ParamGrid::validate() const {
  const auto check64 = [](const std::vector<std::uint64_t>& v, const char* what) {
    if (v.empty()) throw ValidationError(std::string(what) + " candidate list is empty");
    for (auto x : v)
      if (x < 1) throw ValidationError(std::string(what) + " candidates must be at least 1");
  };
  const auto check32 = [](const std::vector<std::uint32_t>& v, const char* what) {
    if (v.empty()) throw ValidationError(std::string(what) + " candidate list is empty");
    for (auto x : v)
      if (x < 1) throw ValidationError(std::string(what) + " candidates must be at least 1");
  };
  check64(cache_line_width_bytes, "cache line width");
  check64(cache_num_lines, "cache line count");
  check64(cache_associativity, "cache associativity");
  check32(dma_num_dmas, "DMA count");
  check32(dma_buffers_per_dma, "DMA buffer count");
  check64(dma_buffer_size_bytes, "DMA buffer size");
  check64(remapper_buffer_size_bytes, "remapper buffer size");
  check64(remapper_max_pointers, "remapper pointer count");
}

std::uint64_t ParamGrid::cardinality() const {
  unsigned __int128 card = 1;
  for (auto n : grid_sizes(*this)) {
    card *= n;
    if (card > UINT64_MAX) throw ValidationError("grid cardinality overflows 64 bits");
  }
  return std::uint64_t(card);
}

MemControllerConfig ParamGrid::config_at(std::uint64_t index,
                                         const MemControllerConfig& base) const {
  const auto sizes = grid_sizes(*this);
  std::array<std::uint64_t, kNumFields> pos{};
  for (int f = kNumFields - 1; f >= 0; --f) {
    pos[f] = index % sizes[f];
    index /= sizes[f];
  }
  if (index != 0) throw ValidationError("grid index out of range");
  return config_from_positions(*this, pos, base);
}

ExploreReport explore(const std::vector<AccessTrace>& datasets, const ParamGrid& grid,
                      const MemControllerConfig& base, const FpgaResources& fpga,
                      const DramModel& dram, unsigned threads) {
  check_inputs(datasets, grid, fpga, dram);
  const std::uint64_t card = grid.cardinality();

  std::vector<std::uint64_t> work(card);
  for (std::uint64_t i = 0; i < card; ++i) work[i] = i;
  std::vector<Eval> evals(card);
  evaluate_many(
      work,
      [&](std::uint64_t idx) {
        return evaluate_config(grid.config_at(idx, base), datasets, fpga, dram);
      },
      evals, threads);

  ExploreReport report;
  report.grid_cardinality = card;
  for (std::uint64_t i = 0; i < card; ++i) {
    if (!evals[i].feasible) {
      report.infeasible_count++;
      continue;
    }
    report.feasible_count++;
    report.ranking.push_back({i, grid.config_at(i, base), evals[i].t_avg, evals[i].resource,
                              std::move(evals[i].per_dataset)});
  }
  if (report.ranking.empty())
    throw InfeasibleError("no configuration in the grid fits the device budget");
  std::stable_sort(report.ranking.begin(), report.ranking.end(), ranked_before);
  report.best = report.ranking.front();
  return report;
}

ExploreReport explore_modular(const std::vector<AccessTrace>& datasets, const ParamGrid& grid,
                              const MemControllerConfig& base, const FpgaResources& fpga,
                              const DramModel& dram, unsigned threads, int passes) {
  check_inputs(datasets, grid, fpga, dram);
  if (passes < 1) throw ValidationError("passes must be at least 1");
  grid.cardinality();  // range check only

  const auto sizes = grid_sizes(grid);
  // Engine field groups: cache, DMA, remapper, optimized in this order while
  // the other engines stay pinned at the current position.
  static const std::array<std::vector<int>, 3> kGroups = {{{0, 1, 2}, {3, 4, 5}, {6, 7}}};

  std::array<std::uint64_t, kNumFields> current{};  // list-front defaults
  std::unordered_map<std::uint64_t, Eval> seen;

  for (int pass = 0; pass < passes; ++pass) {
    for (const auto& group : kGroups) {
      std::uint64_t combos = 1;
      for (int f : group) combos *= sizes[f];

      std::vector<std::array<std::uint64_t, kNumFields>> candidates;
      candidates.reserve(combos);
      for (std::uint64_t c = 0; c < combos; ++c) {
        auto pos = current;
        std::uint64_t rem = c;
        for (auto it = group.rbegin(); it != group.rend(); ++it) {
          pos[*it] = rem % sizes[*it];
          rem /= sizes[*it];
        }
        candidates.push_back(pos);
      }

      std::vector<std::uint64_t> fresh;
      for (const auto& pos : candidates) {
        const std::uint64_t idx = index_of_positions(pos, sizes);
        if (!seen.count(idx)) {
          seen.emplace(idx, Eval{});
          fresh.push_back(idx);
        }
      }
      std::vector<Eval> results(fresh.size());
      evaluate_many(
          fresh,
          [&](std::uint64_t idx) {
            return evaluate_config(grid.config_at(idx, base), datasets, fpga, dram);
          },
          results, threads);
      for (std::size_t i = 0; i < fresh.size(); ++i) seen[fresh[i]] = std::move(results[i]);

      bool have_best = false;
      std::uint64_t best_idx = 0;
      std::array<std::uint64_t, kNumFields> best_pos{};
      for (const auto& pos : candidates) {
        const std::uint64_t idx = index_of_positions(pos, sizes);
        const Eval& ev = seen[idx];
        if (!ev.feasible) continue;
        if (!have_best) {
          have_best = true;
          best_idx = idx;
          best_pos = pos;
          continue;
        }
        const Eval& cur = seen[best_idx];
        if (ev.t_avg < cur.t_avg ||
            (ev.t_avg == cur.t_avg &&
             (ev.resource < cur.resource || (ev.resource == cur.resource && idx < best_idx)))) {
          best_idx = idx;
          best_pos = pos;
        }
      }
      if (have_best) current = best_pos;
    }
  }

  ExploreReport report;
  report.modular = true;
  report.passes = passes;
  // Counts describe the search actually performed, so the cardinality here is
  // the number of distinct configurations evaluated.
  report.grid_cardinality = seen.size();
  for (const auto& [idx, ev] : seen) {
    if (!ev.feasible) {
      report.infeasible_count++;
      continue;
    }
    report.feasible_count++;
    report.ranking.push_back(
        {idx, grid.config_at(idx, base), ev.t_avg, ev.resource, ev.per_dataset});
  }
  if (report.ranking.empty())
    throw InfeasibleError("no configuration in the grid fits the device budget");
  std::stable_sort(report.ranking.begin(), report.ranking.end(), ranked_before);
  report.best = report.ranking.front();
  return report;
}

}  // namespace tmc
