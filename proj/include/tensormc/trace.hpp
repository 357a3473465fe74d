#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tensormc/tensor.hpp"

namespace tmc {

// External-memory access classes. Stream kinds move contiguous data through a
// DMA-style buffer; element-wise kinds touch scattered addresses one element
// at a time; pointer kinds move 32-bit address-table entries.
enum class AccessKind : std::uint32_t {
  TensorLoadStream = 0,
  TensorStoreElementwise = 1,
  FactorRowLoadRandom = 2,
  FactorRowStoreStream = 3,
  PartialStoreElementwise = 4,
  PartialLoadStream = 5,
  PointerLoad = 6,
  PointerStore = 7,
};

inline constexpr int kNumAccessKinds = 8;

const char* access_kind_name(AccessKind kind);
std::optional<AccessKind> access_kind_from_name(std::string_view name);
bool access_kind_is_elementwise(AccessKind kind);

struct AccessEvent {
  std::uint64_t sequence = 0;
  AccessKind kind = AccessKind::TensorLoadStream;
  std::uint64_t address = 0;
  std::uint64_t size = 0;  // bytes, > 0

  bool operator==(const AccessEvent&) const = default;
};

struct AccessTrace {
  std::vector<AccessEvent> events;

  void append(AccessKind kind, std::uint64_t address, std::uint64_t size) {
    events.push_back({next_sequence_++, kind, address, size});
  }
  std::uint64_t size() const { return events.size(); }
  std::uint64_t total_bytes() const;

 private:
  std::uint64_t next_sequence_ = 0;
};

// Per-kind event tallies plus the fused-multiply-add work count. One FMA unit
// is one (nonzero, rank, mode-operand) triple, so every MTTKRP variant of an
// N-mode tensor performs exactly N * nnz * rank units per mode.
struct AccessCounters {
  std::uint64_t tensor_element_loads = 0;
  std::uint64_t tensor_element_stores = 0;
  std::uint64_t factor_row_loads = 0;
  std::uint64_t factor_row_stores = 0;
  std::uint64_t partial_row_stores = 0;
  std::uint64_t partial_row_loads = 0;
  std::uint64_t pointer_loads = 0;
  std::uint64_t pointer_stores = 0;
  std::uint64_t fma_count = 0;

  // Event tallies recomputed from a trace; fma_count is left zero.
  static AccessCounters recount(const AccessTrace& trace);
  bool same_event_counts(const AccessCounters& other) const;
  AccessCounters& operator+=(const AccessCounters& other);
};

// Flat byte-address layout of one kernel run: tensor region (original copy
// then remapped copy), factor regions in mode order, partial-sum region,
// address-pointer region. Region bases are burst aligned.
struct AddressMap {
  static constexpr std::uint64_t kAlignment = 64;

  int num_modes = 0;
  int rank = 0;
  ElementWidths widths;
  std::uint64_t tensor_base = 0;
  std::uint64_t remapped_base = 0;
  std::vector<std::uint64_t> factor_base;
  std::vector<std::uint64_t> factor_size;
  std::uint64_t partial_base = 0;
  std::uint64_t pointer_base = 0;
  std::uint64_t total_bytes = 0;

  static AddressMap build(const std::vector<Index>& mode_lengths, Index nnz, int rank,
                          const ElementWidths& widths = {});

  std::uint64_t tensor_element(Index z) const {
    return tensor_base + std::uint64_t(z) * widths.tensor_element_bytes(num_modes);
  }
  std::uint64_t remapped_element(Index z) const {
    return remapped_base + std::uint64_t(z) * widths.tensor_element_bytes(num_modes);
  }
  std::uint64_t factor_row(int mode, Index row) const {
    return factor_base[mode] + std::uint64_t(row) * rank * widths.matrix_element_bytes;
  }
  std::uint64_t partial_row(Index slot) const {
    return partial_base + std::uint64_t(slot) * rank * widths.matrix_element_bytes;
  }
  std::uint64_t pointer_entry(Index coordinate) const {
    return pointer_base + std::uint64_t(coordinate) * 4;
  }
};

// Line-oriented text form: "sequence kind address size", all decimal. Lines
// starting with '#' are comments.
void write_trace_text(const AccessTrace& trace, std::ostream& out);
AccessTrace read_trace_text(std::istream& in);

// Compact binary form: 8-byte magic, 8-byte event count, then four
// little-endian 8-byte fields per event (sequence, kind, address, size).
void write_trace_binary(const AccessTrace& trace, std::ostream& out);
AccessTrace read_trace_binary(std::istream& in);

void write_trace_text_file(const AccessTrace& trace, const std::string& path);
AccessTrace read_trace_text_file(const std::string& path);
void write_trace_binary_file(const AccessTrace& trace, const std::string& path);
AccessTrace read_trace_binary_file(const std::string& path);

}  // namespace tmc
