#pragma once

#include <cstdint>

#include "tensormc/kernels.hpp"
#include "tensormc/tensor.hpp"
#include "tensormc/trace.hpp"

namespace tmc {

// Analytical model of MTTKRP work and external-memory traffic. The access
// unit is one tensor or matrix element; a factor-row access of rank R counts
// as R element accesses. Byte totals are derived separately from the
// configured element widths.

// N * nnz * rank per mode, every variant.
std::uint64_t predicted_computations(int num_modes, Index nnz, int rank);

// Element-granular traffic for the two kernel directions.
//   OutputOrder: nnz + (N-1) * nnz * R + I_out * R
//   InputOrder:  nnz + N * nnz * R + I_in * R
// boundary_mode_length is I_out for OutputOrder and I_in for InputOrder. The
// input-order total covers the once-per-row loads of the sorted input factor,
// the per-nonzero loads of the remaining input factors, and the partial-sum
// store plus reload; the final output write-back is accounted outside it.
std::uint64_t predicted_accesses(MttkrpVariant v, int num_modes, Index nnz, int rank,
                                 Index boundary_mode_length);

// Remap cost relative to the output-order kernel: 2 * nnz extra accesses,
// i.e. a ratio of 2*nnz / (nnz + (N-1)*nnz*R + I_out*R), which the model
// upper-bounds by 2 / (1 + (N-1) * R).
double remap_overhead_ratio(int num_modes, int rank);

struct CostPrediction {
  MttkrpVariant variant = MttkrpVariant::OutputOrder;
  std::uint64_t total_computations = 0;
  std::uint64_t total_accesses = 0;  // element granular
  std::uint64_t partial_sum_elements = 0;
  double remap_overhead = 0.0;  // in [0, 2]; nonzero only for Remap
  std::uint64_t total_bytes = 0;
};

CostPrediction predict(MttkrpVariant v, int num_modes, Index nnz, int rank, Index i_out,
                       Index i_in, const ElementWidths& widths = {});

// The element-granular total a kernel run actually produced, folding the
// counters with the same per-variant accounting as predicted_accesses. For
// Remap the remap pass's tensor load and store are included (the + 2 * nnz
// overhead); pointer spills move 32-bit table entries, not elements, and are
// reported separately.
std::uint64_t measured_element_accesses(const AccessCounters& c, MttkrpVariant v, int rank);

struct Reconciliation {
  std::uint64_t measured_accesses = 0;
  std::uint64_t predicted_accesses = 0;
  bool accesses_match = false;
  std::uint64_t measured_fma = 0;
  std::uint64_t predicted_fma = 0;
  bool fma_match = false;

  bool match() const { return accesses_match && fma_match; }
};

Reconciliation reconcile(const AccessCounters& c, MttkrpVariant v, int num_modes, Index nnz,
                         int rank, Index i_out, Index i_in);

}  // namespace tmc
