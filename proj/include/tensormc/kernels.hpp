#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "tensormc/tensor.hpp"
#include "tensormc/trace.hpp"

namespace tmc {

// coo: reference nonzero-list traversal, no instrumentation.
// a1 (output order): tensor sorted by the output mode; each output row is
//     accumulated on chip and written back once.
// a2 (input order): tensor sorted by an input mode; per-nonzero partial rows
//     are stored to memory and re-read grouped by output coordinate.
// remap: in-memory reorder to the output mode followed by the a1 kernel.
enum class MttkrpVariant { Coo, OutputOrder, InputOrder, Remap };

const char* variant_name(MttkrpVariant v);  // "coo", "a1", "a2", "remap"
std::optional<MttkrpVariant> variant_from_name(std::string_view name);

struct MttkrpResult {
  FactorMatrix matrix;
  AccessTrace trace;        // empty for the coo variant
  AccessCounters counters;  // zero for the coo variant
};

// One factor matrix per mode, filled with uniform [0, 1) draws from a single
// seeded engine (mode 0 first). Deterministic per (shape, rank, seed).
std::vector<FactorMatrix> make_random_factors(const SparseTensorCOO& t, int rank,
                                              std::uint64_t seed);

// `factors` carries all N matrices; the output mode's entry is ignored as an
// input and the other N-1 are validated against the tensor shape.
FactorMatrix mttkrp_coo(const SparseTensorCOO& t, const std::vector<FactorMatrix>& factors,
                        int output_mode);

// Independent check path: densifies the tensor (dense size capped at 1e6
// elements), matricizes along the output mode and multiplies by the
// Khatri-Rao product of the other factors.
FactorMatrix dense_oracle(const SparseTensorCOO& t, const std::vector<FactorMatrix>& factors,
                          int output_mode);

MttkrpResult mttkrp_output_order(const SparseTensorCOO& t,
                                 const std::vector<FactorMatrix>& factors, int output_mode,
                                 const ElementWidths& widths = {});

MttkrpResult mttkrp_input_order(const SparseTensorCOO& t,
                                const std::vector<FactorMatrix>& factors, int output_mode,
                                int input_mode, const ElementWidths& widths = {});

struct RemapResult {
  SparseTensorCOO tensor;  // sorted by target_mode; ties keep arrival order
  AccessTrace trace;
  AccessCounters counters;
};

// Stable bucket pass over the current nonzero order: every element is loaded
// once and stored once at its bucket position. The write-position table holds
// one partition's pointers (capacity = widest partition); touching a
// non-resident coordinate once the table is full spills the evicted entry
// (PointerStore) and fetches the needed one (PointerLoad).
RemapResult remap_tensor(const SparseTensorCOO& t, int target_mode,
                         const std::vector<PartitionRange>& partitions,
                         const ElementWidths& widths = {});

MttkrpResult mttkrp_with_remap(const SparseTensorCOO& t, int output_mode,
                               const std::vector<FactorMatrix>& factors, Index max_pointers,
                               const ElementWidths& widths = {});

// The input mode the dispatcher sorts by for the input-order kernel: the
// tensor's existing sort mode when that is not the output, otherwise the
// lowest non-output mode.
int pick_input_mode(const SparseTensorCOO& t, int output_mode);

// Dispatcher that performs whatever re-sorting the variant's precondition
// demands (untraced preparation) and then runs it.
MttkrpResult run_mttkrp(MttkrpVariant v, const SparseTensorCOO& t,
                        const std::vector<FactorMatrix>& factors, int output_mode,
                        Index max_pointers, const ElementWidths& widths = {});

struct CpAlsOptions {
  int max_iters = 50;
  double fit_tolerance = 1e-8;
  std::uint64_t seed = 0;
};

struct CpAlsResult {
  std::vector<FactorMatrix> factors;  // unit-norm columns
  std::vector<double> lambda;
  std::vector<double> fit_history;  // one entry per completed sweep
  int iterations = 0;
  bool gram_regularized = false;        // a singular system needed a ridge term
  double max_unit_norm_deviation = 0.0; // worst |column norm - 1| seen
};

// Alternating least squares for a rank-R canonical decomposition. Each sweep
// updates modes 0..N-1 via mttkrp_coo, solves against the Hadamard product of
// the other Gram matrices (ridge 1e-12 on singularity), renormalizes columns
// into lambda, and records the fit. Stops when the fit change drops below
// fit_tolerance or after max_iters sweeps.
CpAlsResult cp_als(const SparseTensorCOO& t, int rank, const CpAlsOptions& opts = {});

// Solves gram * x = rhs_row for every row of rhs in place (gram is rank x
// rank, symmetric). Returns true when a ridge term was required. Exposed for
// tests.
bool solve_gram_rows(std::vector<double> gram, FactorMatrix& rhs);

}  // namespace tmc
