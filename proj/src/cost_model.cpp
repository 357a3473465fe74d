#include "tensormc/cost_model.hpp"

#include "tensormc/errors.hpp"

namespace tmc {

std::uint64_t predicted_computations(int num_modes, Index nnz, int rank) {
  if (num_modes < 1 || nnz < 0 || rank < 1)
    throw ValidationError("computation prediction needs positive shape parameters");
  return std::uint64_t(num_modes) * std::uint64_t(nnz) * std::uint64_t(rank);
}

std::uint64_t predicted_accesses(MttkrpVariant v, int num_modes, Index nnz, int rank,
                                 Index boundary_mode_length) {
  if (num_modes < 2 || nnz < 0 || rank < 1 || boundary_mode_length < 1)
    throw ValidationError("access prediction needs at least two modes and positive parameters");
  const std::uint64_t t = nnz;
  const std::uint64_t r = rank;
  const std::uint64_t boundary = boundary_mode_length;
  switch (v) {
    case MttkrpVariant::OutputOrder:
      return t + std::uint64_t(num_modes - 1) * t * r + boundary * r;
    case MttkrpVariant::InputOrder:
      return t + std::uint64_t(num_modes) * t * r + boundary * r;
    default:
      throw ValidationError("access prediction covers the two kernel directions only");
  }
}

double remap_overhead_ratio(int num_modes, int rank) {
  if (num_modes < 2) throw ValidationError("remap overhead needs at least two modes");
  if (rank < 1) throw ValidationError("rank must be positive");
  return 2.0 / (1.0 + double(num_modes - 1) * double(rank));
}

CostPrediction predict(MttkrpVariant v, int num_modes, Index nnz, int rank, Index i_out,
                       Index i_in, const ElementWidths& widths) {
  CostPrediction p;
  p.variant = v;
  p.total_computations = predicted_computations(num_modes, nnz, rank);
  const std::uint64_t tensor_elem = widths.tensor_element_bytes(num_modes);
  const std::uint64_t mat_elem = widths.matrix_element_bytes;
  const std::uint64_t t = nnz;
  const std::uint64_t r = rank;
  switch (v) {
    case MttkrpVariant::Coo:
      // The reference traversal is not instrumented; it moves the same
      // element classes as the output-order kernel.
      p.total_accesses = predicted_accesses(MttkrpVariant::OutputOrder, num_modes, nnz, rank, i_out);
      p.total_bytes = t * tensor_elem + (p.total_accesses - t) * mat_elem;
      break;
    case MttkrpVariant::OutputOrder:
      p.total_accesses = predicted_accesses(v, num_modes, nnz, rank, i_out);
      p.total_bytes = t * tensor_elem + (p.total_accesses - t) * mat_elem;
      break;
    case MttkrpVariant::InputOrder:
      p.total_accesses = predicted_accesses(v, num_modes, nnz, rank, i_in);
      p.partial_sum_elements = t * r;
      p.total_bytes = t * tensor_elem + (p.total_accesses - t) * mat_elem;
      break;
    case MttkrpVariant::Remap: {
      std::uint64_t base = predicted_accesses(MttkrpVariant::OutputOrder, num_modes, nnz, rank, i_out);
      p.total_accesses = base + 2 * t;
      p.remap_overhead = remap_overhead_ratio(num_modes, rank);
      p.total_bytes = 3 * t * tensor_elem + (base - t) * mat_elem;
      break;
    }
  }
  return p;
}

std::uint64_t measured_element_accesses(const AccessCounters& c, MttkrpVariant v, int rank) {
  if (rank < 1) throw ValidationError("rank must be positive");
  const std::uint64_t r = rank;
  switch (v) {
    case MttkrpVariant::OutputOrder:
      return c.tensor_element_loads + r * (c.factor_row_loads + c.factor_row_stores);
    case MttkrpVariant::InputOrder:
      // The model's input-order total covers factor loads and the partial
      // store + reload; the output write-back sits outside it.
      return c.tensor_element_loads +
             r * (c.factor_row_loads + c.partial_row_stores + c.partial_row_loads);
    case MttkrpVariant::Remap:
      // Remap adds one load and one scatter store per nonzero. Pointer-table
      // spills move 32-bit entries, not elements, and stay outside this sum.
      return c.tensor_element_loads + c.tensor_element_stores +
             r * (c.factor_row_loads + c.factor_row_stores);
    default:
      throw ValidationError("measured accesses cover instrumented variants only");
  }
}

Reconciliation reconcile(const AccessCounters& c, MttkrpVariant v, int num_modes, Index nnz,
                         int rank, Index i_out, Index i_in) {
  Reconciliation rec;
  rec.measured_accesses = measured_element_accesses(c, v, rank);
  switch (v) {
    case MttkrpVariant::OutputOrder:
      rec.predicted_accesses = predicted_accesses(v, num_modes, nnz, rank, i_out);
      break;
    case MttkrpVariant::InputOrder:
      rec.predicted_accesses = predicted_accesses(v, num_modes, nnz, rank, i_in);
      break;
    case MttkrpVariant::Remap:
      rec.predicted_accesses =
          predicted_accesses(MttkrpVariant::OutputOrder, num_modes, nnz, rank, i_out) +
          2 * std::uint64_t(nnz);
      break;
    default:
      throw ValidationError("reconciliation covers instrumented variants only");
  }
  rec.accesses_match = rec.measured_accesses == rec.predicted_accesses;
  rec.measured_fma = c.fma_count;
  rec.predicted_fma = predicted_computations(num_modes, nnz, rank);
  rec.fma_match = rec.measured_fma == rec.predicted_fma;
  return rec;
}

}  // namespace tmc
