#include "tensormc/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <list>
#include <numeric>
#include <random>
#include <unordered_map>

#include "tensormc/errors.hpp"

namespace tmc {

namespace {

constexpr std::array<const char*, 4> kVariantNames = {"coo", "a1", "a2", "remap"};

void check_factors(const SparseTensorCOO& t, const std::vector<FactorMatrix>& factors,
                   int output_mode) {
  t.validate();
  if (output_mode < 0 || output_mode >= t.num_modes)
    throw ValidationError("output mode out of range");
  if (static_cast<int>(factors.size()) != t.num_modes)
    throw ValidationError("expected one factor matrix per mode");
  int rank = factors[output_mode].rank;
  for (int m = 0; m < t.num_modes; ++m) {
    const FactorMatrix& f = factors[m];
    if (f.mode != m) throw ValidationError("factor matrix mode field mismatch");
    if (f.rank != rank || f.rank < 1) throw ValidationError("factor matrix ranks disagree");
    if (m == output_mode) continue;
    if (f.rows != t.mode_lengths[m])
      throw ValidationError("factor matrix row count does not match mode length");
    if (f.data.size() != static_cast<std::size_t>(f.rows) * f.rank)
      throw ValidationError("factor matrix data size mismatch");
  }
}

// Output-order kernel body shared by the plain and remapped entry points.
// The tensor must be grouped by the output-mode coordinate. Appends events
// to `trace` and tallies into `counters`.
FactorMatrix output_order_body(const SparseTensorCOO& t,
                               const std::vector<FactorMatrix>& factors, int output_mode,
                               const AddressMap& map, bool from_remapped_region,
                               AccessTrace& trace, AccessCounters& counters) {
  const int n = t.num_modes;
  const int rank = factors[output_mode].rank;
  const Index i_out = t.mode_lengths[output_mode];
  const std::uint64_t elem = map.widths.tensor_element_bytes(n);
  const std::uint64_t row_bytes = std::uint64_t(rank) * map.widths.matrix_element_bytes;

  FactorMatrix out = FactorMatrix::zeros(output_mode, i_out, rank);
  std::vector<double> acc(rank);
  Index z = 0;
  for (Index i = 0; i < i_out; ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    while (z < t.nnz() && t.coord(z, output_mode) == i) {
      trace.append(AccessKind::TensorLoadStream,
                   from_remapped_region ? map.remapped_element(z) : map.tensor_element(z), elem);
      counters.tensor_element_loads++;
      for (int m = 0; m < n; ++m) {
        if (m == output_mode) continue;
        trace.append(AccessKind::FactorRowLoadRandom, map.factor_row(m, t.coord(z, m)),
                     row_bytes);
        counters.factor_row_loads++;
      }
      const double v = t.values[z];
      for (int r = 0; r < rank; ++r) {
        double prod = v;
        for (int m = 0; m < n; ++m)
          if (m != output_mode) prod *= factors[m].at(t.coord(z, m), r);
        acc[r] += prod;
      }
      counters.fma_count += std::uint64_t(n) * rank;
      ++z;
    }
    for (int r = 0; r < rank; ++r) out.at(i, r) = acc[r];
    trace.append(AccessKind::FactorRowStoreStream, map.factor_row(output_mode, i), row_bytes);
    counters.factor_row_stores++;
  }
  return out;
}

// Bucket slots grouping nonzeros by one mode's coordinate while keeping
// arrival order inside each bucket. slot[z] is where nonzero z lands.
struct BucketLayout {
  std::vector<Index> slot;
  std::vector<Index> bucket_begin;  // per coordinate, prefix offsets
  std::vector<Index> bucket_count;
};

BucketLayout bucket_by_mode(const SparseTensorCOO& t, int mode) {
  BucketLayout b;
  const Index len = t.mode_lengths[mode];
  b.bucket_count.assign(len, 0);
  for (Index z = 0; z < t.nnz(); ++z) b.bucket_count[t.coord(z, mode)]++;
  b.bucket_begin.assign(len, 0);
  Index run = 0;
  for (Index c = 0; c < len; ++c) {
    b.bucket_begin[c] = run;
    run += b.bucket_count[c];
  }
  b.slot.resize(t.nnz());
  std::vector<Index> next = b.bucket_begin;
  for (Index z = 0; z < t.nnz(); ++z) b.slot[z] = next[t.coord(z, mode)]++;
  return b;
}

// Write-position table of the remapper: LRU over `capacity` resident
// coordinates. Filling an empty slot is part of table setup and free;
// touching a non-resident coordinate once the table is full writes the
// evicted entry back and fetches the needed one.
class PointerTable {
 public:
  PointerTable(Index capacity, const AddressMap& map, AccessTrace& trace,
               AccessCounters& counters)
      : capacity_(capacity), map_(map), trace_(trace), counters_(counters) {}

  void touch(Index coordinate) {
    auto it = resident_.find(coordinate);
    if (it != resident_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second);
      return;
    }
    if (static_cast<Index>(resident_.size()) == capacity_) {
      Index victim = lru_.back();
      lru_.pop_back();
      resident_.erase(victim);
      trace_.append(AccessKind::PointerStore, map_.pointer_entry(victim), 4);
      counters_.pointer_stores++;
      trace_.append(AccessKind::PointerLoad, map_.pointer_entry(coordinate), 4);
      counters_.pointer_loads++;
    }
    lru_.push_front(coordinate);
    resident_.emplace(coordinate, lru_.begin());
  }

 private:
  Index capacity_;
  const AddressMap& map_;
  AccessTrace& trace_;
  AccessCounters& counters_;
  std::list<Index> lru_;
  std::unordered_map<Index, std::list<Index>::iterator> resident_;
};

}  // namespace

const char* variant_name(MttkrpVariant v) { return kVariantNames[static_cast<int>(v)]; }

std::optional<MttkrpVariant> variant_from_name(std::string_view name) {
  for (int i = 0; i < 4; ++i)
    if (name == kVariantNames[i]) return static_cast<MttkrpVariant>(i);
  return std::nullopt;
}

std::vector<FactorMatrix> make_random_factors(const SparseTensorCOO& t, int rank,
                                              std::uint64_t seed) {
  t.validate();
  if (rank < 1) throw ValidationError("rank must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  std::vector<FactorMatrix> factors;
  factors.reserve(t.num_modes);
  for (int m = 0; m < t.num_modes; ++m) {
    FactorMatrix f = FactorMatrix::zeros(m, t.mode_lengths[m], rank);
    for (double& x : f.data) x = dist(rng);
    factors.push_back(std::move(f));
  }
  return factors;
}

FactorMatrix mttkrp_coo(const SparseTensorCOO& t, const std::vector<FactorMatrix>& factors,
                        int output_mode) {
  check_factors(t, factors, output_mode);
  const int n = t.num_modes;
  const int rank = factors[output_mode].rank;
  FactorMatrix out = FactorMatrix::zeros(output_mode, t.mode_lengths[output_mode], rank);
  for (Index z = 0; z < t.nnz(); ++z) {
    const Index i = t.coord(z, output_mode);
    const double v = t.values[z];
    for (int r = 0; r < rank; ++r) {
      double prod = v;
      for (int m = 0; m < n; ++m)
        if (m != output_mode) prod *= factors[m].at(t.coord(z, m), r);
      out.at(i, r) += prod;
    }
  }
  return out;
}

FactorMatrix dense_oracle(const SparseTensorCOO& t, const std::vector<FactorMatrix>& factors,
                          int output_mode) {
  check_factors(t, factors, output_mode);
  const int n = t.num_modes;
  const int rank = factors[output_mode].rank;

  double cells = 1.0;
  for (Index len : t.mode_lengths) cells *= static_cast<double>(len);
  if (cells > 1e6) throw ValidationError("dense oracle limited to 1e6 dense elements");

  // Densify: linear index with ascending modes varying fastest.
  std::vector<Index> stride(n);
  Index total = 1;
  for (int m = 0; m < n; ++m) {
    stride[m] = total;
    total *= t.mode_lengths[m];
  }
  std::vector<double> dense(total, 0.0);
  for (Index z = 0; z < t.nnz(); ++z) {
    Index idx = 0;
    for (int m = 0; m < n; ++m) idx += t.coord(z, m) * stride[m];
    dense[idx] += t.values[z];
  }

  // Columns of the mode-(output) matricization enumerate the remaining modes
  // with the lowest-numbered mode varying fastest; the Khatri-Rao row for a
  // column is the elementwise product of the matching factor rows.
  const Index i_out = t.mode_lengths[output_mode];
  Index cols = 1;
  for (int m = 0; m < n; ++m)
    if (m != output_mode) cols *= t.mode_lengths[m];

  FactorMatrix out = FactorMatrix::zeros(output_mode, i_out, rank);
  std::vector<Index> coord(n, 0);
  for (Index j = 0; j < cols; ++j) {
    Index rem = j;
    for (int m = 0; m < n; ++m) {
      if (m == output_mode) continue;
      coord[m] = rem % t.mode_lengths[m];
      rem /= t.mode_lengths[m];
    }
    for (Index i = 0; i < i_out; ++i) {
      coord[output_mode] = i;
      Index idx = 0;
      for (int m = 0; m < n; ++m) idx += coord[m] * stride[m];
      const double x = dense[idx];
      if (x == 0.0) continue;
      for (int r = 0; r < rank; ++r) {
        double kr = 1.0;
        for (int m = 0; m < n; ++m)
          if (m != output_mode) kr *= factors[m].at(coord[m], r);
        out.at(i, r) += x * kr;
      }
    }
  }
  return out;
}

MttkrpResult mttkrp_output_order(const SparseTensorCOO& t,
                                 const std::vector<FactorMatrix>& factors, int output_mode,
                                 const ElementWidths& widths) {
  check_factors(t, factors, output_mode);
  if (!t.sort_mode || *t.sort_mode != output_mode)
    throw ValidationError("output-order kernel requires the tensor sorted by the output mode");
  MttkrpResult res;
  AddressMap map = AddressMap::build(t.mode_lengths, t.nnz(), factors[output_mode].rank, widths);
  res.matrix = output_order_body(t, factors, output_mode, map, false, res.trace, res.counters);
  return res;
}

MttkrpResult mttkrp_input_order(const SparseTensorCOO& t,
                                const std::vector<FactorMatrix>& factors, int output_mode,
                                int input_mode, const ElementWidths& widths) {
  check_factors(t, factors, output_mode);
  if (input_mode < 0 || input_mode >= t.num_modes || input_mode == output_mode)
    throw ValidationError("input mode must name a mode other than the output mode");
  if (!t.sort_mode || *t.sort_mode != input_mode)
    throw ValidationError("input-order kernel requires the tensor sorted by the input mode");

  const int n = t.num_modes;
  const int rank = factors[output_mode].rank;
  const Index i_in = t.mode_lengths[input_mode];
  const Index i_out = t.mode_lengths[output_mode];
  const std::uint64_t elem = widths.tensor_element_bytes(n);
  const std::uint64_t row_bytes = std::uint64_t(rank) * widths.matrix_element_bytes;

  MttkrpResult res;
  AccessTrace& trace = res.trace;
  AccessCounters& counters = res.counters;
  AddressMap map = AddressMap::build(t.mode_lengths, t.nnz(), rank, widths);

  // Partial rows land in the slot their output coordinate owns, so the
  // second phase reads them as one ascending stream.
  BucketLayout out_buckets = bucket_by_mode(t, output_mode);
  std::vector<double> partials(static_cast<std::size_t>(t.nnz()) * rank);

  Index z = 0;
  for (Index i1 = 0; i1 < i_in; ++i1) {
    trace.append(AccessKind::FactorRowLoadRandom, map.factor_row(input_mode, i1), row_bytes);
    counters.factor_row_loads++;
    while (z < t.nnz() && t.coord(z, input_mode) == i1) {
      trace.append(AccessKind::TensorLoadStream, map.tensor_element(z), elem);
      counters.tensor_element_loads++;
      for (int m = 0; m < n; ++m) {
        if (m == output_mode || m == input_mode) continue;
        trace.append(AccessKind::FactorRowLoadRandom, map.factor_row(m, t.coord(z, m)),
                     row_bytes);
        counters.factor_row_loads++;
      }
      const double v = t.values[z];
      const Index slot = out_buckets.slot[z];
      for (int r = 0; r < rank; ++r) {
        double prod = v;
        for (int m = 0; m < n; ++m)
          if (m != output_mode) prod *= factors[m].at(t.coord(z, m), r);
        partials[static_cast<std::size_t>(slot) * rank + r] = prod;
      }
      counters.fma_count += std::uint64_t(n - 1) * rank;
      trace.append(AccessKind::PartialStoreElementwise, map.partial_row(slot), row_bytes);
      counters.partial_row_stores++;
      ++z;
    }
  }

  res.matrix = FactorMatrix::zeros(output_mode, i_out, rank);
  Index slot = 0;
  for (Index i0 = 0; i0 < i_out; ++i0) {
    for (Index k = 0; k < out_buckets.bucket_count[i0]; ++k, ++slot) {
      trace.append(AccessKind::PartialLoadStream, map.partial_row(slot), row_bytes);
      counters.partial_row_loads++;
      for (int r = 0; r < rank; ++r)
        res.matrix.at(i0, r) += partials[static_cast<std::size_t>(slot) * rank + r];
      counters.fma_count += rank;
    }
    trace.append(AccessKind::FactorRowStoreStream, map.factor_row(output_mode, i0), row_bytes);
    counters.factor_row_stores++;
  }
  return res;
}

namespace {

RemapResult remap_tensor_impl(const SparseTensorCOO& t, int target_mode,
                              const std::vector<PartitionRange>& partitions,
                              const AddressMap& map) {
  t.validate();
  if (target_mode < 0 || target_mode >= t.num_modes)
    throw ValidationError("target mode out of range");
  if (partitions.empty()) throw ValidationError("partition list is empty");
  Index expect = 0;
  Index widest = 0;
  for (const auto& p : partitions) {
    if (p.begin != expect || p.end <= p.begin)
      throw ValidationError("partitions must be contiguous, ordered, and non-empty");
    widest = std::max(widest, p.end - p.begin);
    expect = p.end;
  }
  if (expect != t.mode_lengths[target_mode])
    throw ValidationError("partitions do not cover the target mode");

  const int n = t.num_modes;
  const std::uint64_t elem = map.widths.tensor_element_bytes(n);

  RemapResult res;
  BucketLayout buckets = bucket_by_mode(t, target_mode);
  PointerTable table(widest, map, res.trace, res.counters);

  SparseTensorCOO out;
  out.num_modes = n;
  out.mode_lengths = t.mode_lengths;
  out.coords.resize(t.coords.size());
  out.values.resize(t.values.size());
  for (Index z = 0; z < t.nnz(); ++z) {
    res.trace.append(AccessKind::TensorLoadStream, map.tensor_element(z), elem);
    res.counters.tensor_element_loads++;
    const Index c = t.coord(z, target_mode);
    table.touch(c);
    const Index slot = buckets.slot[z];
    for (int m = 0; m < n; ++m)
      out.coords[static_cast<std::size_t>(slot) * n + m] = t.coord(z, m);
    out.values[slot] = t.values[z];
    res.trace.append(AccessKind::TensorStoreElementwise, map.remapped_element(slot), elem);
    res.counters.tensor_element_stores++;
  }
  out.sort_mode = target_mode;
  res.tensor = std::move(out);
  return res;
}

}  // namespace

RemapResult remap_tensor(const SparseTensorCOO& t, int target_mode,
                         const std::vector<PartitionRange>& partitions,
                         const ElementWidths& widths) {
  // A standalone remap carries no rank context; rank only scales regions the
  // pass never touches.
  AddressMap map = AddressMap::build(t.mode_lengths, t.nnz(), 1, widths);
  return remap_tensor_impl(t, target_mode, partitions, map);
}

MttkrpResult mttkrp_with_remap(const SparseTensorCOO& t, int output_mode,
                               const std::vector<FactorMatrix>& factors, Index max_pointers,
                               const ElementWidths& widths) {
  check_factors(t, factors, output_mode);
  auto partitions = partition_output_mode(t, output_mode, max_pointers);
  // One shared address map keeps both phases of the combined trace in a
  // single consistent layout.
  AddressMap map = AddressMap::build(t.mode_lengths, t.nnz(), factors[output_mode].rank, widths);
  RemapResult remapped = remap_tensor_impl(t, output_mode, partitions, map);

  MttkrpResult res;
  res.trace = std::move(remapped.trace);
  res.counters = remapped.counters;
  res.matrix = output_order_body(remapped.tensor, factors, output_mode, map, true, res.trace,
                                 res.counters);
  return res;
}

int pick_input_mode(const SparseTensorCOO& t, int output_mode) {
  if (t.num_modes < 2) throw ValidationError("input-order kernel needs two modes");
  if (t.sort_mode && *t.sort_mode != output_mode) return *t.sort_mode;
  return output_mode == 0 ? 1 : 0;
}

MttkrpResult run_mttkrp(MttkrpVariant v, const SparseTensorCOO& t,
                        const std::vector<FactorMatrix>& factors, int output_mode,
                        Index max_pointers, const ElementWidths& widths) {
  switch (v) {
    case MttkrpVariant::Coo: {
      MttkrpResult res;
      res.matrix = mttkrp_coo(t, factors, output_mode);
      return res;
    }
    case MttkrpVariant::OutputOrder: {
      if (t.sort_mode && *t.sort_mode == output_mode)
        return mttkrp_output_order(t, factors, output_mode, widths);
      return mttkrp_output_order(sort_by_mode(t, output_mode), factors, output_mode, widths);
    }
    case MttkrpVariant::InputOrder: {
      const int input_mode = pick_input_mode(t, output_mode);
      if (!t.sort_mode || *t.sort_mode != input_mode)
        return mttkrp_input_order(sort_by_mode(t, input_mode), factors, output_mode, input_mode,
                                  widths);
      return mttkrp_input_order(t, factors, output_mode, input_mode, widths);
    }
    case MttkrpVariant::Remap:
      return mttkrp_with_remap(t, output_mode, factors, max_pointers, widths);
  }
  throw ValidationError("unknown kernel variant");
}

bool solve_gram_rows(std::vector<double> gram, FactorMatrix& rhs) {
  const int r = rhs.rank;
  if (gram.size() != static_cast<std::size_t>(r) * r)
    throw ValidationError("gram matrix size does not match rank");

  // Gauss-Jordan inversion with partial pivoting; a near-singular pivot
  // restarts once with a small ridge on the diagonal.
  auto invert = [r](std::vector<double> a, std::vector<double>& inv) {
    inv.assign(static_cast<std::size_t>(r) * r, 0.0);
    for (int i = 0; i < r; ++i) inv[static_cast<std::size_t>(i) * r + i] = 1.0;
    double scale = 0.0;
    for (int i = 0; i < r; ++i) scale = std::max(scale, std::abs(a[static_cast<std::size_t>(i) * r + i]));
    if (scale == 0.0) scale = 1.0;
    for (int col = 0; col < r; ++col) {
      int pivot = col;
      for (int row = col + 1; row < r; ++row)
        if (std::abs(a[static_cast<std::size_t>(row) * r + col]) >
            std::abs(a[static_cast<std::size_t>(pivot) * r + col]))
          pivot = row;
      double p = a[static_cast<std::size_t>(pivot) * r + col];
      if (std::abs(p) < 1e-12 * scale) return false;
      if (pivot != col) {
        for (int k = 0; k < r; ++k) {
          std::swap(a[static_cast<std::size_t>(col) * r + k], a[static_cast<std::size_t>(pivot) * r + k]);
          std::swap(inv[static_cast<std::size_t>(col) * r + k], inv[static_cast<std::size_t>(pivot) * r + k]);
        }
      }
      double inv_p = 1.0 / a[static_cast<std::size_t>(col) * r + col];
      for (int k = 0; k < r; ++k) {
        a[static_cast<std::size_t>(col) * r + k] *= inv_p;
        inv[static_cast<std::size_t>(col) * r + k] *= inv_p;
      }
      for (int row = 0; row < r; ++row) {
        if (row == col) continue;
        double f = a[static_cast<std::size_t>(row) * r + col];
        if (f == 0.0) continue;
        for (int k = 0; k < r; ++k) {
          a[static_cast<std::size_t>(row) * r + k] -= f * a[static_cast<std::size_t>(col) * r + k];
          inv[static_cast<std::size_t>(row) * r + k] -= f * inv[static_cast<std::size_t>(col) * r + k];
        }
      }
    }
    return true;
  };

  std::vector<double> inv;
  bool ridged = false;
  if (!invert(gram, inv)) {
    ridged = true;
    double trace = 0.0;
    for (int i = 0; i < r; ++i) trace += gram[static_cast<std::size_t>(i) * r + i];
    double ridge = 1e-12 * (trace > 0 ? trace / r : 1.0);
    for (int i = 0; i < r; ++i) gram[static_cast<std::size_t>(i) * r + i] += ridge;
    if (!invert(gram, inv)) {
      // Escalate until the system is numerically regular; keeps ALS moving
      // on degenerate data.
      double bump = std::max(ridge, 1e-12);
      while (!invert(gram, inv)) {
        bump *= 1e3;
        for (int i = 0; i < r; ++i) gram[static_cast<std::size_t>(i) * r + i] += bump;
      }
    }
  }

  std::vector<double> row(r);
  for (Index i = 0; i < rhs.rows; ++i) {
    for (int c = 0; c < r; ++c) row[c] = rhs.at(i, c);
    for (int c = 0; c < r; ++c) {
      double acc = 0.0;
      for (int k = 0; k < r; ++k) acc += row[k] * inv[static_cast<std::size_t>(k) * r + c];
      rhs.at(i, c) = acc;
    }
  }
  return ridged;
}

CpAlsResult cp_als(const SparseTensorCOO& t, int rank, const CpAlsOptions& opts) {
  t.validate();
  if (rank < 1) throw ValidationError("rank must be positive");
  if (opts.max_iters < 1) throw ValidationError("max_iters must be positive");
  if (t.nnz() == 0) throw ValidationError("cannot decompose an empty tensor");

  const int n = t.num_modes;
  CpAlsResult res;
  res.factors = make_random_factors(t, rank, opts.seed);
  res.lambda.assign(rank, 1.0);

  long double norm_x_sq = 0.0L;
  for (double v : t.values) norm_x_sq += static_cast<long double>(v) * v;
  const long double norm_x = std::sqrt(norm_x_sq);
  if (norm_x == 0.0L) throw ValidationError("tensor norm is zero");

  auto gram_of = [rank](const FactorMatrix& f) {
    std::vector<double> g(static_cast<std::size_t>(rank) * rank, 0.0);
    for (Index i = 0; i < f.rows; ++i)
      for (int a = 0; a < rank; ++a) {
        const double fa = f.at(i, a);
        if (fa == 0.0) continue;
        for (int b = 0; b < rank; ++b)
          g[static_cast<std::size_t>(a) * rank + b] += fa * f.at(i, b);
      }
    return g;
  };

  std::vector<std::vector<double>> grams(n);
  for (int m = 0; m < n; ++m) grams[m] = gram_of(res.factors[m]);

  double prev_fit = 0.0;
  for (int iter = 0; iter < opts.max_iters; ++iter) {
    for (int mode = 0; mode < n; ++mode) {
      FactorMatrix m = mttkrp_coo(t, res.factors, mode);
      std::vector<double> v(static_cast<std::size_t>(rank) * rank, 1.0);
      for (int other = 0; other < n; ++other) {
        if (other == mode) continue;
        for (std::size_t k = 0; k < v.size(); ++k) v[k] *= grams[other][k];
      }
      res.gram_regularized |= solve_gram_rows(std::move(v), m);

      // Pull column 2-norms into lambda; zero columns keep zero weight.
      for (int r = 0; r < rank; ++r) {
        double s = 0.0;
        for (Index i = 0; i < m.rows; ++i) s += m.at(i, r) * m.at(i, r);
        double norm = std::sqrt(s);
        res.lambda[r] = norm;
        if (norm > 0.0)
          for (Index i = 0; i < m.rows; ++i) m.at(i, r) /= norm;
      }
      std::vector<double> norms = res.lambda;
      m.norms = std::move(norms);
      for (int r = 0; r < rank; ++r) {
        if (res.lambda[r] == 0.0) continue;
        double s = 0.0;
        for (Index i = 0; i < m.rows; ++i) s += m.at(i, r) * m.at(i, r);
        res.max_unit_norm_deviation =
            std::max(res.max_unit_norm_deviation, std::abs(std::sqrt(s) - 1.0));
      }
      res.factors[mode] = std::move(m);
      grams[mode] = gram_of(res.factors[mode]);
    }

    // fit = 1 - ||X - model|| / ||X||, expanded through the Gram matrices so
    // only the nonzeros are visited. The three terms cancel almost completely
    // near an exact fit, so they are accumulated in extended precision; plain
    // doubles leave noise above the stopping tolerance after the square root.
    long double norm_model_sq = 0.0L;
    for (int a = 0; a < rank; ++a)
      for (int b = 0; b < rank; ++b) {
        long double prod = static_cast<long double>(res.lambda[a]) * res.lambda[b];
        for (int m = 0; m < n; ++m) {
          const auto& f = res.factors[m];
          long double g = 0.0L;
          for (Index i = 0; i < f.rows; ++i)
            g += static_cast<long double>(f.at(i, a)) * f.at(i, b);
          prod *= g;
        }
        norm_model_sq += prod;
      }
    long double inner = 0.0L;
    for (Index z = 0; z < t.nnz(); ++z) {
      long double entry = 0.0L;
      for (int r = 0; r < rank; ++r) {
        long double prod = res.lambda[r];
        for (int m = 0; m < n; ++m) prod *= res.factors[m].at(t.coord(z, m), r);
        entry += prod;
      }
      inner += t.values[z] * entry;
    }
    const long double err_sq = std::max(0.0L, norm_x_sq + norm_model_sq - 2.0L * inner);
    const double fit = static_cast<double>(1.0L - std::sqrt(err_sq) / norm_x);
    res.fit_history.push_back(fit);
    res.iterations = iter + 1;
    if (iter > 0 && std::abs(fit - prev_fit) < opts.fit_tolerance) break;
    prev_fit = fit;
  }
  return res;
}

}  // namespace tmc
