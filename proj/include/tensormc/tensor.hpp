#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tensormc/errors.hpp"

namespace tmc {

using Index = std::int64_t;

// Byte widths of the modeled element encodings: 32-bit coordinates, 32-bit
// tensor values, 32-bit matrix elements by default. A tensor element on the
// wire is its N coordinates plus its value.
struct ElementWidths {
  std::uint32_t coordinate_bytes = 4;
  std::uint32_t value_bytes = 4;
  std::uint32_t matrix_element_bytes = 4;

  std::uint64_t tensor_element_bytes(int num_modes) const {
    return std::uint64_t(num_modes) * coordinate_bytes + value_bytes;
  }
};

// N-mode sparse tensor in coordinate form. Coordinates are 0-based and stored
// flat (nnz * num_modes, nonzero-major). `sort_mode` names the mode the
// nonzero list is currently ordered by, if any.
struct SparseTensorCOO {
  int num_modes = 0;
  std::vector<Index> mode_lengths;
  std::vector<Index> coords;
  std::vector<double> values;
  std::optional<int> sort_mode;

  Index nnz() const { return static_cast<Index>(values.size()); }

  Index coord(Index z, int mode) const {
    return coords[static_cast<std::size_t>(z) * num_modes + mode];
  }
  void set_coord(Index z, int mode, Index v) {
    coords[static_cast<std::size_t>(z) * num_modes + mode] = v;
  }

  // Throws ValidationError when the structural invariants are broken
  // (positive mode lengths, coordinates in range, matching array sizes).
  void validate() const;
};

// Dense factor matrix for one mode, row-major. When `norms` is present the
// columns of `data` are unit 2-norm and `norms` holds the extracted scales.
struct FactorMatrix {
  int mode = 0;
  Index rows = 0;
  int rank = 0;
  std::vector<double> data;
  std::optional<std::vector<double>> norms;

  double at(Index row, int col) const {
    return data[static_cast<std::size_t>(row) * rank + col];
  }
  double& at(Index row, int col) {
    return data[static_cast<std::size_t>(row) * rank + col];
  }

  static FactorMatrix zeros(int mode, Index rows, int rank);
};

// Mode-offset hypergraph view of a tensor: one vertex per coordinate of every
// mode, one hyperedge per nonzero connecting its N coordinates.
struct Hypergraph {
  Index num_vertices = 0;
  Index num_hyperedges = 0;
  int pins_per_edge = 0;
  // num_hyperedges * pins_per_edge; pin of mode m is coord + sum of earlier
  // mode lengths.
  std::vector<Index> pins;
};

struct TensorStats {
  int num_modes = 0;
  std::vector<Index> mode_lengths;
  Index nnz = 0;
  double density = 0.0;
  std::uint64_t tensor_bytes = 0;
  std::vector<std::uint64_t> factor_matrix_bytes;
};

// Half-open coordinate range of one output-mode partition.
struct PartitionRange {
  Index begin = 0;
  Index end = 0;
  Index nnz_count = 0;
};

enum class DuplicatePolicy { Reject, MergeSum };

struct ParseOptions {
  DuplicatePolicy duplicates = DuplicatePolicy::Reject;
  // Required to parse an empty file; otherwise inferred from the first line.
  std::optional<int> num_modes;
  // Explicit dimension override; must dominate every observed coordinate.
  std::optional<std::vector<Index>> mode_lengths;
};

// Parses whitespace-separated "coord ... coord value" lines with 1-based
// coordinates. '#' comment lines and blank lines are skipped. Duplicate
// coordinates are an error under DuplicatePolicy::Reject and merged by
// summing values under MergeSum (first occurrence keeps its position).
SparseTensorCOO parse_frostt(std::istream& in, const ParseOptions& opts = {});
SparseTensorCOO parse_frostt_text(const std::string& text, const ParseOptions& opts = {});
SparseTensorCOO parse_frostt_file(const std::string& path, const ParseOptions& opts = {});

// Inverse of parse_frostt: 1-based coordinates, values with 17 significant
// digits so a round trip is bit-exact.
void serialize_frostt(const SparseTensorCOO& t, std::ostream& out);
std::string serialize_frostt_text(const SparseTensorCOO& t);

// Reorders nonzeros by the given mode's coordinate; ties are broken by the
// remaining coordinates lexicographically in ascending mode order.
SparseTensorCOO sort_by_mode(const SparseTensorCOO& t, int mode);

Hypergraph build_hypergraph(const SparseTensorCOO& t);

TensorStats tensor_stats(const SparseTensorCOO& t, int rank, const ElementWidths& widths = {});

// Splits [0, mode_length) into contiguous ranges of at most max_pointers
// coordinates, steering cuts toward even per-partition nonzero counts.
std::vector<PartitionRange> partition_output_mode(const SparseTensorCOO& t, int mode,
                                                  Index max_pointers);
std::vector<PartitionRange> partition_from_counts(const std::vector<Index>& counts,
                                                  Index max_pointers);

}  // namespace tmc
