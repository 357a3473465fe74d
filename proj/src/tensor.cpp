#include "tensormc/tensor.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace tmc {

void SparseTensorCOO::validate() const {
  if (num_modes < 1) throw ValidationError("tensor must have at least one mode");
  if (static_cast<int>(mode_lengths.size()) != num_modes)
    throw ValidationError("mode_lengths size does not match num_modes");
  for (int m = 0; m < num_modes; ++m)
    if (mode_lengths[m] < 1) throw ValidationError("mode lengths must be positive");
  if (coords.size() != values.size() * num_modes)
    throw ValidationError("coordinate array size does not match value count");
  if (sort_mode && (*sort_mode < 0 || *sort_mode >= num_modes))
    throw ValidationError("sort_mode out of range");
  for (Index z = 0; z < nnz(); ++z)
    for (int m = 0; m < num_modes; ++m) {
      Index c = coord(z, m);
      if (c < 0 || c >= mode_lengths[m])
        throw ValidationError("coordinate out of range at nonzero " + std::to_string(z));
    }
}

FactorMatrix FactorMatrix::zeros(int mode, Index rows, int rank) {
  FactorMatrix m;
  m.mode = mode;
  m.rows = rows;
  m.rank = rank;
  m.data.assign(static_cast<std::size_t>(rows) * rank, 0.0);
  return m;
}

namespace {

bool parse_index_token(const std::string& tok, Index& out) {
  if (tok.empty()) return false;
  char* end = nullptr;
  errno = 0;
  long long v = std::strtoll(tok.c_str(), &end, 10);
  if (errno != 0 || end != tok.c_str() + tok.size()) return false;
  out = static_cast<Index>(v);
  return true;
}

bool parse_value_token(const std::string& tok, double& out) {
  if (tok.empty()) return false;
  char* end = nullptr;
  errno = 0;
  double v = std::strtod(tok.c_str(), &end);
  if (errno == ERANGE || end != tok.c_str() + tok.size()) return false;
  out = v;
  return true;
}

std::uint64_t hash_coords(const Index* c, int n) {
  std::uint64_t h = 1469598103934665603ull;
  for (int m = 0; m < n; ++m) {
    h ^= static_cast<std::uint64_t>(c[m]);
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

SparseTensorCOO parse_frostt(std::istream& in, const ParseOptions& opts) {
  SparseTensorCOO t;
  int num_modes = opts.num_modes.value_or(0);
  std::vector<Index> max_coord;  // 1-based maxima
  // duplicate detection: coordinate hash -> nonzero indices in that bucket
  std::unordered_map<std::uint64_t, std::vector<Index>> seen;

  std::string line;
  long line_no = 0;
  std::vector<std::string> tokens;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;

    tokens.clear();
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) tokens.push_back(tok);

    if (num_modes == 0) {
      if (tokens.size() < 2)
        throw ParseError("expected at least one coordinate and a value", line_no);
      num_modes = static_cast<int>(tokens.size()) - 1;
      max_coord.assign(num_modes, 0);
    }
    t.num_modes = num_modes;
    if (tokens.size() != static_cast<std::size_t>(num_modes) + 1)
      throw ParseError("expected " + std::to_string(num_modes) + " coordinates and a value, got " +
                           std::to_string(tokens.size()) + " fields",
                       line_no);
    if (max_coord.empty()) max_coord.assign(num_modes, 0);

    Index c[64];
    if (num_modes > 64) throw ParseError("too many modes", line_no);
    for (int m = 0; m < num_modes; ++m) {
      if (!parse_index_token(tokens[m], c[m]))
        throw ParseError("coordinate '" + tokens[m] + "' is not an integer", line_no);
      if (c[m] < 1) throw ParseError("coordinates are 1-based and must be >= 1", line_no);
      max_coord[m] = std::max(max_coord[m], c[m]);
    }
    double v = 0.0;
    if (!parse_value_token(tokens[num_modes], v))
      throw ParseError("value '" + tokens[num_modes] + "' is not a number", line_no);

    for (int m = 0; m < num_modes; ++m) c[m] -= 1;

    auto& bucket = seen[hash_coords(c, num_modes)];
    Index dup = -1;
    for (Index idx : bucket) {
      bool same = true;
      for (int m = 0; m < num_modes; ++m)
        if (t.coord(idx, m) != c[m]) {
          same = false;
          break;
        }
      if (same) {
        dup = idx;
        break;
      }
    }
    if (dup >= 0) {
      if (opts.duplicates == DuplicatePolicy::Reject)
        throw ParseError("duplicate coordinates (first at nonzero " + std::to_string(dup) + ")",
                         line_no);
      t.values[dup] += v;
      continue;
    }
    bucket.push_back(t.nnz());
    t.coords.insert(t.coords.end(), c, c + num_modes);
    t.values.push_back(v);
  }

  if (num_modes == 0) throw ParseError("empty input: cannot infer mode count");
  t.num_modes = num_modes;

  if (opts.mode_lengths) {
    if (static_cast<int>(opts.mode_lengths->size()) != num_modes)
      throw ValidationError("dimension override has wrong mode count");
    for (int m = 0; m < num_modes; ++m) {
      Index observed = max_coord.empty() ? 0 : max_coord[m];
      if ((*opts.mode_lengths)[m] < std::max<Index>(observed, 1))
        throw ValidationError("dimension override smaller than observed coordinates");
    }
    t.mode_lengths = *opts.mode_lengths;
  } else {
    t.mode_lengths.assign(num_modes, 1);
    for (int m = 0; m < num_modes && !max_coord.empty(); ++m)
      t.mode_lengths[m] = std::max<Index>(max_coord[m], 1);
  }
  t.validate();
  return t;
}

SparseTensorCOO parse_frostt_text(const std::string& text, const ParseOptions& opts) {
  std::istringstream in(text);
  return parse_frostt(in, opts);
}

SparseTensorCOO parse_frostt_file(const std::string& path, const ParseOptions& opts) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open tensor file: " + path);
  return parse_frostt(in, opts);
}

void serialize_frostt(const SparseTensorCOO& t, std::ostream& out) {
  char buf[64];
  for (Index z = 0; z < t.nnz(); ++z) {
    for (int m = 0; m < t.num_modes; ++m) out << (t.coord(z, m) + 1) << ' ';
    std::snprintf(buf, sizeof(buf), "%.17g", t.values[z]);
    out << buf << '\n';
  }
}

std::string serialize_frostt_text(const SparseTensorCOO& t) {
  std::ostringstream out;
  serialize_frostt(t, out);
  return out.str();
}

SparseTensorCOO sort_by_mode(const SparseTensorCOO& t, int mode) {
  if (mode < 0 || mode >= t.num_modes) throw ValidationError("sort mode out of range");
  std::vector<Index> perm(t.nnz());
  std::iota(perm.begin(), perm.end(), Index{0});
  const int n = t.num_modes;
  std::stable_sort(perm.begin(), perm.end(), [&](Index a, Index b) {
    Index ca = t.coord(a, mode), cb = t.coord(b, mode);
    if (ca != cb) return ca < cb;
    for (int m = 0; m < n; ++m) {
      if (m == mode) continue;
      ca = t.coord(a, m);
      cb = t.coord(b, m);
      if (ca != cb) return ca < cb;
    }
    return false;
  });

  SparseTensorCOO out;
  out.num_modes = n;
  out.mode_lengths = t.mode_lengths;
  out.coords.resize(t.coords.size());
  out.values.resize(t.values.size());
  for (Index i = 0; i < t.nnz(); ++i) {
    Index src = perm[i];
    for (int m = 0; m < n; ++m) out.coords[static_cast<std::size_t>(i) * n + m] = t.coord(src, m);
    out.values[i] = t.values[src];
  }
  out.sort_mode = mode;
  return out;
}

Hypergraph build_hypergraph(const SparseTensorCOO& t) {
  t.validate();
  Hypergraph h;
  h.pins_per_edge = t.num_modes;
  h.num_hyperedges = t.nnz();
  std::vector<Index> offset(t.num_modes, 0);
  for (int m = 1; m < t.num_modes; ++m) offset[m] = offset[m - 1] + t.mode_lengths[m - 1];
  h.num_vertices = offset[t.num_modes - 1] + t.mode_lengths[t.num_modes - 1];
  h.pins.resize(t.coords.size());
  for (Index z = 0; z < t.nnz(); ++z)
    for (int m = 0; m < t.num_modes; ++m)
      h.pins[static_cast<std::size_t>(z) * t.num_modes + m] = offset[m] + t.coord(z, m);
  return h;
}

TensorStats tensor_stats(const SparseTensorCOO& t, int rank, const ElementWidths& widths) {
  t.validate();
  if (rank < 1) throw ValidationError("rank must be positive");
  TensorStats s;
  s.num_modes = t.num_modes;
  s.mode_lengths = t.mode_lengths;
  s.nnz = t.nnz();
  double cells = 1.0;
  for (Index len : t.mode_lengths) cells *= static_cast<double>(len);
  s.density = cells > 0 ? static_cast<double>(s.nnz) / cells : 0.0;
  s.tensor_bytes = static_cast<std::uint64_t>(s.nnz) * widths.tensor_element_bytes(t.num_modes);
  s.factor_matrix_bytes.reserve(t.num_modes);
  for (Index len : t.mode_lengths)
    s.factor_matrix_bytes.push_back(static_cast<std::uint64_t>(len) * rank *
                                    widths.matrix_element_bytes);
  return s;
}

std::vector<PartitionRange> partition_from_counts(const std::vector<Index>& counts,
                                                  Index max_pointers) {
  if (max_pointers < 1) throw ValidationError("max_pointers must be positive");
  const Index n = static_cast<Index>(counts.size());
  if (n == 0) throw ValidationError("cannot partition an empty coordinate range");
  Index total = 0;
  for (Index c : counts) {
    if (c < 0) throw ValidationError("negative coordinate count");
    total += c;
  }

  // Greedy sweep: cut at the span cap, and at running-count quantiles of the
  // minimum partition count the span cap forces.
  const Index target = (n + max_pointers - 1) / max_pointers;
  std::vector<PartitionRange> parts;
  Index begin = 0, cum = 0, cum_at_begin = 0, made = 0;
  for (Index c = 0; c < n; ++c) {
    cum += counts[c];
    if (c + 1 == n) break;
    bool span_cut = (c - begin + 1) == max_pointers;
    bool budget_cut = total > 0 && made + 1 < target &&
                      static_cast<__int128>(cum) * target >=
                          static_cast<__int128>(made + 1) * total;
    if (span_cut || budget_cut) {
      parts.push_back({begin, c + 1, cum - cum_at_begin});
      begin = c + 1;
      cum_at_begin = cum;
      ++made;
    }
  }
  parts.push_back({begin, n, cum - cum_at_begin});
  return parts;
}

std::vector<PartitionRange> partition_output_mode(const SparseTensorCOO& t, int mode,
                                                  Index max_pointers) {
  if (mode < 0 || mode >= t.num_modes) throw ValidationError("partition mode out of range");
  std::vector<Index> counts(static_cast<std::size_t>(t.mode_lengths[mode]), 0);
  for (Index z = 0; z < t.nnz(); ++z) counts[t.coord(z, mode)]++;
  return partition_from_counts(counts, max_pointers);
}

}  // namespace tmc
