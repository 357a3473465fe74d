#include "tensormc/trace.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "tensormc/errors.hpp"

namespace tmc {

namespace {

constexpr std::array<const char*, kNumAccessKinds> kKindNames = {
    "TensorLoadStream",  "TensorStoreElementwise", "FactorRowLoadRandom",
    "FactorRowStoreStream", "PartialStoreElementwise", "PartialLoadStream",
    "PointerLoad",       "PointerStore",
};

constexpr std::uint64_t kTraceMagic = 0x4543415254434d54ull;  // "TMCTRACE" little-endian

}  // namespace

const char* access_kind_name(AccessKind kind) {
  return kKindNames[static_cast<std::size_t>(kind)];
}

std::optional<AccessKind> access_kind_from_name(std::string_view name) {
  for (int i = 0; i < kNumAccessKinds; ++i)
    if (name == kKindNames[i]) return static_cast<AccessKind>(i);
  return std::nullopt;
}

bool access_kind_is_elementwise(AccessKind kind) {
  switch (kind) {
    case AccessKind::TensorStoreElementwise:
    case AccessKind::PartialStoreElementwise:
    case AccessKind::PointerLoad:
    case AccessKind::PointerStore:
      return true;
    default:
      return false;
  }
}

std::uint64_t AccessTrace::total_bytes() const {
  std::uint64_t sum = 0;
  for (const auto& e : events) sum += e.size;
  return sum;
}

AccessCounters AccessCounters::recount(const AccessTrace& trace) {
  AccessCounters c;
  for (const auto& e : trace.events) {
    switch (e.kind) {
      case AccessKind::TensorLoadStream: c.tensor_element_loads++; break;
      case AccessKind::TensorStoreElementwise: c.tensor_element_stores++; break;
      case AccessKind::FactorRowLoadRandom: c.factor_row_loads++; break;
      case AccessKind::FactorRowStoreStream: c.factor_row_stores++; break;
      case AccessKind::PartialStoreElementwise: c.partial_row_stores++; break;
      case AccessKind::PartialLoadStream: c.partial_row_loads++; break;
      case AccessKind::PointerLoad: c.pointer_loads++; break;
      case AccessKind::PointerStore: c.pointer_stores++; break;
    }
  }
  return c;
}

bool AccessCounters::same_event_counts(const AccessCounters& o) const {
  return tensor_element_loads == o.tensor_element_loads &&
         tensor_element_stores == o.tensor_element_stores &&
         factor_row_loads == o.factor_row_loads && factor_row_stores == o.factor_row_stores &&
         partial_row_stores == o.partial_row_stores && partial_row_loads == o.partial_row_loads &&
         pointer_loads == o.pointer_loads && pointer_stores == o.pointer_stores;
}

AccessCounters& AccessCounters::operator+=(const AccessCounters& o) {
  tensor_element_loads += o.tensor_element_loads;
  tensor_element_stores += o.tensor_element_stores;
  factor_row_loads += o.factor_row_loads;
  factor_row_stores += o.factor_row_stores;
  partial_row_stores += o.partial_row_stores;
  partial_row_loads += o.partial_row_loads;
  pointer_loads += o.pointer_loads;
  pointer_stores += o.pointer_stores;
  fma_count += o.fma_count;
  return *this;
}

AddressMap AddressMap::build(const std::vector<Index>& mode_lengths, Index nnz, int rank,
                             const ElementWidths& widths) {
  if (rank < 1) throw ValidationError("rank must be positive");
  AddressMap map;
  map.num_modes = static_cast<int>(mode_lengths.size());
  map.rank = rank;
  map.widths = widths;

  auto align = [](std::uint64_t v) { return (v + kAlignment - 1) / kAlignment * kAlignment; };
  const std::uint64_t tensor_bytes =
      static_cast<std::uint64_t>(nnz) * widths.tensor_element_bytes(map.num_modes);

  std::uint64_t off = 0;
  map.tensor_base = off;
  off = align(off + tensor_bytes);
  map.remapped_base = off;
  off = align(off + tensor_bytes);
  Index longest = 1;
  for (int m = 0; m < map.num_modes; ++m) {
    map.factor_base.push_back(off);
    std::uint64_t bytes =
        static_cast<std::uint64_t>(mode_lengths[m]) * rank * widths.matrix_element_bytes;
    map.factor_size.push_back(bytes);
    off = align(off + bytes);
    longest = std::max(longest, mode_lengths[m]);
  }
  map.partial_base = off;
  off = align(off + static_cast<std::uint64_t>(nnz) * rank * widths.matrix_element_bytes);
  map.pointer_base = off;
  off = align(off + static_cast<std::uint64_t>(longest) * 4);
  map.total_bytes = off;
  return map;
}

void write_trace_text(const AccessTrace& trace, std::ostream& out) {
  out << "# access trace: sequence kind address size\n";
  out << "# kinds:";
  for (int i = 0; i < kNumAccessKinds; ++i)
    out << ' ' << i << '=' << kKindNames[i];
  out << '\n';
  for (const auto& e : trace.events)
    out << e.sequence << ' ' << static_cast<std::uint32_t>(e.kind) << ' ' << e.address << ' '
        << e.size << '\n';
}

AccessTrace read_trace_text(std::istream& in) {
  AccessTrace trace;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    std::uint64_t seq, kind, addr, size;
    if (!(ls >> seq >> kind >> addr >> size))
      throw ParseError("expected four decimal fields", line_no);
    std::string rest;
    if (ls >> rest) throw ParseError("trailing fields", line_no);
    if (kind >= kNumAccessKinds) throw ParseError("unknown access kind", line_no);
    if (size == 0) throw ParseError("event size must be positive", line_no);
    trace.events.push_back({seq, static_cast<AccessKind>(kind), addr, size});
  }
  return trace;
}

void write_trace_binary(const AccessTrace& trace, std::ostream& out) {
  auto put_u64 = [&](std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
  };
  put_u64(kTraceMagic);
  put_u64(trace.events.size());
  for (const auto& e : trace.events) {
    put_u64(e.sequence);
    put_u64(static_cast<std::uint64_t>(e.kind));
    put_u64(e.address);
    put_u64(e.size);
  }
}

AccessTrace read_trace_binary(std::istream& in) {
  auto get_u64 = [&](std::uint64_t& v) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (in.gcount() != 8) return false;
    v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return true;
  };
  std::uint64_t magic = 0, count = 0;
  if (!get_u64(magic) || magic != kTraceMagic) throw ParseError("not a binary access trace");
  if (!get_u64(count)) throw ParseError("truncated trace header");
  AccessTrace trace;
  trace.events.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint64_t seq, kind, addr, size;
    if (!get_u64(seq) || !get_u64(kind) || !get_u64(addr) || !get_u64(size))
      throw ParseError("truncated trace record " + std::to_string(i));
    if (kind >= kNumAccessKinds) throw ParseError("unknown access kind in record " + std::to_string(i));
    if (size == 0) throw ParseError("zero-size event in record " + std::to_string(i));
    trace.events.push_back({seq, static_cast<AccessKind>(kind), addr, size});
  }
  return trace;
}

void write_trace_text_file(const AccessTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open trace file for writing: " + path);
  write_trace_text(trace, out);
  if (!out.good()) throw IoError("failed writing trace file: " + path);
}

AccessTrace read_trace_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace file: " + path);
  return read_trace_text(in);
}

void write_trace_binary_file(const AccessTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open trace file for writing: " + path);
  write_trace_binary(trace, out);
  if (!out.good()) throw IoError("failed writing trace file: " + path);
}

AccessTrace read_trace_binary_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open trace file: " + path);
  return read_trace_binary(in);
}

}  // namespace tmc
