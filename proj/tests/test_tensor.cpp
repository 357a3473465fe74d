#include <cstdint>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "reference_models.hpp"
#include "tensormc/tensor.hpp"

using namespace tmc;
using tmc_test::make_tensor;
using tmc_test::random_tensor;

namespace {

// Multiset view of a tensor's nonzeros, independent of storage order.
std::multiset<std::pair<std::vector<Index>, double>> nonzero_multiset(const SparseTensorCOO& t) {
  std::multiset<std::pair<std::vector<Index>, double>> out;
  for (Index z = 0; z < t.nnz(); ++z) {
    std::vector<Index> c(t.num_modes);
    for (int m = 0; m < t.num_modes; ++m) c[m] = t.coord(z, m);
    out.emplace(std::move(c), t.values[z]);
  }
  return out;
}

}  // namespace

TEST_CASE("parse_frostt: single line") {
  const auto t = parse_frostt_text("1 1 1 2.0\n");
  CHECK(t.num_modes == 3);
  CHECK(t.nnz() == 1);
  CHECK(t.mode_lengths == std::vector<Index>{1, 1, 1});
  CHECK(t.coord(0, 0) == 0);
  CHECK(t.coord(0, 1) == 0);
  CHECK(t.coord(0, 2) == 0);
  CHECK(t.values[0] == 2.0);
  CHECK(!t.sort_mode.has_value());
  t.validate();
}

TEST_CASE("parse_frostt: five lines spanning a 2x3x4 shape") {
  const std::string text =
      "1 1 1 1.0\n"
      "2 1 2 2.0\n"
      "1 3 1 3.0\n"
      "2 2 4 4.0\n"
      "1 2 3 5.0\n";
  const auto t = parse_frostt_text(text);
  CHECK(t.nnz() == 5);
  CHECK(t.mode_lengths == std::vector<Index>{2, 3, 4});
  // 1-based file coordinates land 0-based in memory.
  CHECK(t.coord(3, 0) == 1);
  CHECK(t.coord(3, 1) == 1);
  CHECK(t.coord(3, 2) == 3);
  CHECK(t.values[4] == 5.0);
}

TEST_CASE("parse_frostt: comments and blank lines are skipped") {
  const auto t = parse_frostt_text("# header comment\n\n1 2 1.5\n   \n# tail\n2 1 2.5\n");
  CHECK(t.num_modes == 2);
  CHECK(t.nnz() == 2);
  CHECK(t.mode_lengths == std::vector<Index>{2, 2});
}

TEST_CASE("parse_frostt: empty input") {
  CHECK_THROWS_WITH_AS(parse_frostt_text(""), "empty input: cannot infer mode count", ParseError);

  ParseOptions opts;
  opts.num_modes = 3;
  const auto t = parse_frostt_text("# only a comment\n", opts);
  CHECK(t.nnz() == 0);
  CHECK(t.num_modes == 3);
  CHECK(t.mode_lengths == std::vector<Index>{1, 1, 1});
  t.validate();
}

TEST_CASE("parse_frostt: malformed input reports the line number") {
  SUBCASE("wrong token count against inferred arity") {
    try {
      parse_frostt_text("1 1 1 2.0\n1 1 3.0\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }
  SUBCASE("lone token") {
    try {
      parse_frostt_text("2.0\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 1);
    }
  }
  SUBCASE("non-numeric coordinate") {
    try {
      parse_frostt_text("1 x 1 2.0\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 1);
      CHECK(std::string(e.what()).find("not an integer") != std::string::npos);
    }
  }
  SUBCASE("non-numeric value") {
    CHECK_THROWS_AS(parse_frostt_text("1 1 1 abc\n"), ParseError);
  }
  SUBCASE("zero coordinate") {
    try {
      parse_frostt_text("1 1 1 1.0\n1 0 1 2.0\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
      CHECK(std::string(e.what()).find("1-based") != std::string::npos);
    }
  }
  SUBCASE("arity mismatch with explicit mode count") {
    ParseOptions opts;
    opts.num_modes = 4;
    CHECK_THROWS_AS(parse_frostt_text("1 1 1 2.0\n", opts), ParseError);
  }
}

TEST_CASE("parse_frostt: duplicate coordinates") {
  const std::string text = "1 2 1.5\n2 2 9.0\n1 2 2.5\n";
  SUBCASE("rejected by default") {
    try {
      parse_frostt_text(text);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
      CHECK(std::string(e.what()).find("duplicate") != std::string::npos);
    }
  }
  SUBCASE("merged by sum keeps the first position") {
    ParseOptions opts;
    opts.duplicates = DuplicatePolicy::MergeSum;
    const auto t = parse_frostt_text(text, opts);
    CHECK(t.nnz() == 2);
    CHECK(t.coord(0, 0) == 0);
    CHECK(t.coord(0, 1) == 1);
    CHECK(t.values[0] == 4.0);
    CHECK(t.values[1] == 9.0);
  }
}

TEST_CASE("parse_frostt: explicit dimension override") {
  ParseOptions opts;
  opts.mode_lengths = std::vector<Index>{4, 5};
  const auto t = parse_frostt_text("2 3 1.0\n", opts);
  CHECK(t.mode_lengths == std::vector<Index>{4, 5});

  opts.mode_lengths = std::vector<Index>{1, 5};
  CHECK_THROWS_AS(parse_frostt_text("2 3 1.0\n", opts), ValidationError);

  opts.mode_lengths = std::vector<Index>{4, 5, 6};
  CHECK_THROWS_AS(parse_frostt_text("2 3 1.0\n", opts), ValidationError);
}

TEST_CASE("serialize round trip preserves order and exact values") {
  std::mt19937_64 rng(1234);
  for (int rep = 0; rep < 30; ++rep) {
    const int n = 2 + int(rng() % 3);
    const auto t = random_tensor(rng, n, 9, 40);
    ParseOptions opts;
    opts.mode_lengths = t.mode_lengths;
    const auto back = parse_frostt_text(serialize_frostt_text(t), opts);
    REQUIRE(back.num_modes == t.num_modes);
    CHECK(back.mode_lengths == t.mode_lengths);
    CHECK(back.coords == t.coords);
    REQUIRE(back.values.size() == t.values.size());
    for (std::size_t i = 0; i < t.values.size(); ++i) CHECK(back.values[i] == t.values[i]);
  }

  SUBCASE("empty tensor round trips with explicit shape") {
    SparseTensorCOO empty;
    empty.num_modes = 3;
    empty.mode_lengths = {2, 2, 2};
    ParseOptions opts;
    opts.num_modes = 3;
    opts.mode_lengths = empty.mode_lengths;
    const auto back = parse_frostt_text(serialize_frostt_text(empty), opts);
    CHECK(back.nnz() == 0);
    CHECK(back.mode_lengths == empty.mode_lengths);
  }
}

TEST_CASE("sort_by_mode: sorted input is unchanged") {
  const auto t = make_tensor({3, 3}, {{0, 2}, {1, 0}, {2, 1}}, {1.0, 2.0, 3.0});
  const auto s1 = sort_by_mode(t, 0);
  CHECK(s1.coords == t.coords);
  CHECK(s1.values == t.values);
  REQUIRE(s1.sort_mode.has_value());
  CHECK(*s1.sort_mode == 0);
  const auto s2 = sort_by_mode(s1, 0);
  CHECK(s2.coords == s1.coords);
  CHECK(s2.values == s1.values);
}

TEST_CASE("sort_by_mode: empty tensor") {
  SparseTensorCOO t;
  t.num_modes = 2;
  t.mode_lengths = {4, 4};
  const auto s = sort_by_mode(t, 1);
  CHECK(s.nnz() == 0);
  REQUIRE(s.sort_mode.has_value());
  CHECK(*s.sort_mode == 1);
}

TEST_CASE("sort_by_mode: mode out of range") {
  const auto t = make_tensor({2, 2}, {{0, 0}}, {1.0});
  CHECK_THROWS_AS(sort_by_mode(t, 2), ValidationError);
  CHECK_THROWS_AS(sort_by_mode(t, -1), ValidationError);
}

TEST_CASE("sort_by_mode matches the reference comparison sort") {
  std::mt19937_64 rng(77);
  for (int rep = 0; rep < 40; ++rep) {
    const int n = 2 + int(rng() % 3);
    auto t = random_tensor(rng, n, 6, 100);
    for (int mode = 0; mode < n; ++mode) {
      const auto order = tmc_test::reference_sort_order(t, mode);
      const auto s = sort_by_mode(t, mode);
      REQUIRE(s.nnz() == t.nnz());
      for (Index z = 0; z < t.nnz(); ++z) {
        CHECK(s.values[z] == t.values[order[z]]);
        for (int m = 0; m < n; ++m) CHECK(s.coord(z, m) == t.coord(order[z], m));
      }
      CHECK(nonzero_multiset(s) == nonzero_multiset(t));
    }
  }
}

TEST_CASE("build_hypergraph: 2x3x4 with five nonzeros") {
  const auto t = make_tensor({2, 3, 4}, {{0, 0, 0}, {1, 0, 1}, {0, 2, 0}, {1, 1, 3}, {0, 1, 2}},
                             {1, 2, 3, 4, 5});
  const auto h = build_hypergraph(t);
  CHECK(h.num_vertices == 9);
  CHECK(h.num_hyperedges == 5);
  CHECK(h.pins_per_edge == 3);
  CHECK(h.pins.size() == 15);
}

TEST_CASE("build_hypergraph: mode-offset pin encoding") {
  const auto t = make_tensor({2, 3, 4}, {{1, 2, 3}}, {1.0});
  const auto h = build_hypergraph(t);
  REQUIRE(h.pins.size() == 3);
  CHECK(h.pins[0] == 1);
  CHECK(h.pins[1] == 4);
  CHECK(h.pins[2] == 8);
}

TEST_CASE("build_hypergraph: empty tensor") {
  SparseTensorCOO t;
  t.num_modes = 3;
  t.mode_lengths = {2, 3, 4};
  const auto h = build_hypergraph(t);
  CHECK(h.num_hyperedges == 0);
  CHECK(h.num_vertices == 9);
  CHECK(h.pins.empty());
}

TEST_CASE("build_hypergraph: counts and pin bands over random tensors") {
  std::mt19937_64 rng(4242);
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 1 + int(rng() % 4);
    const auto t = random_tensor(rng, n, 8, 60);
    const auto h = build_hypergraph(t);
    Index dim_sum = 0;
    for (Index len : t.mode_lengths) dim_sum += len;
    CHECK(h.num_vertices == dim_sum);
    CHECK(h.num_hyperedges == t.nnz());
    CHECK(Index(h.pins.size()) == t.nnz() * n);
    // Every pin decodes back to its coordinate within the mode's band.
    Index offset = 0;
    std::vector<Index> offsets(n);
    for (int m = 0; m < n; ++m) {
      offsets[m] = offset;
      offset += t.mode_lengths[m];
    }
    for (Index z = 0; z < t.nnz(); ++z)
      for (int m = 0; m < n; ++m) {
        const Index pin = h.pins[std::size_t(z) * n + m];
        CHECK(pin >= offsets[m]);
        CHECK(pin - offsets[m] == t.coord(z, m));
        CHECK(pin - offsets[m] < t.mode_lengths[m]);
      }
  }
}

TEST_CASE("tensor_stats: density and byte accounting") {
  SUBCASE("10x10x10 with 100 nonzeros has density 0.1") {
    std::mt19937_64 rng(5);
    SparseTensorCOO t;
    t.num_modes = 3;
    t.mode_lengths = {10, 10, 10};
    std::set<std::vector<Index>> seen;
    while (t.nnz() < 100) {
      std::vector<Index> c = {Index(rng() % 10), Index(rng() % 10), Index(rng() % 10)};
      if (!seen.insert(c).second) continue;
      t.coords.insert(t.coords.end(), c.begin(), c.end());
      t.values.push_back(1.0);
    }
    const auto s = tensor_stats(t, 4);
    CHECK(s.density == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(s.nnz == 100);
    // 3 coordinates and a value, 4 bytes each.
    CHECK(s.tensor_bytes == 100u * 16u);
  }

  SUBCASE("factor matrix for a 10^7 mode at rank 16 is 640 MB") {
    SparseTensorCOO t;
    t.num_modes = 3;
    t.mode_lengths = {10000000, 5, 5};
    const auto s = tensor_stats(t, 16);
    CHECK(s.factor_matrix_bytes[0] == 640000000ull);
    CHECK(s.factor_matrix_bytes[1] == 5ull * 16 * 4);
  }

  SUBCASE("empty tensor") {
    SparseTensorCOO t;
    t.num_modes = 2;
    t.mode_lengths = {3, 3};
    const auto s = tensor_stats(t, 2);
    CHECK(s.density == 0.0);
    CHECK(s.tensor_bytes == 0);
  }

  SUBCASE("rank must be positive") {
    SparseTensorCOO t;
    t.num_modes = 2;
    t.mode_lengths = {3, 3};
    CHECK_THROWS_AS(tensor_stats(t, 0), ValidationError);
  }

  SUBCASE("custom element widths scale tensor bytes") {
    const auto t = make_tensor({2, 2}, {{0, 0}, {1, 1}}, {1.0, 2.0});
    ElementWidths w;
    w.coordinate_bytes = 8;
    w.value_bytes = 8;
    w.matrix_element_bytes = 8;
    const auto s = tensor_stats(t, 3, w);
    CHECK(s.tensor_bytes == 2u * (2 * 8 + 8));
    CHECK(s.factor_matrix_bytes[0] == 2u * 3 * 8);
  }
}

TEST_CASE("partition: whole interval fits in one range") {
  const auto t = make_tensor({6, 2}, {{0, 0}, {3, 1}, {5, 0}}, {1, 2, 3});
  const auto parts = partition_output_mode(t, 0, 6);
  REQUIRE(parts.size() == 1);
  CHECK(parts[0].begin == 0);
  CHECK(parts[0].end == 6);
  CHECK(parts[0].nnz_count == 3);

  const auto wide = partition_output_mode(t, 0, 100);
  CHECK(wide.size() == 1);
}

TEST_CASE("partition: span cap forces ceil(I / max_pointers) ranges") {
  // 10^7 output coordinates at 32 bits each would need 40 MB of pointer
  // storage, so the range must be cut into at most-max_pointers spans.
  CHECK(10000000ull * 4 == 40000000ull);
  std::vector<Index> counts(10000000, 0);
  const Index mp = 250000;
  const auto parts = partition_from_counts(counts, mp);
  CHECK(Index(parts.size()) == (10000000 + mp - 1) / mp);
  for (const auto& p : parts) CHECK(p.end - p.begin <= mp);
  CHECK(parts.front().begin == 0);
  CHECK(parts.back().end == 10000000);

  const auto odd = partition_from_counts(std::vector<Index>(10, 1), 3);
  CHECK(odd.size() == 4);
}

TEST_CASE("partition: uniform 1000 nonzeros over 100 coords with max_pointers 25") {
  std::vector<Index> counts(100, 10);
  const auto parts = partition_from_counts(counts, 25);
  REQUIRE(parts.size() == 4);
  for (const auto& p : parts) {
    CHECK(p.nnz_count == 250);
    CHECK(p.end - p.begin == 25);
  }

  // Brute-force check: no contiguous split with spans <= 25 balances better.
  // With 4 forced cuts and equal per-coordinate counts the optimum is 0.
  CHECK(parts[3].nnz_count - parts[0].nnz_count == 0);
}

TEST_CASE("partition: uniform counts stay balanced within one coordinate") {
  std::mt19937_64 rng(99);
  for (int rep = 0; rep < 50; ++rep) {
    const Index n = 2 + Index(rng() % 150);
    const Index c = 1 + Index(rng() % 20);
    const Index mp = 1 + Index(rng() % n);
    std::vector<Index> counts(std::size_t(n), c);
    const auto parts = partition_from_counts(counts, mp);
    Index lo = parts[0].nnz_count, hi = parts[0].nnz_count;
    for (const auto& p : parts) {
      lo = std::min(lo, p.nnz_count);
      hi = std::max(hi, p.nnz_count);
    }
    CHECK(hi - lo <= c);
  }
}

TEST_CASE("partition: structural invariants on random counts") {
  std::mt19937_64 rng(2024);
  for (int rep = 0; rep < 200; ++rep) {
    const Index n = 1 + Index(rng() % 200);
    const Index mp = 1 + Index(rng() % (n + 3));
    std::vector<Index> counts(static_cast<std::size_t>(n), 0);
    Index total = 0;
    for (auto& v : counts) {
      v = Index(rng() % 12);
      total += v;
    }
    const auto parts = partition_from_counts(counts, mp);
    REQUIRE(!parts.empty());
    CHECK(Index(parts.size()) >= (n + mp - 1) / mp);
    CHECK(parts.front().begin == 0);
    CHECK(parts.back().end == n);
    Index sum = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const auto& p = parts[i];
      CHECK(p.begin < p.end);
      CHECK(p.end - p.begin <= mp);
      if (i > 0) CHECK(p.begin == parts[i - 1].end);
      Index expect = 0;
      for (Index cc = p.begin; cc < p.end; ++cc) expect += counts[std::size_t(cc)];
      CHECK(p.nnz_count == expect);
      sum += p.nnz_count;
    }
    CHECK(sum == total);
  }
}

TEST_CASE("partition_output_mode matches a per-coordinate histogram") {
  std::mt19937_64 rng(31);
  const auto t = random_tensor(rng, 3, 12, 200);
  for (int mode = 0; mode < 3; ++mode) {
    std::vector<Index> counts(std::size_t(t.mode_lengths[mode]), 0);
    for (Index z = 0; z < t.nnz(); ++z) counts[std::size_t(t.coord(z, mode))]++;
    const Index mp = std::max<Index>(1, t.mode_lengths[mode] / 2);
    const auto a = partition_output_mode(t, mode, mp);
    const auto b = partition_from_counts(counts, mp);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].begin == b[i].begin);
      CHECK(a[i].end == b[i].end);
      CHECK(a[i].nnz_count == b[i].nnz_count);
    }
  }
  CHECK_THROWS_AS(partition_output_mode(t, 3, 4), ValidationError);
}

TEST_CASE("partition: argument validation") {
  CHECK_THROWS_AS(partition_from_counts(std::vector<Index>{1, 2}, 0), ValidationError);
  CHECK_THROWS_AS(partition_from_counts(std::vector<Index>{}, 4), ValidationError);
  CHECK_THROWS_AS(partition_from_counts(std::vector<Index>{1, -1}, 4), ValidationError);
}

TEST_CASE("SparseTensorCOO::validate rejects broken structure") {
  auto t = make_tensor({2, 2}, {{0, 1}}, {1.0});
  t.validate();

  auto bad = t;
  bad.set_coord(0, 1, 2);
  CHECK_THROWS_AS(bad.validate(), ValidationError);

  bad = t;
  bad.set_coord(0, 0, -1);
  CHECK_THROWS_AS(bad.validate(), ValidationError);

  bad = t;
  bad.values.push_back(2.0);
  CHECK_THROWS_AS(bad.validate(), ValidationError);

  bad = t;
  bad.mode_lengths = {2, 0};
  CHECK_THROWS_AS(bad.validate(), ValidationError);

  bad = t;
  bad.sort_mode = 5;
  CHECK_THROWS_AS(bad.validate(), ValidationError);

  SparseTensorCOO none;
  CHECK_THROWS_AS(none.validate(), ValidationError);
}

TEST_CASE("ElementWidths: element byte arithmetic") {
  ElementWidths w;
  CHECK(w.tensor_element_bytes(3) == 16);
  CHECK(w.tensor_element_bytes(5) == 24);
}
