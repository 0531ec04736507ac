#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <sstream>
#include <utility>

#include "ssgc/wnfg.hpp"

using namespace ssgc;

namespace {

std::vector<double> random_spectrum(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::vector<double> z(n);
  for (auto& v : z) v = u(rng);
  return z;
}

// Edge map built straight from the definition, scanning every ordered pair.
std::map<std::pair<std::size_t, std::size_t>, double> brute_edges(const std::vector<double>& z, std::size_t K) {
  std::map<std::pair<std::size_t, std::size_t>, double> out;
  const auto n = static_cast<long>(z.size());
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j) {
      const long d = i > j ? i - j : j - i;
      if (d >= 1 && d <= static_cast<long>(K) && z[i] > z[j])
        out[{static_cast<std::size_t>(i), static_cast<std::size_t>(j)}] = (z[i] - z[j]) / static_cast<double>(i - j);
    }
  return out;
}

std::map<std::pair<std::size_t, std::size_t>, double> csr_edges(const SparseGraph& g) {
  std::map<std::pair<std::size_t, std::size_t>, double> out;
  for (std::size_t i = 0; i < g.n; ++i)
    for (auto e = g.row_ptr[i]; e < g.row_ptr[i + 1]; ++e) out[{i, g.col_idx[e]}] = g.weights[e];
  return out;
}

void expect_csr_invariants(const SparseGraph& g) {
  ASSERT_EQ(g.row_ptr.size(), g.n + 1);
  EXPECT_EQ(g.row_ptr.front(), 0u);
  EXPECT_EQ(g.row_ptr.back(), g.nnz());
  EXPECT_EQ(g.weights.size(), g.col_idx.size());
  for (std::size_t i = 0; i < g.n; ++i) {
    EXPECT_LE(g.row_ptr[i], g.row_ptr[i + 1]);
    for (auto e = g.row_ptr[i]; e < g.row_ptr[i + 1]; ++e) {
      EXPECT_LT(g.col_idx[e], g.n);
      EXPECT_NE(g.col_idx[e], i);
      if (e > g.row_ptr[i]) {
        EXPECT_LT(g.col_idx[e - 1], g.col_idx[e]);
      }
    }
  }
}

}  // namespace

TEST(NearFieldRate, ConvertsToK) {
  EXPECT_EQ(near_field_rate_to_K(0.1, 256), 26u);
  EXPECT_EQ(near_field_rate_to_K(1.0, 256), 255u);
  EXPECT_EQ(near_field_rate_to_K(0.001, 256), 1u);
  EXPECT_EQ(near_field_rate_to_K(0.5, 256), 128u);
  EXPECT_EQ(near_field_rate_to_K(0.3, 10), 3u);
}

TEST(NearFieldRate, RejectsOutOfRange) {
  EXPECT_THROW(near_field_rate_to_K(0.0, 256), std::invalid_argument);
  EXPECT_THROW(near_field_rate_to_K(1.5, 256), std::invalid_argument);
  EXPECT_THROW(near_field_rate_to_K(-0.1, 256), std::invalid_argument);
}

TEST(WnfgConfig, RequiresExactlyOneSetting) {
  EXPECT_EQ(WnfgConfig::with_K(5).resolve(64), 5u);
  EXPECT_EQ(WnfgConfig::with_rate(0.25).resolve(64), 16u);
  EXPECT_THROW(WnfgConfig{}.resolve(64), std::invalid_argument);
  EXPECT_THROW((WnfgConfig{4, 0.1}).resolve(64), std::invalid_argument);
  EXPECT_THROW(WnfgConfig::with_K(64).resolve(64), std::invalid_argument);
  EXPECT_THROW(WnfgConfig::with_K(0).resolve(64), std::invalid_argument);
}

TEST(BuildWnfg, DescendingTriple) {
  const std::vector<double> z{3, 2, 1};
  const auto g = build_wnfg(z, 1);
  ASSERT_EQ(g.nnz(), 2u);
  const auto e = csr_edges(g);
  EXPECT_DOUBLE_EQ(e.at({0, 1}), -1.0);
  EXPECT_DOUBLE_EQ(e.at({1, 2}), -1.0);
}

TEST(BuildWnfg, ConstantSpectrumHasNoEdges) {
  const std::vector<double> z(32, 4.0);
  const auto g = build_wnfg(z, 31);
  EXPECT_EQ(g.nnz(), 0u);
  EXPECT_EQ(g.bytes(), 33u * 4u);
}

TEST(BuildWnfg, MatchesBruteForce) {
  const auto z = random_spectrum(64, 11);
  for (std::size_t K : {1u, 6u, 20u, 63u}) {
    const auto g = build_wnfg(z, K);
    expect_csr_invariants(g);
    const auto got = csr_edges(g);
    const auto want = brute_edges(z, K);
    ASSERT_EQ(got.size(), want.size()) << "K=" << K;
    for (const auto& [ij, w] : want) {
      ASSERT_TRUE(got.count(ij)) << ij.first << "->" << ij.second;
      EXPECT_DOUBLE_EQ(got.at(ij), w);
    }
  }
}

TEST(BuildWnfg, StrictlyDecreasingGivesAllPairs) {
  std::vector<double> z(40);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = 100.0 - static_cast<double>(i);
  const auto g = build_wnfg(z, 39);
  EXPECT_EQ(g.nnz(), 40u * 39u / 2u);
}

TEST(BuildWnfg, DenseBaselineIsFullRange) {
  Spectrum s;
  s.magnitudes = random_spectrum(48, 5);
  s.label = 1;
  const auto d = build_dense_baseline(s);
  EXPECT_EQ(d, build_wnfg(s, 47));
  EXPECT_EQ(d.label, 1);
}

TEST(BuildWnfg, RejectsBadInput) {
  const std::vector<double> one{1.0};
  EXPECT_THROW(build_wnfg(one, 1), std::invalid_argument);
  const auto z = random_spectrum(8, 1);
  EXPECT_THROW(build_wnfg(z, 0), std::invalid_argument);
  EXPECT_THROW(build_wnfg(z, 8), std::invalid_argument);
}

TEST(BuildWnfg, EdgeCountMatchesClosedForm) {
  // Distinct values give exactly one stored direction for every in-range pair.
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 16 + static_cast<std::size_t>(trial) * 3;
    const std::size_t K = 1 + static_cast<std::size_t>(trial) % (n - 1);
    const auto g = build_wnfg(random_spectrum(n, 1000 + trial), K);
    const double expected = static_cast<double>(K * n) - static_cast<double>(K * (K + 1)) / 2.0;
    EXPECT_NEAR(static_cast<double>(g.nnz()), expected, 0.01 * expected) << "n=" << n << " K=" << K;
    EXPECT_LE(g.nnz(), K * n);
  }
}

TEST(BuildWnfg, Deterministic) {
  const auto z = random_spectrum(128, 3);
  EXPECT_EQ(build_wnfg(z, 13), build_wnfg(z, 13));
}

TEST(BuildWnfg, DenseFormIsAntisymmetric) {
  const auto g = build_wnfg(random_spectrum(24, 8), 7);
  const auto a = g.to_dense();
  for (std::size_t i = 0; i < g.n; ++i)
    for (std::size_t j = 0; j < g.n; ++j) EXPECT_EQ(a[i * g.n + j], -a[j * g.n + i]);
}

TEST(BuildWnfg, SmallerKNeverAddsEdges) {
  const auto z = random_spectrum(256, 21);
  std::size_t prev = 0;
  for (std::size_t K : {1u, 4u, 26u, 128u, 255u}) {
    const auto nnz = build_wnfg(z, K).nnz();
    EXPECT_GE(nnz, prev);
    prev = nnz;
  }
}

TEST(Matvec, TwoNodes) {
  const std::vector<double> z{5.0, 2.0};
  const auto g = build_wnfg(z, 1);
  const double w = (5.0 - 2.0) / (0.0 - 1.0);
  const auto out = adjacency_matvec(g, std::vector<double>{0.7, -1.3});
  EXPECT_DOUBLE_EQ(out[0], w * -1.3);
  EXPECT_DOUBLE_EQ(out[1], -w * 0.7);
}

TEST(Matvec, MatchesDenseProduct) {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 10; ++t) {
    const auto g = build_wnfg(random_spectrum(32, 200 + t), 1 + static_cast<std::size_t>(t) * 3);
    std::vector<double> v(32);
    for (auto& x : v) x = nd(rng);
    const auto a = g.to_dense();
    const auto got = adjacency_matvec(g, v);
    for (std::size_t i = 0; i < 32; ++i) {
      double want = 0.0;
      for (std::size_t j = 0; j < 32; ++j) want += a[i * 32 + j] * v[j];
      EXPECT_NEAR(got[i], want, 1e-12 * (1.0 + std::abs(want)));
    }
  }
}

TEST(Matvec, RejectsLengthMismatch) {
  const auto g = build_wnfg(random_spectrum(8, 2), 2);
  EXPECT_THROW(adjacency_matvec(g, std::vector<double>(7)), std::invalid_argument);
}

TEST(GraphStats, ByteAccounting) {
  const auto g = build_wnfg(random_spectrum(100, 9), 10);
  const auto st = graph_stats(g, 0.5);
  EXPECT_EQ(st.nnz, g.nnz());
  EXPECT_EQ(st.bytes, 101u * 4u + g.nnz() * 4u + g.nnz() * 8u);
  EXPECT_DOUBLE_EQ(st.build_seconds, 0.5);
}

TEST(GraphStats, TimedBuildMatchesPlainBuild) {
  Spectrum s;
  s.magnitudes = random_spectrum(64, 4);
  const auto [g, st] = build_wnfg_timed(s, 6);
  EXPECT_EQ(g, build_wnfg(s, 6));
  EXPECT_EQ(st.nnz, g.nnz());
  EXPECT_GE(st.build_seconds, 0.0);
}

TEST(GraphDump, RoundTrip) {
  const auto g = build_wnfg(random_spectrum(50, 31), 9);
  std::stringstream ss;
  write_graph_dump(ss, g);
  const auto back = read_graph_dump(ss);
  EXPECT_EQ(back.n, g.n);
  EXPECT_EQ(back.K, g.K);
  EXPECT_EQ(back.row_ptr, g.row_ptr);
  EXPECT_EQ(back.col_idx, g.col_idx);
  EXPECT_EQ(back.weights, g.weights);
}

TEST(GraphDump, RejectsTruncation) {
  std::stringstream ss("4 3 2\n0 1 1.0\n");
  EXPECT_THROW(read_graph_dump(ss), std::runtime_error);
  std::stringstream bad("4 2 2\n2 1 1.0\n0 1 1.0\n");
  EXPECT_THROW(read_graph_dump(bad), std::runtime_error);
}
