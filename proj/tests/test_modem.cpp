#include <bit>
#include <cmath>
#include <numeric>
#include <set>

#include "doctest.h"
#include "smlink/modem.hpp"

using namespace smlink;

namespace {

BitVector bitsOf(std::uint32_t value, int width) {
  BitVector b(static_cast<std::size_t>(width));
  for (int i = 0; i < width; ++i) b[i] = static_cast<std::uint8_t>((value >> (width - 1 - i)) & 1u);
  return b;
}

CMatrix randomMatrix(Rng& rng, int rows, int cols) {
  ComplexGaussian g(rng);
  CMatrix H(rows, cols);
  for (Eigen::Index i = 0; i < H.size(); ++i) H(i) = g();
  return H;
}

}  // namespace

TEST_CASE("constellations have unit energy and Gray neighbours") {
  for (int M : {2, 4, 16, 64, 256}) {
    const auto c = buildConstellation(M);
    REQUIRE(c.points.size() == static_cast<std::size_t>(M));
    double energy = 0.0;
    for (const auto& p : c.points) energy += std::norm(p);
    CHECK(std::abs(energy / M - 1.0) < 1e-12);

    std::vector<std::uint32_t> sorted = c.labels;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < M; ++i) CHECK(sorted[i] == static_cast<std::uint32_t>(i));

    // Nearest neighbours on the grid differ in exactly one bit.
    double dmin = 1e9;
    for (int i = 0; i < M; ++i)
      for (int j = i + 1; j < M; ++j) dmin = std::min(dmin, std::abs(c.points[i] - c.points[j]));
    for (int i = 0; i < M; ++i)
      for (int j = i + 1; j < M; ++j)
        if (std::abs(std::abs(c.points[i] - c.points[j]) - dmin) < 1e-9)
          CHECK(std::popcount(c.labels[i] ^ c.labels[j]) == 1);
  }
}

TEST_CASE("BPSK and QPSK points") {
  const auto b = buildConstellation(2);
  CHECK(b.points[0] == Complex(1.0, 0.0));
  CHECK(b.points[1] == Complex(-1.0, 0.0));
  CHECK(b.labels[0] == 0u);
  CHECK(b.labels[1] == 1u);
  const auto q = buildConstellation(4);
  for (const auto& p : q.points) {
    CHECK(std::abs(std::abs(p.real()) - 1.0 / std::sqrt(2.0)) < 1e-15);
    CHECK(std::abs(std::abs(p.imag()) - 1.0 / std::sqrt(2.0)) < 1e-15);
  }
}

TEST_CASE("unsupported orders are rejected") {
  for (int M : {0, 1, 3, 8, 32, 128, 512}) CHECK_THROWS_AS(buildConstellation(M), ConfigError);
}

TEST_CASE("SM mapping puts the first bits on the antenna index") {
  const BitVector b00{0, 0}, b10{1, 0};
  auto x = smModulate(b00, 2, 2);
  REQUIRE(x.size() == 1);
  CHECK(x[0].second.entries(0) == Complex(1.0, 0.0));
  CHECK(x[0].second.entries(1) == Complex(0.0, 0.0));
  x = smModulate(b10, 2, 2);
  CHECK(x[0].first == SmSymbol{1, 0});
  CHECK(x[0].second.entries(1) == Complex(1.0, 0.0));

  // N_t = 4, QPSK, bits 11 01: antenna 3 (zero-based), QPSK point labelled 01.
  const auto qpsk = buildConstellation(4);
  const BitVector b{1, 1, 0, 1};
  const auto y = smModulate(b, 4, qpsk);
  CHECK(y[0].first.antenna == 3);
  CHECK(y[0].second.entries(3) == qpsk.points[qpsk.indexOfLabel[1]]);
  for (int a = 0; a < 3; ++a) CHECK(y[0].second.entries(a) == Complex(0.0, 0.0));
}

TEST_CASE("SM mapping is a bijection with one active antenna") {
  for (int nt : {2, 4, 8}) {
    for (int M : {2, 4, 16}) {
      const auto c = buildConstellation(M);
      const int m = bitsPerChannelUse(Scheme::SM, nt, M);
      std::set<std::pair<int, int>> seen;
      for (std::uint32_t v = 0; v < (1u << m); ++v) {
        const auto bits = bitsOf(v, m);
        const auto out = smModulate(bits, nt, c);
        REQUIRE(out.size() == 1);
        const auto& [sym, vec] = out[0];
        int nonzero = 0;
        for (Eigen::Index k = 0; k < vec.entries.size(); ++k) nonzero += vec.entries(k) != Complex(0.0, 0.0);
        CHECK(nonzero == 1);
        CHECK(static_cast<std::uint32_t>(sym.antenna) == v >> c.bitsPerSymbol());
        seen.insert({sym.antenna, sym.symbol});
        const std::vector<SmSymbol> syms{sym};
        CHECK(demapSm(syms, nt, c) == bits);
      }
      CHECK(seen.size() == (1u << m));
    }
  }
}

TEST_CASE("SMX mapping scales per-antenna symbols") {
  const double s = 1.0 / std::sqrt(2.0);
  const BitVector b01{0, 1}, b00{0, 0};
  auto x = smxModulate(b01, 2, 2);
  CHECK(std::abs(x[0].entries(0) - Complex(s, 0)) < 1e-15);
  CHECK(std::abs(x[0].entries(1) - Complex(-s, 0)) < 1e-15);
  x = smxModulate(b00, 2, 2);
  CHECK(std::abs(x[0].entries(1) - Complex(s, 0)) < 1e-15);

  for (auto [nt, M] : {std::pair{2, 4}, std::pair{4, 2}, std::pair{2, 16}}) {
    const auto c = buildConstellation(M);
    const int m = bitsPerChannelUse(Scheme::SMX, nt, M);
    double energy = 0.0;
    for (std::uint32_t v = 0; v < (1u << m); ++v) {
      const auto bits = bitsOf(v, m);
      const auto vecs = smxModulate(bits, nt, c);
      energy += vecs[0].entries.squaredNorm();
      CHECK(demapSmx(vecs, c) == bits);
    }
    CHECK(std::abs(energy / (1u << m) - 1.0) < 1e-12);
  }
}

TEST_CASE("bit counts that do not fill a block are framing errors") {
  const BitVector three{0, 1, 1};
  CHECK_THROWS_AS(smModulate(three, 2, 2), FramingError);
  CHECK_THROWS_AS(smxModulate(three, 2, 4), FramingError);
  CHECK_THROWS_AS(smModulate(BitVector{0, 1}, 3, 2), ConfigError);
}

TEST_CASE("random streams round-trip through modulation") {
  Rng rng = makeStream(11);
  const auto c = buildConstellation(16);
  const auto bits = randomBits(rng, 4 * 6 * 100);
  std::vector<SmSymbol> syms;
  for (auto& p : smModulate(bits, 4, c)) syms.push_back(p.first);
  CHECK(demapSm(syms, 4, c) == bits);
  CHECK(demapSmx(smxModulate(bits, 2, c), c) == bits);
}

TEST_CASE("candidate sets enumerate every label once") {
  const auto c = buildConstellation(4);
  const auto sm = buildCandidateSet(Scheme::SM, 4, c);
  CHECK(sm.size() == 16);
  CHECK(sm.bitsPerVector == 4);
  for (std::size_t k = 0; k < sm.size(); ++k) {
    // The label maps back to the stored vector.
    const auto out = smModulate(sm.labels[k], 4, c);
    CHECK((out[0].second.entries - sm.vectors[k].entries).norm() == 0.0);
    CHECK(out[0].first.antenna == static_cast<int>(k / 4));
  }
  const auto smx = buildCandidateSet(Scheme::SMX, 2, c);
  CHECK(smx.size() == 16);
  for (std::size_t k = 0; k < smx.size(); ++k) {
    const auto out = smxModulate(smx.labels[k], 2, c);
    CHECK((out[0].entries - smx.vectors[k].entries).norm() < 1e-15);
  }
  CHECK(labelDistance(sm, 0, 0) == 0);
  CHECK_THROWS_AS(buildCandidateSet(Scheme::SMX, 8, buildConstellation(16)), ConfigError);
}

TEST_CASE("ML detection") {
  const auto c = buildConstellation(2);
  const auto set = buildCandidateSet(Scheme::SM, 2, c);

  SUBCASE("identity channel") {
    CVector y(2);
    y << 1.0, 0.0;
    const auto x = mlDetect(y, CMatrix::Identity(2, 2), set);
    CHECK(x.entries(0) == Complex(1.0, 0.0));
    CHECK(x.entries(1) == Complex(0.0, 0.0));
  }
  SUBCASE("noiseless recovery") {
    Rng rng = makeStream(3);
    for (int trial = 0; trial < 50; ++trial) {
      const CMatrix H = randomMatrix(rng, 2, 2);
      for (std::size_t k = 0; k < set.size(); ++k) {
        const CVector y = H * set.vectors[k].entries;
        CHECK(mlDetectIndex(y, H, set) == k);
      }
    }
  }
  SUBCASE("ties go to the lowest index") {
    const CVector y = CVector::Zero(2);
    CHECK(mlDetectIndex(y, CMatrix::Identity(2, 2), set) == 0);
    CHECK(smMlDetect(y, CMatrix::Identity(2, 2), 2, c) == SmSymbol{0, 0});
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(mlDetectIndex(CVector::Zero(3), CMatrix::Identity(2, 2), set), ContractViolation);
    CHECK_THROWS_AS(smMlDetect(CVector::Zero(2), CMatrix::Identity(2, 3), 2, c), ContractViolation);
  }
}

TEST_CASE("SM detector agrees with exhaustive ML and the cached detector") {
  Rng rng = makeStream(5);
  ComplexGaussian g(rng);
  for (int nt : {2, 4, 8}) {
    for (int M : {2, 4}) {
      const auto c = buildConstellation(M);
      const auto set = buildCandidateSet(Scheme::SM, nt, c);
      for (int trial = 0; trial < 200; ++trial) {
        const CMatrix H = randomMatrix(rng, 2, nt);
        const std::size_t k = trial % set.size();
        CVector y = H * set.vectors[k].entries;
        for (Eigen::Index r = 0; r < y.size(); ++r) y(r) += g(0.5);
        const std::size_t ref = mlDetectIndex(y, H, set);
        const auto sm = smMlDetect(y, H, nt, c);
        CHECK(static_cast<std::size_t>(sm.antenna * M + sm.symbol) == ref);
        CHECK(CachedMlDetector(set, H).detect(y) == ref);
      }
    }
  }
  // Noiseless: second antenna sending -1.
  const auto c = buildConstellation(2);
  const CMatrix H = randomMatrix(rng, 2, 2);
  const CVector y = -H.col(1);
  CHECK(smMlDetect(y, H, 2, c) == SmSymbol{1, 1});
}

TEST_CASE("receiver complexity") {
  auto sm = receiverComplexity(Scheme::SM, 2, 2, 2);
  auto smx = receiverComplexity(Scheme::SMX, 2, 2, 2);
  CHECK(sm.realMultiplications == 64);
  CHECK(smx.realMultiplications == 96);

  auto r4 = receiverComplexity(Scheme::SM, 4, 1, 4);
  CHECK(r4.relativeReduction.numerator == 60);
  CHECK(r4.relativeReduction.denominator == 1);
  CHECK(r4.relativeReductionPercent == doctest::Approx(60.0));

  auto r128 = receiverComplexity(Scheme::SM, 128, 1, 8);
  CHECK(r128.relativeReduction.numerator == 12700);
  CHECK(r128.relativeReduction.denominator == 129);
  CHECK(std::lround(r128.relativeReductionPercent) == 98);

  for (int nt : {2, 4, 8, 16, 32, 64}) {
    for (int nr : {1, 2, 4}) {
      for (int m : {1, 2, 5}) {
        const auto a = receiverComplexity(Scheme::SM, nt, nr, m);
        const auto b = receiverComplexity(Scheme::SMX, nt, nr, m);
        CHECK(a.realMultiplications == 8LL * nr * (1LL << m));
        CHECK(b.realMultiplications == 4LL * (nt + 1) * nr * (1LL << m));
        // 100 (1 - 2/(nt+1)) = 100 (nt-1)/(nt+1), in lowest terms.
        const long long num = 100LL * (nt - 1), den = nt + 1, g = std::gcd(num, den);
        CHECK(a.relativeReduction.numerator == num / g);
        CHECK(a.relativeReduction.denominator == den / g);
      }
    }
  }
  CHECK_THROWS_AS(receiverComplexity(Scheme::SM, 3, 1, 1), ConfigError);
  CHECK_THROWS_AS(receiverComplexity(Scheme::SM, 4, 0, 1), ConfigError);
  CHECK_THROWS_AS(receiverComplexity(Scheme::SM, 4, 1, 0), ConfigError);
}
