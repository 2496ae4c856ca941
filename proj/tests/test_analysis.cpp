#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "smlink/analysis.hpp"

using namespace smlink;

namespace {

// Reference values from a 50-digit evaluation of erfc(w / sqrt 2) / 2.
struct QRef {
  double omega;
  double q;
};
constexpr QRef kQRef[] = {
    {-8, 0.9999999999999993779},    {-5, 0.99999971334842812081},   {-2.5, 0.99379033467422386483},
    {-1, 0.84134474606854294859},   {-0.3, 0.61791142218895263307}, {0, 0.5},
    {0.5, 0.30853753872598689636},  {1, 0.15865525393145705141},    {1.2816, 0.099991500097675153436},
    {2, 0.0227501319481792072},     {3, 0.0013498980316300945267},  {4.5, 3.3976731247300604017e-6},
    {6, 9.865876450376981407e-10},  {8, 6.2209605742717841235e-16},
};

TransmitVector vec(std::initializer_list<Complex> v) {
  TransmitVector t;
  t.entries.resize(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (const auto& x : v) t.entries(i++) = x;
  return t;
}

double qRef(double w) { return 0.5 * std::erfc(w / std::sqrt(2.0)); }

BoundConfig smBpsk(int draws) {
  BoundConfig cfg;
  cfg.scheme = Scheme::SM;
  cfg.fading = FadingModel::rician(33.0);
  cfg.imbalance = PowerImbalance::configurationI();
  cfg.snrGridDb = {-10, 0, 5, 10, 15, 20, 25, 30, 35, 40, 50, 60};
  cfg.channelDraws = draws;
  return cfg;
}

std::vector<double> riceSamples(double kDb, std::size_t n, std::uint64_t stream) {
  const double k = dbToLinear(kDb);
  Rng rng = makeStream(42, stream);
  return sampleRice(std::sqrt(k / (1 + k)), std::sqrt(1 / (2 * (1 + k))), n, rng);
}

}  // namespace

TEST_CASE("Q function") {
  for (const auto& r : kQRef) {
    CAPTURE(r.omega);
    CHECK(std::abs(qFunction(r.omega) - r.q) <= 1e-12 * r.q);
  }
  CHECK(qFunction(0.0) == 0.5);
  for (double w = -8.0; w <= 8.0; w += 0.37) CHECK(std::abs(qFunction(-w) - (1.0 - qFunction(w))) < 1e-15);
  CHECK(std::abs(qFunction(1.2816) - 0.1) <= 1e-4);
}

TEST_CASE("pairwise error probability") {
  const CMatrix I = CMatrix::Identity(2, 2);
  const auto a = vec({Complex(1, 0), Complex(0, 0)});
  const auto b = vec({Complex(-1, 0), Complex(0, 0)});
  CHECK(std::abs(pairwiseErrorProbability(a, b, I, 1.0) - 0.02275) <= 1e-5);
  CHECK(pairwiseErrorProbability(a, a, I, 3.0) == 0.5);

  CMatrix H(2, 2);
  H << Complex(0.3, 1), Complex(-0.2, 0.4), Complex(1.5, 0), Complex(0.1, -0.7);
  const auto c = vec({Complex(0.2, 0.5), Complex(-0.7, 0.1)});
  CHECK(pairwiseErrorProbability(a, c, H, 2.0) == doctest::Approx(pairwiseErrorProbability(c, a, H, 2.0)));
  const Complex u = std::polar(1.0, 0.9);
  TransmitVector au = a, cu = c;
  au.entries *= u;
  cu.entries *= u;
  CHECK(std::abs(pairwiseErrorProbability(au, cu, H, 2.0) - pairwiseErrorProbability(a, c, H, 2.0)) < 1e-15);
  CHECK_THROWS_AS(pairwiseErrorProbability(a, c, H, -1.0), ContractViolation);
}

TEST_CASE("union bound") {
  SUBCASE("identity channel matches the 12-pair sum") {
    // SM 2x2 BPSK with H = I: 4 same-antenna pairs at distance^2 4 differing in one bit;
    // 8 cross-antenna pairs at distance^2 2, half differing in one bit and half in two.
    const auto set = buildCandidateSet(Scheme::SM, 2, buildConstellation(2));
    const CMatrix I = CMatrix::Identity(2, 2);
    for (double g : {0.1, 1.0, 4.0, 30.0}) {
      const double expect = (4 * qRef(std::sqrt(4 * g)) + 12 * qRef(std::sqrt(2 * g))) / 8.0;
      CHECK(std::abs(unionBoundFixedChannel(set, I, g) - expect) <= 1e-14);
    }
  }
  SUBCASE("line of sight limit") {
    BoundConfig cfg = smBpsk(20);
    // Line of sight scaled by the attenuations, so the columns stay distinguishable.
    cfg.fading = FadingModel::rician(200.0);
    const auto set = buildCandidateSet(Scheme::SM, 2, buildConstellation(2));
    CMatrix los(2, 2);
    for (int r = 0; r < 2; ++r)
      for (int n = 0; n < 2; ++n) los(r, n) = std::sqrt(dbToLinear(cfg.imbalance.alphaDb(r, n)));
    const auto pts = unionBoundAber(cfg, 3);
    for (const auto& p : pts)
      CHECK(p.aber == doctest::Approx(unionBoundFixedChannel(set, los, dbToLinear(p.snrDb) / 2)).epsilon(1e-6));
  }
  SUBCASE("shape and reporting") {
    const auto pts = unionBoundAber(smBpsk(500), 11);
    REQUIRE(pts.size() == 12);
    for (std::size_t i = 1; i < pts.size(); ++i) CHECK(pts[i].aber <= pts[i - 1].aber);
    CHECK(pts.front().aber > 0.5);
    CHECK(pts.front().reported() == 0.5);
    CHECK(pts.back().aber < 1e-6);
    CHECK(pts.back().reported() == pts.back().aber);
  }
  SUBCASE("independent of worker count") {
    const auto one = unionBoundAber(smBpsk(300), 5, 1);
    const auto four = unionBoundAber(smBpsk(300), 5, 4);
    for (std::size_t i = 0; i < one.size(); ++i) CHECK(one[i].aber == four[i].aber);
    const auto other = unionBoundAber(smBpsk(300), 6, 1);
    CHECK(other[5].aber != one[5].aber);
  }
  SUBCASE("imbalance lowers the bound") {
    BoundConfig flat = smBpsk(2000);
    flat.imbalance = PowerImbalance{};
    const auto withPi = unionBoundAber(smBpsk(2000), 8);
    const auto without = unionBoundAber(flat, 8);
    for (std::size_t i = 4; i < withPi.size() - 1; ++i) CHECK(withPi[i].aber < without[i].aber);
  }
  SUBCASE("configuration errors") {
    BoundConfig big = smBpsk(10);
    big.scheme = Scheme::SMX;
    big.numTx = 8;
    big.order = 16;
    big.imbalance = PowerImbalance{};
    CHECK_THROWS_AS(unionBoundAber(big, 1), ConfigError);
    BoundConfig empty = smBpsk(10);
    empty.snrGridDb.clear();
    CHECK_THROWS_AS(unionBoundAber(empty, 1), ConfigError);
    BoundConfig descending = smBpsk(10);
    descending.snrGridDb = {10, 5};
    CHECK_THROWS_AS(unionBoundAber(descending, 1), ConfigError);
    BoundConfig noDraws = smBpsk(0);
    CHECK_THROWS_AS(unionBoundAber(noDraws, 1), ConfigError);
  }
}

TEST_CASE("Rice fit") {
  SUBCASE("measured K range") {
    for (double kDb : {31.0, 33.0, 36.0, 38.0}) {
      CAPTURE(kDb);
      const auto x = riceSamples(kDb, 100000, static_cast<std::uint64_t>(kDb) + 200);
      const auto fit = fitRician(x);
      CHECK(std::abs(fit.kFactorDb - kDb) <= 1.0);
      CHECK(fit.fitsAt(0.05));
      CHECK_FALSE(fit.rayleighSelected);
      CHECK(fit.lrStatistic > 1e4);
      CHECK(fit.gofBins >= 4);
      CHECK(fit.gofBins <= 20);
      CHECK(std::abs(fit.kLinear - fit.nu * fit.nu / (2 * fit.sigma * fit.sigma)) <= 1e-9 * fit.kLinear);
    }
  }
  SUBCASE("Rayleigh") {
    Rng rng = makeStream(42, 77);
    const auto fit = fitRician(sampleRice(0.0, std::sqrt(0.5), 100000, rng));
    CHECK(fit.kFactorDb <= -15.0);
    CHECK(fit.rayleighSelected);
    CHECK(fit.nu == 0.0);
    CHECK(std::abs(fit.sigma - std::sqrt(0.5)) <= 0.01);
    CHECK(fit.fitsAt(0.05));
  }
  SUBCASE("wrong law fails the test") {
    Rng rng = makeStream(42, 78);
    std::uniform_real_distribution<double> u(0.5, 1.5);
    std::vector<double> x(100000);
    for (auto& v : x) v = u(rng);
    CHECK_FALSE(fitRician(x).fitsAt(0.05));
  }
  SUBCASE("error shrinks with more samples") {
    // Mean absolute K error over several seeds at each size.
    double prev = 1e9;
    for (std::size_t n : {2000u, 8000u, 32000u}) {
      double err = 0.0;
      for (int s = 0; s < 6; ++s) err += std::abs(fitRician(riceSamples(33.0, n, 1000 + 10 * n + s)).kFactorDb - 33.0);
      CHECK(err < prev);
      prev = err;
    }
  }
  SUBCASE("bad input") {
    CHECK_THROWS_AS(fitRician(std::vector<double>(999, 1.0)), DegenerateInput);
    CHECK_THROWS_AS(fitRician(std::vector<double>(5000, 1.0)), DegenerateInput);
    auto x = riceSamples(33.0, 2000, 5);
    x[10] = -0.1;
    CHECK_THROWS_AS(fitRician(x), DegenerateInput);
    x[10] = std::nan("");
    CHECK_THROWS_AS(fitRician(x), DegenerateInput);
  }
}

TEST_CASE("empirical CDF") {
  const std::vector<double> one{2.5};
  const auto c1 = empiricalCdf(one);
  CHECK(c1(2.4) == 0.0);
  CHECK(c1(2.5) == 1.0);
  CHECK(c1(9.0) == 1.0);

  const std::vector<double> dup{3, 1, 3, 3, 2, 1, 3, 3};
  const auto c2 = empiricalCdf(dup);
  REQUIRE(c2.support == std::vector<double>{1, 2, 3});
  CHECK(c2.cumulative[0] == 2.0 / 8);
  CHECK(c2.cumulative[1] == 3.0 / 8);
  CHECK(c2.cumulative.back() == 1.0);
  CHECK(c2(1.5) == 2.0 / 8);
  CHECK(c2(0.9) == 0.0);

  Rng rng = makeStream(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x(100000);
  for (auto& v : x) v = u(rng);
  const auto c3 = empiricalCdf(x);
  double worst = 0.0;
  for (std::size_t i = 0; i < c3.support.size(); ++i) worst = std::max(worst, std::abs(c3.cumulative[i] - c3.support[i]));
  CHECK(worst <= 0.01);
  CHECK(std::is_sorted(c3.cumulative.begin(), c3.cumulative.end()));

  CHECK_THROWS_AS(empiricalCdf(std::vector<double>{}), ContractViolation);
}
