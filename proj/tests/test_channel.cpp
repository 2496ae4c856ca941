#include <cmath>
#include <numbers>

#include "doctest.h"
#include "smlink/channel.hpp"

using namespace smlink;

namespace {

// Moment-based K estimate from E|h|^2 and E|h|^4.
double momentKDb(const std::vector<Complex>& h) {
  double m2 = 0.0, m4 = 0.0;
  for (const auto& v : h) {
    const double p = std::norm(v);
    m2 += p;
    m4 += p * p;
  }
  m2 /= h.size();
  m4 /= h.size();
  const double los = std::sqrt(2.0 * m2 * m2 - m4);
  return linearToDb(los / (m2 - los));
}

Waveform randomWaveform(Rng& rng, int numTx, std::size_t len) {
  ComplexGaussian g(rng);
  Waveform w;
  w.channels.assign(numTx, ComplexSeries(len));
  for (auto& ch : w.channels)
    for (auto& v : ch) v = g(0.01);
  return w;
}

}  // namespace

TEST_CASE("fading models") {
  CHECK(FadingModel::rayleigh().kLinear() == 0.0);
  CHECK(std::isinf(FadingModel::rayleigh().reportedKDb()));
  CHECK(std::abs(FadingModel::rician(33.0).kLinear() - std::pow(10.0, 3.3)) < 1e-9);

  SUBCASE("Rayleigh mean power") {
    Rng rng = makeStream(100);
    double power = 0.0;
    const int draws = 100000;
    for (int d = 0; d < draws; ++d)
      power += drawChannel(FadingModel::rayleigh(), PowerImbalance::none(2, 2), 2, 2, rng).H.cwiseAbs2().sum();
    CHECK(std::abs(power / (4.0 * draws) - 1.0) <= 0.005);
  }
  SUBCASE("large K collapses to the scaled line of sight") {
    Rng rng = makeStream(101);
    const auto pi = PowerImbalance::configurationI();
    const auto ch = drawChannel(FadingModel::rician(90.0), pi, 2, 2, rng);
    for (int r = 0; r < 2; ++r)
      for (int n = 0; n < 2; ++n) {
        const double amp = std::sqrt(dbToLinear(pi.alphaDb(r, n)));
        CHECK(std::abs(ch.H(r, n) - Complex(amp, 0.0)) < 1e-3);
      }
  }
  SUBCASE("K recovered from draws") {
    for (double kDb : {31.0, 33.0, 36.0}) {
      Rng rng = makeStream(102, static_cast<std::uint64_t>(kDb));
      std::vector<Complex> h;
      for (int d = 0; d < 50000; ++d) {
        const auto ch = drawChannel(FadingModel::rician(kDb), PowerImbalance::none(2, 2), 2, 2, rng);
        for (int i = 0; i < 4; ++i) h.push_back(ch.H(i % 2, i / 2));
      }
      CHECK(std::abs(momentKDb(h) - kDb) <= 0.5);
    }
  }
}

TEST_CASE("power imbalance") {
  const auto pi = PowerImbalance::configurationI();
  CHECK(pi.alphaDb(0, 1) == 0.88);
  CHECK(pi.alphaDb(1, 0) == 0.25);
  CHECK(pi.alphaDb(1, 1) == 1.1);
  CHECK(PowerImbalance::configurationII().alphaDb(0, 1) == 1.13);
  CHECK(PowerImbalance::fromProfile("config2", 2, 2).profile == "config2");
  CHECK(PowerImbalance::none(2, 2).isNone());
  CHECK_THROWS_AS(PowerImbalance::fromProfile("config3", 2, 2), ConfigError);
  CHECK_THROWS_AS(PowerImbalance::fromProfile("config1", 4, 2), ConfigError);

  SUBCASE("link power ratio") {
    Rng rng = makeStream(103);
    double p00 = 0.0, p11 = 0.0;
    for (int d = 0; d < 100000; ++d) {
      const auto ch = drawChannel(FadingModel::rayleigh(), pi, 2, 2, rng);
      p00 += std::norm(ch.H(0, 0));
      p11 += std::norm(ch.H(1, 1));
    }
    CHECK(std::abs(p11 / p00 / dbToLinear(1.1) - 1.0) <= 0.01);
  }
  SUBCASE("zero attenuation is bit-identical to none") {
    Rng a = makeStream(104), b = makeStream(104);
    PowerImbalance zeros{Eigen::MatrixXd::Zero(2, 2), "custom"};
    for (int d = 0; d < 100; ++d) {
      const auto x = drawChannel(FadingModel::rician(33.0), zeros, 2, 2, a);
      const auto y = drawChannel(FadingModel::rician(33.0), PowerImbalance{}, 2, 2, b);
      CHECK((x.H - y.H).norm() == 0.0);
    }
  }
  SUBCASE("invalid matrices") {
    Rng rng = makeStream(105);
    Eigen::MatrixXd neg(2, 2);
    neg << 0.0, -0.1, 0.2, 0.3;
    const PowerImbalance negative{neg, "custom"};
    CHECK_THROWS_AS(drawChannel(FadingModel::rician(33.0), negative, 2, 2, rng), ConfigError);
    Eigen::MatrixXd ref(2, 2);
    ref << 0.5, 0.1, 0.2, 0.3;
    const PowerImbalance offset{ref, "custom"};
    CHECK_THROWS_AS(offset.validate(), ConfigError);
    CHECK_THROWS_AS(drawChannel(FadingModel::rician(33.0), pi, 4, 2, rng), ConfigError);
    CHECK_THROWS_AS(drawChannel(FadingModel::rician(33.0), PowerImbalance{}, 0, 2, rng), ConfigError);
  }
}

TEST_CASE("symbol propagation") {
  Rng rng = makeStream(106);
  CMatrix H(2, 2);
  H << Complex(1, 2), Complex(0, -1), Complex(0.5, 0), Complex(-1, 1);
  CVector x(2);
  x << Complex(1, 0), Complex(0, 1);

  Rng quiet = makeStream(7);
  const Rng before = quiet;
  const CVector y = propagateSymbol(x, H, 0.0, quiet);
  CHECK((y - H * x).norm() == 0.0);
  CHECK(quiet == before);

  double noise = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) noise += (propagateSymbol(x, H, 0.25, rng) - H * x).squaredNorm();
  CHECK(std::abs(noise / (2.0 * n) / 0.25 - 1.0) <= 0.01);

  CHECK_THROWS_AS(propagateSymbol(CVector::Zero(3), H, 0.0, rng), ContractViolation);
}

TEST_CASE("waveform propagation") {
  Rng rng = makeStream(107);
  const Waveform tx = randomWaveform(rng, 2, 3000);
  CMatrix H1(2, 2), H2(2, 2);
  H1 << Complex(1, 0.1), Complex(0.2, -0.3), Complex(-0.4, 0.5), Complex(0.9, 0);
  H2 << Complex(0.3, 0), Complex(1, 1), Complex(0, -1), Complex(0.7, 0.2);
  const double df = 0.0123;

  SUBCASE("segments and frequency offset match a direct evaluation") {
    const std::vector<ChannelSegment> segs{{0, H1}, {1200, H2}};
    const auto rx = propagateWaveform(tx, segs, ImpairmentConfig{0.0, df, 0});
    REQUIRE(rx.numChannels() == 2);
    REQUIRE(rx.length() == 3000);
    for (std::size_t i = 0; i < 3000; ++i) {
      const CMatrix& H = i < 1200 ? H1 : H2;
      const Complex rot = std::exp(Complex(0.0, 2.0 * std::numbers::pi * df * static_cast<double>(i)));
      for (int r = 0; r < 2; ++r) {
        const Complex expect = rot * (H(r, 0) * tx.channels[0][i] + H(r, 1) * tx.channels[1][i]);
        CHECK(std::abs(rx.channels[r][i] - expect) <= 1e-12);
      }
    }
  }
  SUBCASE("constant carrier advances by 2 pi df per sample") {
    Waveform one;
    one.channels.assign(1, ComplexSeries(500, Complex(1.0, 0.0)));
    CMatrix I = CMatrix::Identity(1, 1);
    const auto rx = propagateWaveform(one, I, ImpairmentConfig{0.0, df, 0});
    for (std::size_t i = 1; i < 500; ++i)
      CHECK(std::abs(std::arg(rx.channels[0][i] / rx.channels[0][i - 1]) - 2 * std::numbers::pi * df) < 1e-12);
  }
  SUBCASE("noise variance and seeding") {
    Waveform silent;
    silent.channels.assign(2, ComplexSeries(100000));
    const auto a = propagateWaveform(silent, H1, ImpairmentConfig{0.04, 0.0, 5});
    const auto b = propagateWaveform(silent, H1, ImpairmentConfig{0.04, 0.0, 5});
    const auto c = propagateWaveform(silent, H1, ImpairmentConfig{0.04, 0.0, 6});
    CHECK(a.channels == b.channels);
    CHECK(a.channels != c.channels);
    double p = 0.0;
    for (const auto& ch : a.channels)
      for (const auto& v : ch) p += std::norm(v);
    CHECK(std::abs(p / 200000.0 / 0.04 - 1.0) <= 0.01);
  }
  SUBCASE("contract checks") {
    const std::vector<ChannelSegment> late{{5, H1}};
    CHECK_THROWS_AS(propagateWaveform(tx, late, ImpairmentConfig{}), ContractViolation);
    const std::vector<ChannelSegment> unordered{{0, H1}, {100, H2}, {100, H1}};
    CHECK_THROWS_AS(propagateWaveform(tx, unordered, ImpairmentConfig{}), ContractViolation);
    CHECK_THROWS_AS(propagateWaveform(tx, CMatrix::Identity(2, 3), ImpairmentConfig{}), ContractViolation);
    CHECK_THROWS_AS(propagateWaveform(tx, H1, ImpairmentConfig{0.0, 0.5, 0}), ConfigError);
    CHECK_THROWS_AS(propagateWaveform(tx, H1, ImpairmentConfig{-1.0, 0.0, 0}), ConfigError);
  }
}
