#include "smlink/channel.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace smlink {

double FadingModel::reportedKDb() const {
  return kind == Kind::Rayleigh ? -std::numeric_limits<double>::infinity() : kFactorDb;
}

PowerImbalance PowerImbalance::none(int numRx, int numTx) {
  return {Eigen::MatrixXd::Zero(numRx, numTx), "none"};
}

PowerImbalance PowerImbalance::configurationI() {
  Eigen::MatrixXd a(2, 2);
  a << 0.0, 0.88, 0.25, 1.1;
  return {a, "config1"};
}

PowerImbalance PowerImbalance::configurationII() {
  Eigen::MatrixXd a(2, 2);
  a << 0.0, 1.13, 0.29, 1.17;
  return {a, "config2"};
}

PowerImbalance PowerImbalance::fromProfile(const std::string& profile, int numRx, int numTx) {
  if (profile == "none") return none(numRx, numTx);
  PowerImbalance pi;
  if (profile == "config1")
    pi = configurationI();
  else if (profile == "config2")
    pi = configurationII();
  else
    throw ConfigError("unknown power-imbalance profile '" + profile + "'");
  if (numRx != 2 || numTx != 2) throw ConfigError("profile '" + profile + "' is defined for 2x2 only");
  return pi;
}

void PowerImbalance::validate() const {
  if (alphaDb.size() == 0) return;
  if (!alphaDb.allFinite() || alphaDb.minCoeff() < 0.0)
    throw ConfigError("power-imbalance attenuations must be finite and >= 0 dB");
  if (alphaDb(0, 0) != 0.0) throw ConfigError("power-imbalance reference entry (1,1) must be 0 dB");
}

void ImpairmentConfig::validate() const {
  if (!(noiseVariance >= 0.0) || !std::isfinite(noiseVariance)) throw ConfigError("noise variance must be >= 0");
  if (!(std::abs(foCyclesPerSample) < 0.5)) throw ConfigError("frequency offset must satisfy |df| < 0.5");
}

ChannelRealization drawChannel(const FadingModel& model, const PowerImbalance& imbalance, int numRx, int numTx,
                               Rng& rng) {
  if (numRx < 1 || numTx < 1) throw ConfigError("channel dimensions must be positive");
  const bool scaled = imbalance.alphaDb.size() != 0;
  if (scaled && (imbalance.alphaDb.rows() != numRx || imbalance.alphaDb.cols() != numTx))
    throw ConfigError("power-imbalance matrix does not match channel dimensions");
  imbalance.validate();

  const double k = model.kLinear();
  const double los = std::sqrt(k / (1.0 + k));
  const double diffuse = std::sqrt(1.0 / (1.0 + k));
  ComplexGaussian gauss(rng);
  ChannelRealization ch{CMatrix(numRx, numTx), model, scaled ? imbalance : PowerImbalance::none(numRx, numTx)};
  for (int n = 0; n < numTx; ++n) {
    for (int r = 0; r < numRx; ++r) {
      Complex h = los + diffuse * gauss();
      if (scaled) h *= std::sqrt(dbToLinear(imbalance.alphaDb(r, n)));
      ch.H(r, n) = h;
    }
  }
  return ch;
}

CVector propagateSymbol(const CVector& x, const CMatrix& H, double noiseVariance, Rng& rng) {
  if (H.cols() != x.size()) throw ContractViolation("transmit vector length does not match channel width");
  CVector y = H * x;
  if (noiseVariance > 0.0) {
    ComplexGaussian gauss(rng);
    for (Eigen::Index r = 0; r < y.size(); ++r) y(r) += gauss(noiseVariance);
  }
  return y;
}

Waveform propagateWaveform(const Waveform& tx, std::span<const ChannelSegment> segments,
                           const ImpairmentConfig& imp) {
  imp.validate();
  if (segments.empty() || segments.front().begin != 0)
    throw ContractViolation("channel segments must start at sample 0");
  const std::size_t len = tx.length();
  for (const auto& ch : tx.channels)
    if (ch.size() != len) throw ContractViolation("transmit antenna streams differ in length");
  const auto numTx = static_cast<Eigen::Index>(tx.numChannels());
  const Eigen::Index numRx = segments.front().H.rows();
  for (std::size_t s = 0; s < segments.size(); ++s) {
    if (segments[s].H.cols() != numTx || segments[s].H.rows() != numRx)
      throw ContractViolation("channel segment dimensions do not match the waveform");
    if (s > 0 && segments[s].begin <= segments[s - 1].begin)
      throw ContractViolation("channel segments must be strictly increasing");
  }

  Waveform rx;
  rx.sampleRate = tx.sampleRate;
  rx.channels.assign(static_cast<std::size_t>(numRx), ComplexSeries(len));
  Rng rng(imp.seed);
  ComplexGaussian gauss(rng);
  const bool noisy = imp.noiseVariance > 0.0;
  const bool rotate = imp.foCyclesPerSample != 0.0;
  const double omega = 2.0 * std::numbers::pi * imp.foCyclesPerSample;

  std::size_t seg = 0;
  for (std::size_t i = 0; i < len; ++i) {
    while (seg + 1 < segments.size() && segments[seg + 1].begin <= i) ++seg;
    const CMatrix& H = segments[seg].H;
    const Complex phase = rotate ? std::polar(1.0, omega * static_cast<double>(i)) : Complex{1.0, 0.0};
    for (Eigen::Index r = 0; r < numRx; ++r) {
      Complex acc{0.0, 0.0};
      for (Eigen::Index n = 0; n < numTx; ++n) acc += H(r, n) * tx.channels[n][i];
      if (rotate) acc *= phase;
      if (noisy) acc += gauss(imp.noiseVariance);
      rx.channels[r][i] = acc;
    }
  }
  return rx;
}

Waveform propagateWaveform(const Waveform& tx, const CMatrix& H, const ImpairmentConfig& imp) {
  const ChannelSegment seg{0, H};
  return propagateWaveform(tx, std::span(&seg, 1), imp);
}

}  // namespace smlink
