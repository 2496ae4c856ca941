#pragma once

#include <span>
#include <string>
#include <vector>

#include "smlink/common.hpp"
#include "smlink/modem.hpp"
#include "smlink/txchain.hpp"

namespace smlink {

struct FadingModel {
  enum class Kind { Rician, Rayleigh };

  Kind kind = Kind::Rician;
  double kFactorDb = 33.0;

  static FadingModel rician(double kDb) { return {Kind::Rician, kDb}; }
  static FadingModel rayleigh() { return {Kind::Rayleigh, 0.0}; }

  /// Linear K; exactly 0 for Rayleigh.
  double kLinear() const { return kind == Kind::Rayleigh ? 0.0 : dbToLinear(kFactorDb); }
  /// K in dB for reporting; -inf for Rayleigh.
  double reportedKDb() const;

  bool operator==(const FadingModel&) const = default;
};

/// Per-link attenuation factors, in dB, relative to the weakest link (entry (0,0)).
struct PowerImbalance {
  Eigen::MatrixXd alphaDb;
  std::string profile = "none";

  static PowerImbalance none(int numRx, int numTx);
  /// Receive configuration (I): alpha = [0 0.88; 0.25 1.1] dB (rows: receive antenna).
  static PowerImbalance configurationI();
  /// Receive configuration (II): alpha = [0 1.13; 0.29 1.17] dB.
  static PowerImbalance configurationII();
  static PowerImbalance fromProfile(const std::string& profile, int numRx, int numTx);

  /// Throws ConfigError unless every entry is finite and >= 0 and entry (0,0) is 0.
  void validate() const;
  bool isNone() const { return alphaDb.size() == 0 || alphaDb.isZero(0.0); }
};

struct ChannelRealization {
  CMatrix H;
  FadingModel model;
  PowerImbalance imbalance;
};

struct ImpairmentConfig {
  double noiseVariance = 0.0;       // per complex sample
  double foCyclesPerSample = 0.0;   // |value| < 0.5
  std::uint64_t seed = 0;

  void validate() const;
};

/// h = sqrt(K/(1+K)) + sqrt(1/(1+K)) CN(0,1), then scaled by sqrt(alpha). Entries are
/// drawn column by column (transmit antenna outer, receive antenna inner).
ChannelRealization drawChannel(const FadingModel& model, const PowerImbalance& imbalance, int numRx, int numTx,
                               Rng& rng);

/// y = Hx + n with n ~ CN(0, noiseVariance I). No draws are consumed when the variance is 0.
CVector propagateSymbol(const CVector& x, const CMatrix& H, double noiseVariance, Rng& rng);
inline CVector propagateSymbol(const TransmitVector& x, const ChannelRealization& ch, double noiseVariance, Rng& rng) {
  return propagateSymbol(x.entries, ch.H, noiseVariance, rng);
}

/// A flat channel that applies from sample `begin` until the next segment starts.
struct ChannelSegment {
  std::size_t begin = 0;
  CMatrix H;
};

/// y_r[i] = exp(j 2 pi df i) sum_n h(r,n) x_n[i] + n_r[i]. The offset is common to all
/// receive antennas; noise comes from a stream seeded with imp.seed.
Waveform propagateWaveform(const Waveform& tx, std::span<const ChannelSegment> segments,
                           const ImpairmentConfig& imp);
Waveform propagateWaveform(const Waveform& tx, const CMatrix& H, const ImpairmentConfig& imp);

}  // namespace smlink
