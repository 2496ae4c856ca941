#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "smlink/channel.hpp"
#include "smlink/common.hpp"
#include "smlink/modem.hpp"

namespace smlink {

/// Gaussian tail probability, 0.5 erfc(w / sqrt 2).
double qFunction(double omega);

/// Q(sqrt(gammaEx ||H (xt - x)||^2)).
double pairwiseErrorProbability(const TransmitVector& xt, const TransmitVector& x, const CMatrix& H, double gammaEx);
inline double pairwiseErrorProbability(const TransmitVector& xt, const TransmitVector& x, const ChannelRealization& ch,
                                       double gammaEx) {
  return pairwiseErrorProbability(xt, x, ch.H, gammaEx);
}

struct BoundConfig {
  Scheme scheme = Scheme::SM;
  int numTx = 2;
  int numRx = 2;
  int order = 2;
  FadingModel fading;
  PowerImbalance imbalance;  // empty matrix means no imbalance
  std::vector<double> snrGridDb;
  int channelDraws = 10000;

  void validate() const;
};

struct BoundPoint {
  double snrDb = 0.0;
  double aber = 0.0;  // raw, may exceed 0.5

  double reported() const { return aber > 0.5 ? 0.5 : aber; }
};

/// Union bound on the average bit error rate, with E_H taken as the mean over
/// cfg.channelDraws channel draws. Draw d uses makeStream(seed, d), so the result does
/// not depend on `workers`. gamma_ex = SNR / 2.
std::vector<BoundPoint> unionBoundAber(const BoundConfig& cfg, std::uint64_t seed, int workers = 1);

/// Same sum for one fixed channel matrix.
double unionBoundFixedChannel(const CandidateSet& candidates, const CMatrix& H, double gammaEx);

struct RicianFit {
  double kFactorDb = 0.0;
  double kLinear = 0.0;
  double nu = 0.0;
  double sigma = 0.0;
  double meanAmplitude = 0.0;
  double gofStatistic = 0.0;
  int gofBins = 0;
  double gofPValue = 0.0;
  double lrStatistic = 0.0;       // 2 n (logL(nu) - logL(0))
  bool rayleighSelected = false;  // nu set to 0 because the ratio test did not reject it

  bool fitsAt(double level = 0.05) const { return gofPValue >= level; }
};

/// Boundary 5% critical value for testing nu = 0: chi2_1 quantile at 0.90.
inline constexpr double kRayleighCritical = 2.705543454095404;

/// Maximum-likelihood Rice fit, reduced to Rayleigh when the likelihood-ratio test of
/// nu = 0 does not reject at 5%, plus a chi-squared goodness-of-fit test on 20
/// equal-probability bins of the fitted law (merged until every expected count is at
/// least 5). K = nu^2 / (2 sigma^2), floored at -300 dB when nu vanishes.
/// Throws DegenerateInput on fewer than 1000 samples, negative samples, or constant data.
RicianFit fitRician(std::span<const double> amplitudes);

/// |nu + sigma (g1 + j g2)| with standard normal g1, g2.
std::vector<double> sampleRice(double nu, double sigma, std::size_t count, Rng& rng);

/// Right-continuous step function: value(x) is the fraction of samples <= x.
struct EmpiricalCdf {
  std::vector<double> support;     // sorted distinct sample values
  std::vector<double> cumulative;  // fraction at or below support[i]

  double operator()(double x) const;
};

EmpiricalCdf empiricalCdf(std::span<const double> samples);

}  // namespace smlink
