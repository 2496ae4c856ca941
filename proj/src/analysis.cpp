#include "smlink/analysis.hpp"

#include <gsl/gsl_cdf.h>
#include <gsl/gsl_sf_bessel.h>

#include <algorithm>
#include <boost/math/distributions/non_central_chi_squared.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <thread>

namespace smlink {

double qFunction(double omega) { return 0.5 * std::erfc(omega / std::numbers::sqrt2); }

double pairwiseErrorProbability(const TransmitVector& xt, const TransmitVector& x, const CMatrix& H, double gammaEx) {
  if (gammaEx < 0.0) throw ContractViolation("gamma_ex must be >= 0");
  if (xt.entries.size() != H.cols() || x.entries.size() != H.cols())
    throw ContractViolation("transmit vector length does not match channel width");
  const double d2 = (H * (xt.entries - x.entries)).squaredNorm();
  return qFunction(std::sqrt(gammaEx * d2));
}

void BoundConfig::validate() const {
  if (channelDraws < 1) throw ConfigError("channel draws must be >= 1");
  if (snrGridDb.empty()) throw ConfigError("SNR grid is empty");
  if (!std::is_sorted(snrGridDb.begin(), snrGridDb.end())) throw ConfigError("SNR grid must be ascending");
  if (numRx < 1 || !isPowerOfTwo(numTx)) throw ConfigError("invalid antenna counts");
}

namespace {

struct PairTable {
  std::vector<std::size_t> from, to;
  std::vector<double> weight;  // N(xt, x) / (m 2^m)
};

PairTable buildPairs(const CandidateSet& set) {
  PairTable t;
  const double norm = 1.0 / (static_cast<double>(set.bitsPerVector) * static_cast<double>(set.size()));
  for (std::size_t i = 0; i < set.size(); ++i)
    for (std::size_t j = 0; j < set.size(); ++j) {
      if (i == j) continue;
      const int d = labelDistance(set, i, j);
      if (d == 0) continue;
      t.from.push_back(i);
      t.to.push_back(j);
      t.weight.push_back(d * norm);
    }
  return t;
}

// Per-pair squared distances ||H (x_i - x_j)||^2.
std::vector<double> pairDistances(const CandidateSet& set, const PairTable& pairs, const CMatrix& H) {
  std::vector<CVector> images(set.size());
  for (std::size_t k = 0; k < set.size(); ++k) images[k] = H * set.vectors[k].entries;
  std::vector<double> d(pairs.weight.size());
  for (std::size_t p = 0; p < d.size(); ++p) d[p] = (images[pairs.from[p]] - images[pairs.to[p]]).squaredNorm();
  return d;
}

}  // namespace

double unionBoundFixedChannel(const CandidateSet& candidates, const CMatrix& H, double gammaEx) {
  const auto pairs = buildPairs(candidates);
  const auto d = pairDistances(candidates, pairs, H);
  double sum = 0.0;
  for (std::size_t p = 0; p < d.size(); ++p) sum += pairs.weight[p] * qFunction(std::sqrt(gammaEx * d[p]));
  return sum;
}

std::vector<BoundPoint> unionBoundAber(const BoundConfig& cfg, std::uint64_t seed, int workers) {
  cfg.validate();
  const auto constellation = buildConstellation(cfg.order);
  if (bitsPerChannelUse(cfg.scheme, cfg.numTx, cfg.order) > 16)
    throw ConfigError("candidate set larger than 2^16 vectors");
  const auto candidates = buildCandidateSet(cfg.scheme, cfg.numTx, constellation);
  const auto pairs = buildPairs(candidates);
  const std::size_t G = cfg.snrGridDb.size();
  std::vector<double> gamma(G);
  for (std::size_t g = 0; g < G; ++g) gamma[g] = dbToLinear(cfg.snrGridDb[g]) / 2.0;

  const auto draws = static_cast<std::size_t>(cfg.channelDraws);
  std::vector<double> perDraw(draws * G, 0.0);
  auto work = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t d = lo; d < hi; ++d) {
      Rng rng = makeStream(seed, d);
      const auto ch = drawChannel(cfg.fading, cfg.imbalance, cfg.numRx, cfg.numTx, rng);
      const auto dist = pairDistances(candidates, pairs, ch.H);
      for (std::size_t g = 0; g < G; ++g) {
        double s = 0.0;
        for (std::size_t p = 0; p < dist.size(); ++p) s += pairs.weight[p] * qFunction(std::sqrt(gamma[g] * dist[p]));
        perDraw[d * G + g] = s;
      }
    }
  };
  const std::size_t nThreads = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1, draws);
  if (nThreads == 1) {
    work(0, draws);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < nThreads; ++t) pool.emplace_back(work, draws * t / nThreads, draws * (t + 1) / nThreads);
    for (auto& th : pool) th.join();
  }

  std::vector<BoundPoint> out(G);
  for (std::size_t g = 0; g < G; ++g) {
    double s = 0.0;
    for (std::size_t d = 0; d < draws; ++d) s += perDraw[d * G + g];
    out[g] = {cfg.snrGridDb[g], s / static_cast<double>(draws)};
  }
  return out;
}

namespace {

struct RiceLikelihood {
  const std::vector<double>& r;
  double meanLogR;
  double meanSquare;

  double sigma2(double nu) const { return (meanSquare - nu * nu) / 2.0; }

  // Mean log-likelihood along the curve E[r^2] = nu^2 + 2 sigma^2.
  double operator()(double nu) const {
    const double s2 = sigma2(nu);
    const double c = nu / s2;
    double acc = 0.0;
    for (double x : r) {
      const double z = x * c;
      acc += std::log(gsl_sf_bessel_I0_scaled(z)) + z;
    }
    return meanLogR - std::log(s2) - (meanSquare + nu * nu) / (2.0 * s2) + acc / static_cast<double>(r.size());
  }

  double derivative(double nu) const {
    const double s2 = sigma2(nu);
    const double c = nu / s2;
    double acc = 0.0;
    for (double x : r) {
      const double z = x * c;
      acc += x * gsl_sf_bessel_I1_scaled(z) / gsl_sf_bessel_I0_scaled(z);
    }
    acc /= static_cast<double>(r.size());
    const double S = meanSquare;
    return nu / s2 - 4.0 * nu * S / ((S - nu * nu) * (S - nu * nu)) + acc * (s2 + nu * nu) / (s2 * s2);
  }
};

}  // namespace

RicianFit fitRician(std::span<const double> amplitudes) {
  if (amplitudes.size() < 1000) throw DegenerateInput("Rice fit needs at least 1000 samples");
  std::vector<double> r(amplitudes.begin(), amplitudes.end());
  for (double x : r)
    if (!(x >= 0.0) || !std::isfinite(x)) throw DegenerateInput("amplitude samples must be finite and >= 0");
  const auto [mn, mx] = std::minmax_element(r.begin(), r.end());
  if (*mn == *mx) throw DegenerateInput("amplitude samples are all equal");

  const double n = static_cast<double>(r.size());
  double meanLog = 0.0, meanSq = 0.0, mean = 0.0;
  for (double x : r) {
    meanLog += std::log(std::max(x, std::numeric_limits<double>::min()));
    meanSq += x * x;
    mean += x;
  }
  RiceLikelihood ll{r, meanLog / n, meanSq / n};

  // The bracket stops short of nu^2 = E[r^2], where sigma vanishes.
  const double hi = std::sqrt(ll.meanSquare) * (1.0 - 1e-12);
  const auto best = boost::math::tools::brent_find_minima([&](double nu) { return -ll(nu); }, 0.0, hi,
                                                          std::numeric_limits<double>::digits);
  double nu = best.first;
  // Polish on the score, which Brent's parabolic steps cannot resolve below ~sqrt(eps).
  const double delta = 1e-6 * hi;
  const double a = std::max(nu - delta, delta * 1e-3), b = std::min(nu + delta, hi);
  if (nu > delta && a < b) {
    const double fa = ll.derivative(a), fb = ll.derivative(b);
    if (fa * fb < 0.0) {
      std::uintmax_t iters = 200;
      const auto root = boost::math::tools::toms748_solve([&](double v) { return ll.derivative(v); }, a, b, fa, fb,
                                                          boost::math::tools::eps_tolerance<double>(50), iters);
      nu = 0.5 * (root.first + root.second);
    }
  }

  // Rayleigh is nested at nu = 0, where the likelihood is flat to fourth order and the
  // Rice estimate of nu^2 converges only as n^(-1/4). Keep nu = 0 unless the likelihood
  // ratio clears the boundary critical value (50:50 mixture of chi2_0 and chi2_1).
  RicianFit fit;
  fit.lrStatistic = std::max(2.0 * n * (ll(nu) - ll(0.0)), 0.0);
  if (fit.lrStatistic < kRayleighCritical) {
    nu = 0.0;
    fit.rayleighSelected = true;
  }
  fit.nu = nu;
  fit.sigma = std::sqrt(ll.sigma2(nu));
  fit.kLinear = nu * nu / (2.0 * ll.sigma2(nu));
  fit.kFactorDb = linearToDb(std::max(fit.kLinear, 1e-30));
  fit.meanAmplitude = mean / n;

  // Goodness of fit: (r / sigma)^2 is noncentral chi-squared, 2 dof, lambda = nu^2 / sigma^2.
  constexpr int kBins = 20;
  const double s2 = ll.sigma2(nu);
  boost::math::non_central_chi_squared_distribution<double> law(2.0, nu * nu / s2);
  std::vector<double> edges;  // interior edges in amplitude
  for (int i = 1; i < kBins; ++i) edges.push_back(std::sqrt(s2 * boost::math::quantile(law, double(i) / kBins)));
  std::vector<double> observed(kBins, 0.0);
  for (double x : r) observed[std::upper_bound(edges.begin(), edges.end(), x) - edges.begin()] += 1.0;
  std::vector<double> expected(kBins, n / kBins);

  // Merge neighbours until each expected count reaches 5.
  std::vector<double> obs, exp;
  double o = 0.0, e = 0.0;
  for (int i = 0; i < kBins; ++i) {
    o += observed[i];
    e += expected[i];
    if (e >= 5.0) {
      obs.push_back(o);
      exp.push_back(e);
      o = e = 0.0;
    }
  }
  if (e > 0.0) {
    if (exp.empty()) {
      obs.push_back(o);
      exp.push_back(e);
    } else {
      obs.back() += o;
      exp.back() += e;
    }
  }
  double stat = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) stat += (obs[i] - exp[i]) * (obs[i] - exp[i]) / exp[i];
  fit.gofStatistic = stat;
  fit.gofBins = static_cast<int>(obs.size());
  const int dof = fit.gofBins - 1 - (fit.rayleighSelected ? 1 : 2);
  fit.gofPValue = dof > 0 ? gsl_cdf_chisq_Q(stat, dof) : 0.0;
  return fit;
}

std::vector<double> sampleRice(double nu, double sigma, std::size_t count, Rng& rng) {
  std::normal_distribution<double> normal;
  std::vector<double> out(count);
  for (auto& v : out) {
    const double re = nu + sigma * normal(rng);
    const double im = sigma * normal(rng);
    v = std::hypot(re, im);
  }
  return out;
}

double EmpiricalCdf::operator()(double x) const {
  const auto it = std::upper_bound(support.begin(), support.end(), x);
  if (it == support.begin()) return 0.0;
  return cumulative[static_cast<std::size_t>(it - support.begin()) - 1];
}

EmpiricalCdf empiricalCdf(std::span<const double> samples) {
  if (samples.empty()) throw ContractViolation("empirical CDF of an empty sample");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  EmpiricalCdf cdf;
  const double n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
    cdf.support.push_back(sorted[i]);
    cdf.cumulative.push_back(i + 1 == sorted.size() ? 1.0 : static_cast<double>(i + 1) / n);
  }
  return cdf;
}

}  // namespace smlink
