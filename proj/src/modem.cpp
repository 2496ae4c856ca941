#include "smlink/modem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace smlink {

std::string toString(Scheme scheme) { return scheme == Scheme::SM ? "SM" : "SMX"; }

Scheme schemeFromString(const std::string& text) {
  std::string upper(text);
  std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
  if (upper == "SM") return Scheme::SM;
  if (upper == "SMX") return Scheme::SMX;
  throw ConfigError("unknown scheme '" + text + "' (expected SM or SMX)");
}

namespace {

std::uint32_t gray(std::uint32_t v) { return v ^ (v >> 1); }

std::uint32_t readBits(std::span<const std::uint8_t> bits, std::size_t offset, int count) {
  std::uint32_t v = 0;
  for (int i = 0; i < count; ++i) v = (v << 1) | (bits[offset + i] & 1U);
  return v;
}

void appendBits(BitVector& out, std::uint32_t value, int count) {
  for (int i = count - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>((value >> i) & 1U));
}

void requireAntennaCount(int numTx) {
  if (!isPowerOfTwo(numTx)) throw ConfigError("number of transmit antennas must be a power of two");
}

int nearestPoint(const Constellation& c, Complex value) {
  int best = 0;
  double bestDist = std::numeric_limits<double>::infinity();
  for (int i = 0; i < c.order; ++i) {
    const double d = std::norm(value - c.points[i]);
    if (d < bestDist) {
      bestDist = d;
      best = i;
    }
  }
  return best;
}

}  // namespace

Constellation buildConstellation(int order) {
  Constellation c;
  c.order = order;
  if (order == 2) {
    c.points = {Complex{1.0, 0.0}, Complex{-1.0, 0.0}};
    c.labels = {0, 1};
  } else if (order == 4 || order == 16 || order == 64 || order == 256) {
    const int side = static_cast<int>(std::lround(std::sqrt(order)));
    const int half = log2Exact(side);
    // Levels -(side-1), ..., side-1; mean energy of the square grid is 2(M-1)/3.
    const double scale = 1.0 / std::sqrt(2.0 * (order - 1) / 3.0);
    for (int i = 0; i < side; ++i) {
      for (int q = 0; q < side; ++q) {
        const double re = (2 * i - (side - 1)) * scale;
        const double im = (2 * q - (side - 1)) * scale;
        c.points.emplace_back(re, im);
        c.labels.push_back((gray(i) << half) | gray(q));
      }
    }
  } else {
    throw ConfigError("unsupported constellation order " + std::to_string(order) +
                      " (supported: 2, 4, 16, 64, 256)");
  }
  c.indexOfLabel.assign(order, -1);
  for (int i = 0; i < order; ++i) c.indexOfLabel[c.labels[i]] = i;
  return c;
}

int bitsPerChannelUse(Scheme scheme, int numTx, int order) {
  requireAntennaCount(numTx);
  const int b = log2Exact(order);
  return scheme == Scheme::SM ? log2Exact(numTx) + b : numTx * b;
}

TransmitVector smTransmitVector(const SmSymbol& symbol, int numTx, const Constellation& constellation) {
  TransmitVector x{CVector::Zero(numTx), Scheme::SM};
  x.entries(symbol.antenna) = constellation.points[symbol.symbol];
  return x;
}

std::vector<std::pair<SmSymbol, TransmitVector>> smModulate(std::span<const std::uint8_t> bits, int numTx,
                                                            const Constellation& constellation) {
  requireAntennaCount(numTx);
  const int antennaBits = log2Exact(numTx);
  const int symbolBits = constellation.bitsPerSymbol();
  const std::size_t m = static_cast<std::size_t>(antennaBits + symbolBits);
  if (bits.size() % m != 0)
    throw FramingError("bit count " + std::to_string(bits.size()) + " is not a multiple of " + std::to_string(m));

  std::vector<std::pair<SmSymbol, TransmitVector>> out;
  out.reserve(bits.size() / m);
  for (std::size_t off = 0; off < bits.size(); off += m) {
    SmSymbol s;
    s.antenna = static_cast<int>(readBits(bits, off, antennaBits));
    s.symbol = constellation.indexOfLabel[readBits(bits, off + antennaBits, symbolBits)];
    out.emplace_back(s, smTransmitVector(s, numTx, constellation));
  }
  return out;
}

std::vector<std::pair<SmSymbol, TransmitVector>> smModulate(std::span<const std::uint8_t> bits, int numTx,
                                                            int order) {
  return smModulate(bits, numTx, buildConstellation(order));
}

std::vector<TransmitVector> smxModulate(std::span<const std::uint8_t> bits, int numTx,
                                        const Constellation& constellation) {
  requireAntennaCount(numTx);
  const int symbolBits = constellation.bitsPerSymbol();
  const std::size_t m = static_cast<std::size_t>(numTx) * symbolBits;
  if (bits.size() % m != 0)
    throw FramingError("bit count " + std::to_string(bits.size()) + " is not a multiple of " + std::to_string(m));

  const double scale = 1.0 / std::sqrt(static_cast<double>(numTx));
  std::vector<TransmitVector> out;
  out.reserve(bits.size() / m);
  for (std::size_t off = 0; off < bits.size(); off += m) {
    TransmitVector x{CVector(numTx), Scheme::SMX};
    for (int a = 0; a < numTx; ++a) {
      const auto label = readBits(bits, off + static_cast<std::size_t>(a) * symbolBits, symbolBits);
      x.entries(a) = constellation.points[constellation.indexOfLabel[label]] * scale;
    }
    out.push_back(std::move(x));
  }
  return out;
}

std::vector<TransmitVector> smxModulate(std::span<const std::uint8_t> bits, int numTx, int order) {
  return smxModulate(bits, numTx, buildConstellation(order));
}

BitVector demapSm(std::span<const SmSymbol> symbols, int numTx, const Constellation& constellation) {
  const int antennaBits = log2Exact(numTx);
  const int symbolBits = constellation.bitsPerSymbol();
  BitVector out;
  out.reserve(symbols.size() * static_cast<std::size_t>(antennaBits + symbolBits));
  for (const auto& s : symbols) {
    appendBits(out, static_cast<std::uint32_t>(s.antenna), antennaBits);
    appendBits(out, constellation.labels[s.symbol], symbolBits);
  }
  return out;
}

BitVector demapSmx(std::span<const TransmitVector> vectors, const Constellation& constellation) {
  const int symbolBits = constellation.bitsPerSymbol();
  BitVector out;
  for (const auto& x : vectors) {
    const double unscale = std::sqrt(static_cast<double>(x.entries.size()));
    for (Eigen::Index a = 0; a < x.entries.size(); ++a)
      appendBits(out, constellation.labels[nearestPoint(constellation, x.entries(a) * unscale)], symbolBits);
  }
  return out;
}

CandidateSet buildCandidateSet(Scheme scheme, int numTx, const Constellation& constellation) {
  CandidateSet set;
  set.scheme = scheme;
  set.numTx = numTx;
  set.bitsPerVector = bitsPerChannelUse(scheme, numTx, constellation.order);
  if (set.bitsPerVector > 16)
    throw ConfigError("candidate set of 2^" + std::to_string(set.bitsPerVector) + " vectors exceeds 2^16");
  const std::size_t count = std::size_t{1} << set.bitsPerVector;
  set.vectors.reserve(count);
  set.labels.reserve(count);

  if (scheme == Scheme::SM) {
    for (int a = 0; a < numTx; ++a) {
      for (int s = 0; s < constellation.order; ++s) {
        const SmSymbol sym{a, s};
        set.vectors.push_back(smTransmitVector(sym, numTx, constellation));
        set.labels.push_back(demapSm(std::span(&sym, 1), numTx, constellation));
      }
    }
  } else {
    const double scale = 1.0 / std::sqrt(static_cast<double>(numTx));
    const int bps = constellation.bitsPerSymbol();
    for (std::size_t idx = 0; idx < count; ++idx) {
      TransmitVector x{CVector(numTx), Scheme::SMX};
      BitVector label;
      std::size_t rest = idx;
      std::vector<int> digits(numTx);
      for (int a = numTx - 1; a >= 0; --a) {
        digits[a] = static_cast<int>(rest % constellation.order);
        rest /= constellation.order;
      }
      for (int a = 0; a < numTx; ++a) {
        x.entries(a) = constellation.points[digits[a]] * scale;
        appendBits(label, constellation.labels[digits[a]], bps);
      }
      set.vectors.push_back(std::move(x));
      set.labels.push_back(std::move(label));
    }
  }
  return set;
}

int labelDistance(const CandidateSet& set, std::size_t i, std::size_t j) {
  int d = 0;
  const auto& a = set.labels[i];
  const auto& b = set.labels[j];
  for (std::size_t k = 0; k < a.size(); ++k) d += a[k] != b[k];
  return d;
}

namespace {

void requireShapes(const CVector& y, const CMatrix& H, int numTx) {
  if (H.rows() != y.size() || H.cols() != numTx)
    throw ContractViolation("channel is " + std::to_string(H.rows()) + "x" + std::to_string(H.cols()) +
                            " but received vector has " + std::to_string(y.size()) + " entries and N_t = " +
                            std::to_string(numTx));
}

// Received image H*x, accumulated antenna by antenna in ascending order.
void image(const CMatrix& H, const CVector& x, Complex* out) {
  for (Eigen::Index r = 0; r < H.rows(); ++r) {
    Complex acc{0.0, 0.0};
    for (Eigen::Index n = 0; n < H.cols(); ++n) acc += H(r, n) * x(n);
    out[r] = acc;
  }
}

}  // namespace

std::size_t mlDetectIndex(const CVector& y, const CMatrix& H, const CandidateSet& candidates) {
  if (candidates.size() == 0) throw ContractViolation("empty candidate set");
  requireShapes(y, H, candidates.numTx);
  std::vector<Complex> img(static_cast<std::size_t>(H.rows()));
  std::size_t best = 0;
  double bestMetric = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    image(H, candidates.vectors[k].entries, img.data());
    double metric = 0.0;
    for (Eigen::Index r = 0; r < y.size(); ++r) metric += std::norm(y(r) - img[r]);
    if (metric < bestMetric) {
      bestMetric = metric;
      best = k;
    }
  }
  return best;
}

TransmitVector mlDetect(const CVector& y, const CMatrix& H, const CandidateSet& candidates) {
  return candidates.vectors[mlDetectIndex(y, H, candidates)];
}

SmSymbol smMlDetect(const CVector& y, const CMatrix& H, int numTx, const Constellation& constellation) {
  requireShapes(y, H, numTx);
  SmSymbol best;
  double bestMetric = std::numeric_limits<double>::infinity();
  for (int a = 0; a < numTx; ++a) {
    for (int s = 0; s < constellation.order; ++s) {
      const Complex point = constellation.points[s];
      double metric = 0.0;
      for (Eigen::Index r = 0; r < y.size(); ++r) metric += std::norm(y(r) - H(r, a) * point);
      if (metric < bestMetric) {
        bestMetric = metric;
        best = {a, s};
      }
    }
  }
  return best;
}

CachedMlDetector::CachedMlDetector(const CandidateSet& candidates, const CMatrix& H)
    : numRx_(static_cast<int>(H.rows())), count_(candidates.size()) {
  if (count_ == 0) throw ContractViolation("empty candidate set");
  if (H.cols() != candidates.numTx) throw ContractViolation("channel width does not match candidate set");
  images_.resize(count_ * static_cast<std::size_t>(numRx_));
  for (std::size_t k = 0; k < count_; ++k) image(H, candidates.vectors[k].entries, &images_[k * numRx_]);
}

std::size_t CachedMlDetector::detect(const CVector& y) const {
  if (y.size() != numRx_) throw ContractViolation("received vector length does not match channel");
  return detect(y.data());
}

std::size_t CachedMlDetector::detect(const Complex* y) const {
  std::size_t best = 0;
  double bestMetric = std::numeric_limits<double>::infinity();
  const Complex* img = images_.data();
  for (std::size_t k = 0; k < count_; ++k, img += numRx_) {
    double metric = 0.0;
    for (int r = 0; r < numRx_; ++r) metric += std::norm(y[r] - img[r]);
    if (metric < bestMetric) {
      bestMetric = metric;
      best = k;
    }
  }
  return best;
}

ComplexityReport receiverComplexity(Scheme scheme, int numTx, int numRx, int bitsPerUse) {
  if (!isPowerOfTwo(numTx) || numRx < 1 || bitsPerUse < 1 || bitsPerUse > 60)
    throw ConfigError("complexity requires N_t a power of two, N_r >= 1 and 1 <= m <= 60");
  const std::int64_t points = std::int64_t{1} << bitsPerUse;
  ComplexityReport report;
  report.scheme = scheme;
  report.realMultiplications = scheme == Scheme::SMX ? 4 * (std::int64_t{numTx} + 1) * numRx * points
                                                     : 8 * std::int64_t{numRx} * points;
  // 100 (1 - 2/(N_t+1)) = 100 (N_t - 1) / (N_t + 1), reduced.
  std::int64_t num = 100 * (std::int64_t{numTx} - 1);
  std::int64_t den = std::int64_t{numTx} + 1;
  const std::int64_t g = std::gcd(num, den);
  report.relativeReduction = {num / g, den / g};
  report.relativeReductionPercent = report.relativeReduction.value();
  return report;
}

}  // namespace smlink
