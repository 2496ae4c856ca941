#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "smlink/common.hpp"

namespace smlink {

/// Unit-average-energy, Gray-labelled constellation (BPSK or square QAM).
///
/// Points are ordered by position: for square QAM index = iI * sqrt(M) + iQ, with the
/// in-phase and quadrature level indices ascending from the most negative level. The
/// label of a point is the Gray code of iI followed by the Gray code of iQ. BPSK is
/// {+1 -> 0, -1 -> 1}.
struct Constellation {
  int order = 0;
  std::vector<Complex> points;
  std::vector<std::uint32_t> labels;
  std::vector<int> indexOfLabel;

  int bitsPerSymbol() const { return log2Exact(order); }
};

Constellation buildConstellation(int order);

struct TransmitVector {
  CVector entries;
  Scheme scheme = Scheme::SM;
};

/// Zero-based (antenna, constellation point) pair of one SM channel use.
struct SmSymbol {
  int antenna = 0;
  int symbol = 0;

  bool operator==(const SmSymbol&) const = default;
};

/// Number of bits carried per channel use.
int bitsPerChannelUse(Scheme scheme, int numTx, int order);

std::vector<std::pair<SmSymbol, TransmitVector>> smModulate(std::span<const std::uint8_t> bits,
                                                            int numTx,
                                                            const Constellation& constellation);
std::vector<std::pair<SmSymbol, TransmitVector>> smModulate(std::span<const std::uint8_t> bits,
                                                            int numTx, int order);

std::vector<TransmitVector> smxModulate(std::span<const std::uint8_t> bits, int numTx,
                                        const Constellation& constellation);
std::vector<TransmitVector> smxModulate(std::span<const std::uint8_t> bits, int numTx, int order);

TransmitVector smTransmitVector(const SmSymbol& symbol, int numTx,
                                const Constellation& constellation);

BitVector demapSm(std::span<const SmSymbol> symbols, int numTx, const Constellation& constellation);

/// Inverse of smxModulate. Each entry is matched to the nearest scaled constellation point.
BitVector demapSmx(std::span<const TransmitVector> vectors, const Constellation& constellation);

/// Every admissible transmit vector of a scheme, in enumeration order, with its bit label.
///
/// SM order: antenna ascending, then constellation index. SMX order: mixed-radix over the
/// per-antenna constellation indices, antenna 0 most significant.
struct CandidateSet {
  Scheme scheme = Scheme::SM;
  int numTx = 0;
  int bitsPerVector = 0;
  std::vector<TransmitVector> vectors;
  std::vector<BitVector> labels;

  std::size_t size() const { return vectors.size(); }
};

/// Builds the full candidate set; throws ConfigError above 2^16 candidates.
CandidateSet buildCandidateSet(Scheme scheme, int numTx, const Constellation& constellation);

/// Hamming distance between the labels of candidates i and j.
int labelDistance(const CandidateSet& set, std::size_t i, std::size_t j);

/// Exhaustive ML over candidates: argmin ||y - Hx||^2, lowest index wins ties.
std::size_t mlDetectIndex(const CVector& y, const CMatrix& H, const CandidateSet& candidates);
TransmitVector mlDetect(const CVector& y, const CMatrix& H, const CandidateSet& candidates);

/// Single-active-antenna ML: argmin over (antenna, s) of sum_r |y_r - h(r, antenna) s|^2.
/// Scan order and tie rule match mlDetect over the SM candidate set.
SmSymbol smMlDetect(const CVector& y, const CMatrix& H, int numTx,
                    const Constellation& constellation);

/// ML detector with the received constellation H*x cached for a fixed channel.
/// Decisions are identical to mlDetectIndex for the same H.
class CachedMlDetector {
 public:
  CachedMlDetector(const CandidateSet& candidates, const CMatrix& H);

  std::size_t detect(const CVector& y) const;
  std::size_t detect(const Complex* y) const;

  int numRx() const { return numRx_; }

 private:
  int numRx_ = 0;
  std::size_t count_ = 0;
  std::vector<Complex> images_;  // count_ x numRx_, row-major
};

struct Rational {
  std::int64_t numerator = 0;
  std::int64_t denominator = 1;

  double value() const { return static_cast<double>(numerator) / static_cast<double>(denominator); }
};

/// Real multiplications of the ML receiver and the SM-vs-SMX reduction.
///
/// realMultiplications is the count for `scheme`. The reduction fields always describe
/// SM relative to SMX at the same spectral efficiency, 100 (1 - 2 / (N_t + 1)) percent.
struct ComplexityReport {
  Scheme scheme = Scheme::SM;
  std::int64_t realMultiplications = 0;
  double relativeReductionPercent = 0.0;
  Rational relativeReduction;
};

ComplexityReport receiverComplexity(Scheme scheme, int numTx, int numRx, int bitsPerUse);

}  // namespace smlink
