#pragma once

#include <span>
#include <vector>

#include "smlink/common.hpp"
#include "smlink/modem.hpp"
#include "smlink/txchain.hpp"

namespace smlink {

struct SyncResult {
  std::vector<std::size_t> peakIndices;
  std::size_t dataStartIndex = 0;  // first sample after the sync train
};

/// Groups samples above thresholdFraction * max into peaks. Samples closer than
/// mergeWindow to the current peak join it; the larger sample wins.
std::vector<std::size_t> findPeaks(std::span<const double> magnitude, double thresholdFraction,
                                   std::size_t mergeWindow);

/// Peak search on sqrt(sum_r |y_r|^2). The merge window is half the pulse spacing.
/// Throws SyncRejected when fewer than preamble.syncPulses peaks are found.
SyncResult detectSync(const Waveform& rx, const PreambleLayout& preamble, int upsample,
                      double thresholdFraction = 0.70);

struct SnrEstimate {
  double snrDb = 0.0;
  double snrLinear = 0.0;
  Eigen::MatrixXd perAntennaPerBlock;  // N_t x blocks, linear
  bool valid = true;                   // false when the off-blocks carry no noise
};

/// On/off power-difference estimator over the SNR section starting at `snrStart`:
/// per block SNR = max(P_on - P_off, 0) / (N_r sigma^2), sigma^2 being the mean-removed
/// per-antenna variance of the off-block. The result averages all blocks linearly.
SnrEstimate estimateSnr(const Waveform& rx, std::size_t snrStart, const PreambleLayout& preamble, int numTx);

/// Convolve with the receive RRC, drop the (taps - 1) sample delay of the filter pair,
/// and keep every U-th output. Returns (len - taps + 1) / U symbols.
ComplexSeries matchedFilterDownsample(std::span<const Complex> frameSamples, std::span<const double> taps,
                                      int upsample);

/// Slope of the unwrapped phase between elements guard and n-1-guard, in cycles per
/// element. Throws DegenerateInput if a used element has zero magnitude.
double estimateFo(std::span<const Complex> section, std::size_t guard = 0);

/// y_i exp(-j 2 pi df (i + startIndex)).
ComplexSeries correctFo(std::span<const Complex> samples, double cyclesPerElement, std::size_t startIndex = 0);

enum class EstimateHalf { First, Second };

struct ChannelEstimate {
  CMatrix H;  // N_r x N_t
  EstimateHalf half = EstimateHalf::First;
};

/// Response of the symbol-spaced pulse chain to the periodic pilot of each antenna:
/// G(a) = sum_k g(kU) exp(-j 2 pi (a+1) k / N), g = taps * taps.
std::vector<Complex> pilotResponse(std::span<const double> taps, int upsample, int numTx, int pilotLen);

/// Per block (N_theta x N_r) estimate H^T = Theta^H Y / N_theta, averaged over blocks,
/// then divided by the pilot amplitude and, when given, by the per-antenna response.
ChannelEstimate lsChannelEstimate(std::span<const CMatrix> receivedBlocks, const CMatrix& theta,
                                  double pilotAmplitude = 1.0, std::span<const Complex> antennaResponse = {},
                                  EstimateHalf half = EstimateHalf::First);

/// Detect the data section of a symbol-domain frame (N_r x symbolLength); the first
/// floor(D/2) symbols use `first`, the rest use `second`.
BitVector demodulateFrame(const CMatrix& symbolFrame, const FrameLayout& layout, const CMatrix& first,
                          const CMatrix& second, const CandidateSet& candidates);
BitVector demodulateFrame(const CMatrix& symbolFrame, const FrameLayout& layout, const CMatrix& first,
                          const CMatrix& second, Scheme scheme, const Constellation& constellation);

struct FrameReport {
  double foCyclesPerSample = 0.0;
  ChannelEstimate first;
  ChannelEstimate second;
};

struct DecodeOptions {
  double syncThreshold = 0.70;
  /// Edge symbols of the FO run and pilot signals skipped so the filter pair's
  /// transients are excluded; negative selects ceil((taps - 1) / U).
  int guardSymbols = -1;
};

struct DecodeResult {
  BitVector bits;  // truncated to meta.bitCount when that is nonzero
  SyncResult sync;
  SnrEstimate snr;
  std::vector<FrameReport> frames;
};

/// Full receive chain. Symbol frames are divided by meta.powerFactor so the channel
/// estimates are in units of the unscaled link gains.
DecodeResult decodeTransmission(const Waveform& rx, const TransmissionMeta& meta, const DecodeOptions& options = {});

}  // namespace smlink
