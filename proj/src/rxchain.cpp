#include "smlink/rxchain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace smlink {

std::vector<std::size_t> findPeaks(std::span<const double> magnitude, double thresholdFraction,
                                   std::size_t mergeWindow) {
  std::vector<std::size_t> peaks;
  if (magnitude.empty()) return peaks;
  const double top = *std::max_element(magnitude.begin(), magnitude.end());
  if (!(top > 0.0)) return peaks;
  const double threshold = thresholdFraction * top;
  for (std::size_t i = 0; i < magnitude.size(); ++i) {
    if (magnitude[i] < threshold) continue;
    if (!peaks.empty() && i - peaks.back() < mergeWindow) {
      if (magnitude[i] > magnitude[peaks.back()]) peaks.back() = i;
    } else {
      peaks.push_back(i);
    }
  }
  return peaks;
}

SyncResult detectSync(const Waveform& rx, const PreambleLayout& preamble, int upsample, double thresholdFraction) {
  const std::size_t len = rx.length();
  if (len == 0) throw ContractViolation("empty waveform");
  std::vector<double> magnitude(len, 0.0);
  for (const auto& ch : rx.channels)
    for (std::size_t i = 0; i < len; ++i) magnitude[i] += std::norm(ch[i]);
  for (auto& m : magnitude) m = std::sqrt(m);

  const auto slot = static_cast<std::size_t>(preamble.syncSlotSamples(upsample));
  auto peaks = findPeaks(magnitude, thresholdFraction, slot / 2);
  if (peaks.size() < static_cast<std::size_t>(preamble.syncPulses))
    throw SyncRejected("found " + std::to_string(peaks.size()) + " sync peaks, need " +
                       std::to_string(preamble.syncPulses));
  peaks.resize(static_cast<std::size_t>(preamble.syncPulses));
  SyncResult res;
  res.dataStartIndex = peaks.back() + slot;
  res.peakIndices = std::move(peaks);
  return res;
}

SnrEstimate estimateSnr(const Waveform& rx, std::size_t snrStart, const PreambleLayout& preamble, int numTx) {
  const std::size_t L = static_cast<std::size_t>(preamble.snrBlockLen);
  if (snrStart + preamble.snrSamples(numTx) > rx.length())
    throw FramingError("SNR section runs past the end of the capture");
  const auto numRx = rx.numChannels();

  SnrEstimate est;
  est.perAntennaPerBlock = Eigen::MatrixXd::Zero(numTx, preamble.snrBlocks);
  bool anySignal = false;
  bool noiseless = false;
  for (int a = 0; a < numTx; ++a) {
    for (int b = 0; b < preamble.snrBlocks; ++b) {
      const std::size_t on = snrStart + (static_cast<std::size_t>(a) * preamble.snrBlocks + b) * 2 * L;
      const std::size_t off = on + L;
      double pOn = 0.0, pOff = 0.0, variance = 0.0;
      for (const auto& ch : rx.channels) {
        Complex mean{0.0, 0.0};
        for (std::size_t i = 0; i < L; ++i) {
          pOn += std::norm(ch[on + i]);
          pOff += std::norm(ch[off + i]);
          mean += ch[off + i];
        }
        mean /= static_cast<double>(L);
        double var = 0.0;
        for (std::size_t i = 0; i < L; ++i) var += std::norm(ch[off + i] - mean);
        variance += var / static_cast<double>(L);
      }
      pOn /= static_cast<double>(L);
      pOff /= static_cast<double>(L);
      variance /= static_cast<double>(numRx);
      const double signal = std::max(pOn - pOff, 0.0);
      anySignal = anySignal || pOn > 0.0;
      double snr;
      if (variance > 0.0) {
        snr = signal / (static_cast<double>(numRx) * variance);
      } else {
        noiseless = true;
        snr = signal > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
      }
      est.perAntennaPerBlock(a, b) = snr;
    }
  }
  if (noiseless && !anySignal) throw DegenerateInput("SNR section is identically zero");
  if (noiseless) {
    est.valid = false;
    est.snrLinear = std::numeric_limits<double>::infinity();
    est.snrDb = std::numeric_limits<double>::infinity();
    return est;
  }
  est.snrLinear = est.perAntennaPerBlock.mean();
  est.snrDb = linearToDb(est.snrLinear);
  return est;
}

ComplexSeries matchedFilterDownsample(std::span<const Complex> frameSamples, std::span<const double> taps,
                                      int upsample) {
  if (upsample < 1) throw ContractViolation("down-sampling factor must be >= 1");
  if (frameSamples.size() < taps.size()) throw ContractViolation("frame is shorter than the matched filter");
  const std::size_t N = taps.size();
  const std::size_t count = (frameSamples.size() - N + 1) / static_cast<std::size_t>(upsample);
  ComplexSeries out(count);
  // Full-convolution output index k*U + N - 1 uses input samples k*U .. k*U + N - 1.
  for (std::size_t k = 0; k < count; ++k) {
    const Complex* x = &frameSamples[k * upsample + N - 1];
    Complex acc{0.0, 0.0};
    for (std::size_t m = 0; m < N; ++m) acc += taps[m] * *(x - m);
    out[k] = acc;
  }
  return out;
}

double estimateFo(std::span<const Complex> section, std::size_t guard) {
  if (section.size() < 2 * guard + 2) throw DegenerateInput("FO section too short for the requested guard");
  const std::size_t first = guard;
  const std::size_t last = section.size() - 1 - guard;
  double prev = 0.0;
  double unwrapped = 0.0;
  double start = 0.0;
  constexpr double twoPi = 2.0 * std::numbers::pi;
  for (std::size_t i = first; i <= last; ++i) {
    if (section[i] == Complex{0.0, 0.0}) throw DegenerateInput("FO section contains a zero sample");
    const double phase = std::arg(section[i]);
    if (i == first) {
      unwrapped = start = phase;
    } else {
      double step = phase - prev;
      step -= twoPi * std::round(step / twoPi);
      unwrapped += step;
    }
    prev = phase;
  }
  return (unwrapped - start) / (twoPi * static_cast<double>(last - first));
}

ComplexSeries correctFo(std::span<const Complex> samples, double cyclesPerElement, std::size_t startIndex) {
  ComplexSeries out(samples.size());
  const double omega = -2.0 * std::numbers::pi * cyclesPerElement;
  for (std::size_t i = 0; i < samples.size(); ++i)
    out[i] = samples[i] * std::polar(1.0, omega * static_cast<double>(i + startIndex));
  return out;
}

std::vector<Complex> pilotResponse(std::span<const double> taps, int upsample, int numTx, int pilotLen) {
  std::vector<double> g(2 * taps.size() - 1, 0.0);
  for (std::size_t i = 0; i < taps.size(); ++i)
    for (std::size_t j = 0; j < taps.size(); ++j) g[i + j] += taps[i] * taps[j];
  const auto centre = static_cast<std::ptrdiff_t>(taps.size() - 1);
  const auto span = centre / upsample;
  std::vector<Complex> response(static_cast<std::size_t>(numTx));
  for (int a = 0; a < numTx; ++a) {
    Complex acc{0.0, 0.0};
    for (std::ptrdiff_t k = -span; k <= span; ++k) {
      const int e = static_cast<int>(((a + 1) * k) % pilotLen);
      acc += g[static_cast<std::size_t>(centre + k * upsample)] *
             std::polar(1.0, -2.0 * std::numbers::pi * e / pilotLen);
    }
    response[a] = acc;
  }
  return response;
}

ChannelEstimate lsChannelEstimate(std::span<const CMatrix> receivedBlocks, const CMatrix& theta, double pilotAmplitude,
                                  std::span<const Complex> antennaResponse, EstimateHalf half) {
  if (receivedBlocks.empty()) throw ContractViolation("no pilot blocks");
  const auto N = theta.rows();
  const auto numTx = theta.cols();
  const CMatrix gram = theta.adjoint() * theta;
  if ((gram - static_cast<double>(N) * CMatrix::Identity(numTx, numTx)).norm() > 1e-9 * N)
    throw ContractViolation("pilot matrix columns are not orthogonal");
  if (!(pilotAmplitude > 0.0)) throw ContractViolation("pilot amplitude must be positive");
  if (!antennaResponse.empty() && static_cast<Eigen::Index>(antennaResponse.size()) != numTx)
    throw ContractViolation("antenna response length does not match N_t");

  const auto numRx = receivedBlocks.front().cols();
  CMatrix sum = CMatrix::Zero(numTx, numRx);
  for (const auto& Y : receivedBlocks) {
    if (Y.rows() != N || Y.cols() != numRx) throw ContractViolation("pilot block has the wrong shape");
    sum += theta.adjoint() * Y;
  }
  ChannelEstimate est;
  est.half = half;
  est.H = (sum / (static_cast<double>(N) * static_cast<double>(receivedBlocks.size()) * pilotAmplitude)).transpose();
  for (std::size_t a = 0; a < antennaResponse.size(); ++a) est.H.col(static_cast<Eigen::Index>(a)) /= antennaResponse[a];
  return est;
}

BitVector demodulateFrame(const CMatrix& symbolFrame, const FrameLayout& layout, const CMatrix& first,
                          const CMatrix& second, const CandidateSet& candidates) {
  const int D = layout.dataSymbolsPerFrame;
  if (symbolFrame.cols() < layout.dataOffset() + D) throw ContractViolation("symbol frame shorter than its layout");
  const CachedMlDetector detFirst(candidates, first);
  const CachedMlDetector detSecond(candidates, second);
  BitVector bits;
  bits.reserve(static_cast<std::size_t>(D) * candidates.bitsPerVector);
  CVector y(symbolFrame.rows());
  for (int i = 0; i < D; ++i) {
    y = symbolFrame.col(layout.dataOffset() + i);
    const std::size_t k = (i < D / 2 ? detFirst : detSecond).detect(y);
    const auto& label = candidates.labels[k];
    bits.insert(bits.end(), label.begin(), label.end());
  }
  return bits;
}

BitVector demodulateFrame(const CMatrix& symbolFrame, const FrameLayout& layout, const CMatrix& first,
                          const CMatrix& second, Scheme scheme, const Constellation& constellation) {
  const auto candidates = buildCandidateSet(scheme, static_cast<int>(first.cols()), constellation);
  return demodulateFrame(symbolFrame, layout, first, second, candidates);
}

namespace {

std::vector<CMatrix> pilotBlocks(const CMatrix& frame, int offset, const FrameLayout& layout, int guardSequences) {
  const int S = layout.pilotSequencesPerSignal;
  int lo = 0, hi = S;
  if (S > 2 * guardSequences) {
    lo = guardSequences;
    hi = S - guardSequences;
  }
  std::vector<CMatrix> blocks;
  for (int s = lo; s < hi; ++s)
    blocks.push_back(frame.block(0, offset + s * layout.pilotSeqLen, frame.rows(), layout.pilotSeqLen).transpose());
  return blocks;
}

}  // namespace

DecodeResult decodeTransmission(const Waveform& rx, const TransmissionMeta& meta, const DecodeOptions& options) {
  const FrameLayout& layout = meta.layout;
  layout.validate();
  const int U = layout.upsampleFactor;
  const auto taps = rrcTaps(layout.rrcTaps, layout.rrcRolloff, U);
  const int guard = options.guardSymbols >= 0 ? options.guardSymbols : (layout.rrcTaps - 1 + U - 1) / U;
  const int guardSequences = (guard + layout.pilotSeqLen - 1) / layout.pilotSeqLen;

  DecodeResult result;
  result.sync = detectSync(rx, meta.preamble, U, options.syncThreshold);
  const std::size_t snrStart = result.sync.dataStartIndex;
  result.snr = estimateSnr(rx, snrStart, meta.preamble, meta.numTx);

  const auto constellation = buildConstellation(meta.constellationOrder);
  const auto candidates = buildCandidateSet(meta.scheme, meta.numTx, constellation);
  const CMatrix theta = pilotMatrix(meta.numTx, layout.pilotSeqLen);
  const auto response = pilotResponse(taps, U, meta.numTx, layout.pilotSeqLen);
  const double scale = meta.powerFactor > 0.0 ? 1.0 / meta.powerFactor : 1.0;

  const std::size_t dataStart = snrStart + meta.preamble.snrSamples(meta.numTx);
  const auto frameLen = static_cast<std::size_t>(layout.sampleLength());
  const auto numRx = static_cast<Eigen::Index>(rx.numChannels());
  CMatrix symbols(numRx, layout.symbolLength());

  for (std::size_t f = 0; f < meta.numFrames; ++f) {
    const std::size_t begin = dataStart + f * frameLen;
    if (begin + frameLen > rx.length()) throw FramingError("frame " + std::to_string(f) + " runs past the capture");

    std::vector<ComplexSeries> perRx;
    perRx.reserve(static_cast<std::size_t>(numRx));
    for (const auto& ch : rx.channels)
      perRx.push_back(matchedFilterDownsample(std::span(ch).subspan(begin, frameLen), taps, U));

    // FO from the strongest receive antenna over the interior of the constant run.
    std::size_t strongest = 0;
    double bestEnergy = -1.0;
    for (std::size_t r = 0; r < perRx.size(); ++r) {
      double e = 0.0;
      for (int i = 0; i < layout.foSeqLen; ++i) e += std::norm(perRx[r][layout.foOffset() + i]);
      if (e > bestEnergy) {
        bestEnergy = e;
        strongest = r;
      }
    }
    const auto foSection = std::span(perRx[strongest]).subspan(layout.foOffset(), layout.foSeqLen);
    const double foPerSymbol = estimateFo(foSection, static_cast<std::size_t>(guard));

    // Derotate at the sample rate and filter again, so the pulse pair stays matched. The
    // phase is referenced to the first capture sample, not the frame.
    for (Eigen::Index r = 0; r < numRx; ++r) {
      const auto derotated = correctFo(std::span(rx.channels[r]).subspan(begin, frameLen), foPerSymbol / U, begin);
      const auto filtered = matchedFilterDownsample(derotated, taps, U);
      for (Eigen::Index i = 0; i < symbols.cols(); ++i) symbols(r, i) = filtered[i] * scale;
    }

    FrameReport report;
    report.foCyclesPerSample = foPerSymbol / U;
    const auto firstBlocks = pilotBlocks(symbols, layout.firstPilotOffset(), layout, guardSequences);
    const auto secondBlocks = pilotBlocks(symbols, layout.secondPilotOffset(), layout, guardSequences);
    report.first = lsChannelEstimate(firstBlocks, theta, 1.0, response, EstimateHalf::First);
    report.second = lsChannelEstimate(secondBlocks, theta, 1.0, response, EstimateHalf::Second);

    const auto bits = demodulateFrame(symbols, layout, report.first.H, report.second.H, candidates);
    result.bits.insert(result.bits.end(), bits.begin(), bits.end());
    result.frames.push_back(std::move(report));
  }
  if (meta.bitCount > 0 && meta.bitCount < result.bits.size()) result.bits.resize(meta.bitCount);
  return result;
}

}  // namespace smlink
