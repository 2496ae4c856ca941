#include "smlink/txchain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

namespace smlink {

void FrameLayout::validate() const {
  if (zeroPadLen < 0 || pilotSequencesPerSignal < 1 || pilotSeqLen < 1 || foSeqLen < 2 || dataSymbolsPerFrame < 0)
    throw ConfigError("frame layout section lengths must be positive");
  if (upsampleFactor < 1) throw ConfigError("up-sampling factor must be >= 1");
  if (rrcTaps < 2) throw ConfigError("RRC filter needs at least 2 taps");
  if (!(rrcRolloff > 0.0 && rrcRolloff <= 1.0)) throw ConfigError("RRC roll-off must lie in (0, 1]");
  if (durationSeconds() >= kCoherenceTimeSeconds)
    throw ConfigError("frame lasts " + std::to_string(durationSeconds() * 1e3) +
                      " ms, not below the 7 ms coherence time");
}

void PreambleLayout::validate() const {
  if (syncPulses < 1 || syncGapSymbols < 1 || snrBlocks < 1 || snrBlockLen < 2)
    throw ConfigError("preamble section lengths must be positive");
}

ComplexSeries pilotSequence(int antenna, int length, int numTx) {
  if (numTx < 1 || numTx > length || antenna < 0 || antenna >= numTx)
    throw ContractViolation("pilot sequence needs 0 <= antenna < N_t <= N_theta");
  ComplexSeries seq(static_cast<std::size_t>(length));
  const int n = antenna + 1;
  for (int l = 0; l < length; ++l) {
    // Reduce the exponent modulo N first so the phase stays exact in [0, 2 pi).
    const int k = (n * l) % length;
    seq[l] = std::polar(1.0, 2.0 * std::numbers::pi * k / length);
  }
  return seq;
}

CMatrix pilotMatrix(int numTx, int length) {
  CMatrix theta(length, numTx);
  for (int a = 0; a < numTx; ++a) {
    const auto seq = pilotSequence(a, length, numTx);
    for (int l = 0; l < length; ++l) theta(l, a) = seq[l];
  }
  return theta;
}

Frame buildFrame(std::span<const TransmitVector> dataVectors, const FrameLayout& layout, int numTx) {
  layout.validate();
  if (static_cast<int>(dataVectors.size()) != layout.dataSymbolsPerFrame)
    throw FramingError("frame expects " + std::to_string(layout.dataSymbolsPerFrame) + " data vectors, got " +
                       std::to_string(dataVectors.size()));
  Frame frame{CMatrix::Zero(numTx, layout.symbolLength()), layout};
  const CMatrix theta = pilotMatrix(numTx, layout.pilotSeqLen);

  auto writePilots = [&](int offset) {
    for (int s = 0; s < layout.pilotSequencesPerSignal; ++s)
      for (int l = 0; l < layout.pilotSeqLen; ++l)
        for (int a = 0; a < numTx; ++a) frame.symbols(a, offset + s * layout.pilotSeqLen + l) = theta(l, a);
  };
  writePilots(layout.firstPilotOffset());
  for (int i = 0; i < layout.foSeqLen; ++i) frame.symbols(0, layout.foOffset() + i) = Complex{1.0, 0.0};
  for (int i = 0; i < layout.dataSymbolsPerFrame; ++i) {
    const auto& x = dataVectors[i].entries;
    if (x.size() != numTx) throw ContractViolation("transmit vector length does not match N_t");
    frame.symbols.col(layout.dataOffset() + i) = x;
  }
  writePilots(layout.secondPilotOffset());
  return frame;
}

std::vector<double> rrcTaps(int numTaps, double rolloff, int upsample) {
  if (numTaps < 2 || !(rolloff > 0.0 && rolloff <= 1.0) || upsample < 1)
    throw ConfigError("RRC filter needs numTaps >= 2, 0 < rolloff <= 1, U >= 1");
  constexpr double pi = std::numbers::pi;
  const double b = rolloff;
  std::vector<double> h(static_cast<std::size_t>(numTaps));
  const double centre = (numTaps - 1) / 2.0;
  for (int k = 0; k < numTaps; ++k) {
    const double t = (k - centre) / upsample;  // in symbol periods
    double v;
    if (std::abs(t) < 1e-12) {
      v = 1.0 - b + 4.0 * b / pi;
    } else if (std::abs(std::abs(t) - 1.0 / (4.0 * b)) < 1e-12) {
      v = b / std::sqrt(2.0) * ((1.0 + 2.0 / pi) * std::sin(pi / (4.0 * b)) + (1.0 - 2.0 / pi) * std::cos(pi / (4.0 * b)));
    } else {
      const double x = 4.0 * b * t;
      v = (std::sin(pi * t * (1.0 - b)) + x * std::cos(pi * t * (1.0 + b))) / (pi * t * (1.0 - x * x));
    }
    h[k] = v;
  }
  double energy = 0.0;
  for (double v : h) energy += v * v;
  const double norm = 1.0 / std::sqrt(energy);
  for (double& v : h) v *= norm;
  return h;
}

ComplexSeries convolve(std::span<const Complex> signal, std::span<const double> taps) {
  if (signal.empty() || taps.empty()) return {};
  ComplexSeries out(signal.size() + taps.size() - 1, Complex{0.0, 0.0});
  for (std::size_t i = 0; i < signal.size(); ++i) {
    const Complex s = signal[i];
    if (s == Complex{0.0, 0.0}) continue;
    Complex* o = &out[i];
    for (std::size_t k = 0; k < taps.size(); ++k) o[k] += s * taps[k];
  }
  return out;
}

ComplexSeries upsampleAndFilter(std::span<const Complex> symbols, std::span<const double> taps, int upsample) {
  ComplexSeries stuffed(symbols.size() * static_cast<std::size_t>(upsample), Complex{0.0, 0.0});
  for (std::size_t i = 0; i < symbols.size(); ++i) stuffed[i * upsample] = symbols[i];
  return convolve(stuffed, taps);
}

Waveform pulseShape(const Frame& frame, std::span<const double> taps) {
  Waveform w;
  const int U = frame.layout.upsampleFactor;
  ComplexSeries row(static_cast<std::size_t>(frame.symbols.cols()));
  for (Eigen::Index a = 0; a < frame.symbols.rows(); ++a) {
    for (Eigen::Index i = 0; i < frame.symbols.cols(); ++i) row[i] = frame.symbols(a, i);
    w.channels.push_back(upsampleAndFilter(row, taps, U));
  }
  return w;
}

double shapedPeak(std::span<const Frame> frames, std::span<const double> taps) {
  double peak = 0.0;
  for (const auto& f : frames)
    for (const auto& ch : pulseShape(f, taps).channels)
      for (const auto& v : ch) peak = std::max(peak, std::abs(v));
  return peak;
}

TransmissionVector assembleTransmission(std::span<const Frame> frames, double powerFactor,
                                        const PreambleLayout& preamble, double fullScale) {
  if (frames.empty()) throw ContractViolation("transmission needs at least one frame");
  if (!(powerFactor >= 0.0) || !std::isfinite(powerFactor)) throw ConfigError("power factor must be finite and >= 0");
  preamble.validate();
  const FrameLayout& layout = frames.front().layout;
  const int numTx = static_cast<int>(frames.front().symbols.rows());
  for (const auto& f : frames)
    if (!(f.layout == layout) || f.symbols.rows() != numTx)
      throw ContractViolation("all frames of a transmission must share layout and antenna count");

  const auto taps = rrcTaps(layout.rrcTaps, layout.rrcRolloff, layout.upsampleFactor);
  std::vector<Waveform> shaped;
  shaped.reserve(frames.size());
  double peak = 0.0;
  for (const auto& f : frames) {
    shaped.push_back(pulseShape(f, taps));
    for (auto& ch : shaped.back().channels)
      for (auto& v : ch) {
        v *= powerFactor;
        peak = std::max(peak, std::abs(v));
      }
  }
  if (peak > fullScale)
    throw RangeError("scaled data peak " + std::to_string(peak) + " exceeds full scale " + std::to_string(fullScale));

  TransmissionMeta meta;
  meta.numTx = numTx;
  meta.layout = layout;
  meta.preamble = preamble;
  meta.powerFactor = powerFactor;
  meta.dataPeak = peak;
  meta.fullScale = fullScale;
  meta.numFrames = frames.size();
  const int U = layout.upsampleFactor;
  meta.sync = {0, preamble.syncSamples(U)};
  meta.snr = {meta.sync.end(), preamble.snrSamples(numTx)};
  meta.data = {meta.snr.end(), frames.size() * static_cast<std::size_t>(layout.sampleLength())};

  TransmissionVector tx;
  tx.meta = meta;
  tx.waveform.channels.assign(static_cast<std::size_t>(numTx), ComplexSeries(meta.data.end(), Complex{0.0, 0.0}));
  for (int a = 0; a < numTx; ++a) {
    auto& ch = tx.waveform.channels[a];
    for (int p = 0; p < preamble.syncPulses; ++p)
      ch[static_cast<std::size_t>(p) * preamble.syncSlotSamples(U)] = Complex{fullScale, 0.0};

    const std::size_t perAntenna = static_cast<std::size_t>(preamble.snrBlocks) * 2 * preamble.snrBlockLen;
    const std::size_t base = meta.snr.begin + static_cast<std::size_t>(a) * perAntenna;
    for (int b = 0; b < preamble.snrBlocks; ++b) {
      const std::size_t on = base + static_cast<std::size_t>(b) * 2 * preamble.snrBlockLen;
      std::fill_n(ch.begin() + static_cast<std::ptrdiff_t>(on), preamble.snrBlockLen, Complex{peak, 0.0});
    }

    std::size_t pos = meta.data.begin;
    for (const auto& w : shaped) {
      std::copy(w.channels[a].begin(), w.channels[a].end(), ch.begin() + static_cast<std::ptrdiff_t>(pos));
      pos += w.channels[a].size();
    }
  }
  return tx;
}

std::vector<std::int16_t> quantizeI16(std::span<const Complex> samples, double fullScale, Overflow overflow) {
  std::vector<std::int16_t> out;
  out.reserve(samples.size() * 2);
  const double scale = kI16FullScale / fullScale;
  auto q = [&](double v) -> std::int16_t {
    if (!std::isfinite(v)) throw RangeError("non-finite sample");
    double r = std::nearbyint(v * scale);
    if (std::abs(r) > kI16FullScale) {
      if (overflow == Overflow::Error)
        throw RangeError("sample " + std::to_string(v) + " exceeds I16 full scale");
      r = std::clamp(r, -kI16FullScale, kI16FullScale);
    }
    return static_cast<std::int16_t>(r);
  };
  for (const auto& s : samples) {
    out.push_back(q(s.real()));
    out.push_back(q(s.imag()));
  }
  return out;
}

ComplexSeries dequantizeI16(std::span<const std::int16_t> interleaved, double fullScale) {
  if (interleaved.size() % 2 != 0) throw FramingError("I16 stream has an odd number of values");
  ComplexSeries out(interleaved.size() / 2);
  const double scale = fullScale / kI16FullScale;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = {interleaved[2 * i] * scale, interleaved[2 * i + 1] * scale};
  return out;
}

void writeI16File(const std::filesystem::path& path, std::span<const std::int16_t> values) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  std::vector<char> bytes(values.size() * 2);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto u = static_cast<std::uint16_t>(values[i]);
    bytes[2 * i] = static_cast<char>(u & 0xFF);
    bytes[2 * i + 1] = static_cast<char>(u >> 8);
  }
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed for " + path.string());
}

std::vector<std::int16_t> readI16File(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() % 2 != 0) throw IoError(path.string() + " has an odd byte count");
  std::vector<std::int16_t> values(bytes.size() / 2);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto lo = static_cast<std::uint8_t>(bytes[2 * i]);
    const auto hi = static_cast<std::uint8_t>(bytes[2 * i + 1]);
    values[i] = static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8)));
  }
  return values;
}

}  // namespace smlink
