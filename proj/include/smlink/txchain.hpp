#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "smlink/common.hpp"
#include "smlink/modem.hpp"

namespace smlink {

inline constexpr double kSampleRateHz = 10e6;
inline constexpr double kCoherenceTimeSeconds = 7e-3;

/// Symbol-domain layout of one frame plus the pulse-shaping parameters.
struct FrameLayout {
  int zeroPadLen = 50;
  int pilotSequencesPerSignal = 10;
  int pilotSeqLen = 10;
  int foSeqLen = 1000;
  int dataSymbolsPerFrame = 1000;
  int upsampleFactor = 4;
  int rrcTaps = 40;
  double rrcRolloff = 0.75;

  /// Throws ConfigError on non-positive lengths, bad roll-off, or a frame that would
  /// outlast the channel coherence time at 10 Ms/s.
  void validate() const;

  int pilotSignalLen() const { return pilotSequencesPerSignal * pilotSeqLen; }
  int symbolLength() const { return 2 * zeroPadLen + 2 * pilotSignalLen() + foSeqLen + dataSymbolsPerFrame; }
  int sampleLength() const { return symbolLength() * upsampleFactor + rrcTaps - 1; }
  double durationSeconds(double sampleRate = kSampleRateHz) const { return sampleLength() / sampleRate; }

  // Symbol offsets of each section within a frame.
  int firstPilotOffset() const { return zeroPadLen; }
  int foOffset() const { return zeroPadLen + pilotSignalLen(); }
  int dataOffset() const { return foOffset() + foSeqLen; }
  int secondPilotOffset() const { return dataOffset() + dataSymbolsPerFrame; }

  bool operator==(const FrameLayout&) const = default;
};

/// Sync train and SNR-estimation blocks that precede the data section.
///
/// Sync pulses are single full-scale samples, one per symbol slot, each followed by
/// syncGapSymbols zero symbols. SNR blocks are raw samples: per transmit antenna,
/// snrBlocks repetitions of snrBlockLen samples at the data peak amplitude followed by
/// snrBlockLen zeros. Antennas take turns.
struct PreambleLayout {
  int syncPulses = 20;
  int syncGapSymbols = 50;
  int snrBlocks = 5;
  int snrBlockLen = 50000;

  void validate() const;

  int syncSlotSamples(int upsample) const { return (syncGapSymbols + 1) * upsample; }
  std::size_t syncSamples(int upsample) const {
    return static_cast<std::size_t>(syncPulses) * syncSlotSamples(upsample);
  }
  std::size_t snrSamples(int numTx) const {
    return static_cast<std::size_t>(numTx) * snrBlocks * 2 * static_cast<std::size_t>(snrBlockLen);
  }

  bool operator==(const PreambleLayout&) const = default;
};

struct Frame {
  CMatrix symbols;  // N_t x symbolLength
  FrameLayout layout;
};

/// Per-antenna sample streams.
struct Waveform {
  std::vector<ComplexSeries> channels;
  double sampleRate = kSampleRateHz;

  std::size_t numChannels() const { return channels.size(); }
  std::size_t length() const { return channels.empty() ? 0 : channels.front().size(); }
};

struct SampleRange {
  std::size_t begin = 0;
  std::size_t length = 0;

  std::size_t end() const { return begin + length; }
  bool operator==(const SampleRange&) const = default;
};

/// Everything the receiver needs to parse a transmission, besides the samples.
struct TransmissionMeta {
  Scheme scheme = Scheme::SM;
  int numTx = 2;
  int constellationOrder = 2;
  FrameLayout layout;
  PreambleLayout preamble;
  double powerFactor = 1.0;
  double dataPeak = 0.0;  // largest |sample| of the scaled data section (x_max)
  double fullScale = 1.0;
  double sampleRate = kSampleRateHz;
  SampleRange sync;
  SampleRange snr;
  SampleRange data;
  std::size_t numFrames = 0;
  std::size_t bitCount = 0;

  std::size_t frameOffset(std::size_t frame) const {
    return data.begin + frame * static_cast<std::size_t>(layout.sampleLength());
  }
  bool operator==(const TransmissionMeta&) const = default;
};

struct TransmissionVector {
  Waveform waveform;
  TransmissionMeta meta;
};

/// Pilot sequence of zero-based antenna `antenna`: exp(2 pi j (antenna+1) l / N).
ComplexSeries pilotSequence(int antenna, int length, int numTx);

/// N x N_t matrix whose column a is pilotSequence(a).
CMatrix pilotMatrix(int numTx, int length);

/// Frame zeros | pilots | FO run | data | pilots | zeros. Pilots go out on every antenna
/// at once; the FO run is a constant 1 on antenna 0 only.
Frame buildFrame(std::span<const TransmitVector> dataVectors, const FrameLayout& layout, int numTx);

/// Root-raised-cosine taps at `upsample` samples per symbol, centred, unit energy.
std::vector<double> rrcTaps(int numTaps, double rolloff, int upsample);

/// Zero-stuff by `upsample` and run the full convolution with `taps`.
ComplexSeries upsampleAndFilter(std::span<const Complex> symbols, std::span<const double> taps, int upsample);

/// Full linear convolution of a complex stream with real taps.
ComplexSeries convolve(std::span<const Complex> signal, std::span<const double> taps);

Waveform pulseShape(const Frame& frame, std::span<const double> taps);

/// Largest sample magnitude the frames reach after shaping, at unit power factor.
double shapedPeak(std::span<const Frame> frames, std::span<const double> taps);

/// Sync train, SNR section and concatenated shaped frames. The sync train sits at
/// `fullScale`; the SNR and data sections are scaled by powerFactor, and the SNR on-blocks
/// use the resulting data peak. Throws RangeError if the scaled data exceeds full scale.
TransmissionVector assembleTransmission(std::span<const Frame> frames, double powerFactor,
                                        const PreambleLayout& preamble = {}, double fullScale = 1.0);

inline constexpr double kI16FullScale = 32767.0;

enum class Overflow { Error, Saturate };

/// Interleaved I,Q int16 per sample; `fullScale` maps to 32767.
std::vector<std::int16_t> quantizeI16(std::span<const Complex> samples, double fullScale = 1.0,
                                      Overflow overflow = Overflow::Error);
ComplexSeries dequantizeI16(std::span<const std::int16_t> interleaved, double fullScale = 1.0);

void writeI16File(const std::filesystem::path& path, std::span<const std::int16_t> values);
std::vector<std::int16_t> readI16File(const std::filesystem::path& path);

}  // namespace smlink
