#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "smlink/analysis.hpp"
#include "smlink/channel.hpp"
#include "smlink/common.hpp"
#include "smlink/rxchain.hpp"
#include "smlink/txchain.hpp"

namespace smlink {

enum class Fidelity { Symbol, Waveform };
enum class CsiMode { Perfect, Pilot };

std::string toString(Fidelity f);
std::string toString(CsiMode c);

inline constexpr int kCsvSchemaVersion = 1;

struct SimConfig {
  Scheme scheme = Scheme::SM;
  int numTx = 2;
  int numRx = 2;
  int order = 2;
  FadingModel fading;
  PowerImbalance imbalance;  // empty matrix or profile "none" means no imbalance
  std::vector<double> snrGridDb;
  Fidelity fidelity = Fidelity::Symbol;
  std::size_t bitsPerTrial = 100000;
  int trialsPerSnr = 1000;
  std::uint64_t minBitErrors = 100;  // 0 runs every trial
  CsiMode csi = CsiMode::Perfect;
  std::uint64_t masterSeed = 1;
  int workers = 1;
  int batchTrials = 16;
  int blockSymbols = 1000;  // symbol-level channel block, one frame's worth of data
  int channelDraws = 10000;

  // Waveform path.
  FrameLayout layout;
  PreambleLayout preamble;
  double noiseVariance = 1e-6;  // per complex sample, full scale = 1
  double foCyclesPerSample = 0.0;
  int maxLeadingZeros = 0;
  int dataPeakI16 = 2896;  // encode: data peak in int16 units

  int bitsPerUse() const { return bitsPerChannelUse(scheme, numTx, order); }
  std::string imbalanceProfile() const;
  /// Throws ConfigError on inconsistent settings.
  void validate() const;
};

struct BerRecord {
  Scheme scheme = Scheme::SM;
  Fidelity fidelity = Fidelity::Symbol;
  int nt = 2;
  int nr = 2;
  int m = 2;  // bits per channel use
  double kFactorDb = 33.0;
  std::string piProfile = "none";
  double snrDbTarget = 0.0;
  std::optional<double> snrDbEstimated;
  std::uint64_t bits = 0;
  std::uint64_t bitErrors = 0;
  double aber = 0.0;
  std::uint64_t rejectedVectors = 0;
  std::uint64_t seed = 0;

  // Not persisted.
  double wallTimeSeconds = 0.0;
  std::optional<double> snrDbData;  // waveform path: 10 log10(P^2 / sigma^2)
  std::uint64_t trials = 0;
  /// Spread of the per-trial ABER over sqrt(trials). Bits that share a channel block are
  /// correlated, so this is the honest Monte Carlo error; 0 with fewer than two trials.
  double trialStandardError = 0.0;

  /// Standard error of the ABER estimate under a binomial model.
  double standardError() const;
  /// Larger of the binomial and trial-based errors.
  double monteCarloError() const { return std::max(standardError(), trialStandardError); }
};

/// Compares the fields that the CSV carries.
bool samePersisted(const BerRecord& a, const BerRecord& b);

/// Symbol-level Monte Carlo. Trial t at grid point s uses makeStream(masterSeed, s, t);
/// trials run in batches of batchTrials and stop after the batch in which the error
/// count reaches minBitErrors. Results do not depend on `workers`.
std::vector<BerRecord> runSymbolSim(const SimConfig& cfg);

struct WaveformTrial {
  std::uint64_t bits = 0;
  std::uint64_t bitErrors = 0;
  std::uint64_t vectors = 0;
  bool rejected = false;
  double snrEstimateLinear = 0.0;
  bool snrValid = true;
  double snrTargetLinear = 0.0;
  double powerFactor = 0.0;
};

/// Transmit power factor that puts the preamble SNR, x_max^2 mean|h|^2 / sigma^2, at
/// `snrLinear` for a shaped peak of `shapedPeakUnit` at unit power.
double powerFactorForSnr(double snrLinear, double noiseVariance, const CMatrix& preambleChannel,
                         double shapedPeakUnit);

/// One full-chain trial: random bits, txchain, an independent channel for the preamble
/// and each frame, propagateWaveform, decodeTransmission.
WaveformTrial runWaveformTrial(const SimConfig& cfg, double snrDb, Rng& rng);

std::vector<BerRecord> runWaveformSim(const SimConfig& cfg);

/// Dispatches on cfg.fidelity.
std::vector<BerRecord> runSimulation(const SimConfig& cfg);

BoundConfig boundConfigFrom(const SimConfig& cfg);

void exportCsv(const std::vector<BerRecord>& records, const std::filesystem::path& path);
std::string formatCsv(const std::vector<BerRecord>& records);
std::vector<BerRecord> readCsv(const std::filesystem::path& path);
std::vector<BerRecord> parseCsv(const std::string& text);

void exportBoundCsv(const std::vector<BoundPoint>& points, const BoundConfig& cfg, const std::filesystem::path& path);

/// JSON config with required scheme, nt, nr, constellation_order and snr_db. Throws
/// SchemaError naming the offending field.
SimConfig loadConfig(const std::filesystem::path& path);
SimConfig parseConfig(const std::string& text);
std::string serializeConfig(const SimConfig& cfg);
void saveConfig(const SimConfig& cfg, const std::filesystem::path& path);

std::string serializeMeta(const TransmissionMeta& meta);
TransmissionMeta parseMeta(const std::string& text);

/// Transmission for `bits` at the configured layout, with the data peak at
/// dataPeakI16 / 32767 of full scale.
TransmissionVector encodeBits(const SimConfig& cfg, const BitVector& bits);

struct PlotOptions {
  std::size_t bitsPerTrial = 100000;
  int trialsPerSnr = 20;
  std::uint64_t minBitErrors = 100;
  int channelDraws = 2000;
  std::uint64_t seed = 1;
  int workers = 1;
};

struct PlotRow {
  std::string figure;
  std::string curve;
  std::string kind;  // sim | bound
  BerRecord record;
};

/// Curve bundle for fig10 (SM with imbalance), fig11 (SMX with imbalance),
/// fig12 (Rayleigh, 8 bits/s/Hz) or fig13 (SM vs SMX, K = 33 dB).
std::vector<PlotRow> plotData(const std::string& figure, const PlotOptions& options);
std::string formatPlotCsv(const std::vector<PlotRow>& rows);

}  // namespace smlink
