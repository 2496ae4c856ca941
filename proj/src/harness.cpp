#include "smlink/harness.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

namespace smlink {

std::string toString(Fidelity f) { return f == Fidelity::Symbol ? "symbol" : "waveform"; }
std::string toString(CsiMode c) { return c == CsiMode::Perfect ? "perfect" : "pilot"; }

std::string SimConfig::imbalanceProfile() const {
  if (imbalance.alphaDb.size() == 0) return "none";
  return imbalance.profile;
}

void SimConfig::validate() const {
  buildConstellation(order);
  if (!isPowerOfTwo(numTx)) throw ConfigError("nt must be a power of two");
  if (numRx < 1) throw ConfigError("nr must be >= 1");
  if (bitsPerUse() > 16) throw ConfigError("more than 16 bits per channel use");
  if (snrGridDb.empty()) throw ConfigError("SNR grid is empty");
  if (bitsPerTrial == 0 || bitsPerTrial % static_cast<std::size_t>(bitsPerUse()) != 0)
    throw ConfigError("bits_per_trial must be a positive multiple of the bits per channel use");
  if (trialsPerSnr < 1) throw ConfigError("trials_per_snr must be >= 1");
  if (batchTrials < 1) throw ConfigError("batch_trials must be >= 1");
  if (blockSymbols < 1) throw ConfigError("block_symbols must be >= 1");
  if (channelDraws < 1) throw ConfigError("channel_draws must be >= 1");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (maxLeadingZeros < 0) throw ConfigError("max_leading_zeros must be >= 0");
  if (dataPeakI16 < 1 || dataPeakI16 > 32767) throw ConfigError("data_peak_i16 must be in [1, 32767]");
  if (imbalance.alphaDb.size() != 0 && (imbalance.alphaDb.rows() != numRx || imbalance.alphaDb.cols() != numTx))
    throw ConfigError("power-imbalance matrix does not match nr x nt");
  imbalance.validate();
  if ((csi == CsiMode::Pilot || fidelity == Fidelity::Waveform) && layout.pilotSeqLen < numTx)
    throw ConfigError("pilot sequences must be at least nt symbols long");
  layout.validate();
  preamble.validate();
  ImpairmentConfig{noiseVariance, foCyclesPerSample, 0}.validate();
}

double BerRecord::standardError() const {
  if (bits == 0) return 0.0;
  const double p = aber;
  return std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(bits));
}

bool samePersisted(const BerRecord& a, const BerRecord& b) {
  auto sameDouble = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
  return a.scheme == b.scheme && a.fidelity == b.fidelity && a.nt == b.nt && a.nr == b.nr && a.m == b.m &&
         sameDouble(a.kFactorDb, b.kFactorDb) && a.piProfile == b.piProfile && sameDouble(a.snrDbTarget, b.snrDbTarget) &&
         a.snrDbEstimated.has_value() == b.snrDbEstimated.has_value() &&
         (!a.snrDbEstimated || sameDouble(*a.snrDbEstimated, *b.snrDbEstimated)) && a.bits == b.bits &&
         a.bitErrors == b.bitErrors && sameDouble(a.aber, b.aber) && a.rejectedVectors == b.rejectedVectors &&
         a.seed == b.seed;
}

namespace {

BerRecord recordTemplate(const SimConfig& cfg, double snrDb) {
  BerRecord r;
  r.scheme = cfg.scheme;
  r.fidelity = cfg.fidelity;
  r.nt = cfg.numTx;
  r.nr = cfg.numRx;
  r.m = cfg.bitsPerUse();
  r.kFactorDb = cfg.fading.reportedKDb();
  r.piProfile = cfg.imbalanceProfile();
  r.snrDbTarget = snrDb;
  r.seed = cfg.masterSeed;
  return r;
}

// Runs trial(t) for t = 0, 1, ... in batches of `batch` until the cap is hit or the
// accumulated error count reaches minErrors at the end of a batch. Outcomes come back
// in trial order, so the totals do not depend on how batches were split over threads.
template <class Outcome, class Fn>
std::vector<Outcome> runTrials(int cap, int batch, int workers, std::uint64_t minErrors, Fn&& trial) {
  std::vector<Outcome> done;
  std::uint64_t errors = 0;
  for (int start = 0; start < cap; start += batch) {
    const int count = std::min(batch, cap - start);
    std::vector<Outcome> outcomes(static_cast<std::size_t>(count));
    const int threads = std::min(workers, count);
    if (threads <= 1) {
      for (int i = 0; i < count; ++i) outcomes[i] = trial(start + i);
    } else {
      std::vector<std::thread> pool;
      std::vector<std::exception_ptr> failures(static_cast<std::size_t>(threads));
      for (int w = 0; w < threads; ++w)
        pool.emplace_back([&, w] {
          try {
            for (int i = w; i < count; i += threads) outcomes[i] = trial(start + i);
          } catch (...) {
            failures[w] = std::current_exception();
          }
        });
      for (auto& t : pool) t.join();
      for (auto& f : failures)
        if (f) std::rethrow_exception(f);
    }
    for (auto& o : outcomes) {
      errors += o.bitErrors;
      done.push_back(std::move(o));
    }
    if (minErrors > 0 && errors >= minErrors) break;
  }
  return done;
}

struct SymbolTrial {
  std::uint64_t bits = 0;
  std::uint64_t bitErrors = 0;
};

struct SymbolContext {
  CandidateSet candidates;
  std::vector<std::uint32_t> labelValue;     // candidate index -> label as an integer
  std::vector<std::uint32_t> indexOfLabel;   // label integer -> candidate index
  CMatrix theta;
};

SymbolContext makeSymbolContext(const SimConfig& cfg) {
  SymbolContext ctx;
  ctx.candidates = buildCandidateSet(cfg.scheme, cfg.numTx, buildConstellation(cfg.order));
  const std::size_t n = ctx.candidates.size();
  ctx.labelValue.resize(n);
  ctx.indexOfLabel.assign(n, 0);
  for (std::size_t k = 0; k < n; ++k) {
    std::uint32_t v = 0;
    for (auto b : ctx.candidates.labels[k]) v = (v << 1) | b;
    ctx.labelValue[k] = v;
    ctx.indexOfLabel[v] = static_cast<std::uint32_t>(k);
  }
  if (cfg.csi == CsiMode::Pilot) ctx.theta = pilotMatrix(cfg.numTx, cfg.layout.pilotSeqLen);
  return ctx;
}

// Symbol-domain LS over one pilot signal: Y = Theta H^T + N.
CMatrix pilotEstimate(const SimConfig& cfg, const SymbolContext& ctx, const CMatrix& H, double noiseVariance,
                      ComplexGaussian& gauss) {
  const CMatrix clean = ctx.theta * H.transpose();
  std::vector<CMatrix> blocks(static_cast<std::size_t>(cfg.layout.pilotSequencesPerSignal), clean);
  if (noiseVariance > 0.0)
    for (auto& Y : blocks)
      for (Eigen::Index i = 0; i < Y.size(); ++i) Y(i) += gauss(noiseVariance);
  return lsChannelEstimate(blocks, ctx.theta).H;
}

SymbolTrial symbolTrial(const SimConfig& cfg, const SymbolContext& ctx, double noiseVariance, Rng& rng) {
  const int m = cfg.bitsPerUse();
  const std::size_t vectors = cfg.bitsPerTrial / static_cast<std::size_t>(m);
  const auto numRx = static_cast<Eigen::Index>(cfg.numRx);
  const std::size_t count = ctx.candidates.size();
  ComplexGaussian gauss(rng);
  SymbolTrial out;
  out.bits = vectors * static_cast<std::size_t>(m);

  std::vector<Complex> images(count * static_cast<std::size_t>(numRx));
  std::vector<Complex> y(static_cast<std::size_t>(numRx));
  for (std::size_t start = 0; start < vectors; start += static_cast<std::size_t>(cfg.blockSymbols)) {
    const std::size_t len = std::min<std::size_t>(cfg.blockSymbols, vectors - start);
    const auto ch = drawChannel(cfg.fading, cfg.imbalance, cfg.numRx, cfg.numTx, rng);
    for (std::size_t k = 0; k < count; ++k) {
      const CVector img = ch.H * ctx.candidates.vectors[k].entries;
      for (Eigen::Index r = 0; r < numRx; ++r) images[k * numRx + r] = img(r);
    }
    CMatrix first = ch.H, second = ch.H;
    if (cfg.csi == CsiMode::Pilot) {
      first = pilotEstimate(cfg, ctx, ch.H, noiseVariance, gauss);
      second = pilotEstimate(cfg, ctx, ch.H, noiseVariance, gauss);
    }
    const CachedMlDetector detFirst(ctx.candidates, first);
    const CachedMlDetector detSecond(ctx.candidates, second);
    for (std::size_t i = 0; i < len; ++i) {
      const auto sent = ctx.indexOfLabel[static_cast<std::uint32_t>(rng() >> (64 - m))];
      for (Eigen::Index r = 0; r < numRx; ++r) {
        y[r] = images[sent * numRx + r];
        if (noiseVariance > 0.0) y[r] += gauss(noiseVariance);
      }
      const auto got = (i < len / 2 ? detFirst : detSecond).detect(y.data());
      out.bitErrors += static_cast<std::uint64_t>(std::popcount(ctx.labelValue[got] ^ ctx.labelValue[sent]));
    }
  }
  return out;
}

double elapsedSince(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::vector<BerRecord> runSymbolSim(const SimConfig& cfg) {
  cfg.validate();
  if (cfg.fidelity != Fidelity::Symbol) throw ConfigError("runSymbolSim needs fidelity = symbol");
  const auto ctx = makeSymbolContext(cfg);
  std::vector<BerRecord> records;
  for (std::size_t s = 0; s < cfg.snrGridDb.size(); ++s) {
    const auto t0 = std::chrono::steady_clock::now();
    const double snrDb = cfg.snrGridDb[s];
    const double noiseVariance = std::isinf(snrDb) && snrDb > 0 ? 0.0 : 1.0 / dbToLinear(snrDb);
    const auto trials = runTrials<SymbolTrial>(cfg.trialsPerSnr, cfg.batchTrials, cfg.workers, cfg.minBitErrors,
                                               [&](int t) {
                                                 Rng rng = makeStream(cfg.masterSeed, s, static_cast<std::uint64_t>(t));
                                                 return symbolTrial(cfg, ctx, noiseVariance, rng);
                                               });
    BerRecord rec = recordTemplate(cfg, snrDb);
    for (const auto& t : trials) {
      rec.bits += t.bits;
      rec.bitErrors += t.bitErrors;
    }
    rec.trials = trials.size();
    rec.aber = rec.bits ? static_cast<double>(rec.bitErrors) / static_cast<double>(rec.bits) : 0.0;
    if (trials.size() > 1) {
      double ss = 0.0;
      for (const auto& t : trials) {
        const double d = static_cast<double>(t.bitErrors) / static_cast<double>(t.bits) - rec.aber;
        ss += d * d;
      }
      const double n = static_cast<double>(trials.size());
      rec.trialStandardError = std::sqrt(ss / (n - 1.0) / n);
    }
    rec.wallTimeSeconds = elapsedSince(t0);
    records.push_back(rec);
  }
  return records;
}

double powerFactorForSnr(double snrLinear, double noiseVariance, const CMatrix& preambleChannel,
                         double shapedPeakUnit) {
  const double meanGain = preambleChannel.cwiseAbs2().mean();
  if (!(meanGain > 0.0) || !(shapedPeakUnit > 0.0)) throw DegenerateInput("cannot set SNR over a dead channel");
  return std::sqrt(snrLinear * noiseVariance / meanGain) / shapedPeakUnit;
}

namespace {

std::vector<TransmitVector> modulate(const SimConfig& cfg, const BitVector& bits) {
  const auto constellation = buildConstellation(cfg.order);
  if (cfg.scheme == Scheme::SMX) return smxModulate(bits, cfg.numTx, constellation);
  std::vector<TransmitVector> out;
  for (auto& p : smModulate(bits, cfg.numTx, constellation)) out.push_back(std::move(p.second));
  return out;
}

// Data vectors split into frames; the last frame is completed with filler vectors.
std::vector<Frame> framesFor(const SimConfig& cfg, const BitVector& bits, Rng& filler) {
  auto vectors = modulate(cfg, bits);
  const auto D = static_cast<std::size_t>(cfg.layout.dataSymbolsPerFrame);
  if (D == 0) throw ConfigError("frames carry no data symbols");
  const std::size_t numFrames = (vectors.size() + D - 1) / D;
  const std::size_t missing = numFrames * D - vectors.size();
  if (missing > 0) {
    const auto pad = modulate(cfg, randomBits(filler, missing * static_cast<std::size_t>(cfg.bitsPerUse())));
    vectors.insert(vectors.end(), pad.begin(), pad.end());
  }
  std::vector<Frame> frames;
  for (std::size_t f = 0; f < numFrames; ++f)
    frames.push_back(buildFrame(std::span(vectors).subspan(f * D, D), cfg.layout, cfg.numTx));
  return frames;
}

}  // namespace

TransmissionVector encodeBits(const SimConfig& cfg, const BitVector& bits) {
  cfg.validate();
  if (bits.empty()) throw FramingError("no bits to encode");
  Rng filler = makeStream(cfg.masterSeed, 0xF111);
  BitVector padded = bits;
  const auto m = static_cast<std::size_t>(cfg.bitsPerUse());
  padded.resize((bits.size() + m - 1) / m * m, 0);
  const auto frames = framesFor(cfg, padded, filler);
  const auto taps = rrcTaps(cfg.layout.rrcTaps, cfg.layout.rrcRolloff, cfg.layout.upsampleFactor);
  const double peak = shapedPeak(frames, taps);
  const double power = (cfg.dataPeakI16 / kI16FullScale) / peak;
  auto tx = assembleTransmission(frames, power, cfg.preamble, 1.0);
  tx.meta.scheme = cfg.scheme;
  tx.meta.constellationOrder = cfg.order;
  tx.meta.bitCount = bits.size();
  return tx;
}

WaveformTrial runWaveformTrial(const SimConfig& cfg, double snrDb, Rng& rng) {
  const BitVector bits = randomBits(rng, cfg.bitsPerTrial);
  const auto frames = framesFor(cfg, bits, rng);
  const auto taps = rrcTaps(cfg.layout.rrcTaps, cfg.layout.rrcRolloff, cfg.layout.upsampleFactor);
  const double peak = shapedPeak(frames, taps);

  const CMatrix H0 = drawChannel(cfg.fading, cfg.imbalance, cfg.numRx, cfg.numTx, rng).H;
  std::vector<CMatrix> frameChannels;
  for (std::size_t f = 0; f < frames.size(); ++f)
    frameChannels.push_back(drawChannel(cfg.fading, cfg.imbalance, cfg.numRx, cfg.numTx, rng).H);

  WaveformTrial out;
  out.vectors = frames.size() * static_cast<std::size_t>(cfg.layout.dataSymbolsPerFrame);
  double power;
  if (cfg.noiseVariance > 0.0) {
    out.snrTargetLinear = dbToLinear(snrDb);
    power = powerFactorForSnr(out.snrTargetLinear, cfg.noiseVariance, H0, peak);
    if (power * peak > 1.0)
      throw ConfigError("target SNR " + std::to_string(snrDb) + " dB needs more than full scale at this noise floor");
  } else {
    out.snrTargetLinear = std::numeric_limits<double>::infinity();
    power = (cfg.dataPeakI16 / kI16FullScale) / peak;
  }
  out.powerFactor = power;

  auto tx = assembleTransmission(frames, power, cfg.preamble, 1.0);
  tx.meta.scheme = cfg.scheme;
  tx.meta.constellationOrder = cfg.order;
  tx.meta.bitCount = bits.size();

  const std::size_t lead =
      cfg.maxLeadingZeros > 0 ? std::uniform_int_distribution<std::size_t>(0, cfg.maxLeadingZeros)(rng) : 0;
  if (lead > 0)
    for (auto& ch : tx.waveform.channels) ch.insert(ch.begin(), lead, Complex{0.0, 0.0});
  std::vector<ChannelSegment> segments{{0, H0}};
  for (std::size_t f = 0; f < frames.size(); ++f) segments.push_back({lead + tx.meta.frameOffset(f), frameChannels[f]});

  const ImpairmentConfig imp{cfg.noiseVariance, cfg.foCyclesPerSample, rng()};
  const Waveform rx = propagateWaveform(tx.waveform, segments, imp);

  try {
    const auto decoded = decodeTransmission(rx, tx.meta);
    out.bits = bits.size();
    for (std::size_t i = 0; i < bits.size(); ++i) out.bitErrors += decoded.bits[i] != bits[i];
    out.snrEstimateLinear = decoded.snr.snrLinear;
    out.snrValid = decoded.snr.valid;
  } catch (const SyncRejected&) {
    out.rejected = true;
  } catch (const FramingError&) {
    out.rejected = true;
  }
  return out;
}

std::vector<BerRecord> runWaveformSim(const SimConfig& cfg) {
  cfg.validate();
  if (cfg.fidelity != Fidelity::Waveform) throw ConfigError("runWaveformSim needs fidelity = waveform");
  std::vector<BerRecord> records;
  for (std::size_t s = 0; s < cfg.snrGridDb.size(); ++s) {
    const auto t0 = std::chrono::steady_clock::now();
    const double snrDb = cfg.snrGridDb[s];
    const auto trials = runTrials<WaveformTrial>(cfg.trialsPerSnr, cfg.batchTrials, cfg.workers, cfg.minBitErrors,
                                                 [&](int t) {
                                                   Rng rng = makeStream(cfg.masterSeed, s, static_cast<std::uint64_t>(t));
                                                   return runWaveformTrial(cfg, snrDb, rng);
                                                 });
    BerRecord rec = recordTemplate(cfg, snrDb);
    double estimate = 0.0, dataSnr = 0.0;
    std::size_t accepted = 0;
    bool invalid = false;
    for (const auto& t : trials) {
      if (t.rejected) {
        rec.rejectedVectors += t.vectors;
        continue;
      }
      ++accepted;
      rec.bits += t.bits;
      rec.bitErrors += t.bitErrors;
      estimate += t.snrEstimateLinear;
      invalid = invalid || !t.snrValid;
      dataSnr += cfg.noiseVariance > 0.0 ? t.powerFactor * t.powerFactor / cfg.noiseVariance
                                         : std::numeric_limits<double>::infinity();
    }
    rec.trials = trials.size();
    rec.aber = rec.bits ? static_cast<double>(rec.bitErrors) / static_cast<double>(rec.bits) : 0.0;
    if (accepted > 1) {
      double ss = 0.0;
      for (const auto& t : trials) {
        if (t.rejected) continue;
        const double d = static_cast<double>(t.bitErrors) / static_cast<double>(t.bits) - rec.aber;
        ss += d * d;
      }
      const double n = static_cast<double>(accepted);
      rec.trialStandardError = std::sqrt(ss / (n - 1.0) / n);
    }
    if (accepted > 0) {
      rec.snrDbEstimated =
          invalid ? std::numeric_limits<double>::infinity() : linearToDb(estimate / static_cast<double>(accepted));
      rec.snrDbData = linearToDb(dataSnr / static_cast<double>(accepted));
    }
    rec.wallTimeSeconds = elapsedSince(t0);
    records.push_back(rec);
  }
  return records;
}

std::vector<BerRecord> runSimulation(const SimConfig& cfg) {
  return cfg.fidelity == Fidelity::Symbol ? runSymbolSim(cfg) : runWaveformSim(cfg);
}

BoundConfig boundConfigFrom(const SimConfig& cfg) {
  BoundConfig b;
  b.scheme = cfg.scheme;
  b.numTx = cfg.numTx;
  b.numRx = cfg.numRx;
  b.order = cfg.order;
  b.fading = cfg.fading;
  b.imbalance = cfg.imbalance;
  b.snrGridDb = cfg.snrGridDb;
  b.channelDraws = cfg.channelDraws;
  return b;
}

namespace {

constexpr const char* kCsvHeader =
    "schema_version,scheme,fidelity,nt,nr,m,k_factor_db,pi_profile,snr_db_target,snr_db_estimated,bits,bit_errors,"
    "aber,rejected_vectors,seed";

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> splitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parseDouble(const std::string& s, std::size_t line, const char* column) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw SchemaError("line " + std::to_string(line) + ": column '" + column + "' is not a number: '" + s + "'");
  return v;
}

std::uint64_t parseUnsigned(const std::string& s, std::size_t line, const char* column) {
  char* end = nullptr;
  const auto v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || s[0] == '-' || end != s.c_str() + s.size())
    throw SchemaError("line " + std::to_string(line) + ": column '" + column + "' is not an unsigned integer: '" + s +
                      "'");
  return v;
}

}  // namespace

std::string formatCsv(const std::vector<BerRecord>& records) {
  std::ostringstream out;
  out << kCsvHeader << '\n';
  for (const auto& r : records) {
    out << kCsvSchemaVersion << ',' << toString(r.scheme) << ',' << toString(r.fidelity) << ',' << r.nt << ',' << r.nr
        << ',' << r.m << ',' << num(r.kFactorDb) << ',' << r.piProfile << ',' << num(r.snrDbTarget) << ','
        << (r.snrDbEstimated ? num(*r.snrDbEstimated) : std::string()) << ',' << r.bits << ',' << r.bitErrors << ','
        << num(r.aber) << ',' << r.rejectedVectors << ',' << r.seed << '\n';
  }
  return out.str();
}

void exportCsv(const std::vector<BerRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << formatCsv(records);
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<BerRecord> parseCsv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw SchemaError("line 1: unexpected CSV header");
  std::vector<BerRecord> records;
  std::size_t lineNo = 1;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty()) continue;
    const auto f = splitCsv(line);
    if (f.size() != 15)
      throw SchemaError("line " + std::to_string(lineNo) + ": expected 15 columns, found " + std::to_string(f.size()));
    if (parseUnsigned(f[0], lineNo, "schema_version") != kCsvSchemaVersion)
      throw SchemaError("line " + std::to_string(lineNo) + ": unsupported schema_version " + f[0]);
    BerRecord r;
    try {
      r.scheme = schemeFromString(f[1]);
    } catch (const ConfigError&) {
      throw SchemaError("line " + std::to_string(lineNo) + ": column 'scheme' has unknown value '" + f[1] + "'");
    }
    if (f[2] == "symbol")
      r.fidelity = Fidelity::Symbol;
    else if (f[2] == "waveform")
      r.fidelity = Fidelity::Waveform;
    else
      throw SchemaError("line " + std::to_string(lineNo) + ": column 'fidelity' has unknown value '" + f[2] + "'");
    r.nt = static_cast<int>(parseUnsigned(f[3], lineNo, "nt"));
    r.nr = static_cast<int>(parseUnsigned(f[4], lineNo, "nr"));
    r.m = static_cast<int>(parseUnsigned(f[5], lineNo, "m"));
    r.kFactorDb = parseDouble(f[6], lineNo, "k_factor_db");
    r.piProfile = f[7];
    r.snrDbTarget = parseDouble(f[8], lineNo, "snr_db_target");
    if (!f[9].empty()) r.snrDbEstimated = parseDouble(f[9], lineNo, "snr_db_estimated");
    r.bits = parseUnsigned(f[10], lineNo, "bits");
    r.bitErrors = parseUnsigned(f[11], lineNo, "bit_errors");
    r.aber = parseDouble(f[12], lineNo, "aber");
    r.rejectedVectors = parseUnsigned(f[13], lineNo, "rejected_vectors");
    r.seed = parseUnsigned(f[14], lineNo, "seed");
    if (r.bitErrors > r.bits) throw SchemaError("line " + std::to_string(lineNo) + ": bit_errors exceeds bits");
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<BerRecord> readCsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parseCsv(buf.str());
}

void exportBoundCsv(const std::vector<BoundPoint>& points, const BoundConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "snr_db,aber_bound,n_h,scheme,nt,nr,m\n";
  const int m = bitsPerChannelUse(cfg.scheme, cfg.numTx, cfg.order);
  for (const auto& p : points)
    out << num(p.snrDb) << ',' << num(p.reported()) << ',' << cfg.channelDraws << ',' << toString(cfg.scheme) << ','
        << cfg.numTx << ',' << cfg.numRx << ',' << m << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

namespace {

struct CurveSpec {
  std::string curve;
  SimConfig cfg;
  bool bound = false;
};

std::vector<double> grid(double lo, double hi, double step) {
  std::vector<double> g;
  for (double v = lo; v <= hi + 1e-9; v += step) g.push_back(v);
  return g;
}

SimConfig baseConfig(Scheme scheme, int nt, int nr, int order, const PlotOptions& o) {
  SimConfig c;
  c.scheme = scheme;
  c.numTx = nt;
  c.numRx = nr;
  c.order = order;
  c.bitsPerTrial = o.bitsPerTrial - o.bitsPerTrial % static_cast<std::size_t>(bitsPerChannelUse(scheme, nt, order));
  c.trialsPerSnr = o.trialsPerSnr;
  c.minBitErrors = o.minBitErrors;
  c.channelDraws = o.channelDraws;
  c.masterSeed = o.seed;
  c.workers = o.workers;
  return c;
}

std::vector<CurveSpec> figureCurves(const std::string& figure, const PlotOptions& o) {
  std::vector<CurveSpec> curves;
  if (figure == "fig10" || figure == "fig11") {
    const Scheme scheme = figure == "fig10" ? Scheme::SM : Scheme::SMX;
    for (const char* profile : {"none", "config1", "config2"}) {
      SimConfig c = baseConfig(scheme, 2, 2, 2, o);
      c.fading = FadingModel::rician(33.0);
      c.imbalance = PowerImbalance::fromProfile(profile, 2, 2);
      c.snrGridDb = grid(20.0, 50.0, 2.0);
      curves.push_back({std::string("sim_") + profile, c, false});
      curves.push_back({std::string("ana_") + profile, c, true});
    }
  } else if (figure == "fig12") {
    struct Case {
      Scheme s;
      int nt, order;
      const char* name;
    };
    for (const Case& k : {Case{Scheme::SM, 64, 4, "sm_nt64_qpsk"}, Case{Scheme::SMX, 8, 2, "smx_nt8_bpsk"},
                          Case{Scheme::SMX, 4, 4, "smx_nt4_qpsk"}}) {
      SimConfig c = baseConfig(k.s, k.nt, 4, k.order, o);
      c.fading = FadingModel::rayleigh();
      c.snrGridDb = grid(0.0, 24.0, 2.0);
      curves.push_back({k.name, c, false});
    }
  } else if (figure == "fig13") {
    for (Scheme s : {Scheme::SM, Scheme::SMX}) {
      SimConfig c = baseConfig(s, 2, 2, 2, o);
      c.fading = FadingModel::rician(33.0);
      c.snrGridDb = grid(20.0, 56.0, 2.0);
      const std::string name = s == Scheme::SM ? "sm" : "smx";
      curves.push_back({"sim_" + name, c, false});
      curves.push_back({"ana_" + name, c, true});
    }
  } else {
    throw ConfigError("unknown figure '" + figure + "' (expected fig10, fig11, fig12 or fig13)");
  }
  return curves;
}

}  // namespace

std::vector<PlotRow> plotData(const std::string& figure, const PlotOptions& options) {
  std::vector<PlotRow> rows;
  for (const auto& spec : figureCurves(figure, options)) {
    if (spec.bound) {
      const auto bcfg = boundConfigFrom(spec.cfg);
      for (const auto& p : unionBoundAber(bcfg, options.seed, options.workers)) {
        BerRecord r = recordTemplate(spec.cfg, p.snrDb);
        r.aber = p.reported();
        rows.push_back({figure, spec.curve, "bound", r});
      }
    } else {
      for (const auto& r : runSymbolSim(spec.cfg)) rows.push_back({figure, spec.curve, "sim", r});
    }
  }
  return rows;
}

std::string formatPlotCsv(const std::vector<PlotRow>& rows) {
  std::ostringstream out;
  out << "figure,curve,kind,scheme,nt,nr,m,k_factor_db,pi_profile,snr_db,aber,bits,bit_errors\n";
  for (const auto& row : rows) {
    const auto& r = row.record;
    out << row.figure << ',' << row.curve << ',' << row.kind << ',' << toString(r.scheme) << ',' << r.nt << ','
        << r.nr << ',' << r.m << ',' << num(r.kFactorDb) << ',' << r.piProfile << ',' << num(r.snrDbTarget) << ','
        << num(r.aber) << ',' << r.bits << ',' << r.bitErrors << '\n';
  }
  return out.str();
}

}  // namespace smlink
