#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "smlink/harness.hpp"

namespace smlink {

using nlohmann::json;

namespace {

[[noreturn]] void fieldError(const std::string& field, const std::string& what) {
  throw SchemaError("field '" + field + "': " + what);
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError("missing required field '" + path + key + "'");
  return *it;
}

template <class T>
T getInt(const json& v, const std::string& field) {
  if (!v.is_number_integer()) fieldError(field, "expected an integer");
  if constexpr (std::is_unsigned_v<T>) {
    if (v.is_number_unsigned()) return v.get<T>();
    if (v.get<long long>() < 0) fieldError(field, "expected a non-negative integer");
  }
  return v.get<T>();
}

double getNumber(const json& v, const std::string& field) {
  if (!v.is_number()) fieldError(field, "expected a number");
  return v.get<double>();
}

std::string getString(const json& v, const std::string& field) {
  if (!v.is_string()) fieldError(field, "expected a string");
  return v.get<std::string>();
}

template <class T>
void optionalInt(const json& obj, const char* key, T& out, const std::string& path = "") {
  if (const auto it = obj.find(key); it != obj.end()) out = getInt<T>(*it, path + key);
}

void optionalNumber(const json& obj, const char* key, double& out, const std::string& path = "") {
  if (const auto it = obj.find(key); it != obj.end()) out = getNumber(*it, path + key);
}

std::vector<double> parseGrid(const json& v) {
  std::vector<double> g;
  if (v.is_number()) return {v.get<double>()};
  if (v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i) g.push_back(getNumber(v[i], "snr_db[" + std::to_string(i) + "]"));
  } else if (v.is_object()) {
    const double lo = getNumber(require(v, "start", "snr_db."), "snr_db.start");
    const double hi = getNumber(require(v, "stop", "snr_db."), "snr_db.stop");
    const double step = getNumber(require(v, "step", "snr_db."), "snr_db.step");
    if (!(step > 0.0)) fieldError("snr_db.step", "must be positive");
    for (int k = 0; lo + k * step <= hi + 1e-9 * step; ++k) g.push_back(lo + k * step);
  } else {
    fieldError("snr_db", "expected a number, an array or {start, stop, step}");
  }
  if (g.empty()) fieldError("snr_db", "grid is empty");
  if (!std::is_sorted(g.begin(), g.end())) fieldError("snr_db", "grid must be ascending");
  return g;
}

FrameLayout parseLayout(const json& v) {
  if (!v.is_object()) fieldError("layout", "expected an object");
  FrameLayout l;
  optionalInt(v, "zero_pad", l.zeroPadLen, "layout.");
  optionalInt(v, "pilot_sequences", l.pilotSequencesPerSignal, "layout.");
  optionalInt(v, "pilot_length", l.pilotSeqLen, "layout.");
  optionalInt(v, "fo_length", l.foSeqLen, "layout.");
  optionalInt(v, "data_symbols", l.dataSymbolsPerFrame, "layout.");
  optionalInt(v, "upsample", l.upsampleFactor, "layout.");
  optionalInt(v, "rrc_taps", l.rrcTaps, "layout.");
  optionalNumber(v, "rrc_rolloff", l.rrcRolloff, "layout.");
  return l;
}

json layoutJson(const FrameLayout& l) {
  return {{"zero_pad", l.zeroPadLen},       {"pilot_sequences", l.pilotSequencesPerSignal},
          {"pilot_length", l.pilotSeqLen},  {"fo_length", l.foSeqLen},
          {"data_symbols", l.dataSymbolsPerFrame}, {"upsample", l.upsampleFactor},
          {"rrc_taps", l.rrcTaps},          {"rrc_rolloff", l.rrcRolloff}};
}

PreambleLayout parsePreamble(const json& v) {
  if (!v.is_object()) fieldError("preamble", "expected an object");
  PreambleLayout p;
  optionalInt(v, "sync_pulses", p.syncPulses, "preamble.");
  optionalInt(v, "sync_gap_symbols", p.syncGapSymbols, "preamble.");
  optionalInt(v, "snr_blocks", p.snrBlocks, "preamble.");
  optionalInt(v, "snr_block_length", p.snrBlockLen, "preamble.");
  return p;
}

json preambleJson(const PreambleLayout& p) {
  return {{"sync_pulses", p.syncPulses},
          {"sync_gap_symbols", p.syncGapSymbols},
          {"snr_blocks", p.snrBlocks},
          {"snr_block_length", p.snrBlockLen}};
}

json rangeJson(const SampleRange& r) { return {{"begin", r.begin}, {"length", r.length}}; }

SampleRange parseRange(const json& v, const std::string& field) {
  if (!v.is_object()) fieldError(field, "expected an object");
  return {getInt<std::size_t>(require(v, "begin", field + "."), field + ".begin"),
          getInt<std::size_t>(require(v, "length", field + "."), field + ".length")};
}

json parseText(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // Report a line number rather than nlohmann's byte offset.
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw SchemaError("JSON syntax error near line " + std::to_string(line) + ": " + e.what());
  }
}

std::string readText(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

SimConfig parseConfig(const std::string& text) {
  const json j = parseText(text);
  if (!j.is_object()) throw SchemaError("config root must be an object");
  SimConfig c;
  try {
    c.scheme = schemeFromString(getString(require(j, "scheme", ""), "scheme"));
  } catch (const ConfigError& e) {
    fieldError("scheme", e.what());
  }
  c.numTx = getInt<int>(require(j, "nt", ""), "nt");
  c.numRx = getInt<int>(require(j, "nr", ""), "nr");
  c.order = getInt<int>(require(j, "constellation_order", ""), "constellation_order");
  c.snrGridDb = parseGrid(require(j, "snr_db", ""));

  if (const auto it = j.find("fading"); it != j.end()) {
    const json& f = *it;
    if (!f.is_object()) fieldError("fading", "expected an object");
    const std::string model = getString(require(f, "model", "fading."), "fading.model");
    if (model == "rayleigh") {
      c.fading = FadingModel::rayleigh();
    } else if (model == "rician") {
      c.fading = FadingModel::rician(getNumber(require(f, "k_factor_db", "fading."), "fading.k_factor_db"));
    } else {
      fieldError("fading.model", "expected 'rician' or 'rayleigh'");
    }
  }
  if (const auto it = j.find("imbalance"); it != j.end()) {
    if (it->is_string()) {
      try {
        c.imbalance = PowerImbalance::fromProfile(it->get<std::string>(), c.numRx, c.numTx);
      } catch (const ConfigError& e) {
        fieldError("imbalance", e.what());
      }
    } else if (it->is_object()) {
      const json& rows = require(*it, "alpha_db", "imbalance.");
      if (!rows.is_array() || rows.size() != static_cast<std::size_t>(c.numRx))
        fieldError("imbalance.alpha_db", "expected nr rows");
      Eigen::MatrixXd a(c.numRx, c.numTx);
      for (int r = 0; r < c.numRx; ++r) {
        if (!rows[r].is_array() || rows[r].size() != static_cast<std::size_t>(c.numTx))
          fieldError("imbalance.alpha_db", "expected nt columns per row");
        for (int n = 0; n < c.numTx; ++n) a(r, n) = getNumber(rows[r][n], "imbalance.alpha_db");
      }
      c.imbalance = {a, "custom"};
    } else {
      fieldError("imbalance", "expected a profile name or {alpha_db}");
    }
  }
  if (const auto it = j.find("fidelity"); it != j.end()) {
    const auto v = getString(*it, "fidelity");
    if (v == "symbol")
      c.fidelity = Fidelity::Symbol;
    else if (v == "waveform")
      c.fidelity = Fidelity::Waveform;
    else
      fieldError("fidelity", "expected 'symbol' or 'waveform'");
  }
  if (const auto it = j.find("csi"); it != j.end()) {
    const auto v = getString(*it, "csi");
    if (v == "perfect")
      c.csi = CsiMode::Perfect;
    else if (v == "pilot")
      c.csi = CsiMode::Pilot;
    else
      fieldError("csi", "expected 'perfect' or 'pilot'");
  }
  optionalInt(j, "bits_per_trial", c.bitsPerTrial);
  optionalInt(j, "trials_per_snr", c.trialsPerSnr);
  optionalInt(j, "min_bit_errors", c.minBitErrors);
  optionalInt(j, "seed", c.masterSeed);
  optionalInt(j, "workers", c.workers);
  optionalInt(j, "batch_trials", c.batchTrials);
  optionalInt(j, "block_symbols", c.blockSymbols);
  optionalInt(j, "channel_draws", c.channelDraws);
  optionalNumber(j, "noise_variance", c.noiseVariance);
  optionalNumber(j, "fo_cycles_per_sample", c.foCyclesPerSample);
  optionalInt(j, "max_leading_zeros", c.maxLeadingZeros);
  optionalInt(j, "data_peak_i16", c.dataPeakI16);
  if (const auto it = j.find("layout"); it != j.end()) c.layout = parseLayout(*it);
  if (const auto it = j.find("preamble"); it != j.end()) c.preamble = parsePreamble(*it);

  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw SchemaError(std::string("invalid config: ") + e.what());
  }
  return c;
}

SimConfig loadConfig(const std::filesystem::path& path) { return parseConfig(readText(path)); }

std::string serializeConfig(const SimConfig& c) {
  json j;
  j["scheme"] = toString(c.scheme);
  j["nt"] = c.numTx;
  j["nr"] = c.numRx;
  j["constellation_order"] = c.order;
  j["snr_db"] = c.snrGridDb;
  if (c.fading.kind == FadingModel::Kind::Rayleigh)
    j["fading"] = {{"model", "rayleigh"}};
  else
    j["fading"] = {{"model", "rician"}, {"k_factor_db", c.fading.kFactorDb}};
  const std::string profile = c.imbalanceProfile();
  if (profile == "custom") {
    json rows = json::array();
    for (Eigen::Index r = 0; r < c.imbalance.alphaDb.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index n = 0; n < c.imbalance.alphaDb.cols(); ++n) row.push_back(c.imbalance.alphaDb(r, n));
      rows.push_back(row);
    }
    j["imbalance"] = {{"alpha_db", rows}};
  } else {
    j["imbalance"] = profile;
  }
  j["fidelity"] = toString(c.fidelity);
  j["csi"] = toString(c.csi);
  j["bits_per_trial"] = c.bitsPerTrial;
  j["trials_per_snr"] = c.trialsPerSnr;
  j["min_bit_errors"] = c.minBitErrors;
  j["seed"] = c.masterSeed;
  j["workers"] = c.workers;
  j["batch_trials"] = c.batchTrials;
  j["block_symbols"] = c.blockSymbols;
  j["channel_draws"] = c.channelDraws;
  j["noise_variance"] = c.noiseVariance;
  j["fo_cycles_per_sample"] = c.foCyclesPerSample;
  j["max_leading_zeros"] = c.maxLeadingZeros;
  j["data_peak_i16"] = c.dataPeakI16;
  j["layout"] = layoutJson(c.layout);
  j["preamble"] = preambleJson(c.preamble);
  return j.dump(2) + "\n";
}

void saveConfig(const SimConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << serializeConfig(cfg);
}

std::string serializeMeta(const TransmissionMeta& m) {
  json j;
  j["format"] = "smlink-i16";
  j["version"] = 1;
  j["scheme"] = toString(m.scheme);
  j["nt"] = m.numTx;
  j["constellation_order"] = m.constellationOrder;
  j["layout"] = layoutJson(m.layout);
  j["preamble"] = preambleJson(m.preamble);
  j["power_factor"] = m.powerFactor;
  j["data_peak"] = m.dataPeak;
  j["full_scale"] = m.fullScale;
  j["sample_rate"] = m.sampleRate;
  j["sections"] = {{"sync", rangeJson(m.sync)}, {"snr", rangeJson(m.snr)}, {"data", rangeJson(m.data)}};
  j["frames"] = m.numFrames;
  j["bit_count"] = m.bitCount;
  return j.dump(2) + "\n";
}

TransmissionMeta parseMeta(const std::string& text) {
  const json j = parseText(text);
  if (!j.is_object()) throw SchemaError("sidecar root must be an object");
  if (getInt<int>(require(j, "version", ""), "version") != 1) fieldError("version", "unsupported sidecar version");
  TransmissionMeta m;
  try {
    m.scheme = schemeFromString(getString(require(j, "scheme", ""), "scheme"));
  } catch (const ConfigError& e) {
    fieldError("scheme", e.what());
  }
  m.numTx = getInt<int>(require(j, "nt", ""), "nt");
  m.constellationOrder = getInt<int>(require(j, "constellation_order", ""), "constellation_order");
  m.layout = parseLayout(require(j, "layout", ""));
  m.preamble = parsePreamble(require(j, "preamble", ""));
  m.powerFactor = getNumber(require(j, "power_factor", ""), "power_factor");
  m.dataPeak = getNumber(require(j, "data_peak", ""), "data_peak");
  m.fullScale = getNumber(require(j, "full_scale", ""), "full_scale");
  m.sampleRate = getNumber(require(j, "sample_rate", ""), "sample_rate");
  const json& sec = require(j, "sections", "");
  m.sync = parseRange(require(sec, "sync", "sections."), "sections.sync");
  m.snr = parseRange(require(sec, "snr", "sections."), "sections.snr");
  m.data = parseRange(require(sec, "data", "sections."), "sections.data");
  m.numFrames = getInt<std::size_t>(require(j, "frames", ""), "frames");
  m.bitCount = getInt<std::size_t>(require(j, "bit_count", ""), "bit_count");
  try {
    m.layout.validate();
    m.preamble.validate();
  } catch (const ConfigError& e) {
    throw SchemaError(std::string("invalid sidecar: ") + e.what());
  }
  return m;
}

}  // namespace smlink
