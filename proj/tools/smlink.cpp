// smlink command-line front end.

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "smlink/analysis.hpp"
#include "smlink/harness.hpp"
#include "smlink/modem.hpp"
#include "smlink/rxchain.hpp"
#include "smlink/txchain.hpp"

using namespace smlink;
using nlohmann::json;

namespace {

std::string readFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void writeFile(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw IoError("cannot write " + path);
}

// Bits are packed MSB first.
BitVector unpackBits(const std::string& bytes, std::size_t limit = 0) {
  BitVector bits;
  bits.reserve(bytes.size() * 8);
  for (unsigned char c : bytes)
    for (int k = 7; k >= 0; --k) bits.push_back(static_cast<std::uint8_t>((c >> k) & 1));
  if (limit > 0 && limit < bits.size()) bits.resize(limit);
  return bits;
}

std::string packBits(const BitVector& bits) {
  std::string out((bits.size() + 7) / 8, '\0');
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) out[i / 8] = static_cast<char>(out[i / 8] | (0x80 >> (i % 8)));
  return out;
}

json matrixJson(const CMatrix& H) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < H.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < H.cols(); ++c) row.push_back({H(r, c).real(), H(r, c).imag()});
    rows.push_back(row);
  }
  return rows;
}

json finiteOrNull(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string antennaFile(const std::string& prefix, const char* tag, std::size_t index) {
  return prefix + "_" + tag + std::to_string(index + 1) + ".i16";
}

Waveform loadCapture(const std::vector<std::string>& files, double fullScale) {
  Waveform w;
  for (const auto& f : files) w.channels.push_back(dequantizeI16(readI16File(f), fullScale));
  for (const auto& ch : w.channels)
    if (ch.size() != w.channels.front().size()) throw FramingError("capture files differ in length");
  return w;
}

void writeCapture(const Waveform& w, const std::string& prefix, const char* tag, double fullScale, Overflow mode,
                  const std::string& listPrefix) {
  for (std::size_t a = 0; a < w.numChannels(); ++a) {
    const auto path = antennaFile(prefix, tag, a);
    writeI16File(path, quantizeI16(w.channels[a], fullScale, mode));
    std::cout << listPrefix << path << "\n";
  }
}

int runSimulate(const std::string& configPath, const std::string& out, int workers) {
  SimConfig cfg = loadConfig(configPath);
  if (workers > 0) cfg.workers = workers;
  const auto records = runSimulation(cfg);
  exportCsv(records, out);
  for (const auto& r : records)
    std::cerr << "snr " << r.snrDbTarget << " dB  aber " << r.aber << "  (" << r.bitErrors << "/" << r.bits
              << ", " << r.wallTimeSeconds << " s)\n";
  return 0;
}

int runBound(const std::string& configPath, const std::string& out, int workers) {
  const SimConfig cfg = loadConfig(configPath);
  const auto bcfg = boundConfigFrom(cfg);
  const auto points = unionBoundAber(bcfg, cfg.masterSeed, workers > 0 ? workers : cfg.workers);
  exportBoundCsv(points, bcfg, out);
  return 0;
}

int runComplexity(const std::vector<int>& nts, int nr, int m, const std::string& out) {
  std::ostringstream csv;
  csv << "nt,nr,m,c_sm,c_smx,reduction_num,reduction_den,reduction_percent\n";
  for (int nt : nts) {
    const auto sm = receiverComplexity(Scheme::SM, nt, nr, m);
    const auto smx = receiverComplexity(Scheme::SMX, nt, nr, m);
    csv << nt << ',' << nr << ',' << m << ',' << sm.realMultiplications << ',' << smx.realMultiplications << ','
        << sm.relativeReduction.numerator << ',' << sm.relativeReduction.denominator << ','
        << sm.relativeReductionPercent << '\n';
  }
  if (out.empty())
    std::cout << csv.str();
  else
    writeFile(out, csv.str());
  return 0;
}

int runFit(const std::string& samplesPath, const std::string& out) {
  std::istringstream in(readFile(samplesPath));
  std::vector<double> samples;
  std::string tok;
  while (in >> tok) {
    if (tok.find_first_of(",;") != std::string::npos)
      for (auto& c : tok)
        if (c == ',' || c == ';') c = ' ';
    std::istringstream parts(tok);
    double v;
    while (parts >> v) samples.push_back(v);
    if (!parts.eof()) throw SchemaError("non-numeric token '" + tok + "' in " + samplesPath);
  }
  const auto fit = fitRician(samples);
  json j = {{"samples", samples.size()},
            {"k_factor_db", fit.kFactorDb},
            {"nu", fit.nu},
            {"sigma", fit.sigma},
            {"mean_amplitude", fit.meanAmplitude},
            {"gof_statistic", fit.gofStatistic},
            {"gof_bins", fit.gofBins},
            {"gof_p_value", fit.gofPValue},
            {"gof_pass_95", fit.fitsAt(0.05)},
            {"lr_statistic", fit.lrStatistic},
            {"rayleigh_selected", fit.rayleighSelected}};
  writeFile(out, j.dump(2) + "\n");
  return 0;
}

int runEncode(const std::string& configPath, const std::string& bitsPath, const std::string& prefix,
              std::size_t bitCount) {
  const SimConfig cfg = loadConfig(configPath);
  const BitVector bits = unpackBits(readFile(bitsPath), bitCount);
  const auto tx = encodeBits(cfg, bits);
  writeCapture(tx.waveform, prefix, "tx", tx.meta.fullScale, Overflow::Error, "wrote ");
  writeFile(prefix + ".json", serializeMeta(tx.meta));
  std::cout << "wrote " << prefix << ".json (" << tx.meta.numFrames << " frames, " << bits.size() << " bits)\n";
  return 0;
}

struct ChannelArgs {
  std::vector<std::string> inputs;
  std::string prefix;
  int nr = 2;
  double kDb = 33.0;
  bool rayleigh = false;
  bool identity = false;
  std::string imbalance = "none";
  double noiseVariance = 0.0;
  double fo = 0.0;
  std::uint64_t seed = 1;
  std::size_t leadingZeros = 0;
};

int runChannel(const ChannelArgs& a) {
  Waveform tx = loadCapture(a.inputs, 1.0);
  const int nt = static_cast<int>(tx.numChannels());
  CMatrix H;
  if (a.identity) {
    H = CMatrix::Identity(a.nr, nt);
  } else {
    Rng rng = makeStream(a.seed, 1);
    const auto model = a.rayleigh ? FadingModel::rayleigh() : FadingModel::rician(a.kDb);
    H = drawChannel(model, PowerImbalance::fromProfile(a.imbalance, a.nr, nt), a.nr, nt, rng).H;
  }
  for (auto& ch : tx.channels) ch.insert(ch.begin(), a.leadingZeros, Complex{0.0, 0.0});
  const Waveform rx = propagateWaveform(tx, H, {a.noiseVariance, a.fo, a.seed});
  writeCapture(rx, a.prefix, "rx", 1.0, Overflow::Saturate, "wrote ");
  return 0;
}

int runDecode(const std::vector<std::string>& captures, const std::string& metaPath, const std::string& out,
              const std::string& reportPath, const std::string& referencePath) {
  const TransmissionMeta meta = parseMeta(readFile(metaPath));
  const Waveform rx = loadCapture(captures, meta.fullScale);
  json report;
  report["capture_files"] = captures;
  DecodeResult res;
  try {
    res = decodeTransmission(rx, meta);
  } catch (const SyncRejected& e) {
    report["rejected"] = true;
    report["error"] = e.what();
    if (!reportPath.empty()) writeFile(reportPath, report.dump(2) + "\n");
    std::cerr << "decode: " << e.what() << "\n";
    return 2;
  }
  writeFile(out, packBits(res.bits));
  report["rejected"] = false;
  report["bit_count"] = res.bits.size();
  report["sync_peaks"] = res.sync.peakIndices;
  report["snr_db"] = finiteOrNull(res.snr.snrDb);
  report["snr_valid"] = res.snr.valid;
  json frames = json::array();
  for (const auto& f : res.frames)
    frames.push_back({{"fo_cycles_per_sample", f.foCyclesPerSample},
                      {"h_first", matrixJson(f.first.H)},
                      {"h_second", matrixJson(f.second.H)}});
  report["frames"] = frames;
  if (!referencePath.empty()) {
    const BitVector ref = unpackBits(readFile(referencePath), res.bits.size());
    std::size_t errors = 0;
    for (std::size_t i = 0; i < ref.size(); ++i) errors += ref[i] != res.bits[i];
    report["bit_errors"] = errors;
    report["ber"] = ref.empty() ? 0.0 : static_cast<double>(errors) / static_cast<double>(ref.size());
  }
  if (!reportPath.empty()) writeFile(reportPath, report.dump(2) + "\n");
  std::cout << "decoded " << res.bits.size() << " bits from " << res.frames.size() << " frames\n";
  return 0;
}

int runPlot(const std::string& figure, const std::string& out, const PlotOptions& opts) {
  const auto rows = plotData(figure, opts);
  writeFile(out, formatPlotCsv(rows));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial modulation / spatial multiplexing link simulator"};
  app.require_subcommand(1);

  std::string config, out, bitsPath, prefix, meta, report, reference, samples, figure;
  int workers = 0;

  auto* sim = app.add_subcommand("simulate", "Monte Carlo ABER sweep to CSV");
  sim->add_option("--config", config, "JSON config")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", out, "output CSV")->required();
  sim->add_option("--workers", workers, "worker threads (overrides config)");

  auto* bound = app.add_subcommand("bound", "analytical union bound to CSV");
  bound->add_option("--config", config, "JSON config")->required()->check(CLI::ExistingFile);
  bound->add_option("--out", out, "output CSV")->required();
  bound->add_option("--workers", workers, "worker threads");

  std::vector<int> nts{2, 4, 8, 16, 32, 64, 128};
  int nr = 1, m = 1;
  auto* cx = app.add_subcommand("complexity", "ML receiver real-multiplication counts");
  cx->add_option("--nt", nts, "transmit antenna counts");
  cx->add_option("--nr", nr, "receive antennas");
  cx->add_option("--m", m, "bits per channel use");
  cx->add_option("--out", out, "output CSV (default stdout)");

  auto* fit = app.add_subcommand("fit-channel", "Rice fit of amplitude samples");
  fit->add_option("--samples", samples, "text file of amplitudes")->required()->check(CLI::ExistingFile);
  fit->add_option("--out", out, "output JSON")->required();

  std::size_t bitCount = 0;
  auto* enc = app.add_subcommand("encode", "bits to per-antenna int16 waveform files");
  enc->add_option("--config", config, "JSON config")->required()->check(CLI::ExistingFile);
  enc->add_option("--bits", bitsPath, "binary bit file, MSB first")->required()->check(CLI::ExistingFile);
  enc->add_option("--out", prefix, "output prefix")->required();
  enc->add_option("--bit-count", bitCount, "use only the first N bits");

  ChannelArgs ch;
  auto* chan = app.add_subcommand("channel", "apply a flat MIMO channel to int16 waveform files");
  chan->add_option("--in", ch.inputs, "transmit files in antenna order")->required()->check(CLI::ExistingFile);
  chan->add_option("--out", ch.prefix, "output prefix")->required();
  chan->add_option("--nr", ch.nr, "receive antennas");
  chan->add_option("--k-factor-db", ch.kDb, "Rician K in dB");
  chan->add_flag("--rayleigh", ch.rayleigh, "Rayleigh fading");
  chan->add_flag("--identity", ch.identity, "H = I");
  chan->add_option("--imbalance", ch.imbalance, "none, config1 or config2");
  chan->add_option("--noise-variance", ch.noiseVariance, "per complex sample, full scale = 1");
  chan->add_option("--fo", ch.fo, "frequency offset, cycles per sample");
  chan->add_option("--seed", ch.seed, "random seed");
  chan->add_option("--leading-zeros", ch.leadingZeros, "zeros inserted before the capture");

  std::vector<std::string> captures;
  auto* dec = app.add_subcommand("decode", "int16 capture files back to bits");
  dec->add_option("--capture", captures, "capture file per receive antenna")->required()->check(CLI::ExistingFile);
  dec->add_option("--meta", meta, "sidecar JSON")->required()->check(CLI::ExistingFile);
  dec->add_option("--out", out, "decoded bits, MSB first")->required();
  dec->add_option("--report", report, "report JSON");
  dec->add_option("--reference", reference, "reference bits for BER")->check(CLI::ExistingFile);

  PlotOptions plot;
  auto* pd = app.add_subcommand("plotdata", "curve bundle for one figure as CSV");
  pd->add_option("--figure", figure, "fig10, fig11, fig12 or fig13")
      ->required()
      ->check(CLI::IsMember({"fig10", "fig11", "fig12", "fig13"}));
  pd->add_option("--out", out, "output CSV")->required();
  pd->add_option("--bits-per-trial", plot.bitsPerTrial);
  pd->add_option("--trials", plot.trialsPerSnr);
  pd->add_option("--min-bit-errors", plot.minBitErrors);
  pd->add_option("--channel-draws", plot.channelDraws);
  pd->add_option("--seed", plot.seed);
  pd->add_option("--workers", plot.workers);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) return runSimulate(config, out, workers);
    if (*bound) return runBound(config, out, workers);
    if (*cx) return runComplexity(nts, nr, m, out);
    if (*fit) return runFit(samples, out);
    if (*enc) return runEncode(config, bitsPath, prefix, bitCount);
    if (*chan) return runChannel(ch);
    if (*dec) return runDecode(captures, meta, out, report, reference);
    if (*pd) return runPlot(figure, out, plot);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
