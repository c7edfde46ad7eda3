#include "tshint/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "tshint/rng.hpp"
#include "tshint/util.hpp"

namespace tshint {

const char* mode_name(Mode m) { return m == Mode::LowSpeed ? "low_speed" : "high_speed"; }

Mode mode_from_chamber(int chamber) {
  if (chamber >= 4 && chamber <= 6) return Mode::LowSpeed;
  if (chamber >= 1 && chamber <= 3) return Mode::HighSpeed;
  throw Error("unknown chamber id " + std::to_string(chamber));
}

int canonical_chamber(Mode m) { return m == Mode::LowSpeed ? 4 : 1; }

const std::vector<std::string>& default_channel_names() {
  static const std::vector<std::string> names = {
      "usage_of_backing_film",        // 0
      "usage_of_dresser",             // 1
      "usage_of_polishing_table",     // 2
      "usage_of_dresser_table",       // 3
      "usage_of_membrane",            // 4
      "pressurized_chamber_pressure", // 5
      "main_outer_air_bag_pressure",  // 6
      "center_air_bag_pressure",      // 7
      "ripple_air_bag_pressure",      // 8
      "retainer_ring_pressure",       // 9
      "edge_air_bag_pressure",        // 10
      "slurry_flow_line_a",           // 11
      "slurry_flow_line_b",           // 12
      "slurry_flow_line_c",           // 13
      "wafer_rotation",               // 14
      "stage_rotation",               // 15
      "head_rotation",                // 16
      "dressing_water_status",        // 17
      "usage_of_pressurized_sheet",   // 18
  };
  return names;
}

double WaferRun::channel_mean(std::size_t c) const {
  const auto& s = channels[c];
  double acc = 0.0;
  for (double v : s) acc += v;
  return acc / static_cast<double>(s.size());
}

void SynthConfig::validate() const {
  if (min_length < 8) throw Error("synthesize: min length must be >= 8");
  if (max_length < min_length) throw Error("synthesize: max_length < min_length");
  if (noise_std < 0) throw Error("synthesize: noise_std must be >= 0");
  if (!std::isfinite(preston_k) || preston_k <= 0) {
    throw Error("synthesize: preston_k must be positive");
  }
}

// ---------------------------------------------------------------------------
// CSV ingestion

namespace {

struct RawRun {
  std::vector<double> timestamps;
  std::vector<std::vector<double>> channels;
  int chamber = 0;
  double target = 0.0;
  bool has_target = false;
};

}  // namespace

std::vector<WaferRun> load_runs(const std::filesystem::path& csv_path,
                                const std::vector<std::string>& schema,
                                const std::optional<std::filesystem::path>& targets_sidecar) {
  std::ifstream in(csv_path);
  if (!in) throw Error("cannot open file: " + csv_path.string());

  std::string line;
  if (!std::getline(in, line)) throw Error("no runs in " + csv_path.string());
  std::vector<std::string> header = split_csv_line(line);

  auto column = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw Error("missing column '" + name + "' in " + csv_path.string());
    }
    return static_cast<std::size_t>(it - header.begin());
  };

  std::size_t id_col = column("run_id");
  std::size_t ts_col = column("timestamp");
  std::size_t chamber_col = column("chamber");
  std::vector<std::size_t> chan_cols;
  chan_cols.reserve(schema.size());
  for (const auto& name : schema) chan_cols.push_back(column(name));

  bool inline_target = std::find(header.begin(), header.end(), "target_mrr") != header.end();
  std::size_t target_col = inline_target ? column("target_mrr") : 0;
  if (!inline_target && !targets_sidecar) {
    throw Error("missing column 'target_mrr' in " + csv_path.string() +
                " and no targets sidecar given");
  }

  std::map<std::string, RawRun> raw;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw Error(csv_path.string() + ":" + std::to_string(line_no) +
                  ": expected " + std::to_string(header.size()) + " cells, got " +
                  std::to_string(cells.size()));
    }
    std::string context = csv_path.string() + ":" + std::to_string(line_no);
    const std::string& id = cells[id_col];
    RawRun& run = raw.try_emplace(id).first->second;
    if (run.channels.empty()) {
      run.channels.resize(schema.size());
      run.chamber = static_cast<int>(parse_double(cells[chamber_col], context));
      mode_from_chamber(run.chamber);  // validate early
    } else {
      int chamber = static_cast<int>(parse_double(cells[chamber_col], context));
      if (chamber != run.chamber) {
        throw Error("run '" + id + "' has inconsistent chamber ids");
      }
    }
    run.timestamps.push_back(parse_double(cells[ts_col], context));
    for (std::size_t c = 0; c < chan_cols.size(); ++c) {
      run.channels[c].push_back(parse_double(cells[chan_cols[c]], context));
    }
    if (inline_target) {
      run.target = parse_double(cells[target_col], context);
      run.has_target = true;
    }
  }

  if (targets_sidecar) {
    std::ifstream side(*targets_sidecar);
    if (!side) throw Error("cannot open file: " + targets_sidecar->string());
    std::string sline;
    std::getline(side, sline);  // header
    std::size_t sline_no = 1;
    while (std::getline(side, sline)) {
      ++sline_no;
      if (sline.empty() || sline == "\r") continue;
      std::vector<std::string> cells = split_csv_line(sline);
      if (cells.size() != 2) {
        throw Error(targets_sidecar->string() + ":" + std::to_string(sline_no) +
                    ": expected run_id,target_mrr");
      }
      auto it = raw.find(cells[0]);
      if (it != raw.end()) {
        it->second.target = parse_double(cells[1], targets_sidecar->string());
        it->second.has_target = true;
      }
    }
  }

  std::vector<WaferRun> runs;
  for (auto& [id, r] : raw) {
    if (r.timestamps.size() < 2) {
      std::fprintf(stderr, "tshint: rejecting run '%s' with %zu timestamp(s)\n", id.c_str(),
                   r.timestamps.size());
      continue;
    }
    if (!r.has_target) throw Error("run '" + id + "' has no target_mrr");
    if (!std::isfinite(r.target) || r.target <= 0) {
      throw Error("run '" + id + "' target must be finite and positive");
    }
    // order rows by timestamp
    std::vector<std::size_t> order(r.timestamps.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return r.timestamps[a] < r.timestamps[b]; });
    WaferRun run;
    run.run_id = id;
    run.mode = mode_from_chamber(r.chamber);
    run.target_mrr = r.target;
    run.polishing_time = r.timestamps[order.back()] - r.timestamps[order.front()];
    run.channels.resize(r.channels.size());
    for (std::size_t c = 0; c < r.channels.size(); ++c) {
      run.channels[c].reserve(order.size());
      for (std::size_t i : order) run.channels[c].push_back(r.channels[c][i]);
    }
    runs.push_back(std::move(run));
  }
  if (runs.empty()) throw Error("no runs in " + csv_path.string());
  // map iteration already yields lexicographic run_id order
  return runs;
}

void save_runs(const std::vector<WaferRun>& runs, const std::filesystem::path& csv_path,
               const std::vector<std::string>& schema) {
  std::ostringstream out;
  out << "run_id,timestamp,chamber";
  for (const auto& name : schema) out << "," << name;
  out << ",target_mrr\n";
  for (const WaferRun& run : runs) {
    if (run.channels.size() != schema.size()) {
      throw Error("run '" + run.run_id + "' has " + std::to_string(run.channels.size()) +
                  " channels, schema expects " + std::to_string(schema.size()));
    }
    std::size_t len = run.length();
    for (std::size_t t = 0; t < len; ++t) {
      // last timestamp written verbatim so polishing_time round-trips
      double ts = (t + 1 == len) ? run.polishing_time
                                 : run.polishing_time * static_cast<double>(t) /
                                       static_cast<double>(len - 1);
      out << run.run_id << "," << format_double(ts) << "," << canonical_chamber(run.mode);
      for (const auto& chan : run.channels) out << "," << format_double(chan[t]);
      out << "," << format_double(run.target_mrr) << "\n";
    }
  }
  write_file_atomic(csv_path, out.str());
}

// ---------------------------------------------------------------------------
// Resampling and normalization

std::vector<double> resample_linear(const std::vector<double>& series, std::size_t t_len) {
  std::size_t len = series.size();
  if (len < 2) throw Error("resample_linear: series length must be >= 2");
  if (t_len < 2) throw Error("resample_linear: target length must be >= 2");
  std::vector<double> out(t_len);
  out.front() = series.front();
  out.back() = series.back();
  double scale = static_cast<double>(len - 1) / static_cast<double>(t_len - 1);
  for (std::size_t j = 1; j + 1 < t_len; ++j) {
    double pos = static_cast<double>(j) * scale;
    std::size_t i0 = std::min(static_cast<std::size_t>(pos), len - 2);
    double frac = pos - static_cast<double>(i0);
    out[j] = series[i0] + frac * (series[i0 + 1] - series[i0]);
  }
  return out;
}

SampleTensor normalize(const Tensor& resampled, std::string run_id, Mode mode, double target) {
  if (resampled.rank() != 2) {
    throw Error("normalize: expected C x T matrix, got " + resampled.shape_str());
  }
  if (!resampled.all_finite()) throw Error("normalize: non-finite input values");
  std::size_t c_len = resampled.rows();
  std::size_t t_len = resampled.cols();
  SampleTensor s;
  s.values = Tensor({c_len, t_len});
  s.run_id = std::move(run_id);
  s.mode = mode;
  s.target = target;
  s.norm_stats.resize(c_len);
  for (std::size_t c = 0; c < c_len; ++c) {
    const double* src = resampled.data() + c * t_len;
    double mu = 0.0;
    for (std::size_t t = 0; t < t_len; ++t) mu += src[t];
    mu /= static_cast<double>(t_len);
    double var = 0.0;
    for (std::size_t t = 0; t < t_len; ++t) {
      double d = src[t] - mu;
      var += d * d;
    }
    var /= static_cast<double>(t_len);
    double sd = std::sqrt(var);
    s.norm_stats[c] = {mu, sd};
    double inv = 1.0 / (sd + 1e-8);
    double* dst = s.values.data() + c * t_len;
    for (std::size_t t = 0; t < t_len; ++t) dst[t] = (src[t] - mu) * inv;
  }
  return s;
}

SampleTensor make_sample(const WaferRun& run, std::size_t t_len) {
  if (run.channels.size() != kNumChannels) {
    throw Error("run '" + run.run_id + "' has " + std::to_string(run.channels.size()) +
                " channels, expected " + std::to_string(kNumChannels));
  }
  Tensor resampled({run.channels.size(), t_len});
  for (std::size_t c = 0; c < run.channels.size(); ++c) {
    std::vector<double> row = resample_linear(run.channels[c], t_len);
    std::copy(row.begin(), row.end(), resampled.data() + c * t_len);
  }
  return normalize(resampled, run.run_id, run.mode, run.target_mrr);
}

std::vector<SampleTensor> make_samples(const std::vector<WaferRun>& runs, std::size_t t_len) {
  std::vector<SampleTensor> out;
  out.reserve(runs.size());
  for (const auto& run : runs) out.push_back(make_sample(run, t_len));
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic generator

namespace {

// Two-level setpoint calibration per mode. Duty cycles drawn in [0.3, 0.7]
// put channel means in [lo + 0.3*span, lo + 0.7*span]; the pressure and
// rotation calibrations below land k*P*V in 55-110 (low speed) and
// 140-170 nm/min (high speed) for preston_k = 1.
struct TwoLevel {
  double lo;
  double span;
};

struct ModeCalib {
  TwoLevel pressure;
  TwoLevel rotation;
  double dress_on_min, dress_on_max;
};

const ModeCalib kLowCalib{{1.4675, 2.575}, {19.0, 20.0}, 0.55, 0.85};
const ModeCalib kHighCalib{{2.4925, 0.425}, {49.2, 16.0}, 0.15, 0.45};

constexpr double kDutyMin = 0.3;
constexpr double kDutyMax = 0.7;
constexpr double kLevelJitter = 0.01;  // fraction of span

// Pure two-level setpoint path (no jitter); companion channels scale it.
std::vector<double> two_level_path(std::size_t len, const TwoLevel& tl, double duty,
                                   std::size_t* n_high_out = nullptr) {
  auto n_high = static_cast<std::size_t>(std::llround(duty * static_cast<double>(len)));
  n_high = std::clamp<std::size_t>(n_high, 1, len - 1);
  if (n_high_out) *n_high_out = n_high;
  std::vector<double> s(len);
  for (std::size_t t = 0; t < len; ++t) s[t] = t < n_high ? tl.lo + tl.span : tl.lo;
  return s;
}

std::vector<double> with_jitter(std::vector<double> path, double sigma, Rng& rng) {
  for (double& v : path) v += rng.gaussian(0.0, sigma);
  return path;
}

std::vector<double> tracker_series(const std::vector<double>& path, double factor, double sigma,
                                   Rng& rng) {
  std::vector<double> s(path.size());
  for (std::size_t t = 0; t < path.size(); ++t) s[t] = factor * path[t] + rng.gaussian(0.0, sigma);
  return s;
}

std::vector<double> usage_series(std::size_t len, Rng& rng) {
  double u = rng.uniform(50.0, 500.0);
  double rate = rng.uniform(0.05, 0.5);
  std::vector<double> s(len);
  for (std::size_t t = 0; t < len; ++t) {
    s[t] = u;
    u += std::abs(rng.gaussian(rate, rate / 4.0));
  }
  return s;
}

std::vector<double> setpoint_series(std::size_t len, double base, Rng& rng) {
  double setpoint = base * rng.uniform(0.95, 1.05);
  std::vector<double> s(len);
  for (std::size_t t = 0; t < len; ++t) s[t] = setpoint + rng.gaussian(0.0, 0.02 * base);
  return s;
}

double series_mean(const std::vector<double>& s) {
  double acc = 0.0;
  for (double v : s) acc += v;
  return acc / static_cast<double>(s.size());
}

WaferRun make_run(std::string run_id, Mode mode, const SynthConfig& cfg, Rng& rng) {
  const ModeCalib& calib = mode == Mode::LowSpeed ? kLowCalib : kHighCalib;
  std::size_t len = cfg.min_length + rng.index(cfg.max_length - cfg.min_length + 1);

  WaferRun run;
  run.run_id = std::move(run_id);
  run.mode = mode;
  run.polishing_time = static_cast<double>(len - 1);
  run.channels.resize(kNumChannels);

  double pressure_duty = rng.uniform(kDutyMin, kDutyMax);
  double rotation_duty = rng.uniform(kDutyMin, kDutyMax);
  double slurry_duty = rng.uniform(kDutyMin, kDutyMax);
  double dress_on = rng.uniform(calib.dress_on_min, calib.dress_on_max);

  std::size_t slurry_high = 0;
  const TwoLevel slurry_calib{140.0, 60.0};
  std::vector<double> pressure_path = two_level_path(len, calib.pressure, pressure_duty);
  std::vector<double> rotation_path = two_level_path(len, calib.rotation, rotation_duty);
  std::vector<double> slurry_path = two_level_path(len, slurry_calib, slurry_duty, &slurry_high);
  double p_sigma = kLevelJitter * calib.pressure.span;
  double v_sigma = kLevelJitter * calib.rotation.span;
  double s_sigma = kLevelJitter * slurry_calib.span;

  for (std::size_t c = 0; c < kNumChannels; ++c) {
    switch (c) {
      case kPressureChannel:
        run.channels[c] = with_jitter(pressure_path, p_sigma, rng);
        break;
      case kRotationChannel:
        run.channels[c] = with_jitter(rotation_path, v_sigma, rng);
        break;
      case kSlurryChannel:
        run.channels[c] = with_jitter(slurry_path, s_sigma, rng);
        break;
      case kDressingChannel: {
        auto n_on = std::clamp<std::size_t>(
            static_cast<std::size_t>(std::llround(dress_on * static_cast<double>(len))), 1,
            len - 1);
        run.channels[c].assign(len, 0.0);
        for (std::size_t t = 0; t < n_on; ++t) run.channels[c][t] = 1.0;
        break;
      }
      case 0:
      case 1:
      case 2:
      case 3:
      case 4:
      case 18:
        run.channels[c] = usage_series(len, rng);
        break;
      case 5:
        run.channels[c] = setpoint_series(len, 10.0, rng);
        break;
      case 7:
        // center air bag tracks the main outer air bag setpoints
        run.channels[c] = tracker_series(pressure_path, rng.uniform(0.55, 0.65), p_sigma, rng);
        break;
      case 8: {
        // ripple air bag: setpoint plus a slow oscillation
        run.channels[c] = setpoint_series(len, 2.0, rng);
        for (std::size_t t = 0; t < len; ++t) {
          run.channels[c][t] += 0.1 * std::sin(2.0 * std::numbers::pi *
                                               static_cast<double>(t) / 24.0);
        }
        break;
      }
      case 9:
        run.channels[c] = setpoint_series(len, 4.0, rng);
        break;
      case 10:
        // edge air bag tracks the main outer air bag setpoints
        run.channels[c] = tracker_series(pressure_path, rng.uniform(0.8, 0.9), p_sigma, rng);
        break;
      case 12:
        // line B carries a share of the line A flow program
        run.channels[c] = tracker_series(slurry_path, rng.uniform(0.9, 1.1), s_sigma, rng);
        break;
      case 13:
        run.channels[c] = setpoint_series(len, 180.0, rng);
        break;
      case 14:
        // wafer rotation co-varies with stage rotation
        run.channels[c] = tracker_series(rotation_path, rng.uniform(0.95, 1.05), v_sigma, rng);
        break;
      case 16:
        // head rotation runs at roughly half the stage rate
        run.channels[c] = tracker_series(rotation_path, rng.uniform(0.48, 0.52), v_sigma, rng);
        break;
      default:
        throw Error("unhandled synthetic channel " + std::to_string(c));
    }
  }

  double p_mean = series_mean(run.channels[kPressureChannel]);
  double v_mean = series_mean(run.channels[kRotationChannel]);
  double slurry_frac = static_cast<double>(slurry_high) / static_cast<double>(len);
  run.target_mrr = cfg.preston_k * p_mean * v_mean +
                   cfg.nonpreston_coeff * (2.0 * slurry_frac - 1.0) +
                   rng.gaussian(0.0, cfg.noise_std);
  if (!std::isfinite(run.target_mrr) || run.target_mrr <= 0) {
    throw Error("synthesize: infeasible ranges yield nonpositive target for run " + run.run_id);
  }
  return run;
}

}  // namespace

std::vector<WaferRun> synthesize(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  std::vector<WaferRun> runs;
  runs.reserve(cfg.n_low + cfg.n_high);
  char id[32];
  for (std::size_t i = 0; i < cfg.n_low + cfg.n_high; ++i) {
    Mode mode = i < cfg.n_low ? Mode::LowSpeed : Mode::HighSpeed;
    std::snprintf(id, sizeof(id), "run_%05zu", i);
    runs.push_back(make_run(id, mode, cfg, rng));
  }
  return runs;
}

// ---------------------------------------------------------------------------
// Splitting

SplitResult split(const std::vector<WaferRun>& runs, double train_frac, double pretrain_frac,
                  std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw Error("split: train_frac must be in (0,1)");
  }
  if (!(pretrain_frac > 0.0 && pretrain_frac < 1.0)) {
    throw Error("split: pretrain_frac must be in (0,1)");
  }
  Rng rng(seed);
  SplitResult result;
  for (Mode mode : {Mode::LowSpeed, Mode::HighSpeed}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      if (runs[i].mode == mode) idx.push_back(i);
    }
    if (idx.empty()) continue;
    Rng sub = rng.fork(static_cast<std::uint64_t>(mode));
    sub.shuffle(idx);
    auto n_train = static_cast<std::size_t>(static_cast<double>(idx.size()) * train_frac);
    auto n_pre = static_cast<std::size_t>(static_cast<double>(n_train) * pretrain_frac);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const WaferRun& run = runs[idx[i]];
      if (i < n_pre) {
        result.pretrain.push_back(run);
      } else if (i < n_train) {
        result.shot_pool.push_back(run);
      } else {
        result.test.push_back(run);
      }
    }
  }
  if (result.pretrain.empty() || result.shot_pool.empty() || result.test.empty()) {
    throw Error("split: a partition would be empty");
  }
  auto by_id = [](const WaferRun& a, const WaferRun& b) { return a.run_id < b.run_id; };
  std::sort(result.pretrain.begin(), result.pretrain.end(), by_id);
  std::sort(result.shot_pool.begin(), result.shot_pool.end(), by_id);
  std::sort(result.test.begin(), result.test.end(), by_id);
  return result;
}

}  // namespace tshint
