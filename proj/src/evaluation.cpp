#include "tshint/evaluation.hpp"

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tshint/util.hpp"

namespace tshint {

double PrestonModel::predict(const WaferRun& run) const {
  return k * run.channel_mean(pressure_channel) * run.channel_mean(velocity_channel);
}

PrestonModel preston_fit(const std::vector<WaferRun>& runs, std::size_t pressure_channel,
                         std::size_t velocity_channel) {
  if (runs.empty()) throw Error("preston_fit: no runs");
  double num = 0.0, den = 0.0;
  for (const WaferRun& run : runs) {
    double pv = run.channel_mean(pressure_channel) * run.channel_mean(velocity_channel);
    num += run.target_mrr * pv;
    den += pv * pv;
  }
  if (den == 0.0) throw Error("preston_fit: all pressure*velocity products are zero");
  PrestonModel m;
  m.k = num / den;
  m.pressure_channel = pressure_channel;
  m.velocity_channel = velocity_channel;
  if (!std::isfinite(m.k)) throw Error("preston_fit: non-finite k");
  return m;
}

double rmse(const std::vector<double>& y_true, const std::vector<double>& y_pred) {
  if (y_true.empty() || y_true.size() != y_pred.size()) {
    throw Error("rmse: inputs must be equal nonzero length");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    double d = y_true[i] - y_pred[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(y_true.size()));
}

double r2(const std::vector<double>& y_true, const std::vector<double>& y_pred) {
  if (y_true.empty() || y_true.size() != y_pred.size()) {
    throw Error("r2: inputs must be equal nonzero length");
  }
  double mean = 0.0;
  for (double v : y_true) mean += v;
  mean /= static_cast<double>(y_true.size());
  double sse = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    double d = y_true[i] - y_pred[i];
    sse += d * d;
    double t = y_true[i] - mean;
    sst += t * t;
  }
  if (sst == 0.0) throw Error("r2: y_true is constant");
  return 1.0 - sse / sst;
}

EvalReport bench(const std::vector<const Predictor*>& models, const std::vector<WaferRun>& runs,
                 const std::vector<SampleTensor>& samples) {
  if (runs.size() != samples.size()) throw Error("bench: runs/samples size mismatch");
  if (runs.empty()) throw Error("bench: empty test set");
  EvalReport report;
  for (const Predictor* model : models) {
    std::vector<double> y_pred(runs.size());
    for (std::size_t i = 0; i < runs.size(); ++i) y_pred[i] = model->predict(runs[i], samples[i]);
    auto add_row = [&](const std::string& mode_label, auto keep) {
      std::vector<double> yt, yp;
      for (std::size_t i = 0; i < runs.size(); ++i) {
        if (!keep(runs[i])) continue;
        yt.push_back(runs[i].target_mrr);
        yp.push_back(y_pred[i]);
      }
      if (yt.empty()) return;
      EvalRow row;
      row.model = model->name();
      row.mode = mode_label;
      row.rmse = rmse(yt, yp);
      bool constant = true;
      for (double v : yt) constant = constant && v == yt[0];
      row.r2 = constant ? std::numeric_limits<double>::quiet_NaN() : r2(yt, yp);
      row.n = yt.size();
      report.rows.push_back(std::move(row));
    };
    add_row("all", [](const WaferRun&) { return true; });
    add_row("low_speed", [](const WaferRun& r) { return r.mode == Mode::LowSpeed; });
    add_row("high_speed", [](const WaferRun& r) { return r.mode == Mode::HighSpeed; });
  }
  return report;
}

std::string report_to_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "model,mode,rmse,r2,n\n";
  for (const EvalRow& row : report.rows) {
    out << row.model << "," << row.mode << "," << format_double(row.rmse) << ","
        << (std::isnan(row.r2) ? std::string() : format_double(row.r2)) << "," << row.n << "\n";
  }
  return out.str();
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["rows"] = nlohmann::ordered_json::array();
  for (const EvalRow& row : report.rows) {
    nlohmann::ordered_json r;
    r["model"] = row.model;
    r["mode"] = row.mode;
    r["rmse"] = row.rmse;
    if (std::isnan(row.r2)) {
      r["r2"] = nullptr;
    } else {
      r["r2"] = row.r2;
    }
    r["n"] = row.n;
    j["rows"].push_back(std::move(r));
  }
  j["config_hashes"] = report.config_hashes;
  return j.dump(2) + "\n";
}

void write_report(const EvalReport& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_file_atomic(out_dir / "report.csv", report_to_csv(report));
  write_file_atomic(out_dir / "report.json", report_to_json(report));
}

}  // namespace tshint
