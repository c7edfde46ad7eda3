#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "tshint/dataset.hpp"
#include "tshint/evaluation.hpp"
#include "tshint/predictors.hpp"
#include "tshint/util.hpp"

using namespace tshint;

namespace {

WaferRun constant_run(const std::string& id, Mode mode, double pressure, double rotation,
                      double target, std::size_t len = 8) {
  WaferRun run;
  run.run_id = id;
  run.mode = mode;
  run.target_mrr = target;
  run.polishing_time = static_cast<double>(len - 1);
  run.channels.assign(kNumChannels, std::vector<double>(len, 1.0));
  run.channels[kPressureChannel].assign(len, pressure);
  run.channels[kRotationChannel].assign(len, rotation);
  return run;
}

}  // namespace

TEST_CASE("preston_fit closed-form cases") {
  // single run: mrr 10, pv 2 -> k = 5
  std::vector<WaferRun> one = {constant_run("a", Mode::LowSpeed, 2.0, 1.0, 10.0)};
  PrestonModel p = preston_fit(one);
  CHECK(p.k == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(p.predict(one[0]) == doctest::Approx(10.0).epsilon(1e-15));

  // all pv zero is degenerate
  std::vector<WaferRun> zero = {constant_run("z", Mode::LowSpeed, 0.0, 5.0, 10.0)};
  CHECK_THROWS_AS(preston_fit(zero), Error);

  CHECK_THROWS_AS(preston_fit({}), Error);
}

TEST_CASE("preston_fit minimizes squared error") {
  SynthConfig cfg;
  cfg.n_low = 40;
  cfg.n_high = 10;
  cfg.min_length = 32;
  cfg.max_length = 48;
  cfg.noise_std = 3.0;
  cfg.seed = 31;
  std::vector<WaferRun> runs = synthesize(cfg);
  PrestonModel p = preston_fit(runs);
  auto sse = [&](double k) {
    double acc = 0;
    for (const WaferRun& r : runs) {
      double d = r.target_mrr -
                 k * r.channel_mean(kPressureChannel) * r.channel_mean(kRotationChannel);
      acc += d * d;
    }
    return acc;
  };
  CHECK(sse(p.k) <= sse(p.k + 1e-3));
  CHECK(sse(p.k) <= sse(p.k - 1e-3));
}

TEST_CASE("rmse and r2") {
  std::vector<double> y = {1, 2, 3};
  CHECK(rmse(y, y) == 0.0);
  CHECK(r2(y, y) == 1.0);

  // prediction = mean of y_true gives r2 exactly 0
  std::vector<double> mean_pred(3, 2.0);
  CHECK(r2(y, mean_pred) == 0.0);

  std::vector<double> off = {1, 2, 5};
  CHECK(rmse(y, off) == doctest::Approx(std::sqrt(4.0 / 3.0)).epsilon(1e-15));

  // translation equivariance: rmse(y, y + c) = |c|
  for (double c : {-3.25, 0.5, 7.0}) {
    std::vector<double> shifted = y;
    for (double& v : shifted) v += c;
    CHECK(rmse(y, shifted) == doctest::Approx(std::abs(c)).epsilon(1e-12));
  }

  CHECK_THROWS_AS(rmse({}, {}), Error);
  CHECK_THROWS_AS(rmse({1.0}, {1.0, 2.0}), Error);
  CHECK_THROWS_AS(r2({5.0, 5.0}, {4.0, 6.0}), Error);  // constant y_true
}

TEST_CASE("bench report") {
  std::vector<WaferRun> runs = {constant_run("a", Mode::LowSpeed, 2.0, 30.0, 60.0),
                                constant_run("b", Mode::LowSpeed, 2.5, 30.0, 75.0),
                                constant_run("c", Mode::HighSpeed, 2.7, 55.0, 148.5),
                                constant_run("d", Mode::HighSpeed, 2.8, 55.0, 154.0)};
  std::vector<SampleTensor> samples;
  for (const auto& r : runs) samples.push_back(make_sample(r, 8));

  // a perfect predictor scores rmse 0 everywhere
  class Perfect final : public Predictor {
   public:
    std::string name() const override { return "perfect"; }
    double predict(const WaferRun& run, const SampleTensor&) const override {
      return run.target_mrr;
    }
  } perfect;

  MeanPredictor mean_model(runs);

  EvalReport report = bench({&perfect, &mean_model}, runs, samples);
  REQUIRE(report.rows.size() == 6);  // 2 models x {all, low, high}
  CHECK(report.rows[0].model == "perfect");
  CHECK(report.rows[0].mode == "all");
  CHECK(report.rows[0].rmse == 0.0);
  CHECK(report.rows[0].r2 == 1.0);
  CHECK(report.rows[0].n == 4);
  CHECK(report.rows[1].mode == "low_speed");
  CHECK(report.rows[1].n == 2);

  // the fit-set mean predictor is the r2 = 0 reference on "all"
  const EvalRow& mean_all = report.rows[3];
  CHECK(mean_all.model == "mean");
  CHECK(mean_all.r2 == 0.0);

  auto dir = std::filesystem::temp_directory_path() / "tshint_report_test";
  write_report(report, dir);
  CHECK(std::filesystem::exists(dir / "report.csv"));
  CHECK(std::filesystem::exists(dir / "report.json"));
  std::string csv = read_file(dir / "report.csv");
  CHECK(csv.find("model,mode,rmse,r2,n") == 0);
  CHECK(csv.find("perfect,all,0,1,4") != std::string::npos);

  CHECK_THROWS_AS(bench({&perfect}, {}, {}), Error);
}
