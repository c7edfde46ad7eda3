#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "tshint/dataset.hpp"
#include "tshint/evaluation.hpp"
#include "tshint/rng.hpp"
#include "tshint/util.hpp"

using namespace tshint;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  static fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / "tshint_dataset_tests";
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

std::string tiny_csv(int chamber_a, int chamber_b) {
  std::string header = "run_id,timestamp,chamber";
  for (const auto& name : default_channel_names()) header += "," + name;
  header += ",target_mrr\n";
  auto row = [&](const std::string& id, int ts, int chamber, double base, double target) {
    std::string r = id + "," + std::to_string(ts) + "," + std::to_string(chamber);
    for (std::size_t c = 0; c < kNumChannels; ++c) {
      r += "," + format_double(base + static_cast<double>(c) + ts);
    }
    return r + "," + format_double(target) + "\n";
  };
  return header + row("a", 0, chamber_a, 1.0, 80.0) + row("a", 1, chamber_a, 2.0, 80.0) +
         row("a", 2, chamber_a, 1.5, 80.0) + row("b", 0, chamber_b, 3.0, 150.0) +
         row("b", 1, chamber_b, 3.5, 150.0);
}

}  // namespace

TEST_CASE("resample_linear examples") {
  CHECK(resample_linear({0, 10}, 3) == std::vector<double>{0, 5, 10});

  std::vector<double> same = {3.5, -1.25, 7, 2};
  CHECK(resample_linear(same, 4) == same);

  std::vector<double> r = resample_linear({1, 3, 2}, 5);
  REQUIRE(r.size() == 5);
  CHECK(r[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r[1] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(r[2] == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(r[3] == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(r[4] == doctest::Approx(2.0).epsilon(1e-15));

  CHECK_THROWS_AS(resample_linear({1.0}, 4), Error);
  CHECK_THROWS_AS(resample_linear({1.0, 2.0}, 1), Error);
}

TEST_CASE("resample_linear reproduces affine series exactly") {
  for (std::size_t len = 2; len <= 64; ++len) {
    for (std::size_t t_len = 2; t_len <= 64; t_len += 3) {
      std::vector<double> series(len);
      for (std::size_t i = 0; i < len; ++i) series[i] = -4.25 + 0.73 * static_cast<double>(i);
      std::vector<double> out = resample_linear(series, t_len);
      CHECK(out.front() == series.front());
      CHECK(out.back() == series.back());
      double scale = static_cast<double>(len - 1) / static_cast<double>(t_len - 1);
      for (std::size_t j = 0; j < t_len; ++j) {
        double expect = -4.25 + 0.73 * (static_cast<double>(j) * scale);
        CHECK(std::abs(out[j] - expect) < 1e-12);
      }
    }
  }
}

TEST_CASE("resample_linear stays within the raw min/max") {
  Rng rng(3);
  for (int trial = 0; trial < 25; ++trial) {
    std::size_t len = 2 + rng.index(40);
    std::vector<double> series(len);
    for (double& v : series) v = rng.uniform(-10, 10);
    double lo = *std::min_element(series.begin(), series.end());
    double hi = *std::max_element(series.begin(), series.end());
    std::vector<double> out = resample_linear(series, 2 + rng.index(60));
    for (double v : out) {
      CHECK(v >= lo - 1e-12);
      CHECK(v <= hi + 1e-12);
    }
  }
}

TEST_CASE("normalize") {
  // constant channel maps to zeros
  {
    SampleTensor s = normalize(Tensor::full({1, 6}, 5.0));
    for (std::size_t i = 0; i < 6; ++i) CHECK(s.values[i] == 0.0);
    CHECK(s.norm_stats[0].mean == doctest::Approx(5.0));
    CHECK(s.norm_stats[0].std == 0.0);
  }
  // alternating 0,2 -> mean 0, std 1
  {
    SampleTensor s = normalize(Tensor::matrix(1, 6, {0, 2, 0, 2, 0, 2}));
    double mean = 0, var = 0;
    for (std::size_t i = 0; i < 6; ++i) mean += s.values[i];
    mean /= 6;
    for (std::size_t i = 0; i < 6; ++i) var += (s.values[i] - mean) * (s.values[i] - mean);
    var /= 6;
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-6);
  }
  // mean ~ 0 for arbitrary channels
  {
    Rng rng(5);
    Tensor raw({3, 32});
    for (double& v : raw.vec()) v = rng.uniform(-50, 90);
    SampleTensor s = normalize(raw);
    for (std::size_t c = 0; c < 3; ++c) {
      double mean = 0;
      for (std::size_t t = 0; t < 32; ++t) mean += s.values.at(c, t);
      CHECK(std::abs(mean / 32) < 1e-9);
    }
  }
}

TEST_CASE("load_runs maps chambers to modes") {
  fs::path csv = temp_dir() / "two_runs.csv";
  write_file(csv, tiny_csv(4, 1));
  std::vector<WaferRun> runs = load_runs(csv);
  REQUIRE(runs.size() == 2);
  CHECK(runs[0].run_id == "a");
  CHECK(runs[0].mode == Mode::LowSpeed);
  CHECK(runs[0].length() == 3);
  CHECK(runs[0].target_mrr == 80.0);
  CHECK(runs[1].mode == Mode::HighSpeed);
  CHECK(runs[1].polishing_time == 1.0);
}

TEST_CASE("load_runs error paths") {
  fs::path dir = temp_dir();
  {
    fs::path csv = dir / "empty.csv";
    write_file(csv, "run_id,timestamp,chamber,x,target_mrr\n");
    CHECK_THROWS_WITH_AS(load_runs(csv, {"x"}), doctest::Contains("no runs"), Error);
  }
  {
    fs::path csv = dir / "one_ts.csv";
    std::string body = tiny_csv(4, 1);
    // drop run b down to a single timestamp
    std::size_t pos = body.find("b,1");
    body.erase(pos);
    write_file(csv, body);
    std::vector<WaferRun> runs = load_runs(csv);  // run b rejected with a diagnostic
    REQUIRE(runs.size() == 1);
    CHECK(runs[0].run_id == "a");
  }
  {
    fs::path csv = dir / "missing_col.csv";
    write_file(csv, "run_id,timestamp,chamber,target_mrr\na,0,4,80\n");
    CHECK_THROWS_WITH_AS(load_runs(csv), doctest::Contains("missing column"), Error);
  }
  {
    fs::path csv = dir / "bad_cell.csv";
    std::string body = tiny_csv(4, 1);
    std::size_t pos = body.find("80");
    body.replace(pos, 2, "oops");
    write_file(csv, body);
    CHECK_THROWS_WITH_AS(load_runs(csv), doctest::Contains("non-numeric"), Error);
  }
  {
    fs::path csv = dir / "bad_chamber.csv";
    write_file(csv, tiny_csv(9, 1));
    CHECK_THROWS_WITH_AS(load_runs(csv), doctest::Contains("unknown chamber"), Error);
  }
}

TEST_CASE("load_runs with a targets sidecar") {
  fs::path dir = temp_dir();
  fs::path csv = dir / "no_target.csv";
  std::string body = tiny_csv(4, 1);
  // strip the target column
  std::string stripped;
  std::istringstream in(body);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    std::size_t pos = line.rfind(',');
    stripped += line.substr(0, pos) + "\n";
    first = false;
  }
  (void)first;
  write_file(csv, stripped);
  CHECK_THROWS_WITH_AS(load_runs(csv), doctest::Contains("target_mrr"), Error);

  fs::path sidecar = dir / "targets.csv";
  write_file(sidecar, "run_id,target_mrr\na,83.5\nb,151.25\n");
  std::vector<WaferRun> runs = load_runs(csv, default_channel_names(), sidecar);
  REQUIRE(runs.size() == 2);
  CHECK(runs[0].target_mrr == 83.5);
  CHECK(runs[1].target_mrr == 151.25);
}

TEST_CASE("save/load round-trips bit-exactly") {
  SynthConfig cfg;
  cfg.n_low = 4;
  cfg.n_high = 2;
  cfg.min_length = 16;
  cfg.max_length = 24;
  cfg.noise_std = 1.5;
  cfg.seed = 99;
  std::vector<WaferRun> runs = synthesize(cfg);

  fs::path a = temp_dir() / "roundtrip_a.csv";
  fs::path b = temp_dir() / "roundtrip_b.csv";
  save_runs(runs, a);
  std::vector<WaferRun> loaded = load_runs(a);
  CHECK(loaded == runs);
  save_runs(loaded, b);
  CHECK(read_file(a) == read_file(b));
}

TEST_CASE("synthesize determinism and structure") {
  SynthConfig cfg;
  cfg.n_low = 5;
  cfg.n_high = 3;
  cfg.min_length = 32;
  cfg.max_length = 48;
  cfg.noise_std = 2.0;
  cfg.seed = 7;
  std::vector<WaferRun> a = synthesize(cfg);
  std::vector<WaferRun> b = synthesize(cfg);
  CHECK(a == b);

  for (const WaferRun& run : a) {
    REQUIRE(run.channels.size() == kNumChannels);
    // usage channels are monotone nondecreasing
    for (std::size_t c : {0, 1, 2, 3, 4, 18}) {
      for (std::size_t t = 1; t < run.length(); ++t) {
        CHECK(run.channels[c][t] >= run.channels[c][t - 1]);
      }
    }
    // dressing water is a binary step
    for (double v : run.channels[kDressingChannel]) CHECK((v == 0.0 || v == 1.0));
    CHECK(run.target_mrr > 0);
  }
}

TEST_CASE("synthesize lands targets in the mode bands with zero noise") {
  SynthConfig cfg;
  cfg.n_low = 100;
  cfg.n_high = 20;
  cfg.min_length = 64;
  cfg.max_length = 96;
  cfg.noise_std = 0.0;
  cfg.seed = 123;
  std::vector<WaferRun> runs = synthesize(cfg);
  std::size_t low = 0, high = 0;
  for (const WaferRun& run : runs) {
    if (run.mode == Mode::LowSpeed) {
      ++low;
      CHECK(run.target_mrr >= 55.0);
      CHECK(run.target_mrr <= 110.0);
    } else {
      ++high;
      CHECK(run.target_mrr >= 140.0);
      CHECK(run.target_mrr <= 170.0);
    }
  }
  CHECK(low == 100);
  CHECK(high == 20);
}

TEST_CASE("noiseless synthetic is exactly Prestonian") {
  SynthConfig cfg;
  cfg.n_low = 30;
  cfg.n_high = 10;
  cfg.min_length = 32;
  cfg.max_length = 64;
  cfg.preston_k = 1.35;
  cfg.noise_std = 0.0;
  cfg.seed = 21;
  std::vector<WaferRun> runs = synthesize(cfg);
  PrestonModel p = preston_fit(runs);
  CHECK(std::abs(p.k - cfg.preston_k) < 1e-9);
  std::vector<double> y_true, y_pred;
  for (const WaferRun& run : runs) {
    y_true.push_back(run.target_mrr);
    y_pred.push_back(p.predict(run));
  }
  CHECK(rmse(y_true, y_pred) < 1e-6);
}

TEST_CASE("split arithmetic, determinism, and stratification") {
  SynthConfig cfg;
  cfg.n_low = 50;
  cfg.n_high = 50;
  cfg.min_length = 16;
  cfg.max_length = 20;
  cfg.seed = 17;
  std::vector<WaferRun> runs = synthesize(cfg);

  SplitResult s = split(runs, 0.8, 0.15, 42);
  CHECK(s.pretrain.size() == 12);
  CHECK(s.shot_pool.size() == 68);
  CHECK(s.test.size() == 20);

  // disjoint ids covering everything
  std::set<std::string> ids;
  for (const auto& part : {s.pretrain, s.shot_pool, s.test}) {
    for (const auto& run : part) CHECK(ids.insert(run.run_id).second);
  }
  CHECK(ids.size() == runs.size());

  // stratified: half of each partition is high-speed
  auto count_high = [](const std::vector<WaferRun>& part) {
    return std::count_if(part.begin(), part.end(),
                         [](const WaferRun& r) { return r.mode == Mode::HighSpeed; });
  };
  CHECK(count_high(s.pretrain) == 6);
  CHECK(count_high(s.test) == 10);

  SplitResult again = split(runs, 0.8, 0.15, 42);
  CHECK(again.pretrain == s.pretrain);
  CHECK(again.shot_pool == s.shot_pool);
  CHECK(again.test == s.test);

  SplitResult other = split(runs, 0.8, 0.15, 43);
  CHECK(other.pretrain != s.pretrain);

  CHECK_THROWS_AS(split(runs, 0.8, 1.0, 42), Error);
  CHECK_THROWS_AS(split(runs, 1.2, 0.15, 42), Error);
}
