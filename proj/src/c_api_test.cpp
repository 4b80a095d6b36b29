#include "eim/eim.h"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("eim_c_api_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

eim_train_config tiny_config(const char* model) {
  eim_train_config c;
  eim_train_config_default(&c);
  c.model = model;
  c.k = 8;
  c.t = 2;
  c.trs_inner_samples = 4;
  c.batch_size = 16;
  c.steps = 12;
  c.eval_interval = 5;
  c.eval_samples = 16;
  c.eval_data = 20;
  c.eval_batch = 8;
  c.seed = 3;
  return c;
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<std::vector<double>> read_matrix_csv(const fs::path& p) {
  std::vector<std::vector<double>> rows;
  for (const auto& line : lines_of(p)) {
    std::vector<double> row;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

std::string pgm_header(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::string magic, w, h, max;
  in >> magic >> w >> h >> max;
  return magic + " " + w + " " + h + " " + max;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

struct Recorded {
  std::vector<eim_metric_record> records;
};

void collect(const eim_metric_record* r, void* user) {
  static_cast<Recorded*>(user)->records.push_back(*r);
}

}  // namespace

TEST_CASE("defaults and version") {
  CHECK(std::strlen(eim_version()) > 0);
  eim_train_config c;
  eim_train_config_default(&c);
  CHECK(std::string(c.model) == "snis");
  CHECK(std::string(c.target) == "nine_gaussians");
  CHECK(c.batch_size == 128);
  CHECK(c.learning_rate == 3e-4);
  CHECK(c.eval_samples == 1000);
  CHECK(c.proposal_std == 1.0);
  CHECK(c.train_proposal == 0);
}

TEST_CASE("errors map to status codes with a message") {
  eim_model* m = nullptr;
  CHECK(eim_train(nullptr, nullptr, nullptr, nullptr, nullptr, &m) == EIM_ERR_INVALID_ARGUMENT);
  CHECK(std::strlen(eim_last_error()) > 0);

  eim_train_config c = tiny_config("vae");
  CHECK(eim_train(&c, nullptr, nullptr, nullptr, nullptr, &m) == EIM_ERR_INVALID_ARGUMENT);
  CHECK(std::string(eim_last_error()).find("vae") != std::string::npos);
  CHECK(m == nullptr);

  c = tiny_config("snis");
  c.batch_size = 0;
  CHECK(eim_train(&c, nullptr, nullptr, nullptr, nullptr, &m) == EIM_ERR_INVALID_ARGUMENT);

  CHECK(eim_model_load("/nonexistent/model.ckpt", &m) == EIM_ERR_IO);
  double v = 0.0;
  CHECK(eim_target_log_density("moons", &v, 1, &v) == EIM_ERR_INVALID_ARGUMENT);

  c = tiny_config("his");
  c.learning_rate = 50.0;
  c.steps = 2000;
  c.eval_interval = 100000;
  const fs::path dir = temp_dir("diverge");
  const std::string ckpt = (dir / "last_good.ckpt").string();
  CHECK(eim_train(&c, nullptr, ckpt.c_str(), nullptr, nullptr, &m) == EIM_ERR_NUMERIC);
  CHECK(fs::exists(ckpt));
  fs::remove_all(dir);

  // Success clears the message.
  CHECK(eim_version() != nullptr);
  eim_train_config ok = tiny_config("snis");
  ok.steps = 0;
  REQUIRE(eim_train(&ok, nullptr, nullptr, nullptr, nullptr, &m) == EIM_OK);
  CHECK(std::string(eim_last_error()).empty());
  eim_model_free(m);
  eim_model_free(nullptr);
}

TEST_CASE("train, save, load, evaluate and sample") {
  const fs::path dir = temp_dir("train");
  const std::string metrics = (dir / "metrics.csv").string();
  const std::string ckpt = (dir / "model.ckpt").string();
  for (const char* kind : {"trs", "snis", "his"}) {
    eim_train_config c = tiny_config(kind);
    Recorded rec;
    eim_model* m = nullptr;
    REQUIRE(eim_train(&c, metrics.c_str(), ckpt.c_str(), collect, &rec, &m) == EIM_OK);
    REQUIRE(rec.records.size() == 3);
    CHECK(rec.records[0].step == 5);
    CHECK(rec.records[2].step == 12);

    const auto rows = lines_of(metrics);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0] == "step,objective,eval_bound,eval_se,grad_norm,seconds");

    eim_model_info info;
    REQUIRE(eim_model_get_info(m, &info) == EIM_OK);
    CHECK(std::string(info.model) == kind);
    CHECK(std::string(info.target) == "nine_gaussians");
    CHECK(info.dim == 2);
    CHECK(info.seed == 3);
    CHECK(info.eval_data == 20);
    CHECK(info.eval_samples == 16);
    CHECK(info.param_count > 0);

    double value = 0.0, se = 0.0;
    REQUIRE(eim_model_evaluate(m, "nine_gaussians", 20, 16, 3, 1, &value, &se) == EIM_OK);
    CHECK(std::fabs(value - rec.records.back().eval_bound) <= 1e-12);
    CHECK(se == rec.records.back().eval_se);

    eim_model* loaded = nullptr;
    REQUIRE(eim_model_load(ckpt.c_str(), &loaded) == EIM_OK);
    double again = 0.0;
    REQUIRE(eim_model_evaluate(loaded, "nine_gaussians", 20, 16, 3, 2, &again, nullptr) == EIM_OK);
    CHECK(std::fabs(again - rec.records.back().eval_bound) <= 1e-12);

    std::vector<double> a(40), b(40);
    REQUIRE(eim_model_sample(m, 20, 9, a.data()) == EIM_OK);
    REQUIRE(eim_model_sample(loaded, 20, 9, b.data()) == EIM_OK);
    CHECK(a == b);

    const std::string resaved = (dir / "again.ckpt").string();
    REQUIRE(eim_model_save(loaded, resaved.c_str()) == EIM_OK);
    std::ifstream f1(ckpt, std::ios::binary), f2(resaved, std::ios::binary);
    std::stringstream s1, s2;
    s1 << f1.rdbuf();
    s2 << f2.rdbuf();
    CHECK(s1.str() == s2.str());

    eim_model_free(loaded);
    eim_model_free(m);
  }
  fs::remove_all(dir);
}

TEST_CASE("same seed gives identical metric histories") {
  eim_train_config c = tiny_config("his");
  Recorded a, b;
  eim_model* m1 = nullptr;
  eim_model* m2 = nullptr;
  REQUIRE(eim_train(&c, nullptr, nullptr, collect, &a, &m1) == EIM_OK);
  REQUIRE(eim_train(&c, nullptr, nullptr, collect, &b, &m2) == EIM_OK);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].objective == b.records[i].objective);
    CHECK(a.records[i].eval_bound == b.records[i].eval_bound);
    CHECK(a.records[i].eval_se == b.records[i].eval_se);
    CHECK(a.records[i].grad_norm == b.records[i].grad_norm);
  }
  eim_model_free(m1);
  eim_model_free(m2);
}

TEST_CASE("target log density") {
  const double xy[4] = {0.0, 0.0, 1.0, -1.0};
  double out[2];
  REQUIRE(eim_target_log_density("nine_gaussians", xy, 2, out) == EIM_OK);
  // Mixture of nine N(mu, 0.1^2 I) with equal weights, summed directly.
  double mix = 0.0;
  for (int i = -1; i <= 1; ++i) {
    for (int j = -1; j <= 1; ++j) {
      mix += std::exp(-0.5 * (i * i + j * j) / 0.01) / (2.0 * std::numbers::pi * 0.01) / 9.0;
    }
  }
  CHECK(out[0] == doctest::Approx(std::log(mix)).epsilon(1e-12));
  CHECK(out[1] == doctest::Approx(std::log(mix)).epsilon(1e-12));
  REQUIRE(eim_target_log_density("checkerboard", xy, 1, out) == EIM_OK);
  CHECK(std::isfinite(out[0]));
}

TEST_CASE("grid export at resolution 2") {
  const fs::path dir = temp_dir("grid2");
  eim_train_config c = tiny_config("snis");
  c.steps = 0;
  eim_model* m = nullptr;
  REQUIRE(eim_train(&c, nullptr, nullptr, nullptr, nullptr, &m) == EIM_OK);
  const eim_grid_spec g{-2.0, 2.0, -2.0, 2.0, 2};
  REQUIRE(eim_grid_export(m, "nine_gaussians", &g, 1000, 1, dir.string().c_str()) == EIM_OK);
  for (const char* name : {"target.csv", "model.csv"}) {
    const auto grid = read_matrix_csv(dir / name);
    REQUIRE(grid.size() == 2);
    CHECK(grid[0].size() == 2);
    CHECK(grid[1].size() == 2);
  }
  CHECK(pgm_header(dir / "target.pgm") == "P5 2 2 255");
  CHECK(pgm_header(dir / "model.pgm") == "P5 2 2 255");
  CHECK(fs::file_size(dir / "model.pgm") == std::string("P5\n2 2\n255\n").size() + 4);

  const eim_grid_spec too_big{-2.0, 2.0, -2.0, 2.0, 4096};
  CHECK(eim_grid_export(m, "nine_gaussians", &too_big, 10, 1, dir.string().c_str()) ==
        EIM_ERR_INVALID_ARGUMENT);
  eim_model_free(m);
  fs::remove_all(dir);
}

TEST_CASE("untrained snis histogram matches the standard normal") {
  const fs::path dir = temp_dir("hist");
  eim_train_config c = tiny_config("snis");
  c.steps = 0;
  eim_model* m = nullptr;
  REQUIRE(eim_train(&c, nullptr, nullptr, nullptr, nullptr, &m) == EIM_OK);
  const std::size_t n = 1'000'000;
  const std::size_t res = 16;
  const eim_grid_spec g{-3.0, 3.0, -3.0, 3.0, res};
  REQUIRE(eim_grid_export(m, "nine_gaussians", &g, n, 2, dir.string().c_str()) == EIM_OK);
  eim_model_free(m);
  const auto density = read_matrix_csv(dir / "model.csv");
  REQUIRE(density.size() == res);
  const double w = 6.0 / double(res);
  double chi2 = 0.0;
  std::size_t cells = 0;
  for (std::size_t r = 0; r < res; ++r) {
    // Row 0 is the top of the image (largest y).
    const double y_hi = 3.0 - double(r) * w;
    const double py = normal_cdf(y_hi) - normal_cdf(y_hi - w);
    for (std::size_t col = 0; col < res; ++col) {
      const double x_lo = -3.0 + double(col) * w;
      const double expected = double(n) * py * (normal_cdf(x_lo + w) - normal_cdf(x_lo));
      const double observed = density[r][col] * double(n) * w * w;
      if (expected < 5.0) continue;
      chi2 += (observed - expected) * (observed - expected) / expected;
      ++cells;
    }
  }
  CHECK(cells > 100);
  CHECK(chi2 < eim::oracle::chi2_critical_1pct(double(cells - 1)));
  fs::remove_all(dir);
}

TEST_CASE("nine gaussians target grid has nine local maxima at the means") {
  const fs::path dir = temp_dir("nine");
  // 41 cells of width 0.1 centered on -2.0, -1.9, ..., 2.0.
  const eim_grid_spec g{-2.05, 2.05, -2.05, 2.05, 41};
  REQUIRE(eim_grid_export(nullptr, "nine_gaussians", &g, 0, 0, dir.string().c_str()) == EIM_OK);
  CHECK_FALSE(fs::exists(dir / "model.csv"));
  const auto d = read_matrix_csv(dir / "target.csv");
  REQUIRE(d.size() == 41);
  std::vector<std::pair<double, double>> maxima;
  for (int r = 1; r < 40; ++r) {
    for (int c = 1; c < 40; ++c) {
      bool peak = true;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if ((dr || dc) && !(d[r][c] > d[r + dr][c + dc])) peak = false;
        }
      }
      if (peak) maxima.emplace_back(-2.0 + 0.1 * c, 2.0 - 0.1 * r);
    }
  }
  REQUIRE(maxima.size() == 9);
  for (const auto& [x, y] : maxima) {
    CHECK(std::fabs(x - std::round(x)) < 1e-9);
    CHECK(std::fabs(y - std::round(y)) < 1e-9);
    CHECK(std::fabs(x) <= 1.0 + 1e-9);
    CHECK(std::fabs(y) <= 1.0 + 1e-9);
  }
  fs::remove_all(dir);
}

TEST_CASE("bounds table csv") {
  const fs::path dir = temp_dir("bounds");
  const std::string path = (dir / "bounds.csv").string();
  REQUIRE(eim_bounds_csv(1, 100, path.c_str()) == EIM_OK);
  const auto rows = lines_of(path);
  REQUIRE(rows.size() == 17);
  CHECK(rows[0] == "bound,k,estimate,se,oracle,gap");
  CHECK(rows[1].rfind("iwae,1,", 0) == 0);
  CHECK(rows[16].rfind("infonce,512,", 0) == 0);
  CHECK(eim_bounds_csv(1, 0, path.c_str()) == EIM_ERR_INVALID_ARGUMENT);
  fs::remove_all(dir);
}

TEST_CASE("sweep with one setting gives one row") {
  const fs::path dir = temp_dir("sweep");
  const std::string path = (dir / "sweep.csv").string();
  eim_train_config c = tiny_config("his");
  c.steps = 3;
  const int values[] = {2};
  REQUIRE(eim_sweep(&c, "t", values, 1, path.c_str()) == EIM_OK);
  const auto rows = lines_of(path);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == "setting,eval_bound,eval_se,seconds");
  CHECK(rows[1].rfind("2,", 0) == 0);
  CHECK(eim_sweep(&c, "lr", values, 1, path.c_str()) == EIM_ERR_INVALID_ARGUMENT);
  CHECK(eim_sweep(&c, "t", values, 0, path.c_str()) == EIM_ERR_INVALID_ARGUMENT);
  fs::remove_all(dir);
}
