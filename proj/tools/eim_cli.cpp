// Command-line front end over the eim C API.

#include "eim/eim.h"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace {

struct ModelDeleter {
  void operator()(eim_model* m) const { eim_model_free(m); }
};
using ModelPtr = std::unique_ptr<eim_model, ModelDeleter>;

class Failure : public std::runtime_error {
 public:
  explicit Failure(eim_status s) : std::runtime_error(eim_last_error()), status(s) {}
  eim_status status;
};

void check(eim_status s) {
  if (s != EIM_OK) throw Failure(s);
}

struct TrainFlags {
  std::string model = "snis";
  std::string target = "nine_gaussians";
  std::optional<int> k;
  std::optional<int> t;
  int trs_inner_samples = 32;
  std::int64_t steps = 50000;
  double lr = 3e-4;
  std::int64_t lr_drop_step = 0;
  double lr_after_drop = 1e-4;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
  double proposal_mean = 0.0;
  double proposal_std = 1.0;
  bool train_proposal = false;
  std::size_t eval_samples = 1000;
  std::size_t eval_data = 1024;
  std::size_t eval_batch = 128;
  std::int64_t eval_interval = 5000;
  double grad_clip = 0.0;
  bool clip = false;
  int threads = 1;
};

void add_train_flags(CLI::App* app, TrainFlags& f) {
  app->add_option("--model", f.model, "trs, snis or his")
      ->check(CLI::IsMember({"trs", "snis", "his"}))
      ->capture_default_str();
  app->add_option("--target", f.target, "nine_gaussians, checkerboard or two_rings")
      ->check(CLI::IsMember({"nine_gaussians", "checkerboard", "two_rings"}))
      ->capture_default_str();
  app->add_option("--k", f.k, "SNIS candidates [1024]");
  app->add_option("--t", f.t, "TRS truncation [100] or HIS leapfrog steps [5]");
  app->add_option("--trs-inner-samples", f.trs_inner_samples, "draws for the TRS rejection term")
      ->capture_default_str();
  app->add_option("--steps", f.steps, "training steps")->capture_default_str();
  app->add_option("--lr", f.lr, "Adam learning rate")->capture_default_str();
  app->add_option("--lr-drop-step", f.lr_drop_step, "step at which the rate drops (0: never)")
      ->capture_default_str();
  app->add_option("--lr-after-drop", f.lr_after_drop, "rate after the drop")->capture_default_str();
  app->add_option("--batch-size", f.batch_size, "batch size")->capture_default_str();
  app->add_option("--seed", f.seed, "seed")->capture_default_str();
  app->add_option("--proposal-mean", f.proposal_mean, "proposal mean")->capture_default_str();
  app->add_option("--proposal-std", f.proposal_std, "proposal standard deviation")
      ->capture_default_str();
  app->add_flag("--train-proposal", f.train_proposal, "learn the proposal mean and scale");
  app->add_option("--eval-samples", f.eval_samples, "IWAE samples per evaluation point")
      ->capture_default_str();
  app->add_option("--eval-data", f.eval_data, "held-out points for the final evaluation")
      ->capture_default_str();
  app->add_option("--eval-batch", f.eval_batch, "held-out points for periodic evaluations")
      ->capture_default_str();
  app->add_option("--eval-interval", f.eval_interval, "steps between evaluations")
      ->capture_default_str();
  app->add_flag("--clip", f.clip, "clip the global gradient norm");
  app->add_option("--clip-norm", f.grad_clip, "clipping threshold [100 with --clip]");
  app->add_option("--threads", f.threads, "evaluation threads")->capture_default_str();
}

eim_train_config resolve(TrainFlags& f) {
  if (!f.k) f.k = 1024;
  if (!f.t) f.t = f.model == "trs" ? 100 : 5;
  if (f.clip && f.grad_clip == 0.0) f.grad_clip = 100.0;
  eim_train_config c;
  eim_train_config_default(&c);
  c.model = f.model.c_str();
  c.target = f.target.c_str();
  c.k = *f.k;
  c.t = *f.t;
  c.trs_inner_samples = f.trs_inner_samples;
  c.proposal_mean = f.proposal_mean;
  c.proposal_std = f.proposal_std;
  c.train_proposal = f.train_proposal ? 1 : 0;
  c.batch_size = f.batch_size;
  c.learning_rate = f.lr;
  c.lr_drop_step = f.lr_drop_step;
  c.lr_after_drop = f.lr_after_drop;
  c.steps = f.steps;
  c.eval_interval = f.eval_interval;
  c.eval_samples = f.eval_samples;
  c.eval_data = f.eval_data;
  c.eval_batch = f.eval_batch;
  c.seed = f.seed;
  c.grad_clip = f.grad_clip;
  c.threads = f.threads;
  return c;
}

void print_config(const char* command, const eim_train_config& c, const std::string& out) {
  std::printf("# %s\n", command);
  std::printf("model=%s\ntarget=%s\nk=%d\nt=%d\ntrs_inner_samples=%d\n", c.model, c.target, c.k, c.t,
              c.trs_inner_samples);
  std::printf("proposal_mean=%.17g\nproposal_std=%.17g\ntrain_proposal=%d\n", c.proposal_mean,
              c.proposal_std, c.train_proposal);
  std::printf("steps=%lld\nbatch_size=%zu\nlr=%.17g\nlr_drop_step=%lld\nlr_after_drop=%.17g\n",
              static_cast<long long>(c.steps), c.batch_size, c.learning_rate,
              static_cast<long long>(c.lr_drop_step), c.lr_after_drop);
  std::printf("eval_interval=%lld\neval_samples=%zu\neval_data=%zu\neval_batch=%zu\n",
              static_cast<long long>(c.eval_interval), c.eval_samples, c.eval_data, c.eval_batch);
  std::printf("seed=%llu\ngrad_clip=%.17g\nthreads=%d\nout=%s\n",
              static_cast<unsigned long long>(c.seed), c.grad_clip, c.threads, out.c_str());
  std::fflush(stdout);
}

void print_record(const eim_metric_record* r, void*) {
  std::printf("step %lld objective %.6f eval %.6f +- %.6f grad_norm %.4g %.1fs\n",
              static_cast<long long>(r->step), r->objective, r->eval_bound, r->eval_se,
              r->grad_norm, r->seconds);
  std::fflush(stdout);
}

std::string join(const std::filesystem::path& dir, const char* name) { return (dir / name).string(); }

int run_train(TrainFlags& f, const std::string& out) {
  const eim_train_config c = resolve(f);
  print_config("train", c, out);
  std::filesystem::create_directories(out);
  eim_model* raw = nullptr;
  check(eim_train(&c, join(out, "metrics.csv").c_str(), join(out, "model.ckpt").c_str(),
                  print_record, nullptr, &raw));
  ModelPtr model(raw);
  std::printf("wrote %s and %s\n", join(out, "metrics.csv").c_str(), join(out, "model.ckpt").c_str());
  return 0;
}

struct EvalFlags {
  std::string checkpoint;
  std::string target;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> eval_samples;
  std::optional<std::size_t> eval_data;
  int threads = 1;
};

int run_eval(EvalFlags& f, const std::string& out) {
  eim_model* raw = nullptr;
  check(eim_model_load(f.checkpoint.c_str(), &raw));
  ModelPtr model(raw);
  eim_model_info info;
  check(eim_model_get_info(model.get(), &info));
  if (f.target.empty()) f.target = info.target[0] ? info.target : "nine_gaussians";
  if (!f.seed) f.seed = info.seed;
  if (!f.eval_samples) f.eval_samples = info.eval_samples ? info.eval_samples : 1000;
  if (!f.eval_data) f.eval_data = info.eval_data ? info.eval_data : 1024;
  std::printf("# eval\ncheckpoint=%s\nmodel=%s\nk=%d\nt=%d\ntarget=%s\nseed=%llu\n",
              f.checkpoint.c_str(), info.model, info.k, info.t, f.target.c_str(),
              static_cast<unsigned long long>(*f.seed));
  std::printf("eval_samples=%zu\neval_data=%zu\nthreads=%d\nout=%s\n", *f.eval_samples,
              *f.eval_data, f.threads, out.c_str());
  double value = 0.0, se = 0.0;
  check(eim_model_evaluate(model.get(), f.target.c_str(), *f.eval_data, *f.eval_samples, *f.seed,
                           f.threads, &value, &se));
  std::printf("eval_bound %.17g\neval_se %.17g\n", value, se);
  std::filesystem::create_directories(out);
  std::ofstream csv(join(out, "eval.csv"));
  csv.precision(17);
  csv << "eval_bound,eval_se\n" << value << ',' << se << '\n';
  if (!csv) throw std::runtime_error("failed writing " + join(out, "eval.csv"));
  return 0;
}

int run_sample(const std::string& checkpoint, std::size_t n, std::uint64_t seed, const std::string& out) {
  eim_model* raw = nullptr;
  check(eim_model_load(checkpoint.c_str(), &raw));
  ModelPtr model(raw);
  eim_model_info info;
  check(eim_model_get_info(model.get(), &info));
  std::printf("# sample\ncheckpoint=%s\nmodel=%s\nn=%zu\nseed=%llu\nout=%s\n", checkpoint.c_str(),
              info.model, n, static_cast<unsigned long long>(seed), out.c_str());
  std::vector<double> xs(n * info.dim);
  check(eim_model_sample(model.get(), n, seed, xs.data()));
  std::filesystem::create_directories(out);
  std::ofstream csv(join(out, "samples.csv"));
  csv.precision(17);
  for (std::size_t d = 0; d < info.dim; ++d) csv << (d ? "," : "") << "x" << d;
  csv << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < info.dim; ++d) csv << (d ? "," : "") << xs[i * info.dim + d];
    csv << '\n';
  }
  if (!csv) throw std::runtime_error("failed writing " + join(out, "samples.csv"));
  std::printf("wrote %s\n", join(out, "samples.csv").c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-inspired models: train, evaluate, sample, export grids, bounds, sweeps"};
  app.require_subcommand(1);
  std::string out = "out";

  TrainFlags train_flags;
  auto* train = app.add_subcommand("train", "train a model");
  add_train_flags(train, train_flags);
  train->add_option("--out", out, "output directory")->capture_default_str();

  EvalFlags eval_flags;
  auto* eval = app.add_subcommand("eval", "IWAE evaluation of a checkpoint on held-out data");
  eval->add_option("--checkpoint", eval_flags.checkpoint, "checkpoint file")->required();
  eval->add_option("--target", eval_flags.target, "target [from checkpoint]")
      ->check(CLI::IsMember({"nine_gaussians", "checkerboard", "two_rings"}));
  eval->add_option("--seed", eval_flags.seed, "seed of the held-out set [from checkpoint]");
  eval->add_option("--eval-samples", eval_flags.eval_samples, "IWAE samples [from checkpoint]");
  eval->add_option("--eval-data", eval_flags.eval_data, "held-out points [from checkpoint]");
  eval->add_option("--threads", eval_flags.threads, "threads")->capture_default_str();
  eval->add_option("--out", out, "output directory")->capture_default_str();

  std::string sample_ckpt;
  std::size_t sample_n = 1000;
  std::uint64_t sample_seed = 0;
  auto* sample = app.add_subcommand("sample", "draw samples from a checkpoint");
  sample->add_option("--checkpoint", sample_ckpt, "checkpoint file")->required();
  sample->add_option("--n", sample_n, "number of samples")->capture_default_str();
  sample->add_option("--seed", sample_seed, "seed")->capture_default_str();
  sample->add_option("--out", out, "output directory")->capture_default_str();

  std::string grid_ckpt;
  std::string grid_target = "nine_gaussians";
  std::vector<double> grid_box{-2.0, 2.0, -2.0, 2.0};
  std::size_t grid_res = 256;
  std::size_t grid_samples = 1000000;
  std::uint64_t grid_seed = 0;
  auto* grid = app.add_subcommand("grid", "export target density and model histogram heatmaps");
  grid->add_option("--checkpoint", grid_ckpt, "checkpoint file (omit for the target only)");
  grid->add_option("--target", grid_target, "target")
      ->check(CLI::IsMember({"nine_gaussians", "checkerboard", "two_rings"}))
      ->capture_default_str();
  grid->add_option("--bounds", grid_box, "xmin xmax ymin ymax")->expected(4)->capture_default_str();
  grid->add_option("--resolution", grid_res, "cells per side (<= 2048)")->capture_default_str();
  grid->add_option("--samples", grid_samples, "model draws for the histogram")->capture_default_str();
  grid->add_option("--seed", grid_seed, "seed")->capture_default_str();
  grid->add_option("--out", out, "output directory")->capture_default_str();

  std::uint64_t bounds_seed = 0;
  std::size_t bounds_outer = 2000;
  auto* bounds = app.add_subcommand("bounds", "bound table on Gaussian models with exact oracles");
  bounds->add_option("--seed", bounds_seed, "seed")->capture_default_str();
  bounds->add_option("--n-outer", bounds_outer, "realizations per bound")->capture_default_str();
  bounds->add_option("--out", out, "output directory")->capture_default_str();

  TrainFlags sweep_flags;
  std::vector<int> k_list, t_list;
  auto* sweep = app.add_subcommand("sweep", "train one model per K or T and tabulate final bounds");
  add_train_flags(sweep, sweep_flags);
  auto* k_opt = sweep->add_option("--k-list", k_list, "values of K, comma or space separated")->delimiter(',');
  auto* t_opt = sweep->add_option("--t-list", t_list, "values of T, comma or space separated")->delimiter(',');
  k_opt->excludes(t_opt);
  sweep->add_option("--out", out, "output directory")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return run_train(train_flags, out);
    if (*eval) return run_eval(eval_flags, out);
    if (*sample) return run_sample(sample_ckpt, sample_n, sample_seed, out);
    if (*grid) {
      std::printf("# grid\ncheckpoint=%s\ntarget=%s\nbounds=%.17g,%.17g,%.17g,%.17g\n",
                  grid_ckpt.c_str(), grid_target.c_str(), grid_box[0], grid_box[1], grid_box[2],
                  grid_box[3]);
      std::printf("resolution=%zu\nsamples=%zu\nseed=%llu\nout=%s\n", grid_res, grid_samples,
                  static_cast<unsigned long long>(grid_seed), out.c_str());
      std::fflush(stdout);
      ModelPtr model;
      if (!grid_ckpt.empty()) {
        eim_model* raw = nullptr;
        check(eim_model_load(grid_ckpt.c_str(), &raw));
        model.reset(raw);
      }
      const eim_grid_spec spec{grid_box[0], grid_box[1], grid_box[2], grid_box[3], grid_res};
      check(eim_grid_export(model.get(), grid_target.c_str(), &spec, grid_samples, grid_seed,
                            out.c_str()));
      std::printf("wrote grids under %s\n", out.c_str());
      return 0;
    }
    if (*bounds) {
      std::printf("# bounds\nseed=%llu\nn_outer=%zu\nout=%s\n",
                  static_cast<unsigned long long>(bounds_seed), bounds_outer, out.c_str());
      std::filesystem::create_directories(out);
      const std::string path = join(out, "bounds.csv");
      check(eim_bounds_csv(bounds_seed, bounds_outer, path.c_str()));
      std::ifstream in(path);
      std::cout << in.rdbuf();
      return 0;
    }
    if (*sweep) {
      if (k_list.empty() == t_list.empty()) throw std::runtime_error("give exactly one of --k-list, --t-list");
      const eim_train_config c = resolve(sweep_flags);
      print_config("sweep", c, out);
      const bool by_k = !k_list.empty();
      const auto& values = by_k ? k_list : t_list;
      std::printf("sweep_param=%s\nsweep_values=", by_k ? "k" : "t");
      for (std::size_t i = 0; i < values.size(); ++i) std::printf("%s%d", i ? "," : "", values[i]);
      std::printf("\n");
      std::fflush(stdout);
      std::filesystem::create_directories(out);
      const std::string path = join(out, "sweep.csv");
      check(eim_sweep(&c, by_k ? "k" : "t", values.data(), values.size(), path.c_str()));
      std::ifstream in(path);
      std::cout << in.rdbuf();
      return 0;
    }
  } catch (const Failure& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 10 + int(e.status);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
