#include "eim/eim.h"

#include "eim/bounds.hpp"
#include "eim/checkpoint.hpp"
#include "eim/error.hpp"
#include "eim/grid.hpp"
#include "eim/trainer.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

struct eim_model {
  std::unique_ptr<eim::EimModel> model;
  eim::Metadata metadata;
};

namespace {

thread_local std::string g_last_error;

template <class F>
eim_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return EIM_OK;
  } catch (const eim::InvalidArgument& e) {
    g_last_error = e.what();
    return EIM_ERR_INVALID_ARGUMENT;
  } catch (const eim::NumericError& e) {
    g_last_error = e.what();
    return EIM_ERR_NUMERIC;
  } catch (const eim::IoError& e) {
    g_last_error = e.what();
    return EIM_ERR_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return EIM_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return EIM_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) throw eim::InvalidArgument(std::string(what) + " must not be NULL");
}

std::string str(const char* s, const char* what) {
  require(s, what);
  return s;
}

eim::TrainConfig to_config(const eim_train_config& c) {
  eim::TrainConfig out;
  out.model.kind = eim::parse_model_kind(str(c.model, "config.model"));
  out.model.k = c.k;
  out.model.t = c.t;
  out.model.trs_inner_samples = c.trs_inner_samples;
  out.model.proposal_mean = c.proposal_mean;
  out.model.proposal_std = c.proposal_std;
  out.model.train_proposal = c.train_proposal != 0;
  out.target = eim::parse_target_kind(str(c.target, "config.target"));
  out.batch_size = c.batch_size;
  out.learning_rate = c.learning_rate;
  out.lr_drop_step = c.lr_drop_step;
  out.lr_after_drop = c.lr_after_drop;
  out.steps = c.steps;
  out.eval_interval = c.eval_interval;
  out.eval_samples = c.eval_samples;
  out.eval_data = c.eval_data;
  out.eval_batch = c.eval_batch;
  out.seed = c.seed;
  out.grad_clip = c.grad_clip;
  out.threads = c.threads;
  out.validate();
  return out;
}

eim::Metadata run_metadata(const eim::TrainConfig& c) {
  return {{"target", std::string(eim::target_name(c.target))},
          {"seed", std::to_string(c.seed)},
          {"eval_data", std::to_string(c.eval_data)},
          {"eval_samples", std::to_string(c.eval_samples)}};
}

std::uint64_t meta_u64(const eim::Metadata& m, const char* key) {
  const auto it = m.find(key);
  return it == m.end() ? 0 : std::stoull(it->second);
}

}  // namespace

extern "C" {

const char* eim_last_error(void) { return g_last_error.c_str(); }

const char* eim_version(void) { return "1.0.0"; }

void eim_train_config_default(eim_train_config* config) {
  if (!config) return;
  const eim::TrainConfig d;
  config->model = "snis";
  config->target = "nine_gaussians";
  config->k = d.model.k;
  config->t = d.model.t;
  config->trs_inner_samples = d.model.trs_inner_samples;
  config->proposal_mean = d.model.proposal_mean;
  config->proposal_std = d.model.proposal_std;
  config->train_proposal = d.model.train_proposal ? 1 : 0;
  config->batch_size = d.batch_size;
  config->learning_rate = d.learning_rate;
  config->lr_drop_step = d.lr_drop_step;
  config->lr_after_drop = d.lr_after_drop;
  config->steps = d.steps;
  config->eval_interval = d.eval_interval;
  config->eval_samples = d.eval_samples;
  config->eval_data = d.eval_data;
  config->eval_batch = d.eval_batch;
  config->seed = d.seed;
  config->grad_clip = d.grad_clip;
  config->threads = d.threads;
}

eim_status eim_train(const eim_train_config* config, const char* metrics_csv,
                     const char* checkpoint, eim_record_fn on_record, void* user,
                     eim_model** out) {
  return guarded([&] {
    require(config, "config");
    require(out, "out");
    *out = nullptr;
    const eim::TrainConfig c = to_config(*config);
    eim::TrainHooks hooks;
    if (on_record) {
      hooks.on_record = [&](const eim::MetricRecord& r) {
        const eim_metric_record rec{r.step, r.objective, r.eval_bound, r.eval_se, r.grad_norm, r.seconds};
        on_record(&rec, user);
      };
    }
    if (checkpoint) hooks.failure_checkpoint = checkpoint;
    eim::TrainResult result = eim::train(c, hooks);
    auto handle = std::make_unique<eim_model>();
    handle->metadata = run_metadata(c);
    for (auto& [k, v] : eim::model_metadata(result.model->spec())) handle->metadata[k] = v;
    handle->model = std::move(result.model);
    if (metrics_csv) {
      std::ofstream f(metrics_csv);
      if (!f) throw eim::IoError(std::string("cannot open '") + metrics_csv + "' for writing");
      eim::write_metrics_csv(f, result.history);
      if (!f) throw eim::IoError(std::string("failed writing '") + metrics_csv + "'");
    }
    if (checkpoint) eim::save_model(*handle->model, checkpoint, handle->metadata);
    *out = handle.release();
  });
}

eim_status eim_model_load(const char* path, eim_model** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    auto handle = std::make_unique<eim_model>();
    handle->model = eim::load_model(str(path, "path"), &handle->metadata);
    *out = handle.release();
  });
}

eim_status eim_model_save(const eim_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    eim::save_model(*model->model, str(path, "path"), model->metadata);
  });
}

void eim_model_free(eim_model* model) { delete model; }

eim_status eim_model_get_info(const eim_model* model, eim_model_info* info) {
  return guarded([&] {
    require(model, "model");
    require(info, "info");
    *info = eim_model_info{};
    const auto& spec = model->model->spec();
    std::strncpy(info->model, std::string(eim::model_name(spec.kind)).c_str(), sizeof info->model - 1);
    const auto t = model->metadata.find("target");
    if (t != model->metadata.end()) {
      std::strncpy(info->target, t->second.c_str(), sizeof info->target - 1);
    }
    info->dim = spec.dim;
    info->k = spec.k;
    info->t = spec.t;
    info->seed = meta_u64(model->metadata, "seed");
    info->eval_data = meta_u64(model->metadata, "eval_data");
    info->eval_samples = meta_u64(model->metadata, "eval_samples");
    info->param_count = 0;
    for (const auto& e : model->model->params()) info->param_count += e.value.size();
  });
}

eim_status eim_model_sample(const eim_model* model, size_t n, uint64_t seed, double* out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    eim::Rng rng(seed, eim::streams::kSample);
    const eim::Matrix x = model->model->sample(n, rng);
    std::memcpy(out, x.data(), sizeof(double) * std::size_t(x.size()));
  });
}

eim_status eim_model_evaluate(const eim_model* model, const char* target, size_t n_data,
                              size_t n_iwae, uint64_t seed, int threads, double* value,
                              double* se) {
  return guarded([&] {
    require(model, "model");
    require(value, "value");
    const eim::TargetDensity t(eim::parse_target_kind(str(target, "target")));
    if (n_data == 0 || n_iwae == 0) throw eim::InvalidArgument("evaluation counts must be >= 1");
    const eim::Matrix data = eim::eval_set(t, n_data, seed);
    const eim::Estimate e = eim::evaluate(*model->model, data, n_iwae,
                                          eim::Rng(seed, eim::streams::kEvalNoise), threads);
    *value = e.value;
    if (se) *se = e.se;
  });
}

eim_status eim_target_log_density(const char* target, const double* xy, size_t n, double* out) {
  return guarded([&] {
    require(xy, "xy");
    require(out, "out");
    const eim::TargetDensity t(eim::parse_target_kind(str(target, "target")));
    for (size_t i = 0; i < n; ++i) out[i] = t.log_density({xy[2 * i], xy[2 * i + 1]});
  });
}

eim_status eim_grid_export(const eim_model* model, const char* target, const eim_grid_spec* grid,
                           size_t n_samples, uint64_t seed, const char* out_dir) {
  return guarded([&] {
    require(grid, "grid");
    const eim::GridSpec g{grid->xmin, grid->xmax, grid->ymin, grid->ymax, grid->resolution};
    g.validate();
    const std::filesystem::path dir(str(out_dir, "out_dir"));
    std::filesystem::create_directories(dir);
    const eim::TargetDensity t(eim::parse_target_kind(str(target, "target")));
    const eim::Matrix density = eim::target_density_grid(t, g);
    eim::write_grid_csv((dir / "target.csv").string(), density);
    eim::write_pgm((dir / "target.pgm").string(), density);
    if (model) {
      if (model->model->spec().dim != 2) throw eim::InvalidArgument("grid export needs a 2-D model");
      if (n_samples == 0) throw eim::InvalidArgument("histogram needs at least one sample");
      eim::Rng rng(seed, eim::streams::kSample);
      const eim::Matrix hist = eim::sample_histogram(model->model->sample(n_samples, rng), g);
      eim::write_grid_csv((dir / "model.csv").string(), hist);
      eim::write_pgm((dir / "model.pgm").string(), hist);
    }
  });
}

eim_status eim_bounds_csv(uint64_t seed, size_t n_outer, const char* path) {
  return guarded([&] {
    const std::string p = str(path, "path");
    const auto rows = eim::bound_zoo(seed, n_outer);
    std::ofstream f(p);
    if (!f) throw eim::IoError("cannot open '" + p + "' for writing");
    f.precision(17);
    f << "bound,k,estimate,se,oracle,gap\n";
    for (const auto& r : rows) {
      f << r.bound << ',' << r.k << ',' << r.estimate << ',' << r.se << ',' << r.oracle << ','
        << r.gap << '\n';
    }
    if (!f) throw eim::IoError("failed writing '" + p + "'");
  });
}

eim_status eim_sweep(const eim_train_config* base, const char* param, const int* values,
                     size_t count, const char* csv_path) {
  return guarded([&] {
    require(base, "base");
    require(values, "values");
    const std::string which = str(param, "param");
    eim::SweepParam sp;
    if (which == "k") {
      sp = eim::SweepParam::kK;
    } else if (which == "t") {
      sp = eim::SweepParam::kT;
    } else {
      throw eim::InvalidArgument("sweep parameter must be 'k' or 't', got '" + which + "'");
    }
    const std::string p = str(csv_path, "csv_path");
    const auto rows = eim::sweep(to_config(*base), sp, std::vector<int>(values, values + count));
    std::ofstream f(p);
    if (!f) throw eim::IoError("cannot open '" + p + "' for writing");
    eim::write_sweep_csv(f, rows);
    if (!f) throw eim::IoError("failed writing '" + p + "'");
  });
}

}  // extern "C"
