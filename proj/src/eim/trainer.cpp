#include "eim/trainer.hpp"

#include "eim/checkpoint.hpp"
#include "eim/error.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <thread>

namespace eim {

AdamState::AdamState(const ParamStore& store) {
  for (const auto& e : store) {
    first.emplace_back(e.value.shape());
    second.emplace_back(e.value.shape());
  }
}

void adam_step(ParamStore& store, AdamState& state, double learning_rate) {
  if (state.first.size() != store.size()) throw InvalidArgument("AdamState does not match store");
  for (const auto& e : store) {
    if (e.trainable && !e.grad.all_finite()) {
      throw NumericError("non-finite gradient for '" + e.name + "'");
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, double(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, double(state.step));
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& e = store[i];
    if (!e.trainable) continue;
    auto m = state.first[i].data();
    auto v = state.second[i].data();
    auto w = e.value.data();
    auto g = e.grad.data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      w[j] -= learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + state.epsilon);
    }
  }
  store.zero_grad();
}

void TrainConfig::validate() const {
  model.validate();
  if (model.dim != 2) throw InvalidArgument("synthetic targets are 2-D");
  if (batch_size == 0) throw InvalidArgument("batch size must be >= 1");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (lr_drop_step > 0 && !(lr_after_drop > 0.0)) throw InvalidArgument("dropped learning rate must be positive");
  if (steps < 0) throw InvalidArgument("step count must be >= 0");
  if (eval_interval <= 0) throw InvalidArgument("eval interval must be >= 1");
  if (eval_samples == 0 || eval_data == 0 || eval_batch == 0) {
    throw InvalidArgument("evaluation counts must be >= 1");
  }
  if (grad_clip < 0.0) throw InvalidArgument("gradient clip must be >= 0");
  if (threads < 1) throw InvalidArgument("threads must be >= 1");
}

double TrainConfig::learning_rate_at(std::int64_t step) const {
  return lr_drop_step > 0 && step >= lr_drop_step ? lr_after_drop : learning_rate;
}

Matrix eval_set(const TargetDensity& target, std::size_t n, std::uint64_t seed) {
  Rng rng(seed, streams::kEvalData);
  return target.sample(n, rng);
}

Estimate evaluate(const EimModel& model, const Matrix& data, std::size_t n_iwae, const Rng& rng,
                  int threads) {
  const auto n = std::size_t(data.rows());
  if (n == 0 || n_iwae == 0) throw InvalidArgument("evaluate needs at least one point and sample");
  std::vector<double> per_point(n);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Rng r = rng.split(i);
      per_point[i] = iwae_eval(model, data.row(Eigen::Index(i)), n_iwae, r).value;
    }
  };
  const auto workers = std::min<std::size_t>(std::size_t(std::max(threads, 1)), n);
  if (workers <= 1) {
    work(0, n);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          work(n * w / workers, n * (w + 1) / workers);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  double mean = 0.0;
  for (double v : per_point) mean += v;
  mean /= double(n);
  double var = 0.0;
  for (double v : per_point) var += (v - mean) * (v - mean);
  var = n > 1 ? var / double(n - 1) : 0.0;
  return {mean, std::sqrt(var / double(n))};
}

Estimate evaluate(const EimModel& model, const TargetDensity& target, std::size_t n_data,
                  std::size_t n_iwae, Rng& rng, int threads) {
  if (n_data == 0) throw InvalidArgument("evaluate needs n_data >= 1");
  const Matrix data = target.sample(n_data, rng);
  return evaluate(model, data, n_iwae, rng.split(~std::uint64_t{0}), threads);
}

TrainResult train(const TrainConfig& config, const TrainHooks& hooks) {
  config.validate();
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();

  Rng init_rng(config.seed, streams::kInit);
  TrainResult result;
  result.model = make_model(config.model, init_rng);
  EimModel& model = *result.model;

  const TargetDensity target(config.target);
  const Matrix held_out = eval_set(target, config.eval_data, config.seed);
  const Matrix periodic = held_out.topRows(Eigen::Index(std::min(config.eval_batch, config.eval_data)));
  const Rng eval_noise(config.seed, streams::kEvalNoise);
  Rng data_rng(config.seed, streams::kTrainData);
  Rng noise_rng(config.seed, streams::kTrainNoise);
  AdamState adam(model.params());

  double window_sum = 0.0;
  std::int64_t window_count = 0;
  double last_grad_norm = 0.0;

  auto record = [&](std::int64_t step, bool final) {
    MetricRecord r;
    r.step = step;
    r.objective = window_count > 0 ? window_sum / double(window_count)
                                   : std::numeric_limits<double>::quiet_NaN();
    const Estimate e = evaluate(model, final ? held_out : periodic, config.eval_samples,
                                eval_noise, config.threads);
    r.eval_bound = e.value;
    r.eval_se = e.se;
    r.grad_norm = last_grad_norm;
    r.seconds = std::chrono::duration<double>(clock::now() - start).count();
    result.history.push_back(r);
    if (hooks.on_record) hooks.on_record(r);
    window_sum = 0.0;
    window_count = 0;
  };

  for (std::int64_t step = 1; step <= config.steps; ++step) {
    try {
      const Matrix batch = target.sample(config.batch_size, data_rng);
      Graph g;
      Var bound = mean(model.elbo(g, batch, noise_rng));
      const double objective = bound.item();
      g.backward(-bound);
      last_grad_norm = model.params().grad_norm();
      if (config.grad_clip > 0.0 && last_grad_norm > config.grad_clip) {
        const double scale = config.grad_clip / last_grad_norm;
        for (auto& e : model.params()) {
          for (double& v : e.grad.data()) v *= scale;
        }
      }
      adam_step(model.params(), adam, config.learning_rate_at(step));
      result.objective_trace.push_back(objective);
      window_sum += objective;
      ++window_count;
    } catch (const NumericError& e) {
      model.params().zero_grad();
      if (!hooks.failure_checkpoint.empty()) save_model(model, hooks.failure_checkpoint);
      throw NumericError("training diverged at step " + std::to_string(step) + ": " + e.what());
    }
    if (step % config.eval_interval == 0 && step != config.steps) record(step, false);
  }
  record(config.steps, true);
  return result;
}

std::vector<SweepRow> sweep(const TrainConfig& base, SweepParam param, const std::vector<int>& values) {
  if (values.empty()) throw InvalidArgument("sweep needs at least one setting");
  std::vector<SweepRow> rows;
  for (int v : values) {
    TrainConfig config = base;
    (param == SweepParam::kK ? config.model.k : config.model.t) = v;
    const auto start = std::chrono::steady_clock::now();
    const TrainResult r = train(config);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rows.push_back({v, r.history.back().eval_bound, r.history.back().eval_se, seconds});
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << kSweepHeader << '\n';
  const auto old = out.precision(17);
  for (const auto& r : rows) {
    out << r.setting << ',' << r.eval_bound << ',' << r.eval_se << ',' << r.seconds << '\n';
  }
  out.precision(old);
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricRecord>& history) {
  out << kMetricsHeader << '\n';
  const auto old = out.precision(17);
  for (const auto& r : history) {
    out << r.step << ',' << r.objective << ',' << r.eval_bound << ',' << r.eval_se << ','
        << r.grad_norm << ',' << r.seconds << '\n';
  }
  out.precision(old);
}

}  // namespace eim
