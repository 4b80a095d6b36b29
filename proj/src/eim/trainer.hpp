#pragma once

#include "eim/models.hpp"
#include "eim/param_store.hpp"
#include "eim/targets.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace eim {

/// Bias-corrected Adam moments for every entry of a ParamStore.
struct AdamState {
  std::vector<Tensor> first;
  std::vector<Tensor> second;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  explicit AdamState(const ParamStore& store);
};

/// One Adam update of the trainable entries, then zeroes all gradients.
/// Throws NumericError, leaving parameters untouched, on a non-finite gradient.
void adam_step(ParamStore& store, AdamState& state, double learning_rate);

struct TrainConfig {
  ModelSpec model;
  TargetKind target = TargetKind::kNineGaussians;
  std::size_t batch_size = 128;
  double learning_rate = 3e-4;
  /// Step at which the rate drops to lr_after_drop; 0 disables the drop.
  std::int64_t lr_drop_step = 0;
  double lr_after_drop = 1e-4;
  std::int64_t steps = 50000;
  std::int64_t eval_interval = 5000;
  std::size_t eval_samples = 1000;  // IWAE sample count
  std::size_t eval_data = 1024;     // held-out points for the final evaluation
  std::size_t eval_batch = 128;     // held-out points used for periodic evaluations
  std::uint64_t seed = 0;
  /// Global-norm clipping threshold; 0 disables clipping.
  double grad_clip = 0.0;
  /// Worker threads for evaluation. Results do not depend on this.
  int threads = 1;

  void validate() const;
  double learning_rate_at(std::int64_t step) const;
};

struct MetricRecord {
  std::int64_t step = 0;
  double objective = 0.0;  // mean batch bound since the previous record
  double eval_bound = 0.0;
  double eval_se = 0.0;
  double grad_norm = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  std::unique_ptr<EimModel> model;
  std::vector<MetricRecord> history;
  /// Mean batch bound at every step.
  std::vector<double> objective_trace;
};

struct TrainHooks {
  std::function<void(const MetricRecord&)> on_record;
  /// Where to leave the last good parameters if the objective goes non-finite.
  std::string failure_checkpoint;
};

TrainResult train(const TrainConfig& config, const TrainHooks& hooks = {});

/// The held-out evaluation points for a seed.
Matrix eval_set(const TargetDensity& target, std::size_t n, std::uint64_t seed);

/// Mean over the rows of `data` of the n_iwae-sample bound, with the standard
/// error of that mean. Row i uses the stream rng.split(i).
Estimate evaluate(const EimModel& model, const Matrix& data, std::size_t n_iwae, const Rng& rng,
                  int threads = 1);
/// Same, on n_data fresh draws from the target.
Estimate evaluate(const EimModel& model, const TargetDensity& target, std::size_t n_data,
                  std::size_t n_iwae, Rng& rng, int threads = 1);

enum class SweepParam { kK, kT };

struct SweepRow {
  int setting = 0;
  double eval_bound = 0.0;
  double eval_se = 0.0;
  double seconds = 0.0;
};

/// Trains one model per value of K or T, all from base.seed.
std::vector<SweepRow> sweep(const TrainConfig& base, SweepParam param, const std::vector<int>& values);

inline constexpr const char* kSweepHeader = "setting,eval_bound,eval_se,seconds";
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

inline constexpr const char* kMetricsHeader = "step,objective,eval_bound,eval_se,grad_norm,seconds";
void write_metrics_csv(std::ostream& out, const std::vector<MetricRecord>& history);

}  // namespace eim
