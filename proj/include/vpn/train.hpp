#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "vpn/config.hpp"
#include "vpn/data.hpp"
#include "vpn/model.hpp"
#include "vpn/tensor.hpp"

namespace vpn {

// Per-parameter mean-square accumulators plus the shared learning rate.
// Accumulators are parallel to the parameter listing they were built from.
struct RmsPropState {
  std::vector<std::vector<double>> accumulators;
  double decay = 0.9;
  double epsilon = 1e-8;
  double learning_rate = 3e-4;
  long long step = 0;
};

RmsPropState make_rmsprop_state(
    const std::vector<std::pair<std::string, Tensor>>& params,
    const TrainConfig& config);

// One in-place update, acc' = rho*acc + (1-rho)*g^2 then
// p' = p - lr*g/sqrt(acc'+eps), from the gradients currently deposited on the
// listed tensors; a tensor without a gradient contributes zeros (its
// accumulator still decays). When clip_norm > 0 the concatenated gradient is
// first rescaled to a Euclidean norm of at most clip_norm. A non-finite
// gradient aborts the step by throwing before anything is touched.
void rmsprop_step(std::vector<std::pair<std::string, Tensor>>& params,
                  RmsPropState& state, double clip_norm = 0.0);

// Plateau detector. An observation improves when it beats the best seen loss
// by the relative margin plateau_min_improvement; when plateau_window steps
// pass without an improvement (and any previous reduction has cooled down for
// more than plateau_cooldown steps), the learning rate is multiplied by
// plateau_factor. The first observation only seeds the best.
struct PlateauState {
  bool has_best = false;
  double best = 0.0;
  long long last_improvement = 0;
  long long last_reduction = -1;  // step of the last reduction; -1 before any
  int reductions = 0;
};

// Observe the loss at 1-based `step`; returns true when a reduction fired.
bool plateau_check(PlateauState& plateau, RmsPropState& optimizer,
                   const TrainConfig& config, long long step, double loss);

// Output plumbing for a training run. Empty paths disable the corresponding
// artifact. Checkpoints are written as "<prefix>-<step>.ckpt" at the cadence
// and "<prefix>-final.ckpt" at the end (the final file is the only one when
// the run has zero steps). The progress callback, when set, fires every
// eval_every steps and at the last step with (step, loss nats/frame, lr).
struct TrainPaths {
  std::string metrics;
  std::string checkpoint_prefix;
  std::function<void(long long, double, double)> progress;
};

struct TrainResult {
  ModelParams model;
  RmsPropState optimizer;
  PlateauState plateau;
  std::vector<std::string> checkpoints;  // paths in written order
  double final_loss_nats_per_frame = 0.0;
  long long steps_run = 0;
};

// Deterministic training run: model initialized from the training seed, one
// batch of freshly generated sequences per step, loss taken over the
// predicted frames only, RMSProp with global-norm clipping and the plateau
// schedule. Per-step metrics {step, loss nats/frame, lr, wall_ms} go to the
// metrics log. Reruns with the same preset produce bit-identical artifacts
// (metrics may differ in wall_ms only). A non-finite loss or gradient aborts
// with the offending step in the error.
TrainResult train_loop(const Preset& preset, const TrainPaths& paths);

// Same loop with a custom training stream: source(data, seed, index) must
// return sequence `index` of the run. Lets ablations (for example an
// action-blinded twin trained on zeroed conditioning) reuse every other
// training mechanic unchanged. The stock stream is draw_training_sequence.
using SequenceSource = std::function<VideoSequence(
    const DataConfig&, std::uint64_t, long long)>;
TrainResult train_loop(const Preset& preset, const TrainPaths& paths,
                       const SequenceSource& source);

// Teacher-forced evaluation of a model over a fixed set: nats per predicted
// frame, reported alongside the set's factorized-Bernoulli entropy lower
// bound over the same frames.
struct EvalReport {
  double nats_per_frame = 0.0;
  double lower_bound = 0.0;
  double gap = 0.0;                  // nats_per_frame - lower_bound
  std::vector<double> per_sequence;  // per-sequence nats per predicted frame
};

EvalReport eval_loop(const ModelParams& model, const Dataset& test_set,
                     int context_frames);

}  // namespace vpn
