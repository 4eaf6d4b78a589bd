#include "vpn/train.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

#include "vpn/io.hpp"
#include "vpn/rng.hpp"

namespace vpn {

RmsPropState make_rmsprop_state(
    const std::vector<std::pair<std::string, Tensor>>& params,
    const TrainConfig& config) {
  config.validate();
  RmsPropState state;
  state.decay = config.rms_decay;
  state.epsilon = config.rms_epsilon;
  state.learning_rate = config.learning_rate;
  state.accumulators.reserve(params.size());
  for (const auto& [name, tensor] : params) {
    state.accumulators.emplace_back(tensor.values().size(), 0.0);
  }
  return state;
}

void rmsprop_step(std::vector<std::pair<std::string, Tensor>>& params,
                  RmsPropState& state, double clip_norm) {
  if (params.size() != state.accumulators.size()) {
    throw std::invalid_argument(
        "rmsprop_step: optimizer state does not match the parameter list");
  }
  // Validate every gradient (and take the global norm) before any mutation so
  // a bad step leaves parameters and accumulators untouched.
  double squared_norm = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& [name, tensor] = params[p];
    if (tensor.values().size() != state.accumulators[p].size()) {
      throw std::invalid_argument("rmsprop_step: accumulator for '" + name +
                                  "' has the wrong size");
    }
    if (!tensor.has_grad()) continue;
    for (double g : tensor.grad()) {
      if (!std::isfinite(g)) {
        throw std::runtime_error("rmsprop_step: non-finite gradient in '" +
                                 name + "'");
      }
      squared_norm += g * g;
    }
  }
  double scale = 1.0;
  if (clip_norm > 0.0) {
    const double norm = std::sqrt(squared_norm);
    if (norm > clip_norm) scale = clip_norm / norm;
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& tensor = params[p].second;
    auto& acc = state.accumulators[p];
    if (!tensor.has_grad()) {
      for (double& a : acc) a *= state.decay;
      continue;
    }
    const auto& grad = tensor.grad();
    auto& values = tensor.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad[i] * scale;
      acc[i] = state.decay * acc[i] + (1.0 - state.decay) * g * g;
      values[i] -= state.learning_rate * g / std::sqrt(acc[i] + state.epsilon);
    }
  }
  ++state.step;
}

bool plateau_check(PlateauState& plateau, RmsPropState& optimizer,
                   const TrainConfig& config, long long step, double loss) {
  if (!plateau.has_best) {
    plateau.has_best = true;
    plateau.best = loss;
    return false;
  }
  if (loss < plateau.best -
                 config.plateau_min_improvement * std::fabs(plateau.best)) {
    plateau.best = loss;
    plateau.last_improvement = step;
    return false;
  }
  const bool window_elapsed =
      step - plateau.last_improvement >= config.plateau_window;
  const bool cooled = plateau.last_reduction < 0 ||
                      step - plateau.last_reduction > config.plateau_cooldown;
  if (window_elapsed && cooled) {
    optimizer.learning_rate *= config.plateau_factor;
    plateau.last_reduction = step;
    ++plateau.reductions;
    return true;
  }
  return false;
}

TrainResult train_loop(const Preset& preset, const TrainPaths& paths) {
  return train_loop(preset, paths,
                    [](const DataConfig& data, std::uint64_t seed,
                       long long index) {
                      return draw_training_sequence(data, seed, index);
                    });
}

TrainResult train_loop(const Preset& preset, const TrainPaths& paths,
                       const SequenceSource& source) {
  if (!source) {
    throw std::invalid_argument("train_loop: sequence source is empty");
  }
  preset.model.validate();
  preset.data.validate();
  preset.train.validate();
  const TrainConfig& tc = preset.train;
  if (preset.data.frames != tc.context_frames + tc.predicted_frames) {
    throw std::invalid_argument(
        "train_loop: data frames (" + std::to_string(preset.data.frames) +
        ") must equal context + predicted frames (" +
        std::to_string(tc.context_frames + tc.predicted_frames) + ")");
  }
  if (preset.model.conditioned && preset.data.kind != "pushing") {
    throw std::invalid_argument(
        "train_loop: a conditioned model needs action-conditional data");
  }

  Rng init_rng(Rng::derive(tc.seed, "model-init"));
  TrainResult result;
  result.model = build_model(preset.model, init_rng);
  auto params = named_params(result.model);
  result.optimizer = make_rmsprop_state(params, tc);

  auto write_ckpt = [&](const std::string& tag) {
    if (paths.checkpoint_prefix.empty()) return;
    const std::string path = paths.checkpoint_prefix + "-" + tag + ".ckpt";
    write_checkpoint(path, preset.model, params);
    result.checkpoints.push_back(path);
  };

  for (long long step = 1; step <= tc.steps; ++step) {
    const auto started = std::chrono::steady_clock::now();

    Tensor batch_total;
    for (int b = 0; b < tc.batch_size; ++b) {
      const long long index =
          (step - 1) * static_cast<long long>(tc.batch_size) + b;
      VideoSequence sequence = source(preset.data, tc.seed, index);
      Conditioning conditioning;
      const Conditioning* cond = nullptr;
      if (preset.model.conditioned) {
        conditioning = make_conditioning(sequence, tc.context_frames);
        cond = &conditioning;
      }
      FrameLosses losses =
          model_loss(result.model, sequence, cond, tc.context_frames);
      batch_total = b == 0 ? losses.total : add(batch_total, losses.total);
    }
    Tensor step_loss = scale(
        batch_total, 1.0 / (static_cast<double>(tc.batch_size) * tc.predicted_frames));
    const double loss_value = step_loss.scalar();
    if (!std::isfinite(loss_value)) {
      throw std::runtime_error("train_loop: non-finite loss at step " +
                               std::to_string(step));
    }

    for (auto& [name, tensor] : params) tensor.zero_grad();
    step_loss.backward();
    try {
      rmsprop_step(params, result.optimizer, tc.grad_clip_norm);
    } catch (const std::runtime_error& error) {
      throw std::runtime_error(std::string(error.what()) + " at step " +
                               std::to_string(step));
    }
    plateau_check(result.plateau, result.optimizer, tc, step, loss_value);

    const double wall_ms =
        std::chrono::duration<double, std::milli>(
            std::chrono::steady_clock::now() - started)
            .count();
    if (!paths.metrics.empty()) {
      append_metrics_line(paths.metrics, step, loss_value,
                          result.optimizer.learning_rate, wall_ms);
    }
    if (tc.checkpoint_every > 0 && step % tc.checkpoint_every == 0 &&
        step != tc.steps) {
      write_ckpt(std::to_string(step));
    }
    if (paths.progress && tc.eval_every > 0 &&
        (step % tc.eval_every == 0 || step == tc.steps)) {
      paths.progress(step, loss_value, result.optimizer.learning_rate);
    }
    result.final_loss_nats_per_frame = loss_value;
    result.steps_run = step;
  }

  write_ckpt("final");
  return result;
}

EvalReport eval_loop(const ModelParams& model, const Dataset& test_set,
                     int context_frames) {
  if (test_set.sequences.empty()) {
    throw std::invalid_argument("eval_loop: empty test set");
  }
  for (const VideoSequence& sequence : test_set.sequences) {
    if (sequence.channels != model.config.color_channels) {
      throw std::invalid_argument(
          "eval_loop: dataset channels (" + std::to_string(sequence.channels) +
          ") do not match the model (" +
          std::to_string(model.config.color_channels) + ")");
    }
    if (context_frames < 0 || context_frames >= sequence.frames) {
      throw std::invalid_argument(
          "eval_loop: context frames must leave at least one predicted frame");
    }
    if (model.config.conditioned && !sequence.conditioned()) {
      throw std::invalid_argument(
          "eval_loop: a conditioned model needs per-frame states and actions");
    }
  }

  EvalReport report;
  double total_nats = 0.0;
  long long total_frames = 0;
  for (const VideoSequence& sequence : test_set.sequences) {
    Conditioning conditioning;
    const Conditioning* cond = nullptr;
    if (model.config.conditioned) {
      conditioning = make_conditioning(sequence, context_frames);
      cond = &conditioning;
    }
    FrameLosses losses = model_loss(model, sequence, cond, context_frames);
    const double nats = losses.total.scalar();
    const int predicted = sequence.frames - context_frames;
    report.per_sequence.push_back(nats / predicted);
    total_nats += nats;
    total_frames += predicted;
  }
  report.nats_per_frame = total_nats / static_cast<double>(total_frames);
  report.lower_bound = lower_bound_nats_per_frame(test_set, context_frames);
  report.gap = report.nats_per_frame - report.lower_bound;
  return report;
}

}  // namespace vpn
