#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vpn {

enum class ModelKind { vpn, baseline };
enum class HeadKind { softmax256, bernoulli };
enum class BlockKind { rmb, relu };

std::string to_string(ModelKind k);
std::string to_string(HeadKind k);
std::string to_string(BlockKind k);
ModelKind model_kind_from_string(const std::string& s);
HeadKind head_kind_from_string(const std::string& s);
BlockKind block_kind_from_string(const std::string& s);

// Architecture description. The model is resolution-agnostic; frame extents
// live in DataConfig.
struct ModelConfig {
  ModelKind kind = ModelKind::vpn;
  HeadKind head = HeadKind::bernoulli;
  BlockKind block_kind = BlockKind::rmb;
  int encoder_blocks = 2;   // residual blocks per frame encoder
  int decoder_blocks = 3;   // residual blocks per decoder
  int block_width = 32;     // external channel count 2c of every residual block
  int lstm_channels = 32;
  int top_channels = 32;    // width of the layer just before the output
  int color_channels = 1;   // 1 grayscale, 3 RGB
  std::vector<int> dilation_scheme;  // cycled across encoder blocks; empty = none
  bool conditioned = false;          // inject action/state vectors everywhere

  int color_groups() const { return color_channels == 3 ? 3 : 1; }
  void validate() const;
};

// Generator parameters for both dataset families.
struct DataConfig {
  std::string kind = "sprites";  // "sprites" (bouncing) or "pushing" (conditional)
  int frame_size = 16;
  int frames = 6;
  int count = 256;
  std::uint64_t seed = 1;
  // sprites
  int num_sprites = 2;
  int sprite_size = 5;
  int speed_min = 1;
  int speed_max = 2;
  // pushing
  int pusher_size = 3;
  int object_size = 3;
  int max_push = 2;  // per-axis magnitude bound on the commanded displacement

  void validate() const;
};

struct TrainConfig {
  long long steps = 400;
  int batch_size = 4;
  int context_frames = 4;
  int predicted_frames = 2;
  long long eval_every = 100;
  long long checkpoint_every = 0;  // 0: write only the final checkpoint
  std::uint64_t seed = 1;
  double learning_rate = 3e-4;
  double rms_decay = 0.9;
  double rms_epsilon = 1e-8;
  long long plateau_window = 500;
  double plateau_min_improvement = 1e-3;
  double plateau_factor = 0.3;
  long long plateau_cooldown = 500;
  double grad_clip_norm = 10.0;  // 0 disables clipping

  void validate() const;
};

struct Preset {
  ModelConfig model;
  DataConfig data;
  TrainConfig train;
};

std::string to_json(const ModelConfig& c);
std::string to_json(const DataConfig& c);
std::string to_json(const TrainConfig& c);
std::string to_json(const Preset& p);
ModelConfig model_config_from_json(const std::string& text);
DataConfig data_config_from_json(const std::string& text);
TrainConfig train_config_from_json(const std::string& text);
Preset preset_from_json(const std::string& text);

// Named bundles: "desk", "paper", "desk-cond", "paper-cond". The paper-scale
// bundles reconstruct the published architectures; the desk bundles shrink
// every count so full runs finish in minutes.
Preset make_preset(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace vpn
