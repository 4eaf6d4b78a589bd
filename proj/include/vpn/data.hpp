#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vpn/config.hpp"
#include "vpn/rng.hpp"

namespace vpn {

// One video sequence of discrete intensities 0..255 plus, for the action
// datasets, one state and one action vector per frame. Conditioning values
// are stored normalized: action components are displacement / max_push in
// [-1, 1], state components are position / frame_size in [0, 1].
struct VideoSequence {
  int frames = 0, height = 0, width = 0, channels = 0;
  std::vector<std::uint8_t> pixels;                 // [T,H,W,C] row-major
  std::vector<std::array<double, 5>> states;        // empty or one per frame
  std::vector<std::array<double, 5>> actions;       // empty or one per frame

  bool conditioned() const { return !actions.empty(); }
  std::size_t frame_offset(int t) const {
    return static_cast<std::size_t>(t) * height * width * channels;
  }
  std::uint8_t at(int t, int i, int j, int c) const {
    return pixels[((static_cast<std::size_t>(t) * height + i) * width + j) *
                      channels +
                  c];
  }
  std::uint8_t& at(int t, int i, int j, int c) {
    return pixels[((static_cast<std::size_t>(t) * height + i) * width + j) *
                      channels +
                  c];
  }
};

struct Dataset {
  DataConfig config;
  std::vector<VideoSequence> sequences;
};

// Grayscale sprite bitmaps in [0,1].
struct SpriteBank {
  int size = 0;
  std::vector<std::vector<double>> sprites;
  std::string source;  // "synthetic" or "idx-file"
};

// Simple filled shapes (box, cross, disc) with randomized thickness,
// deterministic per seed.
SpriteBank synthetic_sprites(int count, int size, Rng& rng);

// Parses the standard digit-image IDX container (magic 0x00000803, big-endian
// dimensions, unsigned bytes), rescales to [0,1], and center-crops or
// zero-pads every image to sprite_size.
SpriteBank load_idx(const std::string& path, int sprite_size);

// Fixed initial condition for one sprite; used by tests and the
// deterministic-motion training sanity run.
struct SpriteInit {
  int sprite_index = 0;
  int row = 0, col = 0;        // top-left corner
  int vrow = 0, vcol = 0;      // integer velocity, pixels per frame
};

// Bouncing-sprite sequence: uniform random starts, integer velocities with
// each component magnitude in [speed_min, speed_max] and random sign;
// positions reflect at the walls; overlaps composite by per-pixel maximum.
VideoSequence generate_sequence(const SpriteBank& bank, const DataConfig& config,
                                Rng& rng);
VideoSequence generate_sequence_fixed(const SpriteBank& bank,
                                      const DataConfig& config,
                                      const std::vector<SpriteInit>& inits);

// Synthetic pushing episode: a bright pusher square moves by the commanded
// per-frame displacement; a dimmer passive object is displaced only while the
// two squares overlap. Deterministic given the drawn actions.
VideoSequence generate_action_episode(const DataConfig& config, Rng& rng);

// Same dynamics with explicit start corners and per-frame (row, col)
// displacements; displacements.size() must equal config.frames.
VideoSequence generate_action_episode_fixed(
    const DataConfig& config, int pusher_row, int pusher_col, int object_row,
    int object_col, const std::vector<std::pair<int, int>>& displacements);

// Sprite pools: the bank is generated once per dataset seed and split in
// half; training sequences draw only from the first half, the fixed test set
// only from the second, mirroring a train/test digit split.
SpriteBank train_sprite_pool(const DataConfig& config);
SpriteBank test_sprite_pool(const DataConfig& config);

// Deterministic training stream: sequence `index` of the run with this seed.
VideoSequence draw_training_sequence(const DataConfig& config, std::uint64_t seed,
                                     long long index);

// Deterministic held-out set of config.count sequences from the reserved
// test-side seed stream and the disjoint test sprite pool.
Dataset make_fixed_test_set(const DataConfig& config, std::uint64_t seed);

}  // namespace vpn
