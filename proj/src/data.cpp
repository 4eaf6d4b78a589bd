#include "vpn/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace vpn {

namespace {

constexpr int kPoolSprites = 16;  // per side of the train/test split

double& sprite_at(std::vector<double>& s, int size, int i, int j) {
  return s[static_cast<std::size_t>(i) * size + j];
}

std::vector<double> make_box(int size, int thickness) {
  std::vector<double> s(static_cast<std::size_t>(size) * size, 0.0);
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      const int ring = std::min(std::min(i, j), std::min(size - 1 - i, size - 1 - j));
      if (ring < thickness) sprite_at(s, size, i, j) = 1.0;
    }
  }
  return s;
}

std::vector<double> make_cross(int size, int thickness) {
  std::vector<double> s(static_cast<std::size_t>(size) * size, 0.0);
  const double center = (size - 1) / 2.0;
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      if (std::fabs(i - center) <= thickness / 2.0 ||
          std::fabs(j - center) <= thickness / 2.0) {
        sprite_at(s, size, i, j) = 1.0;
      }
    }
  }
  return s;
}

std::vector<double> make_disc(int size, double radius) {
  std::vector<double> s(static_cast<std::size_t>(size) * size, 0.0);
  const double center = (size - 1) / 2.0;
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      const double di = i - center, dj = j - center;
      if (di * di + dj * dj <= radius * radius) sprite_at(s, size, i, j) = 1.0;
    }
  }
  return s;
}

std::uint8_t quantize(double v) {
  const double clamped = std::min(1.0, std::max(0.0, v));
  return static_cast<std::uint8_t>(std::lround(clamped * 255.0));
}

// Advance one position component by one step of velocity, reflecting at 0 and
// at limit; the velocity component flips on every contact.
void bounce_axis(int& position, int& velocity, int limit) {
  position += velocity;
  while (position < 0 || position > limit) {
    if (position < 0) {
      position = -position;
      velocity = -velocity;
    } else {
      position = 2 * limit - position;
      velocity = -velocity;
    }
  }
}

VideoSequence render_sprite_trajectories(const SpriteBank& bank,
                                         const DataConfig& config,
                                         std::vector<SpriteInit> inits) {
  const int n = config.frame_size;
  const int size = bank.size;
  VideoSequence seq;
  seq.frames = config.frames;
  seq.height = n;
  seq.width = n;
  seq.channels = 1;
  seq.pixels.assign(static_cast<std::size_t>(config.frames) * n * n, 0);
  const int limit = n - size;
  std::vector<double> canvas(static_cast<std::size_t>(n) * n);
  for (int t = 0; t < config.frames; ++t) {
    std::fill(canvas.begin(), canvas.end(), 0.0);
    for (auto& sp : inits) {
      const auto& bitmap = bank.sprites[static_cast<std::size_t>(sp.sprite_index)];
      for (int i = 0; i < size; ++i) {
        for (int j = 0; j < size; ++j) {
          double& cell = canvas[static_cast<std::size_t>(sp.row + i) * n + sp.col + j];
          cell = std::max(cell, bitmap[static_cast<std::size_t>(i) * size + j]);
        }
      }
    }
    for (std::size_t i = 0; i < canvas.size(); ++i) {
      seq.pixels[seq.frame_offset(t) + i] = quantize(canvas[i]);
    }
    for (auto& sp : inits) {
      bounce_axis(sp.row, sp.vrow, limit);
      bounce_axis(sp.col, sp.vcol, limit);
    }
  }
  return seq;
}

}  // namespace

SpriteBank synthetic_sprites(int count, int size, Rng& rng) {
  if (size < 3) {
    throw std::invalid_argument("synthetic_sprites: size must be >= 3, got " +
                                std::to_string(size));
  }
  SpriteBank bank;
  bank.size = size;
  bank.source = "synthetic";
  bank.sprites.reserve(static_cast<std::size_t>(count));
  const int max_thickness = std::max(1, size / 3);
  for (int k = 0; k < count; ++k) {
    const auto shape = rng.uniform_int(0, 2);
    const int thickness = static_cast<int>(rng.uniform_int(1, max_thickness));
    if (shape == 0) {
      bank.sprites.push_back(make_box(size, thickness));
    } else if (shape == 1) {
      bank.sprites.push_back(make_cross(size, thickness));
    } else {
      const double radius = (size - 1) / 2.0 - 0.5 * rng.uniform_int(0, 1);
      bank.sprites.push_back(make_disc(size, radius));
    }
  }
  return bank;
}

namespace {

std::uint32_t read_be_u32(std::ifstream& in, const std::string& path,
                          std::size_t& offset) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) {
    throw std::runtime_error("load_idx: " + path + " truncated at byte " +
                             std::to_string(offset + in.gcount()) +
                             " while reading a 4-byte header field");
  }
  offset += 4;
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

SpriteBank load_idx(const std::string& path, int sprite_size) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_idx: cannot open " + path);
  std::size_t offset = 0;
  const std::uint32_t magic = read_be_u32(in, path, offset);
  if (magic != 0x00000803u) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "0x%08x", magic);
    throw std::runtime_error("load_idx: " + path + ": bad magic " + buf +
                             " at byte 0, expected 0x00000803");
  }
  const std::uint32_t count = read_be_u32(in, path, offset);
  const std::uint32_t rows = read_be_u32(in, path, offset);
  const std::uint32_t cols = read_be_u32(in, path, offset);

  SpriteBank bank;
  bank.size = sprite_size;
  bank.source = "idx-file";
  std::vector<unsigned char> raw(static_cast<std::size_t>(rows) * cols);
  for (std::uint32_t k = 0; k < count; ++k) {
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
      const std::size_t missing = raw.size() - static_cast<std::size_t>(in.gcount());
      throw std::runtime_error(
          "load_idx: " + path + " truncated at byte " +
          std::to_string(offset + static_cast<std::size_t>(in.gcount())) +
          ", image " + std::to_string(k) + " is missing " +
          std::to_string(missing) + " bytes");
    }
    offset += raw.size();
    // Center-crop or zero-pad to sprite_size.
    std::vector<double> sprite(static_cast<std::size_t>(sprite_size) * sprite_size,
                               0.0);
    const int row0 = (static_cast<int>(rows) - sprite_size) / 2;
    const int col0 = (static_cast<int>(cols) - sprite_size) / 2;
    for (int i = 0; i < sprite_size; ++i) {
      const int src_i = i + row0;
      if (src_i < 0 || src_i >= static_cast<int>(rows)) continue;
      for (int j = 0; j < sprite_size; ++j) {
        const int src_j = j + col0;
        if (src_j < 0 || src_j >= static_cast<int>(cols)) continue;
        sprite[static_cast<std::size_t>(i) * sprite_size + j] =
            raw[static_cast<std::size_t>(src_i) * cols + src_j] / 255.0;
      }
    }
    bank.sprites.push_back(std::move(sprite));
  }
  return bank;
}

VideoSequence generate_sequence(const SpriteBank& bank, const DataConfig& config,
                                Rng& rng) {
  config.validate();
  if (bank.size > config.frame_size) {
    throw std::invalid_argument("generate_sequence: sprite size " +
                                std::to_string(bank.size) +
                                " exceeds the canvas " +
                                std::to_string(config.frame_size));
  }
  if (bank.sprites.empty()) {
    throw std::invalid_argument("generate_sequence: empty sprite bank");
  }
  const int limit = config.frame_size - bank.size;
  std::vector<SpriteInit> inits;
  for (int s = 0; s < config.num_sprites; ++s) {
    SpriteInit sp;
    sp.sprite_index = static_cast<int>(
        rng.uniform_int(0, static_cast<std::int64_t>(bank.sprites.size()) - 1));
    sp.row = static_cast<int>(rng.uniform_int(0, limit));
    sp.col = static_cast<int>(rng.uniform_int(0, limit));
    const int mag_r = static_cast<int>(rng.uniform_int(config.speed_min, config.speed_max));
    const int mag_c = static_cast<int>(rng.uniform_int(config.speed_min, config.speed_max));
    sp.vrow = rng.bernoulli(0.5) ? mag_r : -mag_r;
    sp.vcol = rng.bernoulli(0.5) ? mag_c : -mag_c;
    inits.push_back(sp);
  }
  return render_sprite_trajectories(bank, config, std::move(inits));
}

VideoSequence generate_sequence_fixed(const SpriteBank& bank,
                                      const DataConfig& config,
                                      const std::vector<SpriteInit>& inits) {
  config.validate();
  const int limit = config.frame_size - bank.size;
  for (const auto& sp : inits) {
    if (sp.row < 0 || sp.row > limit || sp.col < 0 || sp.col > limit) {
      throw std::invalid_argument("generate_sequence_fixed: start position out of range");
    }
    if (sp.sprite_index < 0 ||
        sp.sprite_index >= static_cast<int>(bank.sprites.size())) {
      throw std::invalid_argument("generate_sequence_fixed: sprite index out of range");
    }
  }
  return render_sprite_trajectories(bank, config, inits);
}

VideoSequence generate_action_episode_fixed(
    const DataConfig& config, int pusher_row, int pusher_col, int object_row,
    int object_col, const std::vector<std::pair<int, int>>& displacements) {
  config.validate();
  if (config.kind != "pushing") {
    throw std::invalid_argument("generate_action_episode: data kind must be 'pushing'");
  }
  if (displacements.size() != static_cast<std::size_t>(config.frames)) {
    throw std::invalid_argument("generate_action_episode: need one displacement "
                                "per frame, got " +
                                std::to_string(displacements.size()));
  }
  const int n = config.frame_size;
  const int plimit = n - config.pusher_size;
  const int olimit = n - config.object_size;
  int pr = pusher_row, pc = pusher_col, orow = object_row, ocol = object_col;
  if (pr < 0 || pr > plimit || pc < 0 || pc > plimit || orow < 0 ||
      orow > olimit || ocol < 0 || ocol > olimit) {
    throw std::invalid_argument("generate_action_episode: start corner out of range");
  }

  VideoSequence seq;
  seq.frames = config.frames;
  seq.height = n;
  seq.width = n;
  seq.channels = 1;
  seq.pixels.assign(static_cast<std::size_t>(config.frames) * n * n, 0);
  seq.states.resize(static_cast<std::size_t>(config.frames));
  seq.actions.resize(static_cast<std::size_t>(config.frames));

  auto overlaps = [&](int prr, int pcc, int oro, int oco) {
    const bool rows = prr < oro + config.object_size && oro < prr + config.pusher_size;
    const bool cols = pcc < oco + config.object_size && oco < pcc + config.pusher_size;
    return rows && cols;
  };
  auto clamp = [](int v, int lo, int hi) { return std::min(hi, std::max(lo, v)); };

  for (int t = 0; t < config.frames; ++t) {
    // Render the current configuration: bright pusher over a dimmer object.
    for (int i = 0; i < config.object_size; ++i) {
      for (int j = 0; j < config.object_size; ++j) {
        auto& px = seq.pixels[seq.frame_offset(t) +
                              static_cast<std::size_t>(orow + i) * n + ocol + j];
        px = std::max<std::uint8_t>(px, quantize(0.6));
      }
    }
    for (int i = 0; i < config.pusher_size; ++i) {
      for (int j = 0; j < config.pusher_size; ++j) {
        auto& px = seq.pixels[seq.frame_offset(t) +
                              static_cast<std::size_t>(pr + i) * n + pc + j];
        px = std::max<std::uint8_t>(px, quantize(1.0));
      }
    }
    seq.states[static_cast<std::size_t>(t)] = {
        double(pr) / n, double(pc) / n, 0.0, 0.0, 0.0};

    const auto [dr, dc] = displacements[static_cast<std::size_t>(t)];
    if (std::abs(dr) > config.max_push || std::abs(dc) > config.max_push) {
      throw std::invalid_argument("generate_action_episode: displacement exceeds max_push");
    }
    seq.actions[static_cast<std::size_t>(t)] = {
        double(dr) / config.max_push, double(dc) / config.max_push, 0.0, 0.0, 0.0};

    // Advance: pusher moves first (clamped); the passive object is dragged by
    // the same displacement exactly when the squares then overlap.
    const int npr = clamp(pr + dr, 0, plimit);
    const int npc = clamp(pc + dc, 0, plimit);
    if (overlaps(npr, npc, orow, ocol)) {
      orow = clamp(orow + dr, 0, olimit);
      ocol = clamp(ocol + dc, 0, olimit);
    }
    pr = npr;
    pc = npc;
  }
  return seq;
}

VideoSequence generate_action_episode(const DataConfig& config, Rng& rng) {
  config.validate();
  if (config.kind != "pushing") {
    throw std::invalid_argument("generate_action_episode: data kind must be 'pushing'");
  }
  const int n = config.frame_size;
  const int plimit = n - config.pusher_size;
  const int olimit = n - config.object_size;
  const int pr = static_cast<int>(rng.uniform_int(0, plimit));
  const int pc = static_cast<int>(rng.uniform_int(0, plimit));
  const int orow = static_cast<int>(rng.uniform_int(0, olimit));
  const int ocol = static_cast<int>(rng.uniform_int(0, olimit));
  std::vector<std::pair<int, int>> displacements;
  displacements.reserve(static_cast<std::size_t>(config.frames));
  for (int t = 0; t < config.frames; ++t) {
    displacements.emplace_back(
        static_cast<int>(rng.uniform_int(-config.max_push, config.max_push)),
        static_cast<int>(rng.uniform_int(-config.max_push, config.max_push)));
  }
  return generate_action_episode_fixed(config, pr, pc, orow, ocol, displacements);
}

namespace {

SpriteBank sprite_pool_half(const DataConfig& config, bool test_half) {
  Rng rng(Rng::derive(config.seed, "sprite-pool"));
  SpriteBank all = synthetic_sprites(2 * kPoolSprites, config.sprite_size, rng);
  SpriteBank half;
  half.size = all.size;
  half.source = all.source;
  const int begin = test_half ? kPoolSprites : 0;
  for (int k = begin; k < begin + kPoolSprites; ++k) {
    half.sprites.push_back(all.sprites[static_cast<std::size_t>(k)]);
  }
  return half;
}

}  // namespace

SpriteBank train_sprite_pool(const DataConfig& config) {
  return sprite_pool_half(config, false);
}

SpriteBank test_sprite_pool(const DataConfig& config) {
  return sprite_pool_half(config, true);
}

VideoSequence draw_training_sequence(const DataConfig& config, std::uint64_t seed,
                                     long long index) {
  Rng rng(Rng::derive(seed, "train-seq", static_cast<std::uint64_t>(index)));
  if (config.kind == "pushing") return generate_action_episode(config, rng);
  static thread_local DataConfig cached_config;
  static thread_local SpriteBank cached_pool;
  if (cached_pool.sprites.empty() || cached_config.seed != config.seed ||
      cached_config.sprite_size != config.sprite_size) {
    cached_pool = train_sprite_pool(config);
    cached_config = config;
  }
  return generate_sequence(cached_pool, config, rng);
}

Dataset make_fixed_test_set(const DataConfig& config, std::uint64_t seed) {
  config.validate();
  Dataset ds;
  ds.config = config;
  SpriteBank pool;
  if (config.kind == "sprites") pool = test_sprite_pool(config);
  for (int k = 0; k < config.count; ++k) {
    Rng rng(Rng::derive(seed, "test-seq", static_cast<std::uint64_t>(k)));
    if (config.kind == "pushing") {
      ds.sequences.push_back(generate_action_episode(config, rng));
    } else {
      ds.sequences.push_back(generate_sequence(pool, config, rng));
    }
  }
  return ds;
}

}  // namespace vpn
