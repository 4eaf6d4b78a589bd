#include <cmath>
#include <cstdio>
#include <fstream>

#include <doctest.h>

#include "oracles.hpp"
#include "vpn/config.hpp"
#include "vpn/data.hpp"

using namespace vpn;

namespace {

DataConfig desk_data() { return make_preset("desk").data; }

SpriteBank one_box_bank(int size) {
  SpriteBank bank;
  bank.size = size;
  bank.source = "synthetic";
  std::vector<double> solid(static_cast<std::size_t>(size) * size, 1.0);
  bank.sprites.push_back(solid);
  return bank;
}

std::string temp_path(const std::string& name) {
  return std::string("/tmp/vpn_data_test_") + name;
}

}  // namespace

TEST_CASE("zero velocity produces a static sequence") {
  DataConfig cfg = desk_data();
  cfg.num_sprites = 1;
  SpriteBank bank = one_box_bank(4);
  VideoSequence seq =
      generate_sequence_fixed(bank, cfg, {SpriteInit{0, 3, 5, 0, 0}});
  for (int t = 1; t < seq.frames; ++t) {
    for (int i = 0; i < seq.height; ++i)
      for (int j = 0; j < seq.width; ++j)
        CHECK(seq.at(t, i, j, 0) == seq.at(0, i, j, 0));
  }
}

TEST_CASE("unit velocity away from walls is a pure translation") {
  DataConfig cfg = desk_data();
  cfg.num_sprites = 1;
  SpriteBank bank = one_box_bank(4);
  // Start at column 2, move right 1 px/frame for 6 frames: ends at column 7,
  // limit is 16-4=12, so no wall contact.
  VideoSequence seq =
      generate_sequence_fixed(bank, cfg, {SpriteInit{0, 6, 2, 0, 1}});
  for (int t = 0; t + 1 < seq.frames; ++t) {
    for (int i = 0; i < seq.height; ++i) {
      for (int j = 0; j + 1 < seq.width; ++j) {
        CHECK(seq.at(t + 1, i, j + 1, 0) == seq.at(t, i, j, 0));
      }
    }
  }
}

TEST_CASE("wall crossings match the scalar bounce oracle") {
  DataConfig cfg = desk_data();
  cfg.frames = 40;  // long enough for several bounces
  cfg.num_sprites = 1;
  SpriteBank bank = one_box_bank(5);
  const int limit = cfg.frame_size - bank.size;
  const SpriteInit init{0, 9, 3, 2, -2};
  VideoSequence seq = generate_sequence_fixed(bank, cfg, {init});

  oracle::Bounce1D row{init.row, init.vrow}, col{init.col, init.vcol};
  for (int t = 0; t < cfg.frames; ++t) {
    // The sprite is solid, so its top-left corner is the first bright pixel.
    int found_i = -1, found_j = -1;
    for (int i = 0; i < seq.height && found_i < 0; ++i)
      for (int j = 0; j < seq.width; ++j)
        if (seq.at(t, i, j, 0) == 255) {
          found_i = i;
          found_j = j;
          break;
        }
    CHECK(found_i == row.position);
    CHECK(found_j == col.position);
    row = oracle::bounce_step(row, limit);
    col = oracle::bounce_step(col, limit);
  }
  // Energy conservation: speed magnitude is preserved across the trajectory.
  CHECK(std::abs(row.velocity) == std::abs(init.vrow));
  CHECK(std::abs(col.velocity) == std::abs(init.vcol));
}

TEST_CASE("overlapping sprites composite by per-pixel maximum") {
  DataConfig cfg = desk_data();
  cfg.num_sprites = 2;
  cfg.frames = 2;
  SpriteBank bank = one_box_bank(4);
  std::vector<double> half(16, 0.5);
  bank.sprites.push_back(half);
  VideoSequence both = generate_sequence_fixed(
      bank, cfg, {SpriteInit{0, 5, 5, 0, 0}, SpriteInit{1, 6, 6, 0, 0}});
  VideoSequence solid_only =
      generate_sequence_fixed(bank, cfg, {SpriteInit{0, 5, 5, 0, 0}});
  VideoSequence half_only =
      generate_sequence_fixed(bank, cfg, {SpriteInit{1, 6, 6, 0, 0}});
  for (int i = 0; i < cfg.frame_size; ++i) {
    for (int j = 0; j < cfg.frame_size; ++j) {
      const int expect = std::max(solid_only.at(0, i, j, 0), half_only.at(0, i, j, 0));
      CHECK(both.at(0, i, j, 0) == expect);
    }
  }
}

TEST_CASE("random sequences are deterministic and in range") {
  DataConfig cfg = desk_data();
  SpriteBank pool = train_sprite_pool(cfg);
  Rng a(42), b(42);
  VideoSequence s1 = generate_sequence(pool, cfg, a);
  VideoSequence s2 = generate_sequence(pool, cfg, b);
  CHECK(s1.pixels == s2.pixels);
}

TEST_CASE("synthetic sprites are deterministic and shaped as documented") {
  Rng a(9), b(9);
  SpriteBank s1 = synthetic_sprites(6, 7, a);
  SpriteBank s2 = synthetic_sprites(6, 7, b);
  REQUIRE(s1.sprites.size() == 6);
  for (std::size_t k = 0; k < 6; ++k) CHECK(s1.sprites[k] == s2.sprites[k]);

  // A box of thickness tau has ones exactly where the ring index is < tau.
  // Probe the generator's box/disc builders through a small bank sweep: every
  // sprite must be binary and nonempty.
  for (const auto& sp : s1.sprites) {
    int ones = 0;
    for (double v : sp) {
      CHECK((v == 0.0 || v == 1.0));
      if (v == 1.0) ++ones;
    }
    CHECK(ones > 0);
  }
}

TEST_CASE("disc sprites equal the integer-lattice distance check") {
  // Drive the generator until it emits discs, then verify against a direct
  // distance evaluation for both possible radii.
  const int size = 9;
  const double center = (size - 1) / 2.0;
  bool saw_disc = false;
  Rng rng(5);
  SpriteBank bank = synthetic_sprites(40, size, rng);
  for (const auto& sp : bank.sprites) {
    for (double radius : {center, center - 0.5}) {
      bool match = true;
      for (int i = 0; i < size && match; ++i) {
        for (int j = 0; j < size; ++j) {
          const double di = i - center, dj = j - center;
          const bool inside = di * di + dj * dj <= radius * radius;
          if (sp[static_cast<std::size_t>(i) * size + j] != (inside ? 1.0 : 0.0)) {
            match = false;
            break;
          }
        }
      }
      if (match) saw_disc = true;
    }
  }
  CHECK(saw_disc);
}

TEST_CASE("train and test sprite pools split one bank at disjoint indices") {
  DataConfig cfg = desk_data();
  SpriteBank train = train_sprite_pool(cfg);
  SpriteBank test = test_sprite_pool(cfg);
  REQUIRE(train.sprites.size() == test.sprites.size());
  REQUIRE(!train.sprites.empty());

  // Both pools are halves of a single bank drawn from a seed-derived stream:
  // train takes the first half, test the second. Reconstructing that bank
  // pins the index split; small sprites can collide as bitmaps (the shape
  // family is tiny at this size), so disjointness is by index, not by pixels.
  Rng rng(Rng::derive(cfg.seed, "sprite-pool"));
  SpriteBank all =
      synthetic_sprites(2 * static_cast<int>(train.sprites.size()),
                        cfg.sprite_size, rng);
  const std::size_t half = train.sprites.size();
  for (std::size_t k = 0; k < half; ++k) {
    CHECK(train.sprites[k] == all.sprites[k]);
    CHECK(test.sprites[k] == all.sprites[half + k]);
  }
  // The two halves of the stream are not the same ordered list.
  CHECK(train.sprites != test.sprites);
}

TEST_CASE("fixed test sets are reproducible and use config.count") {
  DataConfig cfg = desk_data();
  cfg.count = 5;
  Dataset d1 = make_fixed_test_set(cfg, 77);
  Dataset d2 = make_fixed_test_set(cfg, 77);
  REQUIRE(d1.sequences.size() == 5);
  for (std::size_t k = 0; k < 5; ++k) {
    CHECK(d1.sequences[k].pixels == d2.sequences[k].pixels);
  }
  Dataset d3 = make_fixed_test_set(cfg, 78);
  CHECK(d1.sequences[0].pixels != d3.sequences[0].pixels);
}

TEST_CASE("zero actions freeze the pushing scene") {
  DataConfig cfg = make_preset("desk-cond").data;
  std::vector<std::pair<int, int>> still(static_cast<std::size_t>(cfg.frames),
                                         {0, 0});
  VideoSequence ep = generate_action_episode_fixed(cfg, 1, 1, 6, 6, still);
  for (int t = 1; t < ep.frames; ++t) {
    for (int i = 0; i < ep.height; ++i)
      for (int j = 0; j < ep.width; ++j)
        CHECK(ep.at(t, i, j, 0) == ep.at(0, i, j, 0));
  }
}

TEST_CASE("contact-free unit action translates the pusher one pixel per frame") {
  DataConfig cfg = make_preset("desk-cond").data;
  std::vector<std::pair<int, int>> right(static_cast<std::size_t>(cfg.frames),
                                         {0, 1});
  // Object parked far from the pusher's path.
  VideoSequence ep = generate_action_episode_fixed(cfg, 0, 0, 9, 9, right);
  for (int t = 0; t + 1 < ep.frames; ++t) {
    // State tracks the pusher corner: column advances by 1/frame_size.
    const double expect = double(t) / cfg.frame_size;
    CHECK(ep.states[static_cast<std::size_t>(t)][1] == doctest::Approx(expect));
    for (int i = 0; i < cfg.pusher_size; ++i)
      for (int j = 0; j < cfg.pusher_size; ++j)
        CHECK(ep.at(t, i, t + j, 0) == 255);
  }
}

TEST_CASE("pushing contact follows the scalar pushing oracle") {
  // Both squares share rows, so the horizontal dynamics reduce exactly to the
  // one-dimensional oracle: pusher driven rightwards across the object.
  DataConfig cfg = make_preset("desk-cond").data;
  cfg.frames = 9;  // long enough to shove the object into the right wall
  const int n = cfg.frame_size;
  std::vector<std::pair<int, int>> right(static_cast<std::size_t>(cfg.frames),
                                         {0, 1});
  VideoSequence ep = generate_action_episode_fixed(cfg, 2, 0, 2, 5, right);

  oracle::Push1D track{0, 5};
  for (int t = 0; t < ep.frames; ++t) {
    // The state vector stores pusher col / frame_size exactly.
    CHECK(ep.states[static_cast<std::size_t>(t)][1] ==
          doctest::Approx(double(track.pusher) / n).epsilon(1e-12));
    // The object's left column is the first 153-intensity pixel in its row
    // band, unless the pusher occludes it entirely.
    int obj_col = -1;
    for (int j = 0; j < n && obj_col < 0; ++j)
      if (ep.at(t, 2, j, 0) == 153) obj_col = j;
    if (obj_col >= 0) {
      // Occlusion can hide the true left edge; the visible edge never sits
      // left of the oracle position.
      CHECK(obj_col >= track.object);
    }
    track = oracle::push_step(track, 1, cfg.pusher_size, cfg.object_size, n);
  }
  // Final configuration: the pusher has shoved the object to the right wall.
  CHECK(track.object == n - cfg.object_size);
}

TEST_CASE("idx ingestion: fixture, empty header, and truncation") {
  // Hand-built fixture: two 3x3 images.
  const std::string path = temp_path("fixture.idx");
  {
    std::ofstream out(path, std::ios::binary);
    const unsigned char header[] = {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 3, 0, 0, 0, 3};
    out.write(reinterpret_cast<const char*>(header), sizeof header);
    const unsigned char img1[] = {0, 255, 0, 255, 255, 255, 0, 255, 0};
    const unsigned char img2[] = {255, 0, 0, 0, 255, 0, 0, 0, 255};
    out.write(reinterpret_cast<const char*>(img1), 9);
    out.write(reinterpret_cast<const char*>(img2), 9);
  }
  SpriteBank bank = load_idx(path, 3);
  REQUIRE(bank.sprites.size() == 2);
  CHECK(bank.sprites[0][1] == 1.0);
  CHECK(bank.sprites[0][0] == 0.0);
  CHECK(bank.sprites[0][4] == 1.0);
  CHECK(bank.sprites[1][0] == 1.0);
  CHECK(bank.sprites[1][8] == 1.0);
  CHECK(bank.source == "idx-file");

  // Padding: loading the same 3x3 fixture at sprite size 5 centers it.
  SpriteBank padded = load_idx(path, 5);
  CHECK(padded.sprites[0][0] == 0.0);
  CHECK(padded.sprites[0][5 * 1 + 2] == 1.0);  // old (0,1) lands at (1,2)

  // Zero images.
  const std::string empty = temp_path("empty.idx");
  {
    std::ofstream out(empty, std::ios::binary);
    const unsigned char header[] = {0, 0, 8, 3, 0, 0, 0, 0, 0, 0, 0, 3, 0, 0, 0, 3};
    out.write(reinterpret_cast<const char*>(header), sizeof header);
  }
  CHECK(load_idx(empty, 3).sprites.empty());

  // Bad magic.
  const std::string bad = temp_path("bad.idx");
  {
    std::ofstream out(bad, std::ios::binary);
    const unsigned char header[] = {9, 9, 9, 9, 0, 0, 0, 1, 0, 0, 0, 3, 0, 0, 0, 3};
    out.write(reinterpret_cast<const char*>(header), sizeof header);
  }
  CHECK_THROWS_WITH_AS(load_idx(bad, 3), doctest::Contains("bad magic"),
                       std::runtime_error);

  // Truncation: promise 2 images, deliver 1.5.
  const std::string cut = temp_path("cut.idx");
  {
    std::ofstream out(cut, std::ios::binary);
    const unsigned char header[] = {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 3, 0, 0, 0, 3};
    out.write(reinterpret_cast<const char*>(header), sizeof header);
    const unsigned char img[] = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13};
    out.write(reinterpret_cast<const char*>(img), 13);
  }
  CHECK_THROWS_WITH_AS(load_idx(cut, 3), doctest::Contains("missing 5 bytes"),
                       std::runtime_error);
  for (const auto& p : {path, empty, bad, cut}) std::remove(p.c_str());
}

TEST_CASE("training stream is deterministic per (seed, index)") {
  DataConfig cfg = desk_data();
  VideoSequence a = draw_training_sequence(cfg, 11, 3);
  VideoSequence b = draw_training_sequence(cfg, 11, 3);
  VideoSequence c = draw_training_sequence(cfg, 11, 4);
  CHECK(a.pixels == b.pixels);
  CHECK(a.pixels != c.pixels);

  DataConfig push_cfg = make_preset("desk-cond").data;
  VideoSequence p = draw_training_sequence(push_cfg, 11, 0);
  CHECK(p.conditioned());
  CHECK(p.states.size() == static_cast<std::size_t>(p.frames));
}
