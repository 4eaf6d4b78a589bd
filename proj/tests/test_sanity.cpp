// Long-horizon training sanity: on the easiest variant of the bouncing-sprite
// task (one sprite, fixed speed), a 2000-step run must cut the held-out loss
// to half the uniform model or better. Marked skip so the half-hour run only
// happens when ctest selects it explicitly (train.sanity passes --no-skip).

#include <cmath>

#include <doctest.h>

#include "vpn/config.hpp"
#include "vpn/data.hpp"
#include "vpn/model.hpp"
#include "vpn/train.hpp"

using namespace vpn;

TEST_CASE("a deterministic-motion training run cuts the loss well below "
          "uniform" * doctest::skip()) {
  Preset preset = make_preset("desk");
  preset.data.num_sprites = 1;
  preset.data.speed_min = 1;
  preset.data.speed_max = 1;
  preset.train.steps = 2000;

  TrainPaths no_artifacts;
  TrainResult result = train_loop(preset, no_artifacts);
  REQUIRE(std::isfinite(result.final_loss_nats_per_frame));

  Dataset test = make_fixed_test_set(preset.data, preset.data.seed);
  test.sequences.resize(32);
  EvalReport report =
      eval_loop(result.model, test, preset.train.context_frames);

  const double uniform =
      preset.data.frame_size * preset.data.frame_size * std::log(2.0);
  MESSAGE("held-out " << report.nats_per_frame << " nats/frame vs uniform "
                      << uniform);
  CHECK(report.nats_per_frame < 0.5 * uniform);
}
