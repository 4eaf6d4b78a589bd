// Acceptance gate: eleven structural and behavioral criteria, each printed as
// one PASS/FAIL line with the measured numbers. Run without arguments for the
// full gate or pass criterion numbers to run a subset. Exits with the number
// of failed criteria.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vpn/blocks.hpp"
#include "vpn/config.hpp"
#include "vpn/data.hpp"
#include "vpn/model.hpp"
#include "vpn/probes.hpp"
#include "vpn/rng.hpp"
#include "vpn/tensor.hpp"
#include "vpn/train.hpp"

#ifndef VPN_BINARY
#error "VPN_BINARY must point at the built command-line tool"
#endif

namespace fs = std::filesystem;
using namespace vpn;
using clk = std::chrono::steady_clock;

namespace {

double secs_since(clk::time_point start) {
  return std::chrono::duration<double>(clk::now() - start).count();
}

// Small but fully general model for the exhaustive probes: three color
// groups, every masked layer, every injection seam.
ModelConfig probe_config(int channels) {
  ModelConfig cfg;
  cfg.kind = ModelKind::vpn;
  cfg.head = HeadKind::softmax256;
  cfg.block_kind = BlockKind::rmb;
  cfg.encoder_blocks = 1;
  cfg.decoder_blocks = 1;
  cfg.color_channels = channels;
  cfg.block_width = channels == 3 ? 6 : 8;
  cfg.lstm_channels = 4;
  cfg.top_channels = cfg.block_width;
  return cfg;
}

VideoSequence random_video(int frames, int size, int channels, Rng& rng) {
  VideoSequence v;
  v.frames = frames;
  v.height = size;
  v.width = size;
  v.channels = channels;
  v.pixels.resize(static_cast<std::size_t>(frames) * size * size * channels);
  for (auto& p : v.pixels) {
    p = static_cast<std::uint8_t>(
        std::min(255.0, std::floor(rng.uniform() * 256.0)));
  }
  return v;
}

// --- criterion 1: exhaustive causality on the masked decoder -----------------

bool criterion_causality(std::ostringstream& detail) {
  CausalityResult r = causality_probe(probe_config(3), 6, 3, 1);
  detail << r.perturbations << " perturbations, " << r.leaked_coordinates
         << " leaked coordinates, later-frame potency "
         << (r.later_changed ? "yes" : "NO") << ", " << std::fixed
         << std::setprecision(1) << r.seconds << "s (budget 300s)";
  return r.passed() && r.seconds < 300.0;
}

// --- criterion 2: within-frame invariance of the baseline --------------------

bool criterion_baseline_independence(std::ostringstream& detail) {
  ModelConfig cfg = probe_config(3);
  cfg.kind = ModelKind::baseline;
  CausalityResult r = baseline_independence_probe(cfg, 6, 3, 1);
  detail << r.perturbations << " perturbations, " << r.leaked_coordinates
         << " within-frame changes, later-frame potency "
         << (r.later_changed ? "yes" : "NO");
  return r.passed();
}

// --- criterion 3: finite-difference checks over every block ------------------

bool criterion_gradients(std::ostringstream& detail) {
  GradcheckResult r = gradcheck_probe(1);
  detail << r.checked.size() << " circuits, " << r.failed.size()
         << " failed, max relative error " << std::scientific
         << std::setprecision(2) << r.max_rel_error << " (tolerance "
         << r.tolerance << ")";
  if (!r.failed.empty()) {
    detail << ", failing:";
    for (const std::string& name : r.failed) detail << " " << name;
  }
  return r.passed();
}

// --- criterion 4: per-pixel normalization ------------------------------------

bool criterion_normalization(std::ostringstream& detail) {
  NormalizationResult r = normalization_probe(1);
  detail << "worst log-softmax slice error " << std::scientific
         << std::setprecision(2) << r.worst_slice_error
         << ", 256-value enumeration error " << r.enumeration_error
         << " (tolerance " << r.tolerance << ")";
  return r.passed();
}

// --- criterion 5: sample-then-rescore chain rule -----------------------------

bool criterion_chain_rule(std::ostringstream& detail) {
  const double tol = 1e-9;
  bool ok = true;

  // Softmax head: the rescored exact likelihood of a sampled continuation
  // must equal the log-prob accumulated while sampling.
  {
    ModelConfig cfg = probe_config(3);
    Rng init(11);
    ModelParams params = build_model(cfg, init);
    Rng data_rng(12);
    VideoSequence seed_video = random_video(1, 4, 3, data_rng);
    Rng sample_rng(13);
    Continuation cont =
        generate_continuation(params, seed_video, 1, 1, nullptr, sample_rng);
    Likelihood like = vpn_log_likelihood(params, cont.video, nullptr, 1);
    double gap = std::abs(like.total_nats - (-cont.log_prob));
    detail << "softmax |rescore - sampled| = " << std::scientific
           << std::setprecision(2) << gap;
    ok = ok && gap <= tol;
  }

  // Bernoulli head: binary draws make the sigmoid cross-entropy of the drawn
  // frame equal to its negative log-probability.
  {
    ModelConfig cfg = probe_config(1);
    cfg.head = HeadKind::bernoulli;
    Rng init(21);
    ModelParams params = build_model(cfg, init);
    Rng data_rng(22);
    VideoSequence seed_video = random_video(1, 4, 1, data_rng);
    for (auto& p : seed_video.pixels) p = p < 128 ? 0 : 255;
    Rng sample_rng(23);
    Continuation cont =
        generate_continuation(params, seed_video, 1, 1, nullptr, sample_rng);
    FrameLosses losses = model_loss(params, cont.video, nullptr, 1);
    double gap = std::abs(losses.total.values()[0] - (-cont.log_prob));
    detail << ", bernoulli = " << std::scientific << std::setprecision(2)
           << gap << " (tolerance 1e-09)";
    ok = ok && gap <= tol;
  }
  return ok;
}

// --- criterion 6: entropy lower bound ----------------------------------------

// Frozen by direct summation over the shipped desk-scale test sets; the
// bouncing-sprite frames are binary so their bound is exactly zero, while the
// pushing frames carry one intermediate intensity.
constexpr double kDeskTestBound = 0.0;
constexpr double kDeskCondTestBound = 5.6220134761687346;

bool criterion_lower_bound(std::ostringstream& detail) {
  bool ok = true;

  // Analytic: H(z,z) of an all-0.5 64x64 frame is 64^2 * ln 2.
  Tensor half = Tensor::full({64, 64, 1}, 0.5);
  double measured = sigmoid_ce_loss(half, half).values()[0];
  double expected = 64.0 * 64.0 * std::log(2.0);
  double gap = std::abs(measured - expected);
  detail << "H(0.5) = " << std::setprecision(10) << measured << " vs 4096*ln2 "
         << expected << " (|diff| " << std::scientific << std::setprecision(2)
         << gap << ", tolerance 1e-06)";
  ok = ok && gap <= 1e-6;

  // Regression: the desk test sets' bounds by direct summation.
  Preset desk = make_preset("desk");
  double desk_bound = lower_bound_nats_per_frame(
      make_fixed_test_set(desk.data, desk.data.seed),
      desk.train.context_frames);
  Preset cond = make_preset("desk-cond");
  double cond_bound = lower_bound_nats_per_frame(
      make_fixed_test_set(cond.data, cond.data.seed),
      cond.train.context_frames);
  detail << std::defaultfloat << std::setprecision(12)
         << "; frozen desk bound " << desk_bound << " (expect "
         << kDeskTestBound << "), pushing bound " << cond_bound << " (expect "
         << kDeskCondTestBound << ")";
  ok = ok && std::abs(desk_bound - kDeskTestBound) <= 1e-9;
  ok = ok && std::abs(cond_bound - kDeskCondTestBound) <= 1e-9;
  return ok;
}

// --- criterion 7: residual identity and dilation schedules -------------------

bool criterion_residual_identity(std::ostringstream& detail) {
  bool ok = true;

  Rng rng(31);
  RmbParams block = make_rmb(8, 1, rng, 0.1);
  for (auto& w : block.project_out.weights.values()) w = 0.0;
  if (block.project_out.bias.defined()) {
    for (auto& b : block.project_out.bias.values()) b = 0.0;
  }
  Tensor h = Tensor::uniform({5, 5, 8}, rng, -1.0, 1.0);
  Tensor y = rmb_forward(h, block);
  long long mismatched = 0;
  for (std::size_t i = 0; i < h.values().size(); ++i) {
    if (y.values()[i] != h.values()[i]) ++mismatched;
  }
  detail << "zero-projection residual: " << mismatched
         << " of " << h.values().size() << " coordinates differ";
  ok = ok && mismatched == 0;

  std::vector<int> enc = dilation_schedule(8, {1, 2, 4, 8}, true);
  std::vector<int> expected_enc = {1, 2, 4, 8, 1, 2, 4, 8};
  std::vector<int> dec = dilation_schedule(12, {1, 2, 4, 8}, false);
  std::vector<int> expected_dec(12, 1);
  detail << "; encoder schedule "
         << (enc == expected_enc ? "[1,2,4,8,1,2,4,8]" : "WRONG")
         << ", decoder schedule "
         << (dec == expected_dec ? "all ones" : "WRONG");
  ok = ok && enc == expected_enc && dec == expected_dec;
  return ok;
}

// --- criterion 8: receptive-field footprint ----------------------------------

bool criterion_receptive_field(std::ostringstream& detail) {
  ReceptiveFieldResult dil = receptive_field_probe(true, 128, 1);
  ReceptiveFieldResult plain = receptive_field_probe(false, 128, 1);
  detail << "dilated " << dil.measured_rows << "x" << dil.measured_cols
         << " (analytic " << dil.expected_width << "), plain "
         << plain.measured_rows << "x" << plain.measured_cols << " (analytic "
         << plain.expected_width << "), leakage " << dil.nonzero_outside << "/"
         << plain.nonzero_outside;
  return dil.passed() && plain.passed() &&
         plain.measured_rows < dil.measured_rows;
}

// --- criterion 9: trained ordering on the desk preset ------------------------

bool criterion_desk_ordering(std::ostringstream& detail) {
  const double budget = 1800.0;  // seconds per model
  Preset desk = make_preset("desk");
  TrainPaths no_artifacts;

  auto t0 = clk::now();
  TrainResult vpn_run = train_loop(desk, no_artifacts);
  double vpn_secs = secs_since(t0);

  Preset base = desk;
  base.model.kind = ModelKind::baseline;
  auto t1 = clk::now();
  TrainResult base_run = train_loop(base, no_artifacts);
  double base_secs = secs_since(t1);

  Dataset test = make_fixed_test_set(desk.data, desk.data.seed);
  if (test.sequences.size() > 64) test.sequences.resize(64);
  EvalReport vpn_eval =
      eval_loop(vpn_run.model, test, desk.train.context_frames);
  EvalReport base_eval =
      eval_loop(base_run.model, test, desk.train.context_frames);
  const double uniform =
      desk.data.frame_size * desk.data.frame_size * std::log(2.0);

  // Sharpness: binary draws can only produce the two extreme intensities.
  Rng sample_rng(41);
  Continuation cont = generate_continuation(
      vpn_run.model, test.sequences.front(), desk.train.context_frames, 1,
      nullptr, sample_rng);
  bool sharp = true;
  for (std::size_t i =
           cont.video.frame_offset(desk.train.context_frames);
       i < cont.video.pixels.size(); ++i) {
    sharp = sharp && (cont.video.pixels[i] == 0 || cont.video.pixels[i] == 255);
  }

  detail << std::fixed << std::setprecision(4) << "vpn " << vpn_eval.nats_per_frame
         << " < baseline " << base_eval.nats_per_frame << " < uniform "
         << uniform << " nats/frame; samples binary: " << (sharp ? "yes" : "NO")
         << "; train " << std::setprecision(0) << vpn_secs << "s + "
         << base_secs << "s (budget 1800s each)";
  return vpn_eval.nats_per_frame < base_eval.nats_per_frame &&
         base_eval.nats_per_frame < uniform && sharp && vpn_secs < budget &&
         base_secs < budget;
}

// --- criterion 10: conditioning sensitivity ----------------------------------

bool criterion_conditioning(std::ostringstream& detail) {
  const double budget = 900.0;  // seconds for the whole criterion
  auto t0 = clk::now();
  Preset cond = make_preset("desk-cond");
  TrainPaths no_artifacts;

  TrainResult normal = train_loop(cond, no_artifacts);

  SequenceSource zeroed_stream = [](const DataConfig& d, std::uint64_t s,
                                    long long i) {
    VideoSequence v = draw_training_sequence(d, s, i);
    for (auto& a : v.actions) a.fill(0.0);
    for (auto& st : v.states) st.fill(0.0);
    return v;
  };
  TrainResult blind = train_loop(cond, no_artifacts, zeroed_stream);

  Dataset test = make_fixed_test_set(cond.data, cond.data.seed);
  if (test.sequences.size() > 32) test.sequences.resize(32);
  Dataset test_zeroed = test;
  for (auto& v : test_zeroed.sequences) {
    for (auto& a : v.actions) a.fill(0.0);
    for (auto& st : v.states) st.fill(0.0);
  }
  // Each model is scored in its own regime: the normal model with the true
  // actions, the blinded twin with the zeroed actions it was trained on.
  EvalReport normal_eval =
      eval_loop(normal.model, test, cond.train.context_frames);
  EvalReport blind_eval =
      eval_loop(blind.model, test_zeroed, cond.train.context_frames);

  // Changing one decoder-visible action must move the likelihood of some
  // scored frame of the unchanged video.
  const VideoSequence& seq = test.sequences.front();
  VideoSequence altered = seq;
  auto& action = altered.actions[cond.train.context_frames];
  for (double& a : action) a = a >= 0.0 ? -1.0 : 1.0;
  Conditioning c1 = make_conditioning(seq, cond.train.context_frames);
  Conditioning c2 = make_conditioning(altered, cond.train.context_frames);
  Likelihood l1 = vpn_log_likelihood(normal.model, seq, &c1,
                                     cond.train.context_frames);
  Likelihood l2 = vpn_log_likelihood(normal.model, seq, &c2,
                                     cond.train.context_frames);
  bool reacts = false;
  for (std::size_t i = 0; i < l1.frame_nats.size(); ++i) {
    reacts = reacts || l1.frame_nats[i] != l2.frame_nats[i];
  }

  double elapsed = secs_since(t0);
  detail << std::fixed << std::setprecision(4) << "with actions "
         << normal_eval.nats_per_frame << " < zeroed twin "
         << blind_eval.nats_per_frame
         << " nats/frame; logits react to an action change: "
         << (reacts ? "yes" : "NO") << "; " << std::setprecision(0) << elapsed
         << "s (budget 900s)";
  return normal_eval.nats_per_frame < blind_eval.nats_per_frame && reacts &&
         elapsed < budget;
}

// --- criterion 11: manifest replay reproducibility ---------------------------

int run_tool(const std::string& args, const fs::path& log) {
  std::string cmd = std::string(VPN_BINARY) + " " + args + " > " +
                    log.string() + " 2>&1";
  int status = std::system(cmd.c_str());
  if (status == -1 || !WIFEXITED(status)) return -1;
  return WEXITSTATUS(status);
}

bool criterion_replay(std::ostringstream& detail) {
  fs::path root = fs::temp_directory_path() /
                  ("vpn-accept-" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  auto dir = [&](const char* name) { return (root / name).string(); };
  const fs::path log = root / "tool.log";

  struct Step {
    std::string name;
    std::string args;
  };
  std::vector<Step> commands = {
      {"gen-data",
       "gen-data --preset desk --count 3 --export-pgm 2 --out " + dir("g")},
      {"train", "train --preset desk --steps 2 --out " + dir("t")},
      {"eval", "eval --checkpoint " + dir("t") + "/run-final.ckpt --dataset " +
                   dir("g") + "/dataset.vseq --context 4 --out " + dir("e")},
      {"sample", "sample --checkpoint " + dir("t") +
                     "/run-final.ckpt --dataset " + dir("g") +
                     "/dataset.vseq --context 4 --frames 1 --seed 3 --out " +
                     dir("s")},
      {"probe", "probe --normalization --out " + dir("p")},
  };

  bool ok = true;
  int replayed = 0;
  for (const Step& step : commands) {
    int run_code = run_tool(step.args, log);
    if (run_code != 0) {
      detail << step.name << " exited " << run_code << "; ";
      ok = false;
      continue;
    }
    const std::string out_dir = step.args.substr(step.args.rfind(' ') + 1);
    int replay_code = run_tool(
        "replay --manifest " + out_dir + "/manifest.json --out " + out_dir +
            "-replay",
        log);
    if (replay_code != 0) {
      detail << step.name << " replay exited " << replay_code << "; ";
      ok = false;
    } else {
      ++replayed;
    }
  }
  detail << replayed << " of " << commands.size()
         << " commands replayed bit-identically from their manifests";
  fs::remove_all(root);
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* title;
    std::function<bool(std::ostringstream&)> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "exhaustive causality", criterion_causality},
      {2, "baseline within-frame independence", criterion_baseline_independence},
      {3, "gradient checks", criterion_gradients},
      {4, "normalization", criterion_normalization},
      {5, "chain-rule consistency", criterion_chain_rule},
      {6, "entropy lower bound", criterion_lower_bound},
      {7, "residual identity and schedules", criterion_residual_identity},
      {8, "receptive-field footprint", criterion_receptive_field},
      {9, "trained ordering (vpn < baseline < uniform)", criterion_desk_ordering},
      {10, "conditioning sensitivity", criterion_conditioning},
      {11, "manifest replay", criterion_replay},
  };

  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    selected.insert(std::atoi(argv[i]));
  }

  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    std::ostringstream detail;
    bool passed = false;
    try {
      passed = c.run(detail);
    } catch (const std::exception& e) {
      detail << "exception: " << e.what();
    }
    std::printf("criterion %2d: %s — %s — %s\n", c.id,
                passed ? "PASS" : "FAIL", c.title, detail.str().c_str());
    std::fflush(stdout);
    if (!passed) ++failures;
  }
  return failures;
}
