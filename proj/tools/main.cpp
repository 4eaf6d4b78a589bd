// Command-line front end: dataset generation, training, evaluation, sampling,
// diagnostic probes, and manifest replay. Every command writes a manifest.json
// into its output directory listing the fully resolved configuration, the
// seed, and every artifact produced, so `replay --manifest` can re-execute the
// run and verify the artifacts bit for bit (logs may differ in wall-clock
// fields only).
//
// Exit codes: 0 success, 2 usage error, 3 artifact or configuration mismatch,
// 4 probe failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vpn/config.hpp"
#include "vpn/data.hpp"
#include "vpn/io.hpp"
#include "vpn/model.hpp"
#include "vpn/probes.hpp"
#include "vpn/rng.hpp"
#include "vpn/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitMismatch = 3;
constexpr int kExitProbeFailure = 4;

std::string default_out_dir() {
  const char* env = std::getenv("VPN_OUT_DIR");
  return (env && *env) ? std::string(env) : std::string("out");
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw std::runtime_error("cannot create output directory '" + dir +
                             "': " + ec.message());
  }
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void write_command_manifest(const std::string& out_dir,
                            const std::string& command, const json& config,
                            std::uint64_t seed,
                            const std::vector<std::string>& artifacts,
                            const std::vector<std::string>& logs) {
  vpn::RunManifest m;
  m.command = command;
  m.config_json = config.dump(2);
  m.seed = seed;
  m.artifacts = artifacts;
  m.logs = logs;
  vpn::write_manifest(join_path(out_dir, "manifest.json"), m);
}

// Extracts one channel of one frame as a flat grayscale buffer.
std::vector<std::uint8_t> frame_channel(const vpn::VideoSequence& v, int t,
                                        int c) {
  std::vector<std::uint8_t> gray(static_cast<std::size_t>(v.height) * v.width);
  for (int i = 0; i < v.height; ++i) {
    for (int j = 0; j < v.width; ++j) {
      gray[static_cast<std::size_t>(i) * v.width + j] = v.at(t, i, j, c);
    }
  }
  return gray;
}

// Writes frame t of the sequence as PGM files (one per channel when the video
// has more than one channel) named "<stem>.pgm" or "<stem>-c<k>.pgm".
// Appends every filename to `artifacts`.
void export_frame_pgms(const std::string& out_dir, const std::string& stem,
                       const vpn::VideoSequence& v, int t,
                       std::vector<std::string>& artifacts) {
  for (int c = 0; c < v.channels; ++c) {
    std::string name =
        v.channels == 1 ? stem + ".pgm" : stem + "-c" + std::to_string(c) + ".pgm";
    std::vector<std::uint8_t> gray = frame_channel(v, t, c);
    vpn::write_pgm(join_path(out_dir, name), v.height, v.width, gray.data());
    artifacts.push_back(name);
  }
}

std::string format_index(const char* fmt, long long value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, value);
  return std::string(buf);
}

vpn::ModelParams load_model(const vpn::Checkpoint& ck) {
  vpn::Rng rng(0);
  vpn::ModelParams model = vpn::build_model(ck.config, rng);
  vpn::load_named_values(model, ck.params);
  return model;
}

// --- gen-data ----------------------------------------------------------------

int run_gen_data_resolved(const std::string& preset_name,
                          const vpn::DataConfig& data, int export_pgm,
                          const std::string& out_dir) {
  data.validate();
  vpn::Dataset ds = vpn::make_fixed_test_set(data, data.seed);
  ensure_dir(out_dir);

  std::vector<std::string> artifacts;
  vpn::write_dataset(join_path(out_dir, "dataset.vseq"), ds);
  artifacts.push_back("dataset.vseq");

  int exported = 0;
  if (export_pgm > 0 && !ds.sequences.empty()) {
    const vpn::VideoSequence& first = ds.sequences.front();
    exported = std::min(export_pgm, first.frames);
    for (int t = 0; t < exported; ++t) {
      export_frame_pgms(out_dir, "frame-" + format_index("%03lld", t), first, t,
                        artifacts);
    }
  }

  json config = {{"preset_name", preset_name},
                 {"data", json::parse(vpn::to_json(data))},
                 {"export_pgm", export_pgm}};
  write_command_manifest(out_dir, "gen-data", config, data.seed, artifacts, {});

  std::printf("gen-data: wrote %zu sequence(s) (%s %dx%d, %d frames) to %s\n",
              ds.sequences.size(), data.kind.c_str(), data.frame_size,
              data.frame_size, data.frames,
              join_path(out_dir, "dataset.vseq").c_str());
  if (exported > 0) {
    std::printf("gen-data: exported the first %d frame(s) of sequence 0 as PGM\n",
                exported);
  }
  return kExitOk;
}

struct GenDataArgs {
  std::string preset = "desk";
  long long seed = -1;   // <0: keep the preset's data seed
  long long count = -1;  // <0: keep the preset's count
  int export_pgm = 0;
  std::string out_dir = default_out_dir();
};

int run_gen_data(const GenDataArgs& args) {
  vpn::Preset preset = vpn::make_preset(args.preset);
  vpn::DataConfig data = preset.data;
  if (args.seed >= 0) data.seed = static_cast<std::uint64_t>(args.seed);
  if (args.count >= 0) data.count = static_cast<int>(args.count);
  return run_gen_data_resolved(args.preset, data, args.export_pgm, args.out_dir);
}

// --- train -------------------------------------------------------------------

int run_train_resolved(const std::string& preset_name, const vpn::Preset& preset,
                       const std::string& out_dir) {
  preset.model.validate();
  preset.data.validate();
  preset.train.validate();
  ensure_dir(out_dir);

  const std::string metrics_path = join_path(out_dir, "metrics.jsonl");
  std::error_code ec;
  fs::remove(metrics_path, ec);  // metrics are appended; start from scratch

  vpn::TrainPaths paths;
  paths.metrics = metrics_path;
  paths.checkpoint_prefix = join_path(out_dir, "run");
  paths.progress = [](long long step, double loss, double lr) {
    std::printf("step %6lld  loss %.6f nats/frame  lr %.3g\n", step, loss, lr);
    std::fflush(stdout);
  };

  vpn::TrainResult result = vpn::train_loop(preset, paths);

  std::vector<std::string> artifacts;
  for (const std::string& ckpt : result.checkpoints) {
    artifacts.push_back(fs::path(ckpt).filename().string());
  }
  std::vector<std::string> logs;
  if (fs::exists(metrics_path)) logs.push_back("metrics.jsonl");

  json config = {{"preset_name", preset_name},
                 {"preset", json::parse(vpn::to_json(preset))}};
  write_command_manifest(out_dir, "train", config, preset.train.seed, artifacts,
                         logs);

  std::printf("train: %lld step(s), final loss %.6f nats/frame, %zu checkpoint(s) in %s\n",
              result.steps_run, result.final_loss_nats_per_frame,
              result.checkpoints.size(), out_dir.c_str());
  return kExitOk;
}

struct TrainArgs {
  std::string preset = "desk";
  long long seed = -1;   // <0: keep the preset's training seed
  long long steps = -1;  // <0: keep the preset's step count
  std::string model;     // "", "vpn", "baseline"
  std::string block;     // "", "rmb", "relu"
  std::string dilation;  // "", "on", "off"
  std::string out_dir = default_out_dir();
};

int run_train(const TrainArgs& args) {
  vpn::Preset preset = vpn::make_preset(args.preset);
  if (args.seed >= 0) preset.train.seed = static_cast<std::uint64_t>(args.seed);
  if (args.steps >= 0) preset.train.steps = args.steps;
  if (!args.model.empty()) {
    preset.model.kind = vpn::model_kind_from_string(args.model);
  }
  if (!args.block.empty()) {
    preset.model.block_kind = vpn::block_kind_from_string(args.block);
  }
  if (args.dilation == "off") {
    preset.model.dilation_scheme.clear();
  }  // "on" keeps the preset's scheme
  return run_train_resolved(args.preset, preset, args.out_dir);
}

// --- eval --------------------------------------------------------------------

int run_eval_resolved(const std::string& checkpoint_path,
                      const std::string& dataset_path, int context_frames,
                      long long limit, const std::string& out_dir) {
  vpn::Checkpoint ck = vpn::read_checkpoint(checkpoint_path);
  vpn::Dataset ds = vpn::read_dataset(dataset_path);
  vpn::ModelParams model = load_model(ck);

  if (limit > 0 && limit < static_cast<long long>(ds.sequences.size())) {
    ds.sequences.resize(static_cast<std::size_t>(limit));
  }
  const int context =
      context_frames >= 0 ? context_frames : ds.config.frames / 2;

  vpn::EvalReport report = vpn::eval_loop(model, ds, context);

  ensure_dir(out_dir);
  json body = {{"nats_per_frame", report.nats_per_frame},
               {"lower_bound", report.lower_bound},
               {"gap", report.gap},
               {"context_frames", context},
               {"sequences", ds.sequences.size()}};
  {
    std::ofstream out(join_path(out_dir, "eval.json"));
    out << body.dump(2) << "\n";
  }

  json config = {{"checkpoint", fs::absolute(checkpoint_path).string()},
                 {"dataset", fs::absolute(dataset_path).string()},
                 {"context_frames", context},
                 {"limit", limit}};
  write_command_manifest(out_dir, "eval", config, 0, {"eval.json"}, {});

  std::printf("%s\n", body.dump(2).c_str());
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::string dataset;
  int context = -1;      // <0: half the dataset's frames
  long long limit = 0;   // 0: evaluate every sequence
  std::string out_dir = default_out_dir();
};

int run_eval(const EvalArgs& args) {
  return run_eval_resolved(args.checkpoint, args.dataset, args.context,
                           args.limit, args.out_dir);
}

// --- sample ------------------------------------------------------------------

int run_sample_resolved(const std::string& checkpoint_path,
                        const std::string& dataset_path, int context_frames,
                        int predicted_frames, int sequences,
                        int num_continuations, std::uint64_t seed,
                        const std::string& out_dir) {
  vpn::Checkpoint ck = vpn::read_checkpoint(checkpoint_path);
  vpn::Dataset ds = vpn::read_dataset(dataset_path);
  vpn::ModelParams model = load_model(ck);

  if (ds.sequences.empty()) {
    throw std::runtime_error("sample: dataset has no sequences");
  }
  const int frames = ds.config.frames;
  const int context = context_frames >= 0 ? context_frames : frames / 2;
  const int predicted =
      predicted_frames >= 0 ? predicted_frames : frames - context;
  if (context < 1 || predicted < 1 || context + predicted > frames) {
    throw std::runtime_error(
        "sample: need 1 <= context, 1 <= predicted, context + predicted <= " +
        std::to_string(frames));
  }
  const int count =
      std::min<int>(sequences, static_cast<int>(ds.sequences.size()));
  if (num_continuations < 1) {
    throw std::runtime_error("sample: --num-continuations must be at least 1");
  }

  ensure_dir(out_dir);
  std::vector<std::string> artifacts;
  json index = json::array();

  for (int s = 0; s < count; ++s) {
    const vpn::VideoSequence& seq = ds.sequences[static_cast<std::size_t>(s)];
    vpn::Conditioning cond;
    const vpn::Conditioning* cond_ptr = nullptr;
    if (model.config.conditioned) {
      if (!seq.conditioned()) {
        throw std::runtime_error(
            "sample: the model is action-conditioned but the dataset carries "
            "no actions");
      }
      cond = vpn::make_conditioning(seq, context);
      cond_ptr = &cond;
    }

    const std::string prefix = "seq" + format_index("%03lld", s);
    json entry = {{"sequence", s},
                  {"context_frames", context},
                  {"predicted_frames", predicted}};
    json ctx_files = json::array(), true_files = json::array();
    for (int t = 0; t < context; ++t) {
      std::size_t before = artifacts.size();
      export_frame_pgms(out_dir, prefix + "-ctx" + format_index("%02lld", t),
                        seq, t, artifacts);
      for (std::size_t a = before; a < artifacts.size(); ++a) {
        ctx_files.push_back(artifacts[a]);
      }
    }
    for (int t = context; t < context + predicted; ++t) {
      std::size_t before = artifacts.size();
      export_frame_pgms(out_dir, prefix + "-true" + format_index("%02lld", t),
                        seq, t, artifacts);
      for (std::size_t a = before; a < artifacts.size(); ++a) {
        true_files.push_back(artifacts[a]);
      }
    }
    entry["context_files"] = ctx_files;
    entry["truth_files"] = true_files;

    json runs = json::array();
    for (int r = 0; r < num_continuations; ++r) {
      vpn::Rng rng(vpn::Rng::derive(
          seed, "sample",
          static_cast<std::uint64_t>(s) * 100003ull +
              static_cast<std::uint64_t>(r)));
      vpn::Continuation cont =
          vpn::generate_continuation(model, seq, context, predicted, cond_ptr,
                                     rng);
      json gen_files = json::array();
      for (int t = context; t < context + predicted; ++t) {
        std::size_t before = artifacts.size();
        export_frame_pgms(out_dir,
                          prefix + "-run" + std::to_string(r) + "-gen" +
                              format_index("%02lld", t),
                          cont.video, t, artifacts);
        for (std::size_t a = before; a < artifacts.size(); ++a) {
          gen_files.push_back(artifacts[a]);
        }
      }
      runs.push_back({{"run", r},
                      {"log_prob", cont.log_prob},
                      {"generated_files", gen_files}});
    }
    entry["continuations"] = runs;
    index.push_back(entry);
  }

  {
    std::ofstream out(join_path(out_dir, "index.json"));
    out << index.dump(2) << "\n";
  }
  artifacts.push_back("index.json");

  json config = {{"checkpoint", fs::absolute(checkpoint_path).string()},
                 {"dataset", fs::absolute(dataset_path).string()},
                 {"context_frames", context},
                 {"predicted_frames", predicted},
                 {"sequences", count},
                 {"num_continuations", num_continuations}};
  write_command_manifest(out_dir, "sample", config, seed, artifacts, {});

  std::printf("sample: %d sequence(s) x %d continuation(s), %d context + %d generated frame(s) each, in %s\n",
              count, num_continuations, context, predicted, out_dir.c_str());
  return kExitOk;
}

struct SampleArgs {
  std::string checkpoint;
  std::string dataset;
  int context = -1;  // <0: half the dataset's frames
  int frames = -1;   // <0: the rest of the sequence
  int sequences = 1;
  int num_continuations = 1;
  long long seed = 1;
  std::string out_dir = default_out_dir();
};

int run_sample(const SampleArgs& args) {
  return run_sample_resolved(args.checkpoint, args.dataset, args.context,
                             args.frames, args.sequences,
                             args.num_continuations,
                             static_cast<std::uint64_t>(args.seed),
                             args.out_dir);
}

// --- probe -------------------------------------------------------------------

struct ProbeArgs {
  bool causality = false;
  bool baseline_independence = false;
  bool receptive_field = false;
  bool gradcheck = false;
  bool normalization = false;
  bool all = false;
  int size = 6;
  int frames = 3;
  int channels = 3;
  std::string dilation = "on";
  long long seed = 1;
  std::string out_dir = default_out_dir();
};

// Small but fully general model for the perturbation probes: every color
// group, masked layer, and injection seam is exercised.
vpn::ModelConfig probe_model_config(int channels) {
  vpn::ModelConfig cfg;
  cfg.kind = vpn::ModelKind::vpn;
  cfg.head = vpn::HeadKind::softmax256;
  cfg.block_kind = vpn::BlockKind::rmb;
  cfg.encoder_blocks = 1;
  cfg.decoder_blocks = 1;
  cfg.color_channels = channels;
  cfg.block_width = channels == 3 ? 6 : 8;
  cfg.lstm_channels = 4;
  cfg.top_channels = cfg.block_width;
  return cfg;
}

int run_probe_resolved(const ProbeArgs& args) {
  bool any_selected = args.causality || args.baseline_independence ||
                      args.receptive_field || args.gradcheck ||
                      args.normalization || args.all;
  if (!any_selected) {
    std::fprintf(stderr,
                 "probe: select at least one of --causality, "
                 "--baseline-independence, --receptive-field, --gradcheck, "
                 "--normalization, or pass --all\n");
    return kExitUsage;
  }
  const bool run_causality = args.causality || args.all;
  const bool run_baseline = args.baseline_independence || args.all;
  const bool run_rf = args.receptive_field || args.all;
  const bool run_gradcheck = args.gradcheck || args.all;
  const bool run_normalization = args.normalization || args.all;
  const std::uint64_t seed = static_cast<std::uint64_t>(args.seed);

  bool all_passed = true;
  json report = json::object();
  auto verdict = [&](bool passed) {
    all_passed = all_passed && passed;
    return passed ? "PASS" : "FAIL";
  };

  if (run_causality) {
    vpn::CausalityResult r = vpn::causality_probe(
        probe_model_config(args.channels), args.size, args.frames, seed);
    std::printf(
        "%s causality: %lld perturbation(s), %lld leaked coordinate(s), "
        "later-frame potency %s (%.2fs)\n",
        verdict(r.passed()), r.perturbations, r.leaked_coordinates,
        r.later_changed ? "yes" : "NO", r.seconds);
    report["causality"] = {{"perturbations", r.perturbations},
                           {"leaked_coordinates", r.leaked_coordinates},
                           {"later_changed", r.later_changed},
                           {"seconds", r.seconds},
                           {"passed", r.passed()}};
  }
  if (run_baseline) {
    vpn::ModelConfig cfg = probe_model_config(args.channels);
    cfg.kind = vpn::ModelKind::baseline;
    vpn::CausalityResult r =
        vpn::baseline_independence_probe(cfg, args.size, args.frames, seed);
    std::printf(
        "%s baseline-independence: %lld perturbation(s), %lld leaked "
        "coordinate(s), later-frame potency %s (%.2fs)\n",
        verdict(r.passed()), r.perturbations, r.leaked_coordinates,
        r.later_changed ? "yes" : "NO", r.seconds);
    report["baseline_independence"] = {
        {"perturbations", r.perturbations},
        {"leaked_coordinates", r.leaked_coordinates},
        {"later_changed", r.later_changed},
        {"seconds", r.seconds},
        {"passed", r.passed()}};
  }
  if (run_rf) {
    const bool dilated = args.dilation != "off";
    // The footprint of the dilated stack spans 123 pixels; measure on a grid
    // wide enough to contain it regardless of the --size flag.
    const int grid = std::max(args.size, 128);
    vpn::ReceptiveFieldResult r = vpn::receptive_field_probe(dilated, grid, seed);
    std::printf(
        "%s receptive-field (dilation %s): measured %dx%d, analytic width %d, "
        "%lld nonzero outside, centered %s\n",
        verdict(r.passed()), dilated ? "on" : "off", r.measured_rows,
        r.measured_cols, r.expected_width, r.nonzero_outside,
        r.centered ? "yes" : "NO");
    report["receptive_field"] = {{"dilation", dilated ? "on" : "off"},
                                 {"measured_rows", r.measured_rows},
                                 {"measured_cols", r.measured_cols},
                                 {"expected_width", r.expected_width},
                                 {"nonzero_outside", r.nonzero_outside},
                                 {"centered", r.centered},
                                 {"passed", r.passed()}};
  }
  if (run_gradcheck) {
    vpn::GradcheckResult r = vpn::gradcheck_probe(seed);
    std::printf(
        "%s gradcheck: %zu circuit(s), %zu failed, max relative error "
        "%.3e (tolerance %.0e)\n",
        verdict(r.passed()), r.checked.size(), r.failed.size(),
        r.max_rel_error, r.tolerance);
    report["gradcheck"] = {{"checked", r.checked},
                           {"failed", r.failed},
                           {"max_rel_error", r.max_rel_error},
                           {"tolerance", r.tolerance},
                           {"passed", r.passed()}};
  }
  if (run_normalization) {
    vpn::NormalizationResult r = vpn::normalization_probe(seed);
    std::printf(
        "%s normalization: worst slice error %.3e, enumeration error %.3e "
        "(tolerance %.0e)\n",
        verdict(r.passed()), r.worst_slice_error, r.enumeration_error,
        r.tolerance);
    report["normalization"] = {{"worst_slice_error", r.worst_slice_error},
                               {"enumeration_error", r.enumeration_error},
                               {"tolerance", r.tolerance},
                               {"passed", r.passed()}};
  }

  report["all_passed"] = all_passed;
  ensure_dir(args.out_dir);
  {
    // One line so the log survives the replay comparison's line-wise parse.
    std::ofstream out(join_path(args.out_dir, "probe-report.json"));
    out << report.dump() << "\n";
  }
  json config = {{"causality", run_causality},
                 {"baseline_independence", run_baseline},
                 {"receptive_field", run_rf},
                 {"gradcheck", run_gradcheck},
                 {"normalization", run_normalization},
                 {"size", args.size},
                 {"frames", args.frames},
                 {"channels", args.channels},
                 {"dilation", args.dilation},
                 {"seed", args.seed}};
  // The report carries wall-clock fields, so it is a log, not an artifact.
  write_command_manifest(args.out_dir, "probe", config, seed, {},
                         {"probe-report.json"});

  return all_passed ? kExitOk : kExitProbeFailure;
}

// --- replay ------------------------------------------------------------------

struct ReplayArgs {
  std::string manifest;
  std::string out_dir;
  bool verify = true;
};

// Strips wall-clock fields so logs compare on content only.
void erase_wall_fields(json& j) {
  if (j.is_object()) {
    j.erase("wall_ms");
    j.erase("seconds");
    for (auto& [key, value] : j.items()) {
      (void)key;
      erase_wall_fields(value);
    }
  } else if (j.is_array()) {
    for (auto& value : j) erase_wall_fields(value);
  }
}

std::vector<std::string> nonempty_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open log '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

bool files_identical(const std::string& a, const std::string& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  if (!fa || !fb) return false;
  std::ostringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  return sa.str() == sb.str();
}

bool logs_equivalent(const std::string& a, const std::string& b) {
  std::vector<std::string> la = nonempty_lines(a), lb = nonempty_lines(b);
  if (la.size() != lb.size()) return false;
  for (std::size_t i = 0; i < la.size(); ++i) {
    json ja = json::parse(la[i]), jb = json::parse(lb[i]);
    erase_wall_fields(ja);
    erase_wall_fields(jb);
    if (ja != jb) return false;
  }
  return true;
}

int run_replay(const ReplayArgs& args) {
  vpn::RunManifest m = vpn::read_manifest(args.manifest);
  json config = json::parse(m.config_json);
  const std::string original_dir =
      fs::path(args.manifest).parent_path().string();

  int code;
  if (m.command == "gen-data") {
    code = run_gen_data_resolved(
        config.at("preset_name").get<std::string>(),
        vpn::data_config_from_json(config.at("data").dump()),
        config.at("export_pgm").get<int>(), args.out_dir);
  } else if (m.command == "train") {
    code = run_train_resolved(config.at("preset_name").get<std::string>(),
                              vpn::preset_from_json(config.at("preset").dump()),
                              args.out_dir);
  } else if (m.command == "eval") {
    code = run_eval_resolved(config.at("checkpoint").get<std::string>(),
                             config.at("dataset").get<std::string>(),
                             config.at("context_frames").get<int>(),
                             config.at("limit").get<long long>(), args.out_dir);
  } else if (m.command == "sample") {
    code = run_sample_resolved(config.at("checkpoint").get<std::string>(),
                               config.at("dataset").get<std::string>(),
                               config.at("context_frames").get<int>(),
                               config.at("predicted_frames").get<int>(),
                               config.at("sequences").get<int>(),
                               config.at("num_continuations").get<int>(),
                               m.seed, args.out_dir);
  } else if (m.command == "probe") {
    ProbeArgs p;
    p.causality = config.at("causality").get<bool>();
    p.baseline_independence = config.at("baseline_independence").get<bool>();
    p.receptive_field = config.at("receptive_field").get<bool>();
    p.gradcheck = config.at("gradcheck").get<bool>();
    p.normalization = config.at("normalization").get<bool>();
    p.size = config.at("size").get<int>();
    p.frames = config.at("frames").get<int>();
    p.channels = config.at("channels").get<int>();
    p.dilation = config.at("dilation").get<std::string>();
    p.seed = config.at("seed").get<long long>();
    p.out_dir = args.out_dir;
    code = run_probe_resolved(p);
  } else {
    throw std::runtime_error("replay: unknown command '" + m.command +
                             "' in manifest");
  }
  if (code != kExitOk) return code;

  if (!args.verify) {
    std::printf("replay: re-executed '%s' into %s (verification skipped)\n",
                m.command.c_str(), args.out_dir.c_str());
    return kExitOk;
  }

  std::vector<std::string> divergent;
  for (const std::string& name : m.artifacts) {
    if (!files_identical(join_path(original_dir, name),
                         join_path(args.out_dir, name))) {
      divergent.push_back(name);
    }
  }
  for (const std::string& name : m.logs) {
    if (!logs_equivalent(join_path(original_dir, name),
                         join_path(args.out_dir, name))) {
      divergent.push_back(name + " (log)");
    }
  }
  if (!divergent.empty()) {
    std::fprintf(stderr, "replay: %zu file(s) diverge from the manifest run:\n",
                 divergent.size());
    for (const std::string& name : divergent) {
      std::fprintf(stderr, "  %s\n", name.c_str());
    }
    return kExitMismatch;
  }
  std::printf(
      "replay: '%s' reproduced — %zu artifact(s) bit-identical, %zu log(s) "
      "equivalent\n",
      m.command.c_str(), m.artifacts.size(), m.logs.size());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Video pixel network tool: exact autoregressive video modeling at desk "
      "scale.\nOutput directory defaults to $VPN_OUT_DIR, falling back to "
      "./out."};
  app.require_subcommand(1);

  GenDataArgs gen_args;
  TrainArgs train_args;
  EvalArgs eval_args;
  SampleArgs sample_args;
  ProbeArgs probe_args;
  ReplayArgs replay_args;

  const std::vector<std::string> presets = vpn::preset_names();

  CLI::App* gen = app.add_subcommand(
      "gen-data", "Generate a deterministic dataset (VSEQ) plus manifest");
  gen->add_option("--preset", gen_args.preset, "Config bundle to draw from")
      ->check(CLI::IsMember(presets))
      ->capture_default_str();
  gen->add_option("--seed", gen_args.seed, "Override the data seed")
      ->check(CLI::NonNegativeNumber);
  gen->add_option("--count", gen_args.count, "Override the sequence count")
      ->check(CLI::NonNegativeNumber);
  gen->add_option("--export-pgm", gen_args.export_pgm,
                  "Also write the first k frames of sequence 0 as PGM")
      ->check(CLI::NonNegativeNumber);
  gen->add_option("--out", gen_args.out_dir, "Output directory")
      ->capture_default_str();

  CLI::App* train = app.add_subcommand(
      "train", "Train a model; writes checkpoints, metrics, and a manifest");
  train->add_option("--preset", train_args.preset, "Config bundle")
      ->check(CLI::IsMember(presets))
      ->capture_default_str();
  train->add_option("--seed", train_args.seed, "Override the training seed")
      ->check(CLI::NonNegativeNumber);
  train->add_option("--steps", train_args.steps, "Override the step count")
      ->check(CLI::NonNegativeNumber);
  train->add_option("--model", train_args.model,
                    "Decoder family: masked (vpn) or non-masked (baseline)")
      ->check(CLI::IsMember({"vpn", "baseline"}));
  train->add_option("--block", train_args.block, "Residual block kind")
      ->check(CLI::IsMember({"rmb", "relu"}));
  train->add_option("--dilation", train_args.dilation,
                    "Keep or drop the encoder dilation scheme")
      ->check(CLI::IsMember({"on", "off"}));
  train->add_option("--out", train_args.out_dir, "Output directory")
      ->capture_default_str();

  CLI::App* eval = app.add_subcommand(
      "eval", "Exact test-set likelihood: {nats_per_frame, lower_bound, gap}");
  eval->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint path")
      ->required();
  eval->add_option("--dataset", eval_args.dataset, "VSEQ dataset path")
      ->required();
  eval->add_option("--context", eval_args.context,
                   "Context frames (default: half the sequence)");
  eval->add_option("--limit", eval_args.limit,
                   "Evaluate only the first N sequences (0: all)")
      ->check(CLI::NonNegativeNumber);
  eval->add_option("--out", eval_args.out_dir, "Output directory")
      ->capture_default_str();

  CLI::App* sample = app.add_subcommand(
      "sample",
      "Sample continuations; writes context/generated/truth PGMs + index");
  sample->add_option("--checkpoint", sample_args.checkpoint, "Checkpoint path")
      ->required();
  sample->add_option("--dataset", sample_args.dataset, "VSEQ dataset path")
      ->required();
  sample->add_option("--context", sample_args.context,
                     "Context frames (default: half the sequence)");
  sample->add_option("--frames", sample_args.frames,
                     "Frames to generate (default: the rest)");
  sample->add_option("--sequences", sample_args.sequences,
                     "How many test sequences to continue")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sample->add_option("--num-continuations", sample_args.num_continuations,
                     "Continuations drawn per context")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sample->add_option("--seed", sample_args.seed, "Sampling seed")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  sample->add_option("--out", sample_args.out_dir, "Output directory")
      ->capture_default_str();

  CLI::App* probe = app.add_subcommand(
      "probe", "Structural diagnostics on freshly initialized models");
  probe->add_flag("--causality", probe_args.causality,
                  "Exhaustive masked-decoder perturbation probe");
  probe->add_flag("--baseline-independence", probe_args.baseline_independence,
                  "Within-frame invariance of the non-masked decoder");
  probe->add_flag("--receptive-field", probe_args.receptive_field,
                  "Gradient-sparsity footprint vs the analytic width");
  probe->add_flag("--gradcheck", probe_args.gradcheck,
                  "Finite-difference check of every block");
  probe->add_flag("--normalization", probe_args.normalization,
                  "Per-pixel distributions sum to one");
  probe->add_flag("--all", probe_args.all, "Run every probe");
  probe->add_option("--size", probe_args.size, "Frame edge for perturbation probes")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  probe->add_option("--frames", probe_args.frames,
                    "Frames for perturbation probes")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  probe->add_option("--channels", probe_args.channels,
                    "Color channels for perturbation probes (1 or 3)")
      ->check(CLI::IsMember({1, 3}))
      ->capture_default_str();
  probe->add_option("--dilation", probe_args.dilation,
                    "Receptive-field probe: dilated or plain encoder")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  probe->add_option("--seed", probe_args.seed, "Model-initialization seed")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  probe->add_option("--out", probe_args.out_dir, "Output directory")
      ->capture_default_str();

  CLI::App* replay = app.add_subcommand(
      "replay", "Re-execute a recorded run and verify its artifacts");
  replay->add_option("--manifest", replay_args.manifest, "manifest.json path")
      ->required();
  replay->add_option("--out", replay_args.out_dir,
                     "Directory for the re-executed run")
      ->required();
  replay->add_flag("--verify,!--no-verify", replay_args.verify,
                   "Compare re-executed artifacts against the originals")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return run_gen_data(gen_args);
    if (train->parsed()) return run_train(train_args);
    if (eval->parsed()) return run_eval(eval_args);
    if (sample->parsed()) return run_sample(sample_args);
    if (probe->parsed()) return run_probe_resolved(probe_args);
    if (replay->parsed()) return run_replay(replay_args);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitMismatch;
  } catch (const std::runtime_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitMismatch;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kExitUsage;
}
