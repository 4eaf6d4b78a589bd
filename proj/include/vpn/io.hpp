#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vpn/config.hpp"
#include "vpn/data.hpp"
#include "vpn/tensor.hpp"

namespace vpn {

inline constexpr const char* kToolVersion = "1.0.0";

// --- checkpoints -------------------------------------------------------------
// Layout: magic "VPNK", format version u32, length-prefixed ModelConfig JSON,
// then one record per parameter: u32 name length, name bytes, u32 rank,
// u32 extents, little-endian 64-bit floats. Round-trips bit-exactly.

struct Checkpoint {
  ModelConfig config;
  std::vector<std::pair<std::string, Tensor>> params;  // in written order
};

void write_checkpoint(const std::string& path, const ModelConfig& config,
                      const std::vector<std::pair<std::string, Tensor>>& params);
Checkpoint read_checkpoint(const std::string& path);

// --- datasets ----------------------------------------------------------------
// Layout: magic "VSEQ", version u32, length-prefixed DataConfig JSON echo,
// u8 conditioning flag, u32 sequence count and extents, then raw unsigned-byte
// frames per sequence, followed by per-frame state and action vectors
// (5 little-endian doubles each) when conditioned.

void write_dataset(const std::string& path, const Dataset& dataset);
Dataset read_dataset(const std::string& path);

// --- images ------------------------------------------------------------------
// Binary PGM (P5), maxval 255.

void write_pgm(const std::string& path, int height, int width,
               const std::uint8_t* gray);
std::vector<std::uint8_t> read_pgm(const std::string& path, int& height,
                                   int& width);

// --- run records -------------------------------------------------------------

// One JSON object per line: {"step": s, "loss_nats_per_frame": l, "lr": r,
// "wall_ms": w}.
void append_metrics_line(const std::string& path, long long step,
                         double loss_nats_per_frame, double lr, double wall_ms);

// The manifest lists everything needed to reproduce a command: the command
// name, its fully resolved configuration, the seed, and every artifact
// written. Artifacts are bit-reproducible; log files may differ in wall-clock
// fields only.
struct RunManifest {
  std::string command;
  std::string config_json;  // fully resolved configuration (JSON object text)
  std::uint64_t seed = 0;
  std::vector<std::string> artifacts;
  std::vector<std::string> logs;
  std::string version = kToolVersion;
};

void write_manifest(const std::string& path, const RunManifest& manifest);
RunManifest read_manifest(const std::string& path);

}  // namespace vpn
