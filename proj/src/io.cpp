#include "vpn/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace vpn {

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ofstream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

class Reader {
 public:
  Reader(const std::string& path, const char* who)
      : in_(path, std::ios::binary), path_(path), who_(who) {
    if (!in_) fail("cannot open file");
  }

  std::uint32_t u32() {
    unsigned char b[4];
    pull(b, 4, "a 4-byte field");
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
           (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
  }

  std::uint8_t u8() {
    unsigned char b;
    pull(&b, 1, "a 1-byte field");
    return b;
  }

  double f64() {
    unsigned char b[8];
    pull(b, 8, "an 8-byte float");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= std::uint64_t(b[i]) << (8 * i);
    return std::bit_cast<double>(bits);
  }

  std::string bytes(std::size_t n, const char* what) {
    std::string s(n, '\0');
    pull(s.data(), n, what);
    return s;
  }

  void raw(void* dst, std::size_t n, const char* what) { pull(dst, n, what); }

  bool at_eof() {
    in_.peek();
    return in_.eof();
  }

  std::size_t offset() const { return offset_; }

  [[noreturn]] void fail(const std::string& message) const {
    throw std::runtime_error(std::string(who_) + ": " + path_ + ": " + message +
                             " (at byte " + std::to_string(offset_) + ")");
  }

 private:
  void pull(void* dst, std::size_t n, const char* what) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    const auto got = static_cast<std::size_t>(in_.gcount());
    offset_ += got;
    if (got != n) {
      fail("truncated while reading " + std::string(what) + ", expected " +
           std::to_string(n - got) + " more bytes");
    }
  }

  std::ifstream in_;
  std::string path_;
  const char* who_;
  std::size_t offset_ = 0;
};

std::ofstream open_out(const std::string& path, const char* who) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error(std::string(who) + ": cannot write " + path);
  }
  return out;
}

}  // namespace

// --- checkpoints -------------------------------------------------------------

void write_checkpoint(const std::string& path, const ModelConfig& config,
                      const std::vector<std::pair<std::string, Tensor>>& params) {
  auto out = open_out(path, "write_checkpoint");
  out.write("VPNK", 4);
  put_u32(out, 1);
  const std::string cfg = to_json(config);
  put_u32(out, static_cast<std::uint32_t>(cfg.size()));
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  for (const auto& [name, tensor] : params) {
    if (!tensor.defined()) {
      throw std::invalid_argument("write_checkpoint: parameter '" + name +
                                  "' is undefined");
    }
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
    for (int d : tensor.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : tensor.values()) put_f64(out, v);
  }
  if (!out) throw std::runtime_error("write_checkpoint: write failed for " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  Reader r(path, "read_checkpoint");
  if (r.bytes(4, "the magic") != "VPNK") r.fail("bad magic, expected \"VPNK\"");
  const std::uint32_t version = r.u32();
  if (version != 1) r.fail("unsupported format version " + std::to_string(version));
  const std::uint32_t cfg_len = r.u32();
  Checkpoint ck;
  ck.config = model_config_from_json(r.bytes(cfg_len, "the configuration"));
  while (!r.at_eof()) {
    const std::uint32_t name_len = r.u32();
    std::string name = r.bytes(name_len, "a parameter name");
    const std::uint32_t rank = r.u32();
    if (rank > 5) r.fail("parameter '" + name + "' claims rank " + std::to_string(rank));
    Shape shape(rank);
    long long numel = 1;
    for (auto& d : shape) {
      d = static_cast<int>(r.u32());
      numel *= d;
    }
    std::vector<double> values(static_cast<std::size_t>(numel));
    for (auto& v : values) v = r.f64();
    ck.params.emplace_back(std::move(name),
                           Tensor::from_data(std::move(shape), std::move(values)));
  }
  return ck;
}

// --- datasets ----------------------------------------------------------------

void write_dataset(const std::string& path, const Dataset& dataset) {
  const auto& cfg = dataset.config;
  const bool conditioned =
      !dataset.sequences.empty() && dataset.sequences.front().conditioned();
  for (const auto& seq : dataset.sequences) {
    if (seq.frames != cfg.frames || seq.height != cfg.frame_size ||
        seq.width != cfg.frame_size) {
      throw std::invalid_argument(
          "write_dataset: sequence extents disagree with the configuration");
    }
    if (seq.conditioned() != conditioned) {
      throw std::invalid_argument(
          "write_dataset: mixed conditioned and unconditioned sequences");
    }
  }
  auto out = open_out(path, "write_dataset");
  out.write("VSEQ", 4);
  put_u32(out, 1);
  const std::string cfg_text = to_json(cfg);
  put_u32(out, static_cast<std::uint32_t>(cfg_text.size()));
  out.write(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));
  out.put(conditioned ? 1 : 0);
  put_u32(out, static_cast<std::uint32_t>(dataset.sequences.size()));
  const int channels =
      dataset.sequences.empty() ? 1 : dataset.sequences.front().channels;
  put_u32(out, static_cast<std::uint32_t>(cfg.frames));
  put_u32(out, static_cast<std::uint32_t>(cfg.frame_size));
  put_u32(out, static_cast<std::uint32_t>(cfg.frame_size));
  put_u32(out, static_cast<std::uint32_t>(channels));
  for (const auto& seq : dataset.sequences) {
    out.write(reinterpret_cast<const char*>(seq.pixels.data()),
              static_cast<std::streamsize>(seq.pixels.size()));
    if (conditioned) {
      for (int t = 0; t < seq.frames; ++t) {
        for (double v : seq.states[static_cast<std::size_t>(t)]) put_f64(out, v);
        for (double v : seq.actions[static_cast<std::size_t>(t)]) put_f64(out, v);
      }
    }
  }
  if (!out) throw std::runtime_error("write_dataset: write failed for " + path);
}

Dataset read_dataset(const std::string& path) {
  Reader r(path, "read_dataset");
  if (r.bytes(4, "the magic") != "VSEQ") r.fail("bad magic, expected \"VSEQ\"");
  const std::uint32_t version = r.u32();
  if (version != 1) r.fail("unsupported format version " + std::to_string(version));
  Dataset ds;
  const std::uint32_t cfg_len = r.u32();
  ds.config = data_config_from_json(r.bytes(cfg_len, "the configuration"));
  const bool conditioned = r.u8() != 0;
  const std::uint32_t count = r.u32();
  const int frames = static_cast<int>(r.u32());
  const int height = static_cast<int>(r.u32());
  const int width = static_cast<int>(r.u32());
  const int channels = static_cast<int>(r.u32());
  ds.sequences.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    VideoSequence seq;
    seq.frames = frames;
    seq.height = height;
    seq.width = width;
    seq.channels = channels;
    seq.pixels.resize(static_cast<std::size_t>(frames) * height * width * channels);
    r.raw(seq.pixels.data(), seq.pixels.size(), "frame pixels");
    if (conditioned) {
      seq.states.resize(static_cast<std::size_t>(frames));
      seq.actions.resize(static_cast<std::size_t>(frames));
      for (int t = 0; t < frames; ++t) {
        for (auto& v : seq.states[static_cast<std::size_t>(t)]) v = r.f64();
        for (auto& v : seq.actions[static_cast<std::size_t>(t)]) v = r.f64();
      }
    }
    ds.sequences.push_back(std::move(seq));
  }
  if (!r.at_eof()) r.fail("trailing bytes after the last sequence");
  return ds;
}

// --- images ------------------------------------------------------------------

void write_pgm(const std::string& path, int height, int width,
               const std::uint8_t* gray) {
  auto out = open_out(path, "write_pgm");
  out << "P5\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(gray),
            static_cast<std::streamsize>(height) * width);
  if (!out) throw std::runtime_error("write_pgm: write failed for " + path);
}

std::vector<std::uint8_t> read_pgm(const std::string& path, int& height,
                                   int& width) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_pgm: cannot open " + path);
  std::string magic;
  int maxval = 0;
  in >> magic >> width >> height >> maxval;
  if (magic != "P5" || maxval != 255 || height <= 0 || width <= 0) {
    throw std::runtime_error("read_pgm: " + path + " is not a maxval-255 P5 file");
  }
  in.get();  // single whitespace after the header
  std::vector<std::uint8_t> data(static_cast<std::size_t>(height) * width);
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size()));
  if (static_cast<std::size_t>(in.gcount()) != data.size()) {
    throw std::runtime_error("read_pgm: " + path + " truncated");
  }
  return data;
}

// --- run records -------------------------------------------------------------

void append_metrics_line(const std::string& path, long long step,
                         double loss_nats_per_frame, double lr, double wall_ms) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("append_metrics_line: cannot write " + path);
  nlohmann::json j{{"step", step},
                   {"loss_nats_per_frame", loss_nats_per_frame},
                   {"lr", lr},
                   {"wall_ms", wall_ms}};
  out << j.dump() << "\n";
}

void write_manifest(const std::string& path, const RunManifest& manifest) {
  auto out = open_out(path, "write_manifest");
  nlohmann::json j{{"command", manifest.command},
                   {"config", nlohmann::json::parse(manifest.config_json)},
                   {"seed", manifest.seed},
                   {"artifacts", manifest.artifacts},
                   {"logs", manifest.logs},
                   {"version", manifest.version}};
  out << j.dump(2) << "\n";
}

RunManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_manifest: cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.config_json = j.at("config").dump();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.artifacts = j.at("artifacts").get<std::vector<std::string>>();
  m.logs = j.at("logs").get<std::vector<std::string>>();
  m.version = j.at("version").get<std::string>();
  return m;
}

}  // namespace vpn
