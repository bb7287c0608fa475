#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "gngode/errors.hpp"
#include "gngode/graph/session.hpp"
#include "gngode/numeric/tape.hpp"
#include "gngode/pipeline/config.hpp"

namespace gngode {

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointMagic = "gngode-checkpoint";

struct Checkpoint {
  int version = kCheckpointVersion;
  Vocabulary vocabulary;
  TrainConfig config;
  ParameterSet params;
};

// Layout:
//   gngode-checkpoint v1
//   vocabulary <n>          followed by n item keys, one per line
//   config <m>              followed by m key=value lines
//   parameters <p>          followed by p lines "<name> <rank> <dims...>"
//   payload <count>         followed by count little-endian doubles and nothing else
inline void save_checkpoint(const Checkpoint& ckpt, std::ostream& out) {
  out << kCheckpointMagic << " v" << ckpt.version << '\n';
  out << "vocabulary " << ckpt.vocabulary.size() << '\n';
  for (const auto& k : ckpt.vocabulary.keys()) out << k << '\n';
  const auto cfg = config_values(ckpt.config);
  out << "config " << cfg.size() << '\n';
  for (const auto& [k, v] : cfg) out << k << '=' << v << '\n';
  out << "parameters " << ckpt.params.size() << '\n';
  std::size_t total = 0;
  for (const auto& [name, a] : ckpt.params) {
    out << name << ' ' << a.rank();
    for (std::size_t d : a.shape()) out << ' ' << d;
    out << '\n';
    total += a.size();
  }
  out << "payload " << total << '\n';
  for (const auto& [name, a] : ckpt.params) {
    for (double v : a.values()) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      char bytes[8];
      for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
      out.write(bytes, 8);
    }
  }
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ostringstream buf;
  save_checkpoint(ckpt, buf);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  const std::string bytes = buf.str();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint '" + path + "'");
}

namespace detail {

inline std::string read_header_line(std::istream& in, const char* what) {
  std::string line;
  if (!std::getline(in, line)) throw CheckpointCorrupt(std::string("checkpoint truncated before ") + what);
  return line;
}

inline std::size_t read_count(std::istream& in, const std::string& tag) {
  const std::string line = read_header_line(in, tag.c_str());
  if (line.rfind(tag + ' ', 0) != 0) throw CheckpointCorrupt("checkpoint: expected '" + tag + "' section");
  std::size_t n = 0;
  const std::string num = line.substr(tag.size() + 1);
  auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), n);
  if (ec != std::errc() || p != num.data() + num.size()) throw CheckpointCorrupt("checkpoint: bad count for " + tag);
  return n;
}

}  // namespace detail

/// Reads a checkpoint; nothing is returned unless the whole file is valid.
inline Checkpoint load_checkpoint(std::istream& in) {
  const std::string magic = detail::read_header_line(in, "magic");
  const std::string prefix = std::string(kCheckpointMagic) + " v";
  if (magic.rfind(prefix, 0) != 0) throw CheckpointCorrupt("not a gngode checkpoint");
  const std::string version = magic.substr(prefix.size());
  if (version != std::to_string(kCheckpointVersion)) {
    throw CheckpointIncompatible("checkpoint version " + version + " is not supported (expected " +
                                 std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint ck;
  const std::size_t nvocab = detail::read_count(in, "vocabulary");
  for (std::size_t i = 0; i < nvocab; ++i) {
    const std::string key = detail::read_header_line(in, "vocabulary entry");
    if (ck.vocabulary.add(key) != i) throw CheckpointCorrupt("checkpoint: duplicate vocabulary key '" + key + "'");
  }
  const std::size_t ncfg = detail::read_count(in, "config");
  for (std::size_t i = 0; i < ncfg; ++i) {
    const std::string line = detail::read_header_line(in, "config entry");
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw CheckpointCorrupt("checkpoint: malformed config line");
    try {
      apply_config_value(ck.config, line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw CheckpointIncompatible(std::string("checkpoint config: ") + e.what());
    }
  }
  const std::size_t nparams = detail::read_count(in, "parameters");
  std::vector<std::pair<std::string, Shape>> layout;
  std::size_t total = 0;
  for (std::size_t i = 0; i < nparams; ++i) {
    std::istringstream line(detail::read_header_line(in, "parameter header"));
    std::string name;
    std::size_t rank = 0;
    if (!(line >> name >> rank) || rank == 0) throw CheckpointCorrupt("checkpoint: malformed parameter header");
    Shape shape(rank);
    for (auto& d : shape)
      if (!(line >> d) || d == 0) throw CheckpointCorrupt("checkpoint: malformed shape for " + name);
    total += shape_size(shape);
    layout.emplace_back(std::move(name), std::move(shape));
  }
  if (detail::read_count(in, "payload") != total) throw CheckpointCorrupt("checkpoint: payload size disagrees with shapes");
  for (auto& [name, shape] : layout) {
    std::vector<double> data(shape_size(shape));
    for (double& v : data) {
      unsigned char bytes[8];
      if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw CheckpointCorrupt("checkpoint truncated in payload");
      std::uint64_t bits = 0;
      for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
      v = std::bit_cast<double>(bits);
    }
    ck.params.emplace(name, Array(shape, std::move(data)));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw CheckpointCorrupt("checkpoint has trailing bytes");
  return ck;
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  return load_checkpoint(in);
}

}  // namespace gngode
