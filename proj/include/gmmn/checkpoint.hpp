#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "gmmn/autoencoder.hpp"
#include "gmmn/network.hpp"

namespace gmmn {

// Binary layout (all integers little-endian; see docs/checkpoint_format.md):
//
//   char[8]  magic "GMMNCKPT"
//   u32      format version
//   u32      component tag
//   u32 n +  n bytes   RNG algorithm name
//   u32 n +  n bytes   metadata, "key=value\n" lines sorted by key
//   u32      layer count L
//   L x { u32 in_dim, u32 out_dim, u32 activation, f64 dropout_rate }
//   u64      update count
//   u64      payload value count P
//   P x f64  per layer: weights, bias, weight velocity, bias velocity

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::string_view kCheckpointMagic = "GMMNCKPT";

enum class Component : std::uint32_t { gmmn = 0, encoder = 1, decoder = 2 };

std::string_view to_string(Component c);

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::string rng_algorithm{Rng::algorithm};
  Component component = Component::gmmn;
  std::map<std::string, std::string> metadata;
  Network network;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
/// Throws DataError (bad_magic, version_mismatch, corrupt_length).
Checkpoint parse_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Writes encoder.ckpt and decoder.ckpt into dir.
void save_autoencoder(const std::filesystem::path& dir, const AutoEncoder& ae,
                      const std::map<std::string, std::string>& metadata = {});
AutoEncoder load_autoencoder(const std::filesystem::path& dir);

} // namespace gmmn
