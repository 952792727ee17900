#include "gmmn/checkpoint.hpp"

#include "byte_io.hpp"
#include "gmmn/data_io.hpp"

namespace gmmn {

std::string_view to_string(Component c) {
  switch (c) {
  case Component::gmmn:
    return "gmmn";
  case Component::encoder:
    return "encoder";
  case Component::decoder:
    return "decoder";
  }
  return "unknown";
}

namespace {

std::string encode_metadata(const std::map<std::string, std::string>& meta) {
  std::string out;
  for (const auto& [k, v] : meta) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw ConfigError("checkpoint metadata key/value may not contain '=' (keys) or newlines: " + k);
    }
    out += k + "=" + v + "\n";
  }
  return out;
}

std::map<std::string, std::string> decode_metadata(std::string_view text) {
  std::map<std::string, std::string> out;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    if (nl == std::string_view::npos) throw DataError(DataErrorCode::corrupt_length, "checkpoint: bad metadata");
    const auto line = text.substr(0, nl);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw DataError(DataErrorCode::corrupt_length, "checkpoint: bad metadata");
    out.emplace(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1)));
    text.remove_prefix(nl + 1);
  }
  return out;
}

std::uint32_t activation_code(Activation a) {
  switch (a) {
  case Activation::relu:
    return 0;
  case Activation::sigmoid:
    return 1;
  case Activation::linear:
    return 2;
  }
  return 3;
}

Activation activation_from_code(std::uint32_t c) {
  switch (c) {
  case 0:
    return Activation::relu;
  case 1:
    return Activation::sigmoid;
  case 2:
    return Activation::linear;
  default:
    throw DataError(DataErrorCode::corrupt_length, "checkpoint: unknown activation code " + std::to_string(c));
  }
}

template <typename M>
void put_values(detail::ByteWriter& w, const M& m) {
  for (Index i = 0; i < m.size(); ++i) w.f64le(m.data()[i]);
}

template <typename M>
void get_values(detail::ByteReader& r, M& m) {
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = r.f64le();
}

} // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  detail::ByteWriter w;
  w.bytes(kCheckpointMagic);
  w.u32le(ckpt.version);
  w.u32le(static_cast<std::uint32_t>(ckpt.component));
  w.u32le(static_cast<std::uint32_t>(ckpt.rng_algorithm.size()));
  w.bytes(ckpt.rng_algorithm);
  const std::string meta = encode_metadata(ckpt.metadata);
  w.u32le(static_cast<std::uint32_t>(meta.size()));
  w.bytes(meta);

  const auto& layers = ckpt.network.layers;
  w.u32le(static_cast<std::uint32_t>(layers.size()));
  std::uint64_t payload = 0;
  for (const auto& l : layers) {
    w.u32le(static_cast<std::uint32_t>(l.spec.in_dim));
    w.u32le(static_cast<std::uint32_t>(l.spec.out_dim));
    w.u32le(activation_code(l.spec.activation));
    w.f64le(l.spec.dropout_rate);
    payload += 2 * static_cast<std::uint64_t>(l.weights.size() + l.bias.size());
  }
  w.u64le(ckpt.network.update_count);
  w.u64le(payload);
  for (const auto& l : layers) {
    put_values(w, l.weights);
    put_values(w, l.bias);
    put_values(w, l.weight_velocity);
    put_values(w, l.bias_velocity);
  }
  return w.take();
}

Checkpoint parse_checkpoint(const std::string& bytes) {
  detail::ByteReader r(bytes, DataErrorCode::corrupt_length, "checkpoint");
  if (bytes.size() < kCheckpointMagic.size() || r.bytes(kCheckpointMagic.size()) != kCheckpointMagic) {
    throw DataError(DataErrorCode::bad_magic, "checkpoint: not a GMMN checkpoint (bad magic)");
  }
  Checkpoint ckpt;
  ckpt.version = r.u32le();
  if (ckpt.version != kCheckpointVersion) {
    throw DataError(DataErrorCode::version_mismatch, "checkpoint: format version " + std::to_string(ckpt.version) +
                                                         ", this build reads version " +
                                                         std::to_string(kCheckpointVersion));
  }
  const std::uint32_t component = r.u32le();
  if (component > 2) throw DataError(DataErrorCode::corrupt_length, "checkpoint: unknown component tag");
  ckpt.component = static_cast<Component>(component);
  ckpt.rng_algorithm = std::string(r.bytes(r.u32le()));
  ckpt.metadata = decode_metadata(r.bytes(r.u32le()));

  const std::uint32_t n_layers = r.u32le();
  std::vector<LayerSpec> specs;
  std::uint64_t expected = 0;
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    LayerSpec s;
    s.in_dim = r.u32le();
    s.out_dim = r.u32le();
    s.activation = activation_from_code(r.u32le());
    s.dropout_rate = r.f64le();
    expected += 2 * (static_cast<std::uint64_t>(s.in_dim) * static_cast<std::uint64_t>(s.out_dim) +
                     static_cast<std::uint64_t>(s.out_dim));
    specs.push_back(s);
  }
  const std::uint64_t updates = r.u64le();
  const std::uint64_t payload = r.u64le();
  if (payload != expected) {
    throw DataError(DataErrorCode::corrupt_length, "checkpoint: payload declares " + std::to_string(payload) +
                                                       " values but the layer table needs " +
                                                       std::to_string(expected));
  }
  if (r.remaining() != payload * 8) {
    throw DataError(DataErrorCode::corrupt_length, "checkpoint: expected " + std::to_string(payload * 8) +
                                                       " payload bytes, found " + std::to_string(r.remaining()));
  }
  try {
    ckpt.network = n_layers == 0 ? Network() : Network(specs);
  } catch (const std::invalid_argument& e) {
    throw DataError(DataErrorCode::corrupt_length, std::string("checkpoint: invalid layer table: ") + e.what());
  }
  ckpt.network.update_count = updates;
  for (auto& l : ckpt.network.layers) {
    get_values(r, l.weights);
    get_values(r, l.bias);
    get_values(r, l.weight_velocity);
    get_values(r, l.bias_velocity);
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_bytes(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return parse_checkpoint(read_file_bytes(path));
  } catch (const DataError& e) {
    if (e.code() == DataErrorCode::io) throw;
    throw DataError(e.code(), path.string() + ": " + e.what());
  }
}

void save_autoencoder(const std::filesystem::path& dir, const AutoEncoder& ae,
                      const std::map<std::string, std::string>& metadata) {
  ae.validate();
  Checkpoint enc{kCheckpointVersion, std::string(Rng::algorithm), Component::encoder, metadata, ae.encoder};
  Checkpoint dec{kCheckpointVersion, std::string(Rng::algorithm), Component::decoder, metadata, ae.decoder};
  save_checkpoint(dir / "encoder.ckpt", enc);
  save_checkpoint(dir / "decoder.ckpt", dec);
}

AutoEncoder load_autoencoder(const std::filesystem::path& dir) {
  Checkpoint enc = load_checkpoint(dir / "encoder.ckpt");
  Checkpoint dec = load_checkpoint(dir / "decoder.ckpt");
  if (enc.component != Component::encoder || dec.component != Component::decoder) {
    throw DataError(DataErrorCode::corrupt_length, "autoencoder checkpoints in " + dir.string() +
                                                       " carry the wrong component tags");
  }
  AutoEncoder ae{std::move(enc.network), std::move(dec.network)};
  ae.validate();
  return ae;
}

} // namespace gmmn
