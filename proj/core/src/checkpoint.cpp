#include "mfrl/checkpoint.hpp"

#include <algorithm>
#include <string>

#include <openssl/evp.h>

#include "mfrl/byte_io.hpp"
#include "mfrl/error.hpp"

namespace mfrl {

namespace {

constexpr std::uint8_t kMagic[8] = {'M', 'F', 'R', 'L', 'C', 'K', 'P', 'T'};

enum Tag : std::uint32_t {
  kSpec = 1,
  kThetaSgd = 2,
  kThetaSwa = 3,
  kLogDigest = 4,
  kConfigHash = 5,
  kSeed = 6,
};

void section(ByteWriter& out, std::uint32_t tag, const std::vector<std::uint8_t>& payload) {
  out.u32(tag);
  out.u64(payload.size());
  out.bytes(payload);
}

std::vector<std::uint8_t> encode_spec(const MlpSpec& spec) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(spec.input_dim));
  w.u32(static_cast<std::uint32_t>(spec.hidden_dims.size()));
  for (int h : spec.hidden_dims) w.u32(static_cast<std::uint32_t>(h));
  w.u32(static_cast<std::uint32_t>(spec.output_dim));
  w.u8(static_cast<std::uint8_t>(spec.activation));
  w.u8(spec.bias ? 1 : 0);
  return w.take();
}

std::vector<std::uint8_t> encode_params(const ParamVector& params) {
  ByteWriter w;
  w.u64(params.size());
  for (double v : params.values()) w.f64(v);
  return w.take();
}

MlpSpec decode_spec(ByteReader& r) {
  MlpSpec spec;
  spec.input_dim = static_cast<int>(r.u32("input_dim"));
  const std::uint32_t depth = r.u32("depth");
  if (depth > 1024) r.fail("implausible hidden depth " + std::to_string(depth));
  spec.hidden_dims.resize(depth);
  for (auto& h : spec.hidden_dims) h = static_cast<int>(r.u32("hidden width"));
  spec.output_dim = static_cast<int>(r.u32("output_dim"));
  const std::size_t act_at = r.offset();
  const std::uint8_t act = r.u8("activation");
  if (act > static_cast<std::uint8_t>(Activation::kErf)) {
    throw IoError("checkpoint: unknown activation code " + std::to_string(act) + " at byte offset " +
                  std::to_string(act_at));
  }
  spec.activation = static_cast<Activation>(act);
  spec.bias = r.u8("bias") != 0;
  try {
    spec.validate();
  } catch (const Error& e) {
    r.fail(std::string("invalid network spec (") + e.what() + ")");
  }
  return spec;
}

ParamVector decode_params(ByteReader& r, const MlpSpec& spec, const char* what) {
  std::vector<Shape> shapes = parameter_shapes(spec);
  std::size_t expected = 0;
  for (const auto& s : shapes) expected += static_cast<std::size_t>(s.rows) * static_cast<std::size_t>(s.cols);
  const std::size_t count_at = r.offset();
  const std::uint64_t count = r.u64(what);
  if (count != expected) {
    throw IoError(std::string("checkpoint: ") + what + " holds " + std::to_string(count) +
                  " values but the network needs " + std::to_string(expected) + " at byte offset " +
                  std::to_string(count_at));
  }
  std::vector<double> values(expected);
  for (auto& v : values) v = r.f64(what);
  return ParamVector(std::move(shapes), std::move(values));
}

Digest read_digest(ByteReader& r, const char* what) {
  Digest d{};
  const auto raw = r.bytes(d.size(), what);
  std::copy(raw.begin(), raw.end(), d.begin());
  return d;
}

}  // namespace

Digest sha256(std::span<const std::uint8_t> bytes) {
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != out.size()) {
    throw Error(ExitCode::kIo, "sha256: digest computation failed");
  }
  return out;
}

Digest sha256(std::string_view text) {
  return sha256({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

std::string to_hex(const Digest& digest) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (std::uint8_t b : digest) {
    out += kHex[b >> 4];
    out += kHex[b & 15];
  }
  return out;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  check_params(ckpt.spec, ckpt.theta_sgd);
  if (ckpt.theta_swa) check_params(ckpt.spec, *ckpt.theta_swa);
  ByteWriter out;
  out.bytes(kMagic);
  out.u32(kCheckpointVersion);
  section(out, kSpec, encode_spec(ckpt.spec));
  section(out, kThetaSgd, encode_params(ckpt.theta_sgd));
  if (ckpt.theta_swa) section(out, kThetaSwa, encode_params(*ckpt.theta_swa));
  section(out, kLogDigest, {ckpt.log_digest.begin(), ckpt.log_digest.end()});
  section(out, kConfigHash, {ckpt.config_hash.begin(), ckpt.config_hash.end()});
  ByteWriter seed;
  seed.u64(ckpt.seed);
  section(out, kSeed, seed.take());
  return out.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "checkpoint");
  const auto magic = r.bytes(sizeof(kMagic), "magic");
  if (!std::equal(magic.begin(), magic.end(), kMagic)) r.fail("bad magic (expected MFRLCKPT)");
  const std::size_t version_at = r.offset();
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw IoError("checkpoint: unsupported version " + std::to_string(version) + " at byte offset " +
                  std::to_string(version_at));
  }

  Checkpoint ckpt;
  std::uint32_t last_tag = 0;
  std::uint32_t seen = 0;
  while (r.remaining() > 0) {
    const std::size_t tag_at = r.offset();
    const std::uint32_t tag = r.u32("section tag");
    const std::uint64_t length = r.u64("section length");
    if (tag < kSpec || tag > kSeed || tag <= last_tag) {
      throw IoError("checkpoint: unexpected section tag " + std::to_string(tag) + " at byte offset " +
                    std::to_string(tag_at));
    }
    if (tag != kSpec && !(seen & (1u << kSpec))) {
      throw IoError("checkpoint: section " + std::to_string(tag) + " before the network section at byte offset " +
                    std::to_string(tag_at));
    }
    const std::size_t body_at = r.offset();
    const auto body = r.bytes(length, "section payload");
    ByteReader s(body, "checkpoint section " + std::to_string(tag) + " (starting at byte offset " +
                           std::to_string(body_at) + ")");
    switch (tag) {
      case kSpec: ckpt.spec = decode_spec(s); break;
      case kThetaSgd: ckpt.theta_sgd = decode_params(s, ckpt.spec, "theta_sgd"); break;
      case kThetaSwa: ckpt.theta_swa = decode_params(s, ckpt.spec, "theta_swa"); break;
      case kLogDigest: ckpt.log_digest = read_digest(s, "log digest"); break;
      case kConfigHash: ckpt.config_hash = read_digest(s, "config hash"); break;
      case kSeed: ckpt.seed = s.u64("seed"); break;
    }
    if (s.remaining() != 0) {
      throw IoError("checkpoint: section " + std::to_string(tag) + " has " + std::to_string(s.remaining()) +
                    " trailing bytes at byte offset " + std::to_string(body_at + s.offset()));
    }
    seen |= 1u << tag;
    last_tag = tag;
  }
  for (std::uint32_t tag : {kSpec, kThetaSgd, kLogDigest, kConfigHash, kSeed}) {
    if (!(seen & (1u << tag))) {
      throw IoError("checkpoint: missing section " + std::to_string(tag) + " at byte offset " +
                    std::to_string(r.offset()));
    }
  }
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  write_file_bytes(path, encode_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file_bytes(path));
}

}  // namespace mfrl
