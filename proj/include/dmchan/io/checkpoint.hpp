#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <zlib.h>

#include "json.hpp"

#include "dmchan/nn/tensor.hpp"

namespace dmchan::io {

/// Malformed, truncated, corrupted or mismatched checkpoint.
struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointMagic = "DMCHAN-CHECKPOINT";

struct NamedArray {
  std::string name;
  nn::Shape shape;
  std::vector<float> data;
};

/**
 * Self-describing container:
 *
 *   DMCHAN-CHECKPOINT <version>\n
 *   <header byte count>\n
 *   <JSON header: kind, config echo, metadata, array directory>
 *   <payload: raw little-endian f32 arrays, back to back>
 *
 * Directory entries carry name, shape, byte offset into the payload, byte
 * count and a CRC-32 of the array bytes.
 */
struct Checkpoint {
  int version = kCheckpointVersion;
  std::string kind;  ///< dm | ae
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<NamedArray> arrays;

  const NamedArray& array(const std::string& name) const {
    for (const auto& a : arrays)
      if (a.name == name) return a;
    throw CheckpointError("checkpoint: missing array '" + name + "'");
  }
};

namespace detail {

inline std::string le_bytes(const std::vector<float>& v) {
  std::string out(v.size() * 4, '\0');
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::uint32_t u;
    std::memcpy(&u, &v[i], 4);
    for (int b = 0; b < 4; ++b) out[4 * i + b] = static_cast<char>((u >> (8 * b)) & 0xffu);
  }
  return out;
}

inline std::vector<float> from_le_bytes(const char* p, std::size_t count) {
  std::vector<float> v(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[4 * i + b])) << (8 * b);
    std::memcpy(&v[i], &u, 4);
  }
  return v;
}

inline std::uint32_t crc32_of(const std::string& bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

}  // namespace detail

/// Serialises to bytes; equal checkpoints give equal bytes.
inline std::string checkpoint_bytes(const Checkpoint& ck) {
  nlohmann::json dir = nlohmann::json::array();
  std::string payload;
  for (const auto& a : ck.arrays) {
    if (nn::shape_size(a.shape) != a.data.size())
      throw CheckpointError("checkpoint: array '" + a.name + "' has " + std::to_string(a.data.size()) +
                            " values but shape " + nn::shape_string(a.shape));
    const std::string bytes = detail::le_bytes(a.data);
    dir.push_back({{"name", a.name},
                   {"shape", a.shape},
                   {"offset", payload.size()},
                   {"bytes", bytes.size()},
                   {"crc32", detail::crc32_of(bytes)}});
    payload += bytes;
  }
  const nlohmann::json header = {{"version", ck.version},
                                 {"kind", ck.kind},
                                 {"config", ck.config},
                                 {"metadata", ck.metadata},
                                 {"arrays", dir},
                                 {"payload_bytes", payload.size()}};
  const std::string h = header.dump(1);
  std::ostringstream os;
  os << kCheckpointMagic << ' ' << ck.version << '\n' << h.size() << '\n' << h << payload;
  return os.str();
}

inline Checkpoint parse_checkpoint(const std::string& bytes) {
  std::istringstream is(bytes);
  std::string magic;
  int version = 0;
  is >> magic >> version;
  if (magic != kCheckpointMagic) throw CheckpointError("checkpoint: not a checkpoint file (bad magic)");
  if (version != kCheckpointVersion)
    throw CheckpointError("checkpoint: version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  std::size_t header_size = 0;
  if (!(is >> header_size) || is.get() != '\n') throw CheckpointError("checkpoint: malformed header length");
  const auto header_start = static_cast<std::size_t>(is.tellg());
  if (header_start + header_size > bytes.size()) throw CheckpointError("checkpoint: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(header_start, header_size));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint: unreadable header: ") + e.what());
  }
  Checkpoint ck;
  try {
    ck.version = header.at("version").get<int>();
    ck.kind = header.at("kind").get<std::string>();
    ck.config = header.at("config");
    ck.metadata = header.at("metadata");
    const std::size_t payload_start = header_start + header_size;
    const std::size_t payload_bytes = header.at("payload_bytes").get<std::size_t>();
    if (bytes.size() < payload_start + payload_bytes)
      throw CheckpointError("checkpoint: truncated payload (" + std::to_string(bytes.size() - payload_start) + " of " +
                            std::to_string(payload_bytes) + " bytes)");
    if (bytes.size() > payload_start + payload_bytes) throw CheckpointError("checkpoint: trailing bytes after payload");
    for (const auto& e : header.at("arrays")) {
      NamedArray a;
      a.name = e.at("name").get<std::string>();
      a.shape = e.at("shape").get<nn::Shape>();
      const std::size_t offset = e.at("offset").get<std::size_t>();
      const std::size_t count = e.at("bytes").get<std::size_t>();
      if (count != 4 * nn::shape_size(a.shape))
        throw CheckpointError("checkpoint: array '" + a.name + "' byte count does not match shape " +
                              nn::shape_string(a.shape));
      if (offset + count > payload_bytes)
        throw CheckpointError("checkpoint: array '" + a.name + "' extends past the payload");
      const std::string raw = bytes.substr(payload_start + offset, count);
      if (detail::crc32_of(raw) != e.at("crc32").get<std::uint32_t>())
        throw CheckpointError("checkpoint: array '" + a.name + "' checksum mismatch (payload corrupted)");
      a.data = detail::from_le_bytes(raw.data(), count / 4);
      ck.arrays.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint: malformed header: ") + e.what());
  }
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  const std::string bytes = checkpoint_bytes(ck);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("checkpoint: cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("checkpoint: write to '" + path + "' failed");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot open '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes);
}

}  // namespace dmchan::io
