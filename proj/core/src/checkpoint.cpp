#include "drgrl/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "drgrl/errors.hpp"

namespace drgrl {
namespace {

constexpr char kMagic[8] = {'D', 'R', 'G', 'R', 'L', 'P', 'O', 'L'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void PutLe(std::ostream& out, T value) {
  char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  }
  out.write(bytes, sizeof(T));
}

template <typename T>
T GetLe(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw Error("checkpoint truncated");
  }
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(bytes[i]) << (8 * i);
  }
  return value;
}

}  // namespace

void SaveCheckpoint(const PolicyParams& p, std::ostream& out) {
  const PolicyArch& a = p.arch();
  const std::string tag = a.Tag();
  out.write(kMagic, sizeof(kMagic));
  PutLe<std::uint32_t>(out, kVersion);
  PutLe<std::uint32_t>(out, static_cast<std::uint32_t>(tag.size()));
  out.write(tag.data(), static_cast<std::streamsize>(tag.size()));
  PutLe<std::uint32_t>(out, static_cast<std::uint32_t>(a.vocab_size));
  PutLe<std::uint32_t>(out, static_cast<std::uint32_t>(a.context_window));
  PutLe<std::uint32_t>(out, static_cast<std::uint32_t>(a.hidden_width));
  PutLe<std::uint64_t>(out, static_cast<std::uint64_t>(p.size()));
  for (double v : p.theta()) PutLe<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  if (!out) throw Error("failed to write checkpoint");
}

void SaveCheckpoint(const PolicyParams& p, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open checkpoint for writing: " + path.string());
  SaveCheckpoint(p, out);
}

PolicyParams LoadCheckpoint(std::istream& in) {
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error("not a policy checkpoint (bad magic)");
  }
  const auto version = GetLe<std::uint32_t>(in);
  if (version != kVersion) {
    throw Error("unsupported checkpoint version " + std::to_string(version));
  }
  const auto tag_len = GetLe<std::uint32_t>(in);
  if (tag_len > 4096) throw Error("checkpoint architecture tag too long");
  std::string tag(tag_len, '\0');
  if (!in.read(tag.data(), tag_len)) throw Error("checkpoint truncated");
  const PolicyArch arch = PolicyArch::FromTag(tag);
  const auto vocab = GetLe<std::uint32_t>(in);
  const auto window = GetLe<std::uint32_t>(in);
  const auto hidden = GetLe<std::uint32_t>(in);
  if (static_cast<int>(vocab) != arch.vocab_size ||
      static_cast<int>(window) != arch.context_window ||
      static_cast<int>(hidden) != arch.hidden_width) {
    throw Error("checkpoint dimensions disagree with architecture tag " + tag);
  }
  const auto n = GetLe<std::uint64_t>(in);
  if (n != arch.NumParams()) throw Error("checkpoint parameter count mismatch");
  std::vector<double> theta(n);
  for (auto& v : theta) v = std::bit_cast<double>(GetLe<std::uint64_t>(in));
  return PolicyParams(arch, std::move(theta));
}

PolicyParams LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint: " + path.string());
  return LoadCheckpoint(in);
}

}  // namespace drgrl
