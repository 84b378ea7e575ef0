#include "vmr/feature_io.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <stdexcept>

namespace vmr {

namespace {

constexpr std::array<char, 4> kMagic = {'V', 'M', 'R', 'T'};
constexpr std::uint32_t kMaxDims = 8;

template <typename U>
void put_le(std::ostream& out, U value) {
  std::array<char, sizeof(U)> bytes;
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  out.write(bytes.data(), bytes.size());
}

template <typename U>
U get_le(std::istream& in, const std::filesystem::path& path) {
  std::array<unsigned char, sizeof(U)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) {
    throw std::runtime_error("truncated feature file: " + path.string());
  }
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

}  // namespace

std::uint64_t FeatureTensor::element_count() const {
  std::uint64_t n = dims.empty() ? 0 : 1;
  for (auto d : dims) n *= d;
  return n;
}

void write_feature_tensor(const FeatureTensor& tensor, const std::filesystem::path& path) {
  if (tensor.element_count() != tensor.values.size()) {
    throw std::invalid_argument("feature tensor dims do not match its value count");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write feature file: " + path.string());
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kFeatureFormatVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.dims.size()));
  for (auto d : tensor.dims) put_le<std::uint64_t>(out, d);
  for (float v : tensor.values) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  if (!out) throw std::runtime_error("failed writing feature file: " + path.string());
}

FeatureTensor read_feature_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open feature file: " + path.string());
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw std::runtime_error("not a VMRT feature file: " + path.string());
  }
  const auto version = get_le<std::uint32_t>(in, path);
  if (version != kFeatureFormatVersion) {
    throw std::runtime_error("unsupported VMRT version " + std::to_string(version));
  }
  const auto ndim = get_le<std::uint32_t>(in, path);
  if (ndim == 0 || ndim > kMaxDims) throw std::runtime_error("bad VMRT rank " + std::to_string(ndim));
  FeatureTensor t;
  for (std::uint32_t i = 0; i < ndim; ++i) t.dims.push_back(get_le<std::uint64_t>(in, path));
  const std::uint64_t n = t.element_count();
  t.values.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) t.values[i] = std::bit_cast<float>(get_le<std::uint32_t>(in, path));
  return t;
}

}  // namespace vmr
