#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace vmr {

/// Self-describing tensor container: "VMRT", u32 version, u32 ndim,
/// ndim x u64 dims, then row-major little-endian f32 values.
struct FeatureTensor {
  std::vector<std::uint64_t> dims;
  std::vector<float> values;

  std::uint64_t element_count() const;
};

inline constexpr std::uint32_t kFeatureFormatVersion = 1;

void write_feature_tensor(const FeatureTensor& tensor, const std::filesystem::path& path);
FeatureTensor read_feature_tensor(const std::filesystem::path& path);

}  // namespace vmr
