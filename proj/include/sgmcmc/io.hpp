#pragma once

#include "sgmcmc/dataset.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>

namespace sgmcmc {

inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;

struct IdxOptions {
  // {positive, negative}: keep only these two digits, mapped to +1 and -1.
  // Without a pair every image is kept and labels are the raw digit values.
  std::optional<std::array<int, 2>> digits;
};

// MNIST-style IDX image/label pair. Pixels are scaled to [0, 1]; feature
// index is row * cols + col. Throws FormatError (with byte offset) on bad
// magic numbers, truncated payloads and count mismatches.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 const IdxOptions& options = {});

// LIBSVM text format: "label index:value ...", 1-based indices, densified to
// max(largest index seen, min_dim). Throws FormatError with the line number.
Dataset load_libsvm(const std::filesystem::path& path, std::size_t min_dim = 0);

void write_libsvm(const std::filesystem::path& path, const Dataset& data);

// Features replaced by R X with R_ij ~ N(0, 1/out_dim) drawn from `seed`.
Dataset random_projection(const Dataset& data, std::size_t out_dim, std::uint64_t seed);
Dataset project(const Dataset& data, const Matrix& r);
Matrix projection_matrix(std::size_t out_dim, std::size_t in_dim, std::uint64_t seed);

}  // namespace sgmcmc
