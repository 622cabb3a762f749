#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "subat/netcore.hpp"
#include "subat/tensor.hpp"

namespace subat {

struct Dataset {
  Tensor inputs;            // m x D, entries in [0, 1]
  std::vector<int> labels;  // m entries in [0, classes)
  std::size_t classes = 0;
  std::string name;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const { return inputs.cols(); }

  void validate() const;

  Batch gather(std::span<const std::size_t> rows) const;
  Batch all() const;
};

struct SyntheticSpec {
  std::size_t classes = 4;
  std::size_t dim = 64;
  std::size_t per_class = 100;
  double margin = 0.3;  // minimum pairwise l-inf distance between prototypes
  double noise = 0.1;   // per-coordinate Gaussian standard deviation
  std::uint64_t seed = 0;
};

// Class prototypes uniform in [0.2, 0.8]^D, rejection-sampled until every
// pair is at least `margin` apart in l-inf; samples are prototype plus
// Gaussian noise, clipped to [0, 1]. Rows are grouped by class.
Dataset gen_synthetic(const SyntheticSpec& spec);

// Rows `label,p_1,...,p_D` with pixels in 0..255; no header.
Dataset load_csv(const std::filesystem::path& path);
// Writes pixels as round(255 x), the inverse of load_csv on the /255 grid.
void write_csv(const Dataset& data, const std::filesystem::path& path);

// Seeded shuffle; the first floor(ratio m) shuffled rows become train.
std::pair<Dataset, Dataset> split(const Dataset& data, double ratio, std::uint64_t seed);

// Fisher-Yates on 0..n-1 driven by a counter-based stream.
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed, std::uint64_t key);

}  // namespace subat
