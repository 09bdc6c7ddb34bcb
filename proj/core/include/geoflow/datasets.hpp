#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "geoflow/gaussian.hpp"
#include "geoflow/matrix.hpp"
#include "geoflow/rng.hpp"

namespace geoflow {

struct GaussianMixture {
  std::vector<double> weights;
  std::vector<GaussianSpec> components;

  /// Weights must be positive and sum to 1 within 1e-12; components must
  /// share one dimension.
  static GaussianMixture make(std::vector<double> weights,
                              std::vector<GaussianSpec> components);
};

/// Empirical distribution over flattened images with pixels in [0, 1];
/// sampling draws rows uniformly with replacement.
struct ImageSet {
  Matrix images;
  std::size_t image_rows = 0;
  std::size_t image_cols = 0;
};

struct DistributionSpec {
  std::variant<GaussianSpec, GaussianMixture, ImageSet> value;

  std::size_t dim() const;
  static DistributionSpec gaussian(GaussianSpec g);
  static DistributionSpec mixture(GaussianMixture m);
  static DistributionSpec images(ImageSet s);
};

/// n i.i.d. draws, one per row.
Matrix sample(const DistributionSpec& spec, std::size_t n, SeededRng& rng);

/// IDX container: big-endian magic and dimensions, unsigned-byte payload.
struct IdxFile {
  std::uint32_t magic = 0;  // 0x00000803 images, 0x00000801 labels
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> payload;

  static constexpr std::uint32_t kImagesMagic = 0x00000803;
  static constexpr std::uint32_t kLabelsMagic = 0x00000801;
};

IdxFile parse_idx(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> serialize_idx(const IdxFile& file);
IdxFile load_idx(const std::filesystem::path& path);

/// Images whose label equals `digit`, first `limit` of them, flattened and
/// scaled to [0, 1].
ImageSet select_digits(const IdxFile& images, const IdxFile& labels, int digit,
                       std::size_t limit);

/// 2x2 average pooling; image sides must be even.
ImageSet downsample_half(const ImageSet& set);

}  // namespace geoflow
