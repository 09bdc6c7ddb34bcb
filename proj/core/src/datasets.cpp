#include "geoflow/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace geoflow {

GaussianMixture GaussianMixture::make(std::vector<double> weights,
                                      std::vector<GaussianSpec> components) {
  if (weights.empty() || weights.size() != components.size())
    throw std::invalid_argument("mixture: one weight per component required");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw std::invalid_argument("mixture: weights must be positive");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw std::invalid_argument("mixture: weights must sum to 1");
  const std::size_t d = components.front().dim();
  for (const GaussianSpec& c : components)
    if (c.dim() != d) throw std::invalid_argument("mixture: component dimensions differ");
  GaussianMixture m;
  m.weights = std::move(weights);
  m.components = std::move(components);
  return m;
}

std::size_t DistributionSpec::dim() const {
  return std::visit(
      [](const auto& v) -> std::size_t {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, GaussianSpec>) return v.dim();
        if constexpr (std::is_same_v<T, GaussianMixture>) return v.components.front().dim();
        if constexpr (std::is_same_v<T, ImageSet>) return v.images.cols();
      },
      value);
}

DistributionSpec DistributionSpec::gaussian(GaussianSpec g) { return {std::move(g)}; }
DistributionSpec DistributionSpec::mixture(GaussianMixture m) { return {std::move(m)}; }
DistributionSpec DistributionSpec::images(ImageSet s) { return {std::move(s)}; }

namespace {

Matrix sample_mixture(const GaussianMixture& mix, std::size_t n, SeededRng& rng) {
  // A single component is exactly a plain Gaussian; keep the stream usage
  // identical to sample_gaussian in that case.
  if (mix.components.size() == 1) return sample_gaussian(mix.components.front(), n, rng);
  const std::size_t d = mix.components.front().dim();
  Matrix out(n, d);
  std::vector<double> xi(d);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.next_double();
    std::size_t k = 0;
    double acc = 0.0;
    for (; k + 1 < mix.weights.size(); ++k) {
      acc += mix.weights[k];
      if (u < acc) break;
    }
    const GaussianSpec& comp = mix.components[k];
    rng.fill_gaussian(xi);
    double* row = out.row_ptr(i);
    for (std::size_t r = 0; r < d; ++r) {
      double s = comp.mean[r];
      for (std::size_t c = 0; c <= r; ++c) s += comp.chol(r, c) * xi[c];
      row[r] = s;
    }
  }
  return out;
}

Matrix sample_images(const ImageSet& set, std::size_t n, SeededRng& rng) {
  if (set.images.rows() == 0) throw std::invalid_argument("sample: empty image set");
  Matrix out(n, set.images.cols());
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t idx = rng.next_u64() % set.images.rows();
    std::copy(set.images.row_ptr(idx), set.images.row_ptr(idx) + set.images.cols(),
              out.row_ptr(i));
  }
  return out;
}

}  // namespace

Matrix sample(const DistributionSpec& spec, std::size_t n, SeededRng& rng) {
  if (n == 0) throw std::invalid_argument("sample: n must be >= 1");
  return std::visit(
      [&](const auto& v) -> Matrix {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, GaussianSpec>) return sample_gaussian(v, n, rng);
        if constexpr (std::is_same_v<T, GaussianMixture>) return sample_mixture(v, n, rng);
        if constexpr (std::is_same_v<T, ImageSet>) return sample_images(v, n, rng);
      },
      spec.value);
}

namespace {

std::uint32_t read_be32(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
         (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace

IdxFile parse_idx(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw std::invalid_argument("idx: truncated header");
  if (bytes[0] != 0 || bytes[1] != 0) throw std::invalid_argument("idx: bad magic");
  if (bytes[2] != 0x08) throw std::invalid_argument("idx: unsupported element type");
  const std::uint32_t magic = read_be32(bytes.data());
  if (magic != IdxFile::kImagesMagic && magic != IdxFile::kLabelsMagic)
    throw std::invalid_argument("idx: bad magic");
  const std::size_t ndims = bytes[3];

  if (bytes.size() < 4 + 4 * ndims) throw std::invalid_argument("idx: truncated dimensions");
  IdxFile file;
  file.magic = magic;
  std::size_t count = 1;
  for (std::size_t i = 0; i < ndims; ++i) {
    const std::uint32_t d = read_be32(bytes.data() + 4 + 4 * i);
    file.dims.push_back(d);
    count *= d;
  }
  const std::size_t offset = 4 + 4 * ndims;
  if (bytes.size() < offset + count) throw std::invalid_argument("idx: truncated payload");
  if (bytes.size() > offset + count) throw std::invalid_argument("idx: trailing bytes");
  file.payload.assign(bytes.begin() + offset, bytes.end());
  return file;
}

std::vector<std::uint8_t> serialize_idx(const IdxFile& file) {
  std::vector<std::uint8_t> out;
  out.reserve(4 + 4 * file.dims.size() + file.payload.size());
  write_be32(out, file.magic);
  for (std::uint32_t d : file.dims) write_be32(out, d);
  out.insert(out.end(), file.payload.begin(), file.payload.end());
  return out;
}

IdxFile load_idx(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("idx: cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_idx(bytes);
}

ImageSet select_digits(const IdxFile& images, const IdxFile& labels, int digit,
                       std::size_t limit) {
  if (images.magic != IdxFile::kImagesMagic || labels.magic != IdxFile::kLabelsMagic)
    throw std::invalid_argument("select_digits: wrong file kinds");
  if (images.dims.size() != 3 || labels.dims.size() != 1)
    throw std::invalid_argument("select_digits: unexpected dimensions");
  if (images.dims[0] != labels.dims[0])
    throw std::invalid_argument("select_digits: image and label counts differ");
  if (digit < 0 || digit > 9) throw std::invalid_argument("select_digits: digit out of range");
  if (limit == 0) throw std::invalid_argument("select_digits: empty selection requested");

  const std::size_t rows = images.dims[1];
  const std::size_t cols = images.dims[2];
  const std::size_t pixels = rows * cols;
  std::vector<std::size_t> chosen;
  for (std::size_t i = 0; i < labels.payload.size() && chosen.size() < limit; ++i)
    if (labels.payload[i] == static_cast<std::uint8_t>(digit)) chosen.push_back(i);
  if (chosen.empty()) throw std::invalid_argument("select_digits: digit absent");

  ImageSet set;
  set.image_rows = rows;
  set.image_cols = cols;
  set.images = Matrix(chosen.size(), pixels);
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    const std::uint8_t* src = images.payload.data() + chosen[i] * pixels;
    double* dst = set.images.row_ptr(i);
    for (std::size_t j = 0; j < pixels; ++j) dst[j] = static_cast<double>(src[j]) / 255.0;
  }
  return set;
}

ImageSet downsample_half(const ImageSet& set) {
  if (set.image_rows % 2 != 0 || set.image_cols % 2 != 0)
    throw std::invalid_argument("downsample_half: image sides must be even");
  const std::size_t rows = set.image_rows / 2;
  const std::size_t cols = set.image_cols / 2;
  ImageSet out;
  out.image_rows = rows;
  out.image_cols = cols;
  out.images = Matrix(set.images.rows(), rows * cols);
  for (std::size_t i = 0; i < set.images.rows(); ++i) {
    const double* src = set.images.row_ptr(i);
    double* dst = out.images.row_ptr(i);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) {
        const std::size_t r0 = 2 * r, c0 = 2 * c;
        dst[r * cols + c] = 0.25 * (src[r0 * set.image_cols + c0] +
                                    src[r0 * set.image_cols + c0 + 1] +
                                    src[(r0 + 1) * set.image_cols + c0] +
                                    src[(r0 + 1) * set.image_cols + c0 + 1]);
      }
  }
  return out;
}

}  // namespace geoflow
