#pragma once

#include <cstdint>
#include <span>

namespace geoflow {

/// Counter-based splittable generator. Output i of a stream is a hash of
/// (key, i), so a stream is a pure function of its key and substreams
/// derived via split() are independent and reorderable.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  /// Independent substream; does not consume state of this stream.
  SeededRng split(std::uint64_t stream) const;

  std::uint64_t next_u64();
  double next_double();     // uniform [0, 1)
  double next_unit_open();  // uniform (0, 1]
  double next_gaussian();   // standard normal via Box-Muller
  void fill_gaussian(std::span<double> out);

  std::uint64_t key() const { return key_; }

 private:
  SeededRng(std::uint64_t key, int /*raw_tag*/) : key_(key) {}

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace geoflow
