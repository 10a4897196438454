#pragma once

#include <vector>

#include "rcflow/latent.hpp"

namespace rcflow {

namespace detail {

/// Overlap weights of source cells [j, j+1) with target cell i spanning [i*n/m, (i+1)*n/m).
struct AxisPooling {
  struct Tap {
    std::size_t src;
    double weight;
  };
  std::vector<std::vector<Tap>> taps;

  AxisPooling(std::size_t n_src, std::size_t n_dst) : taps(n_dst) {
    const double scale = static_cast<double>(n_src) / static_cast<double>(n_dst);
    for (std::size_t i = 0; i < n_dst; ++i) {
      const double lo = static_cast<double>(i) * scale;
      const double hi = static_cast<double>(i + 1) * scale;
      for (std::size_t j = static_cast<std::size_t>(lo); j < n_src && static_cast<double>(j) < hi; ++j) {
        const double w = std::min(hi, static_cast<double>(j + 1)) - std::max(lo, static_cast<double>(j));
        if (w > 0.0) taps[i].push_back({j, w});
      }
    }
  }
};

} // namespace detail

/// Area-averaged pooling of a pixel-resolution mask onto the latent grid of `target`.
/// Every target extent must be at most the corresponding source extent; the channel count of
/// `target` is ignored.
inline Mask downsample_mask(const Mask& pixel, const Shape& target) {
  target.validate();
  const Shape& s = pixel.shape();
  if (target.frames > s.frames)
    throw StructuralError("downsample_mask: target has more frames (" + std::to_string(target.frames) +
                          ") than the source mask (" + std::to_string(s.frames) + ")");
  if (target.height > s.height || target.width > s.width)
    throw StructuralError("downsample_mask: target grid " + target.str() + " exceeds source " + s.str());

  const detail::AxisPooling pf(s.frames, target.frames);
  const detail::AxisPooling py(s.height, target.height);
  const detail::AxisPooling px(s.width, target.width);

  const Shape grid = Mask::grid_of(target);
  std::vector<double> out(grid.count());
  std::size_t o = 0;
  for (std::size_t f = 0; f < target.frames; ++f)
    for (std::size_t y = 0; y < target.height; ++y)
      for (std::size_t x = 0; x < target.width; ++x, ++o) {
        double acc = 0.0;
        double wsum = 0.0;
        for (auto tf : pf.taps[f])
          for (auto ty : py.taps[y])
            for (auto tx : px.taps[x]) {
              const double w = tf.weight * ty.weight * tx.weight;
              acc += w * pixel.at(tf.src, ty.src, tx.src);
              wsum += w;
            }
        out[o] = std::clamp(acc / wsum, 0.0, 1.0);
      }
  return Mask(grid, std::move(out));
}

} // namespace rcflow
