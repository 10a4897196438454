#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "rcflow/latent.hpp"

namespace rcflow {

/// Ordered `key=value` report.
class MetricsReport {
public:
  void set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : entries_)
      if (k == key) {
        v = value;
        return;
      }
    entries_.emplace_back(key, value);
  }
  void set(const std::string& key, double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    set(key, std::string(buf));
  }
  void set(const std::string& key, std::size_t value) { set(key, std::to_string(value)); }
  void set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }

  const std::string* get(const std::string& key) const {
    for (const auto& [k, v] : entries_)
      if (k == key) return &v;
    return nullptr;
  }

  std::string str() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
    return out;
  }

private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Pearson correlation of forward-difference gradient magnitudes of `a` and `b`, over pixels where
/// the mask is >= 0.5 at the pixel and at both forward neighbours. Returns 1 when both samples are
/// constant and equal, 0 when exactly one is constant or no pixel qualifies.
inline double fg_structure_score(const LatentField& a, const LatentField& b, const Mask& mask) {
  require_same_shape(a, b, "fg_structure_score");
  mask.require_broadcast(a.shape(), "fg_structure_score");
  const Shape& s = a.shape();
  std::vector<double> ga, gb;
  auto grad = [](const LatentField& x, std::size_t f, std::size_t c, std::size_t y, std::size_t px) {
    const double gx = x.at(f, c, y, px + 1) - x.at(f, c, y, px);
    const double gy = x.at(f, c, y + 1, px) - x.at(f, c, y, px);
    return std::hypot(gx, gy);
  };
  for (std::size_t f = 0; f < s.frames; ++f)
    for (std::size_t c = 0; c < s.channels; ++c)
      for (std::size_t y = 0; y + 1 < s.height; ++y)
        for (std::size_t px = 0; px + 1 < s.width; ++px) {
          if (mask.at(f, y, px) < 0.5 || mask.at(f, y, px + 1) < 0.5 || mask.at(f, y + 1, px) < 0.5) continue;
          ga.push_back(grad(a, f, c, y, px));
          gb.push_back(grad(b, f, c, y, px));
        }
  if (ga.empty()) return 0.0;
  const double n = static_cast<double>(ga.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < ga.size(); ++i) {
    ma += ga[i];
    mb += gb[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ga.size(); ++i) {
    sab += (ga[i] - ma) * (gb[i] - mb);
    saa += (ga[i] - ma) * (ga[i] - ma);
    sbb += (gb[i] - mb) * (gb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return (saa == 0.0 && sbb == 0.0 && ga == gb) ? 1.0 : 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

/// RMS of (a - b) weighted by (1 - M); 0 when the background is empty.
inline double bg_change_rms(const LatentField& a, const LatentField& b, const Mask& mask) {
  require_same_shape(a, b, "bg_change_rms");
  mask.require_broadcast(a.shape(), "bg_change_rms");
  double num = 0.0, den = 0.0;
  for_each_masked(a.shape(), mask, [&](std::size_t i, double m) {
    const double w = 1.0 - m;
    const double d = a[i] - b[i];
    num += w * d * d;
    den += w;
  });
  return den > 0.0 ? std::sqrt(num / den) : 0.0;
}

} // namespace rcflow
