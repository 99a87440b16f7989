#include "fvv/silhouette.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fvv::silhouette {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1D squared distance transform of sampled function f (Felzenszwalb &
// Huttenlocher). f holds 0 on sites and +inf elsewhere; out receives
// min_q ((p - q)^2 + f(q)). v and z are scratch buffers of size n and n+1.
void edt_1d(const double* f, double* out, int n, std::vector<int>& v, std::vector<double>& z) {
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    const double fq = f[q] + static_cast<double>(q) * q;
    while (k >= 0) {
      const int r = v[k];
      const double s = (fq - (f[r] + static_cast<double>(r) * r)) / (2.0 * (q - r));
      if (s <= z[k]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    z[k] = k == 0 ? -kInf
                  : (fq - (f[v[k - 1]] + static_cast<double>(v[k - 1]) * v[k - 1])) /
                        (2.0 * (q - v[k - 1]));
    z[k + 1] = kInf;
  }
  if (k < 0) {
    std::fill(out, out + n, kInf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double dq = q - v[j];
    out[q] = dq * dq + f[v[j]];
  }
}

}  // namespace

DistanceMap distance_map(const Mask& proposal) {
  const int w = proposal.width, h = proposal.height;
  if (w <= 0 || h <= 0) throw Error("distance_map: invalid mask size");
  DistanceMap dm{w, h, std::vector<double>(static_cast<std::size_t>(w) * h)};
  if (proposal.count() == 0) {
    std::fill(dm.d.begin(), dm.d.end(), DistanceMap::kUnreachable);
    return dm;
  }

  std::vector<double> sq(dm.d.size());
  for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = proposal.bits[i] ? 0.0 : kInf;

  // Columns.
  parallel_for(0, static_cast<std::size_t>(w), 16, [&](std::size_t b, std::size_t e) {
    std::vector<double> f(h), out(h), z(h + 1);
    std::vector<int> v(h);
    for (std::size_t x = b; x < e; ++x) {
      for (int y = 0; y < h; ++y) f[y] = sq[static_cast<std::size_t>(y) * w + x];
      edt_1d(f.data(), out.data(), h, v, z);
      for (int y = 0; y < h; ++y) sq[static_cast<std::size_t>(y) * w + x] = out[y];
    }
  });
  // Rows.
  parallel_for(0, static_cast<std::size_t>(h), 16, [&](std::size_t b, std::size_t e) {
    std::vector<double> out(w), z(w + 1);
    std::vector<int> v(w);
    for (std::size_t y = b; y < e; ++y) {
      double* row = sq.data() + y * w;
      edt_1d(row, out.data(), w, v, z);
      for (int x = 0; x < w; ++x) dm.d[y * w + x] = std::sqrt(out[x]);
    }
  });
  return dm;
}

BackgroundModel build_background(std::span<const ColorImage> frames, double std_floor) {
  if (frames.size() < 2) throw Error("build_background: need at least 2 frames");
  const auto& first = frames.front();
  for (const auto& f : frames)
    if (f.width != first.width || f.height != first.height || f.channels != first.channels)
      throw Error("build_background: frame dimension mismatch");

  BackgroundModel bg;
  bg.width = first.width;
  bg.height = first.height;
  bg.channels = first.channels;
  const std::size_t n = first.data.size();
  bg.mean.assign(n, 0.0);
  bg.stddev.assign(n, 0.0);

  // Welford update per sample.
  std::vector<double> m2(n, 0.0);
  double count = 0;
  for (const auto& f : frames) {
    count += 1;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = f.data[i];
      const double delta = x - bg.mean[i];
      bg.mean[i] += delta / count;
      m2[i] += delta * (x - bg.mean[i]);
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    bg.stddev[i] = std::max(std_floor, std::sqrt(std::max(0.0, m2[i] / count)));
  return bg;
}

void AdaptiveParams::validate() const {
  if (!(theta_near > 0) || !(theta_near <= theta_far))
    throw Error("adaptive params: require 0 < theta_near <= theta_far");
  if (!(d_max > 0)) throw Error("adaptive params: d_max must be positive");
}

double AdaptiveParams::threshold(double d) const {
  return theta_near + (theta_far - theta_near) * std::min(d / d_max, 1.0);
}

Mask extract_silhouette(const ColorImage& frame, const BackgroundModel& bg,
                        const DistanceMap& dm, const AdaptiveParams& params) {
  params.validate();
  if (!frame.same_size(bg.width, bg.height) || frame.channels != bg.channels ||
      dm.width != frame.width || dm.height != frame.height)
    throw Error("extract_silhouette: dimension mismatch");

  Mask mask(frame.width, frame.height);
  const int ch = frame.channels;
  parallel_for(0, static_cast<std::size_t>(frame.height), 8, [&](std::size_t b, std::size_t e) {
    for (std::size_t y = b; y < e; ++y) {
      for (int x = 0; x < frame.width; ++x) {
        const std::size_t base = frame.index(x, static_cast<int>(y));
        double score = 0;
        for (int c = 0; c < ch; ++c) {
          const double dev = std::abs(frame.data[base + c] - bg.mean[base + c]) / bg.stddev[base + c];
          score = std::max(score, dev);
        }
        mask.set(x, static_cast<int>(y), score > params.threshold(dm.at(x, static_cast<int>(y))));
      }
    }
  });
  return mask;
}

}  // namespace fvv::silhouette
