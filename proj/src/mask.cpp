#include "hoist/mask.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hoist {

int64_t Mask2D::area() const {
  int64_t a = 0;
  for (uint8_t b : v) a += b;
  return a;
}

Mask2D StMask::frame(int ti) const {
  Mask2D m(h, w);
  std::copy(v.begin() + static_cast<size_t>(ti) * h * w,
            v.begin() + static_cast<size_t>(ti + 1) * h * w, m.v.begin());
  return m;
}

void StMask::set_frame(int ti, const Mask2D& m) {
  if (m.h != h || m.w != w) throw std::invalid_argument("set_frame: shape mismatch");
  std::copy(m.v.begin(), m.v.end(), v.begin() + static_cast<size_t>(ti) * h * w);
}

bool StMask::frame_empty(int ti) const {
  const size_t off = static_cast<size_t>(ti) * h * w;
  for (size_t i = 0; i < static_cast<size_t>(h) * w; ++i)
    if (v[off + i]) return false;
  return true;
}

int64_t StMask::area() const {
  int64_t a = 0;
  for (uint8_t b : v) a += b;
  return a;
}

RleMask rle_encode(const Mask2D& mask) {
  RleMask out;
  out.h = mask.h;
  out.w = mask.w;
  uint8_t current = 0;  // scans always begin counting a zero run
  int run = 0;
  for (int x = 0; x < mask.w; ++x) {
    for (int y = 0; y < mask.h; ++y) {
      const uint8_t b = mask.at(y, x);
      if (b != 0 && b != 1)
        throw std::invalid_argument("rle_encode: non-binary value " + std::to_string(int(b)) +
                                    " at row " + std::to_string(y) + ", col " + std::to_string(x));
      if (b == current) {
        ++run;
      } else {
        out.counts.push_back(run);
        current = b;
        run = 1;
      }
    }
  }
  out.counts.push_back(run);
  return out;
}

Mask2D rle_decode(const RleMask& rle) {
  int64_t total = 0;
  for (int c : rle.counts) {
    if (c < 0) throw std::invalid_argument("rle_decode: negative run length");
    total += c;
  }
  if (total != static_cast<int64_t>(rle.h) * rle.w)
    throw std::invalid_argument("rle_decode: counts sum to " + std::to_string(total) +
                                ", expected " + std::to_string(int64_t(rle.h) * rle.w));
  Mask2D mask(rle.h, rle.w);
  int64_t idx = 0;
  uint8_t value = 0;
  for (int c : rle.counts) {
    for (int k = 0; k < c; ++k, ++idx) {
      const int x = static_cast<int>(idx / rle.h);
      const int y = static_cast<int>(idx % rle.h);
      mask.at(y, x) = value;
    }
    value ^= 1;
  }
  return mask;
}

std::optional<Box> tight_bbox(const Mask2D& mask) {
  int x0 = mask.w, y0 = mask.h, x1 = -1, y1 = -1;
  for (int y = 0; y < mask.h; ++y)
    for (int x = 0; x < mask.w; ++x)
      if (mask.at(y, x)) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
  if (x1 < 0) return std::nullopt;
  return Box{x0, y0, x1 + 1, y1 + 1};
}

Mask2D dilate(const Mask2D& mask, int radius) {
  Mask2D out(mask.h, mask.w);
  for (int y = 0; y < mask.h; ++y)
    for (int x = 0; x < mask.w; ++x) {
      if (!mask.at(y, x)) continue;
      const int ylo = std::max(0, y - radius), yhi = std::min(mask.h - 1, y + radius);
      const int xlo = std::max(0, x - radius), xhi = std::min(mask.w - 1, x + radius);
      for (int yy = ylo; yy <= yhi; ++yy)
        for (int xx = xlo; xx <= xhi; ++xx) out.at(yy, xx) = 1;
    }
  return out;
}

StMask contact_mask(const StMask& hand, const StMask& object, int radius) {
  if (hand.t != object.t || hand.h != object.h || hand.w != object.w)
    throw std::invalid_argument("contact_mask: shape mismatch");
  if (radius < 1) throw std::invalid_argument("contact_mask: radius must be >= 1");
  StMask out(hand.t, hand.h, hand.w);
  for (int t = 0; t < hand.t; ++t) {
    const Mask2D dh = dilate(hand.frame(t), radius);
    const Mask2D dobj = dilate(object.frame(t), radius);
    for (int y = 0; y < hand.h; ++y)
      for (int x = 0; x < hand.w; ++x)
        if (dh.at(y, x) && dobj.at(y, x)) out.at(t, y, x) = 1;
  }
  return out;
}

StMask downsample_majority(const StMask& m, int stride) {
  const int hf = (m.h + stride - 1) / stride, wf = (m.w + stride - 1) / stride;
  StMask out(m.t, hf, wf);
  for (int t = 0; t < m.t; ++t) {
    bool src_nonempty = false, dst_nonempty = false;
    int best_y = 0, best_x = 0;
    double best_frac = -1.0;
    for (int yc = 0; yc < hf; ++yc)
      for (int xc = 0; xc < wf; ++xc) {
        int count = 0, cells = 0;
        for (int y = yc * stride; y < std::min(m.h, (yc + 1) * stride); ++y)
          for (int x = xc * stride; x < std::min(m.w, (xc + 1) * stride); ++x, ++cells)
            count += m.at(t, y, x);
        if (count > 0) src_nonempty = true;
        const double frac = cells ? static_cast<double>(count) / cells : 0.0;
        if (frac > best_frac) {
          best_frac = frac;
          best_y = yc;
          best_x = xc;
        }
        if (2 * count >= cells && count > 0) {
          out.at(t, yc, xc) = 1;
          dst_nonempty = true;
        }
      }
    if (src_nonempty && !dst_nonempty) out.at(t, best_y, best_x) = 1;
  }
  return out;
}

StMask upsample_soft_threshold(const Tensor& soft, int t, int hf, int wf, int out_h_padded,
                               int out_w_padded, int out_h, int out_w) {
  if (soft.numel() != static_cast<int64_t>(t) * hf * wf)
    throw std::invalid_argument("upsample_soft_threshold: size mismatch");
  StMask out(t, out_h, out_w);
  const double sy = static_cast<double>(hf) / out_h_padded;
  const double sx = static_cast<double>(wf) / out_w_padded;
  for (int ti = 0; ti < t; ++ti) {
    const double* plane = soft.data() + static_cast<int64_t>(ti) * hf * wf;
    for (int y = 0; y < out_h; ++y) {
      const double fy = (y + 0.5) * sy - 0.5;
      int y0 = static_cast<int>(std::floor(fy));
      const double wy = fy - y0;
      const int y0c = std::clamp(y0, 0, hf - 1), y1c = std::clamp(y0 + 1, 0, hf - 1);
      for (int x = 0; x < out_w; ++x) {
        const double fx = (x + 0.5) * sx - 0.5;
        int x0 = static_cast<int>(std::floor(fx));
        const double wx = fx - x0;
        const int x0c = std::clamp(x0, 0, wf - 1), x1c = std::clamp(x0 + 1, 0, wf - 1);
        const double v00 = plane[y0c * wf + x0c], v01 = plane[y0c * wf + x1c];
        const double v10 = plane[y1c * wf + x0c], v11 = plane[y1c * wf + x1c];
        const double v = (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11);
        out.at(ti, y, x) = v > 0.5 ? 1 : 0;
      }
    }
  }
  return out;
}

}  // namespace hoist
