#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "hoist/tensor.hpp"

namespace hoist {

// Single-frame binary mask, row-major storage.
struct Mask2D {
  int h = 0, w = 0;
  std::vector<uint8_t> v;

  Mask2D() = default;
  Mask2D(int h_, int w_) : h(h_), w(w_), v(static_cast<size_t>(h_) * w_, 0) {}

  uint8_t& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
  uint8_t at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
  int64_t area() const;
  bool empty_mask() const { return area() == 0; }
  bool operator==(const Mask2D& o) const { return h == o.h && w == o.w && v == o.v; }
};

// T x H x W binary volume; one per track (prediction or ground truth).
struct StMask {
  int t = 0, h = 0, w = 0;
  std::vector<uint8_t> v;

  StMask() = default;
  StMask(int t_, int h_, int w_) : t(t_), h(h_), w(w_), v(static_cast<size_t>(t_) * h_ * w_, 0) {}

  uint8_t& at(int ti, int y, int x) { return v[(static_cast<size_t>(ti) * h + y) * w + x]; }
  uint8_t at(int ti, int y, int x) const { return v[(static_cast<size_t>(ti) * h + y) * w + x]; }
  Mask2D frame(int ti) const;
  void set_frame(int ti, const Mask2D& m);
  bool frame_empty(int ti) const;
  int64_t area() const;
  bool operator==(const StMask& o) const {
    return t == o.t && h == o.h && w == o.w && v == o.v;
  }
};

// Alternating run lengths over a column-major scan, starting with a zero run
// (first count is 0 when the scan starts inside a one run).
struct RleMask {
  std::vector<int> counts;
  int h = 0, w = 0;
};

RleMask rle_encode(const Mask2D& mask);
Mask2D rle_decode(const RleMask& rle);

// Inclusive-min, exclusive-max pixel box.
struct Box {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool operator==(const Box& o) const {
    return x0 == o.x0 && y0 == o.y0 && x1 == o.x1 && y1 == o.y1;
  }
};

// Tight bounding box of the set pixels; nullopt for an empty mask.
std::optional<Box> tight_bbox(const Mask2D& mask);

// Binary dilation by a (2r+1)x(2r+1) square structuring element.
Mask2D dilate(const Mask2D& mask, int radius);

// Frame-wise intersection of the two masks dilated by radius r.
StMask contact_mask(const StMask& hand, const StMask& object, int radius);

// Majority-vote downsample to (ceil(h/s), ceil(w/s)); a frame that was
// nonempty never becomes empty (its best-covered cell stays set).
StMask downsample_majority(const StMask& m, int stride);

// Threshold a (T,Hf,Wf) soft mask at 0.5 after bilinear upsampling to
// (out_h_padded, out_w_padded), then crop to (out_h, out_w).
StMask upsample_soft_threshold(const Tensor& soft, int t, int hf, int wf, int out_h_padded,
                               int out_w_padded, int out_h, int out_w);

}  // namespace hoist
