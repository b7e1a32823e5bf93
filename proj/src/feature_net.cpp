#include "hoist/feature_net.hpp"

#include <cmath>
#include <stdexcept>

#include "hoist/rng.hpp"

namespace hoist {

namespace {

constexpr double kPosScale = 0.5;

// Bouncing mirror index, valid for any pad length.
int mirror_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - m;
}

Tensor he_conv(Rng& rng, int kh, int kw, int ci, int co) {
  Tensor w({kh, kw, ci, co});
  const double scale = std::sqrt(2.0 / (kh * kw * ci));
  for (int64_t i = 0; i < w.numel(); ++i) w[i] = rng.normal(0.0, scale);
  return w;
}

struct Widths {
  int c1, c2, c3;
};

Widths widths_for(int channels) {
  return {std::max(8, channels / 4), std::max(16, channels / 2), channels};
}

// Stem strides multiply to cfg.stride.
void stem_strides(int stride, int out[3]) {
  out[0] = 2;
  out[1] = stride >= 4 ? 2 : 1;
  out[2] = stride >= 8 ? 2 : 1;
}

Tensor spatial_encoding(int hf, int wf, int channels) {
  Tensor pe({hf, wf, channels});
  const int quarter = std::max(1, channels / 4);
  for (int y = 0; y < hf; ++y)
    for (int x = 0; x < wf; ++x)
      for (int c = 0; c < channels; ++c) {
        const int k = (c / 4) % quarter;
        const double freq = std::pow(10000.0, -static_cast<double>(k) / quarter);
        double v = 0.0;
        switch (c % 4) {
          case 0: v = std::sin(y * freq); break;
          case 1: v = std::cos(y * freq); break;
          case 2: v = std::sin(x * freq); break;
          default: v = std::cos(x * freq); break;
        }
        pe(y, x, c) = kPosScale * v;
      }
  return pe;
}

}  // namespace

void FeatureNetConfig::validate() const {
  if (stride != 2 && stride != 4 && stride != 8)
    throw std::invalid_argument("feature net: stride must be 2, 4 or 8");
  if (channels < 4) throw std::invalid_argument("feature net: channels must be >= 4");
  if (t_max < 1) throw std::invalid_argument("feature net: t_max must be >= 1");
}

int padded_extent(int n, int stride) {
  const int unit = 4 * stride;
  return (n + unit - 1) / unit * unit;
}

void init_feature_params(ParamStore& store, const FeatureNetConfig& cfg, uint64_t seed) {
  cfg.validate();
  const Widths wd = widths_for(cfg.channels);
  Rng rng(Rng::derive(seed, 0xFEA7u));
  store.add("feat.conv1.w", he_conv(rng, 3, 3, 3, wd.c1));
  store.add("feat.conv1.b", Tensor::zeros({wd.c1}));
  store.add("feat.conv2.w", he_conv(rng, 3, 3, wd.c1, wd.c2));
  store.add("feat.conv2.b", Tensor::zeros({wd.c2}));
  store.add("feat.conv3.w", he_conv(rng, 3, 3, wd.c2, wd.c3));
  store.add("feat.conv3.b", Tensor::zeros({wd.c3}));
  store.add("feat.ctx1.w", he_conv(rng, 3, 3, wd.c3, wd.c3));
  store.add("feat.ctx1.b", Tensor::zeros({wd.c3}));
  store.add("feat.ctx2.w", he_conv(rng, 3, 3, wd.c3, wd.c3));
  store.add("feat.ctx2.b", Tensor::zeros({wd.c3}));
  store.add("feat.fuse.w", he_conv(rng, 1, 1, wd.c3, wd.c3));
  store.add("feat.fuse.b", Tensor::zeros({wd.c3}));
  Tensor temb({cfg.t_max, cfg.channels});
  for (int64_t i = 0; i < temb.numel(); ++i) temb[i] = rng.normal(0.0, 0.05);
  store.add("feat.temporal.emb", std::move(temb));
}

Tensor clip_to_input(const VideoClip& clip, int pad_multiple) {
  const int hp = (clip.h + pad_multiple - 1) / pad_multiple * pad_multiple;
  const int wp = (clip.w + pad_multiple - 1) / pad_multiple * pad_multiple;
  Tensor x({clip.t, hp, wp, 3});
  for (int t = 0; t < clip.t; ++t)
    for (int y = 0; y < hp; ++y) {
      const int ys = mirror_index(y, clip.h);
      for (int xx = 0; xx < wp; ++xx) {
        const int xs = mirror_index(xx, clip.w);
        for (int c = 0; c < 3; ++c)
          x(t, y, xx, c) = clip.px(t, ys, xs, c) / 255.0 - 0.5;
      }
    }
  return x;
}

Graph::Val feature_net_forward(Graph& g, const VideoClip& clip, const ParamBinding& p,
                               const FeatureNetConfig& cfg) {
  cfg.validate();
  clip.validate();
  if (clip.t > cfg.t_max)
    throw std::invalid_argument("feature net: clip has more frames than t_max");
  int ss[3];
  stem_strides(cfg.stride, ss);

  Graph::Val x = g.leaf(clip_to_input(clip, 4 * cfg.stride));
  x = g.gelu(g.conv2d(x, p["feat.conv1.w"], p["feat.conv1.b"], ss[0]));
  x = g.gelu(g.conv2d(x, p["feat.conv2.w"], p["feat.conv2.b"], ss[1]));
  x = g.gelu(g.conv2d(x, p["feat.conv3.w"], p["feat.conv3.b"], ss[2]));

  // Context path at 1/2 and 1/4 of the output scale, merged back by sum.
  Graph::Val c1 = g.gelu(g.conv2d(x, p["feat.ctx1.w"], p["feat.ctx1.b"], 2));
  Graph::Val c2 = g.gelu(g.conv2d(c1, p["feat.ctx2.w"], p["feat.ctx2.b"], 2));
  Graph::Val merged = g.add(x, g.add(g.upsample_nearest(c1, 2), g.upsample_nearest(c2, 4)));
  Graph::Val fused = g.gelu(g.conv2d(merged, p["feat.fuse.w"], p["feat.fuse.b"], 1));

  const Tensor& fv = g.val(fused);
  Tensor pe({fv.dim(0), fv.dim(1), fv.dim(2), fv.dim(3)});
  Tensor plane = spatial_encoding(fv.dim(1), fv.dim(2), fv.dim(3));
  for (int t = 0; t < fv.dim(0); ++t)
    for (int64_t i = 0; i < plane.numel(); ++i)
      pe[static_cast<int64_t>(t) * plane.numel() + i] = plane[i];
  Graph::Val out = g.add(fused, g.leaf(std::move(pe)));
  if (cfg.temporal_encoding) out = g.add_temporal(out, p["feat.temporal.emb"]);
  return out;
}

FeatureVolume extract_features(const VideoClip& clip, const ParamStore& store,
                               const FeatureNetConfig& cfg) {
  for (const auto& name : store.names())
    if (name.rfind("feat.", 0) == 0 && !store.get(name).all_finite())
      throw std::invalid_argument("feature net: non-finite weights in " + name);
  Graph g;
  ParamBinding bind(g, store);
  Graph::Val out = feature_net_forward(g, clip, bind, cfg);
  FeatureVolume fv;
  fv.data = g.val(out);
  fv.stride = cfg.stride;
  fv.padded_h = padded_extent(clip.h, cfg.stride);
  fv.padded_w = padded_extent(clip.w, cfg.stride);
  return fv;
}

}  // namespace hoist
