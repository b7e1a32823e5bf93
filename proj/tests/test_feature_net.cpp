#include <doctest.h>

#include <algorithm>

#include "hoist/feature_net.hpp"
#include "hoist/synth.hpp"
#include "test_util.hpp"

using namespace hoist;
using testutil::rel_err;

namespace {

VideoClip tiny_clip(int t, int h, int w, uint64_t seed) {
  SynthConfig cfg;
  cfg.n_hands = 1;
  cfg.n_objects = 1;
  cfg.t = t;
  cfg.h = h;
  cfg.w = w;
  cfg.seed = seed;
  return synth_clip(cfg, "t").record.clip;
}

FeatureNetConfig tiny_feat() {
  FeatureNetConfig f;
  f.channels = 16;
  f.stride = 4;
  f.t_max = 8;
  return f;
}

}  // namespace

TEST_CASE("feature volume shape follows the stride contract") {
  const VideoClip clip = tiny_clip(4, 96, 96, 3);
  FeatureNetConfig f;
  f.channels = 64;
  f.stride = 4;
  ParamStore store;
  init_feature_params(store, f, 1);
  const FeatureVolume fv = extract_features(clip, store, f);
  REQUIRE(fv.data.rank() == 4);
  CHECK(fv.data.dim(0) == 4);
  CHECK(fv.data.dim(1) == 24);
  CHECK(fv.data.dim(2) == 24);
  CHECK(fv.data.dim(3) == 64);
  CHECK(fv.stride == 4);
  CHECK(fv.data.all_finite());
}

TEST_CASE("padding rounds odd sizes up to a context-friendly multiple") {
  const VideoClip clip = tiny_clip(2, 70, 42, 5);
  const FeatureNetConfig f = tiny_feat();
  ParamStore store;
  init_feature_params(store, f, 1);
  const FeatureVolume fv = extract_features(clip, store, f);
  CHECK(fv.padded_h == 80);
  CHECK(fv.padded_w == 48);
  CHECK(fv.data.dim(1) == 20);
  CHECK(fv.data.dim(2) == 12);
}

TEST_CASE("shape contract holds across random clip sizes") {
  Rng rng(77);
  const FeatureNetConfig f = tiny_feat();
  ParamStore store;
  init_feature_params(store, f, 2);
  for (int trial = 0; trial < 5; ++trial) {
    const int t = rng.range(1, 4);
    const int h = rng.range(16, 80), w = rng.range(16, 80);
    const VideoClip clip = [&] {
      VideoClip c;
      c.clip_id = "r";
      c.t = t;
      c.h = h;
      c.w = w;
      c.frames.assign(static_cast<size_t>(t) * h * w * 3, 0);
      for (auto& px : c.frames) px = static_cast<uint8_t>(rng.below(256));
      return c;
    }();
    const FeatureVolume fv = extract_features(clip, store, f);
    CHECK(fv.data.dim(0) == t);
    CHECK(fv.data.dim(1) == padded_extent(h, 4) / 4);
    CHECK(fv.data.dim(2) == padded_extent(w, 4) / 4);
    CHECK(fv.data.dim(3) == f.channels);
    CHECK(fv.data.all_finite());
  }
}

TEST_CASE("extract_features is deterministic") {
  const VideoClip clip = tiny_clip(3, 64, 64, 9);
  const FeatureNetConfig f = tiny_feat();
  ParamStore store;
  init_feature_params(store, f, 4);
  const FeatureVolume a = extract_features(clip, store, f);
  const FeatureVolume b = extract_features(clip, store, f);
  REQUIRE(a.data.numel() == b.data.numel());
  for (int64_t i = 0; i < a.data.numel(); ++i) CHECK(a.data[i] == b.data[i]);
}

TEST_CASE("non-finite weights are rejected before compute") {
  const VideoClip clip = tiny_clip(2, 64, 64, 9);
  const FeatureNetConfig f = tiny_feat();
  ParamStore store;
  init_feature_params(store, f, 4);
  store.get("feat.conv2.w")[3] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(extract_features(clip, store, f), doctest::Contains("non-finite"),
                       std::invalid_argument);
}

TEST_CASE("clips longer than the temporal table are rejected") {
  const VideoClip clip = tiny_clip(4, 64, 64, 9);
  FeatureNetConfig f = tiny_feat();
  f.t_max = 3;
  ParamStore store;
  init_feature_params(store, f, 4);
  CHECK_THROWS_AS(extract_features(clip, store, f), std::invalid_argument);
}

TEST_CASE("frame permutation commutes with the encoder only without temporal encoding") {
  VideoClip clip = tiny_clip(3, 64, 64, 21);
  VideoClip reversed = clip;
  for (int t = 0; t < clip.t; ++t)
    for (int y = 0; y < clip.h; ++y)
      for (int x = 0; x < clip.w; ++x)
        for (int c = 0; c < 3; ++c)
          reversed.px(t, y, x, c) = clip.px(clip.t - 1 - t, y, x, c);

  FeatureNetConfig f = tiny_feat();
  f.temporal_encoding = false;
  ParamStore store;
  init_feature_params(store, f, 4);
  const FeatureVolume a = extract_features(clip, store, f);
  const FeatureVolume b = extract_features(reversed, store, f);
  const int64_t plane = a.data.numel() / a.data.dim(0);
  for (int t = 0; t < a.data.dim(0); ++t)
    for (int64_t i = 0; i < plane; ++i)
      CHECK(a.data[t * plane + i] == b.data[(a.data.dim(0) - 1 - t) * plane + i]);

  // with the temporal embedding the swapped frames must differ
  FeatureNetConfig f2 = tiny_feat();
  f2.temporal_encoding = true;
  ParamStore store2;
  init_feature_params(store2, f2, 4);
  const FeatureVolume a2 = extract_features(clip, store2, f2);
  const FeatureVolume b2 = extract_features(reversed, store2, f2);
  double diff = 0.0;
  for (int64_t i = 0; i < plane; ++i)
    diff = std::max(diff, std::fabs(a2.data[i] - b2.data[(a2.data.dim(0) - 1) * plane + i]));
  CHECK(diff > 1e-6);
}

TEST_CASE("spatially and temporally distinct locations are distinguishable") {
  // a uniform gray clip leaves only the encodings to tell locations apart
  VideoClip clip;
  clip.clip_id = "flat";
  clip.t = 2;
  clip.h = 32;
  clip.w = 32;
  clip.frames.assign(static_cast<size_t>(clip.t) * 32 * 32 * 3, 128);
  const FeatureNetConfig f = tiny_feat();
  ParamStore store;
  init_feature_params(store, f, 4);
  const FeatureVolume fv = extract_features(clip, store, f);
  const int hf = fv.data.dim(1), wf = fv.data.dim(2), c = fv.data.dim(3);
  auto differs = [&](int t1, int y1, int x1, int t2, int y2, int x2) {
    for (int ch = 0; ch < c; ++ch)
      if (std::fabs(fv.data(t1, y1, x1, ch) - fv.data(t2, y2, x2, ch)) > 1e-9) return true;
    return false;
  };
  CHECK(differs(0, 1, 1, 0, 1, 2));
  CHECK(differs(0, 1, 1, 0, 2, 1));
  CHECK(differs(0, hf / 2, wf / 2, 1, hf / 2, wf / 2));
}

TEST_CASE("gradient of sum(features) matches central finite differences") {
  const VideoClip clip = tiny_clip(2, 32, 32, 33);
  const FeatureNetConfig f = tiny_feat();
  ParamStore store;
  init_feature_params(store, f, 6);

  Graph g;
  ParamBinding bind(g, store);
  Graph::Val loss = g.sum(feature_net_forward(g, clip, bind, f));
  g.backward(loss);

  // a handful of weights across parameter groups
  const std::vector<std::pair<std::string, int64_t>> probes = {
      {"feat.conv1.w", 5}, {"feat.conv2.w", 17}, {"feat.conv3.w", 3},   {"feat.ctx1.w", 11},
      {"feat.ctx2.w", 7},  {"feat.fuse.w", 9},   {"feat.conv1.b", 2},   {"feat.fuse.b", 1},
      {"feat.temporal.emb", 12},
  };
  for (const auto& [name, idx] : probes) {
    const double analytic = g.grad(bind[name])[idx];
    const double orig = store.get(name)[idx];
    const double h = 1e-3;
    auto eval = [&](double v) {
      store.get(name)[idx] = v;
      Graph g2;
      ParamBinding b2(g2, store);
      return g2.val(g2.sum(feature_net_forward(g2, clip, b2, f)))[0];
    };
    const double fd = (eval(orig + h) - eval(orig - h)) / (2 * h);
    store.get(name)[idx] = orig;
    INFO(name, "[", idx, "] analytic ", analytic, " fd ", fd);
    CHECK(rel_err(analytic, fd) < 1e-4);
  }
}
