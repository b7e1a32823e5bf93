#include <doctest.h>

#include <cmath>

#include "hoist/decoder.hpp"
#include "hoist/rng.hpp"
#include "test_util.hpp"

using namespace hoist;
using testutil::random_tensor;

namespace {

AttentionMaps random_maps(int c, Rng& rng, double scale = 0.3) {
  AttentionMaps f;
  f.wq = random_tensor({c, c}, rng, scale);
  f.bq = random_tensor({c}, rng, scale);
  f.wk = random_tensor({c, c}, rng, scale);
  f.bk = random_tensor({c}, rng, scale);
  f.wv = random_tensor({c, c}, rng, scale);
  f.bv = random_tensor({c}, rng, scale);
  return f;
}

AttentionMaps identity_maps(int c) {
  AttentionMaps f;
  f.wq = Tensor::zeros({c, c});
  f.wk = Tensor::zeros({c, c});
  f.wv = Tensor::zeros({c, c});
  for (int i = 0; i < c; ++i) {
    f.wq(i, i) = 1.0;
    f.wk(i, i) = 1.0;
    f.wv(i, i) = 1.0;
  }
  f.bq = Tensor::zeros({c});
  f.bk = Tensor::zeros({c});
  f.bv = Tensor::zeros({c});
  return f;
}

std::vector<StMask> random_masks(int n, int t, int h, int w, Rng& rng, double density) {
  std::vector<StMask> masks(static_cast<size_t>(n), StMask(t, h, w));
  for (auto& m : masks)
    for (auto& b : m.v) b = rng.chance(density) ? 1 : 0;
  return masks;
}

Tensor apply_linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  const int m = x.dim(0), k = x.dim(1), n = w.dim(1);
  Tensor out({m, n});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double s = b(j);
      for (int kk = 0; kk < k; ++kk) s += x(i, kk) * w(kk, j);
      out(i, j) = s;
    }
  return out;
}

// scalar-loop oracle for softmax(QK^T)V
Tensor cross_att_oracle(const Tensor& x, const Tensor& y, const AttentionMaps& f) {
  const Tensor q = apply_linear(x, f.wq, f.bq);
  const Tensor k = apply_linear(y, f.wk, f.bk);
  const Tensor v = apply_linear(y, f.wv, f.bv);
  const int n = q.dim(0), m = k.dim(0), c = q.dim(1);
  Tensor out({n, c});
  for (int i = 0; i < n; ++i) {
    std::vector<double> logits(static_cast<size_t>(m), 0.0);
    double mx = -1e300;
    for (int j = 0; j < m; ++j) {
      double s = 0.0;
      for (int cc = 0; cc < c; ++cc) s += q(i, cc) * k(j, cc);
      logits[static_cast<size_t>(j)] = s;
      mx = std::max(mx, s);
    }
    double denom = 0.0;
    for (int j = 0; j < m; ++j) denom += std::exp(logits[static_cast<size_t>(j)] - mx);
    for (int cc = 0; cc < c; ++cc) {
      double s = 0.0;
      for (int j = 0; j < m; ++j)
        s += std::exp(logits[static_cast<size_t>(j)] - mx) / denom * v(j, cc);
      out(i, cc) = s;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("attention mask maps ones to zero and zeros to -inf") {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    auto masks = random_masks(3, 2, 4, 5, rng, rng.uniform(0.05, 0.95));
    const AttentionMask4D am = attention_mask(masks);
    for (int q = 0; q < 3; ++q) {
      bool any = false;
      for (uint8_t b : masks[static_cast<size_t>(q)].v) any = any || b;
      for (int t = 0; t < 2; ++t)
        for (int y = 0; y < 4; ++y)
          for (int x = 0; x < 5; ++x) {
            const double v = am.at(t, y, x, q);
            if (masks[static_cast<size_t>(q)].at(t, y, x)) {
              CHECK(v == 0.0);
            } else if (any) {
              CHECK(std::isinf(v));
              CHECK(v < 0);
            } else {
              CHECK(v == 0.0);  // empty-mask query sees everything
            }
          }
    }
  }
}

TEST_CASE("attention mask -inf count equals the zero count for nonempty masks") {
  Rng rng(32);
  auto masks = random_masks(4, 3, 6, 6, rng, 0.5);
  for (auto& m : masks) m.v[0] = 1;  // keep all masks nonempty
  const AttentionMask4D am = attention_mask(masks);
  int64_t zeros = 0, infs = 0;
  for (size_t q = 0; q < masks.size(); ++q)
    for (size_t i = 0; i < masks[q].v.size(); ++i) {
      if (!masks[q].v[i]) ++zeros;
      if (std::isinf(am.values(static_cast<int>(q), static_cast<int>(i)))) ++infs;
    }
  CHECK(zeros == infs);
}

TEST_CASE("attention mask rejects non-binary values") {
  std::vector<StMask> masks(1, StMask(1, 2, 2));
  masks[0].v[2] = 3;
  CHECK_THROWS_AS(attention_mask(masks), std::invalid_argument);
}

TEST_CASE("all-ones masks produce an all-zero attention bias") {
  std::vector<StMask> masks(2, StMask(2, 3, 3));
  for (auto& m : masks) std::fill(m.v.begin(), m.v.end(), 1);
  const AttentionMask4D am = attention_mask(masks);
  for (int64_t i = 0; i < am.values.numel(); ++i) CHECK(am.values[i] == 0.0);
}

TEST_CASE("cross attention with a single key returns that value row") {
  Rng rng(33);
  const int c = 4;
  Tensor x = random_tensor({3, c}, rng);
  Tensor y = random_tensor({1, c}, rng);
  const Tensor out = cross_att(x, y, identity_maps(c));
  for (int i = 0; i < 3; ++i)
    for (int cc = 0; cc < c; ++cc) CHECK(out(i, cc) == doctest::Approx(y(0, cc)).epsilon(1e-12));
}

TEST_CASE("cross attention with zero query map averages the value rows") {
  Rng rng(34);
  const int c = 5, m = 7;
  Tensor x = random_tensor({2, c}, rng);
  Tensor y = random_tensor({m, c}, rng);
  AttentionMaps f = identity_maps(c);
  f.wq.fill(0.0);
  f.bq.fill(0.0);
  const Tensor out = cross_att(x, y, f);
  for (int cc = 0; cc < c; ++cc) {
    double mean = 0.0;
    for (int j = 0; j < m; ++j) mean += y(j, cc) / m;
    CHECK(out(0, cc) == doctest::Approx(mean).epsilon(1e-9));
    CHECK(out(1, cc) == doctest::Approx(mean).epsilon(1e-9));
  }
}

TEST_CASE("cross attention matches the scalar-loop oracle") {
  Rng rng(35);
  const Tensor x = random_tensor({2, 3}, rng);
  const Tensor y = random_tensor({2, 3}, rng);
  const AttentionMaps f = random_maps(3, rng);
  const Tensor got = cross_att(x, y, f);
  const Tensor want = cross_att_oracle(x, y, f);
  for (int64_t i = 0; i < got.numel(); ++i) CHECK(std::fabs(got[i] - want[i]) < 1e-6);
}

TEST_CASE("cross attention rejects non-finite inputs") {
  Rng rng(36);
  Tensor x = random_tensor({2, 3}, rng);
  x(1, 1) = std::numeric_limits<double>::infinity();
  const Tensor y = random_tensor({2, 3}, rng);
  CHECK_THROWS_AS(cross_att(x, y, random_maps(3, rng)), std::invalid_argument);
}

TEST_CASE("mask attention with all-ones masks equals unmasked attention plus residual") {
  Rng rng(37);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 3, c = 6, t = 2, hf = 3, wf = 4, s = t * hf * wf;
    const Tensor x = random_tensor({n, c}, rng);
    const Tensor features = random_tensor({t, hf, wf, c}, rng);
    const AttentionMaps f = random_maps(c, rng);
    std::vector<StMask> ones(static_cast<size_t>(n), StMask(t, hf, wf));
    for (auto& m : ones) std::fill(m.v.begin(), m.v.end(), 1);
    const MaskAttResult got = mask_att(x, ones, features, f);

    Tensor f2d({s, c});
    for (int64_t i = 0; i < f2d.numel(); ++i) f2d[i] = features[i];
    const Tensor unmasked = cross_att_oracle(x, f2d, f);
    for (int i = 0; i < n; ++i)
      for (int cc = 0; cc < c; ++cc)
        CHECK(std::fabs(got.queries(i, cc) - (unmasked(i, cc) + x(i, cc))) < 1e-6);
  }
}

TEST_CASE("mask attention with a one-hot mask copies the selected value") {
  Rng rng(38);
  const int n = 2, c = 4, t = 1, hf = 2, wf = 3;
  const Tensor x = random_tensor({n, c}, rng);
  const Tensor features = random_tensor({t, hf, wf, c}, rng);
  const AttentionMaps f = random_maps(c, rng);
  std::vector<StMask> masks(static_cast<size_t>(n), StMask(t, hf, wf));
  masks[0].at(0, 1, 2) = 1;
  masks[1].at(0, 0, 0) = 1;
  const MaskAttResult got = mask_att(x, masks, features, f);

  auto value_at = [&](int y, int xx) {
    Tensor row({1, c});
    for (int cc = 0; cc < c; ++cc) row(0, cc) = features(0, y, xx, cc);
    return apply_linear(row, f.wv, f.bv);
  };
  const Tensor v0 = value_at(1, 2), v1 = value_at(0, 0);
  for (int cc = 0; cc < c; ++cc) {
    CHECK(got.queries(0, cc) == doctest::Approx(v0(0, cc) + x(0, cc)).epsilon(1e-9));
    CHECK(got.queries(1, cc) == doctest::Approx(v1(0, cc) + x(1, cc)).epsilon(1e-9));
  }
}

TEST_CASE("mask attention with a zero value map returns the queries bit-exactly") {
  Rng rng(39);
  const int n = 3, c = 5, t = 2, hf = 2, wf = 2;
  const Tensor x = random_tensor({n, c}, rng);
  const Tensor features = random_tensor({t, hf, wf, c}, rng);
  AttentionMaps f = random_maps(c, rng);
  f.wv.fill(0.0);
  f.bv.fill(0.0);
  auto masks = random_masks(n, t, hf, wf, rng, 0.5);
  const MaskAttResult got = mask_att(x, masks, features, f);
  for (int64_t i = 0; i < x.numel(); ++i) CHECK(got.queries[i] == x[i]);
}

TEST_CASE("mask attention rejects a resolution mismatch") {
  Rng rng(40);
  const Tensor x = random_tensor({2, 4}, rng);
  const Tensor features = random_tensor({2, 3, 3, 4}, rng);
  auto masks = random_masks(2, 2, 3, 4, rng, 0.5);  // wf differs
  CHECK_THROWS_AS(mask_att(x, masks, features, random_maps(4, rng)), std::invalid_argument);
}

TEST_CASE("decoder layer equals the manual four-step composition") {
  Rng rng(41);
  const int n = 3, c = 6, t = 2, hf = 3, wf = 3;
  const Tensor features = random_tensor({t, hf, wf, c}, rng);
  const Tensor hand_q = random_tensor({n, c}, rng);
  const Tensor obj_q = random_tensor({n, c}, rng);
  const AttentionMaps f_hh = random_maps(c, rng), f_ho = random_maps(c, rng);
  const AttentionMaps f_oo = random_maps(c, rng), f_oh = random_maps(c, rng);
  auto hand_masks = random_masks(n, t, hf, wf, rng, 0.4);
  auto obj_masks = random_masks(n, t, hf, wf, rng, 0.4);

  for (bool h2o : {true, false}) {
    for (bool o2h : {true, false}) {
      const DecoderLayerResult got = decoder_layer(hand_q, obj_q, hand_masks, obj_masks, features,
                                                   f_hh, f_ho, f_oo, f_oh, h2o, o2h);
      const MaskAttResult hand_att = mask_att(hand_q, hand_masks, features, f_hh);
      const Tensor obj_mixed = h2o ? cross_att(obj_q, hand_att.queries, f_ho) : obj_q;
      const MaskAttResult obj_att = mask_att(obj_mixed, obj_masks, features, f_oo);
      const Tensor hand_out =
          o2h ? cross_att(hand_att.queries, obj_att.queries, f_oh) : hand_att.queries;
      for (int64_t i = 0; i < hand_out.numel(); ++i) {
        CHECK(got.hand_queries[i] == hand_out[i]);
        CHECK(got.obj_queries[i] == obj_att.queries[i]);
      }
      for (int q = 0; q < n; ++q) {
        CHECK(got.hand_masks[static_cast<size_t>(q)] == hand_att.binary[static_cast<size_t>(q)]);
        CHECK(got.obj_masks[static_cast<size_t>(q)] == obj_att.binary[static_cast<size_t>(q)]);
      }
      CHECK(got.hand_queries.dim(0) == n);
      CHECK(got.hand_queries.dim(1) == c);
      CHECK(static_cast<int>(got.obj_masks.size()) == n);
    }
  }
}

TEST_CASE("disabling hand-to-object attention passes the object queries through") {
  Rng rng(42);
  const int n = 2, c = 4, t = 1, hf = 2, wf = 2;
  const Tensor features = random_tensor({t, hf, wf, c}, rng);
  const Tensor hand_q = random_tensor({n, c}, rng);
  const Tensor obj_q = random_tensor({n, c}, rng);
  auto masks = random_masks(n, t, hf, wf, rng, 0.5);
  const AttentionMaps f_hh = random_maps(c, rng), f_ho = random_maps(c, rng);
  const AttentionMaps f_oo = random_maps(c, rng), f_oh = random_maps(c, rng);

  const DecoderLayerResult off = decoder_layer(hand_q, obj_q, masks, masks, features, f_hh, f_ho,
                                               f_oo, f_oh, false, true);
  const MaskAttResult direct = mask_att(obj_q, masks, features, f_oo);
  for (int64_t i = 0; i < direct.queries.numel(); ++i)
    CHECK(off.obj_queries[i] == direct.queries[i]);
}

TEST_CASE("init_queries is shaped and deterministic") {
  auto [h1, o1] = init_queries(8, 64, 1);
  auto [h2, o2] = init_queries(8, 64, 1);
  CHECK(h1.dim(0) == 8);
  CHECK(h1.dim(1) == 64);
  CHECK(o1.dim(0) == 8);
  for (int64_t i = 0; i < h1.numel(); ++i) {
    CHECK(h1[i] == h2[i]);
    CHECK(o1[i] == o2[i]);
  }
  auto [h3, o3] = init_queries(8, 64, 2);
  bool same = true;
  for (int64_t i = 0; i < h1.numel(); ++i) same = same && h1[i] == h3[i];
  CHECK_FALSE(same);
}

TEST_CASE("full decoder forward: shapes, determinism, value ranges") {
  Rng rng(43);
  DecoderConfig cfg;
  cfg.n_queries = 8;
  cfg.channels = 64;
  cfg.layers = 3;
  ParamStore store;
  init_decoder_params(store, cfg, 5);
  const Tensor features = random_tensor({4, 24, 24, 64}, rng, 0.4);

  const DecoderOutput out = decoder_run(features, store, cfg);
  REQUIRE(out.hand_soft.size() == 4);  // initial prediction + 3 layers
  REQUIRE(out.obj_soft.size() == 4);
  CHECK(out.class_logits.dim(0) == 8);
  CHECK(out.class_logits.dim(1) == 2);
  for (const auto& layer : out.obj_soft) {
    CHECK(layer.dim(0) == 8);
    CHECK(layer.dim(1) == 4 * 24 * 24);
    for (int64_t i = 0; i < layer.numel(); ++i) {
      CHECK(layer[i] >= 0.0);
      CHECK(layer[i] <= 1.0);
    }
  }
  for (size_t l = 0; l < out.obj_bin.size(); ++l)
    for (int q = 0; q < 8; ++q)
      for (size_t i = 0; i < out.obj_bin[l][static_cast<size_t>(q)].v.size(); ++i) {
        const uint8_t b = out.obj_bin[l][static_cast<size_t>(q)].v[i];
        CHECK((b == 0 || b == 1));
        CHECK(b == (out.obj_soft[l](q, static_cast<int>(i)) > 0.5 ? 1 : 0));
      }

  const DecoderOutput again = decoder_run(features, store, cfg);
  for (size_t l = 0; l < out.obj_soft.size(); ++l)
    for (int64_t i = 0; i < out.obj_soft[l].numel(); ++i)
      CHECK(out.obj_soft[l][i] == again.obj_soft[l][i]);
  for (int64_t i = 0; i < out.class_logits.numel(); ++i)
    CHECK(out.class_logits[i] == again.class_logits[i]);
}

TEST_CASE("infer_tracks respects the score threshold and query indexing") {
  DecoderOutput out;
  out.t = 1;
  out.hf = 2;
  out.wf = 2;
  out.n = 3;
  out.obj_soft.push_back(Tensor::full({3, 4}, 0.9));
  out.class_logits = Tensor::zeros({3, 2});
  out.class_logits(0, 0) = 4.0;
  out.class_logits(1, 1) = 4.0;
  out.class_logits(2, 0) = 0.0;  // p = 0.5, not strictly above

  auto tracks = infer_tracks(out, 8, 8, 8, 8, 0.5, "clip");
  REQUIRE(tracks.size() == 1);
  CHECK(tracks[0].track_id == 0);
  CHECK(tracks[0].score > 0.5);
  CHECK(tracks[0].mask.t == 1);
  CHECK(tracks[0].mask.h == 8);
  CHECK(tracks[0].mask.w == 8);

  out.class_logits(0, 0) = -4.0;
  CHECK(infer_tracks(out, 8, 8, 8, 8, 0.5, "clip").empty());
}

TEST_CASE("upsampling an all-ones soft mask stays all ones") {
  DecoderOutput out;
  out.t = 1;
  out.hf = 24;
  out.wf = 24;
  out.n = 1;
  out.obj_soft.push_back(Tensor::full({1, 24 * 24}, 1.0));
  out.class_logits = Tensor::zeros({1, 2});
  out.class_logits(0, 0) = 9.0;
  auto tracks = infer_tracks(out, 96, 96, 96, 96, 0.5, "clip");
  REQUIRE(tracks.size() == 1);
  CHECK(tracks[0].mask.area() == 96 * 96);
}

TEST_CASE("two queries above threshold yield distinct track ids") {
  DecoderOutput out;
  out.t = 1;
  out.hf = 2;
  out.wf = 2;
  out.n = 4;
  out.obj_soft.push_back(Tensor::full({4, 4}, 0.8));
  out.class_logits = Tensor::zeros({4, 2});
  out.class_logits(1, 0) = 5.0;
  out.class_logits(3, 0) = 5.0;
  out.class_logits(0, 1) = 5.0;
  out.class_logits(2, 1) = 5.0;
  auto tracks = infer_tracks(out, 4, 4, 8, 8, 0.5, "clip");
  REQUIRE(tracks.size() == 2);
  CHECK(tracks[0].track_id == 1);
  CHECK(tracks[1].track_id == 3);
}

TEST_CASE("softmax rows over the mask-attention support sum to one") {
  Rng rng(44);
  const int n = 4, c = 8, t = 2, hf = 4, wf = 4;
  const Tensor x = random_tensor({n, c}, rng);
  const Tensor features = random_tensor({t, hf, wf, c}, rng);
  auto masks = random_masks(n, t, hf, wf, rng, 0.3);
  const AttentionMaps f = random_maps(c, rng);

  Graph g;
  Graph::Val f2d = g.reshape(g.leaf(features), {t * hf * wf, c});
  const AttentionMask4D bias = attention_mask(masks);
  Graph::Val q = g.linear(g.leaf(x), g.leaf(f.wq), g.leaf(f.bq));
  Graph::Val k = g.linear(f2d, g.leaf(f.wk), g.leaf(f.bk));
  Graph::Val attn = g.softmax_rows(g.matmul_nt(q, k), &bias.values);
  const Tensor& a = g.val(attn);
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int s = 0; s < t * hf * wf; ++s) sum += a(i, s);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
}
