#include "hoist/decoder.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "hoist/rng.hpp"

namespace hoist {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Tensor linear_init(Rng& rng, int rows, int cols, double scale) {
  Tensor w({rows, cols});
  for (int64_t i = 0; i < w.numel(); ++i) w[i] = rng.normal(0.0, scale);
  return w;
}

// Near-identity maps keep attention peaked on the paired slot early in
// training; purely random maps make the first cross attention average all
// queries together, which collapses them beyond recovery at small step sizes.
Tensor identity_plus_noise(Rng& rng, int c, double noise) {
  Tensor w({c, c});
  for (int i = 0; i < c; ++i)
    for (int j = 0; j < c; ++j) w(i, j) = (i == j ? 1.0 : 0.0) + rng.normal(0.0, noise);
  return w;
}

void add_attention_params(ParamStore& store, const std::string& prefix, Rng& rng, int c) {
  const double noise = 0.25 / std::sqrt(static_cast<double>(c));
  store.add(prefix + ".q.w", identity_plus_noise(rng, c, noise));
  store.add(prefix + ".q.b", Tensor::zeros({c}));
  store.add(prefix + ".k.w", identity_plus_noise(rng, c, noise));
  store.add(prefix + ".k.b", Tensor::zeros({c}));
  store.add(prefix + ".v.w", identity_plus_noise(rng, c, noise));
  store.add(prefix + ".v.b", Tensor::zeros({c}));
}

std::vector<StMask> threshold_soft(const Tensor& soft, int t, int hf, int wf) {
  const int n = soft.dim(0);
  std::vector<StMask> out(static_cast<size_t>(n), StMask(t, hf, wf));
  for (int q = 0; q < n; ++q)
    for (int64_t s = 0; s < static_cast<int64_t>(t) * hf * wf; ++s)
      out[static_cast<size_t>(q)].v[static_cast<size_t>(s)] = soft(q, static_cast<int>(s)) > 0.5;
  return out;
}

AttentionMapRefs leaf_attention(Graph& g, const AttentionMaps& f) {
  return {g.leaf(f.wq), g.leaf(f.bq), g.leaf(f.wk), g.leaf(f.bk), g.leaf(f.wv), g.leaf(f.bv)};
}

}  // namespace

void DecoderConfig::validate() const {
  if (n_queries < 1) throw std::invalid_argument("decoder: n_queries must be >= 1");
  if (channels < 1) throw std::invalid_argument("decoder: channels must be >= 1");
  if (layers < 1) throw std::invalid_argument("decoder: layers must be >= 1");
}

AttentionMask4D attention_mask(const std::vector<StMask>& masks) {
  if (masks.empty()) throw std::invalid_argument("attention_mask: no masks");
  const int n = static_cast<int>(masks.size());
  const int t = masks[0].t, h = masks[0].h, w = masks[0].w;
  const int64_t s = static_cast<int64_t>(t) * h * w;
  AttentionMask4D out;
  out.t = t;
  out.h = h;
  out.w = w;
  out.n = n;
  out.values = Tensor({n, static_cast<int>(s)});
  for (int q = 0; q < n; ++q) {
    const StMask& m = masks[static_cast<size_t>(q)];
    if (m.t != t || m.h != h || m.w != w)
      throw std::invalid_argument("attention_mask: inconsistent mask shapes");
    bool any = false;
    for (int64_t i = 0; i < s; ++i) {
      const uint8_t b = m.v[static_cast<size_t>(i)];
      if (b != 0 && b != 1) throw std::invalid_argument("attention_mask: non-binary mask value");
      if (b) any = true;
    }
    for (int64_t i = 0; i < s; ++i)
      out.values(q, static_cast<int>(i)) =
          any ? (m.v[static_cast<size_t>(i)] ? 0.0 : kNegInf) : 0.0;
  }
  return out;
}

std::pair<Tensor, Tensor> init_queries(int n, int c, uint64_t seed) {
  if (n < 1 || c < 1) throw std::invalid_argument("init_queries: N and C must be >= 1");
  Rng rng(Rng::derive(seed, 0x9E44u));
  // Query pair i shares a slot anchor so the hand and object of one track
  // find each other through the near-identity cross attentions, and so the
  // initial dot-product masks differ enough per query to keep the bipartite
  // assignment from oscillating between look-alike queries.
  Tensor anchors = linear_init(rng, n, c, 1.0);
  Tensor hand = linear_init(rng, n, c, 0.1);
  Tensor obj = linear_init(rng, n, c, 0.1);
  for (int64_t i = 0; i < hand.numel(); ++i) {
    hand[i] += anchors[i];
    obj[i] += anchors[i];
  }
  return {std::move(hand), std::move(obj)};
}

void init_decoder_params(ParamStore& store, const DecoderConfig& cfg, uint64_t seed) {
  cfg.validate();
  auto [hand, obj] = init_queries(cfg.n_queries, cfg.channels, seed);
  store.add("dec.query.hand", std::move(hand));
  store.add("dec.query.obj", std::move(obj));
  Rng rng(Rng::derive(seed, 0xDEC0u));
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string p = "dec.layer" + std::to_string(l);
    add_attention_params(store, p + ".hh", rng, cfg.channels);
    add_attention_params(store, p + ".ho", rng, cfg.channels);
    add_attention_params(store, p + ".oo", rng, cfg.channels);
    add_attention_params(store, p + ".oh", rng, cfg.channels);
  }
  store.add("dec.class.w", linear_init(rng, cfg.channels, 2, 0.1));
  store.add("dec.class.b", Tensor::zeros({2}));
}

AttentionMapRefs bind_attention(const ParamBinding& p, const std::string& prefix) {
  return {p[prefix + ".q.w"], p[prefix + ".q.b"], p[prefix + ".k.w"],
          p[prefix + ".k.b"], p[prefix + ".v.w"], p[prefix + ".v.b"]};
}

Graph::Val cross_att_node(Graph& g, Graph::Val x, Graph::Val y, const AttentionMapRefs& f) {
  if (!g.val(x).all_finite() || !g.val(y).all_finite())
    throw std::invalid_argument("cross attention: non-finite inputs");
  Graph::Val q = g.linear(x, f.wq, f.bq);
  Graph::Val k = g.linear(y, f.wk, f.bk);
  Graph::Val v = g.linear(y, f.wv, f.bv);
  Graph::Val attn = g.softmax_rows(g.matmul_nt(q, k));
  return g.matmul(attn, v);
}

MaskAttNodes mask_att_node(Graph& g, Graph::Val x, const std::vector<StMask>& masks,
                           Graph::Val features2d, const AttentionMapRefs& f, int t, int hf,
                           int wf) {
  const Tensor& fx = g.val(x);
  const Tensor& ff = g.val(features2d);
  if (static_cast<int>(masks.size()) != fx.dim(0))
    throw std::invalid_argument("mask attention: one mask per query required");
  if (!masks.empty() && (masks[0].t != t || masks[0].h != hf || masks[0].w != wf))
    throw std::invalid_argument("mask attention: mask resolution does not match features");
  if (ff.dim(0) != t * hf * wf)
    throw std::invalid_argument("mask attention: feature size mismatch");

  const AttentionMask4D bias = attention_mask(masks);
  Graph::Val q = g.linear(x, f.wq, f.bq);
  Graph::Val k = g.linear(features2d, f.wk, f.bk);
  Graph::Val v = g.linear(features2d, f.wv, f.bv);
  Graph::Val attn = g.softmax_rows(g.matmul_nt(q, k), &bias.values);
  Graph::Val updated = g.add(g.matmul(attn, v), x);

  MaskAttNodes out;
  out.queries = updated;
  out.mask_logits = g.matmul_nt(updated, features2d);
  out.soft = g.sigmoid(out.mask_logits);
  out.binary = threshold_soft(g.val(out.soft), t, hf, wf);
  return out;
}

DecoderLayerNodes decoder_layer_node(Graph& g, Graph::Val hand_q, Graph::Val obj_q,
                                     const std::vector<StMask>& hand_masks,
                                     const std::vector<StMask>& obj_masks, Graph::Val features2d,
                                     const AttentionMapRefs& f_hh, const AttentionMapRefs& f_ho,
                                     const AttentionMapRefs& f_oo, const AttentionMapRefs& f_oh,
                                     bool h2o_enabled, bool o2h_enabled, int t, int hf, int wf) {
  DecoderLayerNodes out;
  out.hand_att = mask_att_node(g, hand_q, hand_masks, features2d, f_hh, t, hf, wf);
  Graph::Val obj_mixed = h2o_enabled ? cross_att_node(g, obj_q, out.hand_att.queries, f_ho) : obj_q;
  out.obj_att = mask_att_node(g, obj_mixed, obj_masks, features2d, f_oo, t, hf, wf);
  out.obj_queries = out.obj_att.queries;
  out.hand_queries =
      o2h_enabled ? cross_att_node(g, out.hand_att.queries, out.obj_queries, f_oh)
                  : out.hand_att.queries;
  return out;
}

DecoderGraph decoder_forward(Graph& g, Graph::Val features, const ParamBinding& p,
                             const DecoderConfig& cfg, const FrozenMasks* frozen) {
  cfg.validate();
  const Tensor& ft = g.val(features);
  if (ft.rank() != 4) throw std::invalid_argument("decoder: features must be (T,H',W',C)");
  const int t = ft.dim(0), hf = ft.dim(1), wf = ft.dim(2), c = ft.dim(3);
  if (c != cfg.channels) throw std::invalid_argument("decoder: channel mismatch");
  const int s = t * hf * wf;

  DecoderGraph out;
  out.t = t;
  out.hf = hf;
  out.wf = wf;
  out.n = cfg.n_queries;

  Graph::Val f2d = g.reshape(features, {s, c});
  Graph::Val hand_q = p["dec.query.hand"];
  Graph::Val obj_q = p["dec.query.obj"];

  // Initial prediction straight from the learnable queries.
  Graph::Val h_logits = g.matmul_nt(hand_q, f2d);
  Graph::Val o_logits = g.matmul_nt(obj_q, f2d);
  out.hand_logits.push_back(h_logits);
  out.obj_logits.push_back(o_logits);
  out.hand_soft.push_back(g.sigmoid(h_logits));
  out.obj_soft.push_back(g.sigmoid(o_logits));
  out.hand_bin.push_back(threshold_soft(g.val(out.hand_soft.back()), t, hf, wf));
  out.obj_bin.push_back(threshold_soft(g.val(out.obj_soft.back()), t, hf, wf));

  for (int l = 0; l < cfg.layers; ++l) {
    const std::string pre = "dec.layer" + std::to_string(l);
    const auto& hand_in = frozen ? frozen->hand.at(static_cast<size_t>(l)) : out.hand_bin.back();
    const auto& obj_in = frozen ? frozen->obj.at(static_cast<size_t>(l)) : out.obj_bin.back();
    DecoderLayerNodes ln = decoder_layer_node(
        g, hand_q, obj_q, hand_in, obj_in, f2d,
        bind_attention(p, pre + ".hh"), bind_attention(p, pre + ".ho"),
        bind_attention(p, pre + ".oo"), bind_attention(p, pre + ".oh"),
        cfg.hand_to_object_attn, cfg.object_to_hand_attn, t, hf, wf);
    hand_q = ln.hand_queries;
    obj_q = ln.obj_queries;
    out.hand_logits.push_back(ln.hand_att.mask_logits);
    out.obj_logits.push_back(ln.obj_att.mask_logits);
    out.hand_soft.push_back(ln.hand_att.soft);
    out.obj_soft.push_back(ln.obj_att.soft);
    out.hand_bin.push_back(ln.hand_att.binary);
    out.obj_bin.push_back(ln.obj_att.binary);
  }

  out.final_hand = hand_q;
  out.final_obj = obj_q;
  out.class_logits = g.linear(obj_q, p["dec.class.w"], p["dec.class.b"]);
  return out;
}

// --- value-level wrappers ----------------------------------------------------

Tensor cross_att(const Tensor& x, const Tensor& y, const AttentionMaps& f) {
  Graph g;
  Graph::Val out = cross_att_node(g, g.leaf(x), g.leaf(y), leaf_attention(g, f));
  return g.val(out);
}

MaskAttResult mask_att(const Tensor& x, const std::vector<StMask>& masks, const Tensor& features,
                       const AttentionMaps& f) {
  if (features.rank() != 4) throw std::invalid_argument("mask_att: features must be (T,H',W',C)");
  const int t = features.dim(0), hf = features.dim(1), wf = features.dim(2), c = features.dim(3);
  Graph g;
  Graph::Val f2d = g.reshape(g.leaf(features), {t * hf * wf, c});
  MaskAttNodes nodes = mask_att_node(g, g.leaf(x), masks, f2d, leaf_attention(g, f), t, hf, wf);
  MaskAttResult res;
  res.queries = g.val(nodes.queries);
  res.binary = nodes.binary;
  res.soft = g.val(nodes.soft);
  return res;
}

DecoderLayerResult decoder_layer(const Tensor& hand_q, const Tensor& obj_q,
                                 const std::vector<StMask>& hand_masks,
                                 const std::vector<StMask>& obj_masks, const Tensor& features,
                                 const AttentionMaps& f_hh, const AttentionMaps& f_ho,
                                 const AttentionMaps& f_oo, const AttentionMaps& f_oh,
                                 bool h2o_enabled, bool o2h_enabled) {
  const int t = features.dim(0), hf = features.dim(1), wf = features.dim(2), c = features.dim(3);
  Graph g;
  Graph::Val f2d = g.reshape(g.leaf(features), {t * hf * wf, c});
  DecoderLayerNodes ln = decoder_layer_node(
      g, g.leaf(hand_q), g.leaf(obj_q), hand_masks, obj_masks, f2d, leaf_attention(g, f_hh),
      leaf_attention(g, f_ho), leaf_attention(g, f_oo), leaf_attention(g, f_oh), h2o_enabled,
      o2h_enabled, t, hf, wf);
  DecoderLayerResult res;
  res.hand_queries = g.val(ln.hand_queries);
  res.obj_queries = g.val(ln.obj_queries);
  res.hand_masks = ln.hand_att.binary;
  res.obj_masks = ln.obj_att.binary;
  return res;
}

DecoderOutput decoder_run(const Tensor& features, const ParamStore& store,
                          const DecoderConfig& cfg) {
  Graph g;
  ParamBinding bind(g, store);
  DecoderGraph dg = decoder_forward(g, g.leaf(features), bind, cfg);
  DecoderOutput out;
  out.t = dg.t;
  out.hf = dg.hf;
  out.wf = dg.wf;
  out.n = dg.n;
  for (size_t l = 0; l < dg.hand_soft.size(); ++l) {
    out.hand_soft.push_back(g.val(dg.hand_soft[l]));
    out.obj_soft.push_back(g.val(dg.obj_soft[l]));
  }
  out.hand_bin = dg.hand_bin;
  out.obj_bin = dg.obj_bin;
  out.class_logits = g.val(dg.class_logits);
  out.final_hand_queries = g.val(dg.final_hand);
  out.final_obj_queries = g.val(dg.final_obj);
  return out;
}

std::vector<StMask> binarize_soft(const Tensor& soft, int t, int hf, int wf) {
  return threshold_soft(soft, t, hf, wf);
}

std::vector<PredictedTrack> infer_tracks(const DecoderOutput& out, int clip_h, int clip_w,
                                         int padded_h, int padded_w, double score_thresh,
                                         const std::string& clip_id) {
  if (score_thresh <= 0.0 || score_thresh >= 1.0)
    throw std::invalid_argument("infer_tracks: score threshold must be in (0,1)");
  std::vector<PredictedTrack> tracks;
  const Tensor& logits = out.class_logits;
  const Tensor& soft = out.obj_soft.back();  // (N, S)
  for (int q = 0; q < out.n; ++q) {
    const double z0 = logits(q, 0), z1 = logits(q, 1);
    const double m = std::max(z0, z1);
    const double p_track = std::exp(z0 - m) / (std::exp(z0 - m) + std::exp(z1 - m));
    if (!(p_track > score_thresh)) continue;
    Tensor plane({out.t, out.hf, out.wf});
    for (int64_t i = 0; i < plane.numel(); ++i) plane[i] = soft(q, static_cast<int>(i));
    PredictedTrack tr;
    tr.clip_id = clip_id;
    tr.track_id = q;
    tr.score = p_track;
    tr.mask = upsample_soft_threshold(plane, out.t, out.hf, out.wf, padded_h, padded_w,
                                      clip_h, clip_w);
    tracks.push_back(std::move(tr));
  }
  return tracks;
}

}  // namespace hoist
