#include "hoist/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hoist {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Tensor stmask_to_tensor(const StMask& m) {
  Tensor t({static_cast<int>(m.v.size())});
  for (size_t i = 0; i < m.v.size(); ++i) t[static_cast<int64_t>(i)] = m.v[i];
  return t;
}

StMask pad_mask(const StMask& m, int padded_h, int padded_w) {
  StMask out(m.t, padded_h, padded_w);
  for (int t = 0; t < m.t; ++t)
    for (int y = 0; y < m.h; ++y)
      for (int x = 0; x < m.w; ++x)
        if (m.at(t, y, x)) out.at(t, y, x) = 1;
  return out;
}

// Value-level noisy-or dilation over a (2r+1)^2 window; the graph op applies
// the same formula.
Tensor soft_dilate(const Tensor& plane, int t, int h, int w, int radius) {
  Tensor out({t, h, w});
  for (int ti = 0; ti < t; ++ti)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double neg = 1.0;
        for (int dy = -radius; dy <= radius; ++dy) {
          const int y2 = y + dy;
          if (y2 < 0 || y2 >= h) continue;
          for (int dx = -radius; dx <= radius; ++dx) {
            const int x2 = x + dx;
            if (x2 < 0 || x2 >= w) continue;
            neg *= 1.0 - plane(ti, y2, x2);
          }
        }
        out(ti, y, x) = 1.0 - neg;
      }
  return out;
}

double softmax_prob_track(const Tensor& logits, int row) {
  const double z0 = logits(row, 0), z1 = logits(row, 1);
  const double m = std::max(z0, z1);
  const double e0 = std::exp(z0 - m), e1 = std::exp(z1 - m);
  return e0 / (e0 + e1);
}

Tensor row_of(const Tensor& m, int row) {
  const int s = m.dim(1);
  Tensor out({s});
  for (int i = 0; i < s; ++i) out(i) = m(row, i);
  return out;
}

MatchResult match_from_values(const Tensor& class_logits, const Tensor& hand_soft,
                              const Tensor& obj_soft, int t, int hf, int wf,
                              const std::vector<GtPair>& gts, const LossWeights& w) {
  MatchResult res;
  if (gts.empty()) return res;
  const int n_gt = static_cast<int>(gts.size());
  const int n_q = class_logits.dim(0);
  if (n_gt > n_q)
    throw std::invalid_argument(
        "match_tracks: more ground-truth tracks than queries; raise the query count N");

  // Contact prediction depends only on the query, so build it once per query.
  std::vector<Tensor> contact_pred;
  if (w.contact_active()) {
    for (int q = 0; q < n_q; ++q) {
      Tensor hrow({t, hf, wf}), orow({t, hf, wf});
      for (int64_t i = 0; i < hrow.numel(); ++i) {
        hrow[i] = hand_soft(q, static_cast<int>(i));
        orow[i] = obj_soft(q, static_cast<int>(i));
      }
      Tensor dh = soft_dilate(hrow, t, hf, wf, w.contact_radius);
      Tensor dobj = soft_dilate(orow, t, hf, wf, w.contact_radius);
      Tensor prod({t, hf, wf});
      for (int64_t i = 0; i < prod.numel(); ++i) prod[i] = dh[i] * dobj[i];
      contact_pred.push_back(std::move(prod));
    }
  }

  Tensor cost({n_gt, n_q});
  for (int j = 0; j < n_gt; ++j) {
    const GtPair& gt = gts[static_cast<size_t>(j)];
    const Tensor gt_hand = stmask_to_tensor(gt.hand);
    const Tensor gt_obj = stmask_to_tensor(gt.object);
    const Tensor gt_contact = stmask_to_tensor(gt.contact);
    for (int q = 0; q < n_q; ++q) {
      const double p = softmax_prob_track(class_logits, q);
      double c = -std::log(std::max(p, 1e-12));
      const Tensor ph = row_of(hand_soft, q);
      const Tensor po = row_of(obj_soft, q);
      c += w.lambda1 * bce_mask_loss(ph, gt_hand);
      c += w.lambda2 * bce_mask_loss(po, gt_obj);
      c += w.lambda4 * dice_loss(ph, gt_hand, w.dice_eps);
      c += w.lambda5 * dice_loss(po, gt_obj, w.dice_eps);
      if (w.contact_active()) {
        Tensor pc({static_cast<int>(contact_pred[static_cast<size_t>(q)].numel())});
        for (int64_t i = 0; i < pc.numel(); ++i) pc[i] = contact_pred[static_cast<size_t>(q)][i];
        c += w.lambda3 * bce_mask_loss(pc, gt_contact);
        c += w.lambda6 * dice_loss(pc, gt_contact, w.dice_eps);
      }
      cost(j, q) = c;
    }
  }
  return hungarian(cost);
}

}  // namespace

MatchResult hungarian(const Tensor& cost) {
  if (cost.rank() != 2) throw std::invalid_argument("hungarian: cost must be a matrix");
  const int n = cost.dim(0), m = cost.dim(1);
  if (n > m)
    throw std::invalid_argument(
        "hungarian: rows exceed columns; raise the query count N so every track can be assigned");
  for (int64_t i = 0; i < cost.numel(); ++i)
    if (!std::isfinite(cost[i])) throw std::invalid_argument("hungarian: non-finite cost");

  // Shortest augmenting paths with potentials; 1-indexed internals.
  std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(m) + 1, 0.0);
  std::vector<int> p(static_cast<size_t>(m) + 1, 0), way(static_cast<size_t>(m) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<size_t>(m) + 1, kInf);
    std::vector<char> used(static_cast<size_t>(m) + 1, 0);
    do {
      used[static_cast<size_t>(j0)] = 1;
      const int i0 = p[static_cast<size_t>(j0)];
      double delta = kInf;
      int j1 = -1;
      for (int j = 1; j <= m; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<size_t>(j0)];
      p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0);
  }

  MatchResult res;
  res.assignment.assign(static_cast<size_t>(n), -1);
  for (int j = 1; j <= m; ++j)
    if (p[static_cast<size_t>(j)] != 0) res.assignment[static_cast<size_t>(p[static_cast<size_t>(j)]) - 1] = j - 1;
  for (int i = 0; i < n; ++i) res.total_cost += cost(i, res.assignment[static_cast<size_t>(i)]);
  return res;
}

std::vector<GtPair> build_gt_pairs(const ClipRecord& rec, int stride, int padded_h, int padded_w,
                                   int contact_radius) {
  std::vector<const TrackAnnotation*> hands, objects;
  for (const auto& tr : rec.tracks) {
    if (tr.kind == TrackKind::hand)
      hands.push_back(&tr);
    else if (tr.ever_nonempty())
      objects.push_back(&tr);
  }
  std::vector<StMask> hand_ds;
  hand_ds.reserve(hands.size());
  for (const auto* h : hands)
    hand_ds.push_back(downsample_majority(pad_mask(h->masks, padded_h, padded_w), stride));

  std::vector<GtPair> out;
  for (const auto* obj : objects) {
    GtPair pair;
    pair.object_track_id = obj->track_id;
    pair.object = downsample_majority(pad_mask(obj->masks, padded_h, padded_w), stride);
    int64_t best_area = 0;
    int best = -1;
    for (size_t k = 0; k < hands.size(); ++k) {
      const int64_t area = contact_mask(hand_ds[k], pair.object, contact_radius).area();
      if (area > best_area) {
        best_area = area;
        best = static_cast<int>(k);
      }
    }
    if (best >= 0) {
      pair.hand_track_id = hands[static_cast<size_t>(best)]->track_id;
      pair.hand = hand_ds[static_cast<size_t>(best)];
    } else {
      pair.hand = StMask(pair.object.t, pair.object.h, pair.object.w);
    }
    pair.contact = contact_mask(pair.hand, pair.object, contact_radius);
    out.push_back(std::move(pair));
  }
  return out;
}

double combine_loss_terms(double cls, double mask_h_raw, double mask_o_raw, double mask_c_raw,
                          double dice_h_raw, double dice_o_raw, double dice_c_raw,
                          const LossWeights& w) {
  return cls + w.lambda1 * mask_h_raw + w.lambda2 * mask_o_raw + w.lambda3 * mask_c_raw +
         w.lambda4 * dice_h_raw + w.lambda5 * dice_o_raw + w.lambda6 * dice_c_raw;
}

double bce_mask_loss(const Tensor& pred, const Tensor& gt) {
  if (!pred.same_shape(gt)) throw std::invalid_argument("bce_mask_loss: shape mismatch");
  const int64_t n = pred.numel();
  if (n == 0) throw std::invalid_argument("bce_mask_loss: empty input");
  const double eps = 1e-12;
  double loss = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double p = pred[i];
    if (p < 0.0 || p > 1.0)
      throw std::invalid_argument("bce_mask_loss: prediction outside [0,1]");
    loss += gt[i] > 0.5 ? -std::log(std::max(p, eps)) : -std::log(std::max(1.0 - p, eps));
  }
  return loss / static_cast<double>(n);
}

double dice_loss(const Tensor& pred, const Tensor& gt, double eps) {
  if (!pred.same_shape(gt)) throw std::invalid_argument("dice_loss: shape mismatch");
  if (eps <= 0.0) throw std::invalid_argument("dice_loss: eps must be positive");
  double inter = 0.0, psum = 0.0, gsum = 0.0;
  for (int64_t i = 0; i < pred.numel(); ++i) {
    const double p = pred[i];
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("dice_loss: prediction outside [0,1]");
    inter += p * gt[i];
    psum += p;
    gsum += gt[i];
  }
  return 1.0 - (2.0 * inter + eps) / (psum + gsum + eps);
}

double class_loss(const Tensor& logits, const std::vector<int>& targets,
                  double no_object_weight) {
  if (logits.rank() != 2 || logits.dim(1) != 2)
    throw std::invalid_argument("class_loss: logits must be (N,2)");
  const int n = logits.dim(0);
  if (static_cast<int>(targets.size()) != n)
    throw std::invalid_argument("class_loss: one target per query required");
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z0 = logits(i, 0), z1 = logits(i, 1);
    const double m = std::max(z0, z1);
    const double lse = m + std::log(std::exp(z0 - m) + std::exp(z1 - m));
    const double nll = lse - (targets[static_cast<size_t>(i)] == 0 ? z0 : z1);
    loss += (targets[static_cast<size_t>(i)] == 1 ? no_object_weight : 1.0) * nll;
  }
  return loss / static_cast<double>(n);
}

MatchResult match_tracks(const DecoderOutput& out, const std::vector<GtPair>& gts,
                         const LossWeights& w) {
  return match_from_values(out.class_logits, out.hand_soft.back(), out.obj_soft.back(), out.t,
                           out.hf, out.wf, gts, w);
}

MatchResult match_tracks_graph(const Graph& g, const DecoderGraph& dec,
                               const std::vector<GtPair>& gts, const LossWeights& w) {
  return match_from_values(g.val(dec.class_logits), g.val(dec.hand_soft.back()),
                           g.val(dec.obj_soft.back()), dec.t, dec.hf, dec.wf, gts, w);
}

namespace {

struct LayerInputs {
  Graph::Val hand_logits = -1, obj_logits = -1;  // optional fused path
  Graph::Val hand_soft = -1, obj_soft = -1;
};

LossNodes build_loss_impl(Graph& g, const std::vector<LayerInputs>& layers, Graph::Val class_logits,
                          int t, int hf, int wf, int n_queries, const std::vector<GtPair>& gts,
                          const LossWeights& w, const MatchResult& match) {
  const int n_gt = static_cast<int>(gts.size());
  if (n_gt > 0 && static_cast<int>(match.assignment.size()) != n_gt)
    throw std::invalid_argument("build_total_loss: match/gt size mismatch");

  std::vector<Tensor> gt_hand, gt_obj, gt_contact;
  for (const auto& gt : gts) {
    gt_hand.push_back(stmask_to_tensor(gt.hand));
    gt_obj.push_back(stmask_to_tensor(gt.object));
    gt_contact.push_back(stmask_to_tensor(gt.contact));
  }

  std::vector<Graph::Val> mask_h_terms, mask_o_terms, mask_c_terms;
  std::vector<Graph::Val> dice_h_terms, dice_o_terms, dice_c_terms;

  for (const auto& layer : layers) {
    for (int j = 0; j < n_gt; ++j) {
      const int q = match.assignment[static_cast<size_t>(j)];
      Graph::Val ph = g.slice_row(layer.hand_soft, q);
      Graph::Val po = g.slice_row(layer.obj_soft, q);
      if (layer.hand_logits >= 0) {
        mask_h_terms.push_back(
            g.bce_with_logits_mean(g.slice_row(layer.hand_logits, q), gt_hand[static_cast<size_t>(j)]));
        mask_o_terms.push_back(
            g.bce_with_logits_mean(g.slice_row(layer.obj_logits, q), gt_obj[static_cast<size_t>(j)]));
      } else {
        mask_h_terms.push_back(g.bce_mean(ph, gt_hand[static_cast<size_t>(j)]));
        mask_o_terms.push_back(g.bce_mean(po, gt_obj[static_cast<size_t>(j)]));
      }
      dice_h_terms.push_back(g.dice_loss(ph, gt_hand[static_cast<size_t>(j)], w.dice_eps));
      dice_o_terms.push_back(g.dice_loss(po, gt_obj[static_cast<size_t>(j)], w.dice_eps));
      if (w.contact_active()) {
        Graph::Val dh = g.dilate_noisy_or(g.reshape(ph, {1, t, hf, wf}), w.contact_radius);
        Graph::Val dobj = g.dilate_noisy_or(g.reshape(po, {1, t, hf, wf}), w.contact_radius);
        Graph::Val pc = g.reshape(g.mul(dh, dobj), {t * hf * wf});
        mask_c_terms.push_back(g.bce_mean(pc, gt_contact[static_cast<size_t>(j)]));
        dice_c_terms.push_back(g.dice_loss(pc, gt_contact[static_cast<size_t>(j)], w.dice_eps));
      }
    }
  }

  // Average over matched pairs inside each layer, i.e. divide the flat sum by
  // the pair count; the layer sum is kept.
  const double pair_scale = n_gt > 0 ? 1.0 / n_gt : 0.0;
  auto reduce = [&](const std::vector<Graph::Val>& terms) -> Graph::Val {
    if (terms.empty()) return g.leaf(Tensor::scalar(0.0));
    return g.weighted_sum(terms, std::vector<double>(terms.size(), pair_scale));
  };
  Graph::Val mask_h = reduce(mask_h_terms), mask_o = reduce(mask_o_terms),
             mask_c = reduce(mask_c_terms);
  Graph::Val dice_h = reduce(dice_h_terms), dice_o = reduce(dice_o_terms),
             dice_c = reduce(dice_c_terms);

  std::vector<int> targets(static_cast<size_t>(n_queries), 1);
  std::vector<double> row_w(static_cast<size_t>(n_queries), w.no_object_weight);
  for (int j = 0; j < n_gt; ++j) {
    targets[static_cast<size_t>(match.assignment[static_cast<size_t>(j)])] = 0;
    row_w[static_cast<size_t>(match.assignment[static_cast<size_t>(j)])] = 1.0;
  }
  Graph::Val cls = g.cross_entropy_rows(class_logits, targets, row_w);

  LossNodes out;
  out.total = g.weighted_sum({cls, mask_h, mask_o, mask_c, dice_h, dice_o, dice_c},
                             {1.0, w.lambda1, w.lambda2, w.lambda3, w.lambda4, w.lambda5,
                              w.lambda6});
  out.breakdown.cls = g.val(cls)[0];
  out.breakdown.mask_h = w.lambda1 * g.val(mask_h)[0];
  out.breakdown.mask_o = w.lambda2 * g.val(mask_o)[0];
  out.breakdown.mask_c = w.lambda3 * g.val(mask_c)[0];
  out.breakdown.dice_h = w.lambda4 * g.val(dice_h)[0];
  out.breakdown.dice_o = w.lambda5 * g.val(dice_o)[0];
  out.breakdown.dice_c = w.lambda6 * g.val(dice_c)[0];
  out.breakdown.total = g.val(out.total)[0];
  return out;
}

}  // namespace

LossNodes build_total_loss(Graph& g, const DecoderGraph& dec, const std::vector<GtPair>& gts,
                           const LossWeights& w, const MatchResult& match) {
  std::vector<LayerInputs> layers;
  for (size_t l = 0; l < dec.hand_soft.size(); ++l) {
    LayerInputs li;
    li.hand_logits = dec.hand_logits[l];
    li.obj_logits = dec.obj_logits[l];
    li.hand_soft = dec.hand_soft[l];
    li.obj_soft = dec.obj_soft[l];
    layers.push_back(li);
  }
  return build_loss_impl(g, layers, dec.class_logits, dec.t, dec.hf, dec.wf, dec.n, gts, w,
                         match);
}

LossBreakdown total_loss(const DecoderOutput& out, const std::vector<GtPair>& gts,
                         const LossWeights& w) {
  MatchResult match = match_tracks(out, gts, w);
  Graph g;
  std::vector<LayerInputs> layers;
  const int s = out.t * out.hf * out.wf;
  for (size_t l = 0; l < out.hand_soft.size(); ++l) {
    LayerInputs li;
    Tensor hs = out.hand_soft[l];
    Tensor os = out.obj_soft[l];
    if (hs.rank() != 2) {
      hs = Tensor::from({out.n, s}, std::vector<double>(hs.data(), hs.data() + hs.numel()));
      os = Tensor::from({out.n, s}, std::vector<double>(os.data(), os.data() + os.numel()));
    }
    li.hand_soft = g.leaf(std::move(hs));
    li.obj_soft = g.leaf(std::move(os));
    layers.push_back(li);
  }
  Graph::Val cls_leaf = g.leaf(out.class_logits);
  return build_loss_impl(g, layers, cls_leaf, out.t, out.hf, out.wf, out.n, gts, w, match)
      .breakdown;
}

}  // namespace hoist
