#pragma once

#include <vector>

#include "hoist/data_model.hpp"
#include "hoist/decoder.hpp"
#include "hoist/graph.hpp"
#include "hoist/mask.hpp"

namespace hoist {

// Multi-task objective weights. Mask and dice losses are linear combinations
// of hand, object and contact terms; lambda2/lambda5 (object) default to 5 and
// the rest to 0.001.
struct LossWeights {
  double lambda1 = 0.001, lambda2 = 5.0, lambda3 = 0.001;
  double lambda4 = 0.001, lambda5 = 5.0, lambda6 = 0.001;
  double no_object_weight = 0.1;
  int contact_radius = 2;
  bool contact_loss_enabled = true;
  double dice_eps = 1.0;

  bool contact_active() const {
    return contact_loss_enabled && (lambda3 != 0.0 || lambda6 != 0.0);
  }
};

// Injective ground-truth -> query assignment.
struct MatchResult {
  std::vector<int> assignment;  // assignment[gt] = query index
  double total_cost = 0.0;
};

// Minimum-cost injective assignment of all n rows to distinct columns of an
// n x m cost matrix, n <= m.
MatchResult hungarian(const Tensor& cost);

// One supervision target: an ever-held object, its holding hand, and their
// contact region, all at feature resolution.
struct GtPair {
  int object_track_id = -1;
  int hand_track_id = -1;  // -1 when no hand overlaps
  StMask hand, object, contact;
};

// Downsamples annotations to feature resolution and pairs each ever-held
// object with the hand of maximal accumulated contact overlap.
std::vector<GtPair> build_gt_pairs(const ClipRecord& rec, int stride, int padded_h, int padded_w,
                                   int contact_radius);

// Weighted per-component contributions; total = cls + sum of the six terms.
struct LossBreakdown {
  double cls = 0, mask_h = 0, mask_o = 0, mask_c = 0;
  double dice_h = 0, dice_o = 0, dice_c = 0;
  double total = 0;
};

double combine_loss_terms(double cls, double mask_h_raw, double mask_o_raw, double mask_c_raw,
                          double dice_h_raw, double dice_o_raw, double dice_c_raw,
                          const LossWeights& w);

// --- scalar loss contracts ----------------------------------------------------

// Mean binary cross-entropy over all locations; pred must lie in [0,1].
double bce_mask_loss(const Tensor& pred, const Tensor& gt);

// 1 - (2*sum(p*g)+eps)/(sum(p)+sum(g)+eps)
double dice_loss(const Tensor& pred, const Tensor& gt, double eps = 1.0);

// Mean softmax cross-entropy over queries; rows with target class 1
// (no-object) are scaled by no_object_weight.
double class_loss(const Tensor& logits, const std::vector<int>& targets,
                  double no_object_weight);

// Final-layer matching cost mirroring the loss terms; one assignment is
// reused for every layer's supervision.
MatchResult match_tracks(const DecoderOutput& out, const std::vector<GtPair>& gts,
                         const LossWeights& w);

// Deep-supervised total: mask/dice terms averaged over matched pairs and
// summed over the initial prediction plus all decoder layers; class loss on
// the final layer only.
LossBreakdown total_loss(const DecoderOutput& out, const std::vector<GtPair>& gts,
                         const LossWeights& w);

// --- graph-side builder for training ----------------------------------------

struct LossNodes {
  Graph::Val total = -1;
  LossBreakdown breakdown;
};

LossNodes build_total_loss(Graph& g, const DecoderGraph& dec, const std::vector<GtPair>& gts,
                           const LossWeights& w, const MatchResult& match);

// Matching from graph values (same code path as match_tracks).
MatchResult match_tracks_graph(const Graph& g, const DecoderGraph& dec,
                               const std::vector<GtPair>& gts, const LossWeights& w);

}  // namespace hoist
