#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hoist/graph.hpp"
#include "hoist/mask.hpp"
#include "hoist/params.hpp"

namespace hoist {

// Paired hand/object query decoder. Each of the L layers runs four steps:
// mask attention on the hand queries, cross attention pooling the refreshed
// hand queries into the object queries, mask attention on the object queries,
// and cross attention pooling the refreshed object queries back into the hand
// queries. Either cross-attention step can be switched off; a disabled step
// passes its first argument through unchanged.
struct DecoderConfig {
  int n_queries = 8;
  int channels = 64;
  int layers = 3;
  bool hand_to_object_attn = true;
  bool object_to_hand_attn = true;

  void validate() const;
};

// Weights of one attention module: query/key/value linear maps, all C->C.
struct AttentionMaps {
  Tensor wq, bq, wk, bk, wv, bv;
};

// Node-side view of AttentionMaps once bound into a graph.
struct AttentionMapRefs {
  Graph::Val wq, bq, wk, bk, wv, bv;
};

// Additive attention bias derived from binary masks: 0 where the mask is set,
// -inf elsewhere. A query whose mask is entirely empty gets an all-zero row so
// it can see every location and recover.
struct AttentionMask4D {
  int t = 0, h = 0, w = 0, n = 0;
  Tensor values;  // (N, T*H*W)

  double at(int ti, int y, int x, int ni) const {
    return values(ni, (ti * h + y) * w + x);
  }
};

AttentionMask4D attention_mask(const std::vector<StMask>& masks);

// Deterministic (hand, object) query initialization, each N x C.
std::pair<Tensor, Tensor> init_queries(int n, int c, uint64_t seed);

void init_decoder_params(ParamStore& store, const DecoderConfig& cfg, uint64_t seed);

// --- graph-side building blocks -------------------------------------------

Graph::Val cross_att_node(Graph& g, Graph::Val x, Graph::Val y, const AttentionMapRefs& f);

struct MaskAttNodes {
  Graph::Val queries;      // updated query set (N,C)
  Graph::Val mask_logits;  // (N,S) dot-product head
  Graph::Val soft;         // sigmoid(mask_logits)
  std::vector<StMask> binary;
};

MaskAttNodes mask_att_node(Graph& g, Graph::Val x, const std::vector<StMask>& masks,
                           Graph::Val features2d, const AttentionMapRefs& f, int t, int hf,
                           int wf);

struct DecoderLayerNodes {
  Graph::Val hand_queries, obj_queries;
  MaskAttNodes hand_att, obj_att;
};

DecoderLayerNodes decoder_layer_node(Graph& g, Graph::Val hand_q, Graph::Val obj_q,
                                     const std::vector<StMask>& hand_masks,
                                     const std::vector<StMask>& obj_masks, Graph::Val features2d,
                                     const AttentionMapRefs& f_hh, const AttentionMapRefs& f_ho,
                                     const AttentionMapRefs& f_oo, const AttentionMapRefs& f_oh,
                                     bool h2o_enabled, bool o2h_enabled, int t, int hf, int wf);

struct DecoderGraph {
  // index 0: initial dot-product prediction; 1..L: decoder layers
  std::vector<Graph::Val> hand_logits, obj_logits;
  std::vector<Graph::Val> hand_soft, obj_soft;
  std::vector<std::vector<StMask>> hand_bin, obj_bin;
  Graph::Val class_logits = -1;
  Graph::Val final_hand = -1, final_obj = -1;
  int t = 0, hf = 0, wf = 0, n = 0;
};

AttentionMapRefs bind_attention(const ParamBinding& p, const std::string& prefix);

// Binarized masks feed the next layer's attention bias as data, not as a
// differentiated quantity. FrozenMasks pins them (and only them) to the
// values of a reference forward pass, which finite-difference probes need so
// the probed function matches the one backward differentiates.
struct FrozenMasks {
  std::vector<std::vector<StMask>> hand, obj;  // indexed by prediction set
};

DecoderGraph decoder_forward(Graph& g, Graph::Val features, const ParamBinding& p,
                             const DecoderConfig& cfg, const FrozenMasks* frozen = nullptr);

// --- value-level contracts -------------------------------------------------

// Per-layer soft and binarized masks, final class logits and query features.
struct DecoderOutput {
  std::vector<Tensor> hand_soft, obj_soft;  // each (N,T,Hf,Wf), entries in [0,1]
  std::vector<std::vector<StMask>> hand_bin, obj_bin;
  Tensor class_logits;  // (N,2): {track, no-object}
  Tensor final_hand_queries, final_obj_queries;
  int t = 0, hf = 0, wf = 0, n = 0;
};

Tensor cross_att(const Tensor& x, const Tensor& y, const AttentionMaps& f);

struct MaskAttResult {
  Tensor queries;
  std::vector<StMask> binary;
  Tensor soft;  // (N,S)
};

MaskAttResult mask_att(const Tensor& x, const std::vector<StMask>& masks, const Tensor& features,
                       const AttentionMaps& f);

struct DecoderLayerResult {
  Tensor hand_queries, obj_queries;
  std::vector<StMask> hand_masks, obj_masks;
};

DecoderLayerResult decoder_layer(const Tensor& hand_q, const Tensor& obj_q,
                                 const std::vector<StMask>& hand_masks,
                                 const std::vector<StMask>& obj_masks, const Tensor& features,
                                 const AttentionMaps& f_hh, const AttentionMaps& f_ho,
                                 const AttentionMaps& f_oo, const AttentionMaps& f_oh,
                                 bool h2o_enabled, bool o2h_enabled);

// Full decoder on an extracted feature volume (value-level convenience).
DecoderOutput decoder_run(const Tensor& features, const ParamStore& store,
                          const DecoderConfig& cfg);

// One spatio-temporal track hypothesis.
struct PredictedTrack {
  std::string clip_id;
  int track_id = -1;
  double score = 0.0;
  StMask mask;
};

// Tracking by query: every query pair whose track probability clears the
// threshold emits exactly one track whose id is the query index.
std::vector<PredictedTrack> infer_tracks(const DecoderOutput& out, int clip_h, int clip_w,
                                         int padded_h, int padded_w, double score_thresh,
                                         const std::string& clip_id);

std::vector<StMask> binarize_soft(const Tensor& soft, int t, int hf, int wf);

}  // namespace hoist
