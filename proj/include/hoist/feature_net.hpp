#pragma once

#include <cstdint>

#include "hoist/data_model.hpp"
#include "hoist/graph.hpp"
#include "hoist/params.hpp"

namespace hoist {

// Toy backbone + pixel decoder: a strided conv stem, a two-level context
// path merged back at the output scale, fixed sinusoidal spatial encoding and
// a learned per-frame temporal embedding.
struct FeatureNetConfig {
  int channels = 64;
  int stride = 4;           // one of 2, 4, 8
  bool temporal_encoding = true;
  int t_max = 32;           // capacity of the temporal embedding table

  void validate() const;
};

// Per-pixel spatio-temporal embeddings at the configured stride.
struct FeatureVolume {
  Tensor data;  // (T, H', W', C)
  int stride = 4;
  int padded_h = 0, padded_w = 0;  // input size after reflect padding
};

// Registers feat.* parameters, deterministically from seed.
void init_feature_params(ParamStore& store, const FeatureNetConfig& cfg, uint64_t seed);

// Normalized, reflect-padded input volume (T, Hp, Wp, 3).
Tensor clip_to_input(const VideoClip& clip, int pad_multiple);

// Graph-side forward; returns the (T,H',W',C) feature node.
Graph::Val feature_net_forward(Graph& g, const VideoClip& clip, const ParamBinding& p,
                               const FeatureNetConfig& cfg);

FeatureVolume extract_features(const VideoClip& clip, const ParamStore& store,
                               const FeatureNetConfig& cfg);

// Padded spatial size helper (multiple of 4*stride so the context path divides
// evenly).
int padded_extent(int n, int stride);

}  // namespace hoist
