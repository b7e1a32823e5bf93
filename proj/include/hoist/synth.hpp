#pragma once

#include <cstdint>

#include "hoist/data_model.hpp"

namespace hoist {

// Deterministic moving-shapes clip generator. Hands are disks sweeping
// sinusoidal paths inside disjoint horizontal bands; objects are rectangles
// that ride a fixed offset slot of their hand while held and freeze in place
// when released. Same seed, same bytes.
struct SynthConfig {
  int n_hands = 2;
  int n_objects = 2;
  int t = 4;
  int h = 96, w = 96;
  double hold_toggle_prob = 0.2;
  uint64_t seed = 1;

  void validate() const;  // throws on out-of-range fields
};

struct SynthResult {
  ClipRecord record;
  // holder[i] = track_id of the hand that holds object track i (objects only,
  // indexed by object order). Not serialized; training re-derives pairing
  // from contact overlap.
  std::vector<int> object_holder_track;
};

SynthResult synth_clip(const SynthConfig& cfg, const std::string& clip_id = "clip");

// n_clips clips with per-clip seeds derived from cfg.seed.
Dataset synth_dataset(const SynthConfig& cfg, int n_clips);

}  // namespace hoist
