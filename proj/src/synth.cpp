#include "hoist/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hoist/rng.hpp"

namespace hoist {

namespace {

struct Palette {
  uint8_t r, g, b;
};

constexpr Palette kHandColors[4] = {
    {224, 172, 130}, {198, 134, 96}, {240, 196, 160}, {176, 118, 88}};

constexpr Palette kObjectColors[6] = {
    {204, 44, 44}, {44, 92, 204}, {40, 168, 64}, {212, 164, 32}, {150, 52, 190}, {32, 178, 178}};

uint32_t pixel_hash(uint32_t x, uint32_t y, uint32_t salt) {
  uint32_t v = x * 0x9e3779b1u ^ (y + 0x85ebca6bu) * 0xc2b2ae35u ^ salt * 0x27d4eb2fu;
  v ^= v >> 15;
  v *= 0x2c1b3c6du;
  v ^= v >> 12;
  return v;
}

struct HandState {
  int radius;
  double cx_mid, cy_mid, ax, ay, wx, wy, px, py;

  int cx(int t) const { return static_cast<int>(std::lround(cx_mid + ax * std::sin(wx * t + px))); }
  int cy(int t) const { return static_cast<int>(std::lround(cy_mid + ay * std::sin(wy * t + py))); }
};

struct ObjectState {
  int hand;       // index of the holding hand
  int slot;       // offset slot on that hand
  int ow, oh;     // half extents, inclusive
  int off_x, off_y;
  std::vector<uint8_t> held;
  std::vector<int> cx, cy;  // resolved per-frame centers
};

}  // namespace

void SynthConfig::validate() const {
  if (n_hands < 1 || n_hands > 4) throw std::invalid_argument("synth: n_hands must be in [1,4]");
  if (n_objects < 0 || n_objects > 6)
    throw std::invalid_argument("synth: n_objects must be in [0,6]");
  if (t < 1) throw std::invalid_argument("synth: T must be >= 1");
  if (h < 16 || w < 16) throw std::invalid_argument("synth: H and W must be >= 16");
  if (hold_toggle_prob < 0.0 || hold_toggle_prob > 1.0)
    throw std::invalid_argument("synth: hold_toggle_prob must be in [0,1]");
}

SynthResult synth_clip(const SynthConfig& cfg, const std::string& clip_id) {
  cfg.validate();
  Rng rng(Rng::derive(cfg.seed, 0x5348u));

  const int base = std::min(cfg.h, cfg.w);
  const int r_hand = std::max(3, base / 12);
  const int ow_lo = std::max(2, base * 6 / 96), ow_hi = std::max(3, base * 8 / 96);
  const int oh_lo = std::max(2, base * 5 / 96), oh_hi = std::max(2, base * 7 / 96);

  // Round-robin assignment of objects to hands; slot index grows per hand.
  std::vector<ObjectState> objs(static_cast<size_t>(cfg.n_objects));
  std::vector<int> slots_used(static_cast<size_t>(cfg.n_hands), 0);
  for (int i = 0; i < cfg.n_objects; ++i) {
    ObjectState& o = objs[static_cast<size_t>(i)];
    o.hand = i % cfg.n_hands;
    o.slot = slots_used[static_cast<size_t>(o.hand)]++;
    if (o.slot >= 6) throw std::invalid_argument("generation error: more than 6 objects per hand");
    o.ow = rng.range(ow_lo, ow_hi);
    o.oh = rng.range(oh_lo, oh_hi);
    switch (o.slot) {
      case 0: o.off_x = r_hand + 1 + o.ow; o.off_y = 0; break;
      case 1: o.off_x = -(r_hand + 1 + o.ow); o.off_y = 0; break;
      case 2: o.off_x = 0; o.off_y = r_hand + 1 + o.oh; break;
      case 3: o.off_x = 0; o.off_y = -(r_hand + 1 + o.oh); break;
      case 4: o.off_x = r_hand + 2 * ow_hi + 3 + o.ow; o.off_y = 0; break;
      default: o.off_x = -(r_hand + 2 * ow_hi + 3 + o.ow); o.off_y = 0; break;
    }
  }

  // Per-hand motion envelope from the worst-case reach of its slots.
  std::vector<HandState> hands(static_cast<size_t>(cfg.n_hands));
  const int band = cfg.h / cfg.n_hands;
  for (int k = 0; k < cfg.n_hands; ++k) {
    HandState& hs = hands[static_cast<size_t>(k)];
    hs.radius = r_hand;
    int hreach = r_hand, vreach = r_hand;
    for (const auto& o : objs) {
      if (o.hand != k) continue;
      if (o.slot <= 1) {
        hreach = std::max(hreach, r_hand + 1 + 2 * ow_hi);
        vreach = std::max(vreach, oh_hi);
      } else if (o.slot <= 3) {
        vreach = std::max(vreach, r_hand + 1 + 2 * oh_hi);
        hreach = std::max(hreach, ow_hi);
      } else {
        hreach = std::max(hreach, r_hand + 3 + 4 * ow_hi);
        vreach = std::max(vreach, oh_hi);
      }
    }
    const double ax = cfg.w / 2.0 - hreach - 1;
    const double ay = band / 2.0 - vreach - 1;
    if (ax < 0 || ay < 0)
      throw std::invalid_argument("generation error: shapes do not fit the canvas (" +
                                  std::to_string(cfg.w) + "x" + std::to_string(cfg.h) + ")");
    hs.cx_mid = cfg.w / 2.0;
    hs.cy_mid = k * band + band / 2.0;
    hs.ax = ax;
    hs.ay = ay;
    hs.wx = rng.uniform(0.4, 1.1);
    hs.wy = rng.uniform(0.4, 1.1);
    hs.px = rng.uniform(0.0, 6.283185307179586);
    hs.py = rng.uniform(0.0, 6.283185307179586);
  }

  // Held sequences: every object starts held; later frames toggle.
  for (auto& o : objs) {
    o.held.assign(static_cast<size_t>(cfg.t), 0);
    o.held[0] = 1;
    for (int t = 1; t < cfg.t; ++t) {
      const bool flip = rng.chance(cfg.hold_toggle_prob);
      o.held[static_cast<size_t>(t)] = flip ? !o.held[static_cast<size_t>(t - 1)]
                                            : o.held[static_cast<size_t>(t - 1)];
    }
  }

  // Resolve centers: attached while held, frozen at the last held spot after.
  for (auto& o : objs) {
    o.cx.assign(static_cast<size_t>(cfg.t), 0);
    o.cy.assign(static_cast<size_t>(cfg.t), 0);
    const HandState& hs = hands[static_cast<size_t>(o.hand)];
    int fx = hs.cx(0) + o.off_x, fy = hs.cy(0) + o.off_y;
    for (int t = 0; t < cfg.t; ++t) {
      if (o.held[static_cast<size_t>(t)]) {
        fx = hs.cx(t) + o.off_x;
        fy = hs.cy(t) + o.off_y;
      }
      o.cx[static_cast<size_t>(t)] = fx;
      o.cy[static_cast<size_t>(t)] = fy;
    }
  }

  SynthResult res;
  ClipRecord& rec = res.record;
  VideoClip& clip = rec.clip;
  clip.clip_id = clip_id;
  clip.t = cfg.t;
  clip.h = cfg.h;
  clip.w = cfg.w;
  clip.fps = 6.0;
  clip.frames.assign(static_cast<size_t>(cfg.t) * cfg.h * cfg.w * 3, 0);

  const uint32_t tex_salt = static_cast<uint32_t>(cfg.seed & 0xffffffffu);
  const int n_tracks = cfg.n_hands + cfg.n_objects;
  // id buffer per frame; higher z paints later: frozen objects, held objects,
  // hands. Hands and held objects are disjoint by construction, so every held
  // object keeps its full rectangle visible.
  std::vector<int> ids(static_cast<size_t>(cfg.h) * cfg.w);
  std::vector<StMask> vis(static_cast<size_t>(n_tracks), StMask(cfg.t, cfg.h, cfg.w));

  auto paint_rect = [&](int cx, int cy, int ow, int oh, int id) {
    for (int y = std::max(0, cy - oh); y <= std::min(cfg.h - 1, cy + oh); ++y)
      for (int x = std::max(0, cx - ow); x <= std::min(cfg.w - 1, cx + ow); ++x)
        ids[static_cast<size_t>(y) * cfg.w + x] = id;
  };

  for (int t = 0; t < cfg.t; ++t) {
    std::fill(ids.begin(), ids.end(), -1);
    for (int i = 0; i < cfg.n_objects; ++i) {
      const auto& o = objs[static_cast<size_t>(i)];
      if (!o.held[static_cast<size_t>(t)])
        paint_rect(o.cx[static_cast<size_t>(t)], o.cy[static_cast<size_t>(t)], o.ow, o.oh,
                   cfg.n_hands + i);
    }
    for (int i = 0; i < cfg.n_objects; ++i) {
      const auto& o = objs[static_cast<size_t>(i)];
      if (o.held[static_cast<size_t>(t)])
        paint_rect(o.cx[static_cast<size_t>(t)], o.cy[static_cast<size_t>(t)], o.ow, o.oh,
                   cfg.n_hands + i);
    }
    for (int k = 0; k < cfg.n_hands; ++k) {
      const HandState& hs = hands[static_cast<size_t>(k)];
      const int cx = hs.cx(t), cy = hs.cy(t);
      for (int y = std::max(0, cy - hs.radius); y <= std::min(cfg.h - 1, cy + hs.radius); ++y)
        for (int x = std::max(0, cx - hs.radius); x <= std::min(cfg.w - 1, cx + hs.radius); ++x)
          if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= hs.radius * hs.radius)
            ids[static_cast<size_t>(y) * cfg.w + x] = k;
    }

    for (int y = 0; y < cfg.h; ++y)
      for (int x = 0; x < cfg.w; ++x) {
        const int id = ids[static_cast<size_t>(y) * cfg.w + x];
        uint8_t r, g, b;
        if (id < 0) {
          const uint32_t hsh = pixel_hash(static_cast<uint32_t>(x), static_cast<uint32_t>(y), tex_salt);
          const uint8_t v = static_cast<uint8_t>(104 + (hsh & 31));
          r = v;
          g = static_cast<uint8_t>(v + ((hsh >> 5) & 15));
          b = static_cast<uint8_t>(v + ((hsh >> 9) & 15));
        } else if (id < cfg.n_hands) {
          const Palette& p = kHandColors[id];
          r = p.r; g = p.g; b = p.b;
        } else {
          const Palette& p = kObjectColors[id - cfg.n_hands];
          r = p.r; g = p.g; b = p.b;
        }
        clip.px(t, y, x, 0) = r;
        clip.px(t, y, x, 1) = g;
        clip.px(t, y, x, 2) = b;
        if (id >= 0) vis[static_cast<size_t>(id)].at(t, y, x) = 1;
      }
  }

  // Hands first, objects after; annotation masks for objects are cleared in
  // frames where the object is not held.
  for (int k = 0; k < cfg.n_hands; ++k) {
    TrackAnnotation tr;
    tr.track_id = k;
    tr.kind = TrackKind::hand;
    tr.masks = vis[static_cast<size_t>(k)];
    for (int t = 0; t < cfg.t; ++t) tr.boxes.push_back(tight_bbox(tr.masks.frame(t)));
    rec.tracks.push_back(std::move(tr));
  }
  for (int i = 0; i < cfg.n_objects; ++i) {
    TrackAnnotation tr;
    tr.track_id = cfg.n_hands + i;
    tr.kind = TrackKind::object;
    tr.masks = vis[static_cast<size_t>(cfg.n_hands + i)];
    tr.held = objs[static_cast<size_t>(i)].held;
    for (int t = 0; t < cfg.t; ++t) {
      if (!tr.held_at(t)) {
        Mask2D blank(cfg.h, cfg.w);
        tr.masks.set_frame(t, blank);
      }
      tr.boxes.push_back(tight_bbox(tr.masks.frame(t)));
    }
    rec.tracks.push_back(std::move(tr));
    res.object_holder_track.push_back(objs[static_cast<size_t>(i)].hand);
  }
  return res;
}

Dataset synth_dataset(const SynthConfig& cfg, int n_clips) {
  if (n_clips < 1) throw std::invalid_argument("synth_dataset: n_clips must be >= 1");
  Dataset ds;
  for (int k = 0; k < n_clips; ++k) {
    SynthConfig c = cfg;
    c.seed = Rng::derive(cfg.seed, static_cast<uint64_t>(k) + 1);
    char name[32];
    std::snprintf(name, sizeof(name), "clip_%03d", k);
    ds.clips.push_back(synth_clip(c, name).record);
  }
  return ds;
}

}  // namespace hoist
