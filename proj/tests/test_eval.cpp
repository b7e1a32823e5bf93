#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <cmath>

#include "hoist/eval.hpp"
#include "hoist/rng.hpp"
#include "hoist/synth.hpp"
#include "test_util.hpp"

using namespace hoist;
using testutil::ScratchDir;

namespace {

StMask box_mask(int t, int h, int w, int ti, int y0, int x0, int y1, int x1) {
  StMask m(t, h, w);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) m.at(ti, y, x) = 1;
  return m;
}

PredictedTrack make_pred(const std::string& clip, int id, double score, StMask mask) {
  PredictedTrack p;
  p.clip_id = clip;
  p.track_id = id;
  p.score = score;
  p.mask = std::move(mask);
  return p;
}

// O(n^2) reference: recount TP/FP from scratch at every prefix, take the
// literal max over later prefixes as the envelope, integrate over recall.
double ap_reference(const std::vector<char>& labels, int64_t n_gt) {
  if (n_gt == 0) return labels.empty() ? 1.0 : 0.0;
  const int n = static_cast<int>(labels.size());
  std::vector<double> prec(static_cast<size_t>(n)), rec(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    int tp = 0;
    for (int j = 0; j <= i; ++j) tp += labels[static_cast<size_t>(j)] ? 1 : 0;
    prec[static_cast<size_t>(i)] = static_cast<double>(tp) / (i + 1);
    rec[static_cast<size_t>(i)] = static_cast<double>(tp) / static_cast<double>(n_gt);
  }
  double ap = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r_prev = i == 0 ? 0.0 : rec[static_cast<size_t>(i - 1)];
    if (rec[static_cast<size_t>(i)] == r_prev) continue;
    double env = 0.0;
    for (int j = i; j < n; ++j) env = std::max(env, prec[static_cast<size_t>(j)]);
    ap += (rec[static_cast<size_t>(i)] - r_prev) * env;
  }
  return ap;
}

}  // namespace

TEST_CASE("st_iou on the documented cases") {
  const StMask a = box_mask(2, 8, 8, 0, 0, 0, 2, 2);
  CHECK(st_iou(a, a) == doctest::Approx(1.0));

  const StMask b = box_mask(2, 8, 8, 1, 4, 4, 6, 6);
  CHECK(st_iou(a, b) == doctest::Approx(0.0));

  // gt: 4 pixels in both frames; pred: equals gt in frame 0, empty in frame 1
  StMask gt = box_mask(2, 8, 8, 0, 0, 0, 2, 2);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) gt.at(1, y, x) = 1;
  const StMask pred = box_mask(2, 8, 8, 0, 0, 0, 2, 2);
  CHECK(st_iou(pred, gt) == doctest::Approx(0.5));  // counts pool across frames

  CHECK(st_iou(StMask(1, 4, 4), StMask(1, 4, 4)) == doctest::Approx(1.0));  // both empty

  CHECK_THROWS_AS(st_iou(StMask(1, 4, 4), StMask(1, 4, 5)), std::invalid_argument);
}

TEST_CASE("st_iou is symmetric and monotone under correct completion") {
  Rng rng(61);
  for (int trial = 0; trial < 30; ++trial) {
    StMask a(2, 6, 6), b(2, 6, 6);
    for (auto& v : a.v) v = rng.chance(0.3);
    for (auto& v : b.v) v = rng.chance(0.3);
    CHECK(st_iou(a, b) == doctest::Approx(st_iou(b, a)));
  }
  // adding correct pixels to an under-segmentation contained in gt raises IoU
  const StMask gt = box_mask(1, 8, 8, 0, 2, 2, 6, 6);
  StMask part = box_mask(1, 8, 8, 0, 2, 2, 4, 4);
  const double before = st_iou(part, gt);
  part.at(0, 4, 4) = 1;
  CHECK(st_iou(part, gt) > before);
}

TEST_CASE("match_predictions applies the strict greater-than rule") {
  const StMask gt = box_mask(1, 10, 10, 0, 0, 0, 5, 4);  // 20 px
  std::vector<StMask> gts = {gt};

  // 12 of 20 -> IoU 0.6
  auto p_hit = make_pred("c", 0, 0.9, box_mask(1, 10, 10, 0, 0, 0, 3, 4));
  auto lab = match_predictions({p_hit}, gts, 0.5);
  REQUIRE(lab.size() == 1);
  CHECK(lab[0].tp);
  CHECK(lab[0].iou == doctest::Approx(0.6));

  // exactly 0.5 is a false positive
  StMask half = box_mask(1, 10, 10, 0, 0, 0, 5, 2);  // 10 px inside
  CHECK(st_iou(half, gt) == doctest::Approx(0.5));
  auto lab2 = match_predictions({make_pred("c", 0, 0.9, half)}, gts, 0.5);
  CHECK_FALSE(lab2[0].tp);

  // two predictions on one gt: the higher-scored one takes it
  auto p1 = make_pred("c", 0, 0.9, box_mask(1, 10, 10, 0, 0, 0, 5, 4));
  auto p2 = make_pred("c", 1, 0.8, box_mask(1, 10, 10, 0, 0, 0, 4, 4));
  auto lab3 = match_predictions({p1, p2}, gts, 0.5);
  CHECK(lab3[0].tp);
  CHECK_FALSE(lab3[1].tp);
}

TEST_CASE("average precision on the documented label sequences") {
  CHECK(average_precision({1}, 1) == doctest::Approx(1.0));
  CHECK(average_precision({1, 0}, 1) == doctest::Approx(1.0));
  CHECK(average_precision({0, 1}, 1) == doctest::Approx(0.5));
  CHECK(average_precision({}, 0) == doctest::Approx(1.0));
  CHECK(average_precision({0}, 0) == doctest::Approx(0.0));
  CHECK(average_precision({}, 3) == doctest::Approx(0.0));
}

TEST_CASE("average precision equals the brute-force reference on random labels") {
  Rng rng(62);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = rng.range(1, 12);
    const int64_t n_gt = rng.range(1, 8);
    std::vector<char> labels(static_cast<size_t>(n));
    int64_t tp = 0;
    for (auto& l : labels) {
      l = rng.chance(0.5) && tp < n_gt ? 1 : 0;
      tp += l;
    }
    CHECK(average_precision(labels, n_gt) ==
          doctest::Approx(ap_reference(labels, n_gt)).epsilon(1e-9));
  }
}

TEST_CASE("evaluate_dataset scores ground truth as perfect and empties as zero") {
  SynthConfig cfg;
  cfg.n_hands = 2;
  cfg.n_objects = 2;
  cfg.t = 3;
  cfg.h = 64;
  cfg.w = 64;
  cfg.seed = 5;
  Dataset ds = synth_dataset(cfg, 2);

  std::vector<PredictedTrack> gt_preds;
  for (const auto& rec : ds.clips)
    for (const auto& tr : rec.tracks)
      if (tr.kind == TrackKind::object && tr.ever_nonempty())
        gt_preds.push_back(make_pred(rec.clip.clip_id, tr.track_id, 1.0, tr.masks));

  const EvalReport perfect = evaluate_dataset(gt_preds, ds, 0.5);
  CHECK(perfect.ap == doctest::Approx(1.0));
  CHECK(perfect.n_gt == static_cast<int64_t>(gt_preds.size()));
  for (const auto& c : perfect.per_clip) {
    CHECK(c.fp == 0);
    CHECK(c.fn == 0);
  }

  const EvalReport empty = evaluate_dataset({}, ds, 0.5);
  CHECK(empty.ap == doctest::Approx(0.0));

  // unknown clip ids are rejected
  auto bogus = gt_preds;
  bogus[0].clip_id = "nope";
  CHECK_THROWS_WITH_AS(evaluate_dataset(bogus, ds, 0.5), doctest::Contains("unknown clip_id"),
                       std::runtime_error);
}

TEST_CASE("dataset AP equals a direct reference on randomized predictions") {
  Rng rng(63);
  SynthConfig cfg;
  cfg.n_hands = 1;
  cfg.n_objects = 2;
  cfg.t = 2;
  cfg.h = 48;
  cfg.w = 48;
  cfg.seed = 9;
  Dataset ds = synth_dataset(cfg, 3);

  // predictions: jittered gt (some true, some spurious), random scores
  std::vector<PredictedTrack> preds;
  int id = 0;
  for (const auto& rec : ds.clips) {
    for (const auto& tr : rec.tracks) {
      if (tr.kind != TrackKind::object || !tr.ever_nonempty()) continue;
      if (rng.chance(0.8)) {
        StMask m = tr.masks;
        for (auto& v : m.v)
          if (rng.chance(0.05)) v ^= 1;
        preds.push_back(make_pred(rec.clip.clip_id, id++, rng.uniform(0.2, 1.0), m));
      }
      if (rng.chance(0.5)) {
        StMask junk(rec.clip.t, rec.clip.h, rec.clip.w);
        for (int y = 0; y < 6; ++y)
          for (int x = 0; x < 6; ++x) junk.at(0, y + 20, x + 38) = 1;
        preds.push_back(make_pred(rec.clip.clip_id, id++, rng.uniform(0.2, 1.0), junk));
      }
    }
  }

  const EvalReport rep = evaluate_dataset(preds, ds, 0.5);

  // reference: independent sort + per-clip greedy matching + brute-force AP
  std::vector<const PredictedTrack*> order;
  for (const auto& p : preds) order.push_back(&p);
  std::stable_sort(order.begin(), order.end(),
                   [](const PredictedTrack* a, const PredictedTrack* b) {
                     if (a->score != b->score) return a->score > b->score;
                     if (a->clip_id != b->clip_id) return a->clip_id < b->clip_id;
                     return a->track_id < b->track_id;
                   });
  int64_t n_gt = 0;
  std::map<std::string, std::vector<StMask>> gt_by_clip;
  for (const auto& rec : ds.clips)
    for (const auto& tr : rec.tracks)
      if (tr.kind == TrackKind::object && tr.ever_nonempty()) {
        gt_by_clip[rec.clip.clip_id].push_back(tr.masks);
        ++n_gt;
      }
  std::map<std::string, std::vector<char>> used;
  for (auto& [k, v] : gt_by_clip) used[k].assign(v.size(), 0);
  std::vector<char> labels;
  for (const auto* p : order) {
    auto& gts = gt_by_clip[p->clip_id];
    auto& taken = used[p->clip_id];
    double best = -1;
    int bi = -1;
    for (size_t j = 0; j < gts.size(); ++j) {
      if (taken[j]) continue;
      const double iou = st_iou(p->mask, gts[j]);
      if (iou > best) {
        best = iou;
        bi = static_cast<int>(j);
      }
    }
    if (bi >= 0 && best > 0.5) {
      taken[static_cast<size_t>(bi)] = 1;
      labels.push_back(1);
    } else {
      labels.push_back(0);
    }
  }
  CHECK(rep.ap == doctest::Approx(ap_reference(labels, n_gt)).epsilon(1e-9));
}

TEST_CASE("AP is invariant under order-preserving score rescaling") {
  Rng rng(64);
  SynthConfig cfg;
  cfg.n_hands = 1;
  cfg.n_objects = 1;
  cfg.t = 2;
  cfg.h = 48;
  cfg.w = 48;
  cfg.seed = 3;
  Dataset ds = synth_dataset(cfg, 2);
  std::vector<PredictedTrack> preds;
  int id = 0;
  for (const auto& rec : ds.clips)
    for (const auto& tr : rec.tracks)
      if (tr.kind == TrackKind::object && tr.ever_nonempty())
        preds.push_back(make_pred(rec.clip.clip_id, id++, 0.3 + 0.1 * id, tr.masks));
  const double ap1 = evaluate_dataset(preds, ds, 0.5).ap;
  for (auto& p : preds) p.score = p.score * 0.5 + 0.2;  // monotone map
  const double ap2 = evaluate_dataset(preds, ds, 0.5).ap;
  CHECK(ap1 == doctest::Approx(ap2));
}

TEST_CASE("prediction files round-trip and reject malformed entries") {
  ScratchDir dir("preds");
  SynthConfig cfg;
  cfg.n_hands = 1;
  cfg.n_objects = 1;
  cfg.t = 2;
  cfg.h = 48;
  cfg.w = 48;
  cfg.seed = 3;
  Dataset ds = synth_dataset(cfg, 1);
  std::vector<PredictedTrack> preds;
  for (const auto& tr : ds.clips[0].tracks)
    if (tr.kind == TrackKind::object)
      preds.push_back(make_pred(ds.clips[0].clip.clip_id, 5, 0.75, tr.masks));
  REQUIRE(!preds.empty());

  save_predictions(dir.path() / "p.json", preds);
  const auto back = load_predictions(dir.path() / "p.json", ds);
  REQUIRE(back.size() == preds.size());
  CHECK(back[0].clip_id == preds[0].clip_id);
  CHECK(back[0].track_id == 5);
  CHECK(back[0].score == doctest::Approx(0.75));
  CHECK(back[0].mask == preds[0].mask);

  const EvalReport rep = evaluate_prediction_file(dir.path() / "p.json", ds, 0.5);
  CHECK(rep.ap == doctest::Approx(1.0));

  // malformed RLE: counts do not cover the frame
  {
    std::ofstream f(dir.path() / "bad.json");
    f << "[{\"clip_id\":\"" << ds.clips[0].clip.clip_id
      << "\",\"track_id\":0,\"score\":0.5,\"masks\":[[5],null]}]";
  }
  CHECK_THROWS_WITH_AS(load_predictions(dir.path() / "bad.json", ds),
                       doctest::Contains("entry 0"), std::runtime_error);
}
