#include "hoist/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

using nlohmann::json;

namespace hoist {

double st_iou(const StMask& pred, const StMask& gt) {
  if (pred.t != gt.t || pred.h != gt.h || pred.w != gt.w)
    throw std::invalid_argument("st_iou: shape mismatch");
  int64_t inter = 0, uni = 0;
  for (size_t i = 0; i < pred.v.size(); ++i) {
    inter += pred.v[i] & gt.v[i];
    uni += pred.v[i] | gt.v[i];
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<PredictionLabel> match_predictions(const std::vector<PredictedTrack>& preds,
                                               const std::vector<StMask>& gts, double thresh) {
  std::vector<char> taken(gts.size(), 0);
  std::vector<PredictionLabel> labels(preds.size());
  for (size_t i = 0; i < preds.size(); ++i) {
    double best_iou = -1.0;
    int best = -1;
    for (size_t j = 0; j < gts.size(); ++j) {
      if (taken[j]) continue;
      const double iou = st_iou(preds[i].mask, gts[j]);
      if (iou > best_iou) {
        best_iou = iou;
        best = static_cast<int>(j);
      }
    }
    if (best >= 0 && best_iou > thresh) {
      taken[static_cast<size_t>(best)] = 1;
      labels[i].tp = true;
      labels[i].iou = best_iou;
      labels[i].gt_index = best;
    }
  }
  return labels;
}

double average_precision(const std::vector<char>& tp_labels, int64_t n_gt) {
  if (n_gt == 0) return tp_labels.empty() ? 1.0 : 0.0;
  const size_t n = tp_labels.size();
  std::vector<double> precision(n), recall(n);
  int64_t tp = 0;
  for (size_t i = 0; i < n; ++i) {
    tp += tp_labels[i] ? 1 : 0;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(n_gt);
  }
  // Precision envelope from the right, integrated over recall increments.
  double ap = 0.0, env = 0.0;
  for (size_t k = n; k-- > 0;) {
    env = std::max(env, precision[k]);
    const double prev_recall = k == 0 ? 0.0 : recall[k - 1];
    ap += (recall[k] - prev_recall) * env;
  }
  return ap;
}

EvalReport evaluate_dataset(const std::vector<PredictedTrack>& preds, const Dataset& ds,
                            double thresh) {
  // Ground truth per clip: ever-held object tracks.
  std::map<std::string, std::vector<StMask>> gt_by_clip;
  std::map<std::string, ClipCounts> counts;
  int64_t n_gt = 0;
  for (const auto& rec : ds.clips) {
    auto& list = gt_by_clip[rec.clip.clip_id];
    for (const auto& tr : rec.tracks)
      if (tr.kind == TrackKind::object && tr.ever_nonempty()) list.push_back(tr.masks);
    counts[rec.clip.clip_id].clip_id = rec.clip.clip_id;
    n_gt += static_cast<int64_t>(list.size());
  }

  std::vector<const PredictedTrack*> order;
  for (const auto& p : preds) {
    if (!gt_by_clip.count(p.clip_id))
      throw std::runtime_error("evaluate_dataset: unknown clip_id '" + p.clip_id + "'");
    order.push_back(&p);
  }
  std::stable_sort(order.begin(), order.end(), [](const PredictedTrack* a, const PredictedTrack* b) {
    if (a->score != b->score) return a->score > b->score;
    if (a->clip_id != b->clip_id) return a->clip_id < b->clip_id;
    return a->track_id < b->track_id;
  });

  std::map<std::string, std::vector<char>> taken;
  for (auto& [cid, list] : gt_by_clip) taken[cid].assign(list.size(), 0);

  EvalReport rep;
  rep.n_gt = n_gt;
  rep.n_pred = static_cast<int64_t>(order.size());
  std::vector<char> labels;
  for (const PredictedTrack* p : order) {
    const auto& gts = gt_by_clip[p->clip_id];
    auto& used = taken[p->clip_id];
    double best_iou = -1.0;
    int best = -1;
    for (size_t j = 0; j < gts.size(); ++j) {
      if (used[j]) continue;
      const double iou = st_iou(p->mask, gts[j]);
      if (iou > best_iou) {
        best_iou = iou;
        best = static_cast<int>(j);
      }
    }
    if (best >= 0 && best_iou > thresh) {
      used[static_cast<size_t>(best)] = 1;
      labels.push_back(1);
      counts[p->clip_id].tp += 1;
      rep.matched_ious.push_back(best_iou);
    } else {
      labels.push_back(0);
      counts[p->clip_id].fp += 1;
    }
  }
  for (auto& [cid, used] : taken) {
    int fn = 0;
    for (char u : used)
      if (!u) ++fn;
    counts[cid].fn = fn;
  }
  for (const auto& rec : ds.clips) rep.per_clip.push_back(counts[rec.clip.clip_id]);
  rep.ap = average_precision(labels, n_gt);
  return rep;
}

void save_predictions(const std::filesystem::path& path, const std::vector<PredictedTrack>& preds) {
  json arr = json::array();
  for (const auto& p : preds) {
    json j;
    j["clip_id"] = p.clip_id;
    j["track_id"] = p.track_id;
    j["score"] = p.score;
    json masks = json::array();
    for (int t = 0; t < p.mask.t; ++t) {
      const Mask2D frame = p.mask.frame(t);
      if (frame.empty_mask()) {
        masks.push_back(nullptr);
      } else {
        json counts = json::array();
        for (int c : rle_encode(frame).counts) counts.push_back(c);
        masks.push_back(counts);
      }
    }
    j["masks"] = masks;
    arr.push_back(j);
  }
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write predictions: " + path.string());
  f << arr.dump(1) << "\n";
}

std::vector<PredictedTrack> load_predictions(const std::filesystem::path& path,
                                             const Dataset& ds) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open predictions: " + path.string());
  json arr;
  try {
    f >> arr;
  } catch (const std::exception& e) {
    throw std::runtime_error("malformed predictions file " + path.string() + ": " + e.what());
  }
  if (!arr.is_array()) throw std::runtime_error("predictions file must hold a JSON array");
  std::vector<PredictedTrack> preds;
  std::vector<std::string> problems;
  size_t idx = 0;
  for (const auto& j : arr) {
    PredictedTrack p;
    p.clip_id = j.value("clip_id", "");
    p.track_id = j.value("track_id", -1);
    p.score = j.value("score", -1.0);
    const ClipRecord* rec = ds.find_clip(p.clip_id);
    if (!rec) {
      problems.push_back("entry " + std::to_string(idx) + ": unknown clip_id '" + p.clip_id + "'");
      ++idx;
      continue;
    }
    if (!(p.score >= 0.0 && p.score <= 1.0) || !std::isfinite(p.score))
      problems.push_back("entry " + std::to_string(idx) + ": score outside [0,1]");
    const VideoClip& c = rec->clip;
    if (!j.contains("masks") || static_cast<int>(j["masks"].size()) != c.t) {
      problems.push_back("entry " + std::to_string(idx) + ": 'masks' must have T=" +
                         std::to_string(c.t) + " entries");
      ++idx;
      continue;
    }
    p.mask = StMask(c.t, c.h, c.w);
    for (int t = 0; t < c.t; ++t) {
      const json& jm = j["masks"][static_cast<size_t>(t)];
      if (jm.is_null()) continue;
      RleMask rle;
      rle.h = c.h;
      rle.w = c.w;
      for (const auto& cnt : jm) rle.counts.push_back(cnt.get<int>());
      try {
        p.mask.set_frame(t, rle_decode(rle));
      } catch (const std::exception& e) {
        problems.push_back("entry " + std::to_string(idx) + " frame " + std::to_string(t) + ": " +
                           e.what());
      }
    }
    preds.push_back(std::move(p));
    ++idx;
  }
  if (!problems.empty()) {
    std::string msg = "invalid prediction entries:";
    for (const auto& s : problems) msg += "\n  " + s;
    throw std::runtime_error(msg);
  }
  return preds;
}

EvalReport evaluate_prediction_file(const std::filesystem::path& pred_file, const Dataset& ds,
                                    double thresh) {
  return evaluate_dataset(load_predictions(pred_file, ds), ds, thresh);
}

std::string eval_report_json(const EvalReport& rep) {
  json j;
  j["ap"] = rep.ap;
  j["n_gt"] = rep.n_gt;
  j["n_pred"] = rep.n_pred;
  json per_clip = json::array();
  for (const auto& c : rep.per_clip) {
    json cj;
    cj["clip_id"] = c.clip_id;
    cj["tp"] = c.tp;
    cj["fp"] = c.fp;
    cj["fn"] = c.fn;
    per_clip.push_back(cj);
  }
  j["per_clip"] = per_clip;
  json ious = json::array();
  for (double v : rep.matched_ious) ious.push_back(v);
  j["matched_ious"] = ious;
  return j.dump(1);
}

}  // namespace hoist
