#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hoist/data_model.hpp"
#include "hoist/decoder.hpp"
#include "hoist/mask.hpp"

namespace hoist {

// Aggregate spatio-temporal IoU: per-frame intersection and union pixel
// counts are summed over frames before dividing. Two all-empty volumes score
// 1 (a track correctly predicted absent).
double st_iou(const StMask& pred, const StMask& gt);

struct PredictionLabel {
  bool tp = false;
  double iou = 0.0;   // IoU with the matched gt (TP only)
  int gt_index = -1;  // index into the gt list (TP only)
};

// Greedy matching over score-descending predictions: a prediction takes the
// unmatched ground truth of highest IoU when that IoU clears the threshold
// strictly; every ground truth is consumed by at most one prediction.
std::vector<PredictionLabel> match_predictions(const std::vector<PredictedTrack>& preds,
                                               const std::vector<StMask>& gts, double thresh);

// Area under the precision-recall curve, all-point interpolation with the
// precision envelope. labels must be in descending-score order. With no
// ground truth: 1.0 for an empty prediction list, 0.0 otherwise.
double average_precision(const std::vector<char>& tp_labels, int64_t n_gt);

struct ClipCounts {
  std::string clip_id;
  int tp = 0, fp = 0, fn = 0;
};

struct EvalReport {
  double ap = 0.0;
  std::vector<ClipCounts> per_clip;
  std::vector<double> matched_ious;
  int64_t n_gt = 0, n_pred = 0;
};

// Dataset-level AP: predictions pooled across clips and sorted once by score;
// matching stays per clip. Ground truth are the ever-held object tracks.
EvalReport evaluate_dataset(const std::vector<PredictedTrack>& preds, const Dataset& ds,
                            double thresh = 0.5);

// predictions.json: [ {clip_id, track_id, score, masks:[rle counts or null]} ]
void save_predictions(const std::filesystem::path& path, const std::vector<PredictedTrack>& preds);
std::vector<PredictedTrack> load_predictions(const std::filesystem::path& path, const Dataset& ds);

EvalReport evaluate_prediction_file(const std::filesystem::path& pred_file, const Dataset& ds,
                                    double thresh = 0.5);

std::string eval_report_json(const EvalReport& rep);

}  // namespace hoist
