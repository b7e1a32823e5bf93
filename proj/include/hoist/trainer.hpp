#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "hoist/config.hpp"
#include "hoist/data_model.hpp"
#include "hoist/decoder.hpp"
#include "hoist/eval.hpp"
#include "hoist/losses.hpp"
#include "hoist/params.hpp"

namespace hoist {

// Decoupled-weight-decay Adam.
struct AdamW {
  double lr = 0.0001;
  double beta1 = 0.9, beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0001;
  int64_t step_count = 0;

  void step(ParamStore& store, const std::vector<std::pair<std::string, Tensor>>& grads);
};

struct ModelBundle {
  ParamStore store;
  FeatureNetConfig feat;
  DecoderConfig dec;
};

void init_model(ModelBundle& model, const RunConfig& cfg);

struct TrainResult {
  std::vector<LossBreakdown> history;
  std::filesystem::path checkpoint_path;
};

// One training step on a single clip; returns the loss breakdown.
LossBreakdown train_step(ModelBundle& model, AdamW& opt, const VideoClip& clip,
                         const std::vector<GtPair>& gts, const LossWeights& weights);

// Full run: round-robin over clips, per-iteration breakdown logging, NaN
// abort with the last good checkpoint, final checkpoint write.
TrainResult train_run(const RunConfig& cfg, const Dataset& ds, std::ostream* log);

std::vector<PredictedTrack> predict_dataset(const ModelBundle& model, const Dataset& ds,
                                            double score_thresh);

// Resolves [data]: loads from data.path when set, synthesizes otherwise.
Dataset resolve_dataset(const RunConfig& cfg, bool with_pixels = true);

ModelBundle load_model(const std::filesystem::path& checkpoint,
                       const RunConfig* expect_model_of = nullptr);

// --- CLI entry points --------------------------------------------------------

int cmd_synth(const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& out);
int cmd_train(const RunConfig& cfg, std::ostream& out);
int cmd_predict(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                const std::filesystem::path& pred_out, double score_thresh, std::ostream& out);
int cmd_eval(const RunConfig& cfg, const std::filesystem::path& pred_file,
             const std::filesystem::path& report_out, std::ostream& out);
int cmd_viz(const RunConfig& cfg, const std::filesystem::path& pred_file,
            const std::filesystem::path& out_dir, std::ostream& out);

// Stable overlay color per track id.
void track_color(int track_id, uint8_t rgb[3]);

}  // namespace hoist
