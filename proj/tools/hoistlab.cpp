// hoistlab: synthesize data, train, predict, evaluate and render overlays for
// hand-held object segmentation and tracking at desk scale.

#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hoist/config.hpp"
#include "hoist/trainer.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"hand-held object segmentation and tracking lab"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string checkpoint;
  std::string pred_file;
  double score_thresh = -1.0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "run configuration file")->required();
    sub->add_option("--out", out_dir, "output directory or file");
    sub->add_option("--checkpoint", checkpoint, "checkpoint file");
    sub->add_option("--score-thresh", score_thresh, "track score threshold in (0,1)");
    sub->add_option("--pred", pred_file, "predictions.json path");
  };

  CLI::App* synth = app.add_subcommand("synth", "write a synthetic dataset");
  CLI::App* train = app.add_subcommand("train", "train and write a checkpoint");
  CLI::App* predict = app.add_subcommand("predict", "run inference, write predictions.json");
  CLI::App* evalc = app.add_subcommand("eval", "score predictions against a dataset");
  CLI::App* viz = app.add_subcommand("viz", "render per-frame mask overlays");
  for (CLI::App* sub : {synth, train, predict, evalc, viz}) add_common(sub);

  CLI11_PARSE(app, argc, argv);

  try {
    hoist::RunConfig cfg = hoist::load_config_file(config_path);
    cfg.validate();
    if (score_thresh > 0.0) cfg.io.score_thresh = score_thresh;

    if (app.got_subcommand(synth)) {
      const fs::path out = out_dir.empty() ? fs::path(cfg.io.output_dir) / "dataset" : fs::path(out_dir);
      return hoist::cmd_synth(cfg, out, std::cout);
    }
    if (app.got_subcommand(train)) {
      if (!checkpoint.empty()) cfg.io.checkpoint = checkpoint;
      return hoist::cmd_train(cfg, std::cout);
    }
    if (app.got_subcommand(predict)) {
      const fs::path ckpt = checkpoint.empty() ? fs::path(cfg.io.checkpoint) : fs::path(checkpoint);
      const fs::path out = out_dir.empty() ? fs::path(cfg.io.predictions)
                                           : fs::path(out_dir) / "predictions.json";
      return hoist::cmd_predict(cfg, ckpt, out, cfg.io.score_thresh, std::cout);
    }
    if (app.got_subcommand(evalc)) {
      const fs::path preds = pred_file.empty() ? fs::path(cfg.io.predictions) : fs::path(pred_file);
      const fs::path report = out_dir.empty() ? fs::path() : fs::path(out_dir) / "eval_report.json";
      return hoist::cmd_eval(cfg, preds, report, std::cout);
    }
    if (app.got_subcommand(viz)) {
      const fs::path preds = pred_file.empty() ? fs::path(cfg.io.predictions) : fs::path(pred_file);
      const fs::path out = out_dir.empty() ? fs::path(cfg.io.output_dir) / "overlays" : fs::path(out_dir);
      return hoist::cmd_viz(cfg, preds, out, std::cout);
    }
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (auto& ch : msg)
      if (ch == '\n') ch = ' ';
    std::cerr << "error: " << msg << "\n";
    return 1;
  }
  return 1;
}
