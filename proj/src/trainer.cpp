#include "hoist/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;

namespace hoist {

void AdamW::step(ParamStore& store, const std::vector<std::pair<std::string, Tensor>>& grads) {
  ++step_count;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
  for (const auto& [name, g] : grads) {
    Tensor& p = store.get(name);
    Tensor& m = store.moment1(name);
    Tensor& v = store.moment2(name);
    const int64_t n = p.numel();
    for (int64_t i = 0; i < n; ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * p[i]);
    }
  }
}

void init_model(ModelBundle& model, const RunConfig& cfg) {
  cfg.validate();
  model.feat = cfg.feature_config();
  model.dec = cfg.decoder_config();
  init_feature_params(model.store, model.feat, cfg.optim.seed);
  init_decoder_params(model.store, model.dec, cfg.optim.seed);
}

LossBreakdown train_step(ModelBundle& model, AdamW& opt, const VideoClip& clip,
                         const std::vector<GtPair>& gts, const LossWeights& weights) {
  Graph g;
  ParamBinding bind(g, model.store);
  Graph::Val features = feature_net_forward(g, clip, bind, model.feat);
  DecoderGraph dec = decoder_forward(g, features, bind, model.dec);
  MatchResult match = match_tracks_graph(g, dec, gts, weights);
  LossNodes loss = build_total_loss(g, dec, gts, weights, match);
  if (!std::isfinite(loss.breakdown.total)) return loss.breakdown;  // caller aborts
  g.backward(loss.total);
  std::vector<std::pair<std::string, Tensor>> grads;
  for (const auto& [name, node] : bind.entries()) {
    const Tensor& gr = g.grad(node);
    if (gr.numel() == g.val(node).numel()) grads.emplace_back(name, gr);
  }
  opt.step(model.store, grads);
  return loss.breakdown;
}

Dataset resolve_dataset(const RunConfig& cfg, bool with_pixels) {
  if (!cfg.data.path.empty()) return load_dataset(cfg.data.path, with_pixels);
  return synth_dataset(cfg.synth_config(), cfg.data.synth_clips);
}

TrainResult train_run(const RunConfig& cfg, const Dataset& ds, std::ostream* log) {
  cfg.validate();
  if (ds.clips.empty()) throw std::runtime_error("training: dataset has no clips");
  ModelBundle model;
  init_model(model, cfg);
  AdamW opt;
  opt.lr = cfg.optim.learning_rate;
  opt.weight_decay = cfg.optim.weight_decay;
  const LossWeights weights = cfg.loss_weights();

  // Feature-resolution targets are static; build them once per clip.
  std::vector<std::vector<GtPair>> gt_cache;
  for (const auto& rec : ds.clips) {
    const int ph = padded_extent(rec.clip.h, model.feat.stride);
    const int pw = padded_extent(rec.clip.w, model.feat.stride);
    gt_cache.push_back(build_gt_pairs(rec, model.feat.stride, ph, pw, weights.contact_radius));
  }

  const fs::path ckpt_path = cfg.io.checkpoint;
  if (ckpt_path.has_parent_path()) fs::create_directories(ckpt_path.parent_path());
  const std::string echo = serialize_config(cfg);

  TrainResult result;
  result.checkpoint_path = ckpt_path;
  ParamStore last_good;

  for (int iter = 0; iter < cfg.optim.iterations; ++iter) {
    const size_t ci = static_cast<size_t>(iter) % ds.clips.size();
    LossBreakdown bd;
    bool diverged = false;
    try {
      bd = train_step(model, opt, ds.clips[ci].clip, gt_cache[ci], weights);
      diverged = !std::isfinite(bd.total);
    } catch (const std::exception& e) {
      if (std::string(e.what()).find("non-finite") == std::string::npos) throw;
      diverged = true;
    }
    if (diverged) {
      if (last_good.count() > 0) save_checkpoint(ckpt_path, last_good, echo);
      throw std::runtime_error("training aborted: non-finite loss at iteration " +
                               std::to_string(iter) + "; last good checkpoint at " +
                               ckpt_path.string());
    }
    // Snapshot so a later divergence can roll back to a finite state.
    if (model.store.all_finite()) last_good = model.store;
    result.history.push_back(bd);
    if (log) {
      (*log) << "iter " << iter << " total " << std::setprecision(10) << bd.total << " cls "
             << bd.cls << " mask_h " << bd.mask_h << " mask_o " << bd.mask_o << " mask_c "
             << bd.mask_c << " dice_h " << bd.dice_h << " dice_o " << bd.dice_o << " dice_c "
             << bd.dice_c << "\n";
    }
  }
  save_checkpoint(ckpt_path, model.store, echo);
  return result;
}

std::vector<PredictedTrack> predict_dataset(const ModelBundle& model, const Dataset& ds,
                                            double score_thresh) {
  std::vector<PredictedTrack> preds;
  for (const auto& rec : ds.clips) {
    FeatureVolume fv = extract_features(rec.clip, model.store, model.feat);
    DecoderOutput out = decoder_run(fv.data, model.store, model.dec);
    std::vector<PredictedTrack> tracks = infer_tracks(out, rec.clip.h, rec.clip.w, fv.padded_h,
                                                      fv.padded_w, score_thresh, rec.clip.clip_id);
    for (auto& t : tracks) preds.push_back(std::move(t));
  }
  return preds;
}

ModelBundle load_model(const fs::path& checkpoint, const RunConfig* expect_model_of) {
  ModelBundle model;
  const std::string echo = load_checkpoint(checkpoint, model.store);
  RunConfig stored = parse_config(echo);
  model.feat = stored.feature_config();
  model.dec = stored.decoder_config();
  if (expect_model_of) {
    const auto& a = expect_model_of->model;
    const auto& b = stored.model;
    if (a.queries != b.queries || a.channels != b.channels || a.layers != b.layers ||
        a.stride != b.stride)
      throw std::runtime_error(
          "checkpoint/config mismatch: model dimensions (queries/channels/layers/stride) differ");
  }
  return model;
}

int cmd_synth(const RunConfig& cfg, const fs::path& out_dir, std::ostream& out) {
  Dataset ds = synth_dataset(cfg.synth_config(), cfg.data.synth_clips);
  save_dataset(out_dir, ds);
  const DatasetSummary s = ds.summary();
  out << "split            " << split_name(ds.split) << "\n";
  out << "videos w/ 0 obj  " << s.videos_with_0 << "\n";
  out << "videos w/ 1 obj  " << s.videos_with_1 << "\n";
  out << "videos w/ 2 obj  " << s.videos_with_2 << "\n";
  out << "videos w/ >=3    " << s.videos_with_3plus << "\n";
  out << "videos total     " << s.videos << "\n";
  out << "frames           " << s.frames << "\n";
  out << "object instances " << s.object_instances << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  Dataset ds = resolve_dataset(cfg);
  TrainResult res = train_run(cfg, ds, &out);
  out << "checkpoint written: " << res.checkpoint_path.string() << "\n";
  if (!res.history.empty())
    out << "final total loss " << res.history.back().total << " after " << res.history.size()
        << " iterations\n";
  return 0;
}

int cmd_predict(const RunConfig& cfg, const fs::path& checkpoint, const fs::path& pred_out,
                double score_thresh, std::ostream& out) {
  ModelBundle model = load_model(checkpoint, &cfg);
  Dataset ds = resolve_dataset(cfg);
  std::vector<PredictedTrack> preds = predict_dataset(model, ds, score_thresh);
  if (pred_out.has_parent_path()) fs::create_directories(pred_out.parent_path());
  save_predictions(pred_out, preds);
  out << "wrote " << preds.size() << " predicted tracks to " << pred_out.string() << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg, const fs::path& pred_file, const fs::path& report_out,
             std::ostream& out) {
  Dataset ds = resolve_dataset(cfg, /*with_pixels=*/false);
  EvalReport rep = evaluate_prediction_file(pred_file, ds, 0.5);
  out << "AP " << std::setprecision(10) << rep.ap << "  (gt " << rep.n_gt << ", predictions "
      << rep.n_pred << ")\n";
  for (const auto& c : rep.per_clip)
    out << "  " << c.clip_id << "  tp " << c.tp << " fp " << c.fp << " fn " << c.fn << "\n";
  if (!report_out.empty()) {
    if (report_out.has_parent_path()) fs::create_directories(report_out.parent_path());
    std::ofstream f(report_out);
    if (!f) throw std::runtime_error("cannot write report: " + report_out.string());
    f << eval_report_json(rep) << "\n";
    out << "report written: " << report_out.string() << "\n";
  }
  return 0;
}

void track_color(int track_id, uint8_t rgb[3]) {
  // Golden-angle hue walk, full saturation; stable per id.
  const double hue = std::fmod(0.1 + 0.61803398875 * track_id, 1.0) * 6.0;
  const int i = static_cast<int>(hue);
  const double f = hue - i;
  const double q = 1.0 - f;
  double r = 0, g = 0, b = 0;
  switch (i % 6) {
    case 0: r = 1; g = f; b = 0; break;
    case 1: r = q; g = 1; b = 0; break;
    case 2: r = 0; g = 1; b = f; break;
    case 3: r = 0; g = q; b = 1; break;
    case 4: r = f; g = 0; b = 1; break;
    default: r = 1; g = 0; b = q; break;
  }
  rgb[0] = static_cast<uint8_t>(std::lround(255 * r));
  rgb[1] = static_cast<uint8_t>(std::lround(255 * g));
  rgb[2] = static_cast<uint8_t>(std::lround(255 * b));
}

int cmd_viz(const RunConfig& cfg, const fs::path& pred_file, const fs::path& out_dir,
            std::ostream& out) {
  Dataset ds = resolve_dataset(cfg);
  std::vector<PredictedTrack> preds = load_predictions(pred_file, ds);
  fs::create_directories(out_dir);
  int written = 0;
  for (const auto& rec : ds.clips) {
    std::vector<const PredictedTrack*> mine;
    for (const auto& p : preds)
      if (p.clip_id == rec.clip.clip_id) mine.push_back(&p);
    const VideoClip& c = rec.clip;
    for (int t = 0; t < c.t; ++t) {
      std::vector<uint8_t> rgb(static_cast<size_t>(c.h) * c.w * 3);
      for (int y = 0; y < c.h; ++y)
        for (int x = 0; x < c.w; ++x)
          for (int ch = 0; ch < 3; ++ch)
            rgb[(static_cast<size_t>(y) * c.w + x) * 3 + ch] = c.px(t, y, x, ch);
      for (const PredictedTrack* p : mine) {
        uint8_t col[3];
        track_color(p->track_id, col);
        for (int y = 0; y < c.h; ++y)
          for (int x = 0; x < c.w; ++x) {
            if (!p->mask.at(t, y, x)) continue;
            for (int ch = 0; ch < 3; ++ch) {
              uint8_t& v = rgb[(static_cast<size_t>(y) * c.w + x) * 3 + ch];
              v = static_cast<uint8_t>((static_cast<int>(v) + col[ch]) / 2);
            }
            // overlays must differ from the source pixel even on exact color hits
            uint8_t& r0 = rgb[(static_cast<size_t>(y) * c.w + x) * 3];
            if (r0 == c.px(t, y, x, 0) &&
                rgb[(static_cast<size_t>(y) * c.w + x) * 3 + 1] == c.px(t, y, x, 1) &&
                rgb[(static_cast<size_t>(y) * c.w + x) * 3 + 2] == c.px(t, y, x, 2))
              r0 = static_cast<uint8_t>(r0 ^ 1u);
          }
      }
      char name[64];
      std::snprintf(name, sizeof(name), "%s_frame_%04d.ppm", c.clip_id.c_str(), t);
      write_ppm(out_dir / name, rgb.data(), c.h, c.w);
      ++written;
    }
  }
  out << "wrote " << written << " overlay frames to " << out_dir.string() << "\n";
  return 0;
}

}  // namespace hoist
