#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "hoist/decoder.hpp"
#include "hoist/feature_net.hpp"
#include "hoist/losses.hpp"
#include "hoist/synth.hpp"

namespace hoist {

// Plain-text sectioned key=value run configuration; every field has a default
// and round-trips through serialize/parse.
struct RunConfig {
  struct Model {
    int queries = 8;
    int channels = 64;
    int layers = 3;
    int stride = 4;
    bool temporal_encoding = true;
    int t_max = 32;
  } model;

  struct Loss {
    double lambda1 = 0.001, lambda2 = 5.0, lambda3 = 0.001;
    double lambda4 = 0.001, lambda5 = 5.0, lambda6 = 0.001;
    double no_object_weight = 0.1;
    int contact_radius = 2;
    bool h2o_attn = true;
    bool o2h_attn = true;
    bool contact_loss = true;
  } loss;

  struct Optim {
    double learning_rate = 0.0001;
    double weight_decay = 0.0001;
    int iterations = 2000;
    int batch_size = 1;
    uint64_t seed = 1;
  } optim;

  struct Data {
    std::string path;  // dataset directory; empty means synthesize
    int synth_clips = 4;
    int synth_hands = 2;
    int synth_objects = 2;
    int synth_frames = 4;
    int synth_height = 96;
    int synth_width = 96;
    double synth_toggle_prob = 0.2;
    uint64_t synth_seed = 7;
  } data;

  struct Io {
    std::string checkpoint = "out/model.ckpt";
    std::string output_dir = "out";
    std::string predictions = "out/predictions.json";
    double score_thresh = 0.5;
  } io;

  FeatureNetConfig feature_config() const;
  DecoderConfig decoder_config() const;
  LossWeights loss_weights() const;
  SynthConfig synth_config() const;

  void validate() const;
};

std::string serialize_config(const RunConfig& cfg);
RunConfig parse_config(const std::string& text);
RunConfig load_config_file(const std::filesystem::path& path);

}  // namespace hoist
