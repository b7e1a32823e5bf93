#include "hoist/config.hpp"

#include <fstream>
#include <sstream>

#include "hoist/synth.hpp"

namespace hoist {

FeatureNetConfig RunConfig::feature_config() const {
  FeatureNetConfig f;
  f.channels = model.channels;
  f.stride = model.stride;
  f.temporal_encoding = model.temporal_encoding;
  f.t_max = model.t_max;
  return f;
}

DecoderConfig RunConfig::decoder_config() const {
  DecoderConfig d;
  d.n_queries = model.queries;
  d.channels = model.channels;
  d.layers = model.layers;
  d.hand_to_object_attn = loss.h2o_attn;
  d.object_to_hand_attn = loss.o2h_attn;
  return d;
}

LossWeights RunConfig::loss_weights() const {
  LossWeights w;
  w.lambda1 = loss.lambda1;
  w.lambda2 = loss.lambda2;
  w.lambda3 = loss.lambda3;
  w.lambda4 = loss.lambda4;
  w.lambda5 = loss.lambda5;
  w.lambda6 = loss.lambda6;
  w.no_object_weight = loss.no_object_weight;
  w.contact_radius = loss.contact_radius;
  w.contact_loss_enabled = loss.contact_loss;
  return w;
}

SynthConfig RunConfig::synth_config() const {
  SynthConfig s;
  s.n_hands = data.synth_hands;
  s.n_objects = data.synth_objects;
  s.t = data.synth_frames;
  s.h = data.synth_height;
  s.w = data.synth_width;
  s.hold_toggle_prob = data.synth_toggle_prob;
  s.seed = data.synth_seed;
  return s;
}

void RunConfig::validate() const {
  feature_config().validate();
  decoder_config().validate();
  if (optim.learning_rate <= 0) throw std::invalid_argument("config: learning_rate must be > 0");
  if (optim.iterations < 1) throw std::invalid_argument("config: iterations must be >= 1");
  if (optim.batch_size != 1)
    throw std::invalid_argument("config: batch_size is fixed at one clip per step");
  if (io.score_thresh <= 0.0 || io.score_thresh >= 1.0)
    throw std::invalid_argument("config: score_thresh must be in (0,1)");
  for (double l : {loss.lambda1, loss.lambda2, loss.lambda3, loss.lambda4, loss.lambda5,
                   loss.lambda6, loss.no_object_weight})
    if (l < 0) throw std::invalid_argument("config: loss weights must be non-negative");
  if (loss.contact_radius < 1) throw std::invalid_argument("config: contact_radius must be >= 1");
}

namespace {

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config: bad boolean for " + key + ": '" + v + "'");
}

double parse_double(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (...) {
    throw std::invalid_argument("config: bad number for " + key + ": '" + v + "'");
  }
}

int parse_int(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    long d = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return static_cast<int>(d);
  } catch (...) {
    throw std::invalid_argument("config: bad integer for " + key + ": '" + v + "'");
  }
}

uint64_t parse_u64(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    unsigned long long d = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return static_cast<uint64_t>(d);
  } catch (...) {
    throw std::invalid_argument("config: bad seed for " + key + ": '" + v + "'");
  }
}

}  // namespace

std::string serialize_config(const RunConfig& c) {
  std::ostringstream os;
  os << "[model]\n";
  os << "queries = " << c.model.queries << "\n";
  os << "channels = " << c.model.channels << "\n";
  os << "layers = " << c.model.layers << "\n";
  os << "stride = " << c.model.stride << "\n";
  os << "temporal_encoding = " << (c.model.temporal_encoding ? "true" : "false") << "\n";
  os << "t_max = " << c.model.t_max << "\n";
  os << "\n[loss]\n";
  os << "lambda1 = " << fmt_double(c.loss.lambda1) << "\n";
  os << "lambda2 = " << fmt_double(c.loss.lambda2) << "\n";
  os << "lambda3 = " << fmt_double(c.loss.lambda3) << "\n";
  os << "lambda4 = " << fmt_double(c.loss.lambda4) << "\n";
  os << "lambda5 = " << fmt_double(c.loss.lambda5) << "\n";
  os << "lambda6 = " << fmt_double(c.loss.lambda6) << "\n";
  os << "no_object_weight = " << fmt_double(c.loss.no_object_weight) << "\n";
  os << "contact_radius = " << c.loss.contact_radius << "\n";
  os << "h2o_attn = " << (c.loss.h2o_attn ? "true" : "false") << "\n";
  os << "o2h_attn = " << (c.loss.o2h_attn ? "true" : "false") << "\n";
  os << "contact_loss = " << (c.loss.contact_loss ? "true" : "false") << "\n";
  os << "\n[optim]\n";
  os << "learning_rate = " << fmt_double(c.optim.learning_rate) << "\n";
  os << "weight_decay = " << fmt_double(c.optim.weight_decay) << "\n";
  os << "iterations = " << c.optim.iterations << "\n";
  os << "batch_size = " << c.optim.batch_size << "\n";
  os << "seed = " << c.optim.seed << "\n";
  os << "\n[data]\n";
  os << "path = " << c.data.path << "\n";
  os << "synth_clips = " << c.data.synth_clips << "\n";
  os << "synth_hands = " << c.data.synth_hands << "\n";
  os << "synth_objects = " << c.data.synth_objects << "\n";
  os << "synth_frames = " << c.data.synth_frames << "\n";
  os << "synth_height = " << c.data.synth_height << "\n";
  os << "synth_width = " << c.data.synth_width << "\n";
  os << "synth_toggle_prob = " << fmt_double(c.data.synth_toggle_prob) << "\n";
  os << "synth_seed = " << c.data.synth_seed << "\n";
  os << "\n[io]\n";
  os << "checkpoint = " << c.io.checkpoint << "\n";
  os << "output_dir = " << c.io.output_dir << "\n";
  os << "predictions = " << c.io.predictions << "\n";
  os << "score_thresh = " << fmt_double(c.io.score_thresh) << "\n";
  return os.str();
}

RunConfig parse_config(const std::string& text) {
  RunConfig c;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const size_t comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument("config line " + std::to_string(lineno) + ": bad section");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "model" && section != "loss" && section != "optim" && section != "data" &&
          section != "io")
        throw std::invalid_argument("config: unknown section [" + section + "]");
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string qual = section + "." + key;

    if (qual == "model.queries") c.model.queries = parse_int(value, qual);
    else if (qual == "model.channels") c.model.channels = parse_int(value, qual);
    else if (qual == "model.layers") c.model.layers = parse_int(value, qual);
    else if (qual == "model.stride") c.model.stride = parse_int(value, qual);
    else if (qual == "model.temporal_encoding") c.model.temporal_encoding = parse_bool(value, qual);
    else if (qual == "model.t_max") c.model.t_max = parse_int(value, qual);
    else if (qual == "loss.lambda1") c.loss.lambda1 = parse_double(value, qual);
    else if (qual == "loss.lambda2") c.loss.lambda2 = parse_double(value, qual);
    else if (qual == "loss.lambda3") c.loss.lambda3 = parse_double(value, qual);
    else if (qual == "loss.lambda4") c.loss.lambda4 = parse_double(value, qual);
    else if (qual == "loss.lambda5") c.loss.lambda5 = parse_double(value, qual);
    else if (qual == "loss.lambda6") c.loss.lambda6 = parse_double(value, qual);
    else if (qual == "loss.no_object_weight") c.loss.no_object_weight = parse_double(value, qual);
    else if (qual == "loss.contact_radius") c.loss.contact_radius = parse_int(value, qual);
    else if (qual == "loss.h2o_attn") c.loss.h2o_attn = parse_bool(value, qual);
    else if (qual == "loss.o2h_attn") c.loss.o2h_attn = parse_bool(value, qual);
    else if (qual == "loss.contact_loss") c.loss.contact_loss = parse_bool(value, qual);
    else if (qual == "optim.learning_rate") c.optim.learning_rate = parse_double(value, qual);
    else if (qual == "optim.weight_decay") c.optim.weight_decay = parse_double(value, qual);
    else if (qual == "optim.iterations") c.optim.iterations = parse_int(value, qual);
    else if (qual == "optim.batch_size") c.optim.batch_size = parse_int(value, qual);
    else if (qual == "optim.seed") c.optim.seed = parse_u64(value, qual);
    else if (qual == "data.path") c.data.path = value;
    else if (qual == "data.synth_clips") c.data.synth_clips = parse_int(value, qual);
    else if (qual == "data.synth_hands") c.data.synth_hands = parse_int(value, qual);
    else if (qual == "data.synth_objects") c.data.synth_objects = parse_int(value, qual);
    else if (qual == "data.synth_frames") c.data.synth_frames = parse_int(value, qual);
    else if (qual == "data.synth_height") c.data.synth_height = parse_int(value, qual);
    else if (qual == "data.synth_width") c.data.synth_width = parse_int(value, qual);
    else if (qual == "data.synth_toggle_prob") c.data.synth_toggle_prob = parse_double(value, qual);
    else if (qual == "data.synth_seed") c.data.synth_seed = parse_u64(value, qual);
    else if (qual == "io.checkpoint") c.io.checkpoint = value;
    else if (qual == "io.output_dir") c.io.output_dir = value;
    else if (qual == "io.predictions") c.io.predictions = value;
    else if (qual == "io.score_thresh") c.io.score_thresh = parse_double(value, qual);
    else throw std::invalid_argument("config: unknown key '" + qual + "'");
  }
  return c;
}

RunConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config: " + path.string());
  std::ostringstream os;
  os << f.rdbuf();
  return parse_config(os.str());
}

}  // namespace hoist
