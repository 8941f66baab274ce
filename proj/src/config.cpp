#include "facetok/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace facetok {

namespace {

// shortest representation that parses back to the same double
std::string fmt_double(double v) {
  char buf[64];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::stod(buf) == v) return buf;
  }
  return buf;
}

std::string fmt_bool(bool v) { return v ? "on" : "off"; }

bool parse_bool(const std::string& v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw data_error("bad boolean value '" + v + "'");
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

bool set_model_key(ModelConfig& m, const std::string& key, const std::string& value) {
  if (key == "resolution") m.resolution = std::stoi(value);
  else if (key == "d_model") m.d_model = std::stoi(value);
  else if (key == "d_latent") m.d_latent = std::stoi(value);
  else if (key == "bottleneck") m.bottleneck_dim = std::stoi(value);
  else if (key == "latents") m.latent_count = std::stoi(value);
  else if (key == "encoder_layers") m.encoder_layers = std::stoi(value);
  else if (key == "decoder_layers") m.decoder_layers = std::stoi(value);
  else if (key == "heads") m.heads = std::stoi(value);
  else if (key == "max_faces") m.max_faces = std::stoi(value);
  else if (key == "points") m.input_points = std::stoi(value);
  else if (key == "freq_bands") m.freq_bands = std::stoi(value);
  else if (key == "ffn_mult") m.ffn_mult = std::stoi(value);
  else if (key == "pool_dim") m.pool_dim = std::stoi(value);
  else if (key == "head") m.head_variant = head_variant_from_name(value);
  else if (key == "queries") m.query_mode = query_mode_from_name(value);
  else if (key == "pooling") m.pooling = pooling_mode_from_name(value);
  else return false;
  return true;
}

bool set_train_key(RunConfig::Train& t, const std::string& key, const std::string& value) {
  if (key == "steps") t.steps = std::stoi(value);
  else if (key == "batch") t.batch = std::stoi(value);
  else if (key == "lr") t.lr = std::stod(value);
  else if (key == "weight_decay") t.weight_decay = std::stod(value);
  else if (key == "warmup") t.warmup = std::stod(value);
  else if (key == "grad_clip") t.grad_clip = std::stod(value);
  else if (key == "seed") t.seed = std::stoull(value);
  else if (key == "optimizer") t.optimizer = value;
  else if (key == "augment") t.augment = parse_bool(value);
  else if (key == "rotate") t.rotate = parse_bool(value);
  else if (key == "flip") t.flip = parse_bool(value);
  else if (key == "scale") t.scale = parse_bool(value);
  else if (key == "rotation_axis") t.rotation_axis = value;
  else if (key == "order") t.order = value;
  else if (key == "checkpoint_every") t.checkpoint_every = std::stoi(value);
  else if (key == "log_every") t.log_every = std::stoi(value);
  else if (key == "eval_every") t.eval_every = std::stoi(value);
  else if (key == "early_stop_accuracy") t.early_stop_accuracy = std::stod(value);
  else if (key == "threads") t.threads = std::stoi(value);
  else return false;
  return true;
}

}  // namespace

std::string RunConfig::serialize() const {
  std::ostringstream out;
  out << "[model]\n";
  out << model.serialize();
  out << "\n[train]\n";
  out << "steps = " << train.steps << "\n";
  out << "batch = " << train.batch << "\n";
  out << "lr = " << fmt_double(train.lr) << "\n";
  out << "weight_decay = " << fmt_double(train.weight_decay) << "\n";
  out << "warmup = " << fmt_double(train.warmup) << "\n";
  out << "grad_clip = " << fmt_double(train.grad_clip) << "\n";
  out << "seed = " << train.seed << "\n";
  out << "optimizer = " << train.optimizer << "\n";
  out << "augment = " << fmt_bool(train.augment) << "\n";
  out << "rotate = " << fmt_bool(train.rotate) << "\n";
  out << "flip = " << fmt_bool(train.flip) << "\n";
  out << "scale = " << fmt_bool(train.scale) << "\n";
  out << "rotation_axis = " << train.rotation_axis << "\n";
  out << "order = " << train.order << "\n";
  out << "checkpoint_every = " << train.checkpoint_every << "\n";
  out << "log_every = " << train.log_every << "\n";
  out << "eval_every = " << train.eval_every << "\n";
  out << "early_stop_accuracy = " << fmt_double(train.early_stop_accuracy) << "\n";
  out << "threads = " << train.threads << "\n";
  out << "\n[data]\n";
  out << "dir = " << data.dir << "\n";
  out << "\n[eval]\n";
  out << "samples = " << eval.samples << "\n";
  out << "seed = " << eval.seed << "\n";
  return out.str();
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    if (s.front() == '[' && s.back() == ']') {
      section = s.substr(1, s.size() - 2);
      if (section != "model" && section != "train" && section != "data" && section != "eval")
        throw data_error("unknown config section [" + section + "]");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw data_error("config line " + std::to_string(line_no) + " is not key = value");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    bool ok = false;
    try {
      if (section == "model") ok = set_model_key(cfg.model, key, value);
      else if (section == "train") ok = set_train_key(cfg.train, key, value);
      else if (section == "data") ok = (key == "dir") && (cfg.data.dir = value, true);
      else if (section == "eval") {
        if (key == "samples") ok = (cfg.eval.samples = std::stoi(value), true);
        else if (key == "seed") ok = (cfg.eval.seed = std::stoull(value), true);
      } else {
        throw data_error("config key '" + key + "' outside any section");
      }
    } catch (const std::invalid_argument&) {
      throw data_error("bad value for config key '" + key + "': " + value);
    }
    if (!ok) throw data_error("unknown config key '" + key + "' in section [" + section + "]");
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void RunConfig::validate() const {
  model.validate();
  if (train.steps < 1) throw data_error("train: steps must be >= 1");
  if (train.batch < 1) throw data_error("train: batch must be >= 1");
  if (train.lr <= 0) throw data_error("train: lr must be > 0");
  if (train.optimizer != "adamw" && train.optimizer != "muon")
    throw data_error("train: optimizer must be adamw or muon");
  if (train.rotation_axis != "x" && train.rotation_axis != "y" && train.rotation_axis != "z")
    throw data_error("train: rotation_axis must be x, y or z");
  order_mode_from_name(train.order);
  if (eval.samples < 1) throw data_error("eval: samples must be >= 1");
}

AugmentParams RunConfig::augment_params() const {
  AugmentParams p;
  p.rotate = train.rotate;
  p.flip = train.flip;
  p.scale = train.scale;
  p.rotation_axis = train.rotation_axis == "x" ? 0 : (train.rotation_axis == "y" ? 1 : 2);
  return p;
}

}  // namespace facetok
