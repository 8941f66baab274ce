#pragma once

#include <string>

#include "facetok/model.hpp"

namespace facetok {

// Sectioned key = value run configuration. Every field has a default,
// unknown keys are errors, and parse(serialize(x)) == x.
struct RunConfig {
  ModelConfig model;

  struct Train {
    int steps = 2000;
    int batch = 4;
    double lr = 1e-3;
    double weight_decay = 0.01;
    double warmup = 0.03;
    double grad_clip = 1.0;
    uint64_t seed = 0;
    std::string optimizer = "adamw";  // adamw|muon
    bool augment = true;
    bool rotate = true;
    bool flip = true;
    bool scale = true;
    std::string rotation_axis = "z";
    std::string order = "zyx";
    int checkpoint_every = 0;  // 0 disables periodic checkpoints
    int log_every = 10;
    int eval_every = 250;
    double early_stop_accuracy = 0.0;  // 0 disables early stopping
    int threads = 0;                   // 0 = library default

    bool operator==(const Train&) const = default;
  } train;

  struct Data {
    std::string dir = "data";
    bool operator==(const Data&) const = default;
  } data;

  struct Eval {
    int samples = 4096;
    uint64_t seed = 0;
    bool operator==(const Eval&) const = default;
  } eval;

  std::string serialize() const;
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);
  void validate() const;

  OrderMode order_mode() const { return order_mode_from_name(train.order); }
  AugmentParams augment_params() const;

  bool operator==(const RunConfig&) const = default;
};

}  // namespace facetok
