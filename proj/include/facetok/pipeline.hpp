#pragma once

#include <memory>
#include <string>
#include <vector>

#include "facetok/checkpoint.hpp"
#include "facetok/config.hpp"
#include "facetok/metrics.hpp"
#include "facetok/model.hpp"
#include "facetok/synthetic.hpp"

namespace facetok {

// one dataset entry, prepped for the model
struct PrepItem {
  QuantizedMesh qmesh;
  FaceTokenSequence tokens;
  PointCloud cloud;
};

// normalize -> quantize -> order -> encode, plus a surface cloud
PrepItem prep_mesh(const RawMesh& mesh, int resolution, OrderMode order, int points,
                   uint64_t cloud_seed);

struct OptimizerBundle {
  std::string kind = "adamw";  // adamw|muon
  AdamW<float> adamw;
  Muon<float> muon;

  void step(std::vector<Parameter<float>*>& params, double lr, double weight_decay) {
    if (kind == "muon") muon.step(params, lr, weight_decay);
    else adamw.step(params, lr, weight_decay);
  }
};

struct TrainResult {
  int steps_run = 0;
  double final_loss = 0;
  double final_accuracy = 0;  // teacher-forced slot accuracy over the clean dataset
  std::vector<double> loss_history;  // one entry per step
  std::string log_csv;               // "step,loss,slot_accuracy,lr,wallclock_ms" lines
};

// Full training loop: per step sample a batch, (optionally) augment,
// quantize, order, tokenize, sample surface points, forward/backward,
// clip, optimizer step. Bitwise reproducible for a fixed seed.
TrainResult train_model(FaceModel<float>& model, OptimizerBundle& opt,
                        const std::vector<RawMesh>& dataset, const RunConfig& cfg,
                        const std::string& ckpt_path = "", const std::string& log_path = "",
                        int start_step = 0);

// teacher-forced slot accuracy over prepped items (no gradients)
double evaluate_accuracy(FaceModel<float>& model, const std::vector<PrepItem>& items);

struct ReconstructResult {
  QuantizedMesh mesh;
  FaceTokenSequence tokens;
  int face_count = 0;
  std::string stop_reason;  // "eos" or "limit"
  int dropped_degenerate = 0;
};

// Greedy decoding: one face at a time, slots decoded left to right with each
// argmax fed back. Ties resolve to the lowest token id; EOS is only legal in
// slot 0, so later slots argmax over coordinate ids.
ReconstructResult reconstruct(FaceModel<float>& model, const PointCloud& cloud,
                              int max_faces);

// checkpoint glue: parameters (+ optimizer state + step) by name
void save_model_checkpoint(const std::string& path, FaceModel<float>& model,
                           OptimizerBundle* opt, int step);
struct LoadedCheckpoint {
  std::unique_ptr<FaceModel<float>> model;
  int step = 0;
};
LoadedCheckpoint load_model_checkpoint(const std::string& path, OptimizerBundle* opt);

struct AblationRow {
  std::string suite;
  std::string variant;
  double final_loss = 0;
  double train_accuracy = 0;
  double heldout_accuracy = 0;
  double cd_mean = 0;
  double hd_mean = 0;
};

struct AblationTable {
  std::vector<AblationRow> rows;
  std::string note;
  std::string to_csv() const;
  std::string to_text() const;
};

// Trains every variant of the suite under the same budget and seed, then
// reports loss, token accuracy and CD/HD on held-out synthetic meshes.
AblationTable ablate(const std::string& suite, const RunConfig& base);

// deterministic synthetic corpora
std::vector<SyntheticSpec> demo_corpus_specs();
std::vector<SyntheticSpec> overfit_corpus_specs();   // 20 meshes, <= 120 faces each
std::vector<SyntheticSpec> ablate_train_specs();
std::vector<SyntheticSpec> ablate_heldout_specs();

void set_thread_count(int threads);

}  // namespace facetok
