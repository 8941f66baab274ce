#pragma once

#include <array>
#include <string>
#include <vector>

#include "facetok/ops.hpp"
#include "facetok/optim.hpp"
#include "facetok/sampling.hpp"
#include "facetok/tokens.hpp"

namespace facetok {

enum class HeadVariant { causal_mlp, parallel, attention };
enum class QueryMode { downsample, learnable };
enum class PoolingMode { discrete, continuous };

const char* head_variant_name(HeadVariant v);
HeadVariant head_variant_from_name(const std::string& name);
const char* query_mode_name(QueryMode m);
QueryMode query_mode_from_name(const std::string& name);
const char* pooling_mode_name(PoolingMode m);
PoolingMode pooling_mode_from_name(const std::string& name);

struct ModelConfig {
  int resolution = 128;
  int d_model = 256;
  int d_latent = 256;
  int bottleneck_dim = 64;
  int latent_count = 64;  // query/latent token count k
  int encoder_layers = 2;
  int decoder_layers = 4;
  int heads = 4;
  int max_faces = 400;
  int input_points = 1024;
  int freq_bands = 6;
  int ffn_mult = 4;
  int pool_dim = 32;  // per-slot embedding width in the face pooling layer
  HeadVariant head_variant = HeadVariant::causal_mlp;
  QueryMode query_mode = QueryMode::downsample;
  PoolingMode pooling = PoolingMode::discrete;

  int vocab_size() const { return resolution + 1; }
  int point_feature_dim() const { return 3 * (1 + 2 * freq_bands) + 3; }
  void validate() const;

  std::string serialize() const;
  static ModelConfig deserialize(const std::string& text);
  bool operator==(const ModelConfig&) const = default;
};

template <typename T>
struct LinearLayer {
  Parameter<T> w, b;

  void init(const std::string& name, int in, int out, Rng& rng, bool zero_init = false) {
    w = Parameter<T>(name + ".w", zero_init ? Tensor<T>::zeros({in, out})
                                            : Tensor<T>::randn({in, out}, rng, T(0.02)));
    b = Parameter<T>(name + ".b", Tensor<T>::zeros({out}));
  }
  int forward(Tape<T>& t, int x) { return linear(t, x, t.param(w), t.param(b)); }
  void collect(std::vector<Parameter<T>*>& out) {
    out.push_back(&w);
    out.push_back(&b);
  }
};

template <typename T>
struct LayerNormLayer {
  Parameter<T> gamma, beta;

  void init(const std::string& name, int dim) {
    gamma = Parameter<T>(name + ".g", Tensor<T>::full({dim}, T(1)));
    beta = Parameter<T>(name + ".b", Tensor<T>::zeros({dim}));
  }
  int forward(Tape<T>& t, int x) { return layer_norm(t, x, t.param(gamma), t.param(beta)); }
  void collect(std::vector<Parameter<T>*>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }
};

template <typename T>
struct Mha {
  LinearLayer<T> wq, wk, wv, wo;
  int heads = 1;

  void init(const std::string& name, int d_q_in, int d_kv_in, int d_model, int n_heads,
            Rng& rng) {
    heads = n_heads;
    wq.init(name + ".q", d_q_in, d_model, rng);
    wk.init(name + ".k", d_kv_in, d_model, rng);
    wv.init(name + ".v", d_kv_in, d_model, rng);
    wo.init(name + ".o", d_model, d_model, rng);
  }
  int forward(Tape<T>& t, int xq, int xkv, bool causal, int kv_valid) {
    const int q = wq.forward(t, xq);
    const int k = wk.forward(t, xkv);
    const int v = wv.forward(t, xkv);
    return wo.forward(t, attention(t, q, k, v, heads, causal, kv_valid));
  }
  void collect(std::vector<Parameter<T>*>& out) {
    wq.collect(out);
    wk.collect(out);
    wv.collect(out);
    wo.collect(out);
  }
};

template <typename T>
struct FeedForward {
  LinearLayer<T> up, down;

  void init(const std::string& name, int d_model, int mult, Rng& rng) {
    up.init(name + ".up", d_model, d_model * mult, rng);
    down.init(name + ".down", d_model * mult, d_model, rng);
  }
  int forward(Tape<T>& t, int x) { return down.forward(t, gelu(t, up.forward(t, x))); }
  void collect(std::vector<Parameter<T>*>& out) {
    up.collect(out);
    down.collect(out);
  }
};

// pre-norm self-attention block
template <typename T>
struct EncoderBlock {
  LayerNormLayer<T> ln1, ln2;
  Mha<T> attn;
  FeedForward<T> ff;

  void init(const std::string& name, int d_model, int heads, int ffn_mult, Rng& rng) {
    ln1.init(name + ".ln1", d_model);
    ln2.init(name + ".ln2", d_model);
    attn.init(name + ".attn", d_model, d_model, d_model, heads, rng);
    ff.init(name + ".ff", d_model, ffn_mult, rng);
  }
  int forward(Tape<T>& t, int x) {
    const int rows = t.val(x).rows();
    const int n1 = ln1.forward(t, x);
    x = add(t, x, attn.forward(t, n1, n1, false, rows));
    x = add(t, x, ff.forward(t, ln2.forward(t, x)));
    return x;
  }
  void collect(std::vector<Parameter<T>*>& out) {
    ln1.collect(out);
    ln2.collect(out);
    attn.collect(out);
    ff.collect(out);
  }
};

// pre-norm block: causal self-attention, cross-attention into the latent
// set, feed-forward; residuals around each
template <typename T>
struct DecoderBlock {
  LayerNormLayer<T> ln1, ln2, ln3;
  Mha<T> self_attn, cross_attn;
  FeedForward<T> ff;

  void init(const std::string& name, int d_model, int d_latent, int heads, int ffn_mult,
            Rng& rng) {
    ln1.init(name + ".ln1", d_model);
    ln2.init(name + ".ln2", d_model);
    ln3.init(name + ".ln3", d_model);
    self_attn.init(name + ".self", d_model, d_model, d_model, heads, rng);
    cross_attn.init(name + ".cross", d_model, d_latent, d_model, heads, rng);
    ff.init(name + ".ff", d_model, ffn_mult, rng);
  }
  int forward(Tape<T>& t, int x, int latent, int valid_len) {
    const int n1 = ln1.forward(t, x);
    x = add(t, x, self_attn.forward(t, n1, n1, true, valid_len));
    x = add(t, x,
            cross_attn.forward(t, ln2.forward(t, x), latent, false, t.val(latent).rows()));
    x = add(t, x, ff.forward(t, ln3.forward(t, x)));
    return x;
  }
  void collect(std::vector<Parameter<T>*>& out) {
    ln1.collect(out);
    ln2.collect(out);
    ln3.collect(out);
    self_attn.collect(out);
    cross_attn.collect(out);
    ff.collect(out);
  }
};

template <typename T>
class FaceModel {
 public:
  struct Sample {
    const PointCloud* cloud = nullptr;
    const FaceTokenSequence* tokens = nullptr;
  };

  struct LossInfo {
    int loss = -1;  // scalar node
    double loss_value = 0;
    long slots_total = 0;
    long slots_correct = 0;
    long faces = 0;    // content + EOS, summed over the batch
    int attn_len = 0;  // decoder self-attention valid length of the last sample
  };

  explicit FaceModel(const ModelConfig& cfg, uint64_t seed = 0);

  const ModelConfig& config() const { return cfg_; }
  std::vector<Parameter<T>*> parameters();
  void zero_grad();

  // Point features -> query cross-attention -> encoder stack -> bottleneck.
  // Queries default to an FPS subset of the cloud; pinned_queries overrides
  // the selection (permutation tests).
  int encode_shape(Tape<T>& t, const PointCloud& cloud,
                   const std::vector<int>* pinned_queries = nullptr);

  // BOS + the given tokens, zero-padded to pad_len rows (pad_len < 0 keeps
  // the natural length), plus learned position embeddings.
  int embed_sequence(Tape<T>& t, const FaceToken* tokens, int count, int pad_len = -1);

  int decode_faces(Tape<T>& t, int emb, int latent, int valid_len);

  // Teacher-forced logits for all faces and slots; rows of the returned node
  // follow row_targets (one target per row).
  int head_logits_teacher(Tape<T>& t, int h, const std::vector<std::array<int, 9>>& targets,
                          std::vector<int>& row_targets);

  // Logits for slot |prev_slots|+1 of a single face vector h_row [1, d].
  int head_logits(Tape<T>& t, int h_row, const std::vector<int>& prev_slots);

  LossInfo forward_loss(Tape<T>& t, const std::vector<Sample>& batch, int pad_to = -1);

  Tensor<T> point_features(const PointCloud& cloud) const;

 private:
  int pooled_face_embeddings(Tape<T>& t, const std::vector<const FaceToken*>& content);
  int head_prev_sum_step(Tape<T>& t, int prev_sum, const std::vector<int>& ids, int slot);

  ModelConfig cfg_;

  // shape encoder
  LinearLayer<T> feat_proj_;
  Parameter<T> learned_queries_;
  LayerNormLayer<T> enc_ln_q_, enc_ln_kv_, enc_ln_ff_;
  Mha<T> enc_cross_;
  FeedForward<T> enc_ff_;
  std::vector<EncoderBlock<T>> enc_blocks_;
  LayerNormLayer<T> enc_final_ln_;
  LinearLayer<T> bottleneck_down_, bottleneck_up_;

  // face embedding
  Parameter<T> coord_embed_, slot_pos_embed_;
  LinearLayer<T> pool1_, pool2_;
  Parameter<T> bos_, eos_vec_, pos_embed_;

  // decoder
  std::vector<DecoderBlock<T>> dec_blocks_;
  LayerNormLayer<T> dec_final_ln_;

  // coordinate head (variant-dependent)
  Parameter<T> head_coord_embed_, head_slot_pos_;
  LinearLayer<T> head_trunk_;
  std::vector<LinearLayer<T>> head_out_;  // 9 slot projections (causal_mlp)
  LinearLayer<T> par_trunk_, par_out_;
  LinearLayer<T> attn_h_proj_, attn_out_;
  LayerNormLayer<T> attn_ln1_, attn_ln2_, attn_final_ln_;
  Mha<T> attn_self_;
  FeedForward<T> attn_ff_;
};

using FaceModelF = FaceModel<float>;
using FaceModelD = FaceModel<double>;

extern template class FaceModel<float>;
extern template class FaceModel<double>;

}  // namespace facetok
