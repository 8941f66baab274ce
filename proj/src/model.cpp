#include "facetok/model.hpp"

#include <cmath>
#include <sstream>

namespace facetok {

const char* head_variant_name(HeadVariant v) {
  switch (v) {
    case HeadVariant::causal_mlp: return "causal-mlp";
    case HeadVariant::parallel: return "parallel";
    case HeadVariant::attention: return "attention";
  }
  return "?";
}

HeadVariant head_variant_from_name(const std::string& name) {
  if (name == "causal-mlp") return HeadVariant::causal_mlp;
  if (name == "parallel") return HeadVariant::parallel;
  if (name == "attention") return HeadVariant::attention;
  throw usage_error("unknown head variant '" + name + "' (causal-mlp|parallel|attention)");
}

const char* query_mode_name(QueryMode m) {
  return m == QueryMode::downsample ? "downsample" : "learnable";
}

QueryMode query_mode_from_name(const std::string& name) {
  if (name == "downsample") return QueryMode::downsample;
  if (name == "learnable") return QueryMode::learnable;
  throw usage_error("unknown query mode '" + name + "' (downsample|learnable)");
}

const char* pooling_mode_name(PoolingMode m) {
  return m == PoolingMode::discrete ? "discrete" : "continuous";
}

PoolingMode pooling_mode_from_name(const std::string& name) {
  if (name == "discrete") return PoolingMode::discrete;
  if (name == "continuous") return PoolingMode::continuous;
  throw usage_error("unknown pooling mode '" + name + "' (discrete|continuous)");
}

void ModelConfig::validate() const {
  if (resolution < 2) throw data_error("model: resolution must be >= 2");
  if (d_model <= 0 || d_model % heads != 0)
    throw data_error("model: d_model must be positive and divisible by heads");
  if (latent_count > input_points) throw data_error("model: latent count k exceeds points m");
  if (max_faces < 1) throw data_error("model: max_faces must be >= 1");
  if (freq_bands < 0 || ffn_mult < 1 || pool_dim < 1 || bottleneck_dim < 1 || d_latent < 1)
    throw data_error("model: bad dimension parameter");
  if (encoder_layers < 0 || decoder_layers < 1) throw data_error("model: bad layer count");
}

std::string ModelConfig::serialize() const {
  std::ostringstream out;
  out << "resolution=" << resolution << "\n";
  out << "d_model=" << d_model << "\n";
  out << "d_latent=" << d_latent << "\n";
  out << "bottleneck=" << bottleneck_dim << "\n";
  out << "latents=" << latent_count << "\n";
  out << "encoder_layers=" << encoder_layers << "\n";
  out << "decoder_layers=" << decoder_layers << "\n";
  out << "heads=" << heads << "\n";
  out << "max_faces=" << max_faces << "\n";
  out << "points=" << input_points << "\n";
  out << "freq_bands=" << freq_bands << "\n";
  out << "ffn_mult=" << ffn_mult << "\n";
  out << "pool_dim=" << pool_dim << "\n";
  out << "head=" << head_variant_name(head_variant) << "\n";
  out << "queries=" << query_mode_name(query_mode) << "\n";
  out << "pooling=" << pooling_mode_name(pooling) << "\n";
  return out.str();
}

ModelConfig ModelConfig::deserialize(const std::string& text) {
  ModelConfig cfg;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw data_error("bad model config line: " + line);
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "resolution") cfg.resolution = std::stoi(value);
    else if (key == "d_model") cfg.d_model = std::stoi(value);
    else if (key == "d_latent") cfg.d_latent = std::stoi(value);
    else if (key == "bottleneck") cfg.bottleneck_dim = std::stoi(value);
    else if (key == "latents") cfg.latent_count = std::stoi(value);
    else if (key == "encoder_layers") cfg.encoder_layers = std::stoi(value);
    else if (key == "decoder_layers") cfg.decoder_layers = std::stoi(value);
    else if (key == "heads") cfg.heads = std::stoi(value);
    else if (key == "max_faces") cfg.max_faces = std::stoi(value);
    else if (key == "points") cfg.input_points = std::stoi(value);
    else if (key == "freq_bands") cfg.freq_bands = std::stoi(value);
    else if (key == "ffn_mult") cfg.ffn_mult = std::stoi(value);
    else if (key == "pool_dim") cfg.pool_dim = std::stoi(value);
    else if (key == "head") cfg.head_variant = head_variant_from_name(value);
    else if (key == "queries") cfg.query_mode = query_mode_from_name(value);
    else if (key == "pooling") cfg.pooling = pooling_mode_from_name(value);
    else throw data_error("unknown model config key: " + key);
  }
  cfg.validate();
  return cfg;
}

template <typename T>
FaceModel<T>::FaceModel(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed_combine(seed, 0x30de1));
  const int d = cfg_.d_model;
  const T std02 = T(0.02);

  feat_proj_.init("enc.feat_proj", cfg_.point_feature_dim(), d, rng);
  if (cfg_.query_mode == QueryMode::learnable)
    learned_queries_ = Parameter<T>("enc.queries",
                                    Tensor<T>::randn({cfg_.latent_count, d}, rng, std02));
  enc_ln_q_.init("enc.cross.ln_q", d);
  enc_ln_kv_.init("enc.cross.ln_kv", d);
  enc_ln_ff_.init("enc.cross.ln_ff", d);
  enc_cross_.init("enc.cross.attn", d, d, d, cfg_.heads, rng);
  enc_ff_.init("enc.cross.ff", d, cfg_.ffn_mult, rng);
  enc_blocks_.resize(size_t(cfg_.encoder_layers));
  for (int l = 0; l < cfg_.encoder_layers; ++l)
    enc_blocks_[size_t(l)].init("enc.block" + std::to_string(l), d, cfg_.heads, cfg_.ffn_mult,
                                rng);
  enc_final_ln_.init("enc.final_ln", d);
  bottleneck_down_.init("enc.bottleneck.down", d, cfg_.bottleneck_dim, rng);
  bottleneck_up_.init("enc.bottleneck.up", cfg_.bottleneck_dim, cfg_.d_latent, rng);

  const int vocab = cfg_.vocab_size();
  if (cfg_.pooling == PoolingMode::discrete) {
    coord_embed_ = Parameter<T>("dec.coord_embed",
                                Tensor<T>::randn({vocab, cfg_.pool_dim}, rng, std02));
    slot_pos_embed_ = Parameter<T>("dec.slot_pos",
                                   Tensor<T>::randn({9, cfg_.pool_dim}, rng, std02));
    pool1_.init("dec.pool1", 9 * cfg_.pool_dim, d, rng);
  } else {
    pool1_.init("dec.pool1", 9, d, rng);
  }
  pool2_.init("dec.pool2", d, d, rng);
  bos_ = Parameter<T>("dec.bos", Tensor<T>::randn({1, d}, rng, std02));
  eos_vec_ = Parameter<T>("dec.eos", Tensor<T>::randn({1, d}, rng, std02));
  pos_embed_ = Parameter<T>("dec.pos_embed",
                            Tensor<T>::randn({cfg_.max_faces + 2, d}, rng, std02));

  dec_blocks_.resize(size_t(cfg_.decoder_layers));
  for (int l = 0; l < cfg_.decoder_layers; ++l)
    dec_blocks_[size_t(l)].init("dec.block" + std::to_string(l), d, cfg_.d_latent, cfg_.heads,
                                cfg_.ffn_mult, rng);
  dec_final_ln_.init("dec.final_ln", d);

  switch (cfg_.head_variant) {
    case HeadVariant::causal_mlp:
      head_coord_embed_ =
          Parameter<T>("head.coord_embed", Tensor<T>::randn({vocab, d}, rng, std02));
      head_slot_pos_ = Parameter<T>("head.slot_pos", Tensor<T>::randn({9, d}, rng, std02));
      head_trunk_.init("head.trunk", 2 * d, d, rng);
      head_out_.resize(9);
      for (int j = 0; j < 9; ++j)
        head_out_[size_t(j)].init("head.out" + std::to_string(j), d, vocab, rng,
                                  /*zero_init=*/true);
      break;
    case HeadVariant::parallel:
      par_trunk_.init("head.par_trunk", d, d, rng);
      par_out_.init("head.par_out", d, 9 * vocab, rng, /*zero_init=*/true);
      break;
    case HeadVariant::attention:
      head_coord_embed_ =
          Parameter<T>("head.coord_embed", Tensor<T>::randn({vocab, d}, rng, std02));
      head_slot_pos_ = Parameter<T>("head.slot_pos", Tensor<T>::randn({9, d}, rng, std02));
      attn_h_proj_.init("head.h_proj", d, d, rng);
      attn_ln1_.init("head.ln1", d);
      attn_ln2_.init("head.ln2", d);
      attn_final_ln_.init("head.final_ln", d);
      attn_self_.init("head.self", d, d, d, cfg_.heads, rng);
      attn_ff_.init("head.ff", d, cfg_.ffn_mult, rng);
      attn_out_.init("head.out", d, vocab, rng, /*zero_init=*/true);
      break;
  }
}

template <typename T>
std::vector<Parameter<T>*> FaceModel<T>::parameters() {
  std::vector<Parameter<T>*> out;
  feat_proj_.collect(out);
  if (cfg_.query_mode == QueryMode::learnable) out.push_back(&learned_queries_);
  enc_ln_q_.collect(out);
  enc_ln_kv_.collect(out);
  enc_ln_ff_.collect(out);
  enc_cross_.collect(out);
  enc_ff_.collect(out);
  for (auto& b : enc_blocks_) b.collect(out);
  enc_final_ln_.collect(out);
  bottleneck_down_.collect(out);
  bottleneck_up_.collect(out);

  if (cfg_.pooling == PoolingMode::discrete) {
    out.push_back(&coord_embed_);
    out.push_back(&slot_pos_embed_);
  }
  pool1_.collect(out);
  pool2_.collect(out);
  out.push_back(&bos_);
  out.push_back(&eos_vec_);
  out.push_back(&pos_embed_);
  for (auto& b : dec_blocks_) b.collect(out);
  dec_final_ln_.collect(out);

  switch (cfg_.head_variant) {
    case HeadVariant::causal_mlp:
      out.push_back(&head_coord_embed_);
      out.push_back(&head_slot_pos_);
      head_trunk_.collect(out);
      for (auto& o : head_out_) o.collect(out);
      break;
    case HeadVariant::parallel:
      par_trunk_.collect(out);
      par_out_.collect(out);
      break;
    case HeadVariant::attention:
      out.push_back(&head_coord_embed_);
      out.push_back(&head_slot_pos_);
      attn_h_proj_.collect(out);
      attn_ln1_.collect(out);
      attn_ln2_.collect(out);
      attn_final_ln_.collect(out);
      attn_self_.collect(out);
      attn_ff_.collect(out);
      attn_out_.collect(out);
      break;
  }
  return out;
}

template <typename T>
void FaceModel<T>::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

template <typename T>
Tensor<T> FaceModel<T>::point_features(const PointCloud& cloud) const {
  const int m = int(cloud.size());
  const int fd = cfg_.point_feature_dim();
  Tensor<T> feats({m, fd});
  constexpr double kPi = 3.14159265358979323846;
  for (int i = 0; i < m; ++i) {
    T* row = feats.data.data() + size_t(i) * fd;
    int c = 0;
    for (int a = 0; a < 3; ++a) {
      const double x = cloud.points[size_t(i)][a];
      row[c++] = T(x);
      for (int b = 0; b < cfg_.freq_bands; ++b) {
        const double f = std::ldexp(kPi, b) * x;  // 2^b * pi * x
        row[c++] = T(std::sin(f));
        row[c++] = T(std::cos(f));
      }
    }
    for (int a = 0; a < 3; ++a) row[c++] = T(cloud.normals[size_t(i)][a]);
  }
  return feats;
}

template <typename T>
int FaceModel<T>::encode_shape(Tape<T>& t, const PointCloud& cloud,
                               const std::vector<int>* pinned_queries) {
  const int m = int(cloud.size());
  if (cfg_.latent_count > m) throw data_error("encode_shape: k exceeds cloud size");

  const int feats = t.constant(point_features(cloud));
  const int pt = feat_proj_.forward(t, feats);

  int x;
  if (cfg_.query_mode == QueryMode::learnable) {
    x = t.param(learned_queries_);
  } else {
    std::vector<int> idx =
        pinned_queries ? *pinned_queries : fps(cloud, cfg_.latent_count, 0);
    x = gather_rows(t, pt, std::move(idx));
  }

  // query cross-attention over the full point set, then the encoder stack
  x = add(t, x,
          enc_cross_.forward(t, enc_ln_q_.forward(t, x), enc_ln_kv_.forward(t, pt), false, m));
  x = add(t, x, enc_ff_.forward(t, enc_ln_ff_.forward(t, x)));
  for (auto& block : enc_blocks_) x = block.forward(t, x);
  x = enc_final_ln_.forward(t, x);
  return bottleneck_up_.forward(t, bottleneck_down_.forward(t, x));
}

template <typename T>
int FaceModel<T>::pooled_face_embeddings(Tape<T>& t,
                                         const std::vector<const FaceToken*>& content) {
  const int n = int(content.size());
  if (cfg_.pooling == PoolingMode::discrete) {
    std::vector<int> coord_ids(size_t(n) * 9);
    std::vector<int> slot_ids(size_t(n) * 9);
    for (int i = 0; i < n; ++i)
      for (int s = 0; s < 9; ++s) {
        coord_ids[size_t(i) * 9 + s] = content[size_t(i)]->slots[size_t(s)];
        slot_ids[size_t(i) * 9 + s] = s;
      }
    int e = embedding(t, t.param(coord_embed_), std::move(coord_ids));
    e = add(t, e, embedding(t, t.param(slot_pos_embed_), std::move(slot_ids)));
    e = reshape(t, e, {n, 9 * cfg_.pool_dim});
    return pool2_.forward(t, gelu(t, pool1_.forward(t, e)));
  }
  // continuous pooling: raw 9-vector of grid coordinates mapped to [-0.5, 0.5]
  Tensor<T> vals({n, 9});
  const double inv = 1.0 / double(cfg_.resolution - 1);
  for (int i = 0; i < n; ++i)
    for (int s = 0; s < 9; ++s)
      vals.data[size_t(i) * 9 + s] = T(content[size_t(i)]->slots[size_t(s)] * inv - 0.5);
  const int v = t.constant(std::move(vals));
  return pool2_.forward(t, gelu(t, pool1_.forward(t, v)));
}

template <typename T>
int FaceModel<T>::embed_sequence(Tape<T>& t, const FaceToken* tokens, int count, int pad_len) {
  const Vocabulary vocab{cfg_.resolution};
  const int real_len = count + 1;  // BOS
  if (count > cfg_.max_faces + 1)
    throw data_error("sequence of " + std::to_string(count) + " tokens exceeds max_faces=" +
                     std::to_string(cfg_.max_faces));
  const int total = pad_len < 0 ? real_len : pad_len;
  if (total < real_len) throw data_error("pad length shorter than sequence");

  std::vector<const FaceToken*> content;
  int eos_count = 0;
  for (int i = 0; i < count; ++i) {
    if (tokens[i].is_eos(vocab)) {
      if (i + 1 != count) throw data_error("EOS token inside sequence");
      ++eos_count;
    } else {
      content.push_back(&tokens[i]);
    }
  }

  std::vector<int> parts;
  parts.push_back(t.param(bos_));
  if (!content.empty()) parts.push_back(pooled_face_embeddings(t, content));
  if (eos_count) parts.push_back(t.param(eos_vec_));
  if (total > real_len)
    parts.push_back(t.constant(Tensor<T>::zeros({total - real_len, cfg_.d_model})));
  int emb = concat_rows(t, parts);
  return add(t, emb, slice_rows(t, t.param(pos_embed_), 0, total));
}

template <typename T>
int FaceModel<T>::decode_faces(Tape<T>& t, int emb, int latent, int valid_len) {
  int x = emb;
  for (auto& block : dec_blocks_) x = block.forward(t, x, latent, valid_len);
  return dec_final_ln_.forward(t, x);
}

template <typename T>
int FaceModel<T>::head_prev_sum_step(Tape<T>& t, int prev_sum, const std::vector<int>& ids,
                                     int slot) {
  int e = embedding(t, t.param(head_coord_embed_), ids);
  e = add_rowvec(t, e, slice_rows(t, t.param(head_slot_pos_), slot, slot + 1));
  return prev_sum < 0 ? e : add(t, prev_sum, e);
}

template <typename T>
int FaceModel<T>::head_logits_teacher(Tape<T>& t, int h,
                                      const std::vector<std::array<int, 9>>& targets,
                                      std::vector<int>& row_targets) {
  const int faces = int(targets.size());
  if (t.val(h).rows() != faces) throw numeric_error("head: face count mismatch");
  const int vocab = cfg_.vocab_size();
  row_targets.clear();

  switch (cfg_.head_variant) {
    case HeadVariant::causal_mlp: {
      // slot-major blocks: rows [j*faces, (j+1)*faces) hold slot j+1
      std::vector<int> blocks;
      int prev_sum = t.constant(Tensor<T>::zeros({faces, cfg_.d_model}));
      for (int j = 0; j < 9; ++j) {
        const int x = concat_cols(t, h, prev_sum);
        const int hidden = gelu(t, head_trunk_.forward(t, x));
        blocks.push_back(head_out_[size_t(j)].forward(t, hidden));
        if (j < 8) {
          std::vector<int> ids(size_t(faces));
          for (int f = 0; f < faces; ++f) ids[size_t(f)] = targets[size_t(f)][size_t(j)];
          prev_sum = head_prev_sum_step(t, prev_sum, ids, j);
        }
      }
      for (int j = 0; j < 9; ++j)
        for (int f = 0; f < faces; ++f) row_targets.push_back(targets[size_t(f)][size_t(j)]);
      return concat_rows(t, blocks);
    }
    case HeadVariant::parallel: {
      const int hidden = gelu(t, par_trunk_.forward(t, h));
      const int all = par_out_.forward(t, hidden);  // [faces, 9 * vocab]
      std::vector<int> blocks;
      for (int j = 0; j < 9; ++j) blocks.push_back(slice_cols(t, all, j * vocab, (j + 1) * vocab));
      for (int j = 0; j < 9; ++j)
        for (int f = 0; f < faces; ++f) row_targets.push_back(targets[size_t(f)][size_t(j)]);
      return concat_rows(t, blocks);
    }
    case HeadVariant::attention: {
      // per-face causal mini-transformer over [h, slot embeddings]
      std::vector<int> blocks;
      for (int f = 0; f < faces; ++f) {
        std::vector<int> parts;
        parts.push_back(attn_h_proj_.forward(t, slice_rows(t, h, f, f + 1)));
        for (int s = 0; s < 8; ++s)
          parts.push_back(
              head_prev_sum_step(t, -1, std::vector<int>{targets[size_t(f)][size_t(s)]}, s));
        int x = concat_rows(t, parts);  // [9, d]
        const int n1 = attn_ln1_.forward(t, x);
        x = add(t, x, attn_self_.forward(t, n1, n1, true, 9));
        x = add(t, x, attn_ff_.forward(t, attn_ln2_.forward(t, x)));
        x = attn_final_ln_.forward(t, x);
        blocks.push_back(attn_out_.forward(t, x));  // [9, vocab]
      }
      for (int f = 0; f < faces; ++f)
        for (int j = 0; j < 9; ++j) row_targets.push_back(targets[size_t(f)][size_t(j)]);
      return concat_rows(t, blocks);
    }
  }
  throw numeric_error("unreachable head variant");
}

template <typename T>
int FaceModel<T>::head_logits(Tape<T>& t, int h_row, const std::vector<int>& prev_slots) {
  if (prev_slots.size() > 8) throw data_error("head_logits: at most 8 previous slots");
  if (t.val(h_row).rows() != 1) throw numeric_error("head_logits: expects one face vector");
  const int j = int(prev_slots.size());  // predicting slot j+1 (0-based j)
  const int vocab = cfg_.vocab_size();

  switch (cfg_.head_variant) {
    case HeadVariant::causal_mlp: {
      int prev_sum = -1;
      for (int s = 0; s < j; ++s)
        prev_sum = head_prev_sum_step(t, prev_sum, std::vector<int>{prev_slots[size_t(s)]}, s);
      if (prev_sum < 0) prev_sum = t.constant(Tensor<T>::zeros({1, cfg_.d_model}));
      const int x = concat_cols(t, h_row, prev_sum);
      const int hidden = gelu(t, head_trunk_.forward(t, x));
      return head_out_[size_t(j)].forward(t, hidden);
    }
    case HeadVariant::parallel: {
      const int hidden = gelu(t, par_trunk_.forward(t, h_row));
      const int all = par_out_.forward(t, hidden);
      return slice_cols(t, all, j * vocab, (j + 1) * vocab);
    }
    case HeadVariant::attention: {
      std::vector<int> parts;
      parts.push_back(attn_h_proj_.forward(t, h_row));
      for (int s = 0; s < j; ++s)
        parts.push_back(head_prev_sum_step(t, -1, std::vector<int>{prev_slots[size_t(s)]}, s));
      int x = concat_rows(t, parts);  // [j+1, d]
      const int n1 = attn_ln1_.forward(t, x);
      x = add(t, x, attn_self_.forward(t, n1, n1, true, j + 1));
      x = add(t, x, attn_ff_.forward(t, attn_ln2_.forward(t, x)));
      x = attn_final_ln_.forward(t, x);
      return attn_out_.forward(t, slice_rows(t, x, j, j + 1));
    }
  }
  throw numeric_error("unreachable head variant");
}

template <typename T>
typename FaceModel<T>::LossInfo FaceModel<T>::forward_loss(Tape<T>& t,
                                                           const std::vector<Sample>& batch,
                                                           int pad_to) {
  if (batch.empty()) throw data_error("forward_loss: empty batch");
  LossInfo info;
  std::vector<std::pair<int, T>> weighted;
  std::vector<long> face_counts;

  for (const Sample& sample : batch) {
    const auto& tokens = sample.tokens->tokens;
    const int n_tokens = int(tokens.size());  // content + EOS
    if (n_tokens < 1) throw data_error("forward_loss: empty token sequence");
    const int real_len = n_tokens + 1;  // + BOS
    const int total = std::max(pad_to, real_len);

    const int latent = encode_shape(t, *sample.cloud);
    const int emb = embed_sequence(t, tokens.data(), n_tokens, total);
    const int h_all = decode_faces(t, emb, latent, real_len);
    const int h = slice_rows(t, h_all, 0, n_tokens);

    std::vector<std::array<int, 9>> targets(size_t(n_tokens));
    for (int i = 0; i < n_tokens; ++i) targets[size_t(i)] = tokens[size_t(i)].slots;

    std::vector<int> row_targets;
    const int logits = head_logits_teacher(t, h, targets, row_targets);
    const int ce = cross_entropy(t, logits, row_targets);
    weighted.push_back({scale(t, ce, T(9)), T(0)});  // weight filled below
    face_counts.push_back(n_tokens);

    const Tensor<T>& lv = t.val(logits);
    for (int r = 0; r < lv.rows(); ++r) {
      ++info.slots_total;
      if (argmax_row(lv, r) == row_targets[size_t(r)]) ++info.slots_correct;
    }
    info.faces += n_tokens;
    info.attn_len = real_len;
  }

  const double total_faces = double(info.faces);
  for (size_t i = 0; i < weighted.size(); ++i)
    weighted[i].second = T(double(face_counts[i]) / total_faces);
  info.loss = add_scalars(t, weighted);
  info.loss_value = double(t.val(info.loss).data[0]);
  return info;
}

template class FaceModel<float>;
template class FaceModel<double>;

}  // namespace facetok
