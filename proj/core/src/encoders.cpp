#include "promim/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "promim/error.hpp"
#include "promim/random.hpp"

namespace promim {

namespace {

constexpr std::string_view kModule = "encoders";

[[noreturn]] void fail(ErrorKind kind, const std::string& message) { raise(kind, kModule, message); }

Tensor normal_param(Shape shape, double stddev, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.normal(0.0, stddev);
  return Tensor::from_data(std::move(shape), std::move(v), true);
}

Tensor const_param(Shape shape, double value) {
  std::vector<double> v(shape_numel(shape), value);
  return Tensor::from_data(std::move(shape), std::move(v), true);
}

TransformerBlock make_block(std::size_t width, std::size_t hidden, Rng& rng) {
  const double s_in = 1.0 / std::sqrt(static_cast<double>(width));
  const double s_hidden = 1.0 / std::sqrt(static_cast<double>(hidden));
  TransformerBlock b;
  b.ln1_gain = const_param({width}, 1.0);
  b.ln1_bias = const_param({width}, 0.0);
  b.qkv_weight = normal_param({width, 3 * width}, s_in, rng);
  b.qkv_bias = const_param({3 * width}, 0.0);
  b.out_weight = normal_param({width, width}, s_in, rng);
  b.out_bias = const_param({width}, 0.0);
  b.ln2_gain = const_param({width}, 1.0);
  b.ln2_bias = const_param({width}, 0.0);
  b.fc1_weight = normal_param({width, hidden}, s_in, rng);
  b.fc1_bias = const_param({hidden}, 0.0);
  b.fc2_weight = normal_param({hidden, width}, s_hidden, rng);
  b.fc2_bias = const_param({width}, 0.0);
  return b;
}

void append_block(std::vector<NamedTensor>& out, const std::string& prefix,
                  const TransformerBlock& b) {
  out.push_back({prefix + ".ln1_gain", b.ln1_gain});
  out.push_back({prefix + ".ln1_bias", b.ln1_bias});
  out.push_back({prefix + ".qkv_weight", b.qkv_weight});
  out.push_back({prefix + ".qkv_bias", b.qkv_bias});
  out.push_back({prefix + ".out_weight", b.out_weight});
  out.push_back({prefix + ".out_bias", b.out_bias});
  out.push_back({prefix + ".ln2_gain", b.ln2_gain});
  out.push_back({prefix + ".ln2_bias", b.ln2_bias});
  out.push_back({prefix + ".fc1_weight", b.fc1_weight});
  out.push_back({prefix + ".fc1_bias", b.fc1_bias});
  out.push_back({prefix + ".fc2_weight", b.fc2_weight});
  out.push_back({prefix + ".fc2_bias", b.fc2_bias});
}

Tensor run_block(const TransformerBlock& b, const Tensor& h, std::size_t batch,
                 std::size_t seq_len, std::size_t heads) {
  const Tensor a = layer_norm(h, b.ln1_gain, b.ln1_bias);
  const Tensor attn = self_attention(linear(a, b.qkv_weight, b.qkv_bias), batch, seq_len, heads);
  const Tensor h1 = add(h, linear(attn, b.out_weight, b.out_bias));
  const Tensor m = layer_norm(h1, b.ln2_gain, b.ln2_bias);
  return add(h1, linear(gelu(linear(m, b.fc1_weight, b.fc1_bias)), b.fc2_weight, b.fc2_bias));
}

// Runs the text tower over sequences whose rows are gathered from `source`
// (embedding table, optionally preceded by soft prefix rows). The final row
// of every sequence is pooled. Sequences are grouped by length so each
// group runs as one batch; output rows follow input order.
Tensor encode_text_rows(const DualEncoder& encoder, const Tensor& source,
                        std::span<const std::vector<std::size_t>> sequences) {
  const EncoderConfig& cfg = encoder.config();
  const TextTower& tower = encoder.text();
  if (sequences.empty()) fail(ErrorKind::kInput, "no text sequences to encode");

  std::map<std::size_t, std::vector<std::size_t>> by_length;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const std::size_t len = sequences[i].size();
    if (len < 2 || len > cfg.max_text_len) {
      fail(ErrorKind::kInput, "text length " + std::to_string(len - 1) +
                                  " (+ end token) outside [1, " +
                                  std::to_string(cfg.max_text_len - 1) + "]");
    }
    by_length[len].push_back(i);
  }

  std::vector<Tensor> pooled_groups;
  std::vector<std::size_t> group_order;
  for (const auto& [len, members] : by_length) {
    std::vector<std::size_t> rows;
    std::vector<std::size_t> pos;
    rows.reserve(members.size() * len);
    for (std::size_t m : members) {
      rows.insert(rows.end(), sequences[m].begin(), sequences[m].end());
      for (std::size_t p = 0; p < len; ++p) pos.push_back(p);
    }
    Tensor h = add(gather_rows(source, rows), gather_rows(tower.positions, pos));
    for (const TransformerBlock& b : tower.blocks) h = run_block(b, h, members.size(), len, cfg.heads);
    std::vector<std::size_t> last(members.size());
    for (std::size_t k = 0; k < members.size(); ++k) last[k] = k * len + len - 1;
    const Tensor pooled = layer_norm(gather_rows(h, last), tower.ln_gain, tower.ln_bias);
    pooled_groups.push_back(matmul(pooled, tower.projection));
    group_order.insert(group_order.end(), members.begin(), members.end());
  }
  if (pooled_groups.size() == 1) return pooled_groups.front();
  const Tensor stacked = concat_rows(pooled_groups);
  std::vector<std::size_t> inverse(group_order.size());
  for (std::size_t k = 0; k < group_order.size(); ++k) inverse[group_order[k]] = k;
  return gather_rows(stacked, inverse);
}

std::vector<std::size_t> token_rows(const DualEncoder& encoder, std::span<const TokenId> tokens,
                                    std::size_t offset) {
  const std::size_t vocab = encoder.vocabulary().size();
  std::vector<std::size_t> rows;
  rows.reserve(tokens.size() + 1);
  for (TokenId t : tokens) {
    if (t >= vocab) {
      fail(ErrorKind::kInput, "token id " + std::to_string(t) + " out of vocabulary (size " +
                                  std::to_string(vocab) + ")");
    }
    rows.push_back(offset + t);
  }
  rows.push_back(offset + encoder.vocabulary().end_token());
  return rows;
}

}  // namespace

void EncoderConfig::validate() const {
  auto bad = [](const std::string& m) { fail(ErrorKind::kInput, "encoder config: " + m); };
  if (patch_size == 0 || image_side == 0 || image_side % patch_size != 0) {
    bad("image_side must be a positive multiple of patch_size");
  }
  if (channels == 0) bad("channels must be positive");
  if (embed_dim < 2 || heads == 0 || embed_dim % heads != 0) {
    bad("embed_dim must be divisible by heads");
  }
  if (depth == 0) bad("depth must be positive");
  if (mlp_ratio == 0) bad("mlp_ratio must be positive");
  if (output_dim == 0) bad("output_dim must be positive");
  if (max_text_len < 2) bad("max_text_len must be at least 2");
  if (text_vocab_size < 2) bad("text_vocab_size must be at least 2");
}

// ---- patches -----------------------------------------------------------------------

PatchGrid patchify(const Image& image, std::size_t patch_size) {
  if (patch_size == 0 || image.side % patch_size != 0) {
    fail(ErrorKind::kDimension, "image side " + std::to_string(image.side) +
                                    " not divisible by patch size " + std::to_string(patch_size));
  }
  if (image.pixels.size() != image.side * image.side * image.channels) {
    fail(ErrorKind::kDimension, "image pixel buffer does not match its side and channels");
  }
  PatchGrid grid;
  grid.grid_h = grid.grid_w = image.side / patch_size;
  grid.patch_dim = patch_size * patch_size * image.channels;
  grid.values.reserve(image.pixels.size());
  for (std::size_t gy = 0; gy < grid.grid_h; ++gy)
    for (std::size_t gx = 0; gx < grid.grid_w; ++gx)
      for (std::size_t y = 0; y < patch_size; ++y)
        for (std::size_t x = 0; x < patch_size; ++x)
          for (std::size_t c = 0; c < image.channels; ++c)
            grid.values.push_back(image.at(gy * patch_size + y, gx * patch_size + x, c));
  return grid;
}

Image unpatchify(const PatchGrid& grid, std::size_t patch_size, std::size_t channels) {
  if (grid.grid_h != grid.grid_w || grid.patch_dim != patch_size * patch_size * channels ||
      grid.values.size() != grid.size() * grid.patch_dim) {
    fail(ErrorKind::kDimension, "patch grid is inconsistent with patch size and channels");
  }
  Image image;
  image.side = grid.grid_h * patch_size;
  image.channels = channels;
  image.pixels.assign(image.side * image.side * channels, 0.0);
  std::size_t k = 0;
  for (std::size_t gy = 0; gy < grid.grid_h; ++gy)
    for (std::size_t gx = 0; gx < grid.grid_w; ++gx)
      for (std::size_t y = 0; y < patch_size; ++y)
        for (std::size_t x = 0; x < patch_size; ++x)
          for (std::size_t c = 0; c < channels; ++c)
            image.at(gy * patch_size + y, gx * patch_size + x, c) = grid.values[k++];
  return image;
}

// ---- DualEncoder ---------------------------------------------------------------------

DualEncoder DualEncoder::initialize(const EncoderConfig& config, std::uint64_t seed,
                                    std::shared_ptr<const Vocabulary> vocabulary) {
  config.validate();
  if (!vocabulary) fail(ErrorKind::kInput, "missing vocabulary");
  if (vocabulary->size() != config.text_vocab_size) {
    fail(ErrorKind::kInput, "text_vocab_size " + std::to_string(config.text_vocab_size) +
                                " does not match vocabulary size " +
                                std::to_string(vocabulary->size()));
  }
  DualEncoder enc;
  enc.config_ = config;
  enc.vocabulary_ = std::move(vocabulary);
  const std::size_t E = config.embed_dim, hidden = config.mlp_ratio * E;
  const double s_out = 1.0 / std::sqrt(static_cast<double>(E));

  Rng vrng(derive_seed(seed, {1}));
  VisionTower& v = enc.vision_;
  v.patch_weight =
      normal_param({config.patch_dim(), E}, 1.0 / std::sqrt(double(config.patch_dim())), vrng);
  v.patch_bias = const_param({E}, 0.0);
  v.class_token = normal_param({1, E}, 0.02, vrng);
  v.positions = normal_param({config.n_patches() + 1, E}, 0.02, vrng);
  for (std::size_t i = 0; i < config.depth; ++i) v.blocks.push_back(make_block(E, hidden, vrng));
  v.ln_gain = const_param({E}, 1.0);
  v.ln_bias = const_param({E}, 0.0);
  v.projection = normal_param({E, config.output_dim}, s_out, vrng);

  Rng trng(derive_seed(seed, {2}));
  TextTower& t = enc.text_;
  t.token_embedding = normal_param({config.text_vocab_size, E}, 0.02, trng);
  t.positions = normal_param({config.max_text_len, E}, 0.01, trng);
  for (std::size_t i = 0; i < config.depth; ++i) t.blocks.push_back(make_block(E, hidden, trng));
  t.ln_gain = const_param({E}, 1.0);
  t.ln_bias = const_param({E}, 0.0);
  t.projection = normal_param({E, config.output_dim}, s_out, trng);

  enc.logit_scale_ = Tensor::scalar(std::log(14.0), true);
  return enc;
}

double DualEncoder::tau() const { return std::exp(-logit_scale_.item()); }

std::vector<NamedTensor> DualEncoder::parameters() const {
  std::vector<NamedTensor> out;
  out.push_back({"vision.patch_weight", vision_.patch_weight});
  out.push_back({"vision.patch_bias", vision_.patch_bias});
  out.push_back({"vision.class_token", vision_.class_token});
  out.push_back({"vision.positions", vision_.positions});
  for (std::size_t i = 0; i < vision_.blocks.size(); ++i) {
    append_block(out, "vision.blocks." + std::to_string(i), vision_.blocks[i]);
  }
  out.push_back({"vision.ln_gain", vision_.ln_gain});
  out.push_back({"vision.ln_bias", vision_.ln_bias});
  out.push_back({"vision.projection", vision_.projection});
  out.push_back({"text.token_embedding", text_.token_embedding});
  out.push_back({"text.positions", text_.positions});
  for (std::size_t i = 0; i < text_.blocks.size(); ++i) {
    append_block(out, "text.blocks." + std::to_string(i), text_.blocks[i]);
  }
  out.push_back({"text.ln_gain", text_.ln_gain});
  out.push_back({"text.ln_bias", text_.ln_bias});
  out.push_back({"text.projection", text_.projection});
  out.push_back({"logit_scale", logit_scale_});
  return out;
}

void DualEncoder::freeze() {
  for (NamedTensor& p : parameters()) p.tensor.set_requires_grad(false);
  frozen_ = true;
}

std::uint64_t DualEncoder::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const NamedTensor& p : parameters()) h = promim::checksum(p.tensor.data(), h);
  return h;
}

// ---- vision ----------------------------------------------------------------------------

VisionBatchEncoding vision_encode_batch(const DualEncoder& encoder,
                                        std::span<const PatchGrid> grids,
                                        std::span<const std::vector<std::size_t>> visible) {
  const EncoderConfig& cfg = encoder.config();
  const VisionTower& tower = encoder.vision();
  if (grids.empty() || grids.size() != visible.size()) {
    fail(ErrorKind::kInput, "vision_encode: need one visible set per grid");
  }
  const std::size_t n_visible = visible.front().size();
  if (n_visible == 0) fail(ErrorKind::kDegenerateInput, "vision_encode: empty visible set");
  const std::size_t batch = grids.size();
  const std::size_t P = cfg.patch_dim();

  std::vector<double> patch_rows;
  patch_rows.reserve(batch * n_visible * P);
  std::vector<std::size_t> token_index, pos_index;
  token_index.reserve(batch * (n_visible + 1));
  pos_index.reserve(batch * (n_visible + 1));
  for (std::size_t b = 0; b < batch; ++b) {
    const PatchGrid& g = grids[b];
    if (g.size() != cfg.n_patches() || g.patch_dim != P) {
      fail(ErrorKind::kDimension, "vision_encode: grid of " + std::to_string(g.size()) +
                                      " patches x " + std::to_string(g.patch_dim) +
                                      " values does not match the encoder");
    }
    if (visible[b].size() != n_visible) {
      fail(ErrorKind::kInput, "vision_encode_batch: visible sets differ in size");
    }
    token_index.push_back(0);
    pos_index.push_back(0);
    std::size_t prev = 0;
    for (std::size_t j = 0; j < n_visible; ++j) {
      const std::size_t idx = visible[b][j];
      if (idx >= g.size()) fail(ErrorKind::kInput, "vision_encode: visible index out of range");
      if (j > 0 && idx <= prev) {
        fail(ErrorKind::kInput, "vision_encode: visible indices must be strictly increasing");
      }
      prev = idx;
      const auto patch = g.patch(idx);
      patch_rows.insert(patch_rows.end(), patch.begin(), patch.end());
      token_index.push_back(1 + b * n_visible + j);
      pos_index.push_back(1 + idx);
    }
  }

  const Tensor patches = Tensor::from_data({batch * n_visible, P}, std::move(patch_rows));
  const Tensor embedded = linear(patches, tower.patch_weight, tower.patch_bias);
  const Tensor tokens = concat_rows(std::vector<Tensor>{tower.class_token, embedded});
  const std::size_t seq = n_visible + 1;
  Tensor h = add(gather_rows(tokens, token_index), gather_rows(tower.positions, pos_index));
  for (const TransformerBlock& blk : tower.blocks) h = run_block(blk, h, batch, seq, cfg.heads);
  std::vector<std::size_t> summary(batch);
  for (std::size_t b = 0; b < batch; ++b) summary[b] = b * seq;
  const Tensor pooled = layer_norm(gather_rows(h, summary), tower.ln_gain, tower.ln_bias);
  return {matmul(pooled, tower.projection), batch * seq};
}

VisionEncoding vision_encode(const DualEncoder& encoder, const PatchGrid& grid,
                             std::span<const std::size_t> visible) {
  const std::vector<std::size_t> vis(visible.begin(), visible.end());
  VisionBatchEncoding out = vision_encode_batch(encoder, std::span<const PatchGrid>(&grid, 1),
                                                std::span<const std::vector<std::size_t>>(&vis, 1));
  return {reshape(out.embeddings, {encoder.config().output_dim}), out.tokens_processed};
}

VisionEncoding vision_encode(const DualEncoder& encoder, const PatchGrid& grid) {
  std::vector<std::size_t> all(grid.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return vision_encode(encoder, grid, all);
}

// ---- text --------------------------------------------------------------------------------

Tensor text_encode_batch(const DualEncoder& encoder,
                         std::span<const std::vector<TokenId>> sequences) {
  std::vector<std::vector<std::size_t>> rows;
  rows.reserve(sequences.size());
  for (const auto& seq : sequences) {
    if (seq.empty()) fail(ErrorKind::kInput, "text_encode: empty token sequence");
    rows.push_back(token_rows(encoder, seq, 0));
  }
  return encode_text_rows(encoder, encoder.text().token_embedding, rows);
}

Tensor text_encode(const DualEncoder& encoder, std::span<const TokenId> tokens) {
  const std::vector<TokenId> seq(tokens.begin(), tokens.end());
  return reshape(text_encode_batch(encoder, std::span<const std::vector<TokenId>>(&seq, 1)),
                 {encoder.config().output_dim});
}

Tensor text_encode_soft_batch(const DualEncoder& encoder, const Tensor& prefix,
                              std::span<const std::vector<TokenId>> class_tokens) {
  const EncoderConfig& cfg = encoder.config();
  if (prefix.rank() != 2 || prefix.dim(1) != cfg.embed_dim) {
    fail(ErrorKind::kDimension, "soft prefix must be [M, " + std::to_string(cfg.embed_dim) +
                                    "], got " + shape_string(prefix.shape()));
  }
  const std::size_t M = prefix.dim(0);
  if (M == 0) fail(ErrorKind::kDimension, "soft prefix must have at least one vector");
  std::vector<std::vector<std::size_t>> rows;
  rows.reserve(class_tokens.size());
  for (const auto& cls : class_tokens) {
    if (cls.empty()) fail(ErrorKind::kInput, "text_encode_soft: empty class token sequence");
    std::vector<std::size_t> seq(M);
    for (std::size_t m = 0; m < M; ++m) seq[m] = m;
    const auto tail = token_rows(encoder, cls, M);
    seq.insert(seq.end(), tail.begin(), tail.end());
    rows.push_back(std::move(seq));
  }
  const Tensor source = concat_rows(std::vector<Tensor>{prefix, encoder.text().token_embedding});
  return encode_text_rows(encoder, source, rows);
}

Tensor text_encode_soft(const DualEncoder& encoder, const Tensor& prefix,
                        std::span<const TokenId> class_tokens) {
  const std::vector<TokenId> cls(class_tokens.begin(), class_tokens.end());
  return reshape(
      text_encode_soft_batch(encoder, prefix, std::span<const std::vector<TokenId>>(&cls, 1)),
      {encoder.config().output_dim});
}

// ---- contrastive objective -------------------------------------------------------------------

Tensor contrastive_pretrain_loss(const Tensor& image_embs, const Tensor& text_embs,
                                 const Tensor& inverse_tau) {
  if (image_embs.rank() != 2 || image_embs.shape() != text_embs.shape()) {
    fail(ErrorKind::kDimension, "contrastive loss: embeddings must be equal-shape matrices");
  }
  const std::size_t n = image_embs.dim(0), d = image_embs.dim(1);
  if (n < 2) fail(ErrorKind::kDegenerateInput, "contrastive loss needs a batch of at least 2 pairs");
  for (const Tensor* t : {&image_embs, &text_embs}) {
    for (std::size_t i = 0; i < n; ++i) {
      double ss = 0.0;
      for (std::size_t j = 0; j < d; ++j) ss += (*t)[i * d + j] * (*t)[i * d + j];
      if (std::abs(std::sqrt(ss) - 1.0) > 1e-6) {
        fail(ErrorKind::kInput, "contrastive loss expects L2-normalized embeddings");
      }
    }
  }
  const Tensor logits = scale_by(matmul(image_embs, transpose(text_embs)), inverse_tau);
  std::vector<std::size_t> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = i * n + i;
  const Tensor image_to_text = mean(select(log_softmax(logits, 1), diag));
  const Tensor text_to_image = mean(select(log_softmax(logits, 0), diag));
  return scale(add(image_to_text, text_to_image), -0.5);
}

Tensor contrastive_pretrain_loss(const Tensor& image_embs, const Tensor& text_embs, double tau) {
  if (!(tau > 0.0)) fail(ErrorKind::kInput, "temperature must be positive");
  return contrastive_pretrain_loss(image_embs, text_embs, Tensor::scalar(1.0 / tau));
}

}  // namespace promim
