#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "orient/activation.hpp"
#include "orient/error.hpp"
#include "orient/image.hpp"
#include "orient/rng.hpp"
#include "orient/tensor.hpp"

namespace orient {

struct EncoderConfig {
  int tile_px = 112;
  int patch_px = 14;
  int dim = 64;
  int layers = 2;
  int heads = 4;
  int mlp_hidden = 256;

  int grid() const noexcept { return tile_px / patch_px; }
  int tokens() const noexcept { return grid() * grid() + 1; }
  int patch_dim() const noexcept { return 3 * patch_px * patch_px; }
  int head_dim() const noexcept { return dim / heads; }

  void validate() const {
    if (tile_px < 1 || patch_px < 1 || dim < 1 || heads < 1 || layers < 0 || mlp_hidden < 1) {
      throw InputError("encoder config: sizes must be positive");
    }
    if (tile_px % patch_px != 0) throw InputError("encoder config: tile size must be a multiple of the patch size");
    if (dim % heads != 0) throw InputError("encoder config: dim must be divisible by heads");
  }

  // Shape of the 336px / 14px encoder with 1024-wide tokens. Used for shape
  // checks only; depth is left to the caller.
  static EncoderConfig full_scale(int layers = 0) {
    return {336, 14, 1024, layers, 16, 4096};
  }
  static EncoderConfig desk() { return {112, 14, 64, 2, 4, 256}; }
  static EncoderConfig tiny() { return {28, 14, 8, 1, 2, 32}; }

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

// All trainable encoder tensors. Linear weights are stored out x in, so a
// projection of row-major activations is X * W^T + b.
template <class S>
struct EncoderParams {
  using Id = typename ParamSet<S>::Id;

  struct Layer {
    Id ln1_w, ln1_b;
    Id q_w, q_b, k_w, v_w, v_b, o_w, o_b;  // no key bias: softmax rows ignore it
    Id ln2_w, ln2_b;
    Id fc1_w, fc1_b, fc2_w, fc2_b;
  };

  EncoderConfig cfg;
  ParamSet<S> tensors;
  Id patch_w{}, patch_b{}, cls{}, pos{};
  std::vector<Layer> layer;
  Id lnf_w{}, lnf_b{};

  EncoderParams() = default;

  explicit EncoderParams(const EncoderConfig& c) : cfg(c) {
    cfg.validate();
    const int d = cfg.dim;
    const int m = cfg.mlp_hidden;
    patch_w = tensors.add("patch_proj.weight", d, cfg.patch_dim());
    patch_b = tensors.add("patch_proj.bias", d);
    cls = tensors.add("cls_token", d);
    pos = tensors.add("pos_embed", cfg.tokens(), d);
    for (int l = 0; l < cfg.layers; ++l) {
      const std::string p = "layers." + std::to_string(l) + ".";
      Layer t{};
      t.ln1_w = tensors.add(p + "ln1.weight", d);
      t.ln1_b = tensors.add(p + "ln1.bias", d);
      t.q_w = tensors.add(p + "attn.q.weight", d, d);
      t.q_b = tensors.add(p + "attn.q.bias", d);
      t.k_w = tensors.add(p + "attn.k.weight", d, d);
      t.v_w = tensors.add(p + "attn.v.weight", d, d);
      t.v_b = tensors.add(p + "attn.v.bias", d);
      t.o_w = tensors.add(p + "attn.o.weight", d, d);
      t.o_b = tensors.add(p + "attn.o.bias", d);
      t.ln2_w = tensors.add(p + "ln2.weight", d);
      t.ln2_b = tensors.add(p + "ln2.bias", d);
      t.fc1_w = tensors.add(p + "mlp.fc1.weight", m, d);
      t.fc1_b = tensors.add(p + "mlp.fc1.bias", m);
      t.fc2_w = tensors.add(p + "mlp.fc2.weight", d, m);
      t.fc2_b = tensors.add(p + "mlp.fc2.bias", d);
      layer.push_back(t);
    }
    lnf_w = tensors.add("final_ln.weight", d);
    lnf_b = tensors.add("final_ln.bias", d);
    set_layer_norms_to_identity();
  }

  void set_layer_norms_to_identity() {
    for (const auto& t : layer) {
      tensors.fill(t.ln1_w, S(1));
      tensors.fill(t.ln2_w, S(1));
    }
    tensors.fill(lnf_w, S(1));
  }

  // Truncation-free normal init with the given scale for matrices and
  // embeddings; biases zero, layer norms identity.
  void init(Rng& rng, double stddev = 0.02) {
    tensors.set_zero();
    const int d = cfg.dim;
    tensors.fill_normal(patch_w, rng, 1.0 / std::sqrt(static_cast<double>(cfg.patch_dim())));
    tensors.fill_normal(cls, rng, stddev);
    tensors.fill_normal(pos, rng, stddev);
    const double proj = 1.0 / std::sqrt(static_cast<double>(d));
    const double out_scale = proj / std::sqrt(2.0 * std::max(cfg.layers, 1));
    for (const auto& t : layer) {
      tensors.fill_normal(t.q_w, rng, proj);
      tensors.fill_normal(t.k_w, rng, proj);
      tensors.fill_normal(t.v_w, rng, proj);
      tensors.fill_normal(t.o_w, rng, out_scale);
      tensors.fill_normal(t.fc1_w, rng, proj);
      tensors.fill_normal(t.fc2_w, rng, 1.0 / std::sqrt(static_cast<double>(cfg.mlp_hidden)) / std::sqrt(2.0 * std::max(cfg.layers, 1)));
    }
    set_layer_norms_to_identity();
  }
};

template <class S>
struct EncoderLayerCache {
  Mat<S> ln1_hat, ln1_out;
  Vec<S> ln1_rstd;
  Mat<S> q, k, v, ctx;
  std::vector<Mat<S>> attn;  // one L x L probability matrix per head
  Mat<S> ln2_hat, ln2_out;
  Vec<S> ln2_rstd;
  Mat<S> fc1_pre, fc1_act;
};

template <class S>
struct EncoderCache {
  Mat<S> patches;  // (L-1) x patch_dim, pixel values in [0, 1]
  std::vector<EncoderLayerCache<S>> layers;
  Mat<S> final_hat;
  Vec<S> final_rstd;
  Mat<S> output;
  bool valid = false;
};

namespace detail {

inline constexpr double kLayerNormEps = 1e-5;

template <class S>
void layer_norm(const Mat<S>& x, const ConstVecMap<S>& w, const ConstVecMap<S>& b, Mat<S>& hat, Vec<S>& rstd,
                Mat<S>& out) {
  const auto rows = x.rows();
  const auto d = static_cast<S>(x.cols());
  hat.resize(x.rows(), x.cols());
  rstd.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const S mean = x.row(i).sum() / d;
    const S var = (x.row(i).array() - mean).square().sum() / d;
    const S r = S(1) / std::sqrt(var + static_cast<S>(kLayerNormEps));
    rstd(i) = r;
    hat.row(i) = (x.row(i).array() - mean) * r;
  }
  out = (hat.array().rowwise() * w.transpose().array()).rowwise() + b.transpose().array();
}

// Adds d loss / d input to dx and accumulates the affine gradients.
template <class S>
void layer_norm_backward(const Mat<S>& dout, const Mat<S>& hat, const Vec<S>& rstd, const ConstVecMap<S>& w,
                         VecMap<S> dw, VecMap<S> db, Mat<S>& dx) {
  dw += (dout.array() * hat.array()).colwise().sum().transpose().matrix();
  db += dout.colwise().sum().transpose();
  const Mat<S> dhat = dout.array().rowwise() * w.transpose().array();
  const auto d = static_cast<S>(hat.cols());
  for (Eigen::Index i = 0; i < hat.rows(); ++i) {
    const S mean_dhat = dhat.row(i).sum() / d;
    const S mean_dhat_hat = dhat.row(i).dot(hat.row(i)) / d;
    dx.row(i).array() += rstd(i) * (dhat.row(i).array() - mean_dhat - hat.row(i).array() * mean_dhat_hat);
  }
}

template <class S>
void add_row_bias(Mat<S>& m, const ConstVecMap<S>& b) {
  m.rowwise() += b.transpose();
}

template <class S>
void softmax_rows(Mat<S>& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const S mx = m.row(i).maxCoeff();
    m.row(i) = (m.row(i).array() - mx).exp();
    m.row(i) /= m.row(i).sum();
  }
}

}  // namespace detail

// Flattens each patch of a T x T crop (row-major patches, pixel rows then
// columns then channels inside a patch), scaled to [0, 1].
template <class S>
Mat<S> extract_patches(const ImageBuffer& crop, const EncoderConfig& cfg) {
  if (crop.width() != cfg.tile_px || crop.height() != cfg.tile_px) {
    throw InputError("patch_embed: crop must be " + std::to_string(cfg.tile_px) + "x" + std::to_string(cfg.tile_px));
  }
  const int g = cfg.grid();
  const int p = cfg.patch_px;
  Mat<S> out(g * g, cfg.patch_dim());
  const auto px = crop.data();
  for (int pr = 0; pr < g; ++pr) {
    for (int pc = 0; pc < g; ++pc) {
      S* row = out.row(pr * g + pc).data();
      int j = 0;
      for (int i = 0; i < p; ++i) {
        const std::size_t base = crop.index(pr * p + i, pc * p);
        for (int k = 0; k < p * 3; ++k) row[j++] = static_cast<S>(px[base + static_cast<std::size_t>(k)]) / S(255);
      }
    }
  }
  return out;
}

// Token sequence for one crop: CLS at index 0, projected patches after it,
// positional embeddings added to every position.
template <class S>
Mat<S> patch_embed(const Mat<S>& patches, const EncoderParams<S>& params) {
  const auto& t = params.tensors;
  const int d = params.cfg.dim;
  Mat<S> tokens(params.cfg.tokens(), d);
  tokens.row(0) = t.vec(params.cls).transpose();
  tokens.bottomRows(tokens.rows() - 1).noalias() = patches * t.mat(params.patch_w).transpose();
  tokens.bottomRows(tokens.rows() - 1).rowwise() += t.vec(params.patch_b).transpose();
  tokens += t.mat(params.pos);
  return tokens;
}

template <class S>
Mat<S> patch_embed(const ImageBuffer& crop, const EncoderParams<S>& params) {
  return patch_embed(extract_patches<S>(crop, params.cfg), params);
}

// Pre-norm transformer: x += MHSA(LN(x)); x += MLP(LN(x)); then a final
// layer norm. Fills `cache` when given.
template <class S>
Mat<S> encoder_forward(const Mat<S>& tokens, const EncoderParams<S>& params, EncoderCache<S>* cache = nullptr) {
  const auto& cfg = params.cfg;
  const auto& t = params.tensors;
  if (tokens.cols() != cfg.dim || tokens.rows() < 1) throw InputError("encoder_forward: token matrix has wrong shape");
  const Eigen::Index len = tokens.rows();
  const int dh = cfg.head_dim();
  const S scale = S(1) / std::sqrt(static_cast<S>(dh));

  Mat<S> x = tokens;
  EncoderLayerCache<S> scratch;
  if (cache) cache->layers.assign(params.layer.size(), {});
  for (std::size_t l = 0; l < params.layer.size(); ++l) {
    const auto& ids = params.layer[l];
    EncoderLayerCache<S>& c = cache ? cache->layers[l] : scratch;

    detail::layer_norm<S>(x, t.vec(ids.ln1_w), t.vec(ids.ln1_b), c.ln1_hat, c.ln1_rstd, c.ln1_out);
    c.q.noalias() = c.ln1_out * t.mat(ids.q_w).transpose();
    detail::add_row_bias<S>(c.q, t.vec(ids.q_b));
    c.k.noalias() = c.ln1_out * t.mat(ids.k_w).transpose();
    c.v.noalias() = c.ln1_out * t.mat(ids.v_w).transpose();
    detail::add_row_bias<S>(c.v, t.vec(ids.v_b));

    c.ctx.resize(len, cfg.dim);
    c.attn.resize(static_cast<std::size_t>(cfg.heads));
    for (int h = 0; h < cfg.heads; ++h) {
      Mat<S>& a = c.attn[static_cast<std::size_t>(h)];
      a.noalias() = c.q.middleCols(h * dh, dh) * c.k.middleCols(h * dh, dh).transpose();
      a *= scale;
      detail::softmax_rows(a);
      c.ctx.middleCols(h * dh, dh).noalias() = a * c.v.middleCols(h * dh, dh);
    }
    x.noalias() += c.ctx * t.mat(ids.o_w).transpose();
    x.rowwise() += t.vec(ids.o_b).transpose();

    detail::layer_norm<S>(x, t.vec(ids.ln2_w), t.vec(ids.ln2_b), c.ln2_hat, c.ln2_rstd, c.ln2_out);
    c.fc1_pre.noalias() = c.ln2_out * t.mat(ids.fc1_w).transpose();
    detail::add_row_bias<S>(c.fc1_pre, t.vec(ids.fc1_b));
    c.fc1_act = c.fc1_pre.unaryExpr([](S v) { return gelu(v); });
    x.noalias() += c.fc1_act * t.mat(ids.fc2_w).transpose();
    x.rowwise() += t.vec(ids.fc2_b).transpose();
  }

  Mat<S> out;
  Mat<S> hat;
  Vec<S> rstd;
  detail::layer_norm<S>(x, t.vec(params.lnf_w), t.vec(params.lnf_b), hat, rstd, out);
  if (!out.allFinite()) throw NumericError("numeric overflow in encoder");
  if (cache) {
    cache->final_hat = std::move(hat);
    cache->final_rstd = std::move(rstd);
    cache->output = out;
    cache->valid = true;
  }
  return out;
}

// Runs patch embedding and the encoder for one crop, caching everything the
// backward pass needs.
template <class S>
Mat<S> encode_crop(const ImageBuffer& crop, const EncoderParams<S>& params, EncoderCache<S>* cache = nullptr) {
  Mat<S> patches = extract_patches<S>(crop, params.cfg);
  Mat<S> out = encoder_forward(patch_embed(patches, params), params, cache);
  if (cache) cache->patches = std::move(patches);
  return out;
}

// Mean of the CLS rows (index 0) across all crops, the global view included.
template <class S>
Vec<S> cls_pool(const std::vector<Mat<S>>& crop_outputs) {
  if (crop_outputs.empty()) throw InputError("cls_pool: no crops");
  const auto d = crop_outputs.front().cols();
  Vec<S> sum = Vec<S>::Zero(d);
  for (const auto& o : crop_outputs) {
    if (o.cols() != d || o.rows() < 1) throw InputError("cls_pool: inconsistent embedding width");
    sum += o.row(0).transpose();
  }
  return sum / static_cast<S>(crop_outputs.size());
}

// Forward state for an image: one cache per crop plus the pooled embedding.
template <class S>
struct PooledForward {
  std::vector<EncoderCache<S>> crops;
  Vec<S> pooled;
};

template <class S>
PooledForward<S> encode_image_crops(const std::vector<ImageBuffer>& crops, const EncoderParams<S>& params,
                                    bool keep_cache = true) {
  PooledForward<S> fwd;
  std::vector<Mat<S>> outs;
  outs.reserve(crops.size());
  if (keep_cache) fwd.crops.resize(crops.size());
  for (std::size_t i = 0; i < crops.size(); ++i) {
    outs.push_back(encode_crop(crops[i], params, keep_cache ? &fwd.crops[i] : nullptr));
  }
  fwd.pooled = cls_pool(outs);
  return fwd;
}

// Backward through one crop given d loss / d output (L x D). Accumulates
// into `grads`, which must share the layout of `params`.
template <class S>
void encoder_backward_crop(const Mat<S>& dout, const EncoderCache<S>& cache, const EncoderParams<S>& params,
                           EncoderParams<S>& grads) {
  if (!cache.valid) throw InputError("encoder_backward: missing forward cache");
  const auto& cfg = params.cfg;
  const auto& t = params.tensors;
  auto& g = grads.tensors;
  const int dh = cfg.head_dim();
  const S scale = S(1) / std::sqrt(static_cast<S>(dh));
  const Eigen::Index len = dout.rows();

  Mat<S> dx = Mat<S>::Zero(len, cfg.dim);
  detail::layer_norm_backward<S>(dout, cache.final_hat, cache.final_rstd, t.vec(params.lnf_w), g.vec(params.lnf_w),
                                 g.vec(params.lnf_b), dx);

  for (std::size_t li = params.layer.size(); li-- > 0;) {
    const auto& ids = params.layer[li];
    const auto& c = cache.layers[li];

    // MLP branch
    g.mat(ids.fc2_w).noalias() += dx.transpose() * c.fc1_act;
    g.vec(ids.fc2_b) += dx.colwise().sum().transpose();
    Mat<S> dpre = dx * t.mat(ids.fc2_w);
    dpre.array() *= c.fc1_pre.unaryExpr([](S v) { return gelu_derivative(v); }).array();
    g.mat(ids.fc1_w).noalias() += dpre.transpose() * c.ln2_out;
    g.vec(ids.fc1_b) += dpre.colwise().sum().transpose();
    const Mat<S> dln2 = dpre * t.mat(ids.fc1_w);
    detail::layer_norm_backward<S>(dln2, c.ln2_hat, c.ln2_rstd, t.vec(ids.ln2_w), g.vec(ids.ln2_w),
                                   g.vec(ids.ln2_b), dx);

    // Attention branch
    g.mat(ids.o_w).noalias() += dx.transpose() * c.ctx;
    g.vec(ids.o_b) += dx.colwise().sum().transpose();
    const Mat<S> dctx = dx * t.mat(ids.o_w);
    Mat<S> dq(len, cfg.dim), dk(len, cfg.dim), dv(len, cfg.dim);
    for (int h = 0; h < cfg.heads; ++h) {
      const Mat<S>& a = c.attn[static_cast<std::size_t>(h)];
      const auto dctx_h = dctx.middleCols(h * dh, dh);
      dv.middleCols(h * dh, dh).noalias() = a.transpose() * dctx_h;
      Mat<S> da = dctx_h * c.v.middleCols(h * dh, dh).transpose();
      const Vec<S> row_dot = (da.array() * a.array()).rowwise().sum();
      Mat<S> ds = (a.array() * (da.array().colwise() - row_dot.array())) * scale;
      dq.middleCols(h * dh, dh).noalias() = ds * c.k.middleCols(h * dh, dh);
      dk.middleCols(h * dh, dh).noalias() = ds.transpose() * c.q.middleCols(h * dh, dh);
    }
    g.mat(ids.q_w).noalias() += dq.transpose() * c.ln1_out;
    g.vec(ids.q_b) += dq.colwise().sum().transpose();
    g.mat(ids.k_w).noalias() += dk.transpose() * c.ln1_out;
    g.mat(ids.v_w).noalias() += dv.transpose() * c.ln1_out;
    g.vec(ids.v_b) += dv.colwise().sum().transpose();
    Mat<S> dln1 = dq * t.mat(ids.q_w);
    dln1.noalias() += dk * t.mat(ids.k_w);
    dln1.noalias() += dv * t.mat(ids.v_w);
    detail::layer_norm_backward<S>(dln1, c.ln1_hat, c.ln1_rstd, t.vec(ids.ln1_w), g.vec(ids.ln1_w),
                                   g.vec(ids.ln1_b), dx);
  }

  // Embedding
  g.mat(params.pos) += dx;
  g.vec(params.cls) += dx.row(0).transpose();
  const auto dpatch = dx.bottomRows(len - 1);
  g.mat(params.patch_w).noalias() += dpatch.transpose() * cache.patches;
  g.vec(params.patch_b) += dpatch.colwise().sum().transpose();
}

// Backward from d loss / d pooled CLS embedding through every crop. Each
// crop's CLS row receives 1/num_crops of the upstream gradient.
template <class S>
void encoder_backward(const Vec<S>& dpooled, const PooledForward<S>& fwd, const EncoderParams<S>& params,
                      EncoderParams<S>& grads) {
  if (fwd.crops.empty()) throw InputError("encoder_backward: missing forward cache");
  const S share = S(1) / static_cast<S>(fwd.crops.size());
  for (const auto& c : fwd.crops) {
    if (!c.valid) throw InputError("encoder_backward: missing forward cache");
    Mat<S> dout = Mat<S>::Zero(c.output.rows(), c.output.cols());
    dout.row(0) = dpooled.transpose() * share;
    encoder_backward_crop(dout, c, params, grads);
  }
}

}  // namespace orient
