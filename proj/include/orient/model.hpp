#pragma once

#include <string>
#include <variant>
#include <vector>

#include "orient/encoder.hpp"
#include "orient/head.hpp"
#include "orient/tiling.hpp"

namespace orient {

enum class HeadMode { multi_layer, single_layer };

// Encoder plus one of the two classification heads.
template <class S>
struct ModelParams {
  EncoderParams<S> encoder;
  std::variant<HeadParams<S>, SingleLayerHeadParams<S>> head;

  ModelParams() = default;
  ModelParams(const EncoderConfig& cfg, HeadMode mode) : encoder(cfg) {
    if (mode == HeadMode::multi_layer) {
      head = HeadParams<S>(cfg.dim);
    } else {
      head = SingleLayerHeadParams<S>(cfg.dim);
    }
  }

  HeadMode head_mode() const noexcept {
    return std::holds_alternative<HeadParams<S>>(head) ? HeadMode::multi_layer : HeadMode::single_layer;
  }

  ParamSet<S>& head_tensors() {
    return std::visit([](auto& h) -> ParamSet<S>& { return h.tensors; }, head);
  }
  const ParamSet<S>& head_tensors() const {
    return std::visit([](const auto& h) -> const ParamSet<S>& { return h.tensors; }, head);
  }

  void init(Rng& rng) {
    encoder.init(rng);
    std::visit([&](auto& h) { h.init(rng); }, head);
  }

  // Encoder tensors first, then head tensors.
  template <class F>
  void for_each_set(F&& f) {
    f(encoder.tensors);
    f(head_tensors());
  }
  template <class F>
  void for_each_set(F&& f) const {
    f(encoder.tensors);
    f(head_tensors());
  }

  ModelParams zeros_like() const {
    ModelParams out = *this;
    out.for_each_set([](ParamSet<S>& p) { p.set_zero(); });
    return out;
  }

  template <class T>
  ModelParams<T> cast() const {
    ModelParams<T> out(encoder.cfg, head_mode());
    out.encoder.tensors = encoder.tensors.template cast<T>();
    out.head_tensors() = head_tensors().template cast<T>();
    return out;
  }

  std::size_t parameter_count() const { return encoder.tensors.size() + head_tensors().size(); }

  void add_scaled(const ModelParams& other, S scale) {
    auto a = encoder.tensors.flat();
    auto b = other.encoder.tensors.flat();
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += scale * b[i];
    auto ha = head_tensors().flat();
    auto hb = other.head_tensors().flat();
    for (std::size_t i = 0; i < ha.size(); ++i) ha[i] += scale * hb[i];
  }
};

template <class S>
struct SampleForward {
  PooledForward<S> encoded;
  std::variant<HeadCache<S>, LinearHeadCache<S>> head;
  Logits<S> logits;
};

// Full forward for one image given its crops: encode each crop, mean-pool
// CLS embeddings, classify. Keeps caches when `fwd` is given.
template <class S>
Logits<S> model_forward(const std::vector<ImageBuffer>& crops, const ModelParams<S>& params, Mode mode, Rng* rng,
                        SampleForward<S>* fwd = nullptr) {
  PooledForward<S> encoded = encode_image_crops(crops, params.encoder, fwd != nullptr);
  Logits<S> logits;
  if (const auto* mh = std::get_if<HeadParams<S>>(&params.head)) {
    HeadCache<S> hc;
    logits = head_forward(encoded.pooled, *mh, mode, rng, fwd ? &hc : nullptr);
    if (fwd) fwd->head = std::move(hc);
  } else {
    const auto& sh = std::get<SingleLayerHeadParams<S>>(params.head);
    LinearHeadCache<S> hc;
    logits = head_forward(encoded.pooled, sh, mode, rng, fwd ? &hc : nullptr);
    if (fwd) fwd->head = std::move(hc);
  }
  if (fwd) {
    fwd->encoded = std::move(encoded);
    fwd->logits = logits;
  }
  return logits;
}

template <class S>
void model_backward(const Logits<S>& dlogits, const SampleForward<S>& fwd, const ModelParams<S>& params,
                    ModelParams<S>& grads) {
  Vec<S> dpooled;
  if (const auto* mh = std::get_if<HeadParams<S>>(&params.head)) {
    const auto* cache = std::get_if<HeadCache<S>>(&fwd.head);
    if (!cache) throw InputError("model_backward: head cache does not match head type");
    dpooled = head_backward(dlogits, *cache, *mh, std::get<HeadParams<S>>(grads.head));
  } else {
    const auto* cache = std::get_if<LinearHeadCache<S>>(&fwd.head);
    if (!cache) throw InputError("model_backward: head cache does not match head type");
    dpooled = head_backward(dlogits, *cache, std::get<SingleLayerHeadParams<S>>(params.head),
                            std::get<SingleLayerHeadParams<S>>(grads.head));
  }
  encoder_backward(dpooled, fwd.encoded, params.encoder, grads.encoder);
}

}  // namespace orient
