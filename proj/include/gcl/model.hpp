#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "gcl/rng.hpp"
#include "gcl/tensor.hpp"

namespace gcl {

// One affine layer; weight is input_dim x output_dim, applied as x * W + b.
struct DenseLayer {
  Tensor2 weight;
  Tensor1 bias;
};

// Small fully connected feature extractor. A rectifier sits between layers;
// the final layer output is the embedding and stays linear.
struct MlpBackbone {
  std::vector<DenseLayer> layers;

  int input_dim() const { return layers.empty() ? 0 : layers.front().weight.rows; }
  int embed_dim() const { return layers.empty() ? 0 : layers.back().weight.cols; }
};

// Zero-initialized backbone with the given dims, e.g. {32, 64, 64, 16}.
MlpBackbone make_mlp(const std::vector<int>& dims);

// Gaussian init scaled by 1/sqrt(fan_in).
MlpBackbone init_mlp(const std::vector<int>& dims, RngStream& rng);

// Bias-free classifier; column j is the anchor vector of class j.
struct CosineClassifier {
  Tensor2 weight;  // embed_dim x classes

  int embed_dim() const { return weight.rows; }
  int classes() const { return weight.cols; }
};

CosineClassifier init_classifier(int embed_dim, int classes, RngStream& rng);

struct Model {
  MlpBackbone backbone;
  CosineClassifier classifier;
};

Model init_model(int input_dim, const std::vector<int>& hidden_dims, int embed_dim, int classes,
                 RngStream& rng);

enum class HeadKind : std::uint8_t { none = 0, cosine = 1, dot = 2 };

// Caches from the most recent forward pass, consumed by backward(). The
// parameter hashes detect a tape that has gone stale.
struct ForwardTape {
  Tensor2 input;
  std::vector<Tensor2> pre_acts;  // per layer, before the rectifier
  std::vector<Tensor2> acts;      // per hidden junction, after the rectifier
  Tensor2 features;
  std::vector<double> feature_norms;  // filled by the cosine head
  std::vector<double> anchor_norms;
  Tensor2 logits;  // head output (cosine or dot)
  HeadKind head = HeadKind::none;
  std::uint64_t backbone_hash = 0;
  std::uint64_t head_hash = 0;
};

std::pair<Tensor2, ForwardTape> forward_features(const MlpBackbone& net, const Tensor2& x);

// Forward without a tape, for evaluation.
Tensor2 embed(const MlpBackbone& net, const Tensor2& x);

// Entry (i, j) = <f_i, w_j> / (|f_i| |w_j|), in [-1, 1]. A feature or anchor
// with norm below 1e-12 is rejected as degenerate input.
Tensor2 cosine_logits(const CosineClassifier& clf, const Tensor2& f);
Tensor2 cosine_logits(const CosineClassifier& clf, const Tensor2& f, ForwardTape& tape);

// Plain dot-product head f * W, used by the cross-entropy baseline.
Tensor2 dot_logits(const CosineClassifier& clf, const Tensor2& f);
Tensor2 dot_logits(const CosineClassifier& clf, const Tensor2& f, ForwardTape& tape);

struct ModelGrads {
  std::vector<Tensor2> weight;  // per layer
  std::vector<Tensor1> bias;
  Tensor2 clf_weight;
  Tensor2 input;  // gradient w.r.t. the batch inputs
};

// Chain rule from dL/dlogits back through the head and every layer.
// The tape must come from the forward pass that produced the logits.
ModelGrads backward(const MlpBackbone& net, const CosineClassifier& clf, const ForwardTape& tape,
                    const Tensor2& dlogits);

std::uint64_t params_hash(const MlpBackbone& net);
std::uint64_t params_hash(const CosineClassifier& clf);

// Parameter tensors in a fixed order: (weight, bias) per layer, classifier last.
std::vector<std::span<double>> param_spans(Model& m);
std::vector<std::span<const double>> grad_spans(const ModelGrads& g);
std::vector<std::size_t> param_shapes(const Model& m);

}  // namespace gcl
