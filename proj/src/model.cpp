#include "gcl/model.hpp"

#include <cmath>
#include <cstring>
#include <string>

namespace gcl {

namespace {

constexpr double kNormFloor = 1e-12;

std::uint64_t hash_doubles(std::uint64_t h, std::span<const double> v) {
  for (double x : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof(bits));
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xFFu;
      h *= 0x100000001B3ull;
    }
  }
  return h;
}

double row_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void check_dims_chain(const std::vector<int>& dims) {
  if (dims.size() < 2) throw ShapeError("mlp needs at least input and output dims");
  for (int d : dims) {
    if (d < 1) throw ShapeError("mlp dims must be >= 1");
  }
}

}  // namespace

MlpBackbone make_mlp(const std::vector<int>& dims) {
  check_dims_chain(dims);
  MlpBackbone net;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    net.layers.push_back({Tensor2(dims[l], dims[l + 1], 0.0), Tensor1(dims[l + 1], 0.0)});
  }
  return net;
}

MlpBackbone init_mlp(const std::vector<int>& dims, RngStream& rng) {
  MlpBackbone net = make_mlp(dims);
  for (auto& layer : net.layers) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(layer.weight.rows));
    for (double& w : layer.weight.data) w = rng.next_gaussian(0.0, scale);
    for (double& b : layer.bias.data) b = 0.0;
  }
  return net;
}

CosineClassifier init_classifier(int embed_dim, int classes, RngStream& rng) {
  if (classes < 2) throw ShapeError("classifier needs at least 2 classes");
  if (embed_dim < 1) throw ShapeError("classifier embed_dim must be >= 1");
  CosineClassifier clf{Tensor2(embed_dim, classes)};
  const double scale = 1.0 / std::sqrt(static_cast<double>(embed_dim));
  for (double& w : clf.weight.data) w = rng.next_gaussian(0.0, scale);
  return clf;
}

Model init_model(int input_dim, const std::vector<int>& hidden_dims, int embed_dim, int classes,
                 RngStream& rng) {
  std::vector<int> dims;
  dims.push_back(input_dim);
  dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
  dims.push_back(embed_dim);
  Model m;
  m.backbone = init_mlp(dims, rng);
  m.classifier = init_classifier(embed_dim, classes, rng);
  return m;
}

std::pair<Tensor2, ForwardTape> forward_features(const MlpBackbone& net, const Tensor2& x) {
  if (net.layers.empty()) throw ContractError("forward_features: backbone has no layers");
  if (x.cols != net.input_dim()) {
    throw ShapeError("forward_features: input has " + std::to_string(x.cols) +
                     " columns, backbone expects " + std::to_string(net.input_dim()));
  }
  ForwardTape tape;
  tape.input = x;
  Tensor2 h = x;
  const int num_layers = static_cast<int>(net.layers.size());
  for (int l = 0; l < num_layers; ++l) {
    Tensor2 a = matmul(h, net.layers[l].weight);
    for (int i = 0; i < a.rows; ++i) {
      auto r = a.row(i);
      for (int j = 0; j < a.cols; ++j) r[j] += net.layers[l].bias[j];
    }
    tape.pre_acts.push_back(a);
    if (l + 1 < num_layers) {
      Tensor2 act = a;
      for (double& v : act.data) v = v > 0.0 ? v : 0.0;
      tape.acts.push_back(act);
      h = std::move(act);
    } else {
      h = std::move(a);
    }
  }
  tape.features = h;
  tape.backbone_hash = params_hash(net);
  return {std::move(h), std::move(tape)};
}

Tensor2 embed(const MlpBackbone& net, const Tensor2& x) {
  return forward_features(net, x).first;
}

namespace {

Tensor2 cosine_logits_impl(const CosineClassifier& clf, const Tensor2& f, ForwardTape* tape) {
  const int dim = clf.embed_dim();
  const int classes = clf.classes();
  if (classes < 2) throw ContractError("cosine_logits: classifier needs at least 2 classes");
  if (f.cols != dim) {
    throw ShapeError("cosine_logits: feature dim " + std::to_string(f.cols) +
                     " does not match classifier dim " + std::to_string(dim));
  }
  std::vector<double> anchor_norms(classes);
  for (int j = 0; j < classes; ++j) {
    double s = 0.0;
    for (int d = 0; d < dim; ++d) s += clf.weight.at(d, j) * clf.weight.at(d, j);
    anchor_norms[j] = std::sqrt(s);
    if (anchor_norms[j] < kNormFloor) {
      throw DomainError("cosine_logits: class anchor " + std::to_string(j) + " has zero norm");
    }
  }
  std::vector<double> feature_norms(f.rows);
  for (int i = 0; i < f.rows; ++i) {
    feature_norms[i] = row_norm(f.row(i));
    if (feature_norms[i] < kNormFloor) {
      throw DomainError("cosine_logits: feature row " + std::to_string(i) + " has zero norm");
    }
  }
  Tensor2 z(f.rows, classes);
  for (int i = 0; i < f.rows; ++i) {
    auto fr = f.row(i);
    for (int j = 0; j < classes; ++j) {
      double dot = 0.0;
      for (int d = 0; d < dim; ++d) dot += fr[d] * clf.weight.at(d, j);
      z.at(i, j) = dot / (feature_norms[i] * anchor_norms[j]);
    }
  }
  if (tape) {
    tape->feature_norms = std::move(feature_norms);
    tape->anchor_norms = std::move(anchor_norms);
    tape->logits = z;
    tape->head = HeadKind::cosine;
    tape->head_hash = params_hash(clf);
  }
  return z;
}

}  // namespace

Tensor2 cosine_logits(const CosineClassifier& clf, const Tensor2& f) {
  return cosine_logits_impl(clf, f, nullptr);
}

Tensor2 cosine_logits(const CosineClassifier& clf, const Tensor2& f, ForwardTape& tape) {
  return cosine_logits_impl(clf, f, &tape);
}

Tensor2 dot_logits(const CosineClassifier& clf, const Tensor2& f) {
  return matmul(f, clf.weight);
}

Tensor2 dot_logits(const CosineClassifier& clf, const Tensor2& f, ForwardTape& tape) {
  Tensor2 z = matmul(f, clf.weight);
  tape.logits = z;
  tape.head = HeadKind::dot;
  tape.head_hash = params_hash(clf);
  return z;
}

ModelGrads backward(const MlpBackbone& net, const CosineClassifier& clf, const ForwardTape& tape,
                    const Tensor2& dlogits) {
  if (tape.head == HeadKind::none) {
    throw ContractError("backward: tape has no head record; run a logits op with the tape");
  }
  if (params_hash(net) != tape.backbone_hash || params_hash(clf) != tape.head_hash) {
    throw ContractError("backward: stale tape, parameters changed since the forward pass");
  }
  const Tensor2& f = tape.features;
  const int batch = f.rows;
  const int dim = clf.embed_dim();
  const int classes = clf.classes();
  if (dlogits.rows != batch || dlogits.cols != classes) {
    throw ShapeError("backward: dlogits is " + std::to_string(dlogits.rows) + "x" +
                     std::to_string(dlogits.cols) + ", expected " + std::to_string(batch) + "x" +
                     std::to_string(classes));
  }

  ModelGrads grads;
  grads.clf_weight = Tensor2(dim, classes, 0.0);
  Tensor2 dfeat(batch, dim, 0.0);

  if (tape.head == HeadKind::cosine) {
    const Tensor2& z = tape.logits;
    // d z_ij / d f_i = (w_j / |w_j| - z_ij f_i / |f_i|) / |f_i|
    // d z_ij / d w_j = (f_i / |f_i| - z_ij w_j / |w_j|) / |w_j|
    for (int i = 0; i < batch; ++i) {
      const double inv_nf = 1.0 / tape.feature_norms[i];
      double mix = 0.0;
      for (int j = 0; j < classes; ++j) mix += dlogits.at(i, j) * z.at(i, j);
      for (int d = 0; d < dim; ++d) {
        double acc = 0.0;
        for (int j = 0; j < classes; ++j) {
          acc += dlogits.at(i, j) * clf.weight.at(d, j) / tape.anchor_norms[j];
        }
        dfeat.at(i, d) = (acc - mix * f.at(i, d) * inv_nf) * inv_nf;
      }
    }
    for (int j = 0; j < classes; ++j) {
      const double inv_nw = 1.0 / tape.anchor_norms[j];
      double mix = 0.0;
      for (int i = 0; i < batch; ++i) mix += dlogits.at(i, j) * z.at(i, j);
      for (int d = 0; d < dim; ++d) {
        double acc = 0.0;
        for (int i = 0; i < batch; ++i) {
          acc += dlogits.at(i, j) * f.at(i, d) / tape.feature_norms[i];
        }
        grads.clf_weight.at(d, j) = (acc - mix * clf.weight.at(d, j) * inv_nw) * inv_nw;
      }
    }
  } else {
    dfeat = matmul(dlogits, transpose(clf.weight));
    grads.clf_weight = matmul(transpose(f), dlogits);
  }

  const int num_layers = static_cast<int>(net.layers.size());
  grads.weight.resize(num_layers);
  grads.bias.resize(num_layers);
  Tensor2 da = std::move(dfeat);  // gradient w.r.t. the last pre-activation
  for (int l = num_layers - 1; l >= 0; --l) {
    const Tensor2& layer_in = (l == 0) ? tape.input : tape.acts[l - 1];
    grads.weight[l] = matmul(transpose(layer_in), da);
    Tensor1 db(da.cols, 0.0);
    for (int i = 0; i < da.rows; ++i) {
      for (int j = 0; j < da.cols; ++j) db[j] += da.at(i, j);
    }
    grads.bias[l] = std::move(db);
    Tensor2 dprev = matmul(da, transpose(net.layers[l].weight));
    if (l > 0) {
      const Tensor2& pre = tape.pre_acts[l - 1];
      for (std::size_t k = 0; k < dprev.data.size(); ++k) {
        if (!(pre.data[k] > 0.0)) dprev.data[k] = 0.0;
      }
      da = std::move(dprev);
    } else {
      grads.input = std::move(dprev);
    }
  }
  return grads;
}

std::uint64_t params_hash(const MlpBackbone& net) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (const auto& layer : net.layers) {
    h = hash_doubles(h, layer.weight.data);
    h = hash_doubles(h, layer.bias.data);
  }
  return h;
}

std::uint64_t params_hash(const CosineClassifier& clf) {
  return hash_doubles(0xCBF29CE484222325ull, clf.weight.data);
}

std::vector<std::span<double>> param_spans(Model& m) {
  std::vector<std::span<double>> spans;
  for (auto& layer : m.backbone.layers) {
    spans.emplace_back(layer.weight.data);
    spans.emplace_back(layer.bias.data);
  }
  spans.emplace_back(m.classifier.weight.data);
  return spans;
}

std::vector<std::span<const double>> grad_spans(const ModelGrads& g) {
  std::vector<std::span<const double>> spans;
  for (std::size_t l = 0; l < g.weight.size(); ++l) {
    spans.emplace_back(g.weight[l].data);
    spans.emplace_back(g.bias[l].data);
  }
  spans.emplace_back(g.clf_weight.data);
  return spans;
}

std::vector<std::size_t> param_shapes(const Model& m) {
  std::vector<std::size_t> shapes;
  for (const auto& layer : m.backbone.layers) {
    shapes.push_back(layer.weight.data.size());
    shapes.push_back(layer.bias.data.size());
  }
  shapes.push_back(m.classifier.weight.data.size());
  return shapes;
}

}  // namespace gcl
