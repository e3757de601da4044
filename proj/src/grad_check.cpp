#include "gcl/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "gcl/finite_diff.hpp"
#include "gcl/loss.hpp"
#include "gcl/model.hpp"
#include "gcl/rng.hpp"

namespace gcl {

namespace {

// Guarded per-coordinate relative error. The floor keeps coordinates whose
// true gradient sits at the finite-difference noise level (e.g. directions the
// cosine head is scale-invariant along) from registering as 100% error.
double rel_err(const std::vector<double>& analytic, const Tensor1& numeric) {
  double scale = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    scale = std::max({scale, std::fabs(analytic[i]), std::fabs(numeric[static_cast<int>(i)])});
  }
  const double floor = 1e-3 * std::max(1.0, scale);
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double n = numeric[static_cast<int>(i)];
    const double denom = std::max({std::fabs(analytic[i]), std::fabs(n), floor});
    worst = std::max(worst, std::fabs(analytic[i] - n) / denom);
  }
  return worst;
}

Tensor1 flatten(const Tensor2& t) {
  Tensor1 v(static_cast<int>(t.data.size()));
  std::copy(t.data.begin(), t.data.end(), v.begin());
  return v;
}

struct Instance {
  Model model;
  Tensor2 x;
  std::vector<int> labels;
  CloudSizeTable table;
  Tensor1 eps;
  GclConfig cfg;
};

Instance random_instance(RngStream& rng) {
  Instance inst;
  const int input_dim = 2 + static_cast<int>(rng.next_uniform() * 4);   // 2..5
  const int hidden = 3 + static_cast<int>(rng.next_uniform() * 4);      // 3..6
  const int embed_dim = 2 + static_cast<int>(rng.next_uniform() * 4);  // 2..5
  const int classes = 2 + static_cast<int>(rng.next_uniform() * 4);     // 2..5
  const int batch = 1 + static_cast<int>(rng.next_uniform() * 4);       // 1..4
  const int layers = 1 + static_cast<int>(rng.next_uniform() * 2);      // 1..2 hidden

  std::vector<int> hidden_dims(layers, hidden);
  RngStream init = rng.child("init");
  inst.model = init_model(input_dim, hidden_dims, embed_dim, classes, init);

  // Redraw inputs until every feature row clears the cosine head's norm floor;
  // tiny hidden layers can otherwise go fully dead under the rectifier.
  inst.x = Tensor2(batch, input_dim);
  for (int attempt = 0; attempt < 200; ++attempt) {
    for (double& v : inst.x.data) v = rng.next_gaussian(0.0, 1.0);
    const Tensor2 f = embed(inst.model.backbone, inst.x);
    double min_norm = 1e300;
    for (int i = 0; i < f.rows; ++i) {
      double s = 0.0;
      for (double v : f.row(i)) s += v * v;
      min_norm = std::min(min_norm, std::sqrt(s));
    }
    if (min_norm > 1e-3) break;
  }
  inst.labels.resize(batch);
  for (int i = 0; i < batch; ++i) {
    inst.labels[i] = static_cast<int>(rng.next_uniform() * classes);
  }

  std::vector<std::int64_t> counts(classes);
  for (int j = 0; j < classes; ++j) counts[j] = 1 + static_cast<std::int64_t>(rng.next_uniform() * 200);
  inst.table = compute_cloud_sizes(counts, CloudStrategy::log_diff);

  inst.cfg.scale = 4.0;  // moderate scale keeps finite-difference noise low
  inst.eps = Tensor1(batch);
  for (int i = 0; i < batch; ++i) inst.eps[i] = rng.next_uniform();
  return inst;
}

double chain_loss(const Instance& inst, const Model& model, bool use_gcl) {
  auto [f, tape] = forward_features(model.backbone, inst.x);
  if (use_gcl) {
    const Tensor2 cosz = cosine_logits(model.classifier, f);
    return gcl_loss(cosz, inst.labels, inst.table, inst.eps, inst.cfg).loss;
  }
  const Tensor2 z = dot_logits(model.classifier, f);
  return ce_loss(z, inst.labels).loss;
}

}  // namespace

std::vector<GradCheckRow> run_grad_checks(int trials, std::uint64_t base_seed, double h,
                                          bool inject_sign_flip) {
  std::map<std::string, double> worst;
  auto record = [&](const std::string& component, double err) {
    auto [it, inserted] = worst.try_emplace(component, err);
    if (!inserted) it->second = std::max(it->second, err);
  };

  for (int trial = 0; trial < trials; ++trial) {
    RngStream rng(base_seed + static_cast<std::uint64_t>(trial));
    Instance inst = random_instance(rng);
    const int classes = inst.model.classifier.classes();
    const int batch = inst.x.rows;

    // Loss gradients w.r.t. their own logits, against the finite-difference
    // oracle on the scalar loss.
    {
      Tensor2 z(batch, classes);
      for (double& v : z.data) v = rng.next_gaussian(0.0, 2.0);
      const LossOutput out = ce_loss(z, inst.labels);
      const Tensor1 numeric = finite_diff_grad(
          [&](const Tensor1& flat) {
            Tensor2 probe = z;
            std::copy(flat.begin(), flat.end(), probe.data.begin());
            return ce_loss(probe, inst.labels).loss;
          },
          flatten(z), h);
      record("ce-loss-dlogits", rel_err(out.dlogits.data, numeric));
    }
    {
      // Keep entries away from +-1 so the finite-difference probes stay in range.
      Tensor2 cosz(batch, classes);
      for (double& v : cosz.data) v = std::clamp(rng.next_gaussian(0.0, 0.4), -0.99, 0.99);
      const LossOutput out = gcl_loss(cosz, inst.labels, inst.table, inst.eps, inst.cfg);
      const Tensor1 numeric = finite_diff_grad(
          [&](const Tensor1& flat) {
            Tensor2 probe = cosz;
            std::copy(flat.begin(), flat.end(), probe.data.begin());
            return gcl_loss(probe, inst.labels, inst.table, inst.eps, inst.cfg).loss;
          },
          flatten(cosz), h);
      record("gcl-loss-dlogits", rel_err(out.dlogits.data, numeric));
    }

    // Full chain through the GCL path: cosine head and every layer.
    {
      auto [f, tape] = forward_features(inst.model.backbone, inst.x);
      Tensor2 cosz = cosine_logits(inst.model.classifier, f, tape);
      const LossOutput out = gcl_loss(cosz, inst.labels, inst.table, inst.eps, inst.cfg);
      ModelGrads grads = backward(inst.model.backbone, inst.model.classifier, tape, out.dlogits);
      if (inject_sign_flip) {
        // Corrupt the largest backbone weight gradient so the flip is visible.
        std::size_t flip_layer = 0, flip_idx = 0;
        double flip_mag = -1.0;
        for (std::size_t l = 0; l < grads.weight.size(); ++l) {
          for (std::size_t k = 0; k < grads.weight[l].data.size(); ++k) {
            if (std::fabs(grads.weight[l].data[k]) > flip_mag) {
              flip_mag = std::fabs(grads.weight[l].data[k]);
              flip_layer = l;
              flip_idx = k;
            }
          }
        }
        grads.weight[flip_layer].data[flip_idx] = -grads.weight[flip_layer].data[flip_idx];
      }

      const Tensor1 num_clf = finite_diff_grad(
          [&](const Tensor1& flat) {
            Model probe = inst.model;
            std::copy(flat.begin(), flat.end(), probe.classifier.weight.data.begin());
            return chain_loss(inst, probe, true);
          },
          flatten(inst.model.classifier.weight), h);
      record("cosine-head-anchors", rel_err(grads.clf_weight.data, num_clf));

      // Head-only feature gradient: run the head on an identity backbone so
      // backward's input gradient is exactly dL/df.
      const Tensor1 num_feat = finite_diff_grad(
          [&](const Tensor1& flat) {
            Tensor2 probe = f;
            std::copy(flat.begin(), flat.end(), probe.data.begin());
            const Tensor2 cz = cosine_logits(inst.model.classifier, probe);
            return gcl_loss(cz, inst.labels, inst.table, inst.eps, inst.cfg).loss;
          },
          flatten(f), h);
      {
        MlpBackbone identity = make_mlp({f.cols, f.cols});
        for (int d = 0; d < f.cols; ++d) identity.layers[0].weight.at(d, d) = 1.0;
        auto [f2, head_tape] = forward_features(identity, f);
        const Tensor2 cz = cosine_logits(inst.model.classifier, f2, head_tape);
        const LossOutput out2 = gcl_loss(cz, inst.labels, inst.table, inst.eps, inst.cfg);
        const ModelGrads g2 = backward(identity, inst.model.classifier, head_tape, out2.dlogits);
        record("cosine-head-features", rel_err(g2.input.data, num_feat));
      }

      for (std::size_t l = 0; l < inst.model.backbone.layers.size(); ++l) {
        const Tensor1 num_w = finite_diff_grad(
            [&](const Tensor1& flat) {
              Model probe = inst.model;
              std::copy(flat.begin(), flat.end(), probe.backbone.layers[l].weight.data.begin());
              return chain_loss(inst, probe, true);
            },
            flatten(inst.model.backbone.layers[l].weight), h);
        record("mlp-weights", rel_err(grads.weight[l].data, num_w));

        const Tensor1 num_b = finite_diff_grad(
            [&](const Tensor1& flat) {
              Model probe = inst.model;
              std::copy(flat.begin(), flat.end(), probe.backbone.layers[l].bias.data.begin());
              return chain_loss(inst, probe, true);
            },
            Tensor1{inst.model.backbone.layers[l].bias}, h);
        record("mlp-biases", rel_err(grads.bias[l].data, num_b));
      }

      const Tensor1 num_x = finite_diff_grad(
          [&](const Tensor1& flat) {
            Instance probe = inst;
            std::copy(flat.begin(), flat.end(), probe.x.data.begin());
            return chain_loss(probe, inst.model, true);
          },
          flatten(inst.x), h);
      record("mlp-input", rel_err(grads.input.data, num_x));
    }

    // Dot-product head with the cross-entropy baseline.
    {
      auto [f, tape] = forward_features(inst.model.backbone, inst.x);
      Tensor2 z = dot_logits(inst.model.classifier, f, tape);
      const LossOutput out = ce_loss(z, inst.labels);
      const ModelGrads grads = backward(inst.model.backbone, inst.model.classifier, tape, out.dlogits);
      const Tensor1 num_clf = finite_diff_grad(
          [&](const Tensor1& flat) {
            Model probe = inst.model;
            std::copy(flat.begin(), flat.end(), probe.classifier.weight.data.begin());
            return chain_loss(inst, probe, false);
          },
          flatten(inst.model.classifier.weight), h);
      record("dot-head-anchors", rel_err(grads.clf_weight.data, num_clf));
    }
  }

  std::vector<GradCheckRow> rows;
  rows.reserve(worst.size());
  for (const auto& [component, err] : worst) rows.push_back({component, err});
  return rows;
}

}  // namespace gcl
