#pragma once

#include <optional>
#include <string>

#include "boba/dataset.hpp"
#include "boba/rng.hpp"

namespace boba {

enum class ArchKind { kSoftmax, kMlp };

/// Softmax regression {dim, c} or one tanh hidden layer {dim, hidden, c}.
/// Parameters are flattened as column-major W then b, layer by layer.
struct Architecture {
  ArchKind kind = ArchKind::kSoftmax;
  int input_dim = 0;
  int num_classes = 0;
  int hidden = 0;

  Eigen::Index num_params() const;
};

ArchKind parse_arch_kind(const std::string& name);
std::string arch_kind_name(ArchKind kind);

Vector init_params(const Architecture& arch, double scale, Rng& rng);

struct ProxTerm {
  double mu = 0.0;
  Vector anchor;
};

struct LossGradient {
  double loss = 0.0;
  Vector gradient;
};

/// Mean cross-entropy and its exact gradient; the optional proximal term adds
/// (mu/2)||w - anchor||^2.
LossGradient loss_and_gradient(const Architecture& arch, const Vector& params,
                               const LabeledDataset& data, const ProxTerm* prox = nullptr);

double loss_only(const Architecture& arch, const Vector& params, const LabeledDataset& data);

/// samples x c
Matrix logits(const Architecture& arch, const Vector& params, const Matrix& features);

std::vector<int> predict(const Architecture& arch, const Vector& params, const Matrix& features);

enum class LocalVariant { kFedSgd, kFedAvg, kFedProx };

LocalVariant parse_local_variant(const std::string& name);
std::string local_variant_name(LocalVariant v);

struct LocalUpdateOptions {
  LocalVariant variant = LocalVariant::kFedSgd;
  double learning_rate = 0.1;
  int epochs = 1;
  double prox_mu = 0.01;
  int minibatch = 0;      // 0 = full batch
  double noise_std = 0.0; // additive Gaussian noise on every local gradient
};

/// FedSGD returns the (noisy) gradient at params; FedAvg / FedProx run
/// `epochs` local descent steps and return the pseudo-gradient params - w_local.
Vector local_update(const Architecture& arch, const Vector& params, const LabeledDataset& data,
                    const LocalUpdateOptions& options, Rng& rng);

}  // namespace boba
