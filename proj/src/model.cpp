#include "boba/model.hpp"

#include <cmath>

#include "boba/error.hpp"

namespace boba {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SoftmaxOutput {
  Matrix probs;   // samples x c
  double loss = 0.0;
};

// Row-wise softmax with mean cross-entropy against the labels.
SoftmaxOutput softmax_cross_entropy(const Matrix& z, const std::vector<int>& labels) {
  SoftmaxOutput out;
  out.probs.resize(z.rows(), z.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double top = z.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (z.row(i).array() - top).exp();
    const double s = e.sum();
    out.probs.row(i) = e / s;
    total += std::log(s) + top - z(i, labels[static_cast<size_t>(i)]);
  }
  out.loss = total / static_cast<double>(z.rows());
  return out;
}

void check_params(const Architecture& arch, const Vector& params) {
  require(params.size() == arch.num_params(), ErrorCode::kDimensionMismatch,
          "parameter vector has " + std::to_string(params.size()) + " entries, architecture needs " +
              std::to_string(arch.num_params()));
  require(params.allFinite(), ErrorCode::kNumeric, "non-finite model parameters");
}

}  // namespace

Eigen::Index Architecture::num_params() const {
  if (kind == ArchKind::kSoftmax) return static_cast<Eigen::Index>(num_classes) * (input_dim + 1);
  return static_cast<Eigen::Index>(hidden) * (input_dim + 1) +
         static_cast<Eigen::Index>(num_classes) * (hidden + 1);
}

ArchKind parse_arch_kind(const std::string& name) {
  if (name == "softmax") return ArchKind::kSoftmax;
  if (name == "mlp") return ArchKind::kMlp;
  throw Error(ErrorCode::kConfig, "unknown architecture '" + name + "'");
}

std::string arch_kind_name(ArchKind kind) { return kind == ArchKind::kSoftmax ? "softmax" : "mlp"; }

Vector init_params(const Architecture& arch, double scale, Rng& rng) {
  Vector w = Vector::Zero(arch.num_params());
  if (scale > 0.0) {
    std::normal_distribution<double> normal(0.0, scale);
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = normal(rng);
  }
  return w;
}

Matrix logits(const Architecture& arch, const Vector& params, const Matrix& x) {
  check_params(arch, params);
  const int c = arch.num_classes;
  const int dim = arch.input_dim;
  require(x.cols() == dim, ErrorCode::kDimensionMismatch, "feature dimension mismatch");
  if (arch.kind == ArchKind::kSoftmax) {
    Eigen::Map<const Matrix> w(params.data(), c, dim);
    Eigen::Map<const Vector> b(params.data() + c * dim, c);
    Matrix z = x * w.transpose();
    z.rowwise() += b.transpose();
    return z;
  }
  const int h = arch.hidden;
  Eigen::Map<const Matrix> w1(params.data(), h, dim);
  Eigen::Map<const Vector> b1(params.data() + h * dim, h);
  Eigen::Map<const Matrix> w2(params.data() + h * (dim + 1), c, h);
  Eigen::Map<const Vector> b2(params.data() + h * (dim + 1) + c * h, c);
  Matrix a = x * w1.transpose();
  a.rowwise() += b1.transpose();
  const Matrix hidden = a.array().tanh().matrix();
  Matrix z = hidden * w2.transpose();
  z.rowwise() += b2.transpose();
  return z;
}

std::vector<int> predict(const Architecture& arch, const Vector& params, const Matrix& features) {
  const Matrix z = logits(arch, params, features);
  std::vector<int> out(static_cast<size_t>(z.rows()));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    Eigen::Index arg = 0;
    z.row(i).maxCoeff(&arg);
    out[static_cast<size_t>(i)] = static_cast<int>(arg);
  }
  return out;
}

LossGradient loss_and_gradient(const Architecture& arch, const Vector& params,
                               const LabeledDataset& data, const ProxTerm* prox) {
  require(!data.empty(), ErrorCode::kInvalidInput, "loss on an empty dataset");
  check_params(arch, params);
  const int c = arch.num_classes;
  const int dim = arch.input_dim;
  const Matrix& x = data.features;
  require(x.cols() == dim, ErrorCode::kDimensionMismatch, "feature dimension mismatch");
  const double inv_n = 1.0 / static_cast<double>(data.size());

  LossGradient out;
  out.gradient = Vector::Zero(params.size());

  if (arch.kind == ArchKind::kSoftmax) {
    Eigen::Map<const Matrix> w(params.data(), c, dim);
    Eigen::Map<const Vector> b(params.data() + c * dim, c);
    Matrix z = x * w.transpose();
    z.rowwise() += b.transpose();
    SoftmaxOutput s = softmax_cross_entropy(z, data.labels);
    for (int i = 0; i < data.size(); ++i) s.probs(i, data.labels[static_cast<size_t>(i)]) -= 1.0;
    s.probs *= inv_n;  // dL/dz
    Eigen::Map<Matrix> gw(out.gradient.data(), c, dim);
    Eigen::Map<Vector> gb(out.gradient.data() + c * dim, c);
    gw.noalias() = s.probs.transpose() * x;
    gb = s.probs.colwise().sum().transpose();
    out.loss = s.loss;
  } else {
    const int h = arch.hidden;
    Eigen::Map<const Matrix> w1(params.data(), h, dim);
    Eigen::Map<const Vector> b1(params.data() + h * dim, h);
    Eigen::Map<const Matrix> w2(params.data() + h * (dim + 1), c, h);
    Eigen::Map<const Vector> b2(params.data() + h * (dim + 1) + c * h, c);
    Matrix a = x * w1.transpose();
    a.rowwise() += b1.transpose();
    const Matrix hidden = a.array().tanh().matrix();
    Matrix z = hidden * w2.transpose();
    z.rowwise() += b2.transpose();
    SoftmaxOutput s = softmax_cross_entropy(z, data.labels);
    for (int i = 0; i < data.size(); ++i) s.probs(i, data.labels[static_cast<size_t>(i)]) -= 1.0;
    s.probs *= inv_n;
    const Matrix dhidden = s.probs * w2;
    const Matrix da = (dhidden.array() * (1.0 - hidden.array().square())).matrix();

    Eigen::Map<Matrix> gw1(out.gradient.data(), h, dim);
    Eigen::Map<Vector> gb1(out.gradient.data() + h * dim, h);
    Eigen::Map<Matrix> gw2(out.gradient.data() + h * (dim + 1), c, h);
    Eigen::Map<Vector> gb2(out.gradient.data() + h * (dim + 1) + c * h, c);
    gw1.noalias() = da.transpose() * x;
    gb1 = da.colwise().sum().transpose();
    gw2.noalias() = s.probs.transpose() * hidden;
    gb2 = s.probs.colwise().sum().transpose();
    out.loss = s.loss;
  }

  if (prox != nullptr && prox->mu > 0.0) {
    const Vector diff = params - prox->anchor;
    out.loss += 0.5 * prox->mu * diff.squaredNorm();
    out.gradient += prox->mu * diff;
  }
  return out;
}

double loss_only(const Architecture& arch, const Vector& params, const LabeledDataset& data) {
  require(!data.empty(), ErrorCode::kInvalidInput, "loss on an empty dataset");
  const Matrix z = logits(arch, params, data.features);
  return softmax_cross_entropy(z, data.labels).loss;
}

LocalVariant parse_local_variant(const std::string& name) {
  if (name == "fedsgd") return LocalVariant::kFedSgd;
  if (name == "fedavg") return LocalVariant::kFedAvg;
  if (name == "fedprox") return LocalVariant::kFedProx;
  throw Error(ErrorCode::kConfig, "unknown local training variant '" + name + "'");
}

std::string local_variant_name(LocalVariant v) {
  switch (v) {
    case LocalVariant::kFedSgd: return "fedsgd";
    case LocalVariant::kFedAvg: return "fedavg";
    case LocalVariant::kFedProx: return "fedprox";
  }
  return "fedsgd";
}

Vector local_update(const Architecture& arch, const Vector& params, const LabeledDataset& data,
                    const LocalUpdateOptions& options, Rng& rng) {
  require(!data.empty(), ErrorCode::kInvalidInput, "local update on an empty dataset");
  require(options.epochs >= 1, ErrorCode::kInvalidInput, "local epochs must be >= 1");
  std::normal_distribution<double> noise(0.0, options.noise_std > 0.0 ? options.noise_std : 1.0);

  auto step_gradient = [&](const Vector& w, const ProxTerm* prox) {
    Vector g;
    if (options.minibatch > 0 && options.minibatch < data.size()) {
      std::vector<int> rows(static_cast<size_t>(options.minibatch));
      std::uniform_int_distribution<int> pick(0, data.size() - 1);
      for (int& r : rows) r = pick(rng);
      g = loss_and_gradient(arch, w, subset(data, rows), prox).gradient;
    } else {
      g = loss_and_gradient(arch, w, data, prox).gradient;
    }
    if (options.noise_std > 0.0) {
      for (Eigen::Index i = 0; i < g.size(); ++i) g(i) += noise(rng);
    }
    return g;
  };

  if (options.variant == LocalVariant::kFedSgd) return step_gradient(params, nullptr);

  // The proximal term is applied in closed form (a proximal-gradient step),
  // which stays stable for any mu: w <- (w - lr g + lr mu anchor) / (1 + lr mu).
  const double lr = options.learning_rate;
  const double mu = options.variant == LocalVariant::kFedProx ? options.prox_mu : 0.0;
  Vector w = params;
  for (int e = 0; e < options.epochs; ++e) {
    w = (w - lr * step_gradient(w, nullptr) + (lr * mu) * params) / (1.0 + lr * mu);
    require(w.allFinite(), ErrorCode::kNumeric, "local update diverged");
  }
  return params - w;
}

}  // namespace boba
