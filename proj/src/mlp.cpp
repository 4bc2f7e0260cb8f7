#include "moosurr/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "moosurr/errors.hpp"

namespace moosurr {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double activate(Activation a, double z) {
  switch (a) {
    case Activation::ReLU: return z > 0.0 ? z : 0.0;
    case Activation::Sigmoid: return sigmoid(z);
    case Activation::Identity: return z;
  }
  return z;
}

// Derivative expressed through both the pre- and post-activation value.
double activation_slope(Activation a, double pre, double post) {
  switch (a) {
    case Activation::ReLU: return pre > 0.0 ? 1.0 : 0.0;
    case Activation::Sigmoid: return post * (1.0 - post);
    case Activation::Identity: return 1.0;
  }
  return 1.0;
}

}  // namespace

std::string to_string(Activation a) {
  switch (a) {
    case Activation::ReLU: return "relu";
    case Activation::Identity: return "identity";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "?";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::ReLU;
  if (s == "identity") return Activation::Identity;
  if (s == "sigmoid") return Activation::Sigmoid;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

std::string to_string(OutputKind k) {
  return k == OutputKind::BinaryProbability ? "binary-probability" : "regression-scalar";
}

OutputKind output_kind_from_string(const std::string& s) {
  if (s == "binary-probability") return OutputKind::BinaryProbability;
  if (s == "regression-scalar") return OutputKind::RegressionScalar;
  throw std::invalid_argument("unknown output kind '" + s + "'");
}

Vector ForwardCache::outputs() const {
  const Matrix& last = post.back();
  return Vector(last.data().begin(), last.data().end());
}

Mlp::Mlp(std::vector<DenseLayer> layers, OutputKind output_kind)
    : layers_(std::move(layers)), output_kind_(output_kind) {
  if (layers_.empty()) throw ShapeError("mlp: no layers");
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& layer = layers_[k];
    if (layer.bias.size() != layer.output_dim()) {
      throw ShapeError("mlp: layer " + std::to_string(k) + " bias length != output dim");
    }
    if (k > 0 && layers_[k - 1].output_dim() != layer.input_dim()) {
      throw ShapeError("mlp: layer " + std::to_string(k) + " input dim does not chain");
    }
    if (!all_finite(layer.weight.data()) || !all_finite(layer.bias)) {
      throw NumericError("mlp: non-finite parameter in layer " + std::to_string(k));
    }
  }
  const auto& last = layers_.back();
  if (last.output_dim() != 1) throw ShapeError("mlp: final layer must have one output");
  const Activation expected = output_kind_ == OutputKind::BinaryProbability
                                  ? Activation::Sigmoid
                                  : Activation::Identity;
  if (last.activation != expected) {
    throw std::invalid_argument("mlp: final activation does not match output kind");
  }
}

Mlp Mlp::glorot(std::size_t input_dim, std::span<const std::size_t> hidden,
                OutputKind output_kind, Rng& rng) {
  std::vector<DenseLayer> layers;
  std::size_t fan_in = input_dim;
  auto make_layer = [&](std::size_t fan_out, Activation act) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    DenseLayer layer{Matrix(fan_out, fan_in), Vector(fan_out, 0.0), act};
    for (double& w : layer.weight.data()) w = dist(rng);
    layers.push_back(std::move(layer));
    fan_in = fan_out;
  };
  for (std::size_t width : hidden) make_layer(width, Activation::ReLU);
  make_layer(1, output_kind == OutputKind::BinaryProbability ? Activation::Sigmoid
                                                             : Activation::Identity);
  return Mlp(std::move(layers), output_kind);
}

std::size_t Mlp::input_dim() const { return layers_.empty() ? 0 : layers_.front().input_dim(); }

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weight.data().size() + layer.bias.size();
  return n;
}

double Mlp::forward(std::span<const double> x) const {
  if (x.size() != input_dim()) {
    throw ShapeError("mlp_forward: input length " + std::to_string(x.size()) +
                     " != input dim " + std::to_string(input_dim()));
  }
  Vector current(x.begin(), x.end());
  Vector next;
  for (const auto& layer : layers_) {
    next.assign(layer.output_dim(), 0.0);
    for (std::size_t o = 0; o < layer.output_dim(); ++o) {
      double z = layer.bias[o];
      auto w = layer.weight.row(o);
      for (std::size_t j = 0; j < w.size(); ++j) z += w[j] * current[j];
      next[o] = activate(layer.activation, z);
    }
    current.swap(next);
  }
  return current[0];
}

ForwardCache Mlp::forward_cached(const Matrix& batch) const {
  if (batch.cols() != input_dim()) {
    throw ShapeError("mlp_forward: batch has " + std::to_string(batch.cols()) +
                     " columns, model expects " + std::to_string(input_dim()));
  }
  ForwardCache cache;
  cache.input = batch;
  const Matrix* input = &cache.input;
  for (const auto& layer : layers_) {
    Matrix pre(batch.rows(), layer.output_dim());
    Matrix post(batch.rows(), layer.output_dim());
    for (std::size_t i = 0; i < batch.rows(); ++i) {
      auto x = input->row(i);
      auto z_row = pre.row(i);
      auto a_row = post.row(i);
      for (std::size_t o = 0; o < layer.output_dim(); ++o) {
        double z = layer.bias[o];
        auto w = layer.weight.row(o);
        for (std::size_t j = 0; j < w.size(); ++j) z += w[j] * x[j];
        z_row[o] = z;
        a_row[o] = activate(layer.activation, z);
      }
    }
    cache.pre.push_back(std::move(pre));
    cache.post.push_back(std::move(post));
    input = &cache.post.back();
  }
  return cache;
}

Vector Mlp::forward_batch(const Matrix& batch) const { return forward_cached(batch).outputs(); }

Vector Mlp::backward(const ForwardCache& cache, std::span<const double> upstream) const {
  const std::size_t n = cache.input.rows();
  if (upstream.size() != n) {
    throw ShapeError("mlp_backward: upstream length " + std::to_string(upstream.size()) +
                     " != batch rows " + std::to_string(n));
  }
  Vector grad(parameter_count(), 0.0);

  // Offsets of each layer's block in the flattened vector.
  std::vector<std::size_t> offset(layers_.size());
  for (std::size_t k = 0, pos = 0; k < layers_.size(); ++k) {
    offset[k] = pos;
    pos += layers_[k].weight.data().size() + layers_[k].bias.size();
  }

  // delta = dL/d(pre-activation) for the current layer, batch x out.
  const auto& last = layers_.back();
  Matrix delta(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    delta(i, 0) = upstream[i] *
                  activation_slope(last.activation, cache.pre.back()(i, 0), cache.post.back()(i, 0));
  }

  for (std::size_t k = layers_.size(); k-- > 0;) {
    const auto& layer = layers_[k];
    const Matrix& input = k == 0 ? cache.input : cache.post[k - 1];
    double* gw = grad.data() + offset[k];
    double* gb = gw + layer.weight.data().size();
    const std::size_t in_dim = layer.input_dim();
    for (std::size_t i = 0; i < n; ++i) {
      auto x = input.row(i);
      auto d = delta.row(i);
      for (std::size_t o = 0; o < layer.output_dim(); ++o) {
        const double dv = d[o];
        if (dv == 0.0) continue;
        double* gw_row = gw + o * in_dim;
        for (std::size_t j = 0; j < in_dim; ++j) gw_row[j] += dv * x[j];
        gb[o] += dv;
      }
    }
    if (k == 0) break;

    const auto& below = layers_[k - 1];
    Matrix prev(n, in_dim);
    for (std::size_t i = 0; i < n; ++i) {
      auto d = delta.row(i);
      auto p = prev.row(i);
      for (std::size_t o = 0; o < layer.output_dim(); ++o) {
        const double dv = d[o];
        if (dv == 0.0) continue;
        auto w = layer.weight.row(o);
        for (std::size_t j = 0; j < in_dim; ++j) p[j] += dv * w[j];
      }
      auto z = cache.pre[k - 1].row(i);
      auto a = cache.post[k - 1].row(i);
      for (std::size_t j = 0; j < in_dim; ++j) p[j] *= activation_slope(below.activation, z[j], a[j]);
    }
    delta = std::move(prev);
  }
  return grad;
}

Vector Mlp::backward(const Matrix& batch, std::span<const double> upstream) const {
  if (upstream.size() != batch.rows()) {
    throw ShapeError("mlp_backward: upstream length " + std::to_string(upstream.size()) +
                     " != batch rows " + std::to_string(batch.rows()));
  }
  return backward(forward_cached(batch), upstream);
}

Vector Mlp::flatten() const {
  Vector out;
  out.reserve(parameter_count());
  for (const auto& layer : layers_) {
    out.insert(out.end(), layer.weight.data().begin(), layer.weight.data().end());
    out.insert(out.end(), layer.bias.begin(), layer.bias.end());
  }
  return out;
}

void Mlp::unflatten(std::span<const double> params) {
  if (params.size() != parameter_count()) {
    throw ShapeError("unflatten_params: got " + std::to_string(params.size()) +
                     " values, model has " + std::to_string(parameter_count()));
  }
  std::size_t pos = 0;
  for (auto& layer : layers_) {
    for (double& w : layer.weight.data()) w = params[pos++];
    for (double& b : layer.bias) b = params[pos++];
  }
}

}  // namespace moosurr
