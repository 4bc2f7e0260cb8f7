#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "moosurr/linalg.hpp"
#include "moosurr/rng.hpp"

namespace moosurr {

enum class Activation { ReLU, Identity, Sigmoid };
enum class OutputKind { RegressionScalar, BinaryProbability };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);
std::string to_string(OutputKind k);
OutputKind output_kind_from_string(const std::string& s);

/// One affine layer followed by an activation. `weight` is out x in.
struct DenseLayer {
  Matrix weight;
  Vector bias;
  Activation activation = Activation::Identity;

  std::size_t input_dim() const { return weight.cols(); }
  std::size_t output_dim() const { return weight.rows(); }

  bool operator==(const DenseLayer&) const = default;
};

/// Per-layer activations kept from a batch forward pass for backprop.
struct ForwardCache {
  Matrix input;
  std::vector<Matrix> pre;   // pre-activation, one per layer (batch x out)
  std::vector<Matrix> post;  // post-activation, one per layer
  Vector outputs() const;
};

/// Dense feed-forward network with a single scalar output.
///
/// Flattened parameter order is layer-major; within a layer the weight comes
/// first (row-major, out x in) and then the bias. Every GradientVector in the
/// library uses this order, so gradients of different losses can be added.
class Mlp {
 public:
  Mlp() = default;
  /// Validates the layer chain and output activation; throws ShapeError.
  Mlp(std::vector<DenseLayer> layers, OutputKind output_kind);

  /// Hidden layers use ReLU. Weights are Glorot-uniform, biases zero.
  static Mlp glorot(std::size_t input_dim, std::span<const std::size_t> hidden,
                    OutputKind output_kind, Rng& rng);

  std::size_t input_dim() const;
  std::size_t parameter_count() const;
  OutputKind output_kind() const { return output_kind_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  double forward(std::span<const double> x) const;
  Vector forward_batch(const Matrix& batch) const;
  ForwardCache forward_cached(const Matrix& batch) const;

  /// Gradient of a batch loss L w.r.t. all parameters.
  ///
  /// `upstream[i]` is dL/df(x_i) for the batch loss L (for a batch-mean loss
  /// it already carries the 1/n factor, as produced by upstream_derivative),
  /// so the per-example contributions are summed.
  Vector backward(const ForwardCache& cache, std::span<const double> upstream) const;
  Vector backward(const Matrix& batch, std::span<const double> upstream) const;

  Vector flatten() const;
  void unflatten(std::span<const double> params);

  bool operator==(const Mlp&) const = default;

 private:
  std::vector<DenseLayer> layers_;
  OutputKind output_kind_ = OutputKind::RegressionScalar;
};

}  // namespace moosurr
