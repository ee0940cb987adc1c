#ifndef DFRDD_MODEL_HPP
#define DFRDD_MODEL_HPP

#include "dfrdd/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dfrdd {

/// Fully connected tanh network with a linear, bias-free output layer.
struct Architecture {
  int input_dim = 1;
  std::vector<int> hidden{10, 10, 20};

  std::vector<int> widths() const;  // [n, hidden..., 1]
  int last_hidden() const { return hidden.back(); }
};

/// Number of parameters including the output weights (no output bias).
int parameter_count(const Architecture& arch);

/// Layer parameters: weights[j] is d_{j+1} x d_j; biases exist for hidden
/// layers only.
struct Network {
  Architecture arch;
  std::vector<MatrixX> weights;
  std::vector<VectorX> biases;

  static Network zeros(const Architecture& arch);

  int num_layers() const { return static_cast<int>(weights.size()); }
  int parameter_count() const { return dfrdd::parameter_count(arch); }
  /// Everything but the output weights, which sit at the end of the flat layout.
  int trainable_count() const { return parameter_count() - arch.last_hidden(); }

  /// Flat layout: for each layer, W_j column-major then b_j (hidden only).
  VectorX flatten() const;
  void unflatten(const VectorX& flat);

  VectorX output_weights() const { return weights.back().row(0).transpose(); }
  void set_output_weights(const VectorX& w) { weights.back().row(0) = w.transpose(); }
  bool finite() const;
};

/// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
Network init_params(const Architecture& arch, std::uint64_t seed);

/// Cutoff chi with chi = 0 on the Dirichlet boundary; evaluated in batch.
struct Cutoff {
  ScalarField value;
  GradientField gradient;
};

/// Values of the cutoff and its gradient on a fixed point batch.
struct CutoffValues {
  VectorX value;
  MatrixX gradient;  // n x N
};
CutoffValues evaluate_cutoff(const Cutoff& cutoff, const MatrixX& points);

struct FieldEval {
  VectorX u;
  MatrixX grad;  // n x N
};

/// Last-hidden-layer features and their spatial derivatives.
struct FeatureEval {
  MatrixX value;             // width x N
  std::vector<MatrixX> grad;  // one width x N block per input direction
};

/// Per-layer activations and input tangents retained for back-propagation.
struct ForwardPass {
  struct Layer {
    MatrixX h;
    std::vector<MatrixX> tangent;
  };
  std::vector<Layer> layers;  // hidden layers only
};

ForwardPass forward_hidden(const Network& net, const MatrixX& points);

/// Raw features without the cutoff.
FeatureEval raw_features(const ForwardPass& pass);

/// chi * N_i and grad(chi * N_i) for every unit of the last hidden layer.
FeatureEval apply_cutoff(const FeatureEval& raw, const CutoffValues& chi);
FeatureEval hidden_features(const Network& net, const Cutoff& cutoff, const MatrixX& points);

/// u = chi * u_tilde and grad u = chi grad u_tilde + u_tilde grad chi.
FieldEval combine(const FeatureEval& cut_features, const VectorX& output_weights);
FieldEval forward_with_grad(const Network& net, const Cutoff& cutoff, const MatrixX& points);

/// Reverse accumulation through the hidden layers. Given adjoints of the last
/// hidden activations and of their input tangents, returns the gradient over
/// the trainable slice (flat layout without the output weights).
VectorX backward_hidden(const Network& net, const MatrixX& points, const ForwardPass& pass,
                        const MatrixX& h_bar, const std::vector<MatrixX>& tangent_bar);

/// Adjoint of u and grad u at the points, pulled back through the cutoff
/// and the fixed output layer to the last hidden layer.
struct HiddenAdjoint {
  MatrixX h_bar;
  std::vector<MatrixX> tangent_bar;
};
HiddenAdjoint pull_back_output(const VectorX& output_weights, const CutoffValues& chi,
                               const VectorX& u_bar, const MatrixX& grad_bar);

/// Flat binary array plus JSON layout header (<prefix>.bin / <prefix>.json).
void save_params(const Network& net, const std::string& prefix);
Network load_params(const std::string& prefix);

}  // namespace dfrdd

#endif  // DFRDD_MODEL_HPP
