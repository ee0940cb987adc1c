#include "dfrdd/model.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

namespace dfrdd {

namespace {
int num_hidden(const Network& net) { return net.num_layers() - 1; }

// tanh through the vectorized exponential; absolute error stays at rounding level.
ArrayXX tanh_array(const ArrayXX& z) {
  const ArrayXX t = (-2.0 * z.abs()).exp();
  return ((1.0 - t) / (1.0 + t)) * z.sign();
}
}  // namespace

std::vector<int> Architecture::widths() const {
  std::vector<int> w{input_dim};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(1);
  return w;
}

int parameter_count(const Architecture& arch) {
  const auto w = arch.widths();
  int count = 0;
  for (std::size_t j = 1; j < w.size(); ++j) {
    count += w[j] * w[j - 1];
    if (j + 1 < w.size()) count += w[j];
  }
  return count;
}

Network Network::zeros(const Architecture& arch) {
  if (arch.input_dim < 1 || arch.hidden.empty())
    throw std::invalid_argument("network needs an input and at least one hidden layer");
  Network net;
  net.arch = arch;
  const auto w = arch.widths();
  for (std::size_t j = 1; j < w.size(); ++j) {
    net.weights.push_back(MatrixX::Zero(w[j], w[j - 1]));
    if (j + 1 < w.size()) net.biases.push_back(VectorX::Zero(w[j]));
  }
  return net;
}

VectorX Network::flatten() const {
  VectorX flat(parameter_count());
  Eigen::Index pos = 0;
  for (int j = 0; j < num_layers(); ++j) {
    const auto& W = weights[j];
    flat.segment(pos, W.size()) = Eigen::Map<const VectorX>(W.data(), W.size());
    pos += W.size();
    if (j < static_cast<int>(biases.size())) {
      flat.segment(pos, biases[j].size()) = biases[j];
      pos += biases[j].size();
    }
  }
  return flat;
}

void Network::unflatten(const VectorX& flat) {
  if (flat.size() != parameter_count()) throw std::invalid_argument("parameter vector size mismatch");
  Eigen::Index pos = 0;
  for (int j = 0; j < num_layers(); ++j) {
    auto& W = weights[j];
    Eigen::Map<VectorX>(W.data(), W.size()) = flat.segment(pos, W.size());
    pos += W.size();
    if (j < static_cast<int>(biases.size())) {
      biases[j] = flat.segment(pos, biases[j].size());
      pos += biases[j].size();
    }
  }
}

bool Network::finite() const {
  for (const auto& W : weights) {
    if (!W.allFinite()) return false;
  }
  for (const auto& b : biases) {
    if (!b.allFinite()) return false;
  }
  return true;
}

Network init_params(const Architecture& arch, std::uint64_t seed) {
  Network net = Network::zeros(arch);
  std::mt19937_64 rng(seed);
  for (auto& W : net.weights) {
    const double bound = std::sqrt(6.0 / static_cast<double>(W.rows() + W.cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index c = 0; c < W.cols(); ++c) {
      for (Eigen::Index r = 0; r < W.rows(); ++r) W(r, c) = dist(rng);
    }
  }
  return net;
}

CutoffValues evaluate_cutoff(const Cutoff& cutoff, const MatrixX& points) {
  return {cutoff.value(points), cutoff.gradient(points)};
}

namespace {

// Columns per block; keeps all per-layer temporaries cache resident.
constexpr Eigen::Index kChunk = 1024;

void forward_block(const Network& net, const MatrixX& points, ForwardPass& pass) {
  const int n = net.arch.input_dim;
  const int hidden = num_hidden(net);
  pass.layers.resize(hidden);
  for (int l = 0; l < hidden; ++l) {
    const MatrixX& W = net.weights[l];
    auto& layer = pass.layers[l];
    const MatrixX& prev = l == 0 ? points : pass.layers[l - 1].h;
    layer.h = tanh_array(((W * prev).colwise() + net.biases[l]).array()).matrix();
    const ArrayXX slope = 1.0 - layer.h.array().square();
    layer.tangent.resize(n);
    for (int d = 0; d < n; ++d) {
      if (l == 0) {
        layer.tangent[d] = (slope.colwise() * W.col(d).array()).matrix();
      } else {
        layer.tangent[d] = (slope * (W * pass.layers[l - 1].tangent[d]).array()).matrix();
      }
    }
  }
}

}  // namespace

ForwardPass forward_hidden(const Network& net, const MatrixX& points) {
  if (!net.finite()) throw DivergenceError("diverged parameters");
  const int n = net.arch.input_dim;
  if (points.rows() != n) throw std::invalid_argument("point dimension mismatch");
  const Eigen::Index N = points.cols();
  if (N <= kChunk) {
    ForwardPass pass;
    forward_block(net, points, pass);
    return pass;
  }
  ForwardPass pass;
  const int hidden = num_hidden(net);
  pass.layers.resize(hidden);
  for (int l = 0; l < hidden; ++l) {
    pass.layers[l].h.resize(net.weights[l].rows(), N);
    pass.layers[l].tangent.assign(n, MatrixX(net.weights[l].rows(), N));
  }
  ForwardPass block;
  for (Eigen::Index c0 = 0; c0 < N; c0 += kChunk) {
    const Eigen::Index len = std::min(kChunk, N - c0);
    forward_block(net, points.middleCols(c0, len), block);
    for (int l = 0; l < hidden; ++l) {
      pass.layers[l].h.middleCols(c0, len) = block.layers[l].h;
      for (int d = 0; d < n; ++d) pass.layers[l].tangent[d].middleCols(c0, len) = block.layers[l].tangent[d];
    }
  }
  return pass;
}

FeatureEval raw_features(const ForwardPass& pass) {
  const auto& last = pass.layers.back();
  return {last.h, last.tangent};
}

FeatureEval apply_cutoff(const FeatureEval& raw, const CutoffValues& chi) {
  FeatureEval out;
  const auto chi_row = chi.value.transpose().array();
  out.value = (raw.value.array().rowwise() * chi_row).matrix();
  out.grad.resize(raw.grad.size());
  for (std::size_t d = 0; d < raw.grad.size(); ++d) {
    out.grad[d] = (raw.grad[d].array().rowwise() * chi_row +
                   raw.value.array().rowwise() * chi.gradient.row(d).array())
                      .matrix();
  }
  return out;
}

FeatureEval hidden_features(const Network& net, const Cutoff& cutoff, const MatrixX& points) {
  return apply_cutoff(raw_features(forward_hidden(net, points)), evaluate_cutoff(cutoff, points));
}

FieldEval combine(const FeatureEval& cut_features, const VectorX& output_weights) {
  FieldEval out;
  out.u = cut_features.value.transpose() * output_weights;
  out.grad.resize(static_cast<Eigen::Index>(cut_features.grad.size()), cut_features.value.cols());
  for (std::size_t d = 0; d < cut_features.grad.size(); ++d) {
    out.grad.row(static_cast<Eigen::Index>(d)) = output_weights.transpose() * cut_features.grad[d];
  }
  return out;
}

FieldEval forward_with_grad(const Network& net, const Cutoff& cutoff, const MatrixX& points) {
  return combine(hidden_features(net, cutoff, points), net.output_weights());
}

namespace {

void backward_block(const Network& net, const MatrixX& points, const ForwardPass& pass, const MatrixX& h_bar_last,
                    const std::vector<MatrixX>& tangent_bar_last, std::vector<MatrixX>& w_bar,
                    std::vector<VectorX>& b_bar) {
  const int n = net.arch.input_dim;
  const int hidden = num_hidden(net);

  MatrixX h_bar = h_bar_last;
  std::vector<MatrixX> t_bar = tangent_bar_last;
  for (int l = hidden - 1; l >= 0; --l) {
    const MatrixX& W = net.weights[l];
    const auto& layer = pass.layers[l];
    const ArrayXX slope = 1.0 - layer.h.array().square();
    ArrayXX slope_bar = ArrayXX::Zero(layer.h.rows(), layer.h.cols());
    std::vector<MatrixX> pre_bar(n);
    for (int d = 0; d < n; ++d) {
      // Pre-activation tangent P = W T_prev (or the column W(:,d) on layer 0).
      if (l == 0) {
        slope_bar += t_bar[d].array().colwise() * W.col(d).array();
      } else {
        slope_bar += t_bar[d].array() * (W * pass.layers[l - 1].tangent[d]).array();
      }
      pre_bar[d] = (t_bar[d].array() * slope).matrix();
    }
    const MatrixX z_bar = ((h_bar.array() - 2.0 * layer.h.array() * slope_bar) * slope).matrix();

    const MatrixX& prev = l == 0 ? points : pass.layers[l - 1].h;
    w_bar[l].noalias() += z_bar * prev.transpose();
    b_bar[l] += z_bar.rowwise().sum();
    for (int d = 0; d < n; ++d) {
      if (l == 0) {
        w_bar[l].col(d) += pre_bar[d].rowwise().sum();
      } else {
        w_bar[l].noalias() += pre_bar[d] * pass.layers[l - 1].tangent[d].transpose();
      }
    }
    if (l > 0) {
      h_bar = W.transpose() * z_bar;
      for (int d = 0; d < n; ++d) t_bar[d] = W.transpose() * pre_bar[d];
    }
  }
}

}  // namespace

VectorX backward_hidden(const Network& net, const MatrixX& points, const ForwardPass& pass,
                        const MatrixX& h_bar_last, const std::vector<MatrixX>& tangent_bar_last) {
  const int n = net.arch.input_dim;
  const int hidden = num_hidden(net);
  std::vector<MatrixX> w_bar(hidden);
  std::vector<VectorX> b_bar(hidden);
  for (int l = 0; l < hidden; ++l) {
    w_bar[l] = MatrixX::Zero(net.weights[l].rows(), net.weights[l].cols());
    b_bar[l] = VectorX::Zero(net.weights[l].rows());
  }
  const Eigen::Index N = points.cols();
  if (N <= kChunk) {
    backward_block(net, points, pass, h_bar_last, tangent_bar_last, w_bar, b_bar);
  } else {
    ForwardPass block;
    block.layers.resize(hidden);
    std::vector<MatrixX> t_bar(n);
    for (Eigen::Index c0 = 0; c0 < N; c0 += kChunk) {
      const Eigen::Index len = std::min(kChunk, N - c0);
      for (int l = 0; l < hidden; ++l) {
        block.layers[l].h = pass.layers[l].h.middleCols(c0, len);
        block.layers[l].tangent.resize(n);
        for (int d = 0; d < n; ++d) block.layers[l].tangent[d] = pass.layers[l].tangent[d].middleCols(c0, len);
      }
      for (int d = 0; d < n; ++d) t_bar[d] = tangent_bar_last[d].middleCols(c0, len);
      backward_block(net, points.middleCols(c0, len), block, h_bar_last.middleCols(c0, len), t_bar, w_bar, b_bar);
    }
  }

  VectorX grad(net.trainable_count());
  Eigen::Index pos = 0;
  for (int l = 0; l < hidden; ++l) {
    grad.segment(pos, w_bar[l].size()) = Eigen::Map<const VectorX>(w_bar[l].data(), w_bar[l].size());
    pos += w_bar[l].size();
    grad.segment(pos, b_bar[l].size()) = b_bar[l];
    pos += b_bar[l].size();
  }
  return grad;
}

HiddenAdjoint pull_back_output(const VectorX& output_weights, const CutoffValues& chi,
                               const VectorX& u_bar, const MatrixX& grad_bar) {
  const Eigen::Index n = grad_bar.rows();
  // u_tilde_bar = chi u_bar + grad_bar . grad chi ; grad u_tilde_bar = chi grad_bar
  VectorX ut_bar = chi.value.cwiseProduct(u_bar);
  ut_bar += (grad_bar.array() * chi.gradient.array()).colwise().sum().transpose().matrix();
  HiddenAdjoint adj;
  adj.h_bar = output_weights * ut_bar.transpose();
  adj.tangent_bar.resize(n);
  for (Eigen::Index d = 0; d < n; ++d) {
    adj.tangent_bar[d] =
        output_weights * (grad_bar.row(d).array() * chi.value.transpose().array()).matrix();
  }
  return adj;
}

void save_params(const Network& net, const std::string& prefix) {
  const VectorX flat = net.flatten();
  {
    std::ofstream bin(prefix + ".bin", std::ios::binary);
    if (!bin) throw std::runtime_error("cannot write " + prefix + ".bin");
    bin.write(reinterpret_cast<const char*>(flat.data()),
              static_cast<std::streamsize>(flat.size() * sizeof(double)));
  }
  nlohmann::ordered_json header;
  header["format"] = "float64-le";
  header["input_dim"] = net.arch.input_dim;
  header["hidden"] = net.arch.hidden;
  header["count"] = flat.size();
  nlohmann::ordered_json layout = nlohmann::ordered_json::array();
  Eigen::Index pos = 0;
  for (int j = 0; j < net.num_layers(); ++j) {
    const auto& W = net.weights[j];
    layout.push_back({{"name", "W" + std::to_string(j + 1)},
                      {"offset", pos},
                      {"rows", W.rows()},
                      {"cols", W.cols()},
                      {"order", "column-major"}});
    pos += W.size();
    if (j < static_cast<int>(net.biases.size())) {
      layout.push_back({{"name", "b" + std::to_string(j + 1)},
                        {"offset", pos},
                        {"rows", net.biases[j].size()},
                        {"cols", 1}});
      pos += net.biases[j].size();
    }
  }
  header["layout"] = layout;
  std::ofstream js(prefix + ".json");
  if (!js) throw std::runtime_error("cannot write " + prefix + ".json");
  js << header.dump(2) << '\n';
}

Network load_params(const std::string& prefix) {
  std::ifstream js(prefix + ".json");
  if (!js) throw std::runtime_error("cannot read " + prefix + ".json");
  const auto header = nlohmann::json::parse(js);
  Architecture arch;
  arch.input_dim = header.at("input_dim").get<int>();
  arch.hidden = header.at("hidden").get<std::vector<int>>();
  Network net = Network::zeros(arch);
  VectorX flat(net.parameter_count());
  if (header.at("count").get<Eigen::Index>() != flat.size())
    throw std::runtime_error("parameter header does not match architecture");
  std::ifstream bin(prefix + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot read " + prefix + ".bin");
  bin.read(reinterpret_cast<char*>(flat.data()), static_cast<std::streamsize>(flat.size() * sizeof(double)));
  if (!bin) throw std::runtime_error("truncated parameter file");
  net.unflatten(flat);
  return net;
}

}  // namespace dfrdd
