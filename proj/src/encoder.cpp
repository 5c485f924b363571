#include "anomale/encoder.hpp"

#include "anomale/random.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace anomale {

void EncoderConfig::validate() const {
  if (depth < 1) throw std::invalid_argument("encoder depth must be >= 1");
  if (hidden_dim <= 0) throw std::invalid_argument("encoder hidden_dim must be > 0");
  if (input_dim <= 0) throw std::invalid_argument("encoder input_dim must be > 0");
}

int EncoderConfig::layer_input_dim(int k) const {
  const int prev = k == 1 ? input_dim : hidden_dim;
  return 2 * prev + input_dim;
}

EncoderParams init_encoder_params(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(mix_seed(seed, 0xE1));
  EncoderParams params;
  for (int k = 1; k <= config.depth; ++k) {
    const int fan_in = config.layer_input_dim(k);
    const int fan_out = config.hidden_dim;
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix w(fan_in, fan_out);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-bound, bound);
    params.weights.push_back(std::move(w));
  }
  return params;
}

namespace {

// Mean over in-edges of [h_u | e_uv] for every node, edge index ascending.
Matrix aggregate_all(const FlowGraph& graph, const Matrix& h_prev) {
  const auto p = h_prev.cols();
  const auto d = graph.edge_features().cols();
  Matrix agg = Matrix::Zero(static_cast<Eigen::Index>(graph.num_nodes()), p + d);
  for (NodeIndex v = 0; v < graph.num_nodes(); ++v) {
    const auto in = graph.in_neighbors(v);
    if (in.empty()) continue;
    auto row = agg.row(v);
    for (const auto& nb : in) {
      row.head(p) += h_prev.row(nb.node);
      row.tail(d) += graph.edge_features().row(graph.edges()[nb.edge].feature_row);
    }
    row /= static_cast<double>(in.size());
  }
  return agg;
}

void check_inputs(const FlowGraph& graph, const EncoderParams& params, const EncoderConfig& config) {
  config.validate();
  if (static_cast<int>(graph.feature_dim()) != config.input_dim) {
    throw ShapeError("encoder: graph edge features have width " + std::to_string(graph.feature_dim()) +
                     ", config expects " + std::to_string(config.input_dim));
  }
  if (static_cast<int>(params.weights.size()) != config.depth) {
    throw ShapeError("encoder: expected " + std::to_string(config.depth) + " weight matrices");
  }
  for (int k = 1; k <= config.depth; ++k) {
    const auto& w = params.weights[k - 1];
    if (w.rows() != config.layer_input_dim(k) || w.cols() != config.hidden_dim) {
      throw ShapeError("encoder: W" + std::to_string(k) + " is " + detail::shape_str(w.rows(), w.cols()) +
                       ", expected " + detail::shape_str(config.layer_input_dim(k), config.hidden_dim));
    }
  }
}

}  // namespace

RowVector aggregate_neighborhood(const FlowGraph& graph, NodeIndex v, const Matrix& h_prev) {
  if (static_cast<std::size_t>(h_prev.rows()) != graph.num_nodes()) {
    throw ShapeError("aggregate_neighborhood: need one embedding row per node");
  }
  const auto p = h_prev.cols();
  const auto d = graph.edge_features().cols();
  RowVector out = RowVector::Zero(p + d);
  const auto in = graph.in_neighbors(v);
  if (in.empty()) return out;
  for (const auto& nb : in) {
    out.head(p) += h_prev.row(nb.node);
    out.tail(d) += graph.edge_features().row(graph.edges()[nb.edge].feature_row);
  }
  return out / static_cast<double>(in.size());
}

EncoderTrace encode_nodes_traced(const FlowGraph& graph, const EncoderParams& params, const EncoderConfig& config) {
  check_inputs(graph, params, config);
  EncoderTrace trace;
  Matrix h = graph.node_features();
  for (int k = 1; k <= config.depth; ++k) {
    Matrix input = concat_cols(h, aggregate_all(graph, h));
    Matrix pre = matmul(input, params.weights[k - 1]);
    h = relu(pre);
    trace.layer_inputs.push_back(std::move(input));
    trace.preactivations.push_back(std::move(pre));
  }
  trace.node_embeddings = std::move(h);
  return trace;
}

Matrix encode_nodes(const FlowGraph& graph, const EncoderParams& params, const EncoderConfig& config) {
  return encode_nodes_traced(graph, params, config).node_embeddings;
}

Matrix encode_edges(const FlowGraph& graph, const Matrix& node_embeddings) {
  if (static_cast<std::size_t>(node_embeddings.rows()) != graph.num_nodes()) {
    throw ShapeError("encode_edges: need one embedding row per node");
  }
  const auto h = node_embeddings.cols();
  Matrix out(static_cast<Eigen::Index>(graph.num_edges()), 2 * h);
  for (std::size_t i = 0; i < graph.num_edges(); ++i) {
    const auto& e = graph.edges()[i];
    const auto r = static_cast<Eigen::Index>(i);
    out.row(r).head(h) = node_embeddings.row(e.src);
    out.row(r).tail(h) = node_embeddings.row(e.dst);
  }
  if (out.cols() != 2 * node_embeddings.cols()) {
    throw ShapeError("encode_edges: edge embedding width must be twice the node width");
  }
  return out;
}

std::vector<Matrix> encoder_backward(const FlowGraph& graph, const EncoderParams& params, const EncoderTrace& trace,
                                     const Matrix& grad_node_embeddings) {
  const auto depth = params.weights.size();
  if (trace.layer_inputs.size() != depth || trace.preactivations.size() != depth) {
    throw std::logic_error("encoder_backward: trace does not match parameters");
  }
  std::vector<Matrix> grads(depth);
  Matrix grad_h = grad_node_embeddings;
  for (std::size_t layer = depth; layer-- > 0;) {
    const Matrix grad_pre = grad_h.cwiseProduct((trace.preactivations[layer].array() > 0.0).cast<double>().matrix());
    grads[layer] = trace.layer_inputs[layer].transpose() * grad_pre;
    if (layer == 0) break;  // H^0 is the constant all-ones input

    const Matrix grad_input = grad_pre * params.weights[layer].transpose();
    const auto p = params.weights[layer - 1].cols();
    Matrix grad_prev = grad_input.leftCols(p);
    // Mean aggregation: each in-edge uv of v passes dA[v] / deg(v) to h_u.
    for (NodeIndex v = 0; v < graph.num_nodes(); ++v) {
      const auto in = graph.in_neighbors(v);
      if (in.empty()) continue;
      const RowVector share = grad_input.row(v).segment(p, p) / static_cast<double>(in.size());
      for (const auto& nb : in) grad_prev.row(nb.node) += share;
    }
    grad_h = std::move(grad_prev);
  }
  return grads;
}

}  // namespace anomale
