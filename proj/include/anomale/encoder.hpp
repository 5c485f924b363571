#pragma once

#include "anomale/flow_graph.hpp"
#include "anomale/linalg.hpp"

#include <cstdint>
#include <vector>

namespace anomale {

/// E-GraphSAGE encoder shape. Mean aggregation and ReLU are the only supported
/// choices, so they are not configurable.
struct EncoderConfig {
  int depth = 1;
  int hidden_dim = 128;
  int input_dim = 0;  // d_e, width of the edge features

  void validate() const;
  /// Width of CONCAT(h_v^{k-1}, h_N(v)^k) for layer k (1-based): 2*p + d_e,
  /// where p is the node width entering the layer (d_e for k = 1).
  int layer_input_dim(int k) const;
  int edge_embedding_dim() const { return 2 * hidden_dim; }
};

struct EncoderParams {
  std::vector<Matrix> weights;  // layer k: [layer_input_dim(k) x hidden_dim]
};

/// Glorot-uniform initialisation, deterministic in seed.
EncoderParams init_encoder_params(const EncoderConfig& config, std::uint64_t seed);

/// Mean of CONCAT(h_u, e_uv) over incoming edges uv of v; zero when v has none.
RowVector aggregate_neighborhood(const FlowGraph& graph, NodeIndex v, const Matrix& h_prev);

/// Per-layer intermediates kept for the backward pass.
struct EncoderTrace {
  std::vector<Matrix> layer_inputs;    // CONCAT(H^{k-1}, A^k), [N x layer_input_dim(k)]
  std::vector<Matrix> preactivations;  // layer_inputs[k] * W^k
  Matrix node_embeddings;              // H^K
};

Matrix encode_nodes(const FlowGraph& graph, const EncoderParams& params, const EncoderConfig& config);
EncoderTrace encode_nodes_traced(const FlowGraph& graph, const EncoderParams& params, const EncoderConfig& config);

/// Row for directed edge uv = CONCAT(z_u, z_v).
Matrix encode_edges(const FlowGraph& graph, const Matrix& node_embeddings);

/// Gradients of a scalar w.r.t. every W^k, given d(scalar)/d(H^K).
std::vector<Matrix> encoder_backward(const FlowGraph& graph, const EncoderParams& params, const EncoderTrace& trace,
                                     const Matrix& grad_node_embeddings);

}  // namespace anomale
