#pragma once

#include "anomale/flow_ingest.hpp"
#include "anomale/linalg.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace anomale {

using NodeIndex = std::uint32_t;
using EdgeIndex = std::uint32_t;

struct DirectedEdge {
  NodeIndex src;
  NodeIndex dst;
  EdgeIndex feature_row;
  std::uint32_t flow_id;

  bool operator==(const DirectedEdge&) const = default;
};

struct InNeighbor {
  NodeIndex node;
  EdgeIndex edge;

  bool operator==(const InNeighbor&) const = default;
};

/// Bidirectional flow multigraph. Flow i contributes edge 2i (src -> dst) and
/// edge 2i+1 (dst -> src); both carry the flow's feature row.
class FlowGraph {
 public:
  FlowGraph() = default;

  std::size_t num_nodes() const { return node_keys_.size(); }
  std::size_t num_edges() const { return edges_.size(); }
  std::size_t num_flows() const { return edges_.size() / 2; }
  std::size_t feature_dim() const { return static_cast<std::size_t>(edge_features_.cols()); }

  const std::vector<std::string>& node_keys() const { return node_keys_; }
  std::optional<NodeIndex> find_node(const std::string& key) const;
  const std::vector<DirectedEdge>& edges() const { return edges_; }

  /// [num_edges x d_e], row r belongs to the edge whose feature_row == r.
  const Matrix& edge_features() const { return edge_features_; }
  /// Constant all-ones [num_nodes x d_e].
  Matrix node_features() const;

  const std::optional<std::vector<FlowLabel>>& flow_labels() const { return flow_labels_; }

  /// Incoming edges of v, ascending edge index.
  std::span<const InNeighbor> in_neighbors(NodeIndex v) const;
  std::size_t in_degree(NodeIndex v) const;
  std::vector<std::size_t> out_degrees() const;

  /// Same topology with the edge-feature matrix replaced (row count must match).
  FlowGraph with_edge_features(Matrix features) const;

  friend FlowGraph build_graph(const FlowTable&, const Matrix&);
  friend FlowGraph build_graph_from_keys(const std::vector<std::pair<std::string, std::string>>&, const Matrix&,
                                         std::optional<std::vector<FlowLabel>>);

 private:
  void index_adjacency();

  std::vector<std::string> node_keys_;
  std::unordered_map<std::string, NodeIndex> node_index_;
  std::vector<DirectedEdge> edges_;
  Matrix edge_features_;
  std::optional<std::vector<FlowLabel>> flow_labels_;
  std::vector<std::size_t> in_offsets_;  // CSR over incoming edges
  std::vector<InNeighbor> in_list_;
};

/// Nodes are distinct IPs in first-seen order (src before dst per record).
/// features rows must align with table records.
FlowGraph build_graph(const FlowTable& table, const Matrix& features);

/// Variant for callers that already hold (src, dst) keys per flow.
FlowGraph build_graph_from_keys(const std::vector<std::pair<std::string, std::string>>& endpoints,
                                const Matrix& features,
                                std::optional<std::vector<FlowLabel>> labels = std::nullopt);

/// Debug dumps: "index,key" and "edge,src,dst,flow_id".
void write_node_table(std::ostream& os, const FlowGraph& g);
void write_edge_table(std::ostream& os, const FlowGraph& g);

}  // namespace anomale
