#include "anomale/flow_graph.hpp"

#include <ostream>
#include <stdexcept>

namespace anomale {

std::optional<NodeIndex> FlowGraph::find_node(const std::string& key) const {
  const auto it = node_index_.find(key);
  if (it == node_index_.end()) return std::nullopt;
  return it->second;
}

Matrix FlowGraph::node_features() const {
  return Matrix::Ones(static_cast<Eigen::Index>(num_nodes()), edge_features_.cols());
}

std::span<const InNeighbor> FlowGraph::in_neighbors(NodeIndex v) const {
  if (v >= num_nodes()) {
    throw std::out_of_range("in_neighbors: node " + std::to_string(v) + " out of range");
  }
  return {in_list_.data() + in_offsets_[v], in_offsets_[v + 1] - in_offsets_[v]};
}

std::size_t FlowGraph::in_degree(NodeIndex v) const { return in_neighbors(v).size(); }

std::vector<std::size_t> FlowGraph::out_degrees() const {
  std::vector<std::size_t> deg(num_nodes(), 0);
  for (const auto& e : edges_) ++deg[e.src];
  return deg;
}

FlowGraph FlowGraph::with_edge_features(Matrix features) const {
  if (features.rows() != edge_features_.rows()) {
    throw ShapeError("with_edge_features: expected " + std::to_string(edge_features_.rows()) + " rows");
  }
  FlowGraph g = *this;
  g.edge_features_ = std::move(features);
  return g;
}

void FlowGraph::index_adjacency() {
  in_offsets_.assign(num_nodes() + 1, 0);
  for (const auto& e : edges_) ++in_offsets_[e.dst + 1];
  for (std::size_t v = 0; v < num_nodes(); ++v) in_offsets_[v + 1] += in_offsets_[v];
  in_list_.resize(edges_.size());
  std::vector<std::size_t> cursor(in_offsets_.begin(), in_offsets_.end() - 1);
  // Edges are visited in ascending index, so each in-list is sorted.
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const auto& e = edges_[i];
    in_list_[cursor[e.dst]++] = {e.src, static_cast<EdgeIndex>(i)};
  }
}

FlowGraph build_graph_from_keys(const std::vector<std::pair<std::string, std::string>>& endpoints,
                                const Matrix& features, std::optional<std::vector<FlowLabel>> labels) {
  if (static_cast<std::size_t>(features.rows()) != endpoints.size()) {
    throw ShapeError("build_graph: " + std::to_string(endpoints.size()) + " flows but " +
                     std::to_string(features.rows()) + " feature rows");
  }
  if (labels && labels->size() != endpoints.size()) {
    throw ShapeError("build_graph: label count does not match flow count");
  }
  FlowGraph g;
  auto intern = [&g](const std::string& key) {
    const auto [it, inserted] = g.node_index_.emplace(key, static_cast<NodeIndex>(g.node_keys_.size()));
    if (inserted) g.node_keys_.push_back(key);
    return it->second;
  };
  const auto flows = endpoints.size();
  g.edges_.reserve(2 * flows);
  g.edge_features_.resize(static_cast<Eigen::Index>(2 * flows), features.cols());
  for (std::size_t i = 0; i < flows; ++i) {
    const NodeIndex u = intern(endpoints[i].first);
    const NodeIndex v = intern(endpoints[i].second);
    const auto fwd = static_cast<EdgeIndex>(2 * i);
    const auto rev = static_cast<EdgeIndex>(2 * i + 1);
    g.edges_.push_back({u, v, fwd, static_cast<std::uint32_t>(i)});
    g.edges_.push_back({v, u, rev, static_cast<std::uint32_t>(i)});
    g.edge_features_.row(fwd) = features.row(static_cast<Eigen::Index>(i));
    g.edge_features_.row(rev) = features.row(static_cast<Eigen::Index>(i));
  }
  g.flow_labels_ = std::move(labels);
  g.index_adjacency();
  return g;
}

FlowGraph build_graph(const FlowTable& table, const Matrix& features) {
  if (static_cast<std::size_t>(features.rows()) != table.records.size()) {
    throw ShapeError("build_graph: " + std::to_string(table.records.size()) + " records but " +
                     std::to_string(features.rows()) + " feature rows");
  }
  std::vector<std::pair<std::string, std::string>> endpoints;
  endpoints.reserve(table.records.size());
  for (const auto& r : table.records) endpoints.emplace_back(r.src_ip, r.dst_ip);
  std::optional<std::vector<FlowLabel>> labels;
  if (!table.records.empty() && table.labelled()) {
    labels.emplace();
    for (const auto& r : table.records) labels->push_back(*r.label);
  }
  return build_graph_from_keys(endpoints, features, std::move(labels));
}

void write_node_table(std::ostream& os, const FlowGraph& g) {
  os << "index,key\n";
  for (std::size_t i = 0; i < g.num_nodes(); ++i) os << i << ',' << g.node_keys()[i] << '\n';
}

void write_edge_table(std::ostream& os, const FlowGraph& g) {
  os << "edge,src,dst,flow_id\n";
  for (std::size_t i = 0; i < g.num_edges(); ++i) {
    const auto& e = g.edges()[i];
    os << i << ',' << e.src << ',' << e.dst << ',' << e.flow_id << '\n';
  }
}

}  // namespace anomale
