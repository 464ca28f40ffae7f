#pragma once

// Graph algebra for edge-based formation control: incidence matrices, edge and
// graph Laplacians, spanning-tree / co-tree partition and the spectral
// certificate that the edge controller relies on.
//
// Node and edge indices are zero-based in this API. The scenario file uses
// one-based node indices; conversion happens in the scenario loader.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace edgeform {

enum class Directedness { Directed, Undirected };

/// Edge (tail, head): the head agent receives information from the tail agent.
struct Edge {
  int tail = 0;
  int head = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Validated node/edge structure. Construction throws std::invalid_argument on
/// self-loops, duplicate edges or out-of-range node indices.
class Topology {
 public:
  Topology(int num_nodes, std::vector<Edge> edges, Directedness directedness);

  int num_nodes() const { return num_nodes_; }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(int k) const { return edges_.at(static_cast<std::size_t>(k)); }
  Directedness directedness() const { return directedness_; }
  bool directed() const { return directedness_ == Directedness::Directed; }

  friend bool operator==(const Topology&, const Topology&) = default;

 private:
  int num_nodes_;
  std::vector<Edge> edges_;
  Directedness directedness_;
};

/// Integer incidence matrices (N x m). E = E_in + E_out.
struct IncidenceSet {
  Eigen::MatrixXi E;      // +1 at tail, -1 at head
  Eigen::MatrixXi E_in;   // -1 at head only
  Eigen::MatrixXi E_out;  // +1 at tail only
};

struct LaplacianSet {
  Eigen::MatrixXi edge_laplacian;   // m x m
  Eigen::MatrixXi graph_laplacian;  // N x N
  Eigen::MatrixXd edge_laplacian_sym;
};

/// Spanning tree / co-tree split of the edge set with E[:, perm] = E_t * R.
struct TreePartition {
  std::vector<int> edge_permutation;  // tree edges first, then co-tree edges
  std::vector<int> tree_edges;
  std::vector<int> cotree_edges;
  Eigen::MatrixXd E_t;  // N x (N-1)
  Eigen::MatrixXd E_c;  // N x (m-N+1)
  Eigen::MatrixXd T;    // (N-1) x (m-N+1)
  Eigen::MatrixXd R;    // (N-1) x m, columns in permuted order

  /// R with its columns returned to the input edge order, so E = E_t * R_input.
  Eigen::MatrixXd r_input_order() const;
};

enum class TopologyClass { DirectedSpanningTree, DirectedCycle, ConnectedUndirected, Unsupported };

std::string to_string(TopologyClass cls);

struct SpectralReport {
  TopologyClass topology_class = TopologyClass::Unsupported;
  std::string matrix;  // "L_e_sym" or "E_t^T E_t"
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  bool pass = false;
};

IncidenceSet build_incidence(const Topology& topology);

/// Throws std::invalid_argument on shape mismatch.
LaplacianSet build_laplacians(const IncidenceSet& inc, Directedness directedness);

/// Graph Laplacian from the adjacency matrix, L = Delta - A, where a_ij = 1 when
/// agent i receives from agent j (both directions for undirected graphs).
Eigen::MatrixXi adjacency_laplacian(const Topology& topology);

bool connected_as_undirected(const Topology& topology);

TopologyClass classify_topology(const Topology& topology);

/// Deterministic spanning tree: depth-first search from node 0 over the
/// undirected skeleton, scanning edges in input order. Throws
/// std::invalid_argument when the graph is disconnected.
TreePartition tree_partition(const Topology& topology, const IncidenceSet& inc);

/// Smallest/largest eigenvalue of L_e_sym (spanning tree) or E_t^T E_t (cycle,
/// undirected). Throws std::invalid_argument for unsupported topologies.
SpectralReport lemma1_certificate(const Topology& topology);

/// Extreme eigenvalues of a symmetric matrix.
std::pair<double, double> symmetric_extreme_eigenvalues(const Eigen::MatrixXd& m);

/// Everything the controller needs about the graph, built once per scenario.
struct GraphModel {
  Topology topology;
  TopologyClass topology_class;
  IncidenceSet incidence;
  LaplacianSet laplacians;
  TreePartition tree;
  Eigen::MatrixXd E;       // double copies used in the control loop
  Eigen::MatrixXd E_in;
  Eigen::MatrixXd R_input;  // R in input edge order

  /// Matrix multiplying W z_1 in the first virtual control: E_in for directed
  /// topologies, E for undirected ones.
  const Eigen::MatrixXd& feedback_incidence() const;

  /// Throws std::invalid_argument if the topology is Unsupported.
  static GraphModel build(const Topology& topology);
};

}  // namespace edgeform
