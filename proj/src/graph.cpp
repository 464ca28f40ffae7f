#include "edgeform/graph.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>
#include <utility>

namespace edgeform {

namespace {

constexpr double kLemmaThreshold = 1e-9;

std::vector<std::vector<std::pair<int, int>>> undirected_adjacency(const Topology& topology) {
  // (neighbour, edge index) per node, in edge input order
  std::vector<std::vector<std::pair<int, int>>> adj(static_cast<std::size_t>(topology.num_nodes()));
  for (int k = 0; k < topology.num_edges(); ++k) {
    const Edge& e = topology.edge(k);
    adj[static_cast<std::size_t>(e.tail)].emplace_back(e.head, k);
    adj[static_cast<std::size_t>(e.head)].emplace_back(e.tail, k);
  }
  return adj;
}

}  // namespace

Topology::Topology(int num_nodes, std::vector<Edge> edges, Directedness directedness)
    : num_nodes_(num_nodes), edges_(std::move(edges)), directedness_(directedness) {
  if (num_nodes_ <= 0) {
    throw std::invalid_argument("topology must have at least one node");
  }
  std::set<std::pair<int, int>> seen;
  for (std::size_t k = 0; k < edges_.size(); ++k) {
    const Edge& e = edges_[k];
    if (e.tail < 0 || e.tail >= num_nodes_ || e.head < 0 || e.head >= num_nodes_) {
      throw std::invalid_argument("edge " + std::to_string(k + 1) + " references a node outside [1, " +
                                  std::to_string(num_nodes_) + "]");
    }
    if (e.tail == e.head) {
      throw std::invalid_argument("edge " + std::to_string(k + 1) + " is a self-loop");
    }
    std::pair<int, int> key{e.tail, e.head};
    if (directedness_ == Directedness::Undirected && key.first > key.second) {
      std::swap(key.first, key.second);
    }
    if (!seen.insert(key).second) {
      throw std::invalid_argument("edge " + std::to_string(k + 1) + " duplicates an earlier edge");
    }
  }
}

std::string to_string(TopologyClass cls) {
  switch (cls) {
    case TopologyClass::DirectedSpanningTree: return "directed_spanning_tree";
    case TopologyClass::DirectedCycle: return "directed_cycle";
    case TopologyClass::ConnectedUndirected: return "connected_undirected";
    case TopologyClass::Unsupported: return "unsupported";
  }
  return "unsupported";
}

Eigen::MatrixXd TreePartition::r_input_order() const {
  Eigen::MatrixXd out(R.rows(), R.cols());
  for (int j = 0; j < static_cast<int>(edge_permutation.size()); ++j) {
    out.col(edge_permutation[static_cast<std::size_t>(j)]) = R.col(j);
  }
  return out;
}

IncidenceSet build_incidence(const Topology& topology) {
  const int n = topology.num_nodes();
  const int m = topology.num_edges();
  IncidenceSet inc;
  inc.E_in = Eigen::MatrixXi::Zero(n, m);
  inc.E_out = Eigen::MatrixXi::Zero(n, m);
  for (int k = 0; k < m; ++k) {
    const Edge& e = topology.edge(k);
    inc.E_out(e.tail, k) = 1;
    inc.E_in(e.head, k) = -1;
  }
  inc.E = inc.E_in + inc.E_out;
  return inc;
}

LaplacianSet build_laplacians(const IncidenceSet& inc, Directedness directedness) {
  if (inc.E.rows() != inc.E_in.rows() || inc.E.cols() != inc.E_in.cols()) {
    throw std::invalid_argument("incidence and in-incidence matrices differ in shape");
  }
  LaplacianSet lap;
  if (directedness == Directedness::Directed) {
    lap.edge_laplacian = inc.E.transpose() * inc.E_in;
    lap.graph_laplacian = inc.E_in * inc.E.transpose();
  } else {
    lap.edge_laplacian = inc.E.transpose() * inc.E;
    lap.graph_laplacian = inc.E * inc.E.transpose();
  }
  // symmetrised part of E^T E_in, computed in integers then halved exactly
  const Eigen::MatrixXi twice = inc.E.transpose() * inc.E_in + inc.E_in.transpose() * inc.E;
  lap.edge_laplacian_sym = twice.cast<double>() * 0.5;
  return lap;
}

Eigen::MatrixXi adjacency_laplacian(const Topology& topology) {
  const int n = topology.num_nodes();
  Eigen::MatrixXi adjacency = Eigen::MatrixXi::Zero(n, n);
  for (const Edge& e : topology.edges()) {
    adjacency(e.head, e.tail) = 1;
    if (!topology.directed()) {
      adjacency(e.tail, e.head) = 1;
    }
  }
  Eigen::MatrixXi degree = Eigen::MatrixXi::Zero(n, n);
  degree.diagonal() = adjacency.rowwise().sum();
  return degree - adjacency;
}

bool connected_as_undirected(const Topology& topology) {
  const auto adj = undirected_adjacency(topology);
  std::vector<bool> visited(adj.size(), false);
  std::vector<int> stack{0};
  visited[0] = true;
  int count = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (const auto& [w, k] : adj[static_cast<std::size_t>(v)]) {
      if (!visited[static_cast<std::size_t>(w)]) {
        visited[static_cast<std::size_t>(w)] = true;
        ++count;
        stack.push_back(w);
      }
    }
  }
  return count == topology.num_nodes();
}

TopologyClass classify_topology(const Topology& topology) {
  const int n = topology.num_nodes();
  const int m = topology.num_edges();
  if (m == 0 || !connected_as_undirected(topology)) {
    return TopologyClass::Unsupported;
  }
  if (!topology.directed()) {
    return TopologyClass::ConnectedUndirected;
  }
  std::vector<int> in_degree(static_cast<std::size_t>(n), 0);
  std::vector<int> out_degree(static_cast<std::size_t>(n), 0);
  for (const Edge& e : topology.edges()) {
    ++in_degree[static_cast<std::size_t>(e.head)];
    ++out_degree[static_cast<std::size_t>(e.tail)];
  }
  const bool in_at_most_one = std::all_of(in_degree.begin(), in_degree.end(), [](int d) { return d <= 1; });
  // A connected tree whose nodes have in-degree <= 1 has exactly one root and
  // every node reachable from it.
  if (m == n - 1 && in_at_most_one) {
    return TopologyClass::DirectedSpanningTree;
  }
  if (m == n) {
    const bool regular = std::all_of(in_degree.begin(), in_degree.end(), [](int d) { return d == 1; }) &&
                         std::all_of(out_degree.begin(), out_degree.end(), [](int d) { return d == 1; });
    // connected + in/out degree one everywhere means a single directed cycle
    if (regular) {
      return TopologyClass::DirectedCycle;
    }
  }
  return TopologyClass::Unsupported;
}

TreePartition tree_partition(const Topology& topology, const IncidenceSet& inc) {
  if (!connected_as_undirected(topology)) {
    throw std::invalid_argument("tree partition requires a connected graph");
  }
  const int n = topology.num_nodes();
  const int m = topology.num_edges();
  const auto adj = undirected_adjacency(topology);

  std::vector<bool> visited(static_cast<std::size_t>(n), false);
  std::vector<bool> in_tree(static_cast<std::size_t>(m), false);
  // iterative DFS that mirrors the recursive visit order
  std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
  visited[0] = true;
  while (!stack.empty()) {
    auto& [v, next] = stack.back();
    const auto& nbrs = adj[static_cast<std::size_t>(v)];
    if (next >= nbrs.size()) {
      stack.pop_back();
      continue;
    }
    const auto [w, k] = nbrs[next++];
    if (!visited[static_cast<std::size_t>(w)]) {
      visited[static_cast<std::size_t>(w)] = true;
      in_tree[static_cast<std::size_t>(k)] = true;
      stack.emplace_back(w, 0);
    }
  }

  TreePartition part;
  for (int k = 0; k < m; ++k) {
    (in_tree[static_cast<std::size_t>(k)] ? part.tree_edges : part.cotree_edges).push_back(k);
  }
  part.edge_permutation = part.tree_edges;
  part.edge_permutation.insert(part.edge_permutation.end(), part.cotree_edges.begin(), part.cotree_edges.end());

  const Eigen::MatrixXd E = inc.E.cast<double>();
  const int nt = static_cast<int>(part.tree_edges.size());
  const int nc = static_cast<int>(part.cotree_edges.size());
  part.E_t.resize(n, nt);
  part.E_c.resize(n, nc);
  for (int j = 0; j < nt; ++j) part.E_t.col(j) = E.col(part.tree_edges[static_cast<std::size_t>(j)]);
  for (int j = 0; j < nc; ++j) part.E_c.col(j) = E.col(part.cotree_edges[static_cast<std::size_t>(j)]);

  const Eigen::MatrixXd gram = part.E_t.transpose() * part.E_t;
  part.T = gram.ldlt().solve(part.E_t.transpose() * part.E_c);
  part.R.resize(nt, m);
  part.R.leftCols(nt).setIdentity();
  part.R.rightCols(nc) = part.T;
  return part;
}

std::pair<double, double> symmetric_extreme_eigenvalues(const Eigen::MatrixXd& m) {
  if (m.size() == 0) {
    return {0.0, 0.0};
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  const auto& ev = solver.eigenvalues();
  return {ev.minCoeff(), ev.maxCoeff()};
}

SpectralReport lemma1_certificate(const Topology& topology) {
  SpectralReport report;
  report.topology_class = classify_topology(topology);
  if (report.topology_class == TopologyClass::Unsupported) {
    throw std::invalid_argument("no spectral certificate for an unsupported topology");
  }
  const IncidenceSet inc = build_incidence(topology);
  Eigen::MatrixXd target;
  if (report.topology_class == TopologyClass::DirectedSpanningTree) {
    target = build_laplacians(inc, topology.directedness()).edge_laplacian_sym;
    report.matrix = "L_e_sym";
  } else {
    const TreePartition part = tree_partition(topology, inc);
    target = part.E_t.transpose() * part.E_t;
    report.matrix = "E_t^T E_t";
  }
  std::tie(report.lambda_min, report.lambda_max) = symmetric_extreme_eigenvalues(target);
  report.pass = report.lambda_min > kLemmaThreshold;
  return report;
}

const Eigen::MatrixXd& GraphModel::feedback_incidence() const {
  return topology.directed() ? E_in : E;
}

GraphModel GraphModel::build(const Topology& topology) {
  const TopologyClass cls = classify_topology(topology);
  if (cls == TopologyClass::Unsupported) {
    throw std::invalid_argument(
        "topology must be a directed spanning tree, a directed cycle or a connected undirected graph");
  }
  IncidenceSet inc = build_incidence(topology);
  LaplacianSet lap = build_laplacians(inc, topology.directedness());
  TreePartition part = tree_partition(topology, inc);
  GraphModel model{topology, cls, inc, std::move(lap), std::move(part), {}, {}, {}};
  model.E = model.incidence.E.cast<double>();
  model.E_in = model.incidence.E_in.cast<double>();
  model.R_input = model.tree.r_input_order();
  return model;
}

}  // namespace edgeform
