#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cfel/types.hpp"

namespace cfel {

// Undirected connected graph over the m edge servers.
struct BackhaulGraph {
  int m = 0;
  std::vector<std::pair<int, int>> edges;  // i < j, sorted, unique

  static BackhaulGraph from_edges(int m, std::vector<std::pair<int, int>> edges);

  std::vector<int> degrees() const;
  std::vector<std::vector<int>> adjacency() const;
  bool has_edge(int i, int j) const;
  bool connected() const;

  // One "i j" pair per line, 0-indexed.
  std::string to_edge_list() const;
  static BackhaulGraph parse_edge_list(const std::string& text);
};

enum class GraphKind { ring, complete, torus2d, erdos_renyi };

GraphKind graph_kind_from_string(const std::string& s);
const char* to_string(GraphKind kind);

// Deterministic graph for (kind, m, seed). erdos_renyi redraws until
// connected; torus2d needs m = a*b with a, b >= 2.
BackhaulGraph build_graph(GraphKind kind, int m, std::uint64_t seed, double p_edge = 0.5);

// Symmetric doubly stochastic gossip matrix on a graph. Construction
// validates non-negativity, symmetry, stochasticity (1e-12), the sparsity
// pattern, and spectral gap < 1.
class MixingMatrix {
 public:
  static MixingMatrix metropolis(const BackhaulGraph& graph);
  // Uniform 1/(max_degree + 1) edge weights, for sensitivity comparisons.
  static MixingMatrix max_degree(const BackhaulGraph& graph);
  // Validates arbitrary entries against the graph (row-major m*m).
  static MixingMatrix from_entries(const BackhaulGraph& graph, std::vector<double> entries);

  int size() const { return m_; }
  double at(int i, int j) const { return entries_[static_cast<std::size_t>(i) * m_ + j]; }
  const std::vector<double>& entries() const { return entries_; }
  double zeta() const { return zeta_; }

  // H^pi by repeated multiplication; pi = 0 gives the identity.
  std::vector<double> power(int pi) const;

 private:
  MixingMatrix(const BackhaulGraph& graph, std::vector<double> entries);
  int m_ = 0;
  std::vector<double> entries_;
  double zeta_ = 0.0;
};

// All eigenvalues of a symmetric matrix (row-major m*m), descending, by
// cyclic Jacobi rotations. Optionally returns the eigenvectors as columns.
std::vector<double> symmetric_eigenvalues(const std::vector<double>& a, int m,
                                          std::vector<double>* eigenvectors = nullptr);

// Second-largest eigenvalue magnitude, max{|l2|, |lm|}. Throws
// InvariantError if the matrix is asymmetric beyond 1e-12.
double spectral_zeta(const std::vector<double>& h, int m);

// Omega constants of the convergence bound; requires 0 <= zeta < 1, pi >= 1.
std::pair<double, double> omega_constants(double zeta, int pi);

std::vector<double> matrix_power(const std::vector<double>& a, int m, int pi);

}  // namespace cfel
