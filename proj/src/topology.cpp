#include "cfel/topology.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <sstream>

#include "cfel/rng.hpp"

namespace cfel {

BackhaulGraph BackhaulGraph::from_edges(int m, std::vector<std::pair<int, int>> edges) {
  if (m < 1) throw ConfigError("graph: need m >= 1");
  std::set<std::pair<int, int>> unique;
  for (auto [i, j] : edges) {
    if (i == j) throw ConfigError("graph: self-loop at node " + std::to_string(i));
    if (i < 0 || j < 0 || i >= m || j >= m) throw ConfigError("graph: node index out of range");
    unique.insert({std::min(i, j), std::max(i, j)});
  }
  BackhaulGraph g;
  g.m = m;
  g.edges.assign(unique.begin(), unique.end());
  if (!g.connected()) throw ConfigError("graph: not connected");
  return g;
}

std::vector<int> BackhaulGraph::degrees() const {
  std::vector<int> deg(static_cast<std::size_t>(m), 0);
  for (auto [i, j] : edges) {
    ++deg[static_cast<std::size_t>(i)];
    ++deg[static_cast<std::size_t>(j)];
  }
  return deg;
}

std::vector<std::vector<int>> BackhaulGraph::adjacency() const {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(m));
  for (auto [i, j] : edges) {
    adj[static_cast<std::size_t>(i)].push_back(j);
    adj[static_cast<std::size_t>(j)].push_back(i);
  }
  return adj;
}

bool BackhaulGraph::has_edge(int i, int j) const {
  auto key = std::make_pair(std::min(i, j), std::max(i, j));
  return std::binary_search(edges.begin(), edges.end(), key);
}

bool BackhaulGraph::connected() const {
  if (m == 1) return true;
  auto adj = adjacency();
  std::vector<bool> seen(static_cast<std::size_t>(m), false);
  std::deque<int> queue{0};
  seen[0] = true;
  int count = 1;
  while (!queue.empty()) {
    int v = queue.front();
    queue.pop_front();
    for (int w : adj[static_cast<std::size_t>(v)]) {
      if (!seen[static_cast<std::size_t>(w)]) {
        seen[static_cast<std::size_t>(w)] = true;
        ++count;
        queue.push_back(w);
      }
    }
  }
  return count == m;
}

std::string BackhaulGraph::to_edge_list() const {
  std::ostringstream out;
  out << "# m " << m << "\n";
  for (auto [i, j] : edges) out << i << " " << j << "\n";
  return out.str();
}

BackhaulGraph BackhaulGraph::parse_edge_list(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int m = -1;
  std::vector<std::pair<int, int>> edges;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream header(line.substr(1));
      std::string word;
      if (header >> word && word == "m") header >> m;
      continue;
    }
    std::istringstream row(line);
    int i = -1, j = -1;
    if (!(row >> i >> j)) throw FormatError("edge list: bad line: " + line);
    edges.emplace_back(i, j);
    m = std::max({m, i + 1, j + 1});
  }
  if (m < 1) throw FormatError("edge list: no nodes");
  return from_edges(m, std::move(edges));
}

GraphKind graph_kind_from_string(const std::string& s) {
  if (s == "ring") return GraphKind::ring;
  if (s == "complete") return GraphKind::complete;
  if (s == "torus2d") return GraphKind::torus2d;
  if (s == "erdos_renyi") return GraphKind::erdos_renyi;
  throw ConfigError("unknown graph kind: " + s);
}

const char* to_string(GraphKind kind) {
  switch (kind) {
    case GraphKind::ring: return "ring";
    case GraphKind::complete: return "complete";
    case GraphKind::torus2d: return "torus2d";
    case GraphKind::erdos_renyi: return "erdos_renyi";
  }
  return "?";
}

BackhaulGraph build_graph(GraphKind kind, int m, std::uint64_t seed, double p_edge) {
  if (m < 1) throw ConfigError("graph: need m >= 1");
  std::vector<std::pair<int, int>> edges;
  switch (kind) {
    case GraphKind::ring: {
      for (int i = 0; i + 1 < m; ++i) edges.emplace_back(i, i + 1);
      if (m > 2) edges.emplace_back(0, m - 1);
      return BackhaulGraph::from_edges(m, std::move(edges));
    }
    case GraphKind::complete: {
      for (int i = 0; i < m; ++i) {
        for (int j = i + 1; j < m; ++j) edges.emplace_back(i, j);
      }
      return BackhaulGraph::from_edges(m, std::move(edges));
    }
    case GraphKind::torus2d: {
      // Largest factor a <= sqrt(m) with a >= 2 and m/a >= 2.
      int a = 0;
      for (int cand = static_cast<int>(std::sqrt(static_cast<double>(m))); cand >= 2; --cand) {
        if (m % cand == 0 && m / cand >= 2) {
          a = cand;
          break;
        }
      }
      if (a == 0) {
        throw ConfigError("torus2d requires m = a*b with a, b >= 2 (got m = " +
                          std::to_string(m) + ")");
      }
      int b = m / a;
      auto id = [b](int r, int c) { return r * b + c; };
      for (int r = 0; r < a; ++r) {
        for (int c = 0; c < b; ++c) {
          edges.emplace_back(id(r, c), id(r, (c + 1) % b));
          edges.emplace_back(id(r, c), id((r + 1) % a, c));
        }
      }
      return BackhaulGraph::from_edges(m, std::move(edges));
    }
    case GraphKind::erdos_renyi: {
      if (p_edge <= 0.0 || p_edge > 1.0) throw ConfigError("erdos_renyi: p_edge in (0, 1]");
      const int max_attempts = 10000;
      for (int attempt = 0; attempt < max_attempts; ++attempt) {
        StreamRng rng(seed, rng_domain::stream(rng_domain::kGraph, static_cast<std::uint64_t>(m)),
                      static_cast<std::uint64_t>(attempt));
        edges.clear();
        for (int i = 0; i < m; ++i) {
          for (int j = i + 1; j < m; ++j) {
            if (rng.next_unit() < p_edge) edges.emplace_back(i, j);
          }
        }
        BackhaulGraph g;
        g.m = m;
        g.edges = edges;
        if (g.connected()) return g;
      }
      throw ConfigError("erdos_renyi: no connected draw; raise p_edge");
    }
  }
  throw ConfigError("unreachable graph kind");
}

// ------------------------------------------------------------------- mixing

MixingMatrix::MixingMatrix(const BackhaulGraph& graph, std::vector<double> entries)
    : m_(graph.m), entries_(std::move(entries)) {
  const double tol = 1e-12;
  if (entries_.size() != static_cast<std::size_t>(m_) * m_) {
    throw InvariantError("mixing matrix: wrong entry count");
  }
  for (int i = 0; i < m_; ++i) {
    double row_sum = 0.0;
    double col_sum = 0.0;
    for (int j = 0; j < m_; ++j) {
      double v = at(i, j);
      if (v < 0.0) throw InvariantError("mixing matrix: negative weight");
      if (std::fabs(v - at(j, i)) > tol) throw InvariantError("mixing matrix: not symmetric");
      if (i != j) {
        if (graph.has_edge(i, j)) {
          if (v <= 0.0) throw InvariantError("mixing matrix: zero weight on graph edge");
        } else if (v != 0.0) {
          throw InvariantError("mixing matrix: nonzero weight off the graph");
        }
      }
      row_sum += v;
      col_sum += at(j, i);
    }
    if (std::fabs(row_sum - 1.0) > tol || std::fabs(col_sum - 1.0) > tol) {
      throw InvariantError("mixing matrix: not doubly stochastic (row " + std::to_string(i) +
                           " sums to " + std::to_string(row_sum) + ")");
    }
  }
  zeta_ = spectral_zeta(entries_, m_);
  if (!(zeta_ < 1.0)) throw InvariantError("mixing matrix: spectral gap is zero (zeta >= 1)");
}

MixingMatrix MixingMatrix::metropolis(const BackhaulGraph& graph) {
  int m = graph.m;
  auto deg = graph.degrees();
  std::vector<double> h(static_cast<std::size_t>(m) * m, 0.0);
  for (auto [i, j] : graph.edges) {
    double w = 1.0 / (1.0 + std::max(deg[static_cast<std::size_t>(i)],
                                     deg[static_cast<std::size_t>(j)]));
    h[static_cast<std::size_t>(i) * m + j] = w;
    h[static_cast<std::size_t>(j) * m + i] = w;
  }
  for (int i = 0; i < m; ++i) {
    double off = 0.0;
    for (int j = 0; j < m; ++j) {
      if (j != i) off += h[static_cast<std::size_t>(i) * m + j];
    }
    h[static_cast<std::size_t>(i) * m + i] = 1.0 - off;
  }
  return MixingMatrix(graph, std::move(h));
}

MixingMatrix MixingMatrix::max_degree(const BackhaulGraph& graph) {
  int m = graph.m;
  auto deg = graph.degrees();
  int max_deg = m == 1 ? 0 : *std::max_element(deg.begin(), deg.end());
  double w = 1.0 / (max_deg + 1.0);
  std::vector<double> h(static_cast<std::size_t>(m) * m, 0.0);
  for (auto [i, j] : graph.edges) {
    h[static_cast<std::size_t>(i) * m + j] = w;
    h[static_cast<std::size_t>(j) * m + i] = w;
  }
  for (int i = 0; i < m; ++i) {
    h[static_cast<std::size_t>(i) * m + i] = 1.0 - deg[static_cast<std::size_t>(i)] * w;
  }
  return MixingMatrix(graph, std::move(h));
}

MixingMatrix MixingMatrix::from_entries(const BackhaulGraph& graph, std::vector<double> entries) {
  return MixingMatrix(graph, std::move(entries));
}

std::vector<double> MixingMatrix::power(int pi) const { return matrix_power(entries_, m_, pi); }

std::vector<double> matrix_power(const std::vector<double>& a, int m, int pi) {
  if (pi < 0) throw ConfigError("matrix power: pi must be >= 0");
  std::vector<double> out(static_cast<std::size_t>(m) * m, 0.0);
  for (int i = 0; i < m; ++i) out[static_cast<std::size_t>(i) * m + i] = 1.0;
  std::vector<double> tmp(out.size());
  for (int step = 0; step < pi; ++step) {
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        double acc = 0.0;
        for (int k = 0; k < m; ++k) {
          acc += out[static_cast<std::size_t>(i) * m + k] * a[static_cast<std::size_t>(k) * m + j];
        }
        tmp[static_cast<std::size_t>(i) * m + j] = acc;
      }
    }
    out.swap(tmp);
  }
  return out;
}

// -------------------------------------------------------------- eigensolver

std::vector<double> symmetric_eigenvalues(const std::vector<double>& a, int m,
                                          std::vector<double>* eigenvectors) {
  std::vector<double> w = a;  // worked on in place
  std::vector<double> v;
  if (eigenvectors != nullptr) {
    v.assign(static_cast<std::size_t>(m) * m, 0.0);
    for (int i = 0; i < m; ++i) v[static_cast<std::size_t>(i) * m + i] = 1.0;
  }
  auto idx = [m](int i, int j) { return static_cast<std::size_t>(i) * m + j; };

  // Cyclic Jacobi sweeps until the off-diagonal mass is negligible.
  const int max_sweeps = 100;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < m; ++p) {
      for (int q = p + 1; q < m; ++q) off += w[idx(p, q)] * w[idx(p, q)];
    }
    if (off < 1e-26) break;
    for (int p = 0; p < m; ++p) {
      for (int q = p + 1; q < m; ++q) {
        double apq = w[idx(p, q)];
        if (apq == 0.0) continue;
        double app = w[idx(p, p)];
        double aqq = w[idx(q, q)];
        double theta = (aqq - app) / (2.0 * apq);
        double t = (theta >= 0.0 ? 1.0 : -1.0) /
                   (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (int k = 0; k < m; ++k) {
          double akp = w[idx(k, p)];
          double akq = w[idx(k, q)];
          w[idx(k, p)] = c * akp - s * akq;
          w[idx(k, q)] = s * akp + c * akq;
        }
        for (int k = 0; k < m; ++k) {
          double apk = w[idx(p, k)];
          double aqk = w[idx(q, k)];
          w[idx(p, k)] = c * apk - s * aqk;
          w[idx(q, k)] = s * apk + c * aqk;
        }
        if (eigenvectors != nullptr) {
          for (int k = 0; k < m; ++k) {
            double vkp = v[idx(k, p)];
            double vkq = v[idx(k, q)];
            v[idx(k, p)] = c * vkp - s * vkq;
            v[idx(k, q)] = s * vkp + c * vkq;
          }
        }
      }
    }
  }

  std::vector<int> order(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(),
            [&](int x, int y) { return w[idx(x, x)] > w[idx(y, y)]; });
  std::vector<double> values(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) values[static_cast<std::size_t>(i)] = w[idx(order[i], order[i])];
  if (eigenvectors != nullptr) {
    eigenvectors->assign(static_cast<std::size_t>(m) * m, 0.0);
    for (int i = 0; i < m; ++i) {
      for (int k = 0; k < m; ++k) {
        (*eigenvectors)[idx(k, i)] = v[idx(k, order[i])];
      }
    }
  }
  return values;
}

double spectral_zeta(const std::vector<double>& h, int m) {
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      if (std::fabs(h[static_cast<std::size_t>(i) * m + j] -
                    h[static_cast<std::size_t>(j) * m + i]) > 1e-12) {
        throw InvariantError("spectral_zeta: matrix asymmetric beyond 1e-12");
      }
    }
  }
  if (m == 1) return 0.0;
  auto values = symmetric_eigenvalues(h, m);
  return std::max(std::fabs(values[1]), std::fabs(values[static_cast<std::size_t>(m) - 1]));
}

std::pair<double, double> omega_constants(double zeta, int pi) {
  if (zeta < 0.0 || zeta >= 1.0) throw ConfigError("omega constants: need 0 <= zeta < 1");
  if (pi < 1) throw ConfigError("omega constants: need pi >= 1");
  double zp = std::pow(zeta, static_cast<double>(pi));
  double z2p = std::pow(zeta, 2.0 * pi);
  double omega1 = z2p / (1.0 - z2p);
  double omega2 = 1.0 / (1.0 - z2p) + 2.0 / (1.0 - zp) + zp / ((1.0 - zp) * (1.0 - zp));
  return {omega1, omega2};
}

}  // namespace cfel
