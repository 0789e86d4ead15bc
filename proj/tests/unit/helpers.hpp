#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "crimegat/graph.hpp"
#include "crimegat/matrix.hpp"
#include "crimegat/rng.hpp"

namespace crimegat::testing {

inline double rel_err(double a, double b) {
  const double diff = std::abs(a - b);
  const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
  return diff / denom;
}

// Central finite difference of a scalar function with respect to one value,
// restoring the value afterwards.
template <typename F>
double central_diff(double& x, double eps, F&& loss) {
  const double orig = x;
  x = orig + eps;
  const double up = loss();
  x = orig - eps;
  const double down = loss();
  x = orig;
  return (up - down) / (2.0 * eps);
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

inline Graph random_graph(std::size_t n, double p, std::size_t feat_dim, Rng& rng) {
  std::vector<Edge> edges;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      if (rng.uniform() < p) edges.push_back(Edge{u, v});
    }
  }
  return Graph::from_edges(n, std::move(edges), random_matrix(n, feat_dim, rng));
}

}  // namespace crimegat::testing
