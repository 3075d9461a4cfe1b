#pragma once

// Independent reference computations for the tests. Deliberately naive:
// direct sums, explicit loops, no shared code with the library beyond the
// Eigen containers.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Boltzmann {
  Vector means;
  Matrix pairs;
  std::vector<double> prob;  // index b: bit i set means s_i = +1
  std::vector<double> third;  // central, n^3 row-major
  double Z = 0.0;
};

/// p(s) proportional to exp(sum_i h_i s_i + sum_{i != j} J_ij s_i s_j).
inline Boltzmann boltzmann(const Vector& h, const Matrix& J) {
  const int n = static_cast<int>(h.size());
  const std::size_t states = std::size_t{1} << n;
  Boltzmann out;
  out.prob.assign(states, 0.0);
  std::vector<int> s(static_cast<std::size_t>(n));
  for (std::size_t b = 0; b < states; ++b) {
    double expo = 0.0;
    for (int i = 0; i < n; ++i) s[static_cast<std::size_t>(i)] = (b >> i) & 1 ? 1 : -1;
    for (int i = 0; i < n; ++i) {
      expo += h(i) * s[static_cast<std::size_t>(i)];
      for (int j = 0; j < n; ++j)
        if (j != i) expo += J(i, j) * s[static_cast<std::size_t>(i)] * s[static_cast<std::size_t>(j)];
    }
    out.prob[b] = std::exp(expo);
    out.Z += out.prob[b];
  }
  for (auto& p : out.prob) p /= out.Z;
  out.means = Vector::Zero(n);
  out.pairs = Matrix::Zero(n, n);
  for (std::size_t b = 0; b < states; ++b)
    for (int i = 0; i < n; ++i) {
      const int si = (b >> i) & 1 ? 1 : -1;
      out.means(i) += out.prob[b] * si;
      for (int j = 0; j < n; ++j) out.pairs(i, j) += out.prob[b] * si * ((b >> j) & 1 ? 1 : -1);
    }
  out.third.assign(static_cast<std::size_t>(n * n * n), 0.0);
  for (std::size_t b = 0; b < states; ++b)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          const double di = ((b >> i) & 1 ? 1 : -1) - out.means(i);
          const double dj = ((b >> j) & 1 ? 1 : -1) - out.means(j);
          const double dk = ((b >> k) & 1 ? 1 : -1) - out.means(k);
          out.third[static_cast<std::size_t>((i * n + j) * n + k)] += out.prob[b] * di * dj * dk;
        }
  return out;
}

/// Random symmetric zero-diagonal couplings and fields, uniform in [-a, a].
inline void random_model(std::mt19937_64& rng, int n, double a, Vector& h, Matrix& J) {
  std::uniform_real_distribution<double> u(-a, a);
  h.resize(n);
  J = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) h(i) = u(rng);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) J(i, j) = J(j, i) = u(rng);
}

/// Maximum total weight over all spanning trees, by enumerating every
/// (n-1)-subset of edges and keeping the acyclic ones.
inline double max_spanning_tree_weight(const Matrix& W) {
  const int n = static_cast<int>(W.rows());
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) edges.emplace_back(i, j);
  const int m = static_cast<int>(edges.size());
  std::vector<int> pick(static_cast<std::size_t>(m), 0);
  std::fill(pick.begin(), pick.begin() + (n - 1), 1);
  double best = -INFINITY;
  do {
    std::vector<int> parent(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
      while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)];
      return x;
    };
    bool tree = true;
    double w = 0.0;
    for (int e = 0; e < m && tree; ++e) {
      if (!pick[static_cast<std::size_t>(e)]) continue;
      const int a = find(edges[static_cast<std::size_t>(e)].first);
      const int b = find(edges[static_cast<std::size_t>(e)].second);
      if (a == b) tree = false;
      parent[static_cast<std::size_t>(a)] = b;
      w += W(edges[static_cast<std::size_t>(e)].first, edges[static_cast<std::size_t>(e)].second);
    }
    if (tree) best = std::max(best, w);
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return best;
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Population central moment of order k.
inline double central(const std::vector<double>& v, int k) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += std::pow(x - m, k);
  return s / static_cast<double>(v.size());
}

inline double skew(const std::vector<double>& v) { return central(v, 3) / std::pow(central(v, 2), 1.5); }
inline double excess_kurt(const std::vector<double>& v) { return central(v, 4) / std::pow(central(v, 2), 2) - 3.0; }

/// |X_k| / L by the defining sum.
inline std::vector<double> dft_amplitudes(const std::vector<double>& x) {
  const std::size_t L = x.size();
  std::vector<double> out;
  for (std::size_t k = 0; k <= L / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < L; ++t)
      acc += x[t] * std::polar(1.0, -2.0 * M_PI * static_cast<double>(k * t) / static_cast<double>(L));
    out.push_back(std::abs(acc) / static_cast<double>(L));
  }
  return out;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = mean(x), my = mean(y);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace oracle
