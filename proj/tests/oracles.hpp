#pragma once

// Closed-form reference spectra for the test suite.
//
// On (0,pi)^3 with eps = I the Q1 operators factor through the 1D stiffness,
// mass and first-derivative matrices. Writing, for one axis with mesh width h,
//
//   lam_hat(m) = 6 (1 - cos mh) / (h^2 (2 + cos mh))
//   kappa(m)   = 3 sin(mh) / (h (2 + cos mh))
//   delta(m)   = lam_hat(m) - kappa(m)^2
//
// the interior sine vector is a discrete Dirichlet eigenvector with value
// lam_hat(m), the full cosine vector a Neumann one, and kappa couples the two
// through the derivative matrix. Every eigenvalue of the penalized vector
// pencil then comes from a reduced matrix of size <= 3 indexed by a frequency
// triple (m,n,p): component i participates iff both other indices are
// interior, and the reduced block is
//
//   A = lam_tot I + (tau - 1) (diag(delta(k_i)) + kappa kappa^T).
//
// These references are computed entirely from the 1D trigonometric identities
// above, independent of the library's assembly and solver paths.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace oracle {

inline double lam_hat(int m, double h) {
  if (m == 0) return 0.0;
  double c = std::cos(m * h);
  return 6.0 * (1.0 - c) / (h * h * (2.0 + c));
}

inline double kappa(int m, double h) {
  if (m == 0) return 0.0;
  return 3.0 * std::sin(m * h) / (h * (2.0 + std::cos(m * h)));
}

inline double delta(int m, double h) {
  return lam_hat(m, h) - kappa(m, h) * kappa(m, h);
}

// Full spectrum of the penalized pencil at eps = I on an N^3 mesh of
// (0,pi)^3, sorted ascending. Size equals the number of free vector dofs.
inline std::vector<double> penalized_identity_values(int N, double tau) {
  const double h = M_PI / N;
  std::vector<double> vals;
  for (int m = 0; m <= N; ++m)
    for (int n = 0; n <= N; ++n)
      for (int p = 0; p <= N; ++p) {
        std::array<int, 3> k{m, n, p};
        std::array<int, 3> alive{};
        int S = 0;
        for (int i = 0; i < 3; ++i) {
          bool ok = true;
          for (int d = 0; d < 3; ++d)
            if (d != i && !(1 <= k[d] && k[d] <= N - 1)) ok = false;
          if (ok) alive[S++] = i;
        }
        if (S == 0) continue;
        double lam_tot = lam_hat(m, h) + lam_hat(n, h) + lam_hat(p, h);
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(S, S);
        for (int a = 0; a < S; ++a) {
          A(a, a) = lam_tot + (tau - 1.0) * delta(k[alive[a]], h);
          for (int b = 0; b < S; ++b)
            A(a, b) += (tau - 1.0) * kappa(k[alive[a]], h) * kappa(k[alive[b]], h);
        }
        if (S == 1) {
          vals.push_back(A(0, 0));
        } else {
          Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
          for (int i = 0; i < S; ++i) vals.push_back(es.eigenvalues()(i));
        }
      }
  std::sort(vals.begin(), vals.end());
  return vals;
}

// Eigenvalues of the penalized pencil together with the exact divergence
// residual sqrt(u^T D u / u^T M u) of the corresponding eigenvector. Within a
// block the grad-div part G = diag(delta) + kappa kappa^T satisfies
// A = lam_tot I + (tau - 1) G, so eigenspaces of A are eigenspaces of G and
// x^T G x = (sigma - lam_tot) / (tau - 1) for any unit eigenvector. Requires
// tau != 1 (at tau = 1 every block is scalar and the residual is not a
// function of sigma alone).
struct Mode {
  double sigma = 0.0;
  double div = 0.0;
};

inline std::vector<Mode> penalized_identity_modes(int N, double tau) {
  const double h = M_PI / N;
  std::vector<Mode> modes;
  for (int m = 0; m <= N; ++m)
    for (int n = 0; n <= N; ++n)
      for (int p = 0; p <= N; ++p) {
        std::array<int, 3> k{m, n, p};
        std::array<int, 3> alive{};
        int S = 0;
        for (int i = 0; i < 3; ++i) {
          bool ok = true;
          for (int d = 0; d < 3; ++d)
            if (d != i && !(1 <= k[d] && k[d] <= N - 1)) ok = false;
          if (ok) alive[S++] = i;
        }
        if (S == 0) continue;
        double lam_tot = lam_hat(m, h) + lam_hat(n, h) + lam_hat(p, h);
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(S, S);
        for (int a = 0; a < S; ++a) {
          A(a, a) = lam_tot + (tau - 1.0) * delta(k[alive[a]], h);
          for (int b = 0; b < S; ++b)
            A(a, b) += (tau - 1.0) * kappa(k[alive[a]], h) * kappa(k[alive[b]], h);
        }
        auto push = [&](double sigma) {
          double g = std::max(0.0, (sigma - lam_tot) / (tau - 1.0));
          modes.push_back({sigma, std::sqrt(g)});
        };
        if (S == 1) {
          push(A(0, 0));
        } else {
          Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
          for (int i = 0; i < S; ++i) push(es.eigenvalues()(i));
        }
      }
  std::sort(modes.begin(), modes.end(),
            [](const Mode& a, const Mode& b) { return a.sigma < b.sigma; });
  return modes;
}

// Exact discrete Dirichlet spectrum of -div(grad .) at eps = I: sums of 1D
// interior eigenvalues, one per interior frequency triple.
inline std::vector<double> dirichlet_identity_values(int N) {
  const double h = M_PI / N;
  std::vector<double> vals;
  for (int m = 1; m <= N - 1; ++m)
    for (int n = 1; n <= N - 1; ++n)
      for (int p = 1; p <= N - 1; ++p)
        vals.push_back(lam_hat(m, h) + lam_hat(n, h) + lam_hat(p, h));
  std::sort(vals.begin(), vals.end());
  return vals;
}

// Continuum cavity values on (0,pi)^3 with eps = I: m^2+n^2+p^2 over
// nonnegative triples, two copies when all indices are positive, one copy
// when exactly one vanishes, none otherwise.
inline std::vector<double> maxwell_continuum(int count) {
  std::vector<double> vals;
  int bound = 4;
  for (;;) {
    vals.clear();
    for (int m = 0; m <= bound; ++m)
      for (int n = 0; n <= bound; ++n)
        for (int p = 0; p <= bound; ++p) {
          int zeros = (m == 0) + (n == 0) + (p == 0);
          if (zeros >= 2) continue;
          double v = double(m * m + n * n + p * p);
          vals.push_back(v);
          if (zeros == 0) vals.push_back(v);
        }
    std::sort(vals.begin(), vals.end());
    if (int(vals.size()) >= count && vals[count - 1] <= double(bound * bound))
      break;
    bound *= 2;
  }
  vals.resize(count);
  return vals;
}

// Continuum Dirichlet values: m^2+n^2+p^2 over strictly positive triples.
inline std::vector<double> dirichlet_continuum(int count) {
  std::vector<double> vals;
  int bound = 4;
  for (;;) {
    vals.clear();
    for (int m = 1; m <= bound; ++m)
      for (int n = 1; n <= bound; ++n)
        for (int p = 1; p <= bound; ++p)
          vals.push_back(double(m * m + n * n + p * p));
    std::sort(vals.begin(), vals.end());
    if (int(vals.size()) >= count && vals[count - 1] <= double(bound * bound))
      break;
    bound *= 2;
  }
  vals.resize(count);
  return vals;
}

// e_s of a multiset, stable ascending recurrence.
inline double elementary_symmetric(const std::vector<double>& vals, int s) {
  if (s < 0 || s > int(vals.size())) return 0.0;
  std::vector<double> e(std::size_t(s) + 1, 0.0);
  e[0] = 1.0;
  for (std::size_t i = 0; i < vals.size(); ++i)
    for (int j = std::min<int>(s, int(i) + 1); j >= 1; --j)
      e[std::size_t(j)] += vals[i] * e[std::size_t(j) - 1];
  return e[std::size_t(s)];
}

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max(1.0, std::abs(b));
}

}  // namespace oracle
