#pragma once

// Independent one-dimensional reference for a periodic laminate stacked
// along axis 1. The three-dimensional P1 solution on a structured grid that
// is uniform in the transverse directions depends on y1 only and coincides
// with the 1D P1 solution built on the same y1 breakpoints, so this oracle
// reproduces the 3D discrete numbers exactly, including the element-wise
// variation of phi inside the second-order terms. Transverse moments are
// analytic: <y_t> = 0 and <y_t^2> = W_t^2 / 12.
//
// Nothing here uses the library; indices are full 0-based tensor indices and
// the Voigt orders are restated locally.

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Full4 = std::array<double, 81>;

inline int i4(int i, int j, int k, int l) { return ((i * 3 + j) * 3 + k) * 3 + l; }

inline Full4 isotropic(double E, double nu) {
  const double lambda = E * nu / ((1 + nu) * (1 - 2 * nu));
  const double mu = E / (2 * (1 + nu));
  Full4 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l)
          c[i4(i, j, k, l)] = lambda * (i == j) * (k == l) + mu * ((i == k) * (j == l) + (i == l) * (j == k));
  return c;
}

inline constexpr int kPair[6][2] = {{0, 0}, {1, 1}, {2, 2}, {1, 2}, {0, 2}, {0, 1}};
inline int pair_of(int i, int j) {
  static constexpr int t[3][3] = {{0, 5, 4}, {5, 1, 3}, {4, 3, 2}};
  return t[i][j];
}

struct Laminate1D {
  std::vector<double> x;          // periodic breakpoints x[0] < ... < x[n], centred frame
  std::vector<Full4> C;           // per element
  double W2 = 1.0, W3 = 1.0;      // transverse box widths

  // Results
  Eigen::Matrix<double, 6, 6> C_bar;
  Eigen::Matrix<double, 18, 18> D_bar;  // (1/V) int M : C : M
  Eigen::Matrix<double, 18, 18> D_M;    // D_bar - C_bar Ibar
  std::array<double, 3> Ibar{};
  // nodal values, n nodes (node n is node 0)
  std::array<std::vector<Eigen::Vector3d>, 6> phi;
  std::array<std::vector<Eigen::Vector3d>, 18> psi;

  int elements() const { return static_cast<int>(x.size()) - 1; }
  double length() const { return x.back() - x.front(); }

  // Periodic P1 solve of int C_i1k1 u_k' v_i' = load(v) with the gauge
  // fixed by pinning node 0 and then removing the mean.
  std::vector<Eigen::Vector3d> solve(const Eigen::VectorXd& f) const {
    const int n = elements();
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(3 * n, 3 * n);
    for (int e = 0; e < n; ++e) {
      const double h = x[e + 1] - x[e];
      const int nodes[2] = {e, (e + 1) % n};
      const double g[2] = {-1.0 / h, 1.0 / h};
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          for (int i = 0; i < 3; ++i)
            for (int k = 0; k < 3; ++k)
              K(3 * nodes[a] + i, 3 * nodes[b] + k) += h * C[e][i4(i, 0, k, 0)] * g[a] * g[b];
    }
    Eigen::MatrixXd Kr = K.bottomRightCorner(3 * n - 3, 3 * n - 3);
    Eigen::VectorXd ur = Kr.ldlt().solve(f.tail(3 * n - 3));
    std::vector<Eigen::Vector3d> u(n, Eigen::Vector3d::Zero());
    for (int m = 1; m < n; ++m) u[m] = ur.segment<3>(3 * m - 3);
    // exact mean of the periodic P1 field
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (int e = 0; e < n; ++e) mean += 0.5 * (x[e + 1] - x[e]) * (u[e] + u[(e + 1) % n]);
    mean /= length();
    for (auto& v : u) v -= mean;
    return u;
  }

  Eigen::Vector3d value(const std::vector<Eigen::Vector3d>& u, int e, double t) const {
    const int n = elements();
    return (1 - t) * u[e] + t * u[(e + 1) % n];
  }
  Eigen::Vector3d slope(const std::vector<Eigen::Vector3d>& u, int e) const {
    const int n = elements();
    return (u[(e + 1) % n] - u[e]) / (x[e + 1] - x[e]);
  }

  // L_A = e_p (x) e_q + phi_A' (x) e_1, constant per element.
  Eigen::Matrix3d L(int A, int e) const {
    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
    m(kPair[A][0], kPair[A][1]) = 1.0;
    m.col(0) += slope(phi[A], e);
    return m;
  }

  static double contract(const Full4& c, const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
    double s = 0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k)
          for (int l = 0; l < 3; ++l) s += a(i, j) * c[i4(i, j, k, l)] * b(k, l);
    return s;
  }

  void run() {
    const int n = elements();
    const double len = length();

    for (int A = 0; A < 6; ++A) {
      const int p = kPair[A][0], q = kPair[A][1];
      Eigen::VectorXd f = Eigen::VectorXd::Zero(3 * n);
      for (int e = 0; e < n; ++e) {
        const double h = x[e + 1] - x[e];
        const int nodes[2] = {e, (e + 1) % n};
        const double g[2] = {-1.0 / h, 1.0 / h};
        for (int a = 0; a < 2; ++a)
          for (int i = 0; i < 3; ++i) f(3 * nodes[a] + i) -= h * C[e][i4(i, 0, p, q)] * g[a];
      }
      phi[A] = solve(f);
    }

    C_bar.setZero();
    for (int e = 0; e < n; ++e) {
      const double h = x[e + 1] - x[e];
      for (int A = 0; A < 6; ++A)
        for (int B = 0; B < 6; ++B) C_bar(A, B) += h * contract(C[e], L(A, e), L(B, e));
    }
    C_bar /= len;
    auto CM = [&](int i, int j, int k, int l) { return C_bar(pair_of(i, j), pair_of(k, l)); };

    for (int beta = 0; beta < 18; ++beta) {
      const int A = beta % 6, c = beta / 6;
      const int p = kPair[A][0], q = kPair[A][1];
      Eigen::VectorXd f = Eigen::VectorXd::Zero(3 * n);
      for (int e = 0; e < n; ++e) {
        const double h = x[e + 1] - x[e];
        const int nodes[2] = {e, (e + 1) % n};
        const double g[2] = {-1.0 / h, 1.0 / h};
        const Eigen::Matrix3d La = L(A, e);
        const Eigen::Vector3d phibar = 0.5 * (phi[A][e] + phi[A][(e + 1) % n]);
        for (int i = 0; i < 3; ++i) {
          double s = -CM(i, c, p, q);
          for (int k = 0; k < 3; ++k)
            for (int l = 0; l < 3; ++l) s += C[e][i4(i, c, k, l)] * La(k, l);
          double flux = 0;
          for (int k = 0; k < 3; ++k) flux += C[e][i4(i, 0, k, c)] * phibar[k];
          for (int a = 0; a < 2; ++a) f(3 * nodes[a] + i) += 0.5 * h * s - h * flux * g[a];
        }
      }
      psi[beta] = solve(f);
    }

    Ibar = {len * len / 12.0, W2 * W2 / 12.0, W3 * W3 / 12.0};

    // P_beta(y1) = phi_A(y1) (x) e_c + psi_beta' (x) e_1, so that
    // M_beta = y_c L_A + P_beta.
    auto P = [&](int beta, int e, double t) {
      const int A = beta % 6, c = beta / 6;
      Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
      m.col(c) += value(phi[A], e, t);
      m.col(0) += slope(psi[beta], e);
      return m;
    };
    // 3-point Gauss on [0, 1], exact for the quadratic integrands
    const double gp[3] = {0.5 - std::sqrt(0.15), 0.5, 0.5 + std::sqrt(0.15)};
    const double gw[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};

    D_bar.setZero();
    for (int e = 0; e < n; ++e) {
      const double h = x[e + 1] - x[e];
      for (int qp = 0; qp < 3; ++qp) {
        const double t = gp[qp];
        const double y1 = x[e] + t * h;
        const double w = gw[qp] * h;
        for (int alpha = 0; alpha < 18; ++alpha) {
          const int A = alpha % 6, c = alpha / 6;
          const Eigen::Matrix3d La = L(A, e), Pa = P(alpha, e, t);
          for (int beta = 0; beta < 18; ++beta) {
            const int B = beta % 6, f = beta / 6;
            const Eigen::Matrix3d Lb = L(B, e), Pb = P(beta, e, t);
            double v = contract(C[e], Pa, Pb);
            // <y_c> vanishes for transverse c; y1 stays inside the integral
            if (c == 0) v += y1 * contract(C[e], La, Pb);
            if (f == 0) v += y1 * contract(C[e], Pa, Lb);
            if (c == 0 && f == 0) v += y1 * y1 * contract(C[e], La, Lb);
            if (c != 0 && c == f) v += Ibar[c] * contract(C[e], La, Lb);
            D_bar(alpha, beta) += w * v;
          }
        }
      }
    }
    D_bar /= len;

    for (int alpha = 0; alpha < 18; ++alpha)
      for (int beta = 0; beta < 18; ++beta) {
        const int c = alpha / 6, f = beta / 6;
        D_M(alpha, beta) = D_bar(alpha, beta) - (c == f ? C_bar(alpha % 6, beta % 6) * Ibar[c] : 0.0);
      }
  }
};

}  // namespace oracle
