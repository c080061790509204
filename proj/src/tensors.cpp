#include "gradhom/tensors.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "gradhom/error.hpp"

namespace gradhom {

namespace voigt {

std::string pair_label(int A) {
  const auto p = pair(A);
  return std::to_string(p[0] + 1) + std::to_string(p[1] + 1);
}

std::string triple_label(int alpha) {
  const auto t = triple(alpha);
  return std::to_string(t[0] + 1) + std::to_string(t[1] + 1) + std::to_string(t[2] + 1);
}

}  // namespace voigt

double Stiffness4::max_asymmetry() const { return (m_ - m_.transpose()).cwiseAbs().maxCoeff(); }

double Tensor6::max_asymmetry() const { return (m_ - m_.transpose()).cwiseAbs().maxCoeff(); }

Stiffness4 isotropic_stiffness(const IsotropicPhase& phase) {
  const double E = phase.young_modulus;
  const double nu = phase.poisson_ratio;
  if (!(E > 0.0) || !std::isfinite(E)) {
    throw ParameterError("phase " + std::to_string(phase.phase_id) +
                         ": Young's modulus must be positive, got " + std::to_string(E));
  }
  if (!(nu > -1.0 && nu < 0.5)) {
    std::ostringstream os;
    os << "phase " << phase.phase_id << ": Poisson's ratio must lie in (-1, 0.5), got " << nu;
    throw ParameterError(os.str());
  }
  const double lambda = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
  const double mu = E / (2.0 * (1.0 + nu));

  Matrix6 m = Matrix6::Zero();
  for (int A = 0; A < 3; ++A) {
    for (int B = 0; B < 3; ++B) m(A, B) = lambda;
    m(A, A) = lambda + 2.0 * mu;
  }
  for (int A = 3; A < 6; ++A) m(A, A) = mu;

  // Spectrum is {3*lambda + 2*mu, 2*mu (x2), mu (x3)}.
  const double kappa3 = 3.0 * lambda + 2.0 * mu;
  const double hi = std::max({kappa3, 2.0 * mu});
  const double lo = std::min({kappa3, mu});
  if (lo <= 0.0 || hi / lo > 1e6) {
    std::ostringstream os;
    os << "phase " << phase.phase_id << ": stiffness condition number " << (lo > 0 ? hi / lo : INFINITY)
       << " (Poisson's ratio " << nu << " is close to a stability limit)";
    warn(os.str());
  }
  return Stiffness4(m);
}

Stiffness4 voigt_pack4(const Rank4& full) {
  double scale = 0.0;
  for (double v : full) scale = std::max(scale, std::abs(v));
  const double tol = 1e-12 * scale;

  double worst = 0.0;
  std::array<int, 4> worst_at{0, 0, 0, 0};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) {
          const double v = full[idx4(i, j, k, l)];
          const double d = std::max(std::abs(v - full[idx4(j, i, k, l)]),
                                    std::abs(v - full[idx4(i, j, l, k)]));
          if (d > worst) {
            worst = d;
            worst_at = {i, j, k, l};
          }
        }
  if (worst > tol) {
    std::ostringstream os;
    os << "minor symmetry violated by " << worst << " at index (" << worst_at[0] + 1 << worst_at[1] + 1
       << worst_at[2] + 1 << worst_at[3] + 1 << ")";
    throw SymmetryError(os.str());
  }

  Matrix6 m;
  for (int A = 0; A < 6; ++A) {
    const auto a = voigt::pair(A);
    for (int B = 0; B < 6; ++B) {
      const auto b = voigt::pair(B);
      m(A, B) = full[idx4(a[0], a[1], b[0], b[1])];
    }
  }
  return Stiffness4(m);
}

Rank4 voigt_unpack4(const Stiffness4& c) {
  Rank4 full{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) full[idx4(i, j, k, l)] = c(i, j, k, l);
  return full;
}

Rank5 voigt_unpack5(const Tensor5& g) {
  Rank5 full{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l)
          for (int m = 0; m < 3; ++m) full[idx5(i, j, k, l, m)] = g(i, j, k, l, m);
  return full;
}

Rank6 voigt_unpack6(const Tensor6& d) {
  Rank6 full{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l)
          for (int m = 0; m < 3; ++m)
            for (int n = 0; n < 3; ++n) full[idx6(i, j, k, l, m, n)] = d(i, j, k, l, m, n);
  return full;
}

std::array<double, 6> check_spectrum(const Stiffness4& c) {
  Eigen::SelfAdjointEigenSolver<Matrix6> solver(c.voigt(), Eigen::EigenvaluesOnly);
  std::array<double, 6> out{};
  for (int i = 0; i < 6; ++i) out[i] = solver.eigenvalues()(i);
  return out;
}

namespace {

template <class M>
nlohmann::json matrix_to_json(const M& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <class M>
void matrix_from_json(const nlohmann::json& j, const char* key, M& m) {
  if (!j.contains(key) || !j.at(key).is_array() || static_cast<int>(j.at(key).size()) != m.rows()) {
    throw ConfigError(std::string("tensor document: \"") + key + "\" must have " +
                      std::to_string(m.rows()) + " rows");
  }
  const auto& rows = j.at(key);
  for (int r = 0; r < m.rows(); ++r) {
    if (!rows[r].is_array() || static_cast<int>(rows[r].size()) != m.cols()) {
      throw ConfigError(std::string("tensor document: row ") + std::to_string(r) + " of \"" + key +
                        "\" must have " + std::to_string(m.cols()) + " entries");
    }
    for (int c = 0; c < m.cols(); ++c) m(r, c) = rows[r][c].get<double>();
  }
}

}  // namespace

nlohmann::json tensors_to_json(const Stiffness4& c, const Tensor5& g, const Tensor6& d) {
  nlohmann::json doc;
  nlohmann::json pairs = nlohmann::json::array();
  for (int A = 0; A < 6; ++A) pairs.push_back(voigt::pair_label(A));
  nlohmann::json triples = nlohmann::json::array();
  for (int a = 0; a < 18; ++a) triples.push_back(voigt::triple_label(a));
  doc["voigt_order_pairs"] = std::move(pairs);
  doc["voigt_order_triples"] = std::move(triples);
  doc["C"] = matrix_to_json(c.voigt());
  doc["G"] = matrix_to_json(g.voigt());
  doc["D"] = matrix_to_json(d.voigt());
  doc["units"] = {{"C", "Pa"}, {"G", "N/m per epsilon"}, {"D", "N per epsilon^2"}, {"length", "m"}};
  return doc;
}

void tensors_from_json(const nlohmann::json& doc, Stiffness4& c, Tensor5& g, Tensor6& d) {
  if (!doc.is_object()) throw ConfigError("tensor document must be a JSON object");
  matrix_from_json(doc, "C", c.voigt());
  matrix_from_json(doc, "G", g.voigt());
  matrix_from_json(doc, "D", d.voigt());
}

}  // namespace gradhom
