#include <gtest/gtest.h>

#include <random>
#include <set>

#include "gradhom/error.hpp"
#include "gradhom/tensors.hpp"

using namespace gradhom;

TEST(Voigt, PairOrderAndInverse) {
  const char* labels[6] = {"11", "22", "33", "23", "13", "12"};
  for (int A = 0; A < 6; ++A) {
    EXPECT_EQ(voigt::pair_label(A), labels[A]);
    const auto p = voigt::pair(A);
    EXPECT_EQ(voigt::pair_index(p[0], p[1]), A);
    EXPECT_EQ(voigt::pair_index(p[1], p[0]), A);
  }
}

TEST(Voigt, TripleOrderRunsPairFastest) {
  EXPECT_EQ(voigt::triple_label(0), "111");
  EXPECT_EQ(voigt::triple_label(1), "221");
  EXPECT_EQ(voigt::triple_label(5), "121");
  EXPECT_EQ(voigt::triple_label(6), "112");
  EXPECT_EQ(voigt::triple_label(17), "123");
  std::set<std::string> seen;
  for (int a = 0; a < 18; ++a) {
    const auto t = voigt::triple(a);
    EXPECT_EQ(voigt::triple_index(t[0], t[1], t[2]), a);
    EXPECT_EQ(voigt::triple_index(t[1], t[0], t[2]), a);
    EXPECT_EQ(voigt::triple_pair(a), voigt::pair_index(t[0], t[1]));
    EXPECT_EQ(voigt::triple_third(a), t[2]);
    seen.insert(voigt::triple_label(a));
  }
  EXPECT_EQ(seen.size(), 18u);
}

TEST(Isotropic, LameEntries) {
  const auto c = isotropic_stiffness({110e9, 0.35, 1});
  const double lambda = 110e9 * 0.35 / (1.35 * 0.3);
  const double mu = 110e9 / 2.7;
  EXPECT_NEAR(c(0, 0, 0, 0), lambda + 2 * mu, 1e-6 * mu);
  EXPECT_NEAR(c(0, 0, 1, 1), lambda, 1e-6 * mu);
  EXPECT_NEAR(c(1, 2, 1, 2), mu, 1e-6 * mu);
  EXPECT_NEAR(c(0, 1, 1, 0), mu, 1e-6 * mu);
  EXPECT_EQ(c(0, 0, 0, 1), 0.0);
  EXPECT_EQ(c.max_asymmetry(), 0.0);
}

TEST(Isotropic, SpectrumMatchesClosedForm) {
  const double E = 7.0, nu = 0.2;
  const double lambda = E * nu / ((1 + nu) * (1 - 2 * nu)), mu = E / (2 * (1 + nu));
  const auto s = check_spectrum(isotropic_stiffness({E, nu, 1}));
  // Voigt storage without shear factors: shear eigenvalue mu, deviatoric 2 mu
  EXPECT_NEAR(s[0], mu, 1e-12);
  EXPECT_NEAR(s[2], mu, 1e-12);
  EXPECT_NEAR(s[3], 2 * mu, 1e-12);
  EXPECT_NEAR(s[5], 3 * lambda + 2 * mu, 1e-12);
}

TEST(Isotropic, RejectsInadmissibleParameters) {
  EXPECT_THROW(isotropic_stiffness({0.0, 0.3, 1}), ParameterError);
  EXPECT_THROW(isotropic_stiffness({-1.0, 0.3, 1}), ParameterError);
  EXPECT_THROW(isotropic_stiffness({1.0, 0.5, 1}), ParameterError);
  EXPECT_THROW(isotropic_stiffness({1.0, -1.0, 1}), ParameterError);
  try {
    isotropic_stiffness({1.0, 0.7, 4});
    FAIL();
  } catch (const ParameterError& e) {
    EXPECT_EQ(e.code(), ExitCode::Config);
    EXPECT_NE(std::string(e.what()).find("phase 4"), std::string::npos);
  }
}

TEST(Isotropic, WarnsNearIncompressibility) {
  std::vector<std::string> seen;
  auto previous = set_warning_handler([&](std::string_view m) { seen.emplace_back(m); });
  isotropic_stiffness({1.0, 0.3, 1});
  EXPECT_TRUE(seen.empty());
  isotropic_stiffness({1.0, 0.4999999, 1});
  set_warning_handler(previous);
  ASSERT_EQ(seen.size(), 1u);
  EXPECT_NE(seen[0].find("condition"), std::string::npos);
}

TEST(VoigtPack, RoundTripOfRandomMinorSymmetricTensor) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1, 1);
  Matrix6 m;
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c) m(r, c) = u(rng);
  const Stiffness4 c(m);  // minor symmetric by construction, no major symmetry needed
  const Rank4 full = voigt_unpack4(c);
  EXPECT_EQ(full[idx4(0, 1, 2, 0)], full[idx4(1, 0, 0, 2)]);
  const Stiffness4 back = voigt_pack4(full);
  EXPECT_EQ((back.voigt() - m).cwiseAbs().maxCoeff(), 0.0);
}

TEST(VoigtPack, MinorSymmetryViolationNamesIndex) {
  Rank4 full = voigt_unpack4(isotropic_stiffness({1.0, 0.25, 1}));
  full[idx4(0, 1, 2, 2)] += 1e-3;
  try {
    voigt_pack4(full);
    FAIL();
  } catch (const SymmetryError& e) {
    EXPECT_NE(std::string(e.what()).find("(1233)"), std::string::npos) << e.what();
  }
  // roundoff-level asymmetry is accepted
  full = voigt_unpack4(isotropic_stiffness({1.0, 0.25, 1}));
  full[idx4(0, 1, 0, 1)] *= 1 + 1e-15;
  EXPECT_NO_THROW(voigt_pack4(full));
}

TEST(VoigtUnpack, HigherRanksAreFirstPairSymmetric) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  Matrix6x18 g;
  Matrix18 d;
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 18; ++c) g(r, c) = u(rng);
  for (int r = 0; r < 18; ++r)
    for (int c = 0; c < 18; ++c) d(r, c) = u(rng);
  const Rank5 g5 = voigt_unpack5(Tensor5(g));
  const Rank6 d6 = voigt_unpack6(Tensor6(d));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l)
          for (int m = 0; m < 3; ++m) {
            EXPECT_EQ(g5[idx5(i, j, k, l, m)], g5[idx5(j, i, l, k, m)]);
            EXPECT_EQ(g5[idx5(i, j, k, l, m)], g(voigt::pair_index(i, j), voigt::triple_index(k, l, m)));
            for (int n = 0; n < 3; ++n)
              EXPECT_EQ(d6[idx6(i, j, k, l, m, n)], d6[idx6(j, i, k, m, l, n)]);
          }
}

TEST(TensorJson, RoundTripIsExact) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-1e12, 1e12);
  Stiffness4 c;
  Tensor5 g;
  Tensor6 d;
  for (int r = 0; r < 6; ++r)
    for (int k = 0; k < 6; ++k) c.voigt()(r, k) = u(rng);
  for (int r = 0; r < 6; ++r)
    for (int k = 0; k < 18; ++k) g.voigt()(r, k) = u(rng) * 1e-7;
  for (int r = 0; r < 18; ++r)
    for (int k = 0; k < 18; ++k) d.voigt()(r, k) = u(rng) * 1e-13;
  const auto doc = nlohmann::json::parse(tensors_to_json(c, g, d).dump());
  EXPECT_EQ(doc["voigt_order_triples"][6], "112");
  Stiffness4 c2;
  Tensor5 g2;
  Tensor6 d2;
  tensors_from_json(doc, c2, g2, d2);
  EXPECT_EQ(c2.voigt(), c.voigt());
  EXPECT_EQ(g2.voigt(), g.voigt());
  EXPECT_EQ(d2.voigt(), d.voigt());
}

TEST(TensorJson, MalformedDocumentsAreRejected) {
  Stiffness4 c;
  Tensor5 g;
  Tensor6 d;
  EXPECT_THROW(tensors_from_json(nlohmann::json::array(), c, g, d), ConfigError);
  auto doc = tensors_to_json(c, g, d);
  doc["G"][2].erase(0);
  EXPECT_THROW(tensors_from_json(doc, c, g, d), ConfigError);
  doc = tensors_to_json(c, g, d);
  doc.erase("D");
  EXPECT_THROW(tensors_from_json(doc, c, g, d), ConfigError);
}
