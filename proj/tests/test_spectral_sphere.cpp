#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "schro/spectral_sphere.hpp"

using namespace schro;

namespace {

Eigen::VectorXd sample(const GridPtr& g, double (*f)(double)) {
  Eigen::VectorXd v(g->node_count());
  for (std::size_t k = 0; k < g->node_count(); ++k) v(k) = f(g->nodes[k]);
  return v;
}

// Chebyshev U_j through sin((j+1) theta) / sin(theta).
double cheb_u(int j, double t) {
  const double th = std::acos(t);
  return std::sin((j + 1) * th) / std::sin(th);
}

}  // namespace

TEST(Eigenvalue, MatchesDegreeFormula) {
  EXPECT_EQ(eigenvalue(2, 0), 0.0);
  EXPECT_EQ(eigenvalue(2, 1), 2.0);
  EXPECT_EQ(eigenvalue(2, 3), 12.0);
  EXPECT_EQ(eigenvalue(3, 1), 3.0);
  EXPECT_EQ(eigenvalue(4, 2), 10.0);
  EXPECT_THROW(eigenvalue(1, 2), Error);
  EXPECT_THROW(eigenvalue(2, -1), Error);
}

TEST(JacobiKernel, TwoSphereIsLegendre) {
  for (int j = 0; j <= 8; ++j) {
    for (double t : {-0.9, -0.31, 0.0, 0.42, 0.77, 1.0}) {
      EXPECT_NEAR(jacobi_kernel(2, j, t), std::legendre(j, t), 1e-12) << "j=" << j << " t=" << t;
    }
  }
}

TEST(JacobiKernel, ThreeSphereIsChebyshevSecondKindUpToScale) {
  for (int j = 0; j <= 7; ++j) {
    const double at_pole = jacobi_kernel(3, j, 1.0);
    for (double t : {-0.8, -0.2, 0.35, 0.9}) {
      EXPECT_NEAR(jacobi_kernel(3, j, t) / at_pole, cheb_u(j, t) / (j + 1), 1e-12);
    }
  }
}

TEST(JacobiKernel, IsRadialEigenfunction) {
  // -(1-t^2) f'' + n t f' = j (j+n-1) f, with central differences.
  const double h = 1e-4;
  for (int n : {2, 3, 5}) {
    for (int j : {1, 2, 4}) {
      for (double t : {-0.6, 0.1, 0.55}) {
        auto f = [&](double x) { return jacobi_kernel(n, j, x); };
        const double d2 = (f(t + h) - 2 * f(t) + f(t - h)) / (h * h);
        const double d1 = (f(t + h) - f(t - h)) / (2 * h);
        const double lhs = -(1 - t * t) * d2 + n * t * d1;
        EXPECT_NEAR(lhs, eigenvalue(n, j) * f(t), 1e-5 * std::max(1.0, std::abs(lhs)));
      }
    }
  }
}

TEST(WeightMass, ClosedForms) {
  EXPECT_NEAR(radial_weight_mass(2), 2.0, 1e-14);
  EXPECT_NEAR(radial_weight_mass(3), std::numbers::pi / 2, 1e-14);
  EXPECT_NEAR(radial_weight_mass(4), 4.0 / 3.0, 1e-14);
}

TEST(WeightMass, CompositeQuadratureOnThreeSphere) {
  // sqrt(1 - t^2) on [-1, 1] via t = sin(s), which removes the endpoint singularity.
  const int m = 2000;
  double sum = 0.0;
  for (int i = 0; i < m; ++i) {
    const double s = -std::numbers::pi / 2 + (i + 0.5) * std::numbers::pi / m;
    sum += std::cos(s) * std::cos(s);
  }
  EXPECT_NEAR(radial_weight_mass(3), sum * std::numbers::pi / m, 1e-10);
}

TEST(Grid, NodeCountRule) {
  EXPECT_EQ(default_node_count(64, 4.0), 127);
  EXPECT_EQ(default_node_count(64, 3.0), 95);
  EXPECT_EQ(default_node_count(64, 2.5), 128);
  EXPECT_EQ(default_node_count(64, std::nullopt), 128);
  EXPECT_EQ(build_grid(2, 64, 4.0)->node_count(), 127u);
}

TEST(Grid, NodesSymmetricAndWeightsSumToMass) {
  for (int n : {2, 3, 4, 7}) {
    const auto g = build_grid(n, 24, 4.0);
    double wsum = 0.0;
    for (std::size_t k = 0; k < g->node_count(); ++k) {
      EXPECT_EQ(g->nodes[k], -g->nodes[g->mirror(k)]);
      EXPECT_EQ(g->weights[k], g->weights[g->mirror(k)]);
      EXPECT_GT(g->weights[k], 0.0);
      if (k > 0) {
        EXPECT_LT(g->nodes[k - 1], g->nodes[k]);
      }
      wsum += g->weights[k];
    }
    EXPECT_NEAR(wsum, radial_weight_mass(n), 1e-13);
  }
}

TEST(Grid, MomentsMatchUniformSphereAverages) {
  // The height t is one coordinate of a uniform point on S^n: E t^2 = 1/(n+1),
  // E t^4 = 3/((n+1)(n+3)).
  for (int n : {2, 3, 6}) {
    const auto g = build_grid(n, 16);
    double m0 = 0, m2 = 0, m4 = 0;
    for (std::size_t k = 0; k < g->node_count(); ++k) {
      const double t = g->nodes[k], w = g->weights[k];
      m0 += w;
      m2 += w * t * t;
      m4 += w * t * t * t * t;
    }
    EXPECT_NEAR(m2 / m0, 1.0 / (n + 1), 1e-14);
    EXPECT_NEAR(m4 / m0, 3.0 / ((n + 1.0) * (n + 3.0)), 1e-14);
  }
}

TEST(Grid, BasisIsOrthonormal) {
  for (int n : {2, 3, 4}) {
    const auto g = build_grid(n, 64, 4.0);
    const Eigen::MatrixXd gram = g->analysis * g->basis.transpose();
    EXPECT_LT((gram - Eigen::MatrixXd::Identity(64, 64)).cwiseAbs().maxCoeff(), 1e-12) << "n=" << n;
  }
}

TEST(Grid, BasisIsProportionalToKernel) {
  for (int n : {2, 3, 4}) {
    const auto g = build_grid(n, 12);
    const Eigen::VectorXd pole = g->basis_at(1.0);
    for (int j = 0; j <= 10; ++j) {
      for (double t : {-0.7, 0.05, 0.6}) {
        const double expect = jacobi_kernel(n, j, t) / jacobi_kernel(n, j, 1.0);
        EXPECT_NEAR(g->basis_at(t)(j) / pole(j), expect, 1e-11);
      }
    }
  }
}

TEST(Grid, WeakLaplacianHasSphereSpectrum) {
  // <phi_i, Delta phi_j> = int (1 - t^2) phi_i' phi_j' dmu, independent of the
  // eigenvalues stored in the grid.
  for (int n : {2, 3, 4}) {
    const auto g = build_grid(n, 64, 4.0);
    Eigen::VectorXd w(g->node_count());
    for (std::size_t k = 0; k < g->node_count(); ++k) w(k) = g->weights[k] * (1 - g->nodes[k] * g->nodes[k]);
    const Eigen::MatrixXd L = g->basis_dt * w.asDiagonal() * g->basis_dt.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L);
    for (int j = 0; j <= 10; ++j) {
      const double exact = eigenvalue(n, j);
      EXPECT_NEAR(es.eigenvalues()(j), exact, 1e-10 * std::max(1.0, exact)) << "n=" << n << " j=" << j;
    }
  }
}

TEST(SpectralField, LaplacianOfCubicOnTwoSphere) {
  const auto g = build_grid(2, 16);
  const SpectralField f = analyze(sample(g, [](double t) { return t * t * t; }), g);
  const SpectralField lf = laplacian_apply(f);
  for (double t : {-0.9, -0.2, 0.3, 0.8}) EXPECT_NEAR(lf.evaluate(t), 12 * t * t * t - 6 * t, 1e-12);
}

TEST(SpectralField, ConstantAndModeRoundTrip) {
  const auto g = build_grid(3, 10);
  const SpectralField c = SpectralField::constant(g, 2.5);
  for (double v : synthesize(c)) EXPECT_NEAR(v, 2.5, 1e-14);
  const SpectralField m = SpectralField::mode(g, 3);
  EXPECT_NEAR(inner(m, m), 1.0, 0.0);
  EXPECT_THROW(SpectralField::mode(g, 10), Error);
}

TEST(SpectralField, ReflectionAndDerivative) {
  const auto g = build_grid(2, 40);
  const SpectralField f = analyze(sample(g, [](double t) { return std::exp(t); }), g);
  const Eigen::VectorXd r = synthesize(reflect(f));
  const Eigen::VectorXd d = derivative_at_nodes(f);
  for (std::size_t k = 0; k < g->node_count(); ++k) {
    EXPECT_NEAR(r(k), std::exp(-g->nodes[k]), 1e-13);
    EXPECT_NEAR(d(k), std::exp(g->nodes[k]), 1e-11);
  }
}

TEST(SpectralField, LengthMismatchThrows) {
  const auto g = build_grid(2, 8);
  EXPECT_THROW(analyze(Eigen::VectorXd::Zero(3), g), Error);
  EXPECT_THROW(SpectralField(g, Eigen::VectorXd::Zero(5)), Error);
}
