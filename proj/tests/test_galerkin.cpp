#include <doctest.h>

#include <cmath>

#include "oracles/oracles.hpp"
#include "sgfem/field.hpp"
#include "sgfem/galerkin.hpp"
#include "sgfem/mesh.hpp"
#include "sgfem/rng.hpp"

using namespace sgfem;

namespace {

const auto one = [](const Vec2&) { return 1.0; };

DiscreteCoefficient unit_coefficient(const Mesh2D& mesh) {
  return DiscreteCoefficient::dense({}, Eigen::MatrixXd::Ones(mesh.vertex_count(), 1));
}

/// Small two-mode lognormal fixture shared by the coupled-system tests.
struct SmallInstance {
  Mesh2D mesh;
  AffineField field;
  ModeScaling scaling;
  std::vector<int> dhat;
  DiscreteCoefficient coeff;
  MultiIndexSet lambda;

  explicit SmallInstance(double h0 = 0.34, std::vector<int> dims = {2, 2})
      : mesh(initial_unit_square(h0)), lambda(std::move(dims)) {
    field.modes = {[](const Vec2& x) { return 0.5 * std::cos(2.0 * M_PI * x[0]); },
                   [](const Vec2& x) { return 0.3 * std::sin(1.0 + 2.0 * M_PI * x[1]); }};
    field.sup_norms = {0.5, 0.3};
    scaling = ModeScaling(field.sup_norms, 1.0, 0.25);
    dhat = {3, 3};
    coeff = expand_lognormal(field, scaling, dhat, mesh);
  }
};

}  // namespace

TEST_CASE("five-point stencil on the structured unit square") {
  const Mesh2D mesh = initial_unit_square(0.25);
  const FESpace space(mesh);
  const SparseMat k = assemble_stiffness(space, Eigen::VectorXd::Ones(space.node_count()));
  // interior node of the criss-cross P1 pattern carries diagonal 4 and -1 neighbours
  for (int v = 0; v < space.node_count(); ++v) {
    const int f = space.free_index(v);
    if (f < 0) continue;
    CHECK(k.coeff(f, f) == doctest::Approx(4.0).epsilon(1e-13));
  }
  double offdiag_sum = 0.0;
  for (int outer = 0; outer < k.outerSize(); ++outer)
    for (SparseMat::InnerIterator it(k, outer); it; ++it)
      if (it.row() != it.col()) {
        CHECK(it.value() <= 1e-13);
        offdiag_sum += it.value();
      }
  CHECK(offdiag_sum < 0.0);
}

TEST_CASE("stiffness is bilinear in the coefficient") {
  const Mesh2D mesh = initial_lshape(0.25);
  const FESpace space(mesh);
  REQUIRE(space.free_count() > 0);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(space.node_count());
  const SparseMat k1 = assemble_stiffness(space, ones);
  const SparseMat kc = assemble_stiffness(space, 3.5 * ones);
  const Eigen::MatrixXd diff = Eigen::MatrixXd(kc) - 3.5 * Eigen::MatrixXd(k1);
  CHECK(diff.cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("stiffness symmetry for random coefficients") {
  const Mesh2D mesh = initial_lshape(0.34);
  const FESpace space(mesh);
  GaussianSampler rng(5);
  Eigen::VectorXd a(space.node_count());
  for (int j = 0; j < space.node_count(); ++j) a(j) = 1.5 + 0.5 * rng.normal();
  const SparseMat k = assemble_stiffness(space, a);
  const Eigen::MatrixXd dense = Eigen::MatrixXd(k);
  CHECK((dense - dense.transpose()).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("load tensor examples") {
  const Mesh2D mesh = initial_unit_square(0.5);
  const FESpace space(mesh);
  const MultiIndexSet lambda({2});

  const CoeffTensor zero = assemble_rhs(space, [](const Vec2&) { return 0.0; }, lambda);
  CHECK(zero.values.cwiseAbs().maxCoeff() == 0.0);

  const CoeffTensor b = assemble_rhs(space, one, lambda);
  for (int v = 0; v < space.node_count(); ++v) {
    if (space.is_dirichlet(v)) {
      CHECK(b.values(v, 0) == 0.0);
      continue;
    }
    // exact P1 load: sum of |T|/3 over elements containing the node
    double expected = 0.0;
    for (int t = 0; t < mesh.triangle_count(); ++t) {
      const auto& tv = mesh.triangle(t).v;
      if (tv[0] == v || tv[1] == v || tv[2] == v) expected += mesh.area(t) / 3.0;
    }
    CHECK(b.values(v, 0) == doctest::Approx(expected).epsilon(1e-14));
  }
  // nonzero chaos columns vanish for deterministic sources
  CHECK(b.values.col(1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("solver returns zero for a zero load") {
  const Mesh2D mesh = initial_unit_square(0.5);
  const FESpace space(mesh);
  const MultiIndexSet lambda({2});
  AffineField field;
  field.modes = {[](const Vec2&) { return 0.2; }};
  field.sup_norms = {0.2};
  const ModeScaling scaling(field.sup_norms, 1.0, 0.1);
  const DiscreteCoefficient coeff = expand_lognormal(field, scaling, {3}, mesh);
  const GalerkinOperator op(space, coeff, lambda, 0.0);
  const CoeffTensor rhs(space.node_count(), lambda);
  const SolveReport report = solve(op, rhs);
  CHECK(report.iterations == 0);
  CHECK(report.solution.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("deterministic solve matches a dense oracle") {
  const Mesh2D mesh = initial_lshape(0.34);
  const FESpace space(mesh);
  const MultiIndexSet lambda(std::vector<int>{});
  const DiscreteCoefficient coeff = unit_coefficient(mesh);
  const GalerkinOperator op(space, coeff, lambda, 0.0);
  const CoeffTensor rhs = assemble_rhs(space, one, lambda);
  const SolveReport report = solve(op, rhs, 1e-12, 2000);

  const SparseMat k = assemble_stiffness(space, Eigen::VectorXd::Ones(space.node_count()));
  Eigen::VectorXd b(space.free_count());
  for (int v = 0; v < space.node_count(); ++v)
    if (space.free_index(v) >= 0) b(space.free_index(v)) = rhs.values(v, 0);
  const Eigen::VectorXd direct = Eigen::MatrixXd(k).ldlt().solve(b);
  for (int v = 0; v < space.node_count(); ++v) {
    const int f = space.free_index(v);
    if (f >= 0) CHECK(report.solution.values(v, 0) == doctest::Approx(direct(f)).epsilon(1e-9));
  }
}

TEST_CASE("operator is symmetric and block diagonal for the unit coefficient") {
  const Mesh2D mesh = initial_unit_square(0.5);
  const FESpace space(mesh);
  const MultiIndexSet lambda({2, 2});
  AffineField field;
  field.modes = {[](const Vec2&) { return 0.0; }, [](const Vec2&) { return 0.0; }};
  field.sup_norms = {0.0, 0.0};
  const ModeScaling scaling(field.sup_norms, 1.0, 0.2);
  const DiscreteCoefficient coeff = expand_lognormal(field, scaling, {2, 2}, mesh);
  const GalerkinOperator op(space, coeff, lambda, 0.0);

  GaussianSampler rng(9);
  Eigen::MatrixXd v(space.free_count(), 4), w(space.free_count(), 4);
  for (int i = 0; i < space.free_count(); ++i)
    for (int c = 0; c < 4; ++c) {
      v(i, c) = rng.normal();
      w(i, c) = rng.normal();
    }
  const double vw = (op.apply(v).cwiseProduct(w)).sum();
  const double wv = (op.apply(w).cwiseProduct(v)).sum();
  CHECK(vw == doctest::Approx(wv).epsilon(1e-12));

  // unit coefficient: identical deterministic block per chaos index, no coupling
  const Eigen::MatrixXd av = op.apply(v);
  const SparseMat k = assemble_stiffness(space, Eigen::VectorXd::Ones(space.node_count()));
  const Eigen::MatrixXd expected = k * v;
  CHECK((av - expected).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("operator symmetry for the coupled lognormal instance") {
  const SmallInstance inst;
  const FESpace space(inst.mesh);
  const GalerkinOperator op(space, inst.coeff, inst.lambda, 0.0);
  GaussianSampler rng(13);
  Eigen::MatrixXd v(space.free_count(), static_cast<Eigen::Index>(inst.lambda.size()));
  Eigen::MatrixXd w(space.free_count(), static_cast<Eigen::Index>(inst.lambda.size()));
  for (Eigen::Index i = 0; i < v.rows(); ++i)
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
      v(i, c) = rng.normal();
      w(i, c) = rng.normal();
    }
  const double vw = (op.apply(v).cwiseProduct(w)).sum();
  const double wv = (op.apply(w).cwiseProduct(v)).sum();
  CHECK(std::abs(vw - wv) <= 1e-12 * std::max(std::abs(vw), 1.0));
}

TEST_CASE("matrix-free action matches the materialized matrix") {
  const SmallInstance inst;
  const FESpace space(inst.mesh);
  const GalerkinOperator op(space, inst.coeff, inst.lambda, 0.0);
  const Eigen::MatrixXd dense = op.materialize();
  GaussianSampler rng(17);
  Eigen::MatrixXd v(space.free_count(), static_cast<Eigen::Index>(inst.lambda.size()));
  for (Eigen::Index i = 0; i < v.rows(); ++i)
    for (Eigen::Index c = 0; c < v.cols(); ++c) v(i, c) = rng.normal();
  const Eigen::MatrixXd av = op.apply(v);
  Eigen::VectorXd flat(v.size());
  for (Eigen::Index i = 0; i < v.rows(); ++i)
    for (Eigen::Index c = 0; c < v.cols(); ++c) flat(i * v.cols() + c) = v(i, c);
  const Eigen::VectorXd dv = dense * flat;
  double max_diff = 0.0;
  for (Eigen::Index i = 0; i < v.rows(); ++i)
    for (Eigen::Index c = 0; c < v.cols(); ++c)
      max_diff = std::max(max_diff, std::abs(av(i, c) - dv(i * v.cols() + c)));
  CHECK(max_diff <= 1e-12 * std::max(1.0, dense.cwiseAbs().maxCoeff()));
}

TEST_CASE("coupled solve matches the brute-force quadrature oracle") {
  const SmallInstance inst;
  const FESpace space(inst.mesh);
  REQUIRE(space.free_count() <= 30);
  REQUIRE(inst.lambda.size() <= 4);

  const GalerkinOperator op(space, inst.coeff, inst.lambda, 0.0);
  const CoeffTensor rhs = assemble_rhs(space, one, inst.lambda);
  const SolveReport report = solve(op, rhs, 1e-12, 5000);

  const auto oracle = oracles::brute_force_galerkin(space, inst.coeff, inst.lambda, inst.scaling, one);
  double max_diff = 0.0;
  double max_val = 0.0;
  for (int v = 0; v < space.node_count(); ++v) {
    const int f = space.free_index(v);
    if (f < 0) continue;
    for (std::size_t b = 0; b < inst.lambda.size(); ++b) {
      const double mine = report.solution.values(v, static_cast<Eigen::Index>(b));
      const double theirs = oracle.solution(f * static_cast<long>(inst.lambda.size()) + static_cast<long>(b));
      max_diff = std::max(max_diff, std::abs(mine - theirs));
      max_val = std::max(max_val, std::abs(theirs));
    }
  }
  CHECK(max_diff <= 1e-8);
  CHECK(max_val > 0.0);
}

TEST_CASE("energy is monotone under uniform refinement") {
  const AffineField field = benchmark_modes(2, 2.0);
  const ModeScaling scaling(field.sup_norms, 1.0, 0.1);
  const std::vector<int> dhat = {4, 3};
  const MultiIndexSet lambda({2, 2});
  Mesh2D mesh = initial_lshape(0.34);
  double last = -1.0;
  for (int level = 0; level < 3; ++level) {
    const FESpace space(mesh);
    const DiscreteCoefficient coeff = expand_lognormal(field, scaling, dhat, mesh);
    const GalerkinOperator op(space, coeff, lambda, 1e-14);
    const CoeffTensor rhs = assemble_rhs(space, one, lambda);
    const SolveReport report = solve(op, rhs, 1e-11, 5000);
    const double energy = op.energy_product(report.solution, report.solution);
    CHECK(energy > last * (1.0 - 1e-6));
    CHECK(energy > 0.0);
    last = energy;
    mesh = uniform_refine(mesh, 1);
  }
}

TEST_CASE("prolongation reproduces nodal values and pads chaos columns") {
  const Mesh2D coarse = initial_unit_square(0.5);
  const auto [fine, map] = uniform_refine_mapped(coarse);
  const MultiIndexSet lc({2});
  CoeffTensor u(coarse.vertex_count(), lc);
  // nodal interpolant of 1 + 2x - y in both chaos columns
  for (int v = 0; v < coarse.vertex_count(); ++v) {
    const Vec2& p = coarse.vertex(v);
    u.values(v, 0) = 1.0 + 2.0 * p[0] - p[1];
    u.values(v, 1) = 0.5 * p[0];
  }
  const MultiIndexSet lf({3});
  const CoeffTensor lifted = prolong_tensor(u, map, lf);
  REQUIRE(lifted.values.rows() == fine.vertex_count());
  for (int v = 0; v < fine.vertex_count(); ++v) {
    const Vec2& p = fine.vertex(v);
    CHECK(lifted.values(v, 0) == doctest::Approx(1.0 + 2.0 * p[0] - p[1]).epsilon(1e-14));
    CHECK(lifted.values(v, 1) == doctest::Approx(0.5 * p[0]).epsilon(1e-14));
    CHECK(lifted.values(v, 2) == 0.0);
  }
}
