#include "test_support.hpp"
#include "warpu/errors.hpp"
#include "warpu/rng.hpp"
#include "warpu/transport.hpp"

#include <catch_amalgamated.hpp>

using namespace warpu;
using Catch::Approx;

namespace {

Eigen::VectorXd random_simplex(int n, CounterRng& rng) {
  Eigen::VectorXd v(n);
  for (auto& x : v) x = -std::log(rng.uniform());
  return v / v.sum();
}

void check_marginals(const TransportPlan& plan, const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  CHECK((plan.joint.rowwise().sum() - p).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((plan.joint.colwise().sum().transpose() - q).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(plan.joint.minCoeff() >= 0.0);
}

}  // namespace

TEST_CASE("identical marginals on a shared support", "[ot]") {
  const Eigen::Vector3d x(0.0, 1.0, 3.0);
  Eigen::MatrixXd cost(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) cost(i, j) = (x[i] - x[j]) * (x[i] - x[j]);
  const Eigen::Vector3d p(0.2, 0.5, 0.3);
  const auto plan = discrete_ot_coupling(p, p, cost);
  CHECK(plan.objective == 0.0);
  CHECK((plan.joint - Eigen::MatrixXd(p.asDiagonal())).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("degenerate marginal forces the plan", "[ot]") {
  const Eigen::Vector2d p(1.0, 0.0), q(0.5, 0.5);
  Eigen::Matrix2d cost;
  cost << 0.0, 1.0, 1.0, 0.0;
  const auto plan = discrete_ot_coupling(p, q, cost);
  CHECK(plan.joint(0, 0) == Approx(0.5));
  CHECK(plan.joint(0, 1) == Approx(0.5));
  CHECK(plan.joint.row(1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(plan.objective == Approx(0.5));
}

TEST_CASE("infeasible marginals are rejected", "[ot]") {
  Eigen::Matrix2d cost = Eigen::Matrix2d::Ones();
  CHECK_THROWS_AS(discrete_ot_coupling(Eigen::Vector2d(0.7, 0.7), Eigen::Vector2d(0.5, 0.5), cost), InputError);
  CHECK_THROWS_AS(discrete_ot_coupling(Eigen::Vector2d(1.2, -0.2), Eigen::Vector2d(0.5, 0.5), cost), InputError);
  cost(0, 1) = -1.0;
  CHECK_THROWS_AS(discrete_ot_coupling(Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(0.5, 0.5), cost), InputError);
}

TEST_CASE("random 4x4 instances match the exhaustive optimum", "[ot]") {
  CounterRng rng(11);
  for (int rep = 0; rep < 200; ++rep) {
    const Eigen::VectorXd p = random_simplex(4, rng), q = random_simplex(4, rng);
    Eigen::MatrixXd cost(4, 4);
    for (auto& c : cost.reshaped()) c = 10.0 * rng.uniform();
    const auto plan = discrete_ot_coupling(p, q, cost);
    check_marginals(plan, p, q);
    REQUIRE(plan.objective == Approx(brute_force_ot(p, q, cost)).margin(1e-9));
    CHECK(plan.objective == Approx((plan.joint.array() * cost.array()).sum()).margin(1e-12));
    CHECK(plan.objective <= (p * q.transpose()).cwiseProduct(cost).sum() + 1e-12);
  }
}

TEST_CASE("ties and zero mass do not cycle", "[ot]") {
  CounterRng rng(12);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 2 + static_cast<int>(rng.uniform() * 7);
    Eigen::VectorXd p = random_simplex(n, rng), q = random_simplex(n, rng);
    if (rep % 2) {
      p[0] = 0.0;
      q[n - 1] = 0.0;
      p /= p.sum();
      q /= q.sum();
    }
    Eigen::MatrixXd cost(n, n);
    for (auto& c : cost.reshaped()) c = std::floor(3.0 * rng.uniform());  // many ties
    const auto plan = discrete_ot_coupling(p, q, cost);
    check_marginals(plan, p, q);
    CHECK(plan.objective <= (p * q.transpose()).cwiseProduct(cost).sum() + 1e-12);
    if (n <= 4) CHECK(plan.objective == Approx(brute_force_ot(p, q, cost)).margin(1e-9));
  }
}

TEST_CASE("sampling a plan cell", "[ot]") {
  Eigen::Matrix2d j;
  j << 0.1, 0.2, 0.3, 0.4;
  CHECK(sample_plan(j, 0.05) == std::pair{0, 0});
  CHECK(sample_plan(j, 0.25) == std::pair{0, 1});
  CHECK(sample_plan(j, 0.55) == std::pair{1, 0});
  CHECK(sample_plan(j, 0.999) == std::pair{1, 1});
}
