#pragma once

#include "warpu/rng.hpp"

#include <Eigen/Dense>

#include <utility>

namespace warpu {

struct TransportPlan {
  Eigen::MatrixXd joint;  // marginals p (rows) and q (columns)
  double objective = 0.0;  // sum of joint .* cost
  int pivots = 0;
};

// Exact discrete optimal transport by the transportation simplex: north-west
// corner start, MODI potentials, Bland's rule for both entering and leaving
// cells. Flows are recomputed from the final basis tree so the marginals
// match p and q to rounding.
TransportPlan discrete_ot_coupling(const Eigen::VectorXd& p, const Eigen::VectorXd& q, const Eigen::MatrixXd& cost);

// Draw a cell of the joint with one uniform.
std::pair<int, int> sample_plan(const Eigen::MatrixXd& joint, double u);

}  // namespace warpu
