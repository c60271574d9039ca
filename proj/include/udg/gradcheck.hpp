#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace udg {

// Central finite differences (step 1e-5, double precision) against the
// analytic gradients of the losses and of the full graph network. A check
// passes when the worst relative error stays below 1e-4.
struct GradCheckReport {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t n_parameters = 0;
  bool pass = false;
};

inline constexpr double kGradCheckStep = 1e-5;
inline constexpr double kGradCheckTolerance = 1e-4;

// |analytic - numeric| / max(|analytic|, |numeric|, 1).
double gradient_rel_error(double analytic, double numeric);

// Central-difference derivative of eval at *param.
double central_difference(double* param, const std::function<double()>& eval,
                          double step = kGradCheckStep);

GradCheckReport gradcheck_oim(std::uint64_t seed);

// Covers both distance kinds, hinge active and inactive, at least 1e-2 away
// from the hinge boundary.
GradCheckReport gradcheck_triplet(std::uint64_t seed);

// Whole network: adjacency powers, concatenation, ReLU (pre-activations at
// least 1e-3 from zero), softmax and cross-entropy. Depth 3, powers {0,1,2},
// 20 nodes or fewer.
GradCheckReport gradcheck_net(std::uint64_t seed);

std::vector<GradCheckReport> run_all_gradchecks(std::uint64_t seed);

}  // namespace udg
