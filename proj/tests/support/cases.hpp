#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "cala/hca.hpp"
#include "cala/param.hpp"
#include "cala/tac.hpp"
#include "reference.hpp"

namespace testing_support {

/// Random features and weights for one batch, shared by the engine losses and
/// the plain-vector oracles.
struct LossCase {
  cala::ParamStore store;
  cala::HcaParams hca;
  cala::TacParams tac;
  double tau = 0.1;
  std::vector<ref::Mat> f_r_bar, f_c, f_t, f_r_prime;
  ref::Mat queries, targets;
};

LossCase random_loss_case(std::uint64_t seed, std::size_t batch, std::size_t dim, std::size_t layers = 2,
                          bool share_text_projection = true);

double engine_tbia(const LossCase& c);
double engine_ctr(const LossCase& c);
double engine_qtm(const LossCase& c);
double oracle_tbia(const LossCase& c);
double oracle_ctr(const LossCase& c);
double oracle_qtm(const LossCase& c);

/// Applies the same permutation to every per-triplet list.
LossCase permuted(const LossCase& c, const std::vector<std::size_t>& order);

/// Largest relative error between the analytic gradient of f() and central
/// differences, over every entry of the given leaves.
double max_grad_error(const std::function<cala::Tensor()>& f, std::vector<cala::Tensor> leaves,
                      double step = 1e-5, double floor = 1e-8);

}  // namespace testing_support
