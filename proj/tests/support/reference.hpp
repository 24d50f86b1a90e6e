#pragma once

// Straight-line reference implementations on plain vectors. Nothing here
// touches the Tensor engine, so these serve as independent oracles.

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "cala/tensor.hpp"

namespace ref {

struct Mat {
  std::size_t r = 0, c = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(std::size_t rows, std::size_t cols) : r(rows), c(cols), v(rows * cols, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return v[i * c + j]; }
  double operator()(std::size_t i, std::size_t j) const { return v[i * c + j]; }
};

Mat from(const cala::Tensor& t);
cala::Tensor to_tensor(const Mat& m, bool requires_grad = false);
Mat random(std::mt19937_64& rng, std::size_t r, std::size_t c, double scale = 1.0);

Mat matmul(const Mat& a, const Mat& b);
Mat transpose(const Mat& a);
std::vector<double> row(const Mat& a, std::size_t i);
std::vector<double> row_mean(const Mat& a);
double dot(const std::vector<double>& a, const std::vector<double>& b);
double cosine(const std::vector<double>& a, const std::vector<double>& b);
std::vector<double> normalized(const std::vector<double>& a);
std::vector<double> softmax(const std::vector<double>& x);

/// softmax(Xq Wq (Xkv Wk)^T / sqrt(d)) Xkv Wv, single head.
Mat attention(const Mat& xq, const Mat& xkv, const Mat& wq, const Mat& wk, const Mat& wv);

/// -mean_i log softmax_j(s_ij / tau)[i]
double contrastive(const std::vector<std::vector<double>>& sims, double tau);

struct HcaWeights {
  Mat w_r, w_c, w_c_prime, w_t, w_v;
};

struct TbiaTriplet {
  Mat f_r_bar, f_c, f_t;
};

double tbia_loss(const std::vector<TbiaTriplet>& batch, const HcaWeights& w, double tau);

struct BranchWeights {
  Mat wq, wk, wv;
};

struct CtrTriplet {
  Mat f_r_prime, f_t, f_c;
};

/// Composite visual vector: mean of the two branch CLS rows, normalized.
std::vector<double> compose(const Mat& f_r_prime, const Mat& f_t, const BranchWeights& target_branch,
                            const BranchWeights& reference_branch, std::size_t layers);

double ctr_loss(const std::vector<CtrTriplet>& batch, const BranchWeights& target_branch,
                const BranchWeights& reference_branch, std::size_t layers, double tau);

/// Queries and targets are raw rows; the oracle normalizes both.
double qtm_loss(const Mat& queries, const Mat& targets, double tau);

/// Full sort of the gallery by (score desc, id asc); returns 1-based rank of target.
std::size_t brute_rank(const std::vector<double>& scores, const std::vector<std::string>& ids,
                       const std::string& target);

}  // namespace ref
