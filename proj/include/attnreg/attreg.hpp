#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "attnreg/core_linalg.hpp"
#include "attnreg/optim.hpp"

namespace attnreg {

/// One attention head: metric Ω = L L' with L lower triangular, and its
/// weight in the output mixture.
struct AttentionHead {
  Matrix factor;
  double alpha = 1.0;

  Matrix metric() const { return factor * factor.transpose(); }
};

struct AttRegConfig {
  int heads = 5;
  double ridge_penalty = 1e-3;
  double init_noise_scale = 0.01;
  int max_iterations = 500;
  double improvement_tol = 1e-6;
  int patience = 10;
  bool diagonal_mask = false;
  std::uint64_t seed = 0;

  void validate() const;
};

struct FitDiagnostics {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int iterations = 0;
  optim::StopReason stop_reason = optim::StopReason::max_iterations;
  std::vector<double> loss_history;  // accepted iterates, starting point first
};

struct MultiHeadModel {
  std::vector<AttentionHead> heads;
  DesignMatrix train_x;
  Vector train_y;
  AttRegConfig config;
  FitDiagnostics diagnostics;

  MultiHeadModel(std::vector<AttentionHead> heads, DesignMatrix train_x, Vector train_y,
                 AttRegConfig config);

  Eigen::Index dim() const noexcept { return train_x.cols(); }
};

struct ModelGradient {
  std::vector<Matrix> factors;  // lower triangular, upper slots exactly 0
  Vector alphas;
};

/// L_m = √N · chol((X'X + λI)^{-1}) plus lower-triangular Gaussian noise with
/// sd init_noise_scale·‖base‖_F/P; α_m = 1/M. Reproducible from config.seed.
std::vector<AttentionHead> init_heads(const DesignMatrix& x_train, const AttRegConfig& config);

/// Σ_m α_m softmax(X_q Ω_m X_train') y_train. Masks the self-attention
/// diagonal when config.diagonal_mask is set and `x_query` equals the
/// training design.
Vector forward(const MultiHeadModel& model, const DesignMatrix& x_query);

/// Same as forward with the training-set mask never applied.
Vector predict(const MultiHeadModel& model, const DesignMatrix& x_test);

/// ‖y − ŷ_train‖² + λ Σ_m ‖L_m‖_F².
double loss(const MultiHeadModel& model);

ModelGradient loss_gradient(const MultiHeadModel& model);

MultiHeadModel fit(const DesignMatrix& x_train, const Vector& y, const AttRegConfig& config);

/// Flat parameter layout used by the optimizer: for each head the lower
/// triangle of L_m row-major, then α_1..α_M.
Vector pack_parameters(const std::vector<AttentionHead>& heads);
void unpack_parameters(const Vector& theta, std::vector<AttentionHead>& heads);

/// Text dump, format version 1. Doubles use 17 significant digits so a
/// write/read cycle reproduces every parameter bit for bit.
void save_model(std::ostream& out, const MultiHeadModel& model);
MultiHeadModel load_model(std::istream& in);

inline constexpr int kModelFormatVersion = 1;

}  // namespace attnreg
