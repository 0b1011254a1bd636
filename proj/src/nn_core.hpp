#pragma once

#include <functional>
#include <string>
#include <vector>

#include "common.hpp"

namespace fcl {

// Named view of one parameter tensor plus its gradient accumulator.
struct ParamRef {
  std::string name;
  double* data = nullptr;
  double* grad = nullptr;
  size_t size = 0;
};

struct DenseLayer {
  Mat w;   // out x in
  Vec b;   // out
  Mat gw;
  Vec gb;

  DenseLayer() = default;
  DenseLayer(int out, int in);

  int in_dim() const { return w.cols; }
  int out_dim() const { return w.rows; }

  void init_uniform(Rng& rng);  // uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)]
  void zero_grad();
  Vec forward(const Vec& x) const;
  // Accumulates gw/gb and returns dL/dx. x must be the forward input.
  Vec backward(const Vec& x, const Vec& dy);
  void collect(const std::string& prefix, std::vector<ParamRef>& out);
};

struct Mlp2Cache {
  Vec x;
  Vec h_pre;  // layer1 pre-activation
  Vec h;      // relu(h_pre)
};

// Two dense layers with a rectifier in between.
struct Mlp2 {
  DenseLayer layer1;
  DenseLayer layer2;

  Mlp2() = default;
  Mlp2(int in, int hidden, int out) : layer1(hidden, in), layer2(out, hidden) {}

  int in_dim() const { return layer1.in_dim(); }
  int out_dim() const { return layer2.out_dim(); }

  void init_uniform(Rng& rng);
  void zero_grad();
  Vec forward(const Vec& x, Mlp2Cache* cache = nullptr) const;
  Vec backward(const Mlp2Cache& cache, const Vec& dy);
  void collect(const std::string& prefix, std::vector<ParamRef>& out);
};

// Numerically stable multi-label BCE on logits.
// loss = sum_c w_c * (softplus(z_c) - t_c * z_c); dlogits = w .* (sigmoid(z) - t)
double bce_loss(const Vec& logits, const BitVec& targets, Vec* dlogits,
                const Vec* weights = nullptr);

double sigmoid(double z);

struct SgdState {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::vector<Vec> velocity;  // one buffer per ParamRef, matching sizes

  void init(const std::vector<ParamRef>& params);
  // v <- mu*v + g + wd*theta; theta <- theta - lr*v. Rejects NaN gradients.
  void step(std::vector<ParamRef>& params);
};

// lr = 0.5*base*(1 + cos(pi * step/total)); step past total clamps to 0
double cosine_lr(double base_lr, long step, long total_steps);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  size_t worst_index = 0;
  bool pass = false;
};

// f() must recompute the scalar loss from the current parameter values and,
// when fill_grads is true, leave analytic gradients in the grad buffers.
GradCheckReport grad_check(const std::function<double(bool fill_grads)>& f,
                           std::vector<ParamRef>& params, double h, double tol);

}  // namespace fcl
