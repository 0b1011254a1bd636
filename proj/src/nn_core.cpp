#include "nn_core.hpp"

#include <algorithm>
#include <cmath>

namespace fcl {

DenseLayer::DenseLayer(int out, int in)
    : w(out, in), b(static_cast<size_t>(out), 0.0), gw(out, in), gb(static_cast<size_t>(out), 0.0) {}

void DenseLayer::init_uniform(Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(std::max(1, in_dim())));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (auto& v : w.d) v = u(rng);
  for (auto& v : b) v = u(rng);
}

void DenseLayer::zero_grad() {
  std::fill(gw.d.begin(), gw.d.end(), 0.0);
  std::fill(gb.begin(), gb.end(), 0.0);
}

Vec DenseLayer::forward(const Vec& x) const {
  require(static_cast<int>(x.size()) == in_dim(), "DenseLayer: input size mismatch");
  Vec y(b);
  for (int r = 0; r < w.rows; ++r) {
    double s = 0.0;
    const double* wr = &w.d[static_cast<size_t>(r) * w.cols];
    for (int c = 0; c < w.cols; ++c) s += wr[c] * x[c];
    y[r] += s;
  }
  return y;
}

Vec DenseLayer::backward(const Vec& x, const Vec& dy) {
  require(static_cast<int>(dy.size()) == out_dim(), "DenseLayer: grad size mismatch");
  Vec dx(static_cast<size_t>(in_dim()), 0.0);
  for (int r = 0; r < w.rows; ++r) {
    double g = dy[r];
    gb[r] += g;
    double* gwr = &gw.d[static_cast<size_t>(r) * w.cols];
    const double* wr = &w.d[static_cast<size_t>(r) * w.cols];
    for (int c = 0; c < w.cols; ++c) {
      gwr[c] += g * x[c];
      dx[c] += g * wr[c];
    }
  }
  return dx;
}

void DenseLayer::collect(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".w", w.d.data(), gw.d.data(), w.d.size()});
  out.push_back({prefix + ".b", b.data(), gb.data(), b.size()});
}

void Mlp2::init_uniform(Rng& rng) {
  layer1.init_uniform(rng);
  layer2.init_uniform(rng);
}

void Mlp2::zero_grad() {
  layer1.zero_grad();
  layer2.zero_grad();
}

Vec Mlp2::forward(const Vec& x, Mlp2Cache* cache) const {
  Vec h_pre = layer1.forward(x);
  Vec h = h_pre;
  for (auto& v : h) v = std::max(0.0, v);
  Vec y = layer2.forward(h);
  if (cache) {
    cache->x = x;
    cache->h_pre = std::move(h_pre);
    cache->h = std::move(h);
  }
  return y;
}

Vec Mlp2::backward(const Mlp2Cache& cache, const Vec& dy) {
  Vec dh = layer2.backward(cache.h, dy);
  for (size_t i = 0; i < dh.size(); ++i)
    if (cache.h_pre[i] <= 0.0) dh[i] = 0.0;
  return layer1.backward(cache.x, dh);
}

void Mlp2::collect(const std::string& prefix, std::vector<ParamRef>& out) {
  layer1.collect(prefix + ".l1", out);
  layer2.collect(prefix + ".l2", out);
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

static double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double bce_loss(const Vec& logits, const BitVec& targets, Vec* dlogits, const Vec* weights) {
  require(logits.size() == targets.size(), "bce_loss: length mismatch");
  if (weights) require(weights->size() == logits.size(), "bce_loss: weight length mismatch");
  double loss = 0.0;
  if (dlogits) dlogits->assign(logits.size(), 0.0);
  for (size_t c = 0; c < logits.size(); ++c) {
    require(targets[c] == 0 || targets[c] == 1, "bce_loss: non-binary target");
    double w = weights ? (*weights)[c] : 1.0;
    double z = logits[c];
    double t = targets[c];
    loss += w * (softplus(z) - t * z);
    if (dlogits) (*dlogits)[c] = w * (sigmoid(z) - t);
  }
  return loss;
}

void SgdState::init(const std::vector<ParamRef>& params) {
  velocity.clear();
  velocity.reserve(params.size());
  for (const auto& p : params) velocity.emplace_back(p.size, 0.0);
}

void SgdState::step(std::vector<ParamRef>& params) {
  require(velocity.size() == params.size(), "sgd_step: state/params mismatch");
  for (size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    auto& v = velocity[i];
    require(v.size() == p.size, "sgd_step: velocity shape mismatch");
    for (size_t k = 0; k < p.size; ++k) {
      double g = p.grad[k];
      if (std::isnan(g))
        throw std::invalid_argument("sgd_step: NaN gradient in " + p.name);
      v[k] = momentum * v[k] + g + weight_decay * p.data[k];
      p.data[k] -= lr * v[k];
    }
  }
}

double cosine_lr(double base_lr, long step, long total_steps) {
  require(step >= 0 && total_steps > 0, "cosine_lr: bad step counts");
  if (step > total_steps) step = total_steps;
  return 0.5 * base_lr * (1.0 + std::cos(M_PI * static_cast<double>(step) / total_steps));
}

GradCheckReport grad_check(const std::function<double(bool)>& f,
                           std::vector<ParamRef>& params, double h, double tol) {
  require(h > 0.0, "grad_check: h must be positive");
  f(true);  // fill analytic gradients
  std::vector<Vec> analytic;
  for (const auto& p : params) analytic.emplace_back(p.grad, p.grad + p.size);

  GradCheckReport rep;
  for (size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    for (size_t k = 0; k < p.size; ++k) {
      double orig = p.data[k];
      p.data[k] = orig + h;
      double lp = f(false);
      p.data[k] = orig - h;
      double lm = f(false);
      p.data[k] = orig;
      double numeric = (lp - lm) / (2.0 * h);
      double a = analytic[i][k];
      double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      if (err > rep.max_rel_error) {
        rep.max_rel_error = err;
        rep.worst_param = p.name;
        rep.worst_index = k;
      }
    }
  }
  // restore analytic gradients for the caller
  f(true);
  rep.pass = rep.max_rel_error <= tol;
  return rep;
}

}  // namespace fcl
