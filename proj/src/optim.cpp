#include "molrl/optim.hpp"

#include <cmath>
#include <iostream>
#include <numbers>

namespace molrl::nc {

Optimizer::Optimizer(std::vector<Tensor> params, OptimConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  for (const auto& p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

double Optimizer::current_lr() const {
  if (cfg_.schedule == LrSchedule::Constant || cfg_.total_steps == 0) return cfg_.lr;
  const double t = std::min<double>(static_cast<double>(step_),
                                    static_cast<double>(cfg_.total_steps));
  return cfg_.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * t / cfg_.total_steps));
}

void Optimizer::step() {
  // gradient sanity + global norm
  double sq = 0.0;
  bool finite = true;
  for (const auto& p : params_) {
    const auto& g = p.grad();
    if (g.size() != p.size()) continue;  // unreachable parameter, treated as zero grad
    for (double x : g) {
      if (!std::isfinite(x)) finite = false;
      sq += x * x;
    }
  }
  if (!finite) {
    ++skipped_;
    std::cerr << "[molrl] optimizer: non-finite gradient, step " << step_ << " skipped\n";
    ++step_;
    return;
  }
  double clip = 1.0;
  if (cfg_.clip_norm > 0.0) {
    const double norm = std::sqrt(sq);
    if (norm > cfg_.clip_norm) clip = cfg_.clip_norm / norm;
  }
  const double lr = current_lr();
  const std::size_t t = step_ + 1;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    const auto& g = p.grad();
    if (g.size() != p.size()) continue;
    auto& vals = p.values();
    if (cfg_.kind == OptimKind::Sgd) {
      for (std::size_t j = 0; j < vals.size(); ++j) vals[j] -= lr * clip * g[j];
    } else {
      const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t));
      const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t));
      for (std::size_t j = 0; j < vals.size(); ++j) {
        const double gj = clip * g[j];
        m_[i][j] = cfg_.beta1 * m_[i][j] + (1.0 - cfg_.beta1) * gj;
        v_[i][j] = cfg_.beta2 * v_[i][j] + (1.0 - cfg_.beta2) * gj * gj;
        vals[j] -= lr * (m_[i][j] / bc1) / (std::sqrt(v_[i][j] / bc2) + cfg_.eps);
      }
    }
  }
  ++step_;
}

void Optimizer::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace molrl::nc
