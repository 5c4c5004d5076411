#ifndef MOLRL_OPTIM_HPP
#define MOLRL_OPTIM_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "molrl/tensor.hpp"

namespace molrl::nc {

enum class OptimKind { Adam, Sgd };
enum class LrSchedule { Constant, Cosine };

struct OptimConfig {
  OptimKind kind = OptimKind::Adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  LrSchedule schedule = LrSchedule::Constant;
  std::size_t total_steps = 0;   // required for cosine
  double clip_norm = 5.0;        // global-norm clip; <=0 disables
};

// Per-parameter moment accumulators plus the step counter.
class Optimizer {
 public:
  Optimizer(std::vector<Tensor> params, OptimConfig cfg);

  // Applies one update from the gradients currently stored on the parameters.
  // A non-finite gradient anywhere skips the whole step and bumps the
  // incident counter.
  void step();
  void zero_grad();

  double current_lr() const;
  std::size_t step_count() const { return step_; }
  std::size_t skipped_steps() const { return skipped_; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  OptimConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t step_ = 0;
  std::size_t skipped_ = 0;
};

}  // namespace molrl::nc

#endif
