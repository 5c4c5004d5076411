#ifndef MOLRL_TENSOR_HPP
#define MOLRL_TENSOR_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace molrl::nc {

// Dense row-major tensor with reverse-mode autodiff. Shapes are 1-D or 2-D;
// a scalar is a [1,1] tensor. Values are stored as double; when the global
// dtype is Float32 every op result is rounded through float storage.

enum class Dtype { Float64, Float32 };

void set_default_dtype(Dtype d);
Dtype default_dtype();

struct TensorNode {
  std::vector<std::size_t> shape;
  std::vector<double> values;
  std::vector<double> grad;           // same length as values once backward ran
  bool requires_grad = false;
  std::uint64_t id = 0;               // creation order, parents always have smaller ids
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward_fn;  // accumulates into parents' grad

  std::size_t size() const { return values.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() > 1 ? shape[1] : 1; }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<std::size_t> shape, double v, bool requires_grad = false);
  static Tensor from_values(std::vector<std::size_t> shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<std::size_t>& shape() const { return node_->shape; }
  std::size_t size() const { return node_->size(); }
  std::size_t rows() const { return node_->rows(); }
  std::size_t cols() const { return node_->cols(); }
  bool requires_grad() const { return node_->requires_grad; }

  const std::vector<double>& values() const { return node_->values; }
  std::vector<double>& values() { return node_->values; }
  const std::vector<double>& grad() const { return node_->grad; }

  double item() const;
  double at(std::size_t r, std::size_t c) const;

  void zero_grad();

  std::shared_ptr<TensorNode> node() const { return node_; }

 private:
  std::shared_ptr<TensorNode> node_;
};

// ---- primitives ----
// Every op records itself on the implicit tape (the node graph) when any
// input requires gradients.

Tensor add(const Tensor& a, const Tensor& b);          // same shape, or b is a [1,N] row bias
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);          // elementwise, same shape
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor tanh_t(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp_t(const Tensor& a);
Tensor log_t(const Tensor& a);
Tensor reciprocal(const Tensor& a);
Tensor clamp_max(const Tensor& a, double cap);         // zero gradient where clamped
Tensor softmax_rows(const Tensor& a);
Tensor log_softmax_rows(const Tensor& a);
Tensor sum_all(const Tensor& a);                       // -> scalar
Tensor row_sums(const Tensor& a);                      // [R,C] -> [R,1]
Tensor mean_all(const Tensor& a);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, std::size_t from, std::size_t to);
Tensor slice_cols(const Tensor& a, std::size_t from, std::size_t to);
Tensor reshape(const Tensor& a, std::vector<std::size_t> shape);
Tensor embedding(const Tensor& table, const std::vector<int>& ids);  // [V,D] -> [T,D]
Tensor gather2d(const Tensor& a, const std::vector<std::pair<std::size_t, std::size_t>>& idx);  // -> [N,1]
Tensor layer_norm_rows(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
// Mean cross-entropy of row-wise logits against integer targets; rows with
// mask=false are excluded from the average.
Tensor cross_entropy_rows(const Tensor& logits, const std::vector<int>& targets,
                          const std::vector<bool>& mask = {});

// Backward pass from a scalar loss. Fills .grad on every reachable node that
// requires gradients; visits each node exactly once in reverse creation order.
void backward(const Tensor& loss);

// Detach: same values, no history.
Tensor detach(const Tensor& a);

}  // namespace molrl::nc

#endif
