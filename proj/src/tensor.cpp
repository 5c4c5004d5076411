#include "molrl/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace molrl::nc {

namespace {

std::atomic<std::uint64_t> g_next_id{1};
Dtype g_dtype = Dtype::Float64;

std::string shape_str(const std::vector<std::size_t>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

[[noreturn]] void shape_error(const char* op, const std::vector<std::size_t>& a,
                              const std::vector<std::size_t>& b) {
  throw std::invalid_argument(std::string("shape mismatch in ") + op + ": " + shape_str(a) +
                              " vs " + shape_str(b));
}

void round_dtype(std::vector<double>& v) {
  if (g_dtype == Dtype::Float32) {
    for (double& x : v) x = static_cast<double>(static_cast<float>(x));
  }
}

std::shared_ptr<TensorNode> make_node(std::vector<std::size_t> shape, std::vector<double> values,
                                      bool requires_grad) {
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  round_dtype(values);
  n->values = std::move(values);
  n->requires_grad = requires_grad;
  n->id = g_next_id.fetch_add(1);
  return n;
}

std::size_t numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

// Builds the result node of an op; grad tracking only when an input needs it.
Tensor op_result(std::vector<std::size_t> shape, std::vector<double> values,
                 std::vector<Tensor> inputs, std::function<void(TensorNode&)> bw) {
  bool rg = false;
  for (const auto& t : inputs) rg = rg || t.requires_grad();
  auto n = make_node(std::move(shape), std::move(values), rg);
  if (rg) {
    for (const auto& t : inputs) n->parents.push_back(t.node());
    n->backward_fn = std::move(bw);
  }
  return Tensor(n);
}

void ensure_grad(TensorNode& n) {
  if (n.grad.size() != n.values.size()) n.grad.assign(n.values.size(), 0.0);
}

}  // namespace

void set_default_dtype(Dtype d) { g_dtype = d; }
Dtype default_dtype() { return g_dtype; }

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
  std::size_t n = numel(shape);
  return Tensor(make_node(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double v, bool requires_grad) {
  std::size_t n = numel(shape);
  return Tensor(make_node(std::move(shape), std::vector<double>(n, v), requires_grad));
}

Tensor Tensor::from_values(std::vector<std::size_t> shape, std::vector<double> values,
                           bool requires_grad) {
  if (numel(shape) != values.size())
    throw std::invalid_argument("from_values: shape does not match value count");
  return Tensor(make_node(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from_values({1, 1}, {v}, requires_grad);
}

double Tensor::item() const {
  if (node_->size() != 1) throw std::invalid_argument("item() on non-scalar tensor");
  return node_->values[0];
}

double Tensor::at(std::size_t r, std::size_t c) const { return node_->values[r * cols() + c]; }

void Tensor::zero_grad() { node_->grad.assign(node_->values.size(), 0.0); }

Tensor add(const Tensor& a, const Tensor& b) {
  const std::size_t R = a.rows(), C = a.cols();
  bool bias = (b.rows() == 1 && b.cols() == C && R != 1);
  if (!bias && a.shape() != b.shape()) shape_error("add", a.shape(), b.shape());
  std::vector<double> out(a.size());
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c)
      out[r * C + c] = a.at(r, c) + (bias ? b.at(0, c) : b.at(r, c));
  return op_result(a.shape(), std::move(out), {a, b}, [R, C, bias](TensorNode& n) {
    auto &pa = *n.parents[0], &pb = *n.parents[1];
    if (pa.requires_grad) {
      ensure_grad(pa);
      for (std::size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i];
    }
    if (pb.requires_grad) {
      ensure_grad(pb);
      if (bias) {
        for (std::size_t r = 0; r < R; ++r)
          for (std::size_t c = 0; c < C; ++c) pb.grad[c] += n.grad[r * C + c];
      } else {
        for (std::size_t i = 0; i < n.grad.size(); ++i) pb.grad[i] += n.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, scale(b, -1.0)); }

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("mul", a.shape(), b.shape());
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  return op_result(a.shape(), std::move(out), {a, b}, [](TensorNode& n) {
    auto &pa = *n.parents[0], &pb = *n.parents[1];
    if (pa.requires_grad) {
      ensure_grad(pa);
      for (std::size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i] * pb.values[i];
    }
    if (pb.requires_grad) {
      ensure_grad(pb);
      for (std::size_t i = 0; i < n.grad.size(); ++i) pb.grad[i] += n.grad[i] * pa.values[i];
    }
  });
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a.values()[i] * c;
  return op_result(a.shape(), std::move(out), {a}, [c](TensorNode& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i] * c;
  });
}

Tensor add_scalar(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a.values()[i] + c;
  return op_result(a.shape(), std::move(out), {a}, [](TensorNode& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i];
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  const std::size_t R = a.rows(), K = a.cols(), C = b.cols();
  if (b.rows() != K) shape_error("matmul", a.shape(), b.shape());
  std::vector<double> out(R * C, 0.0);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t k = 0; k < K; ++k) {
      const double x = av[r * K + k];
      if (x == 0.0) continue;
      for (std::size_t c = 0; c < C; ++c) out[r * C + c] += x * bv[k * C + c];
    }
  return op_result({R, C}, std::move(out), {a, b}, [R, K, C](TensorNode& n) {
    auto &pa = *n.parents[0], &pb = *n.parents[1];
    if (pa.requires_grad) {
      ensure_grad(pa);
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) {
          const double g = n.grad[r * C + c];
          if (g == 0.0) continue;
          for (std::size_t k = 0; k < K; ++k) pa.grad[r * K + k] += g * pb.values[k * C + c];
        }
    }
    if (pb.requires_grad) {
      ensure_grad(pb);
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t k = 0; k < K; ++k) {
          const double x = pa.values[r * K + k];
          if (x == 0.0) continue;
          for (std::size_t c = 0; c < C; ++c) pb.grad[k * C + c] += x * n.grad[r * C + c];
        }
    }
  });
}

Tensor transpose(const Tensor& a) {
  const std::size_t R = a.rows(), C = a.cols();
  std::vector<double> out(R * C);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) out[c * R + r] = a.at(r, c);
  return op_result({C, R}, std::move(out), {a}, [R, C](TensorNode& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) p.grad[r * C + c] += n.grad[c * R + r];
  });
}

namespace {
Tensor unary(const Tensor& a, const char*, double (*f)(double),
             std::function<double(double x, double y)> dfdx_from) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a.values()[i]);
  return op_result(a.shape(), std::move(out), {a}, [dfdx_from](TensorNode& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    for (std::size_t i = 0; i < n.grad.size(); ++i)
      p.grad[i] += n.grad[i] * dfdx_from(p.values[i], n.values[i]);
  });
}
}  // namespace

Tensor tanh_t(const Tensor& a) {
  return unary(a, "tanh", [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(a, "sigmoid", [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
               [](double, double y) { return y * (1.0 - y); });
}

Tensor exp_t(const Tensor& a) {
  return unary(a, "exp", [](double x) { return std::exp(x); },
               [](double, double y) { return y; });
}

Tensor log_t(const Tensor& a) {
  return unary(a, "log", [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; });
}

Tensor reciprocal(const Tensor& a) {
  return unary(a, "reciprocal", [](double x) { return 1.0 / x; },
               [](double x, double) { return -1.0 / (x * x); });
}

Tensor clamp_max(const Tensor& a, double cap) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::min(a.values()[i], cap);
  return op_result(a.shape(), std::move(out), {a}, [cap](TensorNode& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    for (std::size_t i = 0; i < n.grad.size(); ++i)
      if (p.values[i] < cap) p.grad[i] += n.grad[i];
  });
}

Tensor softmax_rows(const Tensor& a) {
  const std::size_t R = a.rows(), C = a.cols();
  std::vector<double> out(R * C);
  for (std::size_t r = 0; r < R; ++r) {
    double mx = a.at(r, 0);
    for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, a.at(r, c));
    double s = 0.0;
    for (std::size_t c = 0; c < C; ++c) s += (out[r * C + c] = std::exp(a.at(r, c) - mx));
    for (std::size_t c = 0; c < C; ++c) out[r * C + c] /= s;
  }
  return op_result(a.shape(), std::move(out), {a}, [R, C](TensorNode& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    for (std::size_t r = 0; r < R; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < C; ++c) dot += n.grad[r * C + c] * n.values[r * C + c];
      for (std::size_t c = 0; c < C; ++c)
        p.grad[r * C + c] += n.values[r * C + c] * (n.grad[r * C + c] - dot);
    }
  });
}

Tensor log_softmax_rows(const Tensor& a) {
  const std::size_t R = a.rows(), C = a.cols();
  std::vector<double> out(R * C);
  for (std::size_t r = 0; r < R; ++r) {
    double mx = a.at(r, 0);
    for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, a.at(r, c));
    double s = 0.0;
    for (std::size_t c = 0; c < C; ++c) s += std::exp(a.at(r, c) - mx);
    const double lse = mx + std::log(s);
    for (std::size_t c = 0; c < C; ++c) out[r * C + c] = a.at(r, c) - lse;
  }
  return op_result(a.shape(), std::move(out), {a}, [R, C](TensorNode& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    for (std::size_t r = 0; r < R; ++r) {
      double gsum = 0.0;
      for (std::size_t c = 0; c < C; ++c) gsum += n.grad[r * C + c];
      for (std::size_t c = 0; c < C; ++c)
        p.grad[r * C + c] += n.grad[r * C + c] - std::exp(n.values[r * C + c]) * gsum;
    }
  });
}

Tensor sum_all(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return op_result({1, 1}, {s}, {a}, [](TensorNode& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    for (double& g : p.grad) g += n.grad[0];
  });
}

Tensor mean_all(const Tensor& a) { return scale(sum_all(a), 1.0 / static_cast<double>(a.size())); }

Tensor row_sums(const Tensor& a) {
  const std::size_t R = a.rows(), C = a.cols();
  std::vector<double> out(R, 0.0);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) out[r] += a.at(r, c);
  return op_result({R, 1}, std::move(out), {a}, [R, C](TensorNode& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) p.grad[r * C + c] += n.grad[r];
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty input");
  const std::size_t C = parts[0].cols();
  std::size_t R = 0;
  std::vector<double> out;
  for (const auto& p : parts) {
    if (p.cols() != C) shape_error("concat_rows", parts[0].shape(), p.shape());
    R += p.rows();
    out.insert(out.end(), p.values().begin(), p.values().end());
  }
  return op_result({R, C}, std::move(out), parts, [](TensorNode& n) {
    std::size_t off = 0;
    for (auto& pp : n.parents) {
      auto& p = *pp;
      if (p.requires_grad) {
        ensure_grad(p);
        for (std::size_t i = 0; i < p.values.size(); ++i) p.grad[i] += n.grad[off + i];
      }
      off += p.values.size();
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty input");
  const std::size_t R = parts[0].rows();
  std::size_t C = 0;
  for (const auto& p : parts) {
    if (p.rows() != R) shape_error("concat_cols", parts[0].shape(), p.shape());
    C += p.cols();
  }
  std::vector<double> out(R * C);
  std::size_t coff = 0;
  for (const auto& p : parts) {
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < p.cols(); ++c) out[r * C + coff + c] = p.at(r, c);
    coff += p.cols();
  }
  return op_result({R, C}, std::move(out), parts, [R, C](TensorNode& n) {
    std::size_t coff = 0;
    for (auto& pp : n.parents) {
      auto& p = *pp;
      const std::size_t pc = p.shape.size() > 1 ? p.shape[1] : 1;
      if (p.requires_grad) {
        ensure_grad(p);
        for (std::size_t r = 0; r < R; ++r)
          for (std::size_t c = 0; c < pc; ++c) p.grad[r * pc + c] += n.grad[r * C + coff + c];
      }
      coff += pc;
    }
  });
}

Tensor slice_rows(const Tensor& a, std::size_t from, std::size_t to) {
  const std::size_t C = a.cols();
  if (to > a.rows() || from > to) throw std::invalid_argument("slice_rows: range out of bounds");
  std::vector<double> out(a.values().begin() + from * C, a.values().begin() + to * C);
  return op_result({to - from, C}, std::move(out), {a}, [from, C](TensorNode& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[from * C + i] += n.grad[i];
  });
}

Tensor slice_cols(const Tensor& a, std::size_t from, std::size_t to) {
  const std::size_t R = a.rows(), C = a.cols();
  if (to > C || from > to) throw std::invalid_argument("slice_cols: range out of bounds");
  const std::size_t W = to - from;
  std::vector<double> out(R * W);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < W; ++c) out[r * W + c] = a.at(r, from + c);
  return op_result({R, W}, std::move(out), {a}, [R, C, from, W](TensorNode& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < W; ++c) p.grad[r * C + from + c] += n.grad[r * W + c];
  });
}

Tensor reshape(const Tensor& a, std::vector<std::size_t> shape) {
  if (numel(shape) != a.size()) throw std::invalid_argument("reshape: element count mismatch");
  std::vector<double> out = a.values();
  return op_result(std::move(shape), std::move(out), {a}, [](TensorNode& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i];
  });
}

Tensor embedding(const Tensor& table, const std::vector<int>& ids) {
  const std::size_t V = table.rows(), D = table.cols(), T = ids.size();
  std::vector<double> out(T * D);
  for (std::size_t t = 0; t < T; ++t) {
    if (ids[t] < 0 || static_cast<std::size_t>(ids[t]) >= V)
      throw std::invalid_argument("embedding: id out of range");
    for (std::size_t d = 0; d < D; ++d) out[t * D + d] = table.at(ids[t], d);
  }
  return op_result({T, D}, std::move(out), {table}, [ids, D](TensorNode& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    for (std::size_t t = 0; t < ids.size(); ++t)
      for (std::size_t d = 0; d < D; ++d) p.grad[ids[t] * D + d] += n.grad[t * D + d];
  });
}

Tensor gather2d(const Tensor& a, const std::vector<std::pair<std::size_t, std::size_t>>& idx) {
  const std::size_t C = a.cols();
  std::vector<double> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i].first >= a.rows() || idx[i].second >= C)
      throw std::invalid_argument("gather2d: index out of range");
    out[i] = a.at(idx[i].first, idx[i].second);
  }
  return op_result({idx.size(), 1}, std::move(out), {a}, [idx, C](TensorNode& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    for (std::size_t i = 0; i < idx.size(); ++i)
      p.grad[idx[i].first * C + idx[i].second] += n.grad[i];
  });
}

Tensor layer_norm_rows(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t R = a.rows(), C = a.cols();
  if (gain.size() != C || bias.size() != C) shape_error("layer_norm", a.shape(), gain.shape());
  std::vector<double> out(R * C);
  std::vector<double> mu(R), inv_sd(R);
  for (std::size_t r = 0; r < R; ++r) {
    double m = 0.0;
    for (std::size_t c = 0; c < C; ++c) m += a.at(r, c);
    m /= C;
    double v = 0.0;
    for (std::size_t c = 0; c < C; ++c) v += (a.at(r, c) - m) * (a.at(r, c) - m);
    v /= C;
    mu[r] = m;
    inv_sd[r] = 1.0 / std::sqrt(v + eps);
    for (std::size_t c = 0; c < C; ++c)
      out[r * C + c] = (a.at(r, c) - m) * inv_sd[r] * gain.values()[c] + bias.values()[c];
  }
  return op_result({R, C}, std::move(out), {a, gain, bias},
                   [R, C, mu, inv_sd](TensorNode& n) {
    auto &pa = *n.parents[0], &pg = *n.parents[1], &pb = *n.parents[2];
    for (std::size_t r = 0; r < R; ++r) {
      // xhat_c and per-row reductions of dL/dxhat
      double g_dot = 0.0, gx_dot = 0.0;
      std::vector<double> dxhat(C);
      for (std::size_t c = 0; c < C; ++c) {
        const double xhat = (pa.values[r * C + c] - mu[r]) * inv_sd[r];
        dxhat[c] = n.grad[r * C + c] * pg.values[c];
        g_dot += dxhat[c];
        gx_dot += dxhat[c] * xhat;
        if (pg.requires_grad) {
          ensure_grad(pg);
          pg.grad[c] += n.grad[r * C + c] * xhat;
        }
        if (pb.requires_grad) {
          ensure_grad(pb);
          pb.grad[c] += n.grad[r * C + c];
        }
      }
      if (pa.requires_grad) {
        ensure_grad(pa);
        for (std::size_t c = 0; c < C; ++c) {
          const double xhat = (pa.values[r * C + c] - mu[r]) * inv_sd[r];
          pa.grad[r * C + c] +=
              inv_sd[r] * (dxhat[c] - g_dot / C - xhat * gx_dot / C);
        }
      }
    }
  });
}

Tensor cross_entropy_rows(const Tensor& logits, const std::vector<int>& targets,
                          const std::vector<bool>& mask) {
  const std::size_t R = logits.rows();
  if (targets.size() != R)
    throw std::invalid_argument("cross_entropy: target count != logit rows");
  Tensor lsm = log_softmax_rows(logits);
  std::vector<std::pair<std::size_t, std::size_t>> idx;
  for (std::size_t r = 0; r < R; ++r) {
    if (!mask.empty() && !mask[r]) continue;
    idx.emplace_back(r, static_cast<std::size_t>(targets[r]));
  }
  if (idx.empty()) return Tensor::scalar(0.0);
  Tensor picked = gather2d(lsm, idx);
  return scale(sum_all(picked), -1.0 / static_cast<double>(idx.size()));
}

void backward(const Tensor& loss) {
  if (loss.size() != 1) throw std::invalid_argument("backward: loss must be scalar");
  auto root = loss.node();
  if (!root->requires_grad) return;
  // reachable nodes, reverse creation order == reverse topological order
  std::vector<std::shared_ptr<TensorNode>> nodes;
  std::unordered_set<TensorNode*> seen;
  std::vector<std::shared_ptr<TensorNode>> stack{root};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto n = stack.back();
    stack.pop_back();
    nodes.push_back(n);
    for (auto& p : n->parents)
      if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p);
  }
  std::sort(nodes.begin(), nodes.end(),
            [](const auto& a, const auto& b) { return a->id > b->id; });
  for (auto& n : nodes) ensure_grad(*n);
  root->grad[0] = 1.0;
  for (auto& n : nodes)
    if (n->backward_fn) n->backward_fn(*n);
}

Tensor detach(const Tensor& a) {
  return Tensor::from_values(a.shape(), a.values(), false);
}

}  // namespace molrl::nc
