#include "dvtg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "dvtg/errors.hpp"

namespace dvtg {

namespace {

using detail::TensorNode;

Tensor make_op(Shape shape, std::vector<double> data,
               std::initializer_list<Tensor> inputs,
               std::function<void(TensorNode&)> backward) {
  auto node = std::make_shared<TensorNode>();
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("internal: op produced mismatched data for shape " +
                     shape_str(shape));
  }
  node->shape = std::move(shape);
  node->data = std::move(data);
  bool rg = false;
  for (const Tensor& t : inputs) rg = rg || t.requires_grad();
  node->requires_grad = rg;
  if (rg) {
    for (const Tensor& t : inputs) node->parents.push_back(t.node());
    node->backward_fn = std::move(backward);
  }
  return Tensor::wrap(std::move(node));
}

void require_rank(const Tensor& t, int rank, const char* what) {
  if (!t.defined() || t.rank() != rank) {
    throw ShapeError(std::string(what) + " must have rank " +
                     std::to_string(rank) + ", got " +
                     (t.defined() ? shape_str(t.shape()) : std::string("<undefined>")));
  }
}

void require_map(const Tensor& t, const char* what) {
  require_rank(t, 3, what);
  if (t.dim(0) != 1) {
    throw ShapeError(std::string(what) + " must be 1 x L x C, got " +
                     shape_str(t.shape()));
  }
}

// ensure_grad + return buffer for a parent that wants gradients, or nullptr.
std::vector<double>* grad_buf(const Tensor& t) {
  if (!t.requires_grad()) return nullptr;
  t.node()->ensure_grad();
  return &t.node()->grad;
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(x.at(i), 0.0);
  return make_op(x.shape(), std::move(out), {x}, [x](TensorNode& self) {
    if (auto* gx = grad_buf(x)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        if (x.at(i) > 0.0) (*gx)[i] += self.grad[i];
      }
    }
  });
}

Tensor dropout(const Tensor& x, double p, bool training, Rng& rng) {
  if (p < 0.0 || p >= 1.0) {
    throw DataError("dropout probability must be in [0, 1), got " +
                    std::to_string(p));
  }
  if (!training || p == 0.0) {
    // Identity, but still a graph node so gradients pass through unchanged.
    std::vector<double> out(x.data());
    return make_op(x.shape(), std::move(out), {x}, [x](TensorNode& self) {
      if (auto* gx = grad_buf(x)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) (*gx)[i] += self.grad[i];
      }
    });
  }
  const double scale = 1.0 / (1.0 - p);
  std::vector<double> mask(x.numel());
  for (double& m : mask) m = rng.bernoulli(p) ? 0.0 : scale;
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.at(i) * mask[i];
  return make_op(x.shape(), std::move(out), {x},
                 [x, mask = std::move(mask)](TensorNode& self) {
                   if (auto* gx = grad_buf(x)) {
                     for (std::size_t i = 0; i < self.grad.size(); ++i) {
                       (*gx)[i] += self.grad[i] * mask[i];
                     }
                   }
                 });
}

namespace {

Tensor binary_same_shape(const Tensor& a, const Tensor& b, const char* name,
                         double (*fwd)(double, double),
                         void (*bwd)(double ga, double a, double b, double* da,
                                     double* db)) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(name) + ": shape mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.at(i), b.at(i));
  return make_op(a.shape(), std::move(out), {a, b},
                 [a, b, bwd](TensorNode& self) {
                   auto* ga = grad_buf(a);
                   auto* gb = grad_buf(b);
                   for (std::size_t i = 0; i < self.grad.size(); ++i) {
                     double da = 0.0, db = 0.0;
                     bwd(self.grad[i], a.at(i), b.at(i), &da, &db);
                     if (ga) (*ga)[i] += da;
                     if (gb) (*gb)[i] += db;
                   }
                 });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_same_shape(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double g, double, double, double* da, double* db) {
        *da = g;
        *db = g;
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_same_shape(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double g, double, double, double* da, double* db) {
        *da = g;
        *db = -g;
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_same_shape(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double g, double x, double y, double* da, double* db) {
        *da = g * y;
        *db = g * x;
      });
}

Tensor sqrt_elem(const Tensor& x) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(x.at(i));
  return make_op(x.shape(), std::move(out), {x}, [x](TensorNode& self) {
    if (auto* gx = grad_buf(x)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        (*gx)[i] += self.grad[i] / (2.0 * self.data[i]);
      }
    }
  });
}

Tensor add_scalar(const Tensor& x, double c) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.at(i) + c;
  return make_op(x.shape(), std::move(out), {x}, [x](TensorNode& self) {
    if (auto* gx = grad_buf(x)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*gx)[i] += self.grad[i];
    }
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) total += x.at(i);
  return make_op({1}, {total}, {x}, [x](TensorNode& self) {
    if (auto* gx = grad_buf(x)) {
      for (std::size_t i = 0; i < gx->size(); ++i) (*gx)[i] += self.grad[0];
    }
  });
}

Tensor detach(const Tensor& x) {
  return Tensor::from_data(x.shape(), x.data());
}

Tensor slice_vec(const Tensor& v, int start, int len) {
  require_rank(v, 1, "slice_vec input");
  if (start < 0 || len < 1 || start + len > v.dim(0)) {
    throw ShapeError("slice_vec [" + std::to_string(start) + ", " +
                     std::to_string(start + len) + ") out of range for length " +
                     std::to_string(v.dim(0)));
  }
  std::vector<double> out(static_cast<std::size_t>(len));
  for (int i = 0; i < len; ++i) out[static_cast<std::size_t>(i)] = v.at(static_cast<std::size_t>(start + i));
  return make_op({len}, std::move(out), {v}, [v, start](TensorNode& self) {
    if (auto* gv = grad_buf(v)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        (*gv)[static_cast<std::size_t>(start) + i] += self.grad[i];
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Temporal ops
// ---------------------------------------------------------------------------

Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride, int padding) {
  require_map(input, "conv1d input");
  require_rank(weight, 3, "conv1d weight");
  require_rank(bias, 1, "conv1d bias");
  const int L = input.dim(1);
  const int cin = input.dim(2);
  const int k = weight.dim(0);
  const int cout = weight.dim(2);
  if (weight.dim(1) != cin) {
    throw ShapeError("conv1d: weight expects " + std::to_string(weight.dim(1)) +
                     " input channels, input has " + std::to_string(cin));
  }
  if (bias.dim(0) != cout) {
    throw ShapeError("conv1d: bias length " + std::to_string(bias.dim(0)) +
                     " != output channels " + std::to_string(cout));
  }
  if (k < 1 || stride < 1 || padding < 0) {
    throw ShapeError("conv1d: need k >= 1, stride >= 1, padding >= 0");
  }
  if (L + 2 * padding < k) {
    throw ShapeError("conv1d: kernel " + std::to_string(k) +
                     " longer than padded input " + std::to_string(L + 2 * padding));
  }
  const int lout = (L + 2 * padding - k) / stride + 1;

  std::vector<double> out(static_cast<std::size_t>(lout) * cout);
  for (int o = 0; o < lout; ++o) {
    for (int co = 0; co < cout; ++co) {
      double acc = bias.at(static_cast<std::size_t>(co));
      for (int kk = 0; kk < k; ++kk) {
        const int t = o * stride + kk - padding;
        if (t < 0 || t >= L) continue;
        for (int ci = 0; ci < cin; ++ci) {
          acc += input.at(static_cast<std::size_t>(t * cin + ci)) *
                 weight.at(static_cast<std::size_t>((kk * cin + ci) * cout + co));
        }
      }
      out[static_cast<std::size_t>(o * cout + co)] = acc;
    }
  }

  return make_op(
      {1, lout, cout}, std::move(out), {input, weight, bias},
      [input, weight, bias, stride, padding, L, cin, k, cout,
       lout](TensorNode& self) {
        auto* gx = grad_buf(input);
        auto* gw = grad_buf(weight);
        auto* gb = grad_buf(bias);
        for (int o = 0; o < lout; ++o) {
          for (int co = 0; co < cout; ++co) {
            const double g = self.grad[static_cast<std::size_t>(o * cout + co)];
            if (g == 0.0) continue;
            if (gb) (*gb)[static_cast<std::size_t>(co)] += g;
            for (int kk = 0; kk < k; ++kk) {
              const int t = o * stride + kk - padding;
              if (t < 0 || t >= L) continue;
              for (int ci = 0; ci < cin; ++ci) {
                const std::size_t xi = static_cast<std::size_t>(t * cin + ci);
                const std::size_t wi =
                    static_cast<std::size_t>((kk * cin + ci) * cout + co);
                if (gw) (*gw)[wi] += input.at(xi) * g;
                if (gx) (*gx)[xi] += weight.at(wi) * g;
              }
            }
          }
        }
      });
}

Tensor transposed_conv1d(const Tensor& input, const Tensor& weight,
                         const Tensor& bias, int stride) {
  require_map(input, "transposed_conv1d input");
  require_rank(weight, 3, "transposed_conv1d weight");
  require_rank(bias, 1, "transposed_conv1d bias");
  const int L = input.dim(1);
  const int cin = input.dim(2);
  const int k = weight.dim(0);
  const int cout = weight.dim(1);
  if (weight.dim(2) != cin) {
    throw ShapeError("transposed_conv1d: weight expects " +
                     std::to_string(weight.dim(2)) + " input channels, input has " +
                     std::to_string(cin));
  }
  if (bias.dim(0) != cout) {
    throw ShapeError("transposed_conv1d: bias length " +
                     std::to_string(bias.dim(0)) + " != output channels " +
                     std::to_string(cout));
  }
  if (stride < 1 || k < stride) {
    throw ShapeError("transposed_conv1d: need 1 <= stride <= kernel, got k=" +
                     std::to_string(k) + " stride=" + std::to_string(stride));
  }
  const int lout = (L - 1) * stride + k;

  std::vector<double> out(static_cast<std::size_t>(lout) * cout);
  for (int co = 0; co < cout; ++co) {
    const double b = bias.at(static_cast<std::size_t>(co));
    for (int t = 0; t < lout; ++t) out[static_cast<std::size_t>(t * cout + co)] = b;
  }
  // Scatter-accumulate each input position through the kernel.
  for (int i = 0; i < L; ++i) {
    for (int kk = 0; kk < k; ++kk) {
      const int t = i * stride + kk;
      for (int co = 0; co < cout; ++co) {
        double acc = 0.0;
        for (int ci = 0; ci < cin; ++ci) {
          acc += input.at(static_cast<std::size_t>(i * cin + ci)) *
                 weight.at(static_cast<std::size_t>((kk * cout + co) * cin + ci));
        }
        out[static_cast<std::size_t>(t * cout + co)] += acc;
      }
    }
  }

  return make_op(
      {1, lout, cout}, std::move(out), {input, weight, bias},
      [input, weight, bias, stride, L, cin, k, cout, lout](TensorNode& self) {
        auto* gx = grad_buf(input);
        auto* gw = grad_buf(weight);
        auto* gb = grad_buf(bias);
        if (gb) {
          for (int t = 0; t < lout; ++t) {
            for (int co = 0; co < cout; ++co) {
              (*gb)[static_cast<std::size_t>(co)] +=
                  self.grad[static_cast<std::size_t>(t * cout + co)];
            }
          }
        }
        for (int i = 0; i < L; ++i) {
          for (int kk = 0; kk < k; ++kk) {
            const int t = i * stride + kk;
            for (int co = 0; co < cout; ++co) {
              const double g = self.grad[static_cast<std::size_t>(t * cout + co)];
              if (g == 0.0) continue;
              for (int ci = 0; ci < cin; ++ci) {
                const std::size_t xi = static_cast<std::size_t>(i * cin + ci);
                const std::size_t wi =
                    static_cast<std::size_t>((kk * cout + co) * cin + ci);
                if (gw) (*gw)[wi] += input.at(xi) * g;
                if (gx) (*gx)[xi] += weight.at(wi) * g;
              }
            }
          }
        }
      });
}

Tensor max_pool1d(const Tensor& input, int size, int stride) {
  require_map(input, "max_pool1d input");
  const int L = input.dim(1);
  const int C = input.dim(2);
  if (size < 1 || stride < 1) {
    throw ShapeError("max_pool1d: need size >= 1 and stride >= 1");
  }
  if (L < size) {
    throw ShapeError("max_pool1d: window " + std::to_string(size) +
                     " longer than input " + std::to_string(L));
  }
  const int lout = (L - size) / stride + 1;
  std::vector<double> out(static_cast<std::size_t>(lout) * C);
  std::vector<int> argmax(out.size());
  for (int o = 0; o < lout; ++o) {
    for (int c = 0; c < C; ++c) {
      int best_t = o * stride;
      double best = input.at(static_cast<std::size_t>(best_t * C + c));
      for (int kk = 1; kk < size; ++kk) {
        const int t = o * stride + kk;
        const double v = input.at(static_cast<std::size_t>(t * C + c));
        if (v > best) {  // strict: ties keep the earliest index
          best = v;
          best_t = t;
        }
      }
      out[static_cast<std::size_t>(o * C + c)] = best;
      argmax[static_cast<std::size_t>(o * C + c)] = best_t;
    }
  }
  return make_op({1, lout, C}, std::move(out), {input},
                 [input, C, argmax = std::move(argmax)](TensorNode& self) {
                   if (auto* gx = grad_buf(input)) {
                     for (std::size_t i = 0; i < self.grad.size(); ++i) {
                       const int c = static_cast<int>(i) % C;
                       (*gx)[static_cast<std::size_t>(argmax[i] * C + c)] +=
                           self.grad[i];
                     }
                   }
                 });
}

Tensor crop(const Tensor& input, int target_len, int offset) {
  require_map(input, "crop input");
  const int L = input.dim(1);
  const int C = input.dim(2);
  if (offset < 0 || target_len < 1 || offset + target_len > L) {
    throw ShapeError("crop: slice [" + std::to_string(offset) + ", " +
                     std::to_string(offset + target_len) +
                     ") out of range for temporal length " + std::to_string(L));
  }
  std::vector<double> out(static_cast<std::size_t>(target_len) * C);
  for (int t = 0; t < target_len; ++t) {
    for (int c = 0; c < C; ++c) {
      out[static_cast<std::size_t>(t * C + c)] =
          input.at(static_cast<std::size_t>((offset + t) * C + c));
    }
  }
  return make_op({1, target_len, C}, std::move(out), {input},
                 [input, offset, C](TensorNode& self) {
                   if (auto* gx = grad_buf(input)) {
                     for (std::size_t i = 0; i < self.grad.size(); ++i) {
                       (*gx)[i + static_cast<std::size_t>(offset) *
                                     static_cast<std::size_t>(C)] += self.grad[i];
                     }
                   }
                 });
}

Tensor temporal_mean(const Tensor& input) {
  require_map(input, "temporal_mean input");
  const int L = input.dim(1);
  const int C = input.dim(2);
  std::vector<double> out(static_cast<std::size_t>(C), 0.0);
  for (int t = 0; t < L; ++t) {
    for (int c = 0; c < C; ++c) {
      out[static_cast<std::size_t>(c)] += input.at(static_cast<std::size_t>(t * C + c));
    }
  }
  for (double& v : out) v /= L;
  return make_op({C}, std::move(out), {input}, [input, L, C](TensorNode& self) {
    if (auto* gx = grad_buf(input)) {
      for (int t = 0; t < L; ++t) {
        for (int c = 0; c < C; ++c) {
          (*gx)[static_cast<std::size_t>(t * C + c)] +=
              self.grad[static_cast<std::size_t>(c)] / L;
        }
      }
    }
  });
}

std::pair<Tensor, Tensor> temporal_stats(const Tensor& input) {
  Tensor mu = temporal_mean(input);
  Tensor centered = sub_channel(input, mu);
  Tensor var = temporal_mean(mul(centered, centered));
  Tensor sigma = sqrt_elem(add_scalar(var, kSigmaEps));
  return {mu, sigma};
}

namespace {

Tensor channel_broadcast(const Tensor& x, const Tensor& v, const char* name,
                         double (*fwd)(double, double),
                         void (*bwd)(double g, double x, double v, double out,
                                     double* dx, double* dv)) {
  require_map(x, name);
  require_rank(v, 1, name);
  const int C = x.dim(2);
  if (v.dim(0) != C) {
    throw ShapeError(std::string(name) + ": vector length " +
                     std::to_string(v.dim(0)) + " != channel count " +
                     std::to_string(C));
  }
  const int L = x.dim(1);
  std::vector<double> out(x.numel());
  for (int t = 0; t < L; ++t) {
    for (int c = 0; c < C; ++c) {
      const std::size_t i = static_cast<std::size_t>(t * C + c);
      out[i] = fwd(x.at(i), v.at(static_cast<std::size_t>(c)));
    }
  }
  return make_op(x.shape(), std::move(out), {x, v},
                 [x, v, L, C, bwd](TensorNode& self) {
                   auto* gx = grad_buf(x);
                   auto* gv = grad_buf(v);
                   for (int t = 0; t < L; ++t) {
                     for (int c = 0; c < C; ++c) {
                       const std::size_t i = static_cast<std::size_t>(t * C + c);
                       double dx = 0.0, dv = 0.0;
                       bwd(self.grad[i], x.at(i), v.at(static_cast<std::size_t>(c)),
                           self.data[i], &dx, &dv);
                       if (gx) (*gx)[i] += dx;
                       if (gv) (*gv)[static_cast<std::size_t>(c)] += dv;
                     }
                   }
                 });
}

}  // namespace

Tensor sub_channel(const Tensor& x, const Tensor& v) {
  return channel_broadcast(
      x, v, "sub_channel", [](double a, double b) { return a - b; },
      [](double g, double, double, double, double* dx, double* dv) {
        *dx = g;
        *dv = -g;
      });
}

Tensor div_channel(const Tensor& x, const Tensor& v) {
  return channel_broadcast(
      x, v, "div_channel", [](double a, double b) { return a / b; },
      [](double g, double, double b, double out, double* dx, double* dv) {
        *dx = g / b;
        *dv = -g * out / b;
      });
}

Tensor mul_channel(const Tensor& x, const Tensor& v) {
  return channel_broadcast(
      x, v, "mul_channel", [](double a, double b) { return a * b; },
      [](double g, double a, double b, double, double* dx, double* dv) {
        *dx = g * b;
        *dv = g * a;
      });
}

Tensor add_channel(const Tensor& x, const Tensor& v) {
  return channel_broadcast(
      x, v, "add_channel", [](double a, double b) { return a + b; },
      [](double g, double, double, double, double* dx, double* dv) {
        *dx = g;
        *dv = g;
      });
}

// ---------------------------------------------------------------------------
// Matrix ops
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul lhs");
  require_rank(b, 2, "matmul rhs");
  const int m = a.dim(0), k = a.dim(1);
  const int n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner dims differ, " + shape_str(a.shape()) +
                     " x " + shape_str(b.shape()));
  }
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      const double av = a.at(static_cast<std::size_t>(i * k + p));
      if (av == 0.0) continue;
      for (int j = 0; j < n; ++j) {
        out[static_cast<std::size_t>(i * n + j)] +=
            av * b.at(static_cast<std::size_t>(p * n + j));
      }
    }
  }
  return make_op({m, n}, std::move(out), {a, b}, [a, b, m, k, n](TensorNode& self) {
    auto* ga = grad_buf(a);
    auto* gb = grad_buf(b);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        const double g = self.grad[static_cast<std::size_t>(i * n + j)];
        if (g == 0.0) continue;
        for (int p = 0; p < k; ++p) {
          if (ga) {
            (*ga)[static_cast<std::size_t>(i * k + p)] +=
                g * b.at(static_cast<std::size_t>(p * n + j));
          }
          if (gb) {
            (*gb)[static_cast<std::size_t>(p * n + j)] +=
                g * a.at(static_cast<std::size_t>(i * k + p));
          }
        }
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose input");
  const int m = a.dim(0), n = a.dim(1);
  std::vector<double> out(a.numel());
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      out[static_cast<std::size_t>(j * m + i)] = a.at(static_cast<std::size_t>(i * n + j));
    }
  }
  return make_op({n, m}, std::move(out), {a}, [a, m, n](TensorNode& self) {
    if (auto* ga = grad_buf(a)) {
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
          (*ga)[static_cast<std::size_t>(i * n + j)] +=
              self.grad[static_cast<std::size_t>(j * m + i)];
        }
      }
    }
  });
}

Tensor softmax_cols(const Tensor& a) {
  require_rank(a, 2, "softmax_cols input");
  const int m = a.dim(0), n = a.dim(1);
  std::vector<double> out(a.numel());
  for (int j = 0; j < n; ++j) {
    double mx = a.at(static_cast<std::size_t>(j));
    for (int i = 1; i < m; ++i) {
      mx = std::max(mx, a.at(static_cast<std::size_t>(i * n + j)));
    }
    double z = 0.0;
    for (int i = 0; i < m; ++i) {
      const double e = std::exp(a.at(static_cast<std::size_t>(i * n + j)) - mx);
      out[static_cast<std::size_t>(i * n + j)] = e;
      z += e;
    }
    for (int i = 0; i < m; ++i) out[static_cast<std::size_t>(i * n + j)] /= z;
  }
  return make_op({m, n}, std::move(out), {a}, [a, m, n](TensorNode& self) {
    if (auto* ga = grad_buf(a)) {
      for (int j = 0; j < n; ++j) {
        double dot = 0.0;
        for (int i = 0; i < m; ++i) {
          const std::size_t idx = static_cast<std::size_t>(i * n + j);
          dot += self.grad[idx] * self.data[idx];
        }
        for (int i = 0; i < m; ++i) {
          const std::size_t idx = static_cast<std::size_t>(i * n + j);
          (*ga)[idx] += self.data[idx] * (self.grad[idx] - dot);
        }
      }
    }
  });
}

Tensor col_mean(const Tensor& a) {
  require_rank(a, 2, "col_mean input");
  const int m = a.dim(0), n = a.dim(1);
  std::vector<double> out(static_cast<std::size_t>(m), 0.0);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      out[static_cast<std::size_t>(i)] += a.at(static_cast<std::size_t>(i * n + j));
    }
  }
  for (double& v : out) v /= n;
  return make_op({m}, std::move(out), {a}, [a, m, n](TensorNode& self) {
    if (auto* ga = grad_buf(a)) {
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
          (*ga)[static_cast<std::size_t>(i * n + j)] +=
              self.grad[static_cast<std::size_t>(i)] / n;
        }
      }
    }
  });
}

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require_rank(weight, 2, "linear weight");
  require_rank(bias, 1, "linear bias");
  if (!input.defined() || input.rank() < 1) {
    throw ShapeError("linear input must have rank >= 1");
  }
  const int din = weight.dim(0);
  const int dout = weight.dim(1);
  if (bias.dim(0) != dout) {
    throw ShapeError("linear: bias length " + std::to_string(bias.dim(0)) +
                     " != output dim " + std::to_string(dout));
  }
  const Shape& in_shape = input.shape();
  if (in_shape.back() != din) {
    throw ShapeError("linear: input trailing dim " + std::to_string(in_shape.back()) +
                     " != weight input dim " + std::to_string(din));
  }
  const int rows = static_cast<int>(input.numel()) / din;
  Shape out_shape(in_shape);
  out_shape.back() = dout;

  std::vector<double> out(static_cast<std::size_t>(rows) * dout);
  for (int r = 0; r < rows; ++r) {
    for (int o = 0; o < dout; ++o) {
      double acc = bias.at(static_cast<std::size_t>(o));
      for (int i = 0; i < din; ++i) {
        acc += input.at(static_cast<std::size_t>(r * din + i)) *
               weight.at(static_cast<std::size_t>(i * dout + o));
      }
      out[static_cast<std::size_t>(r * dout + o)] = acc;
    }
  }
  return make_op(std::move(out_shape), std::move(out), {input, weight, bias},
                 [input, weight, bias, rows, din, dout](TensorNode& self) {
                   auto* gx = grad_buf(input);
                   auto* gw = grad_buf(weight);
                   auto* gb = grad_buf(bias);
                   for (int r = 0; r < rows; ++r) {
                     for (int o = 0; o < dout; ++o) {
                       const double g =
                           self.grad[static_cast<std::size_t>(r * dout + o)];
                       if (g == 0.0) continue;
                       if (gb) (*gb)[static_cast<std::size_t>(o)] += g;
                       for (int i = 0; i < din; ++i) {
                         const std::size_t xi = static_cast<std::size_t>(r * din + i);
                         const std::size_t wi = static_cast<std::size_t>(i * dout + o);
                         if (gw) (*gw)[wi] += input.at(xi) * g;
                         if (gx) (*gx)[xi] += weight.at(wi) * g;
                       }
                     }
                   }
                 });
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

Tensor softmax_cross_entropy(const Tensor& logits,
                             const std::vector<int>& labels) {
  require_map(logits, "softmax_cross_entropy logits");
  const int C = logits.dim(1);
  if (logits.dim(2) != 2) {
    throw ShapeError("softmax_cross_entropy expects 2 classes per clip, got " +
                     std::to_string(logits.dim(2)));
  }
  if (static_cast<int>(labels.size()) != C) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(C) + " clips");
  }
  for (int c = 0; c < C; ++c) {
    if (labels[static_cast<std::size_t>(c)] != 0 && labels[static_cast<std::size_t>(c)] != 1) {
      throw DataError("softmax_cross_entropy: label for clip " + std::to_string(c) +
                      " is " + std::to_string(labels[static_cast<std::size_t>(c)]) +
                      ", expected 0 or 1");
    }
  }

  // Stabilized per-clip 2-way softmax; keep probabilities for the backward.
  std::vector<double> probs(static_cast<std::size_t>(C) * 2);
  double loss = 0.0;
  for (int c = 0; c < C; ++c) {
    const double a = logits.at(static_cast<std::size_t>(c * 2));
    const double b = logits.at(static_cast<std::size_t>(c * 2 + 1));
    const double mx = std::max(a, b);
    const double ea = std::exp(a - mx);
    const double eb = std::exp(b - mx);
    const double z = ea + eb;
    probs[static_cast<std::size_t>(c * 2)] = ea / z;
    probs[static_cast<std::size_t>(c * 2 + 1)] = eb / z;
    const int l = labels[static_cast<std::size_t>(c)];
    loss -= std::log(probs[static_cast<std::size_t>(c * 2 + l)]);
  }
  loss /= C;

  return make_op({1}, {loss}, {logits},
                 [logits, labels, C, probs = std::move(probs)](TensorNode& self) {
                   if (auto* gx = grad_buf(logits)) {
                     const double g = self.grad[0] / C;
                     for (int c = 0; c < C; ++c) {
                       for (int j = 0; j < 2; ++j) {
                         const std::size_t i = static_cast<std::size_t>(c * 2 + j);
                         const double onehot =
                             (j == labels[static_cast<std::size_t>(c)]) ? 1.0 : 0.0;
                         (*gx)[i] += g * (probs[i] - onehot);
                       }
                     }
                   }
                 });
}

}  // namespace dvtg
