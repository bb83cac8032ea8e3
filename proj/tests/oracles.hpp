#pragma once

// Reference implementations the tests check the library against. Everything
// here is written as plain nested loops over std::vector<double>, independent
// of the tensor engine and its layouts.

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

namespace oracle {

using Mat = std::vector<std::vector<double>>;  // row per position / row index

// x: L rows of Cin; w[kk][ci][co]; returns Lout rows of Cout.
inline Mat conv1d(const Mat& x, const std::vector<Mat>& w,
                  const std::vector<double>& bias, int stride, int padding) {
  const int L = static_cast<int>(x.size());
  const int cin = static_cast<int>(x[0].size());
  const int k = static_cast<int>(w.size());
  const int cout = static_cast<int>(w[0][0].size());
  const int lout = (L + 2 * padding - k) / stride + 1;
  Mat out(static_cast<std::size_t>(lout), std::vector<double>(static_cast<std::size_t>(cout)));
  for (int o = 0; o < lout; ++o) {
    for (int co = 0; co < cout; ++co) {
      double acc = bias[static_cast<std::size_t>(co)];
      for (int kk = 0; kk < k; ++kk) {
        const int t = o * stride + kk - padding;
        if (t < 0 || t >= L) continue;
        for (int ci = 0; ci < cin; ++ci) {
          acc += x[static_cast<std::size_t>(t)][static_cast<std::size_t>(ci)] *
                 w[static_cast<std::size_t>(kk)][static_cast<std::size_t>(ci)][static_cast<std::size_t>(co)];
        }
      }
      out[static_cast<std::size_t>(o)][static_cast<std::size_t>(co)] = acc;
    }
  }
  return out;
}

// x: L rows of Cin; w[kk][co][ci]; scatter-accumulate form.
inline Mat transposed_conv1d(const Mat& x, const std::vector<Mat>& w,
                             const std::vector<double>& bias, int stride) {
  const int L = static_cast<int>(x.size());
  const int cin = static_cast<int>(x[0].size());
  const int k = static_cast<int>(w.size());
  const int cout = static_cast<int>(w[0].size());
  const int lout = (L - 1) * stride + k;
  Mat out(static_cast<std::size_t>(lout), std::vector<double>(static_cast<std::size_t>(cout)));
  for (int t = 0; t < lout; ++t) {
    for (int co = 0; co < cout; ++co) {
      out[static_cast<std::size_t>(t)][static_cast<std::size_t>(co)] = bias[static_cast<std::size_t>(co)];
    }
  }
  for (int i = 0; i < L; ++i) {
    for (int kk = 0; kk < k; ++kk) {
      for (int co = 0; co < cout; ++co) {
        for (int ci = 0; ci < cin; ++ci) {
          out[static_cast<std::size_t>(i * stride + kk)][static_cast<std::size_t>(co)] +=
              x[static_cast<std::size_t>(i)][static_cast<std::size_t>(ci)] *
              w[static_cast<std::size_t>(kk)][static_cast<std::size_t>(co)][static_cast<std::size_t>(ci)];
        }
      }
    }
  }
  return out;
}

inline Mat max_pool1d(const Mat& x, int size, int stride) {
  const int L = static_cast<int>(x.size());
  const int c = static_cast<int>(x[0].size());
  const int lout = (L - size) / stride + 1;
  Mat out(static_cast<std::size_t>(lout), std::vector<double>(static_cast<std::size_t>(c)));
  for (int o = 0; o < lout; ++o) {
    for (int ch = 0; ch < c; ++ch) {
      double best = x[static_cast<std::size_t>(o * stride)][static_cast<std::size_t>(ch)];
      for (int kk = 1; kk < size; ++kk) {
        best = std::max(best, x[static_cast<std::size_t>(o * stride + kk)][static_cast<std::size_t>(ch)]);
      }
      out[static_cast<std::size_t>(o)][static_cast<std::size_t>(ch)] = best;
    }
  }
  return out;
}

// x row vector, w[din][dout].
inline std::vector<double> linear(const std::vector<double>& x, const Mat& w,
                                  const std::vector<double>& bias) {
  const int din = static_cast<int>(x.size());
  const int dout = static_cast<int>(bias.size());
  std::vector<double> out(static_cast<std::size_t>(dout));
  for (int o = 0; o < dout; ++o) {
    double acc = bias[static_cast<std::size_t>(o)];
    for (int i = 0; i < din; ++i) {
      acc += x[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(i)][static_cast<std::size_t>(o)];
    }
    out[static_cast<std::size_t>(o)] = acc;
  }
  return out;
}

// Two-pass channel stats over rows-of-channels data; population variance.
inline void temporal_stats(const Mat& x, double eps, std::vector<double>* mu,
                           std::vector<double>* sigma) {
  const int L = static_cast<int>(x.size());
  const int c = static_cast<int>(x[0].size());
  mu->assign(static_cast<std::size_t>(c), 0.0);
  sigma->assign(static_cast<std::size_t>(c), 0.0);
  for (const auto& row : x) {
    for (int ch = 0; ch < c; ++ch) (*mu)[static_cast<std::size_t>(ch)] += row[static_cast<std::size_t>(ch)];
  }
  for (double& v : *mu) v /= L;
  for (const auto& row : x) {
    for (int ch = 0; ch < c; ++ch) {
      const double d = row[static_cast<std::size_t>(ch)] - (*mu)[static_cast<std::size_t>(ch)];
      (*sigma)[static_cast<std::size_t>(ch)] += d * d;
    }
  }
  for (double& v : *sigma) v = std::sqrt(v / L + eps);
}

// Direct per-channel normalization + affine (long-hand form of the modulated
// activation map).
inline Mat modulate(const Mat& x, const std::vector<double>& alpha,
                    const std::vector<double>& beta, double eps) {
  std::vector<double> mu, sigma;
  temporal_stats(x, eps, &mu, &sigma);
  Mat out = x;
  for (auto& row : out) {
    for (std::size_t ch = 0; ch < row.size(); ++ch) {
      row[ch] = alpha[ch] * (row[ch] - mu[ch]) / sigma[ch] + beta[ch];
    }
  }
  return out;
}

// Extended-precision cross entropy: mean over rows of -log softmax[label].
inline double softmax_cross_entropy(const Mat& logits, const std::vector<int>& labels) {
  long double total = 0.0L;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    long double z = 0.0L;
    for (double v : logits[c]) z += std::exp(static_cast<long double>(v));
    total += -std::log(std::exp(static_cast<long double>(
                           logits[c][static_cast<std::size_t>(labels[c])])) / z);
  }
  return static_cast<double>(total / static_cast<long double>(logits.size()));
}

// Self-attention written directly from the defining sums. s: columns of
// words, s[word][dim] for convenience; weights as [row][col] matrices.
inline Mat self_attention(const Mat& words, const Mat& wf1, const Mat& wf2,
                          const Mat& wh) {
  const int n = static_cast<int>(words.size());
  const int d = static_cast<int>(wf1.size());
  const int dw = static_cast<int>(wh.size());

  auto apply = [](const Mat& w, const std::vector<double>& x) {
    std::vector<double> out(w.size(), 0.0);
    for (std::size_t r = 0; r < w.size(); ++r) {
      for (std::size_t c = 0; c < x.size(); ++c) out[r] += w[r][c] * x[c];
    }
    return out;
  };

  Mat f1(static_cast<std::size_t>(n)), f2(static_cast<std::size_t>(n)), h(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    f1[static_cast<std::size_t>(i)] = apply(wf1, words[static_cast<std::size_t>(i)]);
    f2[static_cast<std::size_t>(i)] = apply(wf2, words[static_cast<std::size_t>(i)]);
    h[static_cast<std::size_t>(i)] = apply(wh, words[static_cast<std::size_t>(i)]);
  }

  Mat lambda(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(dw), 0.0));
  for (int j = 0; j < n; ++j) {
    std::vector<double> a(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
      for (int p = 0; p < d; ++p) {
        a[static_cast<std::size_t>(i)] += f1[static_cast<std::size_t>(i)][static_cast<std::size_t>(p)] *
                                          f2[static_cast<std::size_t>(j)][static_cast<std::size_t>(p)];
      }
    }
    double mx = *std::max_element(a.begin(), a.end());
    double z = 0.0;
    std::vector<double> phi(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      phi[static_cast<std::size_t>(i)] = std::exp(a[static_cast<std::size_t>(i)] - mx);
      z += phi[static_cast<std::size_t>(i)];
    }
    for (int i = 0; i < n; ++i) {
      const double weight = phi[static_cast<std::size_t>(i)] / z;
      for (int dd = 0; dd < dw; ++dd) {
        lambda[static_cast<std::size_t>(j)][static_cast<std::size_t>(dd)] +=
            weight * h[static_cast<std::size_t>(i)][static_cast<std::size_t>(dd)];
      }
    }
  }
  return lambda;  // lambda[j] is the output column for word j
}

// Set metrics via std::set arithmetic. The harmonic mean 2PR/(P+R) reduces to
// 2|A∩B| / (|A|+|B|); using that ratio keeps the oracle bit-comparable.
inline double f1_sets(const std::vector<int>& pred, const std::vector<int>& gt) {
  std::set<int> p(pred.begin(), pred.end());
  std::set<int> g(gt.begin(), gt.end());
  if (p.empty() || g.empty()) return 0.0;
  std::vector<int> inter;
  std::set_intersection(p.begin(), p.end(), g.begin(), g.end(),
                        std::back_inserter(inter));
  return 2.0 * static_cast<double>(inter.size()) /
         static_cast<double>(p.size() + g.size());
}

inline double iou_sets(const std::vector<int>& pred, const std::vector<int>& gt) {
  std::set<int> p(pred.begin(), pred.end());
  std::set<int> g(gt.begin(), gt.end());
  std::vector<int> inter, uni;
  std::set_intersection(p.begin(), p.end(), g.begin(), g.end(), std::back_inserter(inter));
  std::set_union(p.begin(), p.end(), g.begin(), g.end(), std::back_inserter(uni));
  if (uni.empty()) return 0.0;
  return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

// Hand-rolled Adam with bias correction, one parameter vector.
struct AdamRef {
  double lr = 1e-4, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<double> m, v;
  int t = 0;

  void step(std::vector<double>& theta, const std::vector<double>& g) {
    if (m.empty()) {
      m.assign(theta.size(), 0.0);
      v.assign(theta.size(), 0.0);
    }
    ++t;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = beta1 * m[i] + (1 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1 - beta2) * g[i] * g[i];
      const double mhat = m[i] / (1 - std::pow(beta1, t));
      const double vhat = v[i] / (1 - std::pow(beta2, t));
      theta[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
};

}  // namespace oracle
