#pragma once

#include <utility>
#include <vector>

#include "dvtg/rng.hpp"
#include "dvtg/tensor.hpp"

namespace dvtg {

// Guard added under the temporal variance before the square root so that
// constant channels normalize to exactly the shift parameter instead of NaN.
inline constexpr double kSigmaEps = 1e-5;

// ---------------------------------------------------------------------------
// Elementwise and reductions (any rank)
// ---------------------------------------------------------------------------

Tensor relu(const Tensor& x);

// Inverted dropout: survivors are scaled by 1/(1-p) at train time, eval is a
// strict identity. 0 <= p < 1.
Tensor dropout(const Tensor& x, double p, bool training, Rng& rng);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor sqrt_elem(const Tensor& x);
Tensor add_scalar(const Tensor& x, double c);
Tensor sum(const Tensor& x);

// Contiguous slice of a rank-1 tensor; gradient scatters back into the slice.
Tensor slice_vec(const Tensor& v, int start, int len);

// Same values, cut loose from the graph: gradients stop here.
Tensor detach(const Tensor& x);

// ---------------------------------------------------------------------------
// Temporal ops on 1 x L x C activation maps
// ---------------------------------------------------------------------------

// weight is [k x Cin x Cout]; zero padding on both sides.
// L' = floor((L + 2*padding - k)/stride) + 1.
Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride = 1, int padding = 0);

// Fractionally-strided (transposed) convolution; weight is [k x Cout x Cin].
// L' = (L-1)*stride + k. Equals the adjoint of a valid conv1d with the
// channel axes of the kernel swapped.
Tensor transposed_conv1d(const Tensor& input, const Tensor& weight,
                         const Tensor& bias, int stride = 1);

// Gradient routes to the earliest maximal index within each window.
Tensor max_pool1d(const Tensor& input, int size, int stride);

// Temporal slice [offset, offset + target_len); gradient scatters back.
Tensor crop(const Tensor& input, int target_len, int offset);

// Mean over the temporal axis -> [C].
Tensor temporal_mean(const Tensor& input);

// Channel-wise (mu, sigma) over the temporal axis; sigma uses population
// variance plus kSigmaEps. Both outputs are differentiable.
std::pair<Tensor, Tensor> temporal_stats(const Tensor& input);

// Broadcast a [C] vector against a 1 x L x C map.
Tensor sub_channel(const Tensor& x, const Tensor& v);
Tensor div_channel(const Tensor& x, const Tensor& v);
Tensor mul_channel(const Tensor& x, const Tensor& v);
Tensor add_channel(const Tensor& x, const Tensor& v);

// ---------------------------------------------------------------------------
// Matrix ops
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Column-wise softmax of an [m x n] matrix: each column sums to one.
// Max-subtracted for stability.
Tensor softmax_cols(const Tensor& a);

// Mean over columns of [m x n] -> [m].
Tensor col_mean(const Tensor& a);

// Affine map with weight [Din x Dout]; leading axes are treated as batch.
Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias);

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

// logits is 1 x C x 2, labels are per-clip classes in {0, 1}; returns the
// mean over clips of -log softmax(logits)[label].
Tensor softmax_cross_entropy(const Tensor& logits,
                             const std::vector<int>& labels);

}  // namespace dvtg
