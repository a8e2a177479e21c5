#pragma once

#include <vector>

#include "cpgm/rng.hpp"
#include "cpgm/tensor.hpp"

namespace cpgm {

// ---- elementwise -----------------------------------------------------------

TensorPtr add(const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
TensorPtr cdiv(const TensorPtr& a, const TensorPtr& b);
TensorPtr neg(const TensorPtr& a);
TensorPtr add_scalar(const TensorPtr& a, Scalar c);
TensorPtr mul_scalar(const TensorPtr& a, Scalar c);
TensorPtr reciprocal(const TensorPtr& a);
TensorPtr log_t(const TensorPtr& a);   // requires strictly positive input
TensorPtr sqrt_t(const TensorPtr& a);  // requires non-negative input
TensorPtr sigmoid(const TensorPtr& a);
TensorPtr softplus(const TensorPtr& a);

// ---- reductions ------------------------------------------------------------

TensorPtr sum_all(const TensorPtr& a);
TensorPtr mean_all(const TensorPtr& a);
// Sum of squared differences over all elements.
TensorPtr squared_distance(const TensorPtr& a, const TensorPtr& b);

// ---- shape -----------------------------------------------------------------

TensorPtr reshape(const TensorPtr& a, Shape shape);
// (N, d1, d2, ...) -> (N, d1*d2*...)
TensorPtr flatten(const TensorPtr& a);
TensorPtr unflatten(const TensorPtr& a, Shape shape);
// Column-wise concatenation of two (N, Ca) and (N, Cb) tensors.
TensorPtr concat_cols(const TensorPtr& a, const TensorPtr& b);

// ---- linear algebra --------------------------------------------------------

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
// x: (N, Din), w: (Dout, Din), b: (Dout) -> (N, Dout)
TensorPtr linear(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b);

// ---- convolution -----------------------------------------------------------

// x: (N, C, H, W), w: (F, C, kh, kw), b: (F); cross-correlation semantics.
TensorPtr conv2d(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b,
                 int stride, int padding);

// Linear adjoint of conv2d with identical weight/stride/padding.
// x: (N, F, H, W), w: (F, C, kh, kw), b: (C). When the forward conv's floor
// division makes the preimage shape ambiguous, pass the desired output
// height/width; {-1, -1} selects the minimal preimage (H-1)*stride-2*pad+kh.
TensorPtr conv_transpose2d(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b,
                           int stride, int padding,
                           std::pair<int, int> out_hw = {-1, -1});

// ---- normalization / activations ------------------------------------------

struct BatchNormState {
  Array running_mean;
  Array running_var;
  explicit BatchNormState(Eigen::Index channels)
      : running_mean(Array::Zero(channels)), running_var(Array::Ones(channels)) {}
};

// Per-channel batch normalization for (N, C, H, W) or (N, C) input. Training
// mode uses batch statistics and updates the running ones with momentum 0.9;
// inference mode uses the running statistics.
TensorPtr batchnorm(const TensorPtr& x, const TensorPtr& gamma, const TensorPtr& beta,
                    BatchNormState& state, bool training, Scalar momentum = 0.9,
                    Scalar eps = 1e-8);

// slope is a one-element tensor shared across the layer.
TensorPtr prelu(const TensorPtr& x, const TensorPtr& slope);

// ---- rows of class scores --------------------------------------------------

// Row-wise softmax of (N, K), computed with max-subtraction.
TensorPtr softmax(const TensorPtr& logits);
// Mean over rows of -log softmax(logits)[row, label].
TensorPtr cross_entropy(const TensorPtr& logits, const std::vector<int>& labels);
// Mean over elements of the binary cross-entropy between sigmoid(logits) and a
// constant target, with probabilities clamped to [1e-7, 1 - 1e-7].
TensorPtr binary_cross_entropy_logits(const TensorPtr& logits, Scalar target);

// ---- sampling --------------------------------------------------------------

// mu + sqrt(var) * eps with eps ~ N(0, I) drawn from rng. Gradients flow
// through mu and var only.
TensorPtr reparameterize(const TensorPtr& mu, const TensorPtr& var, RandomSource& rng);

// ---- helpers ---------------------------------------------------------------

// (N, K) one-hot rows from integer labels; not gradient-tracked.
TensorPtr one_hot(const std::vector<int>& labels, int num_classes);

}  // namespace cpgm
