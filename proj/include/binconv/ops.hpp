#pragma once

// Forward and backward passes for the layers used by BinConv. Activations are
// [channels, bins] tensors; convolutions slide along the bin axis only.
//
// Backward functions accumulate (+=) into parameter gradients and overwrite
// input gradients.

#include <cstddef>

#include "binconv/cbe.hpp"
#include "binconv/rng.hpp"
#include "binconv/tensor.hpp"

namespace binconv::ops {

// Left padding uses 1.0 and right padding 0.0, matching the CBE pattern.
template <typename T>
Tensor<T> pad_bins(const Tensor<T>& x, std::size_t left, std::size_t right);

template <typename T>
Tensor<T> pad_bins_backward(const Tensor<T>& grad_padded, std::size_t left, std::size_t right);

// (kernel - 1) / 2 on each side keeps the bin count; kernel must be odd.
std::size_t same_padding(std::size_t kernel);

// x [Cin, D + s - 1], kernels [Cout, Cin / groups, s], bias [Cout] -> [Cout, D].
template <typename T>
Tensor<T> grouped_conv1d(const Tensor<T>& x, const Tensor<T>& kernels, const Tensor<T>& bias,
                         std::size_t groups);

template <typename T>
void grouped_conv1d_backward(const Tensor<T>& x, const Tensor<T>& kernels, std::size_t groups,
                             const Tensor<T>& grad_out, Tensor<T>* grad_x, Tensor<T>& grad_kernels,
                             Tensor<T>& grad_bias);

// Kernel spans the whole context axis. x [1, C, D + s - 1] (or [C, D + s - 1]),
// kernels [K, 1, C, s], bias [K] -> [K, D].
template <typename T>
Tensor<T> conv2d_full_context(const Tensor<T>& x, const Tensor<T>& kernels, const Tensor<T>& bias);

template <typename T>
void conv2d_full_context_backward(const Tensor<T>& x, const Tensor<T>& kernels, const Tensor<T>& grad_out,
                                  Tensor<T>* grad_x, Tensor<T>& grad_kernels, Tensor<T>& grad_bias);

// y[k, j] = gamma[k] * tanh(alpha * x[k, j]) + beta[k]; alpha has shape [1].
template <typename T>
Tensor<T> dytanh(const Tensor<T>& x, const Tensor<T>& alpha, const Tensor<T>& gamma, const Tensor<T>& beta);

template <typename T>
void dytanh_backward(const Tensor<T>& x, const Tensor<T>& alpha, const Tensor<T>& gamma, const Tensor<T>& grad_out,
                     Tensor<T>* grad_x, Tensor<T>& grad_alpha, Tensor<T>& grad_gamma, Tensor<T>& grad_beta);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

// Gradient through relu given the pre-activation input.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& pre_activation, const Tensor<T>& grad_out);

double stable_sigmoid(double z);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

// Inverted-dropout multipliers: 0 with probability `rate`, else 1 / (1 - rate).
template <typename T>
Tensor<T> dropout_mask(const Shape& shape, double rate, Rng& rng);

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, Rng& rng, bool training);

template <typename T>
Tensor<T> multiply(const Tensor<T>& x, const Tensor<T>& y);

template <typename T>
Tensor<T> residual_add(const Tensor<T>& x, const Tensor<T>& y);

template <typename T>
struct Loss {
	double value = 0.0;
	Tensor<T> grad;
};

// Mean over bins of the logit-space binary cross-entropy.
template <typename T>
Loss<T> bce_with_logits(const Tensor<T>& logits, const CbeVector& target);

// Multi-class cross-entropy of a softmax over the logits.
template <typename T>
Loss<T> softmax_cross_entropy(const Tensor<T>& logits, std::size_t target);

template <typename T>
std::vector<double> log_softmax(const Tensor<T>& logits);

} // namespace binconv::ops
