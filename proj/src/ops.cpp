#include "binconv/ops.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace binconv {

std::string shape_to_string(const Shape& shape)
{
	std::ostringstream os;
	os << '[';
	for (std::size_t i = 0; i < shape.size(); ++i) {
		os << (i ? ", " : "") << shape[i];
	}
	os << ']';
	return os.str();
}

namespace ops {

namespace {

void require_same_shape(const Shape& a, const Shape& b, const char* what)
{
	if (a != b) {
		throw std::invalid_argument(std::string(what) + ": shape mismatch " + shape_to_string(a) + " vs " +
		                            shape_to_string(b));
	}
}

// Dot product of two length-n rows with eight independent double
// accumulators so the reduction vectorizes without reassociation flags.
template <typename T>
double dot(const T* a, const T* b, std::size_t n)
{
	double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
	std::size_t j = 0;
	for (; j + 8 <= n; j += 8) {
		for (std::size_t l = 0; l < 8; ++l) {
			acc[l] += static_cast<double>(a[j + l]) * static_cast<double>(b[j + l]);
		}
	}
	double tail = 0.0;
	for (; j < n; ++j) {
		tail += static_cast<double>(a[j]) * static_cast<double>(b[j]);
	}
	return ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail;
}

template <typename T>
double row_sum(const T* a, std::size_t n)
{
	double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
	std::size_t j = 0;
	for (; j + 8 <= n; j += 8) {
		for (std::size_t l = 0; l < 8; ++l) {
			acc[l] += static_cast<double>(a[j + l]);
		}
	}
	double tail = 0.0;
	for (; j < n; ++j) {
		tail += static_cast<double>(a[j]);
	}
	return ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail;
}

// acc[j] += w * x[j]
template <typename T>
void axpy(double w, const T* x, double* acc, std::size_t n)
{
	for (std::size_t j = 0; j < n; ++j) {
		acc[j] += w * static_cast<double>(x[j]);
	}
}

struct ConvDims {
	std::size_t in_channels;
	std::size_t padded;
	std::size_t out_channels;
	std::size_t in_per_group;
	std::size_t out_per_group;
	std::size_t kernel;
	std::size_t out_bins;
};

ConvDims conv_dims(std::size_t in_channels, std::size_t padded, const Shape& kernels, std::size_t groups,
                   const char* what)
{
	if (kernels.size() != 3) {
		throw std::invalid_argument(std::string(what) + ": kernels must be [Cout, Cin/groups, s]");
	}
	if (groups == 0 || in_channels % groups != 0 || kernels[0] % groups != 0) {
		throw std::invalid_argument(std::string(what) + ": groups must divide input and output channels");
	}
	ConvDims d{};
	d.in_channels = in_channels;
	d.padded = padded;
	d.out_channels = kernels[0];
	d.in_per_group = in_channels / groups;
	d.out_per_group = kernels[0] / groups;
	d.kernel = kernels[2];
	if (kernels[1] != d.in_per_group) {
		throw std::invalid_argument(std::string(what) + ": kernel input channels " + std::to_string(kernels[1]) +
		                            " != Cin/groups " + std::to_string(d.in_per_group));
	}
	if (d.kernel == 0 || padded < d.kernel) {
		throw std::invalid_argument(std::string(what) + ": padded length shorter than kernel");
	}
	d.out_bins = padded - d.kernel + 1;
	return d;
}

template <typename T>
void conv_forward_core(const T* x, const T* w, const T* bias, const ConvDims& d, T* out)
{
	std::vector<double> acc(d.out_bins);
	for (std::size_t o = 0; o < d.out_channels; ++o) {
		const std::size_t group = o / d.out_per_group;
		std::fill(acc.begin(), acc.end(), static_cast<double>(bias[o]));
		for (std::size_t ci = 0; ci < d.in_per_group; ++ci) {
			const T* xrow = x + (group * d.in_per_group + ci) * d.padded;
			const T* wrow = w + (o * d.in_per_group + ci) * d.kernel;
			for (std::size_t t = 0; t < d.kernel; ++t) {
				axpy(static_cast<double>(wrow[t]), xrow + t, acc.data(), d.out_bins);
			}
		}
		T* orow = out + o * d.out_bins;
		for (std::size_t j = 0; j < d.out_bins; ++j) {
			orow[j] = static_cast<T>(acc[j]);
		}
	}
}

template <typename T>
void conv_backward_core(const T* x, const T* w, const T* grad_out, const ConvDims& d, T* grad_x, T* grad_w,
                        T* grad_bias)
{
	for (std::size_t o = 0; o < d.out_channels; ++o) {
		const T* grow = grad_out + o * d.out_bins;
		grad_bias[o] = static_cast<T>(static_cast<double>(grad_bias[o]) + row_sum(grow, d.out_bins));
		const std::size_t group = o / d.out_per_group;
		for (std::size_t ci = 0; ci < d.in_per_group; ++ci) {
			const T* xrow = x + (group * d.in_per_group + ci) * d.padded;
			T* gwrow = grad_w + (o * d.in_per_group + ci) * d.kernel;
			for (std::size_t t = 0; t < d.kernel; ++t) {
				gwrow[t] = static_cast<T>(static_cast<double>(gwrow[t]) + dot(grow, xrow + t, d.out_bins));
			}
		}
	}
	if (grad_x == nullptr) {
		return;
	}
	std::vector<double> acc(d.padded);
	for (std::size_t c = 0; c < d.in_channels; ++c) {
		const std::size_t group = c / d.in_per_group;
		const std::size_t ci = c % d.in_per_group;
		std::fill(acc.begin(), acc.end(), 0.0);
		for (std::size_t oo = 0; oo < d.out_per_group; ++oo) {
			const std::size_t o = group * d.out_per_group + oo;
			const T* grow = grad_out + o * d.out_bins;
			const T* wrow = w + (o * d.in_per_group + ci) * d.kernel;
			for (std::size_t t = 0; t < d.kernel; ++t) {
				axpy(static_cast<double>(wrow[t]), grow, acc.data() + t, d.out_bins);
			}
		}
		T* gxrow = grad_x + c * d.padded;
		for (std::size_t j = 0; j < d.padded; ++j) {
			gxrow[j] = static_cast<T>(acc[j]);
		}
	}
}

template <typename T>
std::pair<std::size_t, std::size_t> full_context_dims(const Tensor<T>& x)
{
	if (x.rank() == 3 && x.dim(0) == 1) {
		return {x.dim(1), x.dim(2)};
	}
	if (x.rank() == 2) {
		return {x.dim(0), x.dim(1)};
	}
	throw std::invalid_argument("conv2d_full_context: input must be [1, C, D_pad] or [C, D_pad]");
}

} // namespace

std::size_t same_padding(std::size_t kernel)
{
	if (kernel % 2 == 0) {
		throw std::invalid_argument("same_padding: kernel size must be odd, got " + std::to_string(kernel));
	}
	return (kernel - 1) / 2;
}

template <typename T>
Tensor<T> pad_bins(const Tensor<T>& x, std::size_t left, std::size_t right)
{
	if (x.rank() == 0) {
		throw std::invalid_argument("pad_bins: scalar input");
	}
	const std::size_t bins = x.shape().back();
	const std::size_t rows = bins == 0 ? 0 : x.size() / bins;
	Shape shape = x.shape();
	shape.back() = bins + left + right;
	Tensor<T> out(shape);
	for (std::size_t r = 0; r < rows; ++r) {
		auto src = x.row(r);
		auto dst = out.row(r);
		std::fill_n(dst.begin(), left, T{1});
		std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(left));
		std::fill(dst.begin() + static_cast<std::ptrdiff_t>(left + bins), dst.end(), T{0});
	}
	return out;
}

template <typename T>
Tensor<T> pad_bins_backward(const Tensor<T>& grad_padded, std::size_t left, std::size_t right)
{
	const std::size_t padded = grad_padded.shape().back();
	if (padded < left + right) {
		throw std::invalid_argument("pad_bins_backward: padding exceeds length");
	}
	const std::size_t bins = padded - left - right;
	const std::size_t rows = padded == 0 ? 0 : grad_padded.size() / padded;
	Shape shape = grad_padded.shape();
	shape.back() = bins;
	Tensor<T> out(shape);
	for (std::size_t r = 0; r < rows; ++r) {
		auto src = grad_padded.row(r).subspan(left, bins);
		std::copy(src.begin(), src.end(), out.row(r).begin());
	}
	return out;
}

template <typename T>
Tensor<T> grouped_conv1d(const Tensor<T>& x, const Tensor<T>& kernels, const Tensor<T>& bias, std::size_t groups)
{
	if (x.rank() != 2) {
		throw std::invalid_argument("grouped_conv1d: input must be [Cin, D_pad]");
	}
	const ConvDims d = conv_dims(x.dim(0), x.dim(1), kernels.shape(), groups, "grouped_conv1d");
	require_same_shape(bias.shape(), Shape{d.out_channels}, "grouped_conv1d bias");
	Tensor<T> out(Shape{d.out_channels, d.out_bins});
	conv_forward_core(x.ptr(), kernels.ptr(), bias.ptr(), d, out.ptr());
	return out;
}

template <typename T>
void grouped_conv1d_backward(const Tensor<T>& x, const Tensor<T>& kernels, std::size_t groups,
                             const Tensor<T>& grad_out, Tensor<T>* grad_x, Tensor<T>& grad_kernels,
                             Tensor<T>& grad_bias)
{
	if (x.rank() != 2) {
		throw std::invalid_argument("grouped_conv1d_backward: input must be [Cin, D_pad]");
	}
	const ConvDims d = conv_dims(x.dim(0), x.dim(1), kernels.shape(), groups, "grouped_conv1d_backward");
	require_same_shape(grad_out.shape(), Shape{d.out_channels, d.out_bins}, "grouped_conv1d_backward grad");
	require_same_shape(grad_kernels.shape(), kernels.shape(), "grouped_conv1d_backward kernel grad");
	require_same_shape(grad_bias.shape(), Shape{d.out_channels}, "grouped_conv1d_backward bias grad");
	if (grad_x != nullptr && grad_x->shape() != x.shape()) {
		*grad_x = Tensor<T>(x.shape());
	}
	conv_backward_core(x.ptr(), kernels.ptr(), grad_out.ptr(), d, grad_x ? grad_x->ptr() : nullptr,
	                   grad_kernels.ptr(), grad_bias.ptr());
}

template <typename T>
Tensor<T> conv2d_full_context(const Tensor<T>& x, const Tensor<T>& kernels, const Tensor<T>& bias)
{
	const auto [channels, padded] = full_context_dims(x);
	if (kernels.rank() != 4 || kernels.dim(1) != 1 || kernels.dim(2) != channels) {
		throw std::invalid_argument("conv2d_full_context: kernels must be [K, 1, C, s] with C = " +
		                            std::to_string(channels) + ", got " + shape_to_string(kernels.shape()));
	}
	const Shape as_conv1d{kernels.dim(0), channels, kernels.dim(3)};
	const ConvDims d = conv_dims(channels, padded, as_conv1d, 1, "conv2d_full_context");
	require_same_shape(bias.shape(), Shape{d.out_channels}, "conv2d_full_context bias");
	Tensor<T> out(Shape{d.out_channels, d.out_bins});
	conv_forward_core(x.ptr(), kernels.ptr(), bias.ptr(), d, out.ptr());
	return out;
}

template <typename T>
void conv2d_full_context_backward(const Tensor<T>& x, const Tensor<T>& kernels, const Tensor<T>& grad_out,
                                  Tensor<T>* grad_x, Tensor<T>& grad_kernels, Tensor<T>& grad_bias)
{
	const auto [channels, padded] = full_context_dims(x);
	if (kernels.rank() != 4 || kernels.dim(1) != 1 || kernels.dim(2) != channels) {
		throw std::invalid_argument("conv2d_full_context_backward: kernel shape mismatch");
	}
	const Shape as_conv1d{kernels.dim(0), channels, kernels.dim(3)};
	const ConvDims d = conv_dims(channels, padded, as_conv1d, 1, "conv2d_full_context_backward");
	require_same_shape(grad_out.shape(), Shape{d.out_channels, d.out_bins}, "conv2d_full_context_backward grad");
	require_same_shape(grad_kernels.shape(), kernels.shape(), "conv2d_full_context_backward kernel grad");
	require_same_shape(grad_bias.shape(), Shape{d.out_channels}, "conv2d_full_context_backward bias grad");
	if (grad_x != nullptr && grad_x->shape() != x.shape()) {
		*grad_x = Tensor<T>(x.shape());
	}
	conv_backward_core(x.ptr(), kernels.ptr(), grad_out.ptr(), d, grad_x ? grad_x->ptr() : nullptr,
	                   grad_kernels.ptr(), grad_bias.ptr());
}

template <typename T>
Tensor<T> dytanh(const Tensor<T>& x, const Tensor<T>& alpha, const Tensor<T>& gamma, const Tensor<T>& beta)
{
	if (x.rank() != 2 || alpha.size() != 1 || gamma.shape() != Shape{x.dim(0)} || beta.shape() != gamma.shape()) {
		throw std::invalid_argument("dytanh: expected x [K, D], alpha [1], gamma/beta [K]");
	}
	const double a = alpha[0];
	Tensor<T> out(x.shape());
	for (std::size_t k = 0; k < x.dim(0); ++k) {
		const double g = gamma[k];
		const double b = beta[k];
		auto src = x.row(k);
		auto dst = out.row(k);
		for (std::size_t j = 0; j < src.size(); ++j) {
			dst[j] = static_cast<T>(g * std::tanh(a * static_cast<double>(src[j])) + b);
		}
	}
	return out;
}

template <typename T>
void dytanh_backward(const Tensor<T>& x, const Tensor<T>& alpha, const Tensor<T>& gamma, const Tensor<T>& grad_out,
                     Tensor<T>* grad_x, Tensor<T>& grad_alpha, Tensor<T>& grad_gamma, Tensor<T>& grad_beta)
{
	require_same_shape(grad_out.shape(), x.shape(), "dytanh_backward");
	if (grad_x != nullptr && grad_x->shape() != x.shape()) {
		*grad_x = Tensor<T>(x.shape());
	}
	const double a = alpha[0];
	double d_alpha = 0.0;
	for (std::size_t k = 0; k < x.dim(0); ++k) {
		const double g = gamma[k];
		auto xs = x.row(k);
		auto gs = grad_out.row(k);
		double d_gamma = 0.0;
		double d_beta = 0.0;
		for (std::size_t j = 0; j < xs.size(); ++j) {
			const double xv = xs[j];
			const double gv = gs[j];
			const double th = std::tanh(a * xv);
			const double sech2 = 1.0 - th * th;
			d_gamma += gv * th;
			d_beta += gv;
			d_alpha += gv * g * xv * sech2;
			if (grad_x != nullptr) {
				grad_x->row(k)[j] = static_cast<T>(gv * g * a * sech2);
			}
		}
		grad_gamma[k] = static_cast<T>(static_cast<double>(grad_gamma[k]) + d_gamma);
		grad_beta[k] = static_cast<T>(static_cast<double>(grad_beta[k]) + d_beta);
	}
	grad_alpha[0] = static_cast<T>(static_cast<double>(grad_alpha[0]) + d_alpha);
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x)
{
	Tensor<T> out(x.shape());
	for (std::size_t i = 0; i < x.size(); ++i) {
		out[i] = x[i] > T{0} ? x[i] : T{0};
	}
	return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& pre_activation, const Tensor<T>& grad_out)
{
	require_same_shape(pre_activation.shape(), grad_out.shape(), "relu_backward");
	Tensor<T> out(grad_out.shape());
	for (std::size_t i = 0; i < out.size(); ++i) {
		out[i] = pre_activation[i] > T{0} ? grad_out[i] : T{0};
	}
	return out;
}

double stable_sigmoid(double z)
{
	if (z >= 0.0) {
		return 1.0 / (1.0 + std::exp(-z));
	}
	const double e = std::exp(z);
	return e / (1.0 + e);
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x)
{
	Tensor<T> out(x.shape());
	for (std::size_t i = 0; i < x.size(); ++i) {
		out[i] = static_cast<T>(stable_sigmoid(static_cast<double>(x[i])));
	}
	return out;
}

template <typename T>
Tensor<T> dropout_mask(const Shape& shape, double rate, Rng& rng)
{
	if (!(rate >= 0.0 && rate < 1.0)) {
		throw std::invalid_argument("dropout: rate must be in [0, 1)");
	}
	Tensor<T> mask(shape, T{1});
	if (rate == 0.0) {
		return mask;
	}
	const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
	for (auto& m : mask.data()) {
		m = rng.uniform() < rate ? T{0} : keep_scale;
	}
	return mask;
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, Rng& rng, bool training)
{
	if (!(rate >= 0.0 && rate < 1.0)) {
		throw std::invalid_argument("dropout: rate must be in [0, 1)");
	}
	if (!training) {
		return x;
	}
	return multiply(x, dropout_mask<T>(x.shape(), rate, rng));
}

template <typename T>
Tensor<T> multiply(const Tensor<T>& x, const Tensor<T>& y)
{
	require_same_shape(x.shape(), y.shape(), "multiply");
	Tensor<T> out(x.shape());
	for (std::size_t i = 0; i < x.size(); ++i) {
		out[i] = x[i] * y[i];
	}
	return out;
}

template <typename T>
Tensor<T> residual_add(const Tensor<T>& x, const Tensor<T>& y)
{
	require_same_shape(x.shape(), y.shape(), "residual_add");
	Tensor<T> out(x.shape());
	for (std::size_t i = 0; i < x.size(); ++i) {
		out[i] = x[i] + y[i];
	}
	return out;
}

template <typename T>
Loss<T> bce_with_logits(const Tensor<T>& logits, const CbeVector& target)
{
	if (logits.size() != target.bits.size()) {
		throw std::invalid_argument("bce_with_logits: logits length " + std::to_string(logits.size()) +
		                            " != target length " + std::to_string(target.bits.size()));
	}
	const double n = static_cast<double>(logits.size());
	Loss<T> loss;
	loss.grad = Tensor<T>(logits.shape());
	double total = 0.0;
	for (std::size_t i = 0; i < logits.size(); ++i) {
		const double z = logits[i];
		const double t = target.bits[i];
		total += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
		loss.grad[i] = static_cast<T>((stable_sigmoid(z) - t) / n);
	}
	loss.value = total / n;
	return loss;
}

template <typename T>
std::vector<double> log_softmax(const Tensor<T>& logits)
{
	std::vector<double> z(logits.data().begin(), logits.data().end());
	const double lse = log_sum_exp(z);
	for (auto& v : z) {
		v -= lse;
	}
	return z;
}

template <typename T>
Loss<T> softmax_cross_entropy(const Tensor<T>& logits, std::size_t target)
{
	if (target >= logits.size()) {
		throw std::out_of_range("softmax_cross_entropy: target index out of range");
	}
	const auto log_probs = log_softmax(logits);
	Loss<T> loss;
	loss.value = -log_probs[target];
	loss.grad = Tensor<T>(logits.shape());
	for (std::size_t i = 0; i < logits.size(); ++i) {
		loss.grad[i] = static_cast<T>(std::exp(log_probs[i]) - (i == target ? 1.0 : 0.0));
	}
	return loss;
}

#define BINCONV_INSTANTIATE_OPS(T)                                                                                  \
	template Tensor<T> pad_bins(const Tensor<T>&, std::size_t, std::size_t);                                         \
	template Tensor<T> pad_bins_backward(const Tensor<T>&, std::size_t, std::size_t);                                \
	template Tensor<T> grouped_conv1d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t);            \
	template void grouped_conv1d_backward(const Tensor<T>&, const Tensor<T>&, std::size_t, const Tensor<T>&,         \
	                                      Tensor<T>*, Tensor<T>&, Tensor<T>&);                                       \
	template Tensor<T> conv2d_full_context(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                     \
	template void conv2d_full_context_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Tensor<T>*,     \
	                                           Tensor<T>&, Tensor<T>&);                                              \
	template Tensor<T> dytanh(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);               \
	template void dytanh_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,            \
	                              Tensor<T>*, Tensor<T>&, Tensor<T>&, Tensor<T>&);                                   \
	template Tensor<T> relu(const Tensor<T>&);                                                                       \
	template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                                            \
	template Tensor<T> sigmoid(const Tensor<T>&);                                                                    \
	template Tensor<T> dropout_mask(const Shape&, double, Rng&);                                                     \
	template Tensor<T> dropout(const Tensor<T>&, double, Rng&, bool);                                                \
	template Tensor<T> multiply(const Tensor<T>&, const Tensor<T>&);                                                 \
	template Tensor<T> residual_add(const Tensor<T>&, const Tensor<T>&);                                             \
	template Loss<T> bce_with_logits(const Tensor<T>&, const CbeVector&);                                            \
	template Loss<T> softmax_cross_entropy(const Tensor<T>&, std::size_t);                                           \
	template std::vector<double> log_softmax(const Tensor<T>&);

BINCONV_INSTANTIATE_OPS(float)
BINCONV_INSTANTIATE_OPS(double)

#undef BINCONV_INSTANTIATE_OPS

} // namespace ops
} // namespace binconv
