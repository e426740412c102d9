#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "binconv/cbe.hpp"
#include "binconv/ops.hpp"
#include "binconv/rng.hpp"
#include "binconv/tensor.hpp"

namespace binconv {

enum class VariantKind {
	standard,      // depthwise 1D convs, conv head, CBE + BCE
	fc_head,       // head = mean over context then dense D -> D
	standard_conv, // Conv1d-1 / Conv1d-2 with groups = 1
	one_hot,       // one-hot input, softmax head, cross-entropy
};

std::string_view variant_name(VariantKind kind);
VariantKind parse_variant(std::string_view name);

struct BinConvConfig {
	std::size_t bins = 1000;
	double lower = -5.0;
	double upper = 5.0;
	std::size_t context_length = 42;
	std::size_t channels = 42;
	std::size_t conv2d_kernel = 3;
	std::size_t conv1d_kernel = 3;
	std::size_t head_kernel = 51;
	std::size_t blocks = 3;
	double dropout = 0.35;
	double dytanh_alpha = 0.5;

	// Univariate defaults with K = C.
	static BinConvConfig univariate(std::size_t context_length);
	// Same defaults with the smaller multivariate bin count.
	static BinConvConfig multivariate(std::size_t context_length);

	Binning binning() const { return Binning(lower, upper, bins); }

	// Throws std::invalid_argument describing the first violated constraint.
	void validate(VariantKind kind = VariantKind::standard) const;

	bool operator==(const BinConvConfig&) const = default;
};

// Exact scalar parameter count, including biases and DyTanh parameters.
std::size_t param_count(const BinConvConfig& config, VariantKind kind = VariantKind::standard);

template <typename T>
struct BinConvBlock {
	Parameter<T> conv2d_kernels; // [K, 1, C, s1]
	Parameter<T> conv2d_bias;    // [K]
	Parameter<T> dytanh_alpha;   // [1]
	Parameter<T> dytanh_gamma;   // [K]
	Parameter<T> dytanh_beta;    // [K]
	Parameter<T> conv1_kernels;  // [K, K / g, s2]
	Parameter<T> conv1_bias;     // [K]
	Parameter<T> conv2_kernels;  // [C, K / g, s2]
	Parameter<T> conv2_bias;     // [C]
};

// Residual conv blocks followed by a wide conv (or dense) head that emits one
// logit per bin. Sigmoid / softmax is left to consumers of the logits.
template <typename T>
class BinConvModel {
public:
	// Activations cached by forward() for backward().
	struct BlockTrace {
		Tensor<T> input_padded;
		Tensor<T> pre_dytanh;
		Tensor<T> dytanh_padded;
		Tensor<T> pre_relu1;
		Tensor<T> relu1_padded;
		Tensor<T> pre_relu2;
		Tensor<T> dropout_mask; // empty in eval mode
	};
	struct Trace {
		std::vector<BlockTrace> blocks;
		Tensor<T> head_input;
		bool valid = false;
	};

	BinConvModel(const BinConvConfig& config, VariantKind kind, std::uint64_t seed);

	const BinConvConfig& config() const { return config_; }
	VariantKind variant() const { return kind_; }
	std::uint64_t seed() const { return seed_; }
	Binning binning() const { return binning_; }
	std::size_t groups() const;

	// [C, D] input matrix for scaled context values (CBE rows, or one-hot rows
	// for the one_hot variant).
	Tensor<T> encode_input(std::span<const double> scaled_context) const;

	Tensor<T> forward(const Tensor<T>& input, bool training, Rng& rng) const;
	Tensor<T> forward(const Tensor<T>& input, bool training, Rng& rng, Trace& trace) const;
	Tensor<T> predict(const Tensor<T>& input) const;

	// Accumulates parameter gradients for d(loss)/d(logits) = grad_logits.
	void backward(const Trace& trace, const Tensor<T>& grad_logits);

	// BCE against the target CBE, or cross-entropy against its bin for one_hot.
	ops::Loss<T> loss(const Tensor<T>& logits, const CbeVector& target) const;

	// Distribution over ones counts m = 0..D for the next value.
	BinDistribution distribution(const Tensor<T>& logits) const;

	std::vector<Parameter<T>*> parameters();
	std::vector<const Parameter<T>*> parameters() const;
	std::size_t parameter_count() const;
	void zero_grad();

	std::vector<BinConvBlock<T>>& blocks() { return blocks_; }
	const std::vector<BinConvBlock<T>>& blocks() const { return blocks_; }
	Parameter<T>& head_weights() { return head_weights_; }
	Parameter<T>& head_bias() { return head_bias_; }

private:
	Tensor<T> block_forward(const BinConvBlock<T>& block, const Tensor<T>& x, bool training, Rng& rng,
	                        BlockTrace* trace) const;
	Tensor<T> block_backward(BinConvBlock<T>& block, const BlockTrace& trace, const Tensor<T>& grad_out,
	                         bool need_input_grad);
	Tensor<T> head_forward(const Tensor<T>& h, Tensor<T>* head_input) const;

	BinConvConfig config_;
	VariantKind kind_;
	std::uint64_t seed_;
	Binning binning_;
	std::vector<BinConvBlock<T>> blocks_;
	Parameter<T> head_weights_;
	Parameter<T> head_bias_;
};

// One-hot class of a value whose CBE has `ones` leading ones.
std::size_t one_hot_class(std::size_t ones, std::size_t bins);

extern template class BinConvModel<float>;
extern template class BinConvModel<double>;

} // namespace binconv
