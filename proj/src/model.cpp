#include "binconv/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace binconv {

std::string_view variant_name(VariantKind kind)
{
	switch (kind) {
	case VariantKind::standard:
		return "standard";
	case VariantKind::fc_head:
		return "fc_head";
	case VariantKind::standard_conv:
		return "standard_conv";
	case VariantKind::one_hot:
		return "one_hot";
	}
	throw std::invalid_argument("unknown variant kind");
}

VariantKind parse_variant(std::string_view name)
{
	for (auto kind : {VariantKind::standard, VariantKind::fc_head, VariantKind::standard_conv, VariantKind::one_hot}) {
		if (variant_name(kind) == name) {
			return kind;
		}
	}
	throw std::invalid_argument("unknown variant '" + std::string(name) +
	                            "' (expected standard, fc_head, standard_conv or one_hot)");
}

BinConvConfig BinConvConfig::univariate(std::size_t context_length)
{
	BinConvConfig c;
	c.context_length = context_length;
	c.channels = context_length;
	return c;
}

BinConvConfig BinConvConfig::multivariate(std::size_t context_length)
{
	BinConvConfig c = univariate(context_length);
	c.bins = 500;
	return c;
}

void BinConvConfig::validate(VariantKind kind) const
{
	auto fail = [](const std::string& msg) { throw std::invalid_argument("model config: " + msg); };
	if (bins == 0) {
		fail("bins must be positive");
	}
	if (!std::isfinite(lower) || !std::isfinite(upper) || !(upper > lower)) {
		fail("upper bin edge must exceed lower bin edge");
	}
	if (context_length == 0) {
		fail("context_length must be positive");
	}
	if (channels == 0) {
		fail("channels must be positive");
	}
	if (blocks == 0) {
		fail("blocks must be positive");
	}
	for (auto [name, k] : {std::pair{"conv2d_kernel", conv2d_kernel}, std::pair{"conv1d_kernel", conv1d_kernel},
	                       std::pair{"head_kernel", head_kernel}}) {
		if (k == 0 || k % 2 == 0) {
			fail(std::string(name) + " must be odd, got " + std::to_string(k));
		}
	}
	if (!(dropout >= 0.0 && dropout < 1.0)) {
		fail("dropout must be in [0, 1)");
	}
	if (kind != VariantKind::standard_conv && context_length % channels != 0) {
		fail("depthwise Conv1d-2 (K -> C, groups K) needs K to divide C; K = " + std::to_string(channels) +
		     ", C = " + std::to_string(context_length));
	}
}

std::size_t param_count(const BinConvConfig& config, VariantKind kind)
{
	config.validate(kind);
	const std::size_t c = config.context_length;
	const std::size_t k = config.channels;
	const std::size_t g = kind == VariantKind::standard_conv ? 1 : k;
	const std::size_t per_block = (k * c * config.conv2d_kernel + k) // Conv2d
	                              + (1 + 2 * k)                      // DyTanh alpha, gamma, beta
	                              + (k * (k / g) * config.conv1d_kernel + k)
	                              + (c * (k / g) * config.conv1d_kernel + c);
	const std::size_t head = kind == VariantKind::fc_head ? config.bins * config.bins + config.bins
	                                                      : c * config.head_kernel + 1;
	return config.blocks * per_block + head;
}

std::size_t one_hot_class(std::size_t ones, std::size_t bins)
{
	return ones == 0 ? 0 : std::min(ones, bins) - 1;
}

namespace {

template <typename T>
void init_uniform(Parameter<T>& p, double fan_in, Rng& rng)
{
	const double bound = 1.0 / std::sqrt(fan_in);
	for (auto& v : p.value.data()) {
		v = static_cast<T>((2.0 * rng.uniform() - 1.0) * bound);
	}
}

} // namespace

template <typename T>
BinConvModel<T>::BinConvModel(const BinConvConfig& config, VariantKind kind, std::uint64_t seed)
	: config_(config), kind_(kind), seed_(seed), binning_((config.validate(kind), config.binning()))
{
	const std::size_t c = config_.context_length;
	const std::size_t k = config_.channels;
	const std::size_t g = groups();
	Rng rng(seed);

	blocks_.reserve(config_.blocks);
	for (std::size_t b = 0; b < config_.blocks; ++b) {
		const std::string prefix = "blocks." + std::to_string(b) + ".";
		BinConvBlock<T> blk{
			Parameter<T>(prefix + "conv2d.weight", {k, 1, c, config_.conv2d_kernel}),
			Parameter<T>(prefix + "conv2d.bias", {k}),
			Parameter<T>(prefix + "dytanh.alpha", {1}),
			Parameter<T>(prefix + "dytanh.gamma", {k}),
			Parameter<T>(prefix + "dytanh.beta", {k}),
			Parameter<T>(prefix + "conv1d_1.weight", {k, k / g, config_.conv1d_kernel}),
			Parameter<T>(prefix + "conv1d_1.bias", {k}),
			Parameter<T>(prefix + "conv1d_2.weight", {c, k / g, config_.conv1d_kernel}),
			Parameter<T>(prefix + "conv1d_2.bias", {c}),
		};
		const double fan2d = static_cast<double>(c * config_.conv2d_kernel);
		const double fan1d = static_cast<double>((k / g) * config_.conv1d_kernel);
		init_uniform(blk.conv2d_kernels, fan2d, rng);
		init_uniform(blk.conv2d_bias, fan2d, rng);
		blk.dytanh_alpha.value.fill(static_cast<T>(config_.dytanh_alpha));
		blk.dytanh_gamma.value.fill(T{1});
		blk.dytanh_beta.value.fill(T{0});
		init_uniform(blk.conv1_kernels, fan1d, rng);
		init_uniform(blk.conv1_bias, fan1d, rng);
		init_uniform(blk.conv2_kernels, fan1d, rng);
		init_uniform(blk.conv2_bias, fan1d, rng);
		blocks_.push_back(std::move(blk));
	}

	if (kind_ == VariantKind::fc_head) {
		head_weights_ = Parameter<T>("head.fc.weight", {config_.bins, config_.bins});
		head_bias_ = Parameter<T>("head.fc.bias", {config_.bins});
		init_uniform(head_weights_, static_cast<double>(config_.bins), rng);
		init_uniform(head_bias_, static_cast<double>(config_.bins), rng);
	} else {
		head_weights_ = Parameter<T>("head.conv1d.weight", {1, c, config_.head_kernel});
		head_bias_ = Parameter<T>("head.conv1d.bias", {1});
		const double fan = static_cast<double>(c * config_.head_kernel);
		init_uniform(head_weights_, fan, rng);
		init_uniform(head_bias_, fan, rng);
	}
}

template <typename T>
std::size_t BinConvModel<T>::groups() const
{
	return kind_ == VariantKind::standard_conv ? 1 : config_.channels;
}

template <typename T>
Tensor<T> BinConvModel<T>::encode_input(std::span<const double> scaled_context) const
{
	if (scaled_context.size() != config_.context_length) {
		throw std::invalid_argument("encode_input: context length " + std::to_string(scaled_context.size()) +
		                            " != model context length " + std::to_string(config_.context_length));
	}
	const std::size_t bins = config_.bins;
	Tensor<T> input(Shape{scaled_context.size(), bins});
	for (std::size_t r = 0; r < scaled_context.size(); ++r) {
		const std::size_t ones = ones_count(scaled_context[r], binning_);
		auto row = input.row(r);
		if (kind_ == VariantKind::one_hot) {
			row[one_hot_class(ones, bins)] = T{1};
		} else {
			std::fill_n(row.begin(), ones, T{1});
		}
	}
	return input;
}

template <typename T>
Tensor<T> BinConvModel<T>::block_forward(const BinConvBlock<T>& block, const Tensor<T>& x, bool training, Rng& rng,
                                         BlockTrace* trace) const
{
	const std::size_t p1 = ops::same_padding(config_.conv2d_kernel);
	const std::size_t p2 = ops::same_padding(config_.conv1d_kernel);
	const std::size_t g = groups();

	Tensor<T> xp = ops::pad_bins(x, p1, p1);
	Tensor<T> a = ops::conv2d_full_context(xp, block.conv2d_kernels.value, block.conv2d_bias.value);
	Tensor<T> u = ops::dytanh(a, block.dytanh_alpha.value, block.dytanh_gamma.value, block.dytanh_beta.value);
	Tensor<T> up = ops::pad_bins(u, p2, p2);
	Tensor<T> b1 = ops::grouped_conv1d(up, block.conv1_kernels.value, block.conv1_bias.value, g);
	Tensor<T> r1p = ops::pad_bins(ops::relu(b1), p2, p2);
	Tensor<T> b2 = ops::grouped_conv1d(r1p, block.conv2_kernels.value, block.conv2_bias.value, g);
	Tensor<T> r2 = ops::relu(b2);
	Tensor<T> mask;
	if (training && config_.dropout > 0.0) {
		mask = ops::dropout_mask<T>(r2.shape(), config_.dropout, rng);
		r2 = ops::multiply(r2, mask);
	}
	Tensor<T> out = ops::residual_add(x, r2);
	if (trace != nullptr) {
		trace->input_padded = std::move(xp);
		trace->pre_dytanh = std::move(a);
		trace->dytanh_padded = std::move(up);
		trace->pre_relu1 = std::move(b1);
		trace->relu1_padded = std::move(r1p);
		trace->pre_relu2 = std::move(b2);
		trace->dropout_mask = std::move(mask);
	}
	return out;
}

template <typename T>
Tensor<T> BinConvModel<T>::head_forward(const Tensor<T>& h, Tensor<T>* head_input) const
{
	const std::size_t bins = config_.bins;
	if (kind_ == VariantKind::fc_head) {
		const std::size_t c = h.dim(0);
		std::vector<double> mean(bins, 0.0);
		for (std::size_t r = 0; r < c; ++r) {
			auto row = h.row(r);
			for (std::size_t j = 0; j < bins; ++j) {
				mean[j] += static_cast<double>(row[j]);
			}
		}
		Tensor<T> hbar(Shape{bins});
		for (std::size_t j = 0; j < bins; ++j) {
			hbar[j] = static_cast<T>(mean[j] / static_cast<double>(c));
		}
		Tensor<T> logits(Shape{bins});
		const Tensor<T>& w = head_weights_.value;
		for (std::size_t i = 0; i < bins; ++i) {
			const T* wrow = w.ptr() + i * bins;
			double acc = static_cast<double>(head_bias_.value[i]);
			for (std::size_t j = 0; j < bins; ++j) {
				acc += static_cast<double>(wrow[j]) * static_cast<double>(hbar[j]);
			}
			logits[i] = static_cast<T>(acc);
		}
		if (head_input != nullptr) {
			*head_input = std::move(hbar);
		}
		return logits;
	}
	const std::size_t p3 = ops::same_padding(config_.head_kernel);
	Tensor<T> hp = ops::pad_bins(h, p3, p3);
	Tensor<T> out = ops::grouped_conv1d(hp, head_weights_.value, head_bias_.value, 1);
	if (head_input != nullptr) {
		*head_input = std::move(hp);
	}
	return out.reshaped(Shape{bins});
}

template <typename T>
Tensor<T> BinConvModel<T>::forward(const Tensor<T>& input, bool training, Rng& rng, Trace& trace) const
{
	if (input.shape() != Shape{config_.context_length, config_.bins}) {
		throw std::invalid_argument("forward: input shape " + shape_to_string(input.shape()) + " != [" +
		                            std::to_string(config_.context_length) + ", " + std::to_string(config_.bins) +
		                            "]");
	}
	trace.blocks.assign(blocks_.size(), BlockTrace{});
	Tensor<T> h = input;
	for (std::size_t b = 0; b < blocks_.size(); ++b) {
		h = block_forward(blocks_[b], h, training, rng, &trace.blocks[b]);
	}
	Tensor<T> logits = head_forward(h, &trace.head_input);
	trace.valid = true;
	return logits;
}

template <typename T>
Tensor<T> BinConvModel<T>::forward(const Tensor<T>& input, bool training, Rng& rng) const
{
	if (input.shape() != Shape{config_.context_length, config_.bins}) {
		throw std::invalid_argument("forward: input shape " + shape_to_string(input.shape()) + " != [" +
		                            std::to_string(config_.context_length) + ", " + std::to_string(config_.bins) +
		                            "]");
	}
	Tensor<T> h = input;
	for (const auto& block : blocks_) {
		h = block_forward(block, h, training, rng, nullptr);
	}
	return head_forward(h, nullptr);
}

template <typename T>
Tensor<T> BinConvModel<T>::predict(const Tensor<T>& input) const
{
	Rng unused(0);
	return forward(input, false, unused);
}

template <typename T>
Tensor<T> BinConvModel<T>::block_backward(BinConvBlock<T>& block, const BlockTrace& trace, const Tensor<T>& grad_out,
                                          bool need_input_grad)
{
	const std::size_t p1 = ops::same_padding(config_.conv2d_kernel);
	const std::size_t p2 = ops::same_padding(config_.conv1d_kernel);
	const std::size_t g = groups();

	Tensor<T> grad_r2 = trace.dropout_mask.empty() ? grad_out : ops::multiply(grad_out, trace.dropout_mask);
	Tensor<T> grad_b2 = ops::relu_backward(trace.pre_relu2, grad_r2);
	Tensor<T> grad_r1p;
	ops::grouped_conv1d_backward(trace.relu1_padded, block.conv2_kernels.value, g, grad_b2, &grad_r1p,
	                             block.conv2_kernels.grad, block.conv2_bias.grad);
	Tensor<T> grad_b1 = ops::relu_backward(trace.pre_relu1, ops::pad_bins_backward(grad_r1p, p2, p2));
	Tensor<T> grad_up;
	ops::grouped_conv1d_backward(trace.dytanh_padded, block.conv1_kernels.value, g, grad_b1, &grad_up,
	                             block.conv1_kernels.grad, block.conv1_bias.grad);
	Tensor<T> grad_a;
	ops::dytanh_backward(trace.pre_dytanh, block.dytanh_alpha.value, block.dytanh_gamma.value,
	                     ops::pad_bins_backward(grad_up, p2, p2), &grad_a, block.dytanh_alpha.grad,
	                     block.dytanh_gamma.grad, block.dytanh_beta.grad);
	Tensor<T> grad_xp;
	ops::conv2d_full_context_backward(trace.input_padded, block.conv2d_kernels.value, grad_a,
	                                  need_input_grad ? &grad_xp : nullptr, block.conv2d_kernels.grad,
	                                  block.conv2d_bias.grad);
	if (!need_input_grad) {
		return {};
	}
	return ops::residual_add(grad_out, ops::pad_bins_backward(grad_xp, p1, p1));
}

template <typename T>
void BinConvModel<T>::backward(const Trace& trace, const Tensor<T>& grad_logits)
{
	if (!trace.valid || trace.blocks.size() != blocks_.size()) {
		throw std::logic_error("backward called without a matching forward trace");
	}
	const std::size_t bins = config_.bins;
	if (grad_logits.size() != bins) {
		throw std::invalid_argument("backward: gradient length mismatch");
	}
	const std::size_t c = config_.context_length;
	Tensor<T> grad_h;
	if (kind_ == VariantKind::fc_head) {
		const Tensor<T>& hbar = trace.head_input;
		const Tensor<T>& w = head_weights_.value;
		std::vector<double> grad_hbar(bins, 0.0);
		for (std::size_t i = 0; i < bins; ++i) {
			const double gi = grad_logits[i];
			head_bias_.grad[i] = static_cast<T>(static_cast<double>(head_bias_.grad[i]) + gi);
			if (gi == 0.0) {
				continue;
			}
			T* gw = head_weights_.grad.ptr() + i * bins;
			const T* wrow = w.ptr() + i * bins;
			for (std::size_t j = 0; j < bins; ++j) {
				gw[j] = static_cast<T>(static_cast<double>(gw[j]) + gi * static_cast<double>(hbar[j]));
				grad_hbar[j] += gi * static_cast<double>(wrow[j]);
			}
		}
		grad_h = Tensor<T>(Shape{c, bins});
		for (std::size_t r = 0; r < c; ++r) {
			auto row = grad_h.row(r);
			for (std::size_t j = 0; j < bins; ++j) {
				row[j] = static_cast<T>(grad_hbar[j] / static_cast<double>(c));
			}
		}
	} else {
		const std::size_t p3 = ops::same_padding(config_.head_kernel);
		Tensor<T> grad_hp;
		ops::grouped_conv1d_backward(trace.head_input, head_weights_.value, 1, grad_logits.reshaped(Shape{1, bins}),
		                             &grad_hp, head_weights_.grad, head_bias_.grad);
		grad_h = ops::pad_bins_backward(grad_hp, p3, p3);
	}
	for (std::size_t b = blocks_.size(); b-- > 0;) {
		grad_h = block_backward(blocks_[b], trace.blocks[b], grad_h, b > 0);
	}
}

template <typename T>
ops::Loss<T> BinConvModel<T>::loss(const Tensor<T>& logits, const CbeVector& target) const
{
	if (kind_ == VariantKind::one_hot) {
		return ops::softmax_cross_entropy(logits, one_hot_class(target.ones, config_.bins));
	}
	return ops::bce_with_logits(logits, target);
}

template <typename T>
BinDistribution BinConvModel<T>::distribution(const Tensor<T>& logits) const
{
	if (kind_ == VariantKind::one_hot) {
		// Class i is the bin with i + 1 leading ones; m = 0 gets the clamp mass.
		const auto lsm = ops::log_softmax(logits);
		std::vector<double> log_hat(lsm.size() + 1);
		log_hat[0] = std::log(kProbabilityClamp);
		for (std::size_t i = 0; i < lsm.size(); ++i) {
			log_hat[i + 1] = std::max(lsm[i], std::log(kProbabilityClamp));
		}
		BinDistribution dist;
		dist.log_normalizer = log_sum_exp(log_hat);
		dist.log_probs.resize(log_hat.size());
		for (std::size_t m = 0; m < log_hat.size(); ++m) {
			dist.log_probs[m] = log_hat[m] - dist.log_normalizer;
		}
		return dist;
	}
	std::vector<double> probs(logits.size());
	for (std::size_t i = 0; i < logits.size(); ++i) {
		probs[i] = ops::stable_sigmoid(static_cast<double>(logits[i]));
	}
	return valid_sequence_log_probs(probs);
}

template <typename T>
std::vector<Parameter<T>*> BinConvModel<T>::parameters()
{
	std::vector<Parameter<T>*> out;
	for (auto& b : blocks_) {
		for (auto* p : {&b.conv2d_kernels, &b.conv2d_bias, &b.dytanh_alpha, &b.dytanh_gamma, &b.dytanh_beta,
		                &b.conv1_kernels, &b.conv1_bias, &b.conv2_kernels, &b.conv2_bias}) {
			out.push_back(p);
		}
	}
	out.push_back(&head_weights_);
	out.push_back(&head_bias_);
	return out;
}

template <typename T>
std::vector<const Parameter<T>*> BinConvModel<T>::parameters() const
{
	auto mut = const_cast<BinConvModel*>(this)->parameters();
	return {mut.begin(), mut.end()};
}

template <typename T>
std::size_t BinConvModel<T>::parameter_count() const
{
	std::size_t n = 0;
	for (const auto* p : parameters()) {
		n += p->size();
	}
	return n;
}

template <typename T>
void BinConvModel<T>::zero_grad()
{
	for (auto* p : parameters()) {
		p->zero_grad();
	}
}

template class BinConvModel<float>;
template class BinConvModel<double>;

} // namespace binconv
