#include "binconv/training.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "binconv/rng.hpp"

namespace binconv {

void TrainConfig::validate() const
{
	if (epochs == 0) {
		throw std::invalid_argument("train config: epochs must be >= 1");
	}
	if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
		throw std::invalid_argument("train config: learning_rate must be finite and non-negative");
	}
	if (batch_size == 0) {
		throw std::invalid_argument("train config: batch_size must be >= 1");
	}
	if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) ||
	    !(adam.epsilon > 0.0)) {
		throw std::invalid_argument("train config: invalid Adam settings");
	}
}

std::vector<TrainingPair> make_pairs(std::span<const double> series, std::size_t context_length)
{
	if (context_length == 0) {
		throw std::invalid_argument("make_pairs: context length must be positive");
	}
	if (series.size() < context_length + 1) {
		throw std::invalid_argument("make_pairs: series of length " + std::to_string(series.size()) +
		                            " is too short for context " + std::to_string(context_length));
	}
	std::vector<TrainingPair> pairs;
	pairs.reserve(series.size() - context_length);
	for (std::size_t i = 0; i + context_length < series.size(); ++i) {
		TrainingPair p;
		p.context.assign(series.begin() + static_cast<std::ptrdiff_t>(i),
		                 series.begin() + static_cast<std::ptrdiff_t>(i + context_length));
		p.target = series[i + context_length];
		pairs.push_back(std::move(p));
	}
	return pairs;
}

PreparedPair prepare_pair(const TrainingPair& pair, const Binning& binning, std::optional<double> fixed_scale)
{
	if (pair.context.empty()) {
		throw std::invalid_argument("prepare_pair: empty context");
	}
	if (!std::isfinite(pair.target)) {
		throw std::invalid_argument("prepare_pair: non-finite target");
	}
	PreparedPair out;
	if (fixed_scale) {
		if (!(*fixed_scale > 0.0) || !std::isfinite(*fixed_scale)) {
			throw std::invalid_argument("prepare_pair: fixed scale must be positive");
		}
		out.scale = Scale{*fixed_scale};
	} else {
		out.scale = mean_scale(pair.context);
	}
	out.scaled_context.reserve(pair.context.size());
	for (double x : pair.context) {
		out.scaled_context.push_back(x / out.scale.value);
	}
	out.target = encode(pair.target / out.scale.value, binning);
	return out;
}

template <typename T>
Tensor<T> encode_context(std::span<const double> scaled_context, const Binning& binning)
{
	Tensor<T> m(Shape{scaled_context.size(), binning.bins()});
	for (std::size_t r = 0; r < scaled_context.size(); ++r) {
		auto row = m.row(r);
		std::fill_n(row.begin(), ones_count(scaled_context[r], binning), T{1});
	}
	return m;
}

template <typename T>
PreparedBatch<T> prepare_batch(const TrainingPair& pair, const Binning& binning, std::optional<double> fixed_scale)
{
	PreparedPair p = prepare_pair(pair, binning, fixed_scale);
	return PreparedBatch<T>{p.scale, encode_context<T>(p.scaled_context, binning), std::move(p.target)};
}

template <typename T>
void adam_step(std::span<Parameter<T>* const> params, double learning_rate, std::uint64_t step,
               const AdamSettings& settings)
{
	if (step == 0) {
		throw std::invalid_argument("adam_step: step index starts at 1");
	}
	const double b1 = settings.beta1;
	const double b2 = settings.beta2;
	const double correction1 = 1.0 - std::pow(b1, static_cast<double>(step));
	const double correction2 = 1.0 - std::pow(b2, static_cast<double>(step));
	for (Parameter<T>* p : params) {
		auto value = p->value.data();
		auto grad = p->grad.data();
		auto m = p->adam_m.data();
		auto v = p->adam_v.data();
		for (std::size_t i = 0; i < value.size(); ++i) {
			const double g = grad[i];
			const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * g;
			const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * g * g;
			m[i] = static_cast<T>(mi);
			v[i] = static_cast<T>(vi);
			const double m_hat = mi / correction1;
			const double v_hat = vi / correction2;
			value[i] = static_cast<T>(static_cast<double>(value[i]) -
			                          learning_rate * m_hat / (std::sqrt(v_hat) + settings.epsilon));
		}
		p->step = step;
	}
}

template <typename T>
double accumulate_gradients(BinConvModel<T>& model, std::span<const PreparedPair> batch, bool training,
                            std::uint64_t dropout_seed)
{
	if (batch.empty()) {
		throw std::invalid_argument("accumulate_gradients: empty batch");
	}
	const double inv_n = 1.0 / static_cast<double>(batch.size());
	typename BinConvModel<T>::Trace trace;
	double total = 0.0;
	for (std::size_t q = 0; q < batch.size(); ++q) {
		const PreparedPair& item = batch[q];
		Rng rng(derive_seed(dropout_seed, q));
		const Tensor<T> input = model.encode_input(item.scaled_context);
		const Tensor<T> logits = model.forward(input, training, rng, trace);
		ops::Loss<T> loss = model.loss(logits, item.target);
		if (!std::isfinite(loss.value)) {
			throw std::runtime_error("non-finite loss at batch item " + std::to_string(q));
		}
		total += loss.value;
		for (auto& g : loss.grad.data()) {
			g = static_cast<T>(static_cast<double>(g) * inv_n);
		}
		model.backward(trace, loss.grad);
	}
	return total * inv_n;
}

template <typename T>
TrainHistory fit(BinConvModel<T>& model, std::span<const TrainingPair> pairs, const TrainConfig& config,
                 std::optional<double> fixed_scale, const EpochCallback& on_epoch)
{
	config.validate();
	if (pairs.empty()) {
		throw std::invalid_argument("fit: no training pairs");
	}
	const auto start = std::chrono::steady_clock::now();
	const Binning binning = model.binning();
	std::vector<PreparedPair> prepared;
	prepared.reserve(pairs.size());
	for (const auto& p : pairs) {
		prepared.push_back(prepare_pair(p, binning, fixed_scale));
	}

	TrainHistory history;
	history.seed = config.seed;
	history.config = config;
	auto params = model.parameters();
	std::vector<std::size_t> order(prepared.size());
	std::vector<PreparedPair> batch;
	std::uint64_t step = 0;

	for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
		std::iota(order.begin(), order.end(), std::size_t{0});
		Rng shuffle_rng(derive_seed(config.seed, epoch, 0));
		shuffle_indices(order, shuffle_rng);

		double epoch_total = 0.0;
		std::size_t batch_index = 0;
		for (std::size_t start_idx = 0; start_idx < order.size(); start_idx += config.batch_size, ++batch_index) {
			const std::size_t end_idx = std::min(order.size(), start_idx + config.batch_size);
			batch.clear();
			for (std::size_t i = start_idx; i < end_idx; ++i) {
				batch.push_back(prepared[order[i]]);
			}
			model.zero_grad();
			const std::uint64_t dropout_seed = derive_seed(config.seed, epoch, batch_index + 1);
			double batch_loss = 0.0;
			try {
				batch_loss = accumulate_gradients(model, std::span<const PreparedPair>(batch), true, dropout_seed);
			} catch (const std::runtime_error& e) {
				std::ostringstream os;
				os << "training aborted at epoch " << epoch + 1 << ", batch " << batch_index << ": " << e.what();
				throw std::runtime_error(os.str());
			}
			epoch_total += batch_loss * static_cast<double>(batch.size());
			adam_step(std::span<Parameter<T>* const>(params), config.learning_rate, ++step, config.adam);
		}
		const double epoch_loss = epoch_total / static_cast<double>(order.size());
		if (!std::isfinite(epoch_loss)) {
			throw std::runtime_error("training aborted: non-finite epoch loss at epoch " + std::to_string(epoch + 1));
		}
		history.epoch_loss.push_back(epoch_loss);
		if (on_epoch) {
			on_epoch(epoch + 1, epoch_loss);
		}
	}
	history.optimizer_steps = step;
	history.wall_seconds =
		std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
	return history;
}

#define BINCONV_INSTANTIATE_TRAINING(T)                                                                           \
	template Tensor<T> encode_context<T>(std::span<const double>, const Binning&);                                  \
	template PreparedBatch<T> prepare_batch<T>(const TrainingPair&, const Binning&, std::optional<double>);         \
	template void adam_step<T>(std::span<Parameter<T>* const>, double, std::uint64_t, const AdamSettings&);         \
	template double accumulate_gradients<T>(BinConvModel<T>&, std::span<const PreparedPair>, bool, std::uint64_t); \
	template TrainHistory fit<T>(BinConvModel<T>&, std::span<const TrainingPair>, const TrainConfig&,              \
	                             std::optional<double>, const EpochCallback&);

BINCONV_INSTANTIATE_TRAINING(float)
BINCONV_INSTANTIATE_TRAINING(double)

#undef BINCONV_INSTANTIATE_TRAINING

} // namespace binconv
