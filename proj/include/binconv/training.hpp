#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "binconv/cbe.hpp"
#include "binconv/model.hpp"
#include "binconv/tensor.hpp"

namespace binconv {

struct AdamSettings {
	double beta1 = 0.9;
	double beta2 = 0.999;
	double epsilon = 1e-8;
};

struct TrainConfig {
	std::size_t epochs = 50;
	double learning_rate = 1e-3;
	std::size_t batch_size = 32;
	std::uint64_t seed = 0;
	AdamSettings adam;

	void validate() const;
};

// One-step-ahead supervision: context window in original units and the value
// that follows it.
struct TrainingPair {
	std::vector<double> context;
	double target = 0.0;
};

struct TrainHistory {
	std::vector<double> epoch_loss;
	double wall_seconds = 0.0;
	std::uint64_t seed = 0;
	std::size_t optimizer_steps = 0;
	TrainConfig config;
};

// Stride-1 windows: pair i is series[i, i + C) -> series[i + C].
std::vector<TrainingPair> make_pairs(std::span<const double> series, std::size_t context_length);

struct PreparedPair {
	Scale scale;
	std::vector<double> scaled_context;
	CbeVector target;
};

// Divides context and target by one scale and encodes the target. The scale is
// the context mean unless `fixed_scale` (dataset-level scaling) is given.
PreparedPair prepare_pair(const TrainingPair& pair, const Binning& binning,
                          std::optional<double> fixed_scale = std::nullopt);

// CBE matrix [C, D] of already-scaled values.
template <typename T>
Tensor<T> encode_context(std::span<const double> scaled_context, const Binning& binning);

template <typename T>
struct PreparedBatch {
	Scale scale;
	Tensor<T> context_cbe;
	CbeVector target;
};

template <typename T>
PreparedBatch<T> prepare_batch(const TrainingPair& pair, const Binning& binning,
                               std::optional<double> fixed_scale = std::nullopt);

// Adam with bias correction; `step` is the 1-based update index.
template <typename T>
void adam_step(std::span<Parameter<T>* const> params, double learning_rate, std::uint64_t step,
               const AdamSettings& settings = {});

// Adds the gradient of the batch-mean loss to the model's parameter gradients
// and returns the batch-mean loss. Item q of the batch draws its dropout mask
// from derive_seed(dropout_seed, q).
template <typename T>
double accumulate_gradients(BinConvModel<T>& model, std::span<const PreparedPair> batch, bool training,
                            std::uint64_t dropout_seed);

using EpochCallback = std::function<void(std::size_t epoch, double loss)>;

// Shuffled mini-batch training. Throws std::runtime_error on a non-finite loss.
template <typename T>
TrainHistory fit(BinConvModel<T>& model, std::span<const TrainingPair> pairs, const TrainConfig& config,
                 std::optional<double> fixed_scale = std::nullopt, const EpochCallback& on_epoch = {});

} // namespace binconv
