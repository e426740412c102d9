#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "binconv/cbe.hpp"
#include "binconv/model.hpp"

namespace binconv {

// Anything that maps a scaled context window to a distribution over the
// next value's ones count.
class NextStepModel {
public:
	virtual ~NextStepModel() = default;
	virtual std::size_t context_length() const = 0;
	virtual Binning binning() const = 0;
	virtual BinDistribution next_distribution(std::span<const double> scaled_context) const = 0;
};

// Eval-mode adapter over a trained BinConv model.
template <typename T>
class ModelForecaster final : public NextStepModel {
public:
	explicit ModelForecaster(const BinConvModel<T>& model) : model_(model) {}

	std::size_t context_length() const override { return model_.config().context_length; }
	Binning binning() const override { return model_.binning(); }
	BinDistribution next_distribution(std::span<const double> scaled_context) const override;

private:
	const BinConvModel<T>& model_;
};

// How the mean scale evolves while forecasting autoregressively.
struct ScalePolicy {
	enum class Kind {
		sliding,  // recompute from the current window every step
		frozen,   // keep the scale of the initial context
		fixed,    // externally supplied (dataset-level) scale
	};
	Kind kind = Kind::sliding;
	double value = 1.0;

	static ScalePolicy sliding() { return {}; }
	static ScalePolicy frozen() { return {Kind::frozen, 1.0}; }
	static ScalePolicy fixed(double s) { return {Kind::fixed, s}; }
};

inline constexpr std::size_t kQuantileLevels = 19;

// 0.05, 0.10, ..., 0.95
std::array<double, kQuantileLevels> quantile_levels();

// Linear interpolation between order statistics (position (n - 1) * level).
double empirical_quantile(std::span<const double> sorted, double level);

struct ForecastResult {
	std::vector<double> point_path;                // argmax mode
	std::vector<std::vector<double>> sample_paths; // [n][H]
	std::vector<std::vector<double>> quantiles;    // [19][H]
};

std::vector<double> forecast_point(const NextStepModel& model, std::span<const double> context, std::size_t horizon,
                                   const ScalePolicy& policy = ScalePolicy::sliding());

// n trajectories; trajectory i draws from Rng(derive_seed(seed, i)).
ForecastResult forecast_samples(const NextStepModel& model, std::span<const double> context, std::size_t horizon,
                                std::size_t n_samples, std::uint64_t seed,
                                const ScalePolicy& policy = ScalePolicy::sliding());

// Per-step quantiles of the sample paths.
std::vector<std::vector<double>> sample_quantiles(const std::vector<std::vector<double>>& sample_paths);

extern template class ModelForecaster<float>;
extern template class ModelForecaster<double>;

} // namespace binconv
