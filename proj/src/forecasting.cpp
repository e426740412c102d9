#include "binconv/forecasting.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "binconv/rng.hpp"

namespace binconv {

template <typename T>
BinDistribution ModelForecaster<T>::next_distribution(std::span<const double> scaled_context) const
{
	return model_.distribution(model_.predict(model_.encode_input(scaled_context)));
}

template class ModelForecaster<float>;
template class ModelForecaster<double>;

std::array<double, kQuantileLevels> quantile_levels()
{
	std::array<double, kQuantileLevels> levels{};
	for (std::size_t i = 0; i < kQuantileLevels; ++i) {
		levels[i] = static_cast<double>(i + 1) / 20.0;
	}
	return levels;
}

double empirical_quantile(std::span<const double> sorted, double level)
{
	if (sorted.empty()) {
		throw std::invalid_argument("empirical_quantile: no samples");
	}
	const double pos = level * static_cast<double>(sorted.size() - 1);
	const auto lo = static_cast<std::size_t>(std::floor(pos));
	const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
	const double frac = pos - static_cast<double>(lo);
	return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

namespace {

class Window {
public:
	Window(std::span<const double> context, const ScalePolicy& policy)
		: values_(context.begin(), context.end()), policy_(policy)
	{
		if (policy.kind == ScalePolicy::Kind::frozen) {
			policy_.value = mean_scale(context).value;
		}
		if (policy_.kind != ScalePolicy::Kind::sliding && !(policy_.value > 0.0)) {
			throw std::invalid_argument("forecast: scale must be positive");
		}
	}

	double scale() const
	{
		return policy_.kind == ScalePolicy::Kind::sliding ? mean_scale(values_).value : policy_.value;
	}

	std::vector<double> scaled(double s) const
	{
		std::vector<double> out(values_.size());
		std::transform(values_.begin(), values_.end(), out.begin(), [s](double x) { return x / s; });
		return out;
	}

	void push(double y)
	{
		values_.erase(values_.begin());
		values_.push_back(y);
	}

private:
	std::vector<double> values_;
	ScalePolicy policy_;
};

void check_request(const NextStepModel& model, std::span<const double> context, std::size_t horizon)
{
	if (context.size() != model.context_length()) {
		throw std::invalid_argument("forecast: context length " + std::to_string(context.size()) +
		                            " != model context length " + std::to_string(model.context_length()));
	}
	if (horizon == 0) {
		throw std::invalid_argument("forecast: horizon must be >= 1");
	}
	for (double x : context) {
		if (!std::isfinite(x)) {
			throw std::invalid_argument("forecast: non-finite context value");
		}
	}
}

} // namespace

std::vector<double> forecast_point(const NextStepModel& model, std::span<const double> context, std::size_t horizon,
                                   const ScalePolicy& policy)
{
	check_request(model, context, horizon);
	const Binning binning = model.binning();
	Window window(context, policy);
	std::vector<double> path;
	path.reserve(horizon);
	for (std::size_t h = 0; h < horizon; ++h) {
		const double s = window.scale();
		const BinDistribution dist = model.next_distribution(window.scaled(s));
		const double y = s * decode(argmax_bin(dist), binning);
		path.push_back(y);
		window.push(y);
	}
	return path;
}

std::vector<std::vector<double>> sample_quantiles(const std::vector<std::vector<double>>& sample_paths)
{
	if (sample_paths.empty()) {
		throw std::invalid_argument("sample_quantiles: no sample paths");
	}
	const std::size_t horizon = sample_paths.front().size();
	const auto levels = quantile_levels();
	std::vector<std::vector<double>> q(kQuantileLevels, std::vector<double>(horizon));
	std::vector<double> column(sample_paths.size());
	for (std::size_t h = 0; h < horizon; ++h) {
		for (std::size_t i = 0; i < sample_paths.size(); ++i) {
			column[i] = sample_paths[i].at(h);
		}
		std::sort(column.begin(), column.end());
		for (std::size_t l = 0; l < kQuantileLevels; ++l) {
			q[l][h] = empirical_quantile(column, levels[l]);
		}
	}
	return q;
}

ForecastResult forecast_samples(const NextStepModel& model, std::span<const double> context, std::size_t horizon,
                                std::size_t n_samples, std::uint64_t seed, const ScalePolicy& policy)
{
	check_request(model, context, horizon);
	if (n_samples == 0) {
		throw std::invalid_argument("forecast: n_samples must be >= 1");
	}
	const Binning binning = model.binning();
	std::vector<Window> windows(n_samples, Window(context, policy));
	std::vector<Rng> rngs;
	rngs.reserve(n_samples);
	for (std::size_t i = 0; i < n_samples; ++i) {
		rngs.emplace_back(derive_seed(seed, i));
	}

	ForecastResult result;
	result.sample_paths.assign(n_samples, std::vector<double>(horizon));
	for (std::size_t h = 0; h < horizon; ++h) {
		for (std::size_t i = 0; i < n_samples; ++i) {
			const double s = windows[i].scale();
			const BinDistribution dist = model.next_distribution(windows[i].scaled(s));
			const double y = s * decode(sample_bin(dist, rngs[i]), binning);
			result.sample_paths[i][h] = y;
			windows[i].push(y);
		}
	}
	result.quantiles = sample_quantiles(result.sample_paths);
	return result;
}

} // namespace binconv
