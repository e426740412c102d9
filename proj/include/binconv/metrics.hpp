#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace binconv {

// Actuals and forecasts for num_series series over a T-step horizon.
struct EvalPanel {
	std::vector<std::vector<double>> actuals;         // [num_series][T]
	std::vector<std::vector<double>> point_forecasts; // [num_series][T]
	// [num_series][19][T], levels 0.05..0.95
	std::optional<std::vector<std::vector<std::vector<double>>>> quantile_forecasts;

	std::size_t num_series() const { return actuals.size(); }
	void validate() const;
};

// sum |x - x_hat| / sum |x| over all series and steps.
double nmae(const EvalPanel& panel);

// Pinball loss (level - 1{z < q}) * (z - q).
double quantile_loss(double level, double q, double z);

// Mean over the 19 levels of 2 * quantile_loss, summed over series and steps
// and normalized by sum |x| like NMAE.
double crps(const EvalPanel& panel);

struct SeriesMetrics {
	double abs_error = 0.0;
	double abs_actual = 0.0;
	double weighted_quantile_loss = 0.0;
	double nmae = 0.0;
	std::optional<double> crps;
};

// Per-series terms; the panel metrics are ratios of their sums.
std::vector<SeriesMetrics> per_series_metrics(const EvalPanel& panel);

} // namespace binconv
