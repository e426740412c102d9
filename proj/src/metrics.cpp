#include "binconv/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "binconv/forecasting.hpp"

namespace binconv {

void EvalPanel::validate() const
{
	if (actuals.empty()) {
		throw std::invalid_argument("eval panel: no series");
	}
	if (point_forecasts.size() != actuals.size()) {
		throw std::invalid_argument("eval panel: point forecasts cover " + std::to_string(point_forecasts.size()) +
		                            " series, actuals " + std::to_string(actuals.size()));
	}
	for (std::size_t k = 0; k < actuals.size(); ++k) {
		if (point_forecasts[k].size() != actuals[k].size()) {
			throw std::invalid_argument("eval panel: horizon mismatch in series " + std::to_string(k));
		}
	}
	if (quantile_forecasts) {
		if (quantile_forecasts->size() != actuals.size()) {
			throw std::invalid_argument("eval panel: quantile forecasts do not cover every series");
		}
		for (std::size_t k = 0; k < actuals.size(); ++k) {
			const auto& q = (*quantile_forecasts)[k];
			if (q.size() != kQuantileLevels) {
				throw std::invalid_argument("eval panel: expected 19 quantile levels");
			}
			for (const auto& row : q) {
				if (row.size() != actuals[k].size()) {
					throw std::invalid_argument("eval panel: quantile horizon mismatch in series " +
					                            std::to_string(k));
				}
			}
			for (std::size_t l = 1; l < q.size(); ++l) {
				for (std::size_t t = 0; t < q[l].size(); ++t) {
					if (q[l][t] < q[l - 1][t]) {
						throw std::invalid_argument("eval panel: quantiles decrease across levels in series " +
						                            std::to_string(k) + ", step " + std::to_string(t));
					}
				}
			}
		}
	}
}

double quantile_loss(double level, double q, double z)
{
	if (!(level > 0.0 && level < 1.0)) {
		throw std::invalid_argument("quantile_loss: level must be in (0, 1)");
	}
	const double indicator = z < q ? 1.0 : 0.0;
	return (level - indicator) * (z - q);
}

std::vector<SeriesMetrics> per_series_metrics(const EvalPanel& panel)
{
	panel.validate();
	const auto levels = quantile_levels();
	std::vector<SeriesMetrics> out(panel.num_series());
	for (std::size_t k = 0; k < panel.num_series(); ++k) {
		SeriesMetrics& m = out[k];
		const auto& x = panel.actuals[k];
		const auto& xhat = panel.point_forecasts[k];
		for (std::size_t t = 0; t < x.size(); ++t) {
			m.abs_error += std::abs(x[t] - xhat[t]);
			m.abs_actual += std::abs(x[t]);
		}
		if (panel.quantile_forecasts) {
			const auto& q = (*panel.quantile_forecasts)[k];
			for (std::size_t t = 0; t < x.size(); ++t) {
				double sum = 0.0;
				for (std::size_t l = 0; l < kQuantileLevels; ++l) {
					sum += 2.0 * quantile_loss(levels[l], q[l][t], x[t]);
				}
				m.weighted_quantile_loss += sum / static_cast<double>(kQuantileLevels);
			}
		}
		if (m.abs_actual > 0.0) {
			m.nmae = m.abs_error / m.abs_actual;
			if (panel.quantile_forecasts) {
				m.crps = m.weighted_quantile_loss / m.abs_actual;
			}
		}
	}
	return out;
}

namespace {

double denominator(const std::vector<SeriesMetrics>& rows)
{
	double d = 0.0;
	for (const auto& r : rows) {
		d += r.abs_actual;
	}
	if (!(d > 0.0)) {
		throw std::invalid_argument("metric denominator sum |x| is zero");
	}
	return d;
}

} // namespace

double nmae(const EvalPanel& panel)
{
	const auto rows = per_series_metrics(panel);
	const double d = denominator(rows);
	double num = 0.0;
	for (const auto& r : rows) {
		num += r.abs_error;
	}
	return num / d;
}

double crps(const EvalPanel& panel)
{
	if (!panel.quantile_forecasts) {
		throw std::invalid_argument("crps: panel has no quantile forecasts");
	}
	const auto rows = per_series_metrics(panel);
	const double d = denominator(rows);
	double num = 0.0;
	for (const auto& r : rows) {
		num += r.weighted_quantile_loss;
	}
	return num / d;
}

} // namespace binconv
