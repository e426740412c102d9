#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <vector>

#include "binconv/forecasting.hpp"
#include "binconv/metrics.hpp"

using namespace binconv;

namespace {

using Quantiles = std::vector<std::vector<std::vector<double>>>;

std::vector<std::vector<double>> repeat_levels(const std::vector<double>& row)
{
	return std::vector<std::vector<double>>(kQuantileLevels, row);
}

} // namespace

TEST_CASE("nmae")
{
	EvalPanel p{{{2, 2}}, {{1, 3}}, std::nullopt};
	CHECK(nmae(p) == 0.5);
	p.point_forecasts = {{2, 2}};
	CHECK(nmae(p) == 0.0);
	p.point_forecasts = {{0, 0}};
	CHECK(nmae(p) == 1.0);
	EvalPanel zero{{{0, 0}}, {{1, 1}}, std::nullopt};
	CHECK_THROWS_AS(nmae(zero), std::invalid_argument);
	EvalPanel ragged{{{1, 2}}, {{1}}, std::nullopt};
	CHECK_THROWS_AS(nmae(ragged), std::invalid_argument);
}

TEST_CASE("quantile loss")
{
	CHECK(quantile_loss(0.5, 1.0, 3.0) == 1.0);
	CHECK(quantile_loss(0.3, 2.0, 2.0) == 0.0);
	CHECK(quantile_loss(0.9, 3.0, 1.0) == doctest::Approx(0.2));
	CHECK_THROWS_AS(quantile_loss(1.0, 0.0, 0.0), std::invalid_argument);
	CHECK_THROWS_AS(quantile_loss(0.0, 0.0, 0.0), std::invalid_argument);
}

TEST_CASE("crps of a degenerate forecast equals nmae")
{
	const std::vector<std::vector<double>> actuals{{3.0, -1.0, 4.5, 10.0}, {0.2, 0.4, 0.1, 7.0}};
	const std::vector<std::vector<double>> point{{2.0, 0.5, 4.0, 12.0}, {0.0, 1.0, 0.3, 6.0}};
	EvalPanel p{actuals, point, std::vector{repeat_levels(point[0]), repeat_levels(point[1])}};
	CHECK(std::abs(crps(p) - nmae(p)) < 1e-12);

	EvalPanel perfect{actuals, actuals, std::vector{repeat_levels(actuals[0]), repeat_levels(actuals[1])}};
	CHECK(crps(perfect) == 0.0);

	EvalPanel zero{{{0.0}}, {{0.0}}, Quantiles{repeat_levels({0.0})}};
	CHECK_THROWS_AS(crps(zero), std::invalid_argument);
	CHECK_THROWS_AS(crps(EvalPanel{actuals, point, std::nullopt}), std::invalid_argument);
}

TEST_CASE("crps by hand for a two-point panel")
{
	// One step, actual 1, every quantile at 3: each level contributes 2 * (1 - a) * 2.
	EvalPanel p{{{1.0}}, {{3.0}}, Quantiles{repeat_levels({3.0})}};
	double expected = 0.0;
	for (double a : quantile_levels()) {
		expected += 2.0 * (1.0 - a) * 2.0;
	}
	expected /= 19.0;
	CHECK(crps(p) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("metric invariances")
{
	const std::vector<std::vector<double>> actuals{{5, 6}, {1, 2}, {9, 9}};
	std::vector<std::vector<double>> point{{4, 7}, {1.5, 2}, {8, 10}};
	std::vector<std::vector<std::vector<double>>> quantiles;
	for (const auto& row : point) {
		std::vector<std::vector<double>> q;
		for (double a : quantile_levels()) {
			q.push_back({row[0] + (a - 0.5), row[1] + 2.0 * (a - 0.5)});
		}
		quantiles.push_back(q);
	}
	const EvalPanel base{actuals, point, quantiles};

	EvalPanel relabeled{{actuals[2], actuals[0], actuals[1]},
	                    {point[2], point[0], point[1]},
	                    std::vector{quantiles[2], quantiles[0], quantiles[1]}};
	CHECK(nmae(relabeled) == doctest::Approx(nmae(base)).epsilon(1e-14));
	CHECK(crps(relabeled) == doctest::Approx(crps(base)).epsilon(1e-14));

	EvalPanel scaled = base;
	for (auto& r : scaled.actuals) {
		for (auto& v : r) v *= 3.0;
	}
	for (auto& r : scaled.point_forecasts) {
		for (auto& v : r) v *= 3.0;
	}
	for (auto& q : *scaled.quantile_forecasts) {
		for (auto& r : q) {
			for (auto& v : r) v *= 3.0;
		}
	}
	CHECK(nmae(scaled) == doctest::Approx(nmae(base)).epsilon(1e-13));
	CHECK(crps(scaled) == doctest::Approx(crps(base)).epsilon(1e-13));
	CHECK(crps(base) >= 0.0);
}

TEST_CASE("widening a centred band away from the truth does not lower crps")
{
	const std::vector<std::vector<double>> actuals{{10.0}};
	double previous = -1.0;
	for (double width : {0.0, 1.0, 2.0, 4.0, 8.0}) {
		std::vector<std::vector<double>> q;
		for (double a : quantile_levels()) {
			q.push_back({10.0 + width * (a - 0.5)});
		}
		const double value = crps(EvalPanel{actuals, {{10.0}}, Quantiles{q}});
		CHECK(value >= previous);
		previous = value;
	}
}

TEST_CASE("quantiles must be monotone")
{
	auto q = repeat_levels({1.0});
	q[4][0] = 0.5;
	EvalPanel p{{{1.0}}, {{1.0}}, Quantiles{q}};
	CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("per-series terms add up to the panel metrics")
{
	EvalPanel p{{{2, 2}, {4, 0}}, {{1, 3}, {4, 1}}, std::nullopt};
	const auto rows = per_series_metrics(p);
	CHECK(rows[0].nmae == 0.5);
	CHECK(rows[1].nmae == 0.25);
	CHECK(nmae(p) == doctest::Approx(3.0 / 8.0));
	CHECK_FALSE(rows[0].crps.has_value());
}
