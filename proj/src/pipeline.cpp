#include "binconv/pipeline.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "binconv/rng.hpp"

namespace binconv {

PreparedDataset prepare_dataset(const std::vector<SeriesRecord>& records, const RunConfig& config)
{
	const std::size_t c = config.split.context_length;
	const std::size_t h = config.split.horizon;
	PreparedDataset out;
	for (const auto& r : records) {
		if (config.max_series && out.size() >= *config.max_series) {
			break;
		}
		if (r.values.size() < c + 1 + h) {
			++out.skipped;
			continue;
		}
		auto [train, test] = train_test_split(r, r.values.size() - h);
		out.series_ids.push_back(r.series_id);
		out.train.push_back(std::move(train));
		out.test.push_back(std::move(test));
	}
	if (out.size() == 0) {
		throw std::invalid_argument("dataset: no series has at least C + 1 + H = " + std::to_string(c + 1 + h) +
		                            " values");
	}
	if (config.scaling == ScalingMode::dataset) {
		out.fixed_scale = dataset_scale(out.train);
	}
	return out;
}

std::vector<TrainingPair> training_pairs(const PreparedDataset& dataset, std::size_t context_length)
{
	std::vector<TrainingPair> pairs;
	for (const auto& series : dataset.train) {
		auto p = make_pairs(series, context_length);
		pairs.insert(pairs.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
	}
	return pairs;
}

ScalePolicy scale_policy(const PreparedDataset& dataset, ScaleUpdate update)
{
	if (dataset.fixed_scale) {
		return ScalePolicy::fixed(*dataset.fixed_scale);
	}
	return update == ScaleUpdate::frozen ? ScalePolicy::frozen() : ScalePolicy::sliding();
}

namespace {

std::span<const double> last_context(const std::vector<double>& train, std::size_t c)
{
	return std::span<const double>(train).last(c);
}

} // namespace

PanelForecast forecast_panel(const NextStepModel& model, const PreparedDataset& dataset, std::size_t horizon,
                             ForecastMode mode, std::size_t n_samples, std::uint64_t seed,
                             ScaleUpdate update)
{
	const std::size_t c = model.context_length();
	const ScalePolicy policy = scale_policy(dataset, update);
	PanelForecast out;
	for (std::size_t k = 0; k < dataset.size(); ++k) {
		const auto context = last_context(dataset.train[k], c);
		if (mode == ForecastMode::argmax) {
			out.point.push_back(forecast_point(model, context, horizon, policy));
			continue;
		}
		ForecastResult r = forecast_samples(model, context, horizon, n_samples, derive_seed(seed, k), policy);
		out.point.push_back(r.quantiles[kQuantileLevels / 2]);
		out.samples.push_back(std::move(r.sample_paths));
		out.quantiles.push_back(std::move(r.quantiles));
	}
	return out;
}

EvalPanel make_eval_panel(const PreparedDataset& dataset, const PanelForecast& forecast, ForecastMode mode)
{
	EvalPanel panel;
	panel.actuals = dataset.test;
	panel.point_forecasts = forecast.point;
	if (mode == ForecastMode::sampling) {
		panel.quantile_forecasts = forecast.quantiles;
	}
	return panel;
}

std::vector<std::vector<double>> naive_last_value(const PreparedDataset& dataset, std::size_t horizon)
{
	std::vector<std::vector<double>> out;
	for (const auto& train : dataset.train) {
		out.emplace_back(horizon, train.back());
	}
	return out;
}

BinConvModel<float> train_model(const RunConfig& config, const PreparedDataset& dataset, TrainHistory* history,
                                const EpochCallback& on_epoch)
{
	BinConvModel<float> model(config.model, config.variant, config.seed);
	TrainConfig train = config.train;
	train.seed = config.seed;
	const auto pairs = training_pairs(dataset, config.model.context_length);
	TrainHistory h = fit(model, std::span<const TrainingPair>(pairs), train, dataset.fixed_scale, on_epoch);
	if (history) {
		*history = std::move(h);
	}
	return model;
}

VariantRun run_variant(const RunConfig& config, const PreparedDataset& dataset, VariantKind variant,
                       const EpochCallback& on_epoch)
{
	RunConfig cfg = config;
	cfg.variant = variant;
	cfg.validate();
	VariantRun run;
	run.variant = variant;
	BinConvModel<float> model = train_model(cfg, dataset, &run.history, on_epoch);
	run.parameters = model.parameter_count();
	const ModelForecaster<float> forecaster(model);
	run.forecast =
		forecast_panel(forecaster, dataset, cfg.split.horizon, ForecastMode::argmax, 1, cfg.seed, cfg.scale_update);
	run.nmae = nmae(make_eval_panel(dataset, run.forecast, ForecastMode::argmax));
	const std::size_t c = cfg.model.context_length;
	const std::size_t h = cfg.split.horizon;
	const ScalePolicy policy = scale_policy(dataset, cfg.scale_update);
	for (const auto& train : dataset.train) {
		if (train.size() < c + h) {
			run.backcast.clear();
			break;
		}
		const auto window = std::span<const double>(train).subspan(train.size() - h - c, c);
		run.backcast.push_back(forecast_point(forecaster, window, h, policy));
	}

	run.max_forecast = -std::numeric_limits<double>::infinity();
	run.max_train = -std::numeric_limits<double>::infinity();
	double unit = 0.0;
	for (std::size_t k = 0; k < dataset.size(); ++k) {
		for (double y : run.forecast.point[k]) {
			run.max_forecast = std::max(run.max_forecast, y);
		}
		for (double x : dataset.train[k]) {
			run.max_train = std::max(run.max_train, x);
		}
		const double s = dataset.fixed_scale ? *dataset.fixed_scale
		                                     : mean_scale(last_context(dataset.train[k], cfg.model.context_length)).value;
		unit = std::max(unit, s);
	}
	run.cap_limit = run.max_train + unit * cfg.model.binning().width();
	run.capped = run.max_forecast <= run.cap_limit;
	return run;
}

} // namespace binconv
