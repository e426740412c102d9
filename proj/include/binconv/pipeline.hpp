#pragma once

// End-to-end glue shared by the command-line tool and the acceptance suite:
// dataset preparation, training a variant, and panel forecasts.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "binconv/data.hpp"
#include "binconv/forecasting.hpp"
#include "binconv/metrics.hpp"
#include "binconv/model.hpp"
#include "binconv/run_config.hpp"
#include "binconv/training.hpp"

namespace binconv {

// Each kept series is split into a training prefix and the final H values.
struct PreparedDataset {
	std::vector<std::string> series_ids;
	std::vector<std::vector<double>> train;
	std::vector<std::vector<double>> test;
	std::optional<double> fixed_scale; // set under dataset-level scaling
	std::size_t skipped = 0;           // series too short for one training pair

	std::size_t size() const { return train.size(); }
};

// Honors max_series; series shorter than C + 1 + H values are skipped.
// The dataset scale is computed from training prefixes only.
PreparedDataset prepare_dataset(const std::vector<SeriesRecord>& records, const RunConfig& config);

std::vector<TrainingPair> training_pairs(const PreparedDataset& dataset, std::size_t context_length);

// Dataset scaling forces a fixed scale; otherwise `update` picks sliding or frozen.
ScalePolicy scale_policy(const PreparedDataset& dataset, ScaleUpdate update = ScaleUpdate::sliding);

struct PanelForecast {
	std::vector<std::vector<double>> point;                    // [series][H]
	std::vector<std::vector<std::vector<double>>> samples;     // [series][n][H], sampling only
	std::vector<std::vector<std::vector<double>>> quantiles;   // [series][19][H], sampling only
};

// Forecasts H steps past the training prefix of every series. In sampling
// mode series k uses seed derive_seed(seed, k) and the point path is the
// per-step median.
PanelForecast forecast_panel(const NextStepModel& model, const PreparedDataset& dataset, std::size_t horizon,
                             ForecastMode mode, std::size_t n_samples, std::uint64_t seed,
                             ScaleUpdate update = ScaleUpdate::sliding);

EvalPanel make_eval_panel(const PreparedDataset& dataset, const PanelForecast& forecast, ForecastMode mode);

// Repeats the last training value over the horizon.
std::vector<std::vector<double>> naive_last_value(const PreparedDataset& dataset, std::size_t horizon);

// Builds and trains the configured variant with the run seed.
BinConvModel<float> train_model(const RunConfig& config, const PreparedDataset& dataset, TrainHistory* history,
                                const EpochCallback& on_epoch = {});

struct VariantRun {
	VariantKind variant = VariantKind::standard;
	std::size_t parameters = 0;
	TrainHistory history;
	PanelForecast forecast;
	// Argmax forecast of the last H training values from the window ending
	// H steps before the split; empty when that window does not fit.
	std::vector<std::vector<double>> backcast;
	double nmae = 0.0;
	double max_forecast = 0.0;
	double max_train = 0.0;
	// Largest training value plus one decoded bin width in original units.
	double cap_limit = 0.0;
	bool capped = false;
};

// Trains `variant` on the dataset, forecasts the test window by argmax and
// records whether the forecast stays within the training range.
VariantRun run_variant(const RunConfig& config, const PreparedDataset& dataset, VariantKind variant,
                       const EpochCallback& on_epoch = {});

} // namespace binconv
