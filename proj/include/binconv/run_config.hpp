#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>

#include <json.hpp>

#include "binconv/data.hpp"
#include "binconv/model.hpp"
#include "binconv/training.hpp"

namespace binconv {

enum class ScalingMode { per_sample, dataset };
enum class ForecastMode { argmax, sampling };
// How per-sample scaling evolves during autoregression.
enum class ScaleUpdate { sliding, frozen };

std::string_view scaling_name(ScalingMode mode);
ScalingMode parse_scaling(std::string_view name);
std::string_view forecast_mode_name(ForecastMode mode);
ForecastMode parse_forecast_mode(std::string_view name);
std::string_view scale_update_name(ScaleUpdate update);
ScaleUpdate parse_scale_update(std::string_view name);

// Everything a command needs; serialized verbatim into run artifacts.
struct RunConfig {
	std::filesystem::path data_path;
	std::optional<std::size_t> max_series;
	SplitSpec split;
	BinConvConfig model;
	TrainConfig train;
	VariantKind variant = VariantKind::standard;
	ScalingMode scaling = ScalingMode::per_sample;
	ForecastMode forecast_mode = ForecastMode::argmax;
	std::size_t n_samples = 100;
	ScaleUpdate scale_update = ScaleUpdate::sliding;
	std::uint64_t seed = 0;

	// Checks every module precondition; throws std::invalid_argument.
	void validate() const;
};

nlohmann::json to_json(const BinConvConfig& config);
BinConvConfig model_config_from_json(const nlohmann::json& j, std::size_t context_length);

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const RunConfig& config);
// Relative data paths resolve against `base_dir`. Unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

} // namespace binconv
