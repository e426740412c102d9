#include "binconv/run_config.hpp"

#include <set>
#include <stdexcept>
#include <string>

namespace binconv {

using nlohmann::json;

std::string_view scaling_name(ScalingMode mode)
{
	return mode == ScalingMode::dataset ? "dataset" : "per_sample";
}

ScalingMode parse_scaling(std::string_view name)
{
	if (name == "per_sample") {
		return ScalingMode::per_sample;
	}
	if (name == "dataset") {
		return ScalingMode::dataset;
	}
	throw std::invalid_argument("unknown scaling '" + std::string(name) + "' (expected per_sample or dataset)");
}

std::string_view forecast_mode_name(ForecastMode mode)
{
	return mode == ForecastMode::sampling ? "sampling" : "argmax";
}

ForecastMode parse_forecast_mode(std::string_view name)
{
	if (name == "argmax") {
		return ForecastMode::argmax;
	}
	if (name == "sampling") {
		return ForecastMode::sampling;
	}
	throw std::invalid_argument("unknown forecast mode '" + std::string(name) + "' (expected argmax or sampling)");
}

std::string_view scale_update_name(ScaleUpdate update)
{
	return update == ScaleUpdate::frozen ? "frozen" : "sliding";
}

ScaleUpdate parse_scale_update(std::string_view name)
{
	if (name == "sliding") {
		return ScaleUpdate::sliding;
	}
	if (name == "frozen") {
		return ScaleUpdate::frozen;
	}
	throw std::invalid_argument("unknown scale update '" + std::string(name) + "' (expected sliding or frozen)");
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where)
{
	if (!j.is_object()) {
		throw std::invalid_argument("config: '" + where + "' must be an object");
	}
	std::set<std::string> keys(allowed.begin(), allowed.end());
	for (const auto& [key, _] : j.items()) {
		if (!keys.contains(key)) {
			throw std::invalid_argument("config: unknown key '" + key + "' in '" + where + "'");
		}
	}
}

template <typename V>
void read_if(const json& j, const char* key, V& out)
{
	if (j.contains(key)) {
		try {
			out = j.at(key).get<V>();
		} catch (const json::exception& e) {
			throw std::invalid_argument(std::string("config: bad value for '") + key + "': " + e.what());
		}
	}
}

} // namespace

void RunConfig::validate() const
{
	split.validate();
	if (model.context_length != split.context_length) {
		throw std::invalid_argument("config: model context length must equal split.context_length");
	}
	model.validate(variant);
	train.validate();
	if (forecast_mode == ForecastMode::sampling && n_samples == 0) {
		throw std::invalid_argument("config: n_samples must be >= 1 for sampling");
	}
	if (max_series && *max_series == 0) {
		throw std::invalid_argument("config: max_series must be >= 1");
	}
}

json to_json(const BinConvConfig& c)
{
	return json{{"bins", c.bins},
	            {"lower", c.lower},
	            {"upper", c.upper},
	            {"context_length", c.context_length},
	            {"channels", c.channels},
	            {"conv2d_kernel", c.conv2d_kernel},
	            {"conv1d_kernel", c.conv1d_kernel},
	            {"head_kernel", c.head_kernel},
	            {"blocks", c.blocks},
	            {"dropout", c.dropout},
	            {"dytanh_alpha", c.dytanh_alpha}};
}

BinConvConfig model_config_from_json(const json& j, std::size_t context_length)
{
	reject_unknown(j,
	               {"bins", "lower", "upper", "context_length", "channels", "conv2d_kernel", "conv1d_kernel",
	                "head_kernel", "blocks", "dropout", "dytanh_alpha"},
	               "model");
	BinConvConfig c = BinConvConfig::univariate(context_length);
	read_if(j, "context_length", c.context_length);
	if (c.context_length != context_length) {
		throw std::invalid_argument("config: model.context_length disagrees with split.context_length");
	}
	c.channels = context_length;
	read_if(j, "bins", c.bins);
	read_if(j, "lower", c.lower);
	read_if(j, "upper", c.upper);
	read_if(j, "channels", c.channels);
	read_if(j, "conv2d_kernel", c.conv2d_kernel);
	read_if(j, "conv1d_kernel", c.conv1d_kernel);
	read_if(j, "head_kernel", c.head_kernel);
	read_if(j, "blocks", c.blocks);
	read_if(j, "dropout", c.dropout);
	read_if(j, "dytanh_alpha", c.dytanh_alpha);
	return c;
}

json to_json(const TrainConfig& c)
{
	return json{{"epochs", c.epochs},
	            {"learning_rate", c.learning_rate},
	            {"batch_size", c.batch_size},
	            {"seed", c.seed},
	            {"adam", json{{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"epsilon", c.adam.epsilon}}}};
}

TrainConfig train_config_from_json(const json& j)
{
	reject_unknown(j, {"epochs", "learning_rate", "batch_size", "seed", "adam"}, "train");
	TrainConfig c;
	read_if(j, "epochs", c.epochs);
	read_if(j, "learning_rate", c.learning_rate);
	read_if(j, "batch_size", c.batch_size);
	read_if(j, "seed", c.seed);
	if (j.contains("adam")) {
		const json& a = j.at("adam");
		reject_unknown(a, {"beta1", "beta2", "epsilon"}, "train.adam");
		read_if(a, "beta1", c.adam.beta1);
		read_if(a, "beta2", c.adam.beta2);
		read_if(a, "epsilon", c.adam.epsilon);
	}
	return c;
}

json to_json(const RunConfig& c)
{
	json data{{"path", c.data_path.string()}};
	if (c.max_series) {
		data["max_series"] = *c.max_series;
	}
	return json{{"data", data},
	            {"split", json{{"context_length", c.split.context_length}, {"horizon", c.split.horizon}}},
	            {"model", to_json(c.model)},
	            {"train", to_json(c.train)},
	            {"variant", variant_name(c.variant)},
	            {"scaling", scaling_name(c.scaling)},
	            {"forecast",
		             json{{"mode", forecast_mode_name(c.forecast_mode)},
		                  {"n_samples", c.n_samples},
		                  {"scale", scale_update_name(c.scale_update)}}},
	            {"seed", c.seed}};
}

RunConfig run_config_from_json(const json& j, const std::filesystem::path& base_dir)
{
	reject_unknown(j, {"data", "split", "model", "train", "variant", "scaling", "forecast", "seed"}, "<root>");
	RunConfig c;
	if (!j.contains("data") || !j.at("data").contains("path")) {
		throw std::invalid_argument("config: data.path is required");
	}
	const json& data = j.at("data");
	reject_unknown(data, {"path", "max_series"}, "data");
	std::filesystem::path p = data.at("path").get<std::string>();
	c.data_path = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
	if (data.contains("max_series")) {
		c.max_series = data.at("max_series").get<std::size_t>();
	}

	if (!j.contains("split")) {
		throw std::invalid_argument("config: split is required");
	}
	const json& split = j.at("split");
	reject_unknown(split, {"context_length", "horizon"}, "split");
	if (!split.contains("horizon")) {
		throw std::invalid_argument("config: split.horizon is required");
	}
	c.split.horizon = split.at("horizon").get<std::size_t>();
	c.split.context_length = 3 * c.split.horizon;
	read_if(split, "context_length", c.split.context_length);

	c.model = model_config_from_json(j.value("model", json::object()), c.split.context_length);
	c.train = train_config_from_json(j.value("train", json::object()));
	if (j.contains("variant")) {
		c.variant = parse_variant(j.at("variant").get<std::string>());
	}
	if (j.contains("scaling")) {
		c.scaling = parse_scaling(j.at("scaling").get<std::string>());
	}
	if (j.contains("forecast")) {
		const json& f = j.at("forecast");
		reject_unknown(f, {"mode", "n_samples", "scale"}, "forecast");
		if (f.contains("mode")) {
			c.forecast_mode = parse_forecast_mode(f.at("mode").get<std::string>());
		}
		read_if(f, "n_samples", c.n_samples);
		if (f.contains("scale")) {
			c.scale_update = parse_scale_update(f.at("scale").get<std::string>());
		}
	}
	read_if(j, "seed", c.seed);
	c.validate();
	return c;
}

RunConfig load_run_config(const std::filesystem::path& path)
{
	json j;
	try {
		j = json::parse(read_file(path));
	} catch (const json::parse_error& e) {
		throw std::invalid_argument("config '" + path.string() + "': " + e.what());
	}
	return run_config_from_json(j, path.parent_path());
}

} // namespace binconv
