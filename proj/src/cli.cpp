#include "binconv/cli.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "binconv/checkpoint.hpp"
#include "binconv/data.hpp"
#include "binconv/gradient_suite.hpp"
#include "binconv/pipeline.hpp"
#include "binconv/run_config.hpp"

#ifndef BINCONV_VERSION
#define BINCONV_VERSION "unknown"
#endif

namespace binconv {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Raised for bad flags or configuration; maps to exit status 2.
struct UsageError : std::runtime_error {
	using std::runtime_error::runtime_error;
};

std::string num(double v)
{
	char buf[64];
	const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
	return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

double parse_num(std::string_view text, std::size_t line)
{
	double v = 0.0;
	const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
	if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
		throw std::runtime_error("forecast csv line " + std::to_string(line) + ": bad number '" +
		                         std::string(text) + "'");
	}
	return v;
}

std::vector<std::string> split_fields(const std::string& line)
{
	std::vector<std::string> out;
	std::string field;
	std::istringstream in(line);
	while (std::getline(in, field, ',')) {
		if (!field.empty() && field.back() == '\r') {
			field.pop_back();
		}
		out.push_back(field);
	}
	return out;
}

std::string level_name(double level)
{
	const int pct = static_cast<int>(std::lround(level * 100.0));
	return (pct < 10 ? "q0" : "q") + std::to_string(pct);
}

// Flags shared by the commands that read a run configuration.
struct RunOptions {
	std::string config;
	std::string out_dir;
	std::optional<std::uint64_t> seed;
	std::optional<std::string> variant;
	std::optional<std::string> scaling;
	std::optional<std::string> mode;
	std::optional<std::size_t> n_samples;
	std::optional<std::string> scale;
};

RunConfig resolve_config(const RunOptions& o)
{
	RunConfig cfg;
	try {
		cfg = load_run_config(o.config);
		if (o.seed) {
			cfg.seed = *o.seed;
		}
		if (o.variant) {
			cfg.variant = parse_variant(*o.variant);
		}
		if (o.scaling) {
			cfg.scaling = parse_scaling(*o.scaling);
		}
		if (o.mode) {
			cfg.forecast_mode = parse_forecast_mode(*o.mode);
		}
		if (o.scale) {
			cfg.scale_update = parse_scale_update(*o.scale);
		}
		if (o.n_samples) {
			cfg.n_samples = *o.n_samples;
		}
		cfg.validate();
	} catch (const std::invalid_argument& e) {
		throw UsageError(e.what());
	}
	return cfg;
}

json run_record(const std::string& command, const RunConfig& cfg, const PreparedDataset& ds)
{
	json dataset{{"series", ds.size()}, {"skipped", ds.skipped}};
	if (ds.fixed_scale) {
		dataset["fixed_scale"] = *ds.fixed_scale;
	}
	return json{{"command", command}, {"version", BINCONV_VERSION}, {"config", to_json(cfg)}, {"dataset", dataset}};
}

void write_json(const fs::path& path, const json& j)
{
	write_file_atomic(path, j.dump(2) + "\n");
}

PreparedDataset load_dataset(const RunConfig& cfg)
{
	return prepare_dataset(load_csv(cfg.data_path), cfg);
}

int cmd_synth(const std::string& out_dir, const std::string& kind, std::uint64_t seed, std::size_t series,
              std::size_t length, std::optional<double> noise, std::ostream& out)
{
	const fs::path dir(out_dir);
	json spec_json;
	std::vector<SeriesRecord> records;
	if (kind == "trend") {
		SynthSpec spec;
		if (noise) {
			spec.noise_stddev = *noise;
		}
		spec.validate();
		records.push_back(synth_linear_trend(spec, seed));
		spec_json = json{{"kind", kind},
		                 {"length", spec.length},
		                 {"intercept", spec.intercept},
		                 {"slope", spec.slope},
		                 {"noise_stddev", spec.noise_stddev},
		                 {"train_length", spec.train_length},
		                 {"context_length", spec.context_length},
		                 {"horizon", spec.horizon},
		                 {"seed", seed}};
	} else if (kind == "panel") {
		if (series == 0 || length < 2) {
			throw UsageError("synth: --series must be >= 1 and --length >= 2");
		}
		records = synth_seasonal_panel(series, length, seed);
		spec_json = json{{"kind", kind}, {"series", series}, {"length", length}, {"seed", seed}};
	} else {
		throw UsageError("synth: --kind must be trend or panel");
	}
	spec_json["version"] = BINCONV_VERSION;
	write_csv(dir / "synth.csv", records);
	write_json(dir / "synth_spec.json", spec_json);
	out << "wrote " << (dir / "synth.csv").string() << " (" << records.size() << " series)\n";
	return 0;
}

int cmd_train(const RunOptions& o, std::ostream& out)
{
	const RunConfig cfg = resolve_config(o);
	const PreparedDataset ds = load_dataset(cfg);
	const fs::path dir(o.out_dir);
	TrainHistory history;
	const BinConvModel<float> model = train_model(cfg, ds, &history, [&](std::size_t epoch, double loss) {
		out << "epoch " << epoch << " loss " << num(loss) << '\n';
	});
	save_checkpoint(model, dir / "checkpoint", CheckpointMeta{cfg.seed, history.epoch_loss.size()});
	write_json(dir / "history.json", json{{"epoch_loss", history.epoch_loss},
	                                      {"optimizer_steps", history.optimizer_steps},
	                                      {"seed", history.seed},
	                                      {"parameters", model.parameter_count()},
	                                      {"wall_seconds", history.wall_seconds}});
	write_json(dir / "run.json", run_record("train", cfg, ds));
	out << "saved checkpoint to " << (dir / "checkpoint").string() << '\n';
	return 0;
}

int cmd_forecast(const RunOptions& o, const std::string& checkpoint, std::ostream& out)
{
	const RunConfig cfg = resolve_config(o);
	const BinConvModel<float> model = load_checkpoint(checkpoint);
	if (model.config().context_length != cfg.split.context_length) {
		throw UsageError("forecast: checkpoint context length " + std::to_string(model.config().context_length) +
		                 " differs from split.context_length " + std::to_string(cfg.split.context_length));
	}
	const PreparedDataset ds = load_dataset(cfg);
	const ModelForecaster<float> forecaster(model);
	const PanelForecast fc =
		forecast_panel(forecaster, ds, cfg.split.horizon, cfg.forecast_mode, cfg.n_samples, cfg.seed,
		               cfg.scale_update);
	const fs::path dir(o.out_dir);

	std::string csv = "series_id,step";
	if (cfg.forecast_mode == ForecastMode::argmax) {
		csv += ",point\n";
		for (std::size_t k = 0; k < ds.size(); ++k) {
			for (std::size_t t = 0; t < fc.point[k].size(); ++t) {
				csv += ds.series_ids[k] + ',' + std::to_string(t + 1) + ',' + num(fc.point[k][t]) + '\n';
			}
		}
	} else {
		for (double level : quantile_levels()) {
			csv += ',' + level_name(level);
		}
		csv += '\n';
		std::string samples = "series_id,sample,step,value\n";
		for (std::size_t k = 0; k < ds.size(); ++k) {
			const auto& q = fc.quantiles[k];
			for (std::size_t t = 0; t < cfg.split.horizon; ++t) {
				csv += ds.series_ids[k] + ',' + std::to_string(t + 1);
				for (const auto& row : q) {
					csv += ',' + num(row[t]);
				}
				csv += '\n';
			}
			for (std::size_t i = 0; i < fc.samples[k].size(); ++i) {
				for (std::size_t t = 0; t < fc.samples[k][i].size(); ++t) {
					samples += ds.series_ids[k] + ',' + std::to_string(i) + ',' + std::to_string(t + 1) + ',' +
					           num(fc.samples[k][i][t]) + '\n';
				}
			}
		}
		write_file_atomic(dir / "samples.csv", samples);
	}
	write_file_atomic(dir / "forecast.csv", csv);
	json run = run_record("forecast", cfg, ds);
	run["checkpoint"] = fs::absolute(checkpoint).lexically_normal().string();
	write_json(dir / "run.json", run);
	out << "wrote " << (dir / "forecast.csv").string() << '\n';
	return 0;
}

// Forecast CSV rows keyed by series id: [step] -> values (point, or 19 quantiles).
struct ForecastTable {
	bool quantiles = false;
	std::map<std::string, std::vector<std::vector<double>>> rows;
};

ForecastTable read_forecast_csv(const fs::path& path)
{
	std::istringstream in(read_file(path));
	std::string line;
	if (!std::getline(in, line)) {
		throw std::runtime_error("forecast csv: empty file");
	}
	const auto header = split_fields(line);
	ForecastTable table;
	std::size_t width = 0;
	if (header == std::vector<std::string>{"series_id", "step", "point"}) {
		width = 1;
	} else {
		std::vector<std::string> expected{"series_id", "step"};
		for (double level : quantile_levels()) {
			expected.push_back(level_name(level));
		}
		if (header != expected) {
			throw std::runtime_error("forecast csv: unrecognized header '" + line + "'");
		}
		table.quantiles = true;
		width = kQuantileLevels;
	}
	std::size_t line_no = 1;
	while (std::getline(in, line)) {
		++line_no;
		if (line.empty() || line == "\r") {
			continue;
		}
		const auto f = split_fields(line);
		if (f.size() != 2 + width) {
			throw std::runtime_error("forecast csv line " + std::to_string(line_no) + ": expected " +
			                         std::to_string(2 + width) + " fields");
		}
		const auto step = static_cast<std::size_t>(parse_num(f[1], line_no));
		auto& series = table.rows[f[0]];
		if (step != series.size() + 1) {
			throw std::runtime_error("forecast csv line " + std::to_string(line_no) + ": steps out of order");
		}
		std::vector<double> values;
		for (std::size_t i = 2; i < f.size(); ++i) {
			values.push_back(parse_num(f[i], line_no));
		}
		series.push_back(std::move(values));
	}
	return table;
}

int cmd_eval(const RunOptions& o, const std::string& forecast_path, std::ostream& out)
{
	const RunConfig cfg = resolve_config(o);
	const PreparedDataset ds = load_dataset(cfg);
	const ForecastTable table = read_forecast_csv(forecast_path);
	const std::size_t mid = kQuantileLevels / 2;

	EvalPanel panel;
	panel.actuals = ds.test;
	if (table.quantiles) {
		panel.quantile_forecasts.emplace();
	}
	for (std::size_t k = 0; k < ds.size(); ++k) {
		const auto it = table.rows.find(ds.series_ids[k]);
		if (it == table.rows.end()) {
			throw std::runtime_error("eval: no forecast for series '" + ds.series_ids[k] + "'");
		}
		std::vector<double> point;
		std::vector<std::vector<double>> q(kQuantileLevels);
		for (const auto& row : it->second) {
			point.push_back(table.quantiles ? row[mid] : row[0]);
			for (std::size_t l = 0; table.quantiles && l < kQuantileLevels; ++l) {
				q[l].push_back(row[l]);
			}
		}
		panel.point_forecasts.push_back(std::move(point));
		if (table.quantiles) {
			panel.quantile_forecasts->push_back(std::move(q));
		}
	}
	const auto rows = per_series_metrics(panel);
	EvalPanel naive{ds.test, naive_last_value(ds, cfg.split.horizon), std::nullopt};

	json per_series = json::array();
	for (std::size_t k = 0; k < rows.size(); ++k) {
		json r{{"series_id", ds.series_ids[k]}, {"nmae", rows[k].nmae}};
		if (rows[k].crps) {
			r["crps"] = *rows[k].crps;
		}
		per_series.push_back(r);
	}
	json metrics{{"mode", table.quantiles ? "sampling" : "argmax"},
	             {"seed", cfg.seed},
	             {"num_series", ds.size()},
	             {"horizon", cfg.split.horizon},
	             {"nmae", nmae(panel)},
	             {"naive_last_value_nmae", nmae(naive)},
	             {"per_series", per_series}};
	if (table.quantiles) {
		metrics["crps"] = crps(panel);
	}
	write_json(fs::path(o.out_dir) / "metrics.json", metrics);
	out << "nmae " << num(metrics["nmae"].get<double>());
	if (table.quantiles) {
		out << " crps " << num(metrics["crps"].get<double>());
	}
	out << '\n';
	return 0;
}

json summarize(const std::vector<double>& v)
{
	const double n = static_cast<double>(v.size());
	const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
	double ss = 0.0;
	for (double x : v) {
		ss += (x - mean) * (x - mean);
	}
	return json{{"avg", mean},
	            {"min", *std::min_element(v.begin(), v.end())},
	            {"max", *std::max_element(v.begin(), v.end())},
	            {"std", v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0},
	            {"n", v.size()}};
}

int cmd_aggregate(const std::vector<std::string>& files, const std::string& out_dir, std::ostream& out)
{
	std::map<std::string, std::vector<double>> values;
	for (const auto& f : files) {
		const json m = json::parse(read_file(f));
		for (const char* key : {"nmae", "crps"}) {
			if (m.contains(key)) {
				values[key].push_back(m.at(key).get<double>());
			}
		}
	}
	json agg{{"files", files}};
	for (const auto& [key, v] : values) {
		agg[key] = summarize(v);
		out << key << " avg " << num(agg[key]["avg"].get<double>()) << " std " << num(agg[key]["std"].get<double>())
		    << '\n';
	}
	write_json(fs::path(out_dir) / "aggregate.json", agg);
	return 0;
}

int cmd_ablate(const RunOptions& o, const std::vector<std::string>& variant_names, std::ostream& out)
{
	const RunConfig cfg = resolve_config(o);
	std::vector<VariantKind> variants;
	try {
		for (const auto& name : variant_names) {
			variants.push_back(parse_variant(name));
		}
	} catch (const std::invalid_argument& e) {
		throw UsageError(e.what());
	}
	const PreparedDataset ds = load_dataset(cfg);
	const fs::path dir(o.out_dir);
	std::vector<VariantRun> runs;
	for (VariantKind kind : variants) {
		out << "training " << variant_name(kind) << '\n';
		runs.push_back(run_variant(cfg, ds, kind));
		const VariantRun& r = runs.back();
		out << variant_name(kind) << " nmae " << num(r.nmae) << " capped " << (r.capped ? "true" : "false") << '\n';
	}

	json table = json::array();
	std::string csv = "variant,parameters,nmae,max_forecast,max_train,cap_limit,capped,final_loss\n";
	for (const auto& r : runs) {
		const double final_loss = r.history.epoch_loss.empty() ? NAN : r.history.epoch_loss.back();
		table.push_back(json{{"variant", variant_name(r.variant)},
		                     {"parameters", r.parameters},
		                     {"nmae", r.nmae},
		                     {"max_forecast", r.max_forecast},
		                     {"max_train", r.max_train},
		                     {"cap_limit", r.cap_limit},
		                     {"capped", r.capped},
		                     {"epoch_loss", r.history.epoch_loss}});
		csv += std::string(variant_name(r.variant)) + ',' + std::to_string(r.parameters) + ',' + num(r.nmae) + ',' +
		       num(r.max_forecast) + ',' + num(r.max_train) + ',' + num(r.cap_limit) + ',' +
		       (r.capped ? "true" : "false") + ',' + num(final_loss) + '\n';
	}
	json report = run_record("ablate", cfg, ds);
	report["variants"] = table;
	write_json(dir / "ablation.json", report);
	write_file_atomic(dir / "ablation.csv", csv);

	// Plot-ready: actuals over the last H training values and the test window,
	// with each variant's chained forecasts (backcast, then forecast).
	const std::size_t h = cfg.split.horizon;
	std::string plot = "series_id,t,actual";
	for (const auto& r : runs) {
		plot += ',' + std::string(variant_name(r.variant));
	}
	plot += '\n';
	for (std::size_t k = 0; k < ds.size(); ++k) {
		const std::size_t n = ds.train[k].size();
		for (std::size_t i = 0; i < 2 * h; ++i) {
			if (i < h && n < h) {
				continue;
			}
			const std::size_t t = n - h + i;
			const double actual = i < h ? ds.train[k][t] : ds.test[k][i - h];
			plot += ds.series_ids[k] + ',' + std::to_string(t) + ',' + num(actual);
			for (const auto& r : runs) {
				plot += ',';
				if (i >= h) {
					plot += num(r.forecast.point[k][i - h]);
				} else if (!r.backcast.empty()) {
					plot += num(r.backcast[k][i]);
				}
			}
			plot += '\n';
		}
	}
	write_file_atomic(dir / "plot.csv", plot);
	out << "wrote " << (dir / "ablation.json").string() << '\n';
	return 0;
}

int cmd_gradcheck(std::uint64_t seed, std::ostream& out)
{
	bool ok = true;
	for (const auto& c : run_gradient_suite(seed)) {
		out << (c.passed() ? "PASS " : "FAIL ") << c.name << " max_rel_err " << num(c.report.max_relative_error)
		    << " tol " << num(c.tolerance) << " probes " << c.report.probes;
		if (!c.passed()) {
			out << " worst " << c.report.worst_input << '[' << c.report.worst_index << ']';
		}
		out << '\n';
		ok = ok && c.passed();
	}
	return ok ? 0 : 1;
}

void add_run_options(CLI::App* cmd, RunOptions& o, bool forecast_flags)
{
	cmd->add_option("--config", o.config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
	cmd->add_option("--out-dir", o.out_dir, "artifact directory")->required();
	cmd->add_option("--seed", o.seed, "overrides the config seed");
	cmd->add_option("--variant", o.variant, "standard|fc_head|standard_conv|one_hot");
	cmd->add_option("--scaling", o.scaling, "per_sample|dataset");
	if (forecast_flags) {
		cmd->add_option("--mode", o.mode, "argmax|sampling");
		cmd->add_option("--n-samples", o.n_samples, "trajectories in sampling mode");
		cmd->add_option("--scale", o.scale, "sliding|frozen per-sample scale during autoregression");
	}
}

} // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err)
{
	CLI::App app{"BinConv forecasting tool"};
	app.require_subcommand(1);
	app.set_version_flag("--version", BINCONV_VERSION);

	std::string synth_dir, synth_kind = "trend";
	std::uint64_t synth_seed = 0;
	std::size_t synth_series = 50, synth_length = 200;
	std::optional<double> synth_noise;
	auto* synth = app.add_subcommand("synth", "write a synthetic dataset CSV");
	synth->add_option("--out-dir", synth_dir, "output directory")->required();
	synth->add_option("--kind", synth_kind, "trend|panel");
	synth->add_option("--seed", synth_seed);
	synth->add_option("--series", synth_series, "panel: number of series");
	synth->add_option("--length", synth_length, "panel: values per series");
	synth->add_option("--noise", synth_noise, "trend: noise standard deviation");

	RunOptions train_o, forecast_o, eval_o, ablate_o;
	auto* train = app.add_subcommand("train", "train a model and write a checkpoint");
	add_run_options(train, train_o, false);

	std::string checkpoint;
	auto* forecast = app.add_subcommand("forecast", "forecast the test window of every series");
	add_run_options(forecast, forecast_o, true);
	forecast->add_option("--checkpoint", checkpoint, "checkpoint directory")->required()->check(CLI::ExistingDirectory);

	std::string forecast_csv;
	std::vector<std::string> aggregate_files;
	std::string aggregate_dir;
	auto* eval = app.add_subcommand("eval", "score a forecast CSV, or aggregate metric files");
	eval->add_option("--config", eval_o.config, "run configuration (JSON)")->check(CLI::ExistingFile);
	eval->add_option("--out-dir", eval_o.out_dir, "artifact directory")->required();
	eval->add_option("--seed", eval_o.seed);
	eval->add_option("--forecast", forecast_csv, "forecast CSV")->check(CLI::ExistingFile);
	eval->add_option("--aggregate", aggregate_files, "metrics.json files to summarize")->check(CLI::ExistingFile);

	std::vector<std::string> variants{"standard", "fc_head", "standard_conv", "one_hot"};
	auto* ablate = app.add_subcommand("ablate", "train every variant and compare");
	add_run_options(ablate, ablate_o, false);
	ablate->add_option("--variants", variants, "variants to run")->delimiter(',');

	std::uint64_t grad_seed = 0;
	auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
	gradcheck->add_option("--seed", grad_seed);

	try {
		app.parse(argc, argv);
	} catch (const CLI::ParseError& e) {
		return app.exit(e, out, err) == 0 ? 0 : 2;
	}

	try {
		if (synth->parsed()) {
			return cmd_synth(synth_dir, synth_kind, synth_seed, synth_series, synth_length, synth_noise, out);
		}
		if (train->parsed()) {
			return cmd_train(train_o, out);
		}
		if (forecast->parsed()) {
			return cmd_forecast(forecast_o, checkpoint, out);
		}
		if (eval->parsed()) {
			if (!aggregate_files.empty()) {
				return cmd_aggregate(aggregate_files, eval_o.out_dir, out);
			}
			if (eval_o.config.empty() || forecast_csv.empty()) {
				throw UsageError("eval: needs --config and --forecast, or --aggregate");
			}
			return cmd_eval(eval_o, forecast_csv, out);
		}
		if (ablate->parsed()) {
			return cmd_ablate(ablate_o, variants, out);
		}
		if (gradcheck->parsed()) {
			return cmd_gradcheck(grad_seed, out);
		}
	} catch (const UsageError& e) {
		err << "error: " << e.what() << '\n';
		return 2;
	} catch (const std::exception& e) {
		err << "error: " << e.what() << '\n';
		return 1;
	}
	return 2;
}

} // namespace binconv
