// Acceptance checks A1-A9 plus the smoke run. Prints one PASS/FAIL line per
// criterion and exits nonzero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "binconv/cbe.hpp"
#include "binconv/data.hpp"
#include "binconv/gradient_suite.hpp"
#include "binconv/metrics.hpp"
#include "binconv/model.hpp"
#include "binconv/pipeline.hpp"
#include "oracles.hpp"

#ifndef BINCONV_CLI_PATH
#error "BINCONV_CLI_PATH must point at the command-line tool"
#endif

using namespace binconv;
namespace fs = std::filesystem;

namespace {

struct Outcome {
	bool pass = false;
	std::string detail;
};

int failures = 0;

void criterion(const std::string& id, double budget_seconds, const std::function<Outcome()>& body)
{
	const auto start = std::chrono::steady_clock::now();
	Outcome o;
	try {
		o = body();
	} catch (const std::exception& e) {
		o = Outcome{false, std::string("exception: ") + e.what()};
	}
	const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
	std::ostringstream timing;
	timing.precision(3);
	timing << secs << "s (budget " << budget_seconds << "s)";
	if (secs > budget_seconds) {
		o.pass = false;
		o.detail += "; over time budget";
	}
	failures += o.pass ? 0 : 1;
	std::cout << (o.pass ? "PASS " : "FAIL ") << id << "  " << o.detail << "  " << timing.str() << std::endl;
}

std::string fmt(double v, int precision = 6)
{
	std::ostringstream os;
	os.precision(precision);
	os << v;
	return os.str();
}

Outcome a1()
{
	const std::vector<double> p{0.4, 0.9, 0.2};
	const BinDistribution d = valid_sequence_log_probs(p);
	const double z = std::exp(d.log_normalizer);
	const double expected[] = {0.109, 0.073, 0.654, 0.164};
	bool ok = std::abs(z - 0.44) < 1e-3;
	std::string probs;
	for (std::size_t m = 0; m < 4; ++m) {
		ok = ok && std::abs(d.prob(m) - expected[m]) < 1e-3;
		probs += (m ? "," : "") + fmt(d.prob(m), 4);
	}
	const std::size_t m = argmax_bin(d);
	const CbeVector e = CbeVector::with_ones(3, m);
	ok = ok && e.bits == std::vector<std::uint8_t>{1, 1, 0};
	return {ok, "Z=" + fmt(z) + " p=(" + probs + ") argmax m=" + std::to_string(m)};
}

Outcome a2()
{
	Rng rng(2024);
	double worst = 0.0;
	std::size_t vectors = 0;
	for (std::size_t d : {3, 100, 1000}) {
		for (int trial = 0; trial < 1000; ++trial, ++vectors) {
			std::vector<double> p(d);
			for (auto& v : p) {
				const double u = rng.uniform();
				v = u < 0.05 ? 0.0 : (u < 0.10 ? 1.0 : rng.uniform());
			}
			const BinDistribution dist = valid_sequence_log_probs(p);
			double total = 0.0;
			for (std::size_t m = 0; m <= d; ++m) {
				total += dist.prob(m);
			}
			worst = std::max(worst, std::abs(total - 1.0));
		}
	}
	return {worst < 1e-9, std::to_string(vectors) + " vectors, max |sum-1|=" + fmt(worst, 3)};
}

Outcome a3()
{
	Rng rng(77);
	double worst = 0.0;
	for (int trial = 0; trial < 200; ++trial) {
		const std::size_t d = 1 + rng.below(12);
		std::vector<double> p(d);
		for (auto& v : p) {
			v = 0.01 + 0.98 * rng.uniform();
		}
		const auto expected = oracle::valid_sequence_probs(p);
		const BinDistribution dist = valid_sequence_log_probs(p);
		for (std::size_t m = 0; m <= d; ++m) {
			worst = std::max(worst, std::abs(dist.prob(m) - expected[m]));
		}
	}
	return {worst < 1e-12, "200 vectors, max abs diff vs enumeration=" + fmt(worst, 3)};
}

Outcome a4()
{
	bool ok = true;
	std::string detail;
	for (const auto& c : run_gradient_suite(0)) {
		ok = ok && c.passed();
		detail += (detail.empty() ? "" : " ") + c.name + "=" + fmt(c.report.max_relative_error, 2);
	}
	return {ok, detail};
}

Outcome a5()
{
	const Binning b = BinConvConfig::univariate(42).binning();
	Rng rng(5);
	double worst = 0.0;
	for (int i = 0; i < 10000; ++i) {
		const double x = b.lower() + (b.upper() - b.lower()) * rng.uniform();
		worst = std::max(worst, std::abs(decode(encode(x, b).ones, b) - x));
	}
	return {worst <= b.width() / 2.0, "max |decode(encode(x))-x|=" + fmt(worst) + " width/2=" + fmt(b.width() / 2)};
}

Outcome a6()
{
	const SynthSpec spec;
	const SeriesRecord series = synth_linear_trend(spec, 0);
	RunConfig cfg;
	cfg.split = SplitSpec{spec.context_length, spec.length - spec.train_length};
	cfg.model = BinConvConfig::univariate(spec.context_length);
	cfg.scaling = ScalingMode::dataset;
	cfg.forecast_mode = ForecastMode::argmax;
	cfg.seed = 0;
	const PreparedDataset ds = prepare_dataset({series}, cfg);
	const VariantRun standard = run_variant(cfg, ds, VariantKind::standard);
	const VariantRun fc = run_variant(cfg, ds, VariantKind::fc_head);
	const bool ok = standard.nmae < 0.05 && fc.capped;
	return {ok, "standard NMAE=" + fmt(standard.nmae, 4) + " (max forecast " + fmt(standard.max_forecast, 5) +
	                "); fc_head max forecast=" + fmt(fc.max_forecast, 5) + " cap=" + fmt(fc.cap_limit, 5) +
	                " capped=" + (fc.capped ? "true" : "false")};
}

Outcome a7()
{
	struct Row {
		const char* name;
		std::size_t context;
		VariantKind kind;
		double reference;
	};
	const Row rows[] = {{"daily", 42, VariantKind::standard, 20173.0},
	                    {"weekly", 39, VariantKind::standard, 17680.0},
	                    {"daily fc_head", 42, VariantKind::fc_head, 1019540.0},
	                    {"daily standard_conv", 42, VariantKind::standard_conv, 51679.0}};
	bool ok = true;
	std::string detail;
	for (const auto& r : rows) {
		const auto n = static_cast<double>(param_count(BinConvConfig::univariate(r.context), r.kind));
		const double rel = (n - r.reference) / r.reference;
		ok = ok && std::abs(rel) <= 0.10;
		detail += std::string(detail.empty() ? "" : "; ") + r.name + " " + fmt(n, 8) + " vs " + fmt(r.reference, 8) +
		          " (" + fmt(100.0 * rel, 3) + "%)";
	}
	return {ok, detail};
}

Outcome a8()
{
	Rng rng(8);
	double worst = 0.0;
	for (int trial = 0; trial < 50; ++trial) {
		EvalPanel p;
		p.quantile_forecasts.emplace();
		const std::size_t series = 1 + rng.below(5);
		const std::size_t horizon = 1 + rng.below(20);
		for (std::size_t k = 0; k < series; ++k) {
			std::vector<double> x(horizon), f(horizon);
			for (std::size_t t = 0; t < horizon; ++t) {
				x[t] = 100.0 * (rng.uniform() - 0.3);
				f[t] = x[t] + 20.0 * (rng.uniform() - 0.5);
			}
			p.actuals.push_back(x);
			p.point_forecasts.push_back(f);
			p.quantile_forecasts->push_back(std::vector<std::vector<double>>(kQuantileLevels, f));
		}
		worst = std::max(worst, std::abs(crps(p) - nmae(p)));
	}
	return {worst < 1e-12, "50 panels, max |CRPS-NMAE|=" + fmt(worst, 3)};
}

int run_cli_process(const std::string& args, const fs::path& log)
{
	const std::string cmd = std::string("\"") + BINCONV_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
	return std::system(cmd.c_str());
}

Outcome a9()
{
	const fs::path dir = fs::temp_directory_path() / "binconv_acceptance_a9";
	fs::remove_all(dir);
	fs::create_directories(dir);
	write_csv(dir / "data.csv", synth_seasonal_panel(4, 40, 9));
	const nlohmann::json cfg{{"data", {{"path", "data.csv"}}},
	                         {"split", {{"context_length", 12}, {"horizon", 4}}},
	                         {"model", {{"bins", 50}, {"head_kernel", 9}}},
	                         {"train", {{"epochs", 3}, {"batch_size", 16}}},
	                         {"forecast", {{"mode", "sampling"}, {"n_samples", 20}}},
	                         {"seed", 3}};
	write_file_atomic(dir / "cfg.json", cfg.dump(2));
	const std::string c = "--config \"" + (dir / "cfg.json").string() + "\"";

	for (const char* run : {"t1", "t2"}) {
		if (run_cli_process("train " + c + " --seed 11 --out-dir \"" + (dir / run).string() + "\"", dir / "log") != 0) {
			return {false, "train failed: " + read_file(dir / "log")};
		}
	}
	const bool params_same = read_file(dir / "t1/checkpoint/params.bin") == read_file(dir / "t2/checkpoint/params.bin");
	const bool manifest_same =
		read_file(dir / "t1/checkpoint/manifest.json") == read_file(dir / "t2/checkpoint/manifest.json");

	for (const char* run : {"f1", "f2"}) {
		if (run_cli_process("forecast " + c + " --mode sampling --seed 5 --checkpoint \"" +
		                        (dir / "t1/checkpoint").string() + "\" --out-dir \"" + (dir / run).string() + "\"",
		                    dir / "log") != 0) {
			return {false, "forecast failed: " + read_file(dir / "log")};
		}
	}
	const bool samples_same = read_file(dir / "f1/samples.csv") == read_file(dir / "f2/samples.csv");
	const auto bytes = fs::file_size(dir / "t1/checkpoint/params.bin");
	fs::remove_all(dir);
	return {params_same && manifest_same && samples_same,
	        std::string("checkpoint payload (") + std::to_string(bytes) + " bytes) identical=" +
	            (params_same ? "true" : "false") + ", manifest identical=" + (manifest_same ? "true" : "false") +
	            ", sample paths identical=" + (samples_same ? "true" : "false")};
}

Outcome smoke()
{
	RunConfig cfg;
	cfg.split = SplitSpec::from_horizon(14);
	cfg.model = BinConvConfig::univariate(cfg.split.context_length);
	cfg.model.bins = 200;
	cfg.train.epochs = 8;
	cfg.seed = 0;
	const PreparedDataset ds = prepare_dataset(synth_seasonal_panel(50, 120, 2025), cfg);

	TrainHistory history;
	const BinConvModel<float> model = train_model(cfg, ds, &history);
	bool decreasing = history.epoch_loss.size() >= 5;
	for (std::size_t e = 1; e < 5 && decreasing; ++e) {
		decreasing = history.epoch_loss[e] < history.epoch_loss[e - 1];
	}
	const ModelForecaster<float> forecaster(model);
	const PanelForecast fc = forecast_panel(forecaster, ds, cfg.split.horizon, ForecastMode::argmax, 1, cfg.seed);
	const double model_nmae = nmae(make_eval_panel(ds, fc, ForecastMode::argmax));
	const double naive_nmae = nmae(EvalPanel{ds.test, naive_last_value(ds, cfg.split.horizon), std::nullopt});
	std::string losses;
	for (std::size_t e = 0; e < history.epoch_loss.size(); ++e) {
		losses += (e ? "," : "") + fmt(history.epoch_loss[e], 4);
	}
	return {decreasing && model_nmae < naive_nmae,
	        std::to_string(ds.size()) + " series, D=200, loss=[" + losses + "], NMAE " + fmt(model_nmae, 4) +
	            " vs naive " + fmt(naive_nmae, 4)};
}

} // namespace

int main()
{
	criterion("A1", 1, a1);
	criterion("A2", 5, a2);
	criterion("A3", 5, a3);
	criterion("A4", 60, a4);
	criterion("A5", 1, a5);
	criterion("A6", 600, a6);
	criterion("A7", 1, a7);
	criterion("A8", 1, a8);
	criterion("A9", 300, a9);
	criterion("SMOKE", 900, smoke);
	std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
	return failures == 0 ? 0 : 1;
}
