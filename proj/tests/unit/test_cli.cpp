#include <doctest.h>

#include <stdexcept>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "binconv/cli.hpp"
#include "binconv/data.hpp"
#include "binconv/run_config.hpp"

using namespace binconv;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
	int status;
	std::string out;
	std::string err;
};

Result run(std::vector<std::string> args)
{
	args.insert(args.begin(), "binconv");
	std::vector<char*> argv;
	for (auto& a : args) {
		argv.push_back(a.data());
	}
	std::ostringstream out, err;
	const int status = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
	return {status, out.str(), err.str()};
}

fs::path workspace()
{
	const auto dir = fs::temp_directory_path() / "binconv_test_cli";
	fs::remove_all(dir);
	fs::create_directories(dir);
	return dir;
}

json tiny_config()
{
	return json{{"data", {{"path", "data/synth.csv"}}},
	            {"split", {{"context_length", 6}, {"horizon", 3}}},
	            {"model", {{"bins", 24}, {"head_kernel", 5}, {"blocks", 1}}},
	            {"train", {{"epochs", 2}, {"batch_size", 8}}},
	            {"seed", 1}};
}

} // namespace

TEST_CASE("run config parsing")
{
	const RunConfig c = run_config_from_json(tiny_config(), "/base");
	CHECK(c.data_path == fs::path("/base/data/synth.csv"));
	CHECK(c.model.context_length == 6);
	CHECK(c.model.channels == 6);
	CHECK(c.model.bins == 24);
	CHECK(c.train.epochs == 2);
	CHECK(c.variant == VariantKind::standard);
	CHECK(c.scaling == ScalingMode::per_sample);
	CHECK(c.scale_update == ScaleUpdate::sliding);

	json frozen = tiny_config();
	frozen["forecast"] = {{"scale", "frozen"}};
	CHECK(run_config_from_json(frozen).scale_update == ScaleUpdate::frozen);
	CHECK(run_config_from_json(to_json(run_config_from_json(frozen))).scale_update == ScaleUpdate::frozen);
	frozen["forecast"]["scale"] = "stale";
	CHECK_THROWS_AS(run_config_from_json(frozen), std::invalid_argument);

	json defaults = tiny_config();
	defaults["split"].erase("context_length");
	CHECK(run_config_from_json(defaults).split.context_length == 9);

	const RunConfig back = run_config_from_json(to_json(c));
	CHECK(back.model == c.model);
	CHECK(back.split.horizon == c.split.horizon);

	json unknown = tiny_config();
	unknown["model"]["width"] = 3;
	CHECK_THROWS_WITH_AS(run_config_from_json(unknown), doctest::Contains("unknown key 'width'"), std::invalid_argument);
	json no_data = tiny_config();
	no_data.erase("data");
	CHECK_THROWS_WITH_AS(run_config_from_json(no_data), doctest::Contains("data.path"), std::invalid_argument);
	json bad_variant = tiny_config();
	bad_variant["variant"] = "huge";
	CHECK_THROWS_AS(run_config_from_json(bad_variant), std::invalid_argument);
	json mismatch = tiny_config();
	mismatch["model"]["context_length"] = 7;
	CHECK_THROWS_AS(run_config_from_json(mismatch), std::invalid_argument);
}

TEST_CASE("usage errors exit with status 2")
{
	CHECK(run({}).status == 2);
	CHECK(run({"train"}).status == 2);
	CHECK(run({"train", "--config", "/nonexistent.json", "--out-dir", "x"}).status == 2);

	const auto dir = workspace();
	json bad = tiny_config();
	bad["train"]["epochs"] = 0;
	write_file_atomic(dir / "bad.json", bad.dump());
	const Result r = run({"train", "--config", (dir / "bad.json").string(), "--out-dir", (dir / "o").string()});
	CHECK(r.status == 2);
	CHECK(r.err.find("epochs") != std::string::npos);
	CHECK(run({"train", "--config", (dir / "bad.json").string(), "--out-dir", "o", "--variant", "nope"}).status == 2);
}

TEST_CASE("synth, train, forecast and eval end to end")
{
	const auto dir = workspace();
	REQUIRE(run({"synth", "--kind", "panel", "--series", "3", "--length", "30", "--out-dir",
	             (dir / "data").string()})
	            .status == 0);
	write_file_atomic(dir / "cfg.json", tiny_config().dump(2));
	const std::string cfg = (dir / "cfg.json").string();

	const Result t = run({"train", "--config", cfg, "--out-dir", (dir / "run").string()});
	REQUIRE(t.status == 0);
	CHECK(t.out.find("epoch 2 loss") != std::string::npos);
	CHECK(fs::exists(dir / "run/checkpoint/manifest.json"));
	const json history = json::parse(read_file(dir / "run/history.json"));
	CHECK(history["epoch_loss"].size() == 2);
	const json record = json::parse(read_file(dir / "run/run.json"));
	CHECK(record["config"]["seed"] == 1);

	const std::string ckpt = (dir / "run/checkpoint").string();
	REQUIRE(run({"forecast", "--config", cfg, "--checkpoint", ckpt, "--out-dir", (dir / "fa").string()}).status == 0);
	const std::string point_csv = read_file(dir / "fa/forecast.csv");
	CHECK(point_csv.rfind("series_id,step,point\n", 0) == 0);
	REQUIRE(run({"eval", "--config", cfg, "--forecast", (dir / "fa/forecast.csv").string(), "--out-dir",
	             (dir / "ea").string()})
	            .status == 0);
	const json ma = json::parse(read_file(dir / "ea/metrics.json"));
	CHECK(ma["num_series"] == 3);
	CHECK(ma["per_series"].size() == 3);
	CHECK_FALSE(ma.contains("crps"));

	REQUIRE(run({"forecast", "--config", cfg, "--checkpoint", ckpt, "--out-dir", (dir / "fs").string(), "--mode",
	             "sampling", "--n-samples", "16", "--seed", "4"})
	            .status == 0);
	CHECK(read_file(dir / "fs/forecast.csv").rfind("series_id,step,q05,q10,", 0) == 0);
	CHECK(fs::exists(dir / "fs/samples.csv"));
	REQUIRE(run({"eval", "--config", cfg, "--forecast", (dir / "fs/forecast.csv").string(), "--out-dir",
	             (dir / "es").string()})
	            .status == 0);
	const json ms = json::parse(read_file(dir / "es/metrics.json"));
	CHECK(ms["crps"].get<double>() >= 0.0);

	const Result agg = run({"eval", "--aggregate", (dir / "ea/metrics.json").string(),
	                        (dir / "es/metrics.json").string(), "--out-dir", (dir / "agg").string()});
	REQUIRE(agg.status == 0);
	const json a = json::parse(read_file(dir / "agg/aggregate.json"));
	CHECK(a["nmae"]["n"] == 2);
	CHECK(a["crps"]["n"] == 1);
	CHECK(a["nmae"]["min"].get<double>() <= a["nmae"]["max"].get<double>());

	// The forecast CSV must cover every evaluated series.
	write_file_atomic(dir / "partial.csv", "series_id,step,point\nS1,1,5\n");
	CHECK(run({"eval", "--config", cfg, "--forecast", (dir / "partial.csv").string(), "--out-dir",
	           (dir / "ep").string()})
	          .status == 1);
}

TEST_CASE("ablate writes the comparison table")
{
	const auto dir = workspace();
	REQUIRE(run({"synth", "--kind", "panel", "--series", "2", "--length", "30", "--out-dir",
	             (dir / "data").string()})
	            .status == 0);
	json cfg = tiny_config();
	cfg["scaling"] = "dataset";
	write_file_atomic(dir / "cfg.json", cfg.dump());
	const Result r = run({"ablate", "--config", (dir / "cfg.json").string(), "--out-dir", (dir / "ab").string()});
	REQUIRE(r.status == 0);
	const json report = json::parse(read_file(dir / "ab/ablation.json"));
	REQUIRE(report["variants"].size() == 4);
	CHECK(report["variants"][1]["variant"] == "fc_head");
	const std::string plot = read_file(dir / "ab/plot.csv");
	CHECK(plot.rfind("series_id,t,actual,standard,fc_head,standard_conv,one_hot\n", 0) == 0);
	CHECK(read_file(dir / "ab/ablation.csv").find("one_hot,") != std::string::npos);
}

TEST_CASE("gradcheck command")
{
	const Result r = run({"gradcheck"});
	CHECK(r.status == 0);
	CHECK(r.out.find("FAIL") == std::string::npos);
	CHECK(r.out.find("end_to_end_tiny_model") != std::string::npos);
}
