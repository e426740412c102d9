#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace binconv {

struct SeriesRecord {
	std::string series_id;
	std::vector<double> values;

	bool operator==(const SeriesRecord&) const = default;
};

struct SplitSpec {
	std::size_t context_length = 42;
	std::size_t horizon = 14;

	// Univariate benchmark rule C = 3H.
	static SplitSpec from_horizon(std::size_t horizon) { return {3 * horizon, horizon}; }
	void validate() const;
};

// Linear trend with multiplicative Gaussian noise:
// s_t = (intercept + slope * t) * (1 + sigma_t), sigma_t ~ N(0, noise_stddev^2).
struct SynthSpec {
	std::size_t length = 144;
	double intercept = 100.0;
	double slope = 1.5;
	double noise_stddev = 1e-2;
	std::size_t train_length = 120;
	std::size_t context_length = 72;
	std::size_t horizon = 24;

	void validate() const;
};

// Long-format CSV with header `series_id,value`; rows in time order per series.
// Records keep the order in which series ids first appear.
std::vector<SeriesRecord> load_csv(const std::filesystem::path& path);
std::vector<SeriesRecord> parse_csv(const std::string& text);

std::string format_csv(std::span<const SeriesRecord> records);
void write_csv(const std::filesystem::path& path, std::span<const SeriesRecord> records);

SeriesRecord synth_linear_trend(const SynthSpec& spec, std::uint64_t seed);

// Positive series with level, drift, weekly seasonality and noise; a
// stand-in panel for benchmark-shaped smoke runs.
std::vector<SeriesRecord> synth_seasonal_panel(std::size_t count, std::size_t length, std::uint64_t seed);

// Prefix of train_length values and the remaining suffix.
std::pair<std::vector<double>, std::vector<double>> train_test_split(const SeriesRecord& record,
                                                                     std::size_t train_length);

// Mean |x| over all given values (dataset-level scaling); 1 when all are zero.
double dataset_scale(std::span<const std::vector<double>> series);

// Writes `contents` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

} // namespace binconv
