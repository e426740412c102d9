#include "binconv/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "binconv/rng.hpp"

namespace binconv {

void SplitSpec::validate() const
{
	if (context_length == 0 || horizon == 0) {
		throw std::invalid_argument("split: context_length and horizon must be >= 1");
	}
}

void SynthSpec::validate() const
{
	if (length == 0 || train_length >= length) {
		throw std::invalid_argument("synth: train_length must be shorter than length");
	}
	if (!(noise_stddev >= 0.0)) {
		throw std::invalid_argument("synth: noise_stddev must be non-negative");
	}
	if (context_length == 0 || horizon == 0 || context_length >= train_length) {
		throw std::invalid_argument("synth: need 0 < context_length < train_length and horizon >= 1");
	}
}

namespace {

std::string_view trim(std::string_view s)
{
	while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) {
		s.remove_suffix(1);
	}
	while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
		s.remove_prefix(1);
	}
	return s;
}

double parse_value(std::string_view text, std::size_t line)
{
	double value = 0.0;
	const char* first = text.data();
	const char* last = text.data() + text.size();
	if (!text.empty() && *first == '+') {
		++first;
	}
	const auto [ptr, ec] = std::from_chars(first, last, value);
	if (ec != std::errc() || ptr != last || text.empty() || !std::isfinite(value)) {
		throw std::runtime_error("csv line " + std::to_string(line) + ": non-numeric value '" + std::string(text) +
		                         "'");
	}
	return value;
}

std::string format_double(double v)
{
	char buf[64];
	const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
	if (ec != std::errc()) {
		throw std::runtime_error("failed to format value");
	}
	return std::string(buf, ptr);
}

} // namespace

std::vector<SeriesRecord> parse_csv(const std::string& text)
{
	std::istringstream in(text);
	std::string line;
	std::size_t line_no = 0;
	bool have_header = false;
	std::vector<SeriesRecord> records;
	std::map<std::string, std::size_t, std::less<>> index;
	while (std::getline(in, line)) {
		++line_no;
		const std::string_view row = trim(line);
		if (!have_header) {
			if (row.empty()) {
				continue;
			}
			if (row != "series_id,value") {
				throw std::runtime_error("csv: missing header 'series_id,value' (got '" + std::string(row) + "')");
			}
			have_header = true;
			continue;
		}
		if (row.empty()) {
			continue;
		}
		const auto comma = row.find(',');
		if (comma == std::string_view::npos || row.find(',', comma + 1) != std::string_view::npos) {
			throw std::runtime_error("csv line " + std::to_string(line_no) + ": expected 2 fields");
		}
		const std::string_view id = trim(row.substr(0, comma));
		if (id.empty()) {
			throw std::runtime_error("csv line " + std::to_string(line_no) + ": empty series_id");
		}
		const double value = parse_value(trim(row.substr(comma + 1)), line_no);
		auto it = index.find(id);
		if (it == index.end()) {
			it = index.emplace(std::string(id), records.size()).first;
			records.push_back(SeriesRecord{std::string(id), {}});
		}
		records[it->second].values.push_back(value);
	}
	if (!have_header) {
		throw std::runtime_error("csv: empty file");
	}
	if (records.empty()) {
		throw std::runtime_error("csv: no data rows");
	}
	return records;
}

std::vector<SeriesRecord> load_csv(const std::filesystem::path& path)
{
	return parse_csv(read_file(path));
}

std::string format_csv(std::span<const SeriesRecord> records)
{
	std::string out = "series_id,value\n";
	for (const auto& r : records) {
		for (double v : r.values) {
			out += r.series_id;
			out += ',';
			out += format_double(v);
			out += '\n';
		}
	}
	return out;
}

void write_csv(const std::filesystem::path& path, std::span<const SeriesRecord> records)
{
	write_file_atomic(path, format_csv(records));
}

SeriesRecord synth_linear_trend(const SynthSpec& spec, std::uint64_t seed)
{
	spec.validate();
	Rng rng(seed);
	SeriesRecord r{"linear_trend", {}};
	r.values.reserve(spec.length);
	for (std::size_t t = 0; t < spec.length; ++t) {
		const double sigma = spec.noise_stddev * rng.normal();
		r.values.push_back((spec.intercept + spec.slope * static_cast<double>(t)) * (1.0 + sigma));
	}
	return r;
}

std::vector<SeriesRecord> synth_seasonal_panel(std::size_t count, std::size_t length, std::uint64_t seed)
{
	std::vector<SeriesRecord> panel;
	panel.reserve(count);
	for (std::size_t k = 0; k < count; ++k) {
		Rng rng(derive_seed(seed, k));
		const double level = 50.0 + 950.0 * rng.uniform();
		const double drift = (rng.uniform() - 0.3) * 0.004 * level;
		const double amplitude = (0.05 + 0.2 * rng.uniform()) * level;
		const double phase = 7.0 * rng.uniform();
		const double noise = 0.02 * level;
		SeriesRecord r{"S" + std::to_string(k + 1), {}};
		r.values.reserve(length);
		for (std::size_t t = 0; t < length; ++t) {
			const double tt = static_cast<double>(t);
			const double season = amplitude * std::sin(2.0 * std::numbers::pi * (tt + phase) / 7.0);
			r.values.push_back(std::max(1.0, level + drift * tt + season + noise * rng.normal()));
		}
		panel.push_back(std::move(r));
	}
	return panel;
}

std::pair<std::vector<double>, std::vector<double>> train_test_split(const SeriesRecord& record,
                                                                     std::size_t train_length)
{
	if (train_length >= record.values.size()) {
		throw std::invalid_argument("train_test_split: train_length " + std::to_string(train_length) +
		                            " leaves no test values for series '" + record.series_id + "'");
	}
	const auto mid = record.values.begin() + static_cast<std::ptrdiff_t>(train_length);
	return {std::vector<double>(record.values.begin(), mid), std::vector<double>(mid, record.values.end())};
}

double dataset_scale(std::span<const std::vector<double>> series)
{
	double sum = 0.0;
	std::size_t n = 0;
	for (const auto& s : series) {
		for (double x : s) {
			sum += std::abs(x);
		}
		n += s.size();
	}
	if (n == 0) {
		throw std::invalid_argument("dataset_scale: no values");
	}
	return sum > 0.0 ? sum / static_cast<double>(n) : 1.0;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents)
{
	if (path.has_parent_path()) {
		std::filesystem::create_directories(path.parent_path());
	}
	std::filesystem::path tmp = path;
	tmp += ".tmp";
	{
		std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
		if (!out) {
			throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
		}
		out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
		if (!out) {
			throw std::runtime_error("write failed for '" + tmp.string() + "'");
		}
	}
	std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path)
{
	std::ifstream in(path, std::ios::binary);
	if (!in) {
		throw std::runtime_error("cannot open '" + path.string() + "'");
	}
	std::ostringstream ss;
	ss << in.rdbuf();
	return ss.str();
}

} // namespace binconv
