#include "binconv/cbe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace binconv {

Binning::Binning(double lower, double upper, std::size_t bins)
	: lower_(lower), upper_(upper), bins_(bins)
{
	if (!std::isfinite(lower) || !std::isfinite(upper) || !(upper > lower)) {
		throw std::invalid_argument("binning: upper edge must exceed lower edge");
	}
	if (bins == 0) {
		throw std::invalid_argument("binning: bin count must be positive");
	}
}

double Binning::edge(std::size_t d) const
{
	if (d == bins_) {
		return upper_;
	}
	return lower_ + static_cast<double>(d) * width();
}

CbeVector CbeVector::with_ones(std::size_t length, std::size_t ones)
{
	if (ones > length) {
		throw std::out_of_range("cbe: ones count exceeds length");
	}
	CbeVector v;
	v.bits.assign(length, 0);
	std::fill_n(v.bits.begin(), ones, std::uint8_t{1});
	v.ones = ones;
	return v;
}

double BinDistribution::prob(std::size_t m) const
{
	return std::exp(log_probs.at(m));
}

Scale mean_scale(std::span<const double> context)
{
	if (context.empty()) {
		throw std::invalid_argument("empty context");
	}
	double sum = 0.0;
	for (double x : context) {
		sum += std::abs(x);
	}
	if (!std::isfinite(sum)) {
		throw std::invalid_argument("mean_scale: non-finite context value");
	}
	if (sum == 0.0) {
		return Scale{1.0};
	}
	return Scale{sum / static_cast<double>(context.size())};
}

std::size_t ones_count(double scaled, const Binning& binning)
{
	if (!std::isfinite(scaled)) {
		throw std::invalid_argument("encode: non-finite value");
	}
	const std::size_t bins = binning.bins();
	if (scaled < binning.lower()) {
		return 0;
	}
	if (scaled >= binning.upper()) {
		return bins;
	}
	const double pos = std::floor((scaled - binning.lower()) / binning.width());
	std::size_t m = pos < 0.0 ? 0 : std::min<std::size_t>(bins, static_cast<std::size_t>(pos) + 1);
	// Reconcile with the exact edge comparisons.
	while (m < bins && scaled >= binning.edge(m)) {
		++m;
	}
	while (m > 0 && scaled < binning.edge(m - 1)) {
		--m;
	}
	return m;
}

CbeVector encode(double scaled, const Binning& binning)
{
	return CbeVector::with_ones(binning.bins(), ones_count(scaled, binning));
}

double decode(std::size_t ones, const Binning& binning)
{
	if (ones > binning.bins()) {
		throw std::out_of_range("decode: ones count " + std::to_string(ones) + " exceeds bin count");
	}
	if (ones == 0) {
		return binning.lower();
	}
	return 0.5 * (binning.edge(ones - 1) + binning.edge(ones));
}

double log_sum_exp(std::span<const double> values)
{
	if (values.empty()) {
		return -std::numeric_limits<double>::infinity();
	}
	const double max_value = *std::max_element(values.begin(), values.end());
	if (!std::isfinite(max_value)) {
		return max_value;
	}
	double sum = 0.0;
	for (double v : values) {
		sum += std::exp(v - max_value);
	}
	return max_value + std::log(sum);
}

BinDistribution valid_sequence_log_probs(std::span<const double> probs)
{
	constexpr double slack = 1e-9;
	const std::size_t bins = probs.size();
	if (bins == 0) {
		throw std::invalid_argument("valid_sequence_log_probs: empty probability vector");
	}

	// log_hat[m] = sum_{i<m} log p_i + sum_{i>=m} log(1 - p_i)
	std::vector<double> log_p(bins);
	std::vector<double> log_q(bins);
	for (std::size_t i = 0; i < bins; ++i) {
		const double p = probs[i];
		if (!(p >= -slack && p <= 1.0 + slack)) {
			throw std::invalid_argument("valid_sequence_log_probs: probability out of [0, 1] at index " +
			                            std::to_string(i));
		}
		const double clamped = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
		log_p[i] = std::log(clamped);
		log_q[i] = std::log1p(-clamped);
	}

	std::vector<double> log_hat(bins + 1, 0.0);
	double suffix = 0.0;
	for (std::size_t m = bins; m-- > 0;) {
		suffix += log_q[m];
		log_hat[m] = suffix;
	}
	double prefix = 0.0;
	for (std::size_t m = 1; m <= bins; ++m) {
		prefix += log_p[m - 1];
		log_hat[m] += prefix;
	}

	BinDistribution dist;
	dist.log_normalizer = log_sum_exp(log_hat);
	dist.log_probs.resize(bins + 1);
	for (std::size_t m = 0; m <= bins; ++m) {
		dist.log_probs[m] = log_hat[m] - dist.log_normalizer;
	}
	return dist;
}

std::size_t argmax_bin(const BinDistribution& dist)
{
	const auto& lp = dist.log_probs;
	return static_cast<std::size_t>(std::max_element(lp.begin(), lp.end()) - lp.begin());
}

std::size_t sample_bin(const BinDistribution& dist, Rng& rng)
{
	const double u = rng.uniform();
	double cdf = 0.0;
	const std::size_t last = dist.log_probs.size() - 1;
	for (std::size_t m = 0; m < last; ++m) {
		cdf += std::exp(dist.log_probs[m]);
		if (u < cdf) {
			return m;
		}
	}
	return last;
}

std::vector<std::size_t> sample_bins(const BinDistribution& dist, Rng& rng, std::size_t n)
{
	if (n == 0) {
		throw std::invalid_argument("sample_bins: n must be positive");
	}
	std::vector<double> cdf(dist.log_probs.size());
	double acc = 0.0;
	for (std::size_t m = 0; m < cdf.size(); ++m) {
		acc += std::exp(dist.log_probs[m]);
		cdf[m] = acc;
	}
	std::vector<std::size_t> draws(n);
	for (auto& d : draws) {
		const double u = rng.uniform();
		const auto it = std::upper_bound(cdf.begin(), cdf.end() - 1, u);
		d = static_cast<std::size_t>(it - cdf.begin());
	}
	return draws;
}

} // namespace binconv
