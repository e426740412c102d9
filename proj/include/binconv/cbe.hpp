#pragma once

// Cumulative binary encoding (CBE) of scaled values and the conversion of
// per-bin Bernoulli probabilities into a distribution over valid encodings.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "binconv/rng.hpp"

namespace binconv {

// Uniform quantization grid over [lower, upper] with `bins` cells.
// Edge d is lower + d * width() for d in 0..bins.
class Binning {
public:
	Binning(double lower, double upper, std::size_t bins);

	double lower() const { return lower_; }
	double upper() const { return upper_; }
	std::size_t bins() const { return bins_; }
	double width() const { return (upper_ - lower_) / static_cast<double>(bins_); }
	double edge(std::size_t d) const;

	bool operator==(const Binning&) const = default;

private:
	double lower_;
	double upper_;
	std::size_t bins_;
};

// Monotone bit pattern 1...10...0; `ones` leading bits are set.
struct CbeVector {
	std::vector<std::uint8_t> bits;
	std::size_t ones = 0;

	static CbeVector with_ones(std::size_t length, std::size_t ones);
};

// Mean absolute value of a context window.
struct Scale {
	double value = 1.0;
};

// Normalized log-probabilities over outcomes m = 0..D (m = number of ones).
struct BinDistribution {
	std::vector<double> log_probs;
	double log_normalizer = 0.0;

	std::size_t outcomes() const { return log_probs.size(); }
	double prob(std::size_t m) const;
};

// s = mean |x|; falls back to 1 for an all-zero context.
Scale mean_scale(std::span<const double> context);

// v_d = 1 iff x >= edge(d - 1), d = 1..D. Values at or above upper() give all ones.
CbeVector encode(double scaled, const Binning& binning);

// Number of ones in the encoding of `scaled` (same rule as encode()).
std::size_t ones_count(double scaled, const Binning& binning);

// Midpoint of the bin ending at edge m; m = 0 clamps to lower().
double decode(std::size_t ones, const Binning& binning);

inline constexpr double kProbabilityClamp = 1e-12;

// log p(e_m) for every valid encoding e_m given independent per-bit
// probabilities p_i, normalized over the D + 1 valid encodings. O(D).
BinDistribution valid_sequence_log_probs(std::span<const double> probs);

// Smallest m attaining the maximum probability.
std::size_t argmax_bin(const BinDistribution& dist);

// Draws by inverse CDF; `sample_bin` is a single draw.
std::size_t sample_bin(const BinDistribution& dist, Rng& rng);
std::vector<std::size_t> sample_bins(const BinDistribution& dist, Rng& rng, std::size_t n);

// Numerically stable log(sum(exp(values))).
double log_sum_exp(std::span<const double> values);

} // namespace binconv
