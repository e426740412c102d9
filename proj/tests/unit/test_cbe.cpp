#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <numeric>
#include <vector>

#include "binconv/cbe.hpp"
#include "oracles.hpp"

using namespace binconv;

namespace {

std::vector<std::uint8_t> bits(std::initializer_list<int> v)
{
	return std::vector<std::uint8_t>(v.begin(), v.end());
}

} // namespace

TEST_CASE("mean_scale")
{
	const std::vector<double> a{1.0, -2.0, 3.0};
	CHECK(mean_scale(a).value == doctest::Approx(2.0));
	const std::vector<double> zeros{0.0, 0.0, 0.0};
	CHECK(mean_scale(zeros).value == 1.0);
	const std::vector<double> one{5.0};
	CHECK(mean_scale(one).value == 5.0);
	CHECK_THROWS_WITH_AS(mean_scale(std::vector<double>{}), "empty context", std::invalid_argument);
}

TEST_CASE("encode follows the figure's four-bin example")
{
	const Binning four(0.0, 4.0, 4);
	CHECK(encode(2.5, four).bits == bits({1, 1, 1, 0}));
	CHECK(encode(2.5, four).ones == 3);
	CHECK(encode(4.0, four).bits == bits({1, 1, 1, 1}));
	CHECK(encode(0.0, four).bits == bits({1, 0, 0, 0}));
	CHECK(encode(-0.1, four).ones == 0);
	CHECK(encode(1.0, four).ones == 2); // exactly on an edge counts as reached

	const Binning wide(-5.0, 5.0, 1000);
	const CbeVector low = encode(-7.0, wide);
	CHECK(low.ones == 0);
	CHECK(std::accumulate(low.bits.begin(), low.bits.end(), 0) == 0);
	CHECK(encode(123.0, wide).ones == 1000);

	CHECK_THROWS_AS(encode(std::nan(""), wide), std::invalid_argument);
	CHECK_THROWS_AS(encode(INFINITY, wide), std::invalid_argument);
}

TEST_CASE("encoded vectors are always monotone 1...10...0")
{
	const Binning b(-5.0, 5.0, 1000);
	Rng rng(3);
	for (int i = 0; i < 500; ++i) {
		const double x = -7.0 + 14.0 * rng.uniform();
		const CbeVector v = encode(x, b);
		std::size_t ones = 0;
		bool seen_zero = false;
		for (auto bit : v.bits) {
			if (bit == 0) {
				seen_zero = true;
			} else {
				REQUIRE_FALSE(seen_zero);
				++ones;
			}
		}
		CHECK(ones == v.ones);
		// ones = number of edges b_0..b_{D-1} not above x
		std::size_t expected = 0;
		for (std::size_t d = 0; d < b.bins(); ++d) {
			expected += x >= b.lower() + static_cast<double>(d) * b.width() ? 1 : 0;
		}
		CHECK(v.ones == expected);
	}
}

TEST_CASE("decode")
{
	const Binning four(0.0, 4.0, 4);
	CHECK(decode(3, four) == 2.5);
	CHECK(decode(4, four) == 3.5);
	CHECK(decode(0, Binning(-5.0, 5.0, 1000)) == -5.0);
	CHECK_THROWS_AS(decode(5, four), std::out_of_range);
}

TEST_CASE("decode(encode(x)) stays within half a bin")
{
	const Binning b(-5.0, 5.0, 1000);
	Rng rng(11);
	double worst = 0.0;
	for (int i = 0; i < 10000; ++i) {
		const double x = b.lower() + (b.upper() - b.lower()) * rng.uniform();
		worst = std::max(worst, std::abs(decode(encode(x, b).ones, b) - x));
	}
	CHECK(worst <= b.width() / 2.0 + 1e-12);
}

TEST_CASE("valid sequence probabilities: worked example")
{
	const std::vector<double> p{0.4, 0.9, 0.2};
	const BinDistribution dist = valid_sequence_log_probs(p);
	REQUIRE(dist.outcomes() == 4);
	CHECK(std::exp(dist.log_normalizer) == doctest::Approx(0.44).epsilon(1e-9));
	CHECK(dist.prob(0) == doctest::Approx(0.109).epsilon(0.01));
	CHECK(dist.prob(1) == doctest::Approx(0.073).epsilon(0.01));
	CHECK(dist.prob(2) == doctest::Approx(0.654).epsilon(0.01));
	CHECK(dist.prob(3) == doctest::Approx(0.164).epsilon(0.01));
	CHECK(argmax_bin(dist) == 2);
}

TEST_CASE("valid sequence probabilities: symmetry and limits")
{
	const BinDistribution half = valid_sequence_log_probs(std::vector<double>{0.5, 0.5, 0.5});
	for (std::size_t m = 0; m <= 3; ++m) {
		CHECK(half.prob(m) == doctest::Approx(0.25).epsilon(1e-12));
	}
	CHECK(argmax_bin(half) == 0);

	const BinDistribution high = valid_sequence_log_probs(std::vector<double>(20, 1.0 - 1e-6));
	CHECK(argmax_bin(high) == 20);

	const BinDistribution hard = valid_sequence_log_probs(std::vector<double>{1.0, 0.0, 1.0, 0.0});
	double total = 0.0;
	for (std::size_t m = 0; m < hard.outcomes(); ++m) {
		total += hard.prob(m);
		CHECK(std::isfinite(hard.log_probs[m]));
	}
	CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

	CHECK_THROWS_AS(valid_sequence_log_probs(std::vector<double>{0.5, 1.1}), std::invalid_argument);
	CHECK_THROWS_AS(valid_sequence_log_probs(std::vector<double>{-0.01}), std::invalid_argument);
	CHECK_THROWS_AS(valid_sequence_log_probs(std::vector<double>{}), std::invalid_argument);
	CHECK_NOTHROW(valid_sequence_log_probs(std::vector<double>{1.0 + 1e-10, -1e-10}));
}

TEST_CASE("valid sequence probabilities match brute-force enumeration")
{
	Rng rng(5);
	double worst = 0.0;
	for (int trial = 0; trial < 200; ++trial) {
		const std::size_t d = 1 + rng.below(12);
		std::vector<double> p(d);
		for (auto& v : p) {
			v = 0.02 + 0.96 * rng.uniform();
		}
		const auto expected = oracle::valid_sequence_probs(p);
		const auto dist = valid_sequence_log_probs(p);
		for (std::size_t m = 0; m <= d; ++m) {
			worst = std::max(worst, std::abs(dist.prob(m) - expected[m]));
		}
	}
	CHECK(worst < 1e-12);
}

TEST_CASE("log_sum_exp")
{
	const std::vector<double> v{1000.0, 1000.0};
	CHECK(log_sum_exp(v) == doctest::Approx(1000.0 + std::log(2.0)));
	const std::vector<double> w{-1000.0, std::log(3.0) - 1000.0};
	CHECK(log_sum_exp(w) == doctest::Approx(-1000.0 + std::log(4.0)));
}

TEST_CASE("sampling")
{
	const BinDistribution fig = valid_sequence_log_probs(std::vector<double>{0.4, 0.9, 0.2});
	Rng rng(42);
	const auto draws = sample_bins(fig, rng, 100000);
	const auto hits = std::count(draws.begin(), draws.end(), std::size_t{2});
	CHECK(static_cast<double>(hits) / 100000.0 == doctest::Approx(0.654).epsilon(0.01 / 0.654));

	BinDistribution point;
	point.log_probs = {-INFINITY, -INFINITY, 0.0, -INFINITY};
	Rng r2(1);
	for (auto m : sample_bins(point, r2, 1000)) {
		REQUIRE(m == 2);
	}

	Rng a(9), b(9);
	CHECK(sample_bins(fig, a, 256) == sample_bins(fig, b, 256));
	Rng c(9), d(9);
	CHECK(sample_bin(fig, c) == sample_bins(fig, d, 1)[0]);
}
