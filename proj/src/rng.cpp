#include "binconv/rng.hpp"

#include <cmath>
#include <numbers>
#include <utility>

namespace binconv {

namespace {

std::uint64_t splitmix64(std::uint64_t x)
{
	x += 0x9E3779B97F4A7C15ULL;
	x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
	x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
	return x ^ (x >> 31);
}

} // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b)
{
	std::uint64_t h = splitmix64(base);
	h = splitmix64(h ^ (a + 0x632BE59BD9B4E019ULL));
	h = splitmix64(h ^ (b + 0x85157AF5ULL));
	return h;
}

double Rng::uniform()
{
	return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal()
{
	if (has_spare_) {
		has_spare_ = false;
		return spare_;
	}
	double u1 = uniform();
	while (u1 <= 0.0) {
		u1 = uniform();
	}
	const double u2 = uniform();
	const double radius = std::sqrt(-2.0 * std::log(u1));
	const double angle = 2.0 * std::numbers::pi * u2;
	spare_ = radius * std::sin(angle);
	has_spare_ = true;
	return radius * std::cos(angle);
}

std::size_t Rng::below(std::size_t n)
{
	if (n <= 1) {
		return 0;
	}
	// Rejection sampling removes modulo bias.
	const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
	std::uint64_t x = engine_();
	while (x >= limit) {
		x = engine_();
	}
	return static_cast<std::size_t>(x % n);
}

void shuffle_indices(std::span<std::size_t> indices, Rng& rng)
{
	for (std::size_t i = indices.size(); i > 1; --i) {
		const std::size_t j = rng.below(i);
		std::swap(indices[i - 1], indices[j]);
	}
}

} // namespace binconv
