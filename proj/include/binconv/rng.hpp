#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace binconv {

// Mixes a base seed with up to two stream indices (splitmix64 finalizer).
// Used to give every epoch, batch item and trajectory its own stream.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

// Seeded generator with platform-independent conversions. std::*_distribution
// output is implementation-defined, so uniform/normal are derived from raw
// engine bits here.
class Rng {
public:
	explicit Rng(std::uint64_t seed) : engine_(seed) {}

	std::uint64_t next_u64() { return engine_(); }

	// Uniform in [0, 1) with 53 random bits.
	double uniform();

	// Standard normal via Box-Muller; caches the second variate.
	double normal();

	// Uniform integer in [0, n).
	std::size_t below(std::size_t n);

private:
	std::mt19937_64 engine_;
	double spare_ = 0.0;
	bool has_spare_ = false;
};

// Fisher-Yates shuffle driven by Rng::below.
void shuffle_indices(std::span<std::size_t> indices, Rng& rng);

} // namespace binconv
