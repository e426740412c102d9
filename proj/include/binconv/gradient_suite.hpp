#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "binconv/gradcheck.hpp"
#include "binconv/model.hpp"

namespace binconv {

inline constexpr double kLayerGradTolerance = 1e-4;
inline constexpr double kModelGradTolerance = 1e-3;

struct GradientCase {
	std::string name;
	GradCheckReport report;
	double tolerance = 0.0;

	bool passed() const { return report.probes > 0 && report.max_relative_error < tolerance; }
};

// Tiny double-precision configuration used by the end-to-end check:
// C = 4, D = 12, K = 4, one block, head kernel 3.
BinConvConfig tiny_model_config();

// Central-difference checks of every layer and of one tiny model, all in
// double precision. Deterministic in `seed`.
std::vector<GradientCase> run_gradient_suite(std::uint64_t seed = 0);

} // namespace binconv
