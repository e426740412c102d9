#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace binconv {

// One differentiable input: its values (perturbed in place) and the
// analytic gradient of the scalar loss with respect to them.
struct GradCheckInput {
	std::string name;
	std::span<double> values;
	std::span<const double> analytic;
};

struct GradCheckOptions {
	double step = 1e-5;
	// Coordinates probed per input; 0 probes every coordinate.
	std::size_t probes_per_input = 0;
	// Total probes drawn across all inputs (overrides probes_per_input when > 0).
	std::size_t total_probes = 0;
	std::uint64_t seed = 0;
	// Relative error uses max(|analytic|, |numeric|, floor) as denominator.
	double denominator_floor = 1e-6;
};

struct GradCheckReport {
	double max_relative_error = 0.0;
	std::string worst_input;
	std::size_t worst_index = 0;
	std::size_t probes = 0;
};

// Central differences of `loss` on the probed coordinates, compared with the
// analytic gradient. `loss` must be a pure function of the input values.
GradCheckReport grad_check(const std::function<double()>& loss, std::span<const GradCheckInput> inputs,
                           const GradCheckOptions& options = {});

} // namespace binconv
