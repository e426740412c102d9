#include "binconv/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "binconv/rng.hpp"

namespace binconv {

namespace {

double probe(const std::function<double()>& loss, const GradCheckInput& input, std::size_t index, double h,
             double floor, GradCheckReport& report)
{
	double& x = input.values[index];
	const double saved = x;
	x = saved + h;
	const double plus = loss();
	x = saved - h;
	const double minus = loss();
	x = saved;
	const double numeric = (plus - minus) / (2.0 * h);
	const double analytic = input.analytic[index];
	const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
	const double err = std::abs(analytic - numeric) / denom;
	++report.probes;
	if (err > report.max_relative_error || !std::isfinite(err)) {
		report.max_relative_error = std::isfinite(err) ? err : INFINITY;
		report.worst_input = input.name;
		report.worst_index = index;
	}
	return err;
}

} // namespace

GradCheckReport grad_check(const std::function<double()>& loss, std::span<const GradCheckInput> inputs,
                           const GradCheckOptions& options)
{
	for (const auto& in : inputs) {
		if (in.values.size() != in.analytic.size()) {
			throw std::invalid_argument("grad_check: gradient size mismatch for " + in.name);
		}
	}
	GradCheckReport report;
	Rng rng(options.seed);
	if (options.total_probes > 0) {
		std::size_t total = 0;
		for (const auto& in : inputs) {
			total += in.values.size();
		}
		if (total == 0) {
			return report;
		}
		for (std::size_t p = 0; p < options.total_probes; ++p) {
			std::size_t flat = rng.below(total);
			for (const auto& in : inputs) {
				if (flat < in.values.size()) {
					probe(loss, in, flat, options.step, options.denominator_floor, report);
					break;
				}
				flat -= in.values.size();
			}
		}
		return report;
	}
	for (const auto& in : inputs) {
		const std::size_t n = in.values.size();
		if (options.probes_per_input == 0 || options.probes_per_input >= n) {
			for (std::size_t i = 0; i < n; ++i) {
				probe(loss, in, i, options.step, options.denominator_floor, report);
			}
		} else {
			for (std::size_t p = 0; p < options.probes_per_input; ++p) {
				probe(loss, in, rng.below(n), options.step, options.denominator_floor, report);
			}
		}
	}
	return report;
}

} // namespace binconv
