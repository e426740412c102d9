#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <vector>

#include "binconv/gradcheck.hpp"
#include "binconv/gradient_suite.hpp"
#include "binconv/model.hpp"

using namespace binconv;

namespace {

bool within(double value, double reference, double fraction)
{
	return std::abs(value - reference) <= fraction * reference;
}

std::vector<double> ramp_context(std::size_t n, double lo, double hi)
{
	std::vector<double> v(n);
	for (std::size_t i = 0; i < n; ++i) {
		v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n);
	}
	return v;
}

GradCheckReport check_variant(VariantKind kind, BinConvConfig config, std::size_t probes)
{
	BinConvModel<double> model(config, kind, 17);
	const Tensor<double> x = model.encode_input(ramp_context(config.context_length, config.lower, config.upper));
	const CbeVector target = CbeVector::with_ones(config.bins, config.bins / 2);
	model.zero_grad();
	BinConvModel<double>::Trace trace;
	Rng rng(3);
	const auto logits = model.forward(x, true, rng, trace);
	model.backward(trace, model.loss(logits, target).grad);
	auto loss = [&] {
		Rng r(3);
		return model.loss(model.forward(x, true, r), target).value;
	};
	std::vector<GradCheckInput> inputs;
	for (auto* p : model.parameters()) {
		inputs.push_back(GradCheckInput{p->name, p->value.data(), p->grad.data()});
	}
	GradCheckOptions opt;
	opt.total_probes = probes;
	opt.seed = 5;
	return grad_check(loss, inputs, opt);
}

} // namespace

TEST_CASE("parameter counts track the published configurations")
{
	const BinConvConfig daily = BinConvConfig::univariate(42);
	const BinConvConfig weekly = BinConvConfig::univariate(39);
	CHECK(within(static_cast<double>(param_count(daily)), 20173.0, 0.10));
	CHECK(within(static_cast<double>(param_count(weekly)), 17680.0, 0.10));
	CHECK(within(static_cast<double>(param_count(BinConvConfig::univariate(72))), 54013.0, 0.10));
	CHECK(within(static_cast<double>(param_count(daily, VariantKind::fc_head)), 1019540.0, 0.10));
	CHECK(within(static_cast<double>(param_count(daily, VariantKind::standard_conv)), 51679.0, 0.10));

	for (auto kind : {VariantKind::standard, VariantKind::fc_head, VariantKind::standard_conv, VariantKind::one_hot}) {
		BinConvConfig small = BinConvConfig::univariate(6);
		small.bins = 20;
		const BinConvModel<float> m(small, kind, 1);
		CHECK(m.parameter_count() == param_count(small, kind));
	}
}

TEST_CASE("config validation")
{
	BinConvConfig c = BinConvConfig::univariate(6);
	c.channels = 4; // does not divide C = 6
	CHECK_THROWS_AS(c.validate(), std::invalid_argument);
	CHECK_NOTHROW(c.validate(VariantKind::standard_conv));
	CHECK_THROWS_AS(BinConvModel<float>(c, VariantKind::standard, 0), std::invalid_argument);
	c.channels = 3;
	CHECK_NOTHROW(c.validate());
	c.head_kernel = 4;
	CHECK_THROWS_AS(c.validate(), std::invalid_argument);
	CHECK_THROWS_AS(parse_variant("wide"), std::invalid_argument);
	CHECK(parse_variant("fc_head") == VariantKind::fc_head);
	CHECK(BinConvConfig::multivariate(10).bins == 500);
}

TEST_CASE("initialization is deterministic and seed dependent")
{
	BinConvConfig c = BinConvConfig::univariate(6);
	c.bins = 30;
	const BinConvModel<float> a(c, VariantKind::standard, 9);
	const BinConvModel<float> b(c, VariantKind::standard, 9);
	const BinConvModel<float> other(c, VariantKind::standard, 10);
	const auto pa = a.parameters();
	const auto pb = b.parameters();
	const auto po = other.parameters();
	bool differs = false;
	for (std::size_t i = 0; i < pa.size(); ++i) {
		CHECK(pa[i]->value == pb[i]->value);
		differs = differs || !(pa[i]->value == po[i]->value);
	}
	CHECK(differs);
	CHECK(a.blocks()[0].dytanh_alpha.value[0] == 0.5f);
	CHECK(a.blocks()[0].dytanh_gamma.value[0] == 1.0f);
	CHECK(a.blocks()[0].dytanh_beta.value[0] == 0.0f);

	const double bound = 1.0 / std::sqrt(static_cast<double>(c.context_length * c.conv2d_kernel));
	for (float w : a.blocks()[0].conv2d_kernels.value.data()) {
		REQUIRE(std::abs(static_cast<double>(w)) <= bound);
	}
}

TEST_CASE("forward shapes and determinism")
{
	BinConvConfig c = BinConvConfig::univariate(6);
	c.bins = 40;
	c.lower = -2.0;
	c.upper = 2.0;
	for (auto kind : {VariantKind::standard, VariantKind::fc_head, VariantKind::standard_conv, VariantKind::one_hot}) {
		CAPTURE(variant_name(kind));
		const BinConvModel<float> m(c, kind, 2);
		const auto x = m.encode_input(ramp_context(6, -1.5, 1.5));
		CHECK(x.shape() == Shape{6, 40});
		const auto y = m.predict(x);
		CHECK(y.shape() == Shape{40});
		CHECK(m.predict(x) == y);
		Rng r1(4), r2(4);
		CHECK(m.forward(x, true, r1) == m.forward(x, true, r2));
		const BinDistribution d = m.distribution(y);
		CHECK(d.outcomes() == 41);
		double total = 0.0;
		for (std::size_t i = 0; i < d.outcomes(); ++i) {
			total += d.prob(i);
		}
		CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
	}
	const BinConvModel<float> m(c, VariantKind::standard, 2);
	CHECK_THROWS_AS(m.predict(Tensor<float>(Shape{5, 40})), std::invalid_argument);
	CHECK_THROWS_AS(m.encode_input(std::vector<double>(5, 0.0)), std::invalid_argument);
}

TEST_CASE("input encodings")
{
	BinConvConfig c = BinConvConfig::univariate(2);
	c.bins = 4;
	c.lower = 0.0;
	c.upper = 4.0;
	c.channels = 2;
	const std::vector<double> ctx{2.5, -1.0};
	const auto cbe = BinConvModel<double>(c, VariantKind::standard, 0).encode_input(ctx);
	CHECK(std::vector<double>(cbe.row(0).begin(), cbe.row(0).end()) == std::vector<double>{1, 1, 1, 0});
	CHECK(std::vector<double>(cbe.row(1).begin(), cbe.row(1).end()) == std::vector<double>{0, 0, 0, 0});
	const auto hot = BinConvModel<double>(c, VariantKind::one_hot, 0).encode_input(ctx);
	CHECK(std::vector<double>(hot.row(0).begin(), hot.row(0).end()) == std::vector<double>{0, 0, 1, 0});
	CHECK(std::vector<double>(hot.row(1).begin(), hot.row(1).end()) == std::vector<double>{1, 0, 0, 0});
	CHECK(one_hot_class(0, 4) == 0);
	CHECK(one_hot_class(4, 4) == 3);
}

TEST_CASE("a zeroed model emits zero logits")
{
	BinConvConfig c = BinConvConfig::univariate(4);
	c.bins = 16;
	BinConvModel<double> m(c, VariantKind::standard, 1);
	for (auto* p : m.parameters()) {
		p->value.fill(0.0);
	}
	const auto y = m.predict(m.encode_input(ramp_context(4, -3, 3)));
	for (double v : y.data()) {
		CHECK(v == 0.0);
	}
	const BinDistribution d = m.distribution(y);
	CHECK(d.prob(0) == doctest::Approx(1.0 / 17.0));
}

TEST_CASE("gradient suite passes")
{
	for (const auto& c : run_gradient_suite(0)) {
		CAPTURE(c.name);
		CAPTURE(c.report.max_relative_error);
		CHECK(c.passed());
	}
}

TEST_CASE("variant gradients match finite differences")
{
	BinConvConfig c = tiny_model_config();
	c.blocks = 2;
	for (auto kind : {VariantKind::standard, VariantKind::fc_head, VariantKind::standard_conv, VariantKind::one_hot}) {
		CAPTURE(variant_name(kind));
		const GradCheckReport r = check_variant(kind, c, 64);
		CAPTURE(r.worst_input);
		CHECK(r.max_relative_error < kModelGradTolerance);
	}
	// Block composite at the default depth with 32 random probes.
	BinConvConfig deeper = tiny_model_config();
	deeper.blocks = 3;
	CHECK(check_variant(VariantKind::standard, deeper, 32).max_relative_error < kModelGradTolerance);
}
