#include "binconv/gradient_suite.hpp"

#include <span>

#include "binconv/ops.hpp"
#include "binconv/rng.hpp"

namespace binconv {

namespace {

using TensorD = Tensor<double>;

TensorD random_tensor(const Shape& shape, Rng& rng, double scale = 1.0)
{
	TensorD t(shape);
	for (auto& v : t.data()) {
		v = scale * (2.0 * rng.uniform() - 1.0);
	}
	return t;
}

// Scalar objective sum(w * y) so the upstream gradient is w itself.
double weighted_sum(const TensorD& y, const TensorD& w)
{
	double acc = 0.0;
	for (std::size_t i = 0; i < y.size(); ++i) {
		acc += y[i] * w[i];
	}
	return acc;
}

GradCheckInput input(const char* name, TensorD& values, const TensorD& grad)
{
	return GradCheckInput{name, values.data(), grad.data()};
}

GradientCase finish(std::string name, const std::function<double()>& loss, std::vector<GradCheckInput> inputs,
                    double tolerance)
{
	GradCheckOptions options;
	return GradientCase{std::move(name), grad_check(loss, inputs, options), tolerance};
}

GradientCase check_conv2d(Rng& rng)
{
	const std::size_t c = 4, k = 4, s = 3, d = 12;
	TensorD x = random_tensor({c, d + s - 1}, rng);
	TensorD w = random_tensor({k, 1, c, s}, rng, 0.5);
	TensorD b = random_tensor({k}, rng, 0.5);
	const TensorD up = random_tensor({k, d}, rng);
	TensorD gx, gw(w.shape()), gb(b.shape());
	ops::conv2d_full_context_backward(x, w, up, &gx, gw, gb);
	auto loss = [&] { return weighted_sum(ops::conv2d_full_context(x, w, b), up); };
	return finish("conv2d_full_context", loss, {input("x", x, gx), input("kernels", w, gw), input("bias", b, gb)},
	              kLayerGradTolerance);
}

GradientCase check_conv1d(Rng& rng, std::size_t groups, const char* name)
{
	const std::size_t cin = 4, cout = 4, s = 3, d = 12;
	TensorD x = random_tensor({cin, d + s - 1}, rng);
	TensorD w = random_tensor({cout, cin / groups, s}, rng, 0.5);
	TensorD b = random_tensor({cout}, rng, 0.5);
	const TensorD up = random_tensor({cout, d}, rng);
	TensorD gx, gw(w.shape()), gb(b.shape());
	ops::grouped_conv1d_backward(x, w, groups, up, &gx, gw, gb);
	auto loss = [&] { return weighted_sum(ops::grouped_conv1d(x, w, b, groups), up); };
	return finish(name, loss, {input("x", x, gx), input("kernels", w, gw), input("bias", b, gb)},
	              kLayerGradTolerance);
}

GradientCase check_dytanh(Rng& rng)
{
	const std::size_t k = 4, d = 12;
	TensorD x = random_tensor({k, d}, rng, 2.0);
	TensorD alpha(Shape{1}, 0.5);
	TensorD gamma = random_tensor({k}, rng);
	TensorD beta = random_tensor({k}, rng);
	const TensorD up = random_tensor({k, d}, rng);
	TensorD gx, ga(alpha.shape()), gg(gamma.shape()), gbeta(beta.shape());
	ops::dytanh_backward(x, alpha, gamma, up, &gx, ga, gg, gbeta);
	auto loss = [&] { return weighted_sum(ops::dytanh(x, alpha, gamma, beta), up); };
	return finish("dytanh", loss,
	              {input("x", x, gx), input("alpha", alpha, ga), input("gamma", gamma, gg), input("beta", beta, gbeta)},
	              kLayerGradTolerance);
}

// relu(conv1d(x)) with depthwise kernels: exercises the relu mask inside a chain.
GradientCase check_relu_composite(Rng& rng)
{
	const std::size_t k = 4, s = 3, d = 12;
	TensorD x = random_tensor({k, d + s - 1}, rng);
	TensorD w = random_tensor({k, 1, s}, rng);
	TensorD b = random_tensor({k}, rng, 0.2);
	const TensorD up = random_tensor({k, d}, rng);
	const TensorD pre = ops::grouped_conv1d(x, w, b, k);
	TensorD gx, gw(w.shape()), gb(b.shape());
	ops::grouped_conv1d_backward(x, w, k, ops::relu_backward(pre, up), &gx, gw, gb);
	auto loss = [&] { return weighted_sum(ops::relu(ops::grouped_conv1d(x, w, b, k)), up); };
	return finish("relu_composite", loss, {input("x", x, gx), input("kernels", w, gw), input("bias", b, gb)},
	              kLayerGradTolerance);
}

GradientCase check_bce(Rng& rng)
{
	const std::size_t d = 12;
	TensorD logits = random_tensor({d}, rng, 3.0);
	const CbeVector target = CbeVector::with_ones(d, 5);
	const ops::Loss<double> l = ops::bce_with_logits(logits, target);
	const TensorD grad = l.grad;
	auto loss = [&] { return ops::bce_with_logits(logits, target).value; };
	return finish("bce_loss", loss, {input("logits", logits, grad)}, kLayerGradTolerance);
}

GradientCase check_model(std::uint64_t seed)
{
	const BinConvConfig config = tiny_model_config();
	BinConvModel<double> model(config, VariantKind::standard, seed);
	Rng data_rng(derive_seed(seed, 7));
	std::vector<double> context(config.context_length);
	for (auto& v : context) {
		v = config.lower + (config.upper - config.lower) * data_rng.uniform();
	}
	const TensorD x = model.encode_input(context);
	const CbeVector target = CbeVector::with_ones(config.bins, 7);
	const std::uint64_t mask_seed = derive_seed(seed, 8);

	model.zero_grad();
	BinConvModel<double>::Trace trace;
	Rng rng(mask_seed);
	const TensorD logits = model.forward(x, true, rng, trace);
	model.backward(trace, model.loss(logits, target).grad);

	auto loss = [&] {
		Rng r(mask_seed);
		return model.loss(model.forward(x, true, r), target).value;
	};
	std::vector<GradCheckInput> inputs;
	for (Parameter<double>* p : model.parameters()) {
		inputs.push_back(GradCheckInput{p->name, p->value.data(), p->grad.data()});
	}
	return finish("end_to_end_tiny_model", loss, std::move(inputs), kModelGradTolerance);
}

} // namespace

BinConvConfig tiny_model_config()
{
	BinConvConfig c = BinConvConfig::univariate(4);
	c.bins = 12;
	c.lower = -3.0;
	c.upper = 3.0;
	c.channels = 4;
	c.blocks = 1;
	c.head_kernel = 3;
	return c;
}

std::vector<GradientCase> run_gradient_suite(std::uint64_t seed)
{
	Rng rng(derive_seed(seed, 1));
	std::vector<GradientCase> cases;
	cases.push_back(check_conv2d(rng));
	cases.push_back(check_conv1d(rng, 1, "grouped_conv1d_g1"));
	cases.push_back(check_conv1d(rng, 4, "grouped_conv1d_gK"));
	cases.push_back(check_dytanh(rng));
	cases.push_back(check_relu_composite(rng));
	cases.push_back(check_bce(rng));
	cases.push_back(check_model(seed));
	return cases;
}

} // namespace binconv
