#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace binconv {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape)
{
	return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape);

// Dense row-major array. T is float for training runs and double for
// gradient checks; reductions accumulate in double regardless.
template <typename T>
class Tensor {
public:
	using value_type = T;

	Tensor() = default;

	explicit Tensor(Shape shape, T fill = T{0})
		: shape_(std::move(shape)), data_(shape_size(shape_), fill)
	{
	}

	Tensor(Shape shape, std::vector<T> data)
		: shape_(std::move(shape)), data_(std::move(data))
	{
		if (shape_size(shape_) != data_.size()) {
			throw std::invalid_argument("tensor: data length does not match shape " + shape_to_string(shape_));
		}
	}

	const Shape& shape() const { return shape_; }
	std::size_t rank() const { return shape_.size(); }
	std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
	std::size_t size() const { return data_.size(); }
	bool empty() const { return data_.empty(); }

	std::span<T> data() { return data_; }
	std::span<const T> data() const { return data_; }
	T* ptr() { return data_.data(); }
	const T* ptr() const { return data_.data(); }

	T& operator[](std::size_t i) { return data_[i]; }
	const T& operator[](std::size_t i) const { return data_[i]; }

	// Row r of the trailing axis, treating the tensor as [size / last, last].
	std::span<T> row(std::size_t r)
	{
		const std::size_t n = shape_.back();
		return std::span<T>(data_).subspan(r * n, n);
	}
	std::span<const T> row(std::size_t r) const
	{
		const std::size_t n = shape_.back();
		return std::span<const T>(data_).subspan(r * n, n);
	}

	void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

	// Same data, new shape of equal size.
	Tensor reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

	template <typename U>
	Tensor<U> cast() const
	{
		return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
	}

	bool operator==(const Tensor&) const = default;

private:
	Shape shape_;
	std::vector<T> data_;
};

// Trainable tensor with its gradient and Adam moment buffers.
template <typename T>
struct Parameter {
	std::string name;
	Tensor<T> value;
	Tensor<T> grad;
	Tensor<T> adam_m;
	Tensor<T> adam_v;
	std::uint64_t step = 0;

	Parameter() = default;
	Parameter(std::string n, const Shape& shape)
		: name(std::move(n)), value(shape), grad(shape), adam_m(shape), adam_v(shape)
	{
	}

	std::size_t size() const { return value.size(); }
	void zero_grad() { grad.fill(T{0}); }
};

} // namespace binconv
