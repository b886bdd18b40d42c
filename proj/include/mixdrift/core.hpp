#pragma once

#include <Eigen/Dense>

#include <numbers>
#include <stdexcept>
#include <string>

namespace mixdrift
{
	// Dimension cap for stack-allocated state vectors. The quadrature based
	// routines are further restricted to d <= 3.
	inline constexpr int kMaxDim = 8;

	template <typename Scalar>
	using VectorN = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
	template <typename Scalar>
	using MatrixN = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

	using Vec = VectorN<double>;
	using Mat = MatrixN<double>;

	inline constexpr double kPi = std::numbers::pi;
	inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

	class Error : public std::runtime_error
	{
	public:
		using std::runtime_error::runtime_error;
	};

	/// A documented precondition of an operation was violated by the caller.
	class PreconditionError : public Error
	{
	public:
		using Error::Error;
	};

	/// The request is well formed but outside what the implementation supports
	/// (dimension too large for quadrature, non-separable potential, ...).
	class UnsupportedError : public Error
	{
	public:
		using Error::Error;
	};

	/// An iterative method failed to reach its tolerance.
	class ConvergenceError : public Error
	{
	public:
		using Error::Error;
	};
} // namespace mixdrift
