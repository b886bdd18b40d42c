#pragma once

#include "mixdrift/core.hpp"

#include <cmath>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace mixdrift
{
	enum class PotentialKind
	{
		zero,
		double_well,
		separable,
		custom_grid,
	};

	std::string to_string(PotentialKind kind);

	/// A 1-periodic function of one variable with two derivatives.
	class PeriodicFunction1D
	{
	public:
		virtual ~PeriodicFunction1D() = default;
		virtual double value(double x) const = 0;
		virtual double d1(double x) const = 0;
		virtual double d2(double x) const = 0;
	};

	/// sin^2(pi x).
	class SinSquared final : public PeriodicFunction1D
	{
	public:
		double value(double x) const override
		{
			const double s = std::sin(kPi * x);
			return s * s;
		}
		double d1(double x) const override { return kPi * std::sin(kTwoPi * x); }
		double d2(double x) const override { return 2.0 * kPi * kPi * std::cos(kTwoPi * x); }
	};

	/// Interpolating periodic cubic B-spline through n equispaced samples
	/// f(k/n), k = 0..n-1. C^2, so the second derivative exists everywhere.
	class PeriodicCubicSpline final : public PeriodicFunction1D
	{
	public:
		explicit PeriodicCubicSpline(std::vector<double> samples);

		double value(double x) const override { return eval(x, 0); }
		double d1(double x) const override { return eval(x, 1); }
		double d2(double x) const override { return eval(x, 2); }

		int size() const { return static_cast<int>(coef_.size()); }

		/// B-spline coefficients for periodic samples (solves the cyclic
		/// [1 4 1]/6 system).
		static std::vector<double> prefilter(const std::vector<double> &samples);

	private:
		double eval(double x, int order) const;
		std::vector<double> coef_;
	};

	/// Uniform cubic B-spline basis weights for fractional offset u in [0,1),
	/// nodes at offsets -1, 0, 1, 2, and their first two derivatives.
	struct CubicBSplineWeights
	{
		double w[4], dw[4], ddw[4];
		explicit CubicBSplineWeights(double u);
	};

	/// The potential U on T^d.
	class Potential
	{
	public:
		explicit Potential(int dim) : dim_(dim) {}
		virtual ~Potential() = default;

		virtual PotentialKind kind() const = 0;
		int dim() const { return dim_; }

		virtual double value(const Vec &x) const = 0;
		virtual Vec gradient(const Vec &x) const = 0;
		virtual Mat hessian(const Vec &x) const = 0;

		/// Non-null only for U(x) = sum_i u(x_i).
		virtual const PeriodicFunction1D *separable_component() const { return nullptr; }

	private:
		int dim_;
	};

	using PotentialPtr = std::shared_ptr<const Potential>;

	class ZeroPotential final : public Potential
	{
	public:
		explicit ZeroPotential(int dim) : Potential(dim) {}
		PotentialKind kind() const override { return PotentialKind::zero; }
		double value(const Vec &) const override { return 0.0; }
		Vec gradient(const Vec &) const override { return Vec::Zero(dim()); }
		Mat hessian(const Vec &) const override { return Mat::Zero(dim(), dim()); }
	};

	/// Two-dimensional double well
	///   U = (s(x1 - .75) + s(x2 - .7)) (s(x1 + .75) + s(x2 + .7)),  s(z) = sin^2(pi z),
	/// with global minima U = 0 at (0.75, 0.7) and (0.25, 0.3), symmetric under x -> -x.
	template <typename Scalar>
	Scalar double_well_value(Scalar x1, Scalar x2)
	{
		using std::sin;
		const Scalar pi = std::numbers::pi_v<Scalar>;
		auto s = [&](Scalar z) {
			const Scalar r = sin(pi * z);
			return r * r;
		};
		const Scalar a = s(x1 - Scalar(0.75)) + s(x2 - Scalar(0.7));
		const Scalar b = s(x1 + Scalar(0.75)) + s(x2 + Scalar(0.7));
		return a * b;
	}

	class DoubleWellPotential final : public Potential
	{
	public:
		DoubleWellPotential() : Potential(2) {}
		PotentialKind kind() const override { return PotentialKind::double_well; }
		double value(const Vec &x) const override { return double_well_value(x(0), x(1)); }
		Vec gradient(const Vec &x) const override;
		Mat hessian(const Vec &x) const override;

		static std::vector<Vec> minima();
	};

	/// U(x) = sum_i u(x_i).
	class SeparablePotential final : public Potential
	{
	public:
		SeparablePotential(int dim, std::shared_ptr<const PeriodicFunction1D> component);
		PotentialKind kind() const override { return PotentialKind::separable; }
		double value(const Vec &x) const override;
		Vec gradient(const Vec &x) const override;
		Mat hessian(const Vec &x) const override;
		const PeriodicFunction1D *separable_component() const override { return component_.get(); }

	private:
		std::shared_ptr<const PeriodicFunction1D> component_;
	};

	/// Tabulated potential on an n^d grid (nodes k/n, row-major, last index
	/// fastest) with periodic tensor cubic B-spline interpolation. d in {2, 3}.
	class GridPotential final : public Potential
	{
	public:
		GridPotential(int dim, int n, std::vector<double> values);
		PotentialKind kind() const override { return PotentialKind::custom_grid; }
		double value(const Vec &x) const override;
		Vec gradient(const Vec &x) const override;
		Mat hessian(const Vec &x) const override;

		int resolution() const { return n_; }

	private:
		void eval(const Vec &x, double *value, Vec *grad, Mat *hess) const;
		int n_;
		std::vector<double> coef_;
	};

	PotentialPtr make_zero_potential(int dim);
	PotentialPtr make_double_well();
	PotentialPtr make_separable(int dim, std::shared_ptr<const PeriodicFunction1D> component);

	/// Grid potential file: 8 bytes "TORUSPOT", u32 d, u32 n (little endian),
	/// then n^d little-endian doubles, row-major.
	PotentialPtr load_grid_potential(const std::filesystem::path &path);
	void save_grid_potential(const std::filesystem::path &path, int dim, int n, const std::vector<double> &values);

	/// Whitespace separated samples of a 1-periodic function at k/n.
	std::vector<double> load_table_1d(const std::filesystem::path &path);
} // namespace mixdrift
