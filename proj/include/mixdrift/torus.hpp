#pragma once

#include "mixdrift/core.hpp"

#include <cmath>

namespace mixdrift
{
	/// Reduce a real number into [0, 1).
	template <typename Scalar>
	inline Scalar wrap_unit(Scalar x)
	{
		Scalar r = x - std::floor(x);
		// x - floor(x) rounds to 1 for tiny negative x.
		if (r >= Scalar(1))
			r = Scalar(0);
		return r;
	}

	template <typename Derived>
	inline void wrap_in_place(Eigen::MatrixBase<Derived> &x)
	{
		for (Eigen::Index i = 0; i < x.size(); ++i)
			x(i) = wrap_unit(x(i));
	}

	/// Signed shortest displacement from a to b along one circle coordinate, in [-1/2, 1/2).
	inline double circle_delta(double a, double b)
	{
		double d = b - a;
		d -= std::floor(d + 0.5);
		return d;
	}

	/// A point of the unit torus T^d. Coordinates always lie in [0, 1).
	class TorusPoint
	{
	public:
		TorusPoint() = default;

		/// Reduces every coordinate mod 1. Throws PreconditionError on
		/// non-finite input or unsupported dimension.
		static TorusPoint wrap(const Vec &raw);

		int dim() const { return static_cast<int>(coords_.size()); }
		const Vec &coords() const { return coords_; }
		double operator[](int i) const { return coords_(i); }

		friend bool operator==(const TorusPoint &a, const TorusPoint &b) { return a.coords_ == b.coords_; }

	private:
		explicit TorusPoint(Vec c) : coords_(std::move(c)) {}
		Vec coords_;
	};

	/// Flat torus metric: per-coordinate min(|dx|, 1 - |dx|), combined Euclidean.
	double torus_distance(const Vec &a, const Vec &b);
	inline double torus_distance(const TorusPoint &a, const TorusPoint &b)
	{
		return torus_distance(a.coords(), b.coords());
	}
} // namespace mixdrift
