#include "mixdrift/torus.hpp"

#include <algorithm>

namespace mixdrift
{
	TorusPoint TorusPoint::wrap(const Vec &raw)
	{
		if (raw.size() < 2 || raw.size() > kMaxDim)
			throw PreconditionError("torus dimension must lie in [2, " + std::to_string(kMaxDim) + "]");
		if (!raw.allFinite())
			throw PreconditionError("cannot wrap a non-finite coordinate onto the torus");
		Vec c = raw;
		wrap_in_place(c);
		return TorusPoint(std::move(c));
	}

	double torus_distance(const Vec &a, const Vec &b)
	{
		if (a.size() != b.size())
			throw PreconditionError("torus_distance: dimension mismatch");
		double s = 0.0;
		for (Eigen::Index i = 0; i < a.size(); ++i)
		{
			double d = std::abs(wrap_unit(a(i)) - wrap_unit(b(i)));
			d = std::min(d, 1.0 - d);
			s += d * d;
		}
		return std::sqrt(s);
	}
} // namespace mixdrift
