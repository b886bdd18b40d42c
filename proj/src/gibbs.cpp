#include "mixdrift/gibbs.hpp"

#include "mixdrift/parallel.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <numeric>

namespace mixdrift
{
	namespace
	{
		std::size_t ipow(int n, int d)
		{
			std::size_t r = 1;
			for (int i = 0; i < d; ++i)
				r *= static_cast<std::size_t>(n);
			return r;
		}

		// Grid node `idx` of an n^d lattice at offsets (k + shift)/n.
		Vec lattice_point(std::size_t idx, int n, int d, double shift)
		{
			Vec x(d);
			for (int a = d - 1; a >= 0; --a)
			{
				x(a) = (static_cast<double>(idx % n) + shift) / n;
				idx /= n;
			}
			return x;
		}

		// Newton iterations with a backtracking gradient fallback, towards a
		// local minimum (sign = +1) or maximum (sign = -1) of U.
		Vec polish(const Potential &U, Vec x, double sign)
		{
			double f = sign * U.value(x);
			for (int it = 0; it < 60; ++it)
			{
				const Vec g = sign * U.gradient(x);
				if (g.norm() < 1e-14)
					break;
				const Mat H = sign * U.hessian(x);
				Vec step = -g;
				Eigen::SelfAdjointEigenSolver<Mat> es(H);
				if (es.info() == Eigen::Success && es.eigenvalues().minCoeff() > 0)
					step = -H.ldlt().solve(g);
				double t = 1.0;
				bool moved = false;
				const double scale = step.norm();
				if (scale > 0.05)
					t = 0.05 / scale;
				for (int ls = 0; ls < 40; ++ls, t *= 0.5)
				{
					Vec trial = x + t * step;
					wrap_in_place(trial);
					const double ft = sign * U.value(trial);
					if (ft < f)
					{
						x = trial;
						f = ft;
						moved = true;
						break;
					}
				}
				if (!moved)
					break;
			}
			return x;
		}
	} // namespace

	GibbsMeasure::GibbsMeasure(PotentialPtr potential, double kappa) : potential_(std::move(potential)), kappa_(kappa)
	{
		if (!potential_)
			throw PreconditionError("Gibbs measure needs a potential");
		if (!(kappa > 0.0) || !std::isfinite(kappa))
			throw PreconditionError("kappa must be positive and finite");
	}

	GibbsMeasure &GibbsMeasure::normalize(int grid_n)
	{
		const int d = dim();
		if (d > 3)
			throw UnsupportedError("normalize: tensor quadrature supports d <= 3, got d = " + std::to_string(d));
		if (grid_n < 64)
			throw PreconditionError("normalize: grid_n must be >= 64");
		grid_n_ = grid_n;
		if (potential_->kind() == PotentialKind::zero)
		{
			log_z_ = u_min_ = u_max_ = 0.0;
			normalized_ = true;
			return *this;
		}
		const std::size_t total = ipow(grid_n, d);
		std::vector<double> u(total);
		for (std::size_t i = 0; i < total; ++i)
			u[i] = potential_->value(lattice_point(i, grid_n, d, 0.0));

		// Polish from the few most extreme nodes; several seeds guard against
		// nearly tied separate extrema.
		std::vector<std::size_t> order(total);
		std::iota(order.begin(), order.end(), std::size_t{0});
		const std::size_t k = std::min<std::size_t>(8, total);
		std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](auto a, auto b) { return u[a] < u[b]; });
		double lo = u[order[0]];
		for (std::size_t s = 0; s < k; ++s)
			lo = std::min(lo, potential_->value(polish(*potential_, lattice_point(order[s], grid_n, d, 0.0), 1.0)));
		std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](auto a, auto b) { return u[a] > u[b]; });
		double hi = u[order[0]];
		for (std::size_t s = 0; s < k; ++s)
			hi = std::max(hi, potential_->value(polish(*potential_, lattice_point(order[s], grid_n, d, 0.0), -1.0)));
		u_min_ = lo;
		u_max_ = hi;

		double acc = 0.0;
		for (double v : u)
			acc += std::exp(-(v - u_min_) / kappa_);
		log_z_ = std::log(acc / static_cast<double>(total)) - u_min_ / kappa_;
		normalized_ = true;
		return *this;
	}

	void GibbsMeasure::require_normalized() const
	{
		if (!normalized_)
			throw PreconditionError("Gibbs measure used before normalize()");
	}

	double GibbsMeasure::Z() const
	{
		require_normalized();
		return std::exp(log_z_);
	}

	double GibbsMeasure::log_Z() const
	{
		require_normalized();
		return log_z_;
	}

	double GibbsMeasure::osc() const
	{
		require_normalized();
		return u_max_ - u_min_;
	}

	double GibbsMeasure::u_min() const
	{
		require_normalized();
		return u_min_;
	}

	double GibbsMeasure::u_max() const
	{
		require_normalized();
		return u_max_;
	}

	double GibbsMeasure::log_density(const Vec &x) const
	{
		require_normalized();
		return -potential_->value(x) / kappa_ - log_z_;
	}

	double GibbsMeasure::density(const Vec &x) const { return std::exp(log_density(x)); }

	// ---------------------------------------------------------------------------

	MarginalCdf::MarginalCdf(const PeriodicFunction1D &u, double kappa, int cells)
		: cells_(cells), kappa_(kappa), u_(&u)
	{
		if (cells < 16)
			throw PreconditionError("MarginalCdf needs at least 16 cells");
		if (!(kappa > 0.0))
			throw PreconditionError("kappa must be positive");
		const double h = 1.0 / cells;
		shift_ = std::numeric_limits<double>::infinity();
		for (int i = 0; i < cells; ++i)
			shift_ = std::min(shift_, u.value(i * h));

		static constexpr std::array<double, 5> gx{-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
												  0.9061798459386640};
		static constexpr std::array<double, 5> gw{0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
												  0.4786286704993665, 0.2369268850561891};
		cdf_.assign(cells + 1, 0.0);
		for (int i = 0; i < cells; ++i)
		{
			double s = 0.0;
			for (int q = 0; q < 5; ++q)
			{
				const double x = (i + 0.5 + 0.5 * gx[q]) * h;
				s += gw[q] * std::exp(-(u.value(x) - shift_) / kappa);
			}
			cdf_[i + 1] = cdf_[i] + 0.5 * h * s;
		}
		const double total = cdf_[cells];
		log_z_ = std::log(total) - shift_ / kappa;
		for (auto &c : cdf_)
			c /= total;
		cdf_[cells] = 1.0;

		slope_.resize(cells + 1);
		for (int i = 0; i <= cells; ++i)
			slope_[i] = std::exp(-(u.value(i * h) - shift_) / kappa) / total;
		// Fritsch-Carlson limiter keeps the Hermite interpolant monotone.
		for (int i = 0; i < cells; ++i)
		{
			const double delta = (cdf_[i + 1] - cdf_[i]) / h;
			if (delta <= 0.0)
				throw ConvergenceError("MarginalCdf: density underflow, kappa too small for this table");
			const double a = slope_[i] / delta, b = slope_[i + 1] / delta;
			const double r = a * a + b * b;
			if (r > 9.0)
			{
				const double tau = 3.0 / std::sqrt(r);
				slope_[i] = tau * a * delta;
				slope_[i + 1] = tau * b * delta;
			}
		}
	}

	double MarginalCdf::operator()(double x) const
	{
		if (x <= 0.0)
			return 0.0;
		if (x >= 1.0)
			return 1.0;
		const double h = 1.0 / cells_;
		int i = std::min(static_cast<int>(x * cells_), cells_ - 1);
		const double t = (x - i * h) / h;
		const double t2 = t * t, t3 = t2 * t;
		const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t, h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
		return h00 * cdf_[i] + h10 * h * slope_[i] + h01 * cdf_[i + 1] + h11 * h * slope_[i + 1];
	}

	double MarginalCdf::inverse(double p) const
	{
		if (p <= 0.0)
			return 0.0;
		if (p >= 1.0)
			return 1.0;
		const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), p);
		const int i = std::clamp(static_cast<int>(it - cdf_.begin()) - 1, 0, cells_ - 1);
		const double h = 1.0 / cells_;
		double lo = i * h, hi = (i + 1) * h;
		while (hi - lo > 1e-13)
		{
			const double mid = 0.5 * (lo + hi);
			if ((*this)(mid) < p)
				lo = mid;
			else
				hi = mid;
		}
		return 0.5 * (lo + hi);
	}

	double MarginalCdf::density(double x) const { return std::exp(-u_->value(x) / kappa_ - log_z_); }

	// ---------------------------------------------------------------------------

	double rejection_acceptance(const GibbsMeasure &m) { return std::exp(m.log_Z() + m.u_min() / m.kappa()); }

	std::vector<TorusPoint> sample_gibbs(const GibbsMeasure &m, std::size_t n, std::uint64_t seed, GibbsSampling method,
										 int workers)
	{
		const int d = m.dim();
		if (d > 3)
			throw UnsupportedError("sample_gibbs: d <= 3 required");
		const double acceptance = rejection_acceptance(m);
		const auto *component = m.potential().separable_component();
		if (method == GibbsSampling::automatic)
		{
			if (acceptance >= 1e-6)
				method = GibbsSampling::rejection;
			else if (component)
				method = GibbsSampling::inverse_cdf;
			else
				throw ConvergenceError("sample_gibbs: rejection acceptance " + std::to_string(acceptance) +
									   " is below 1e-6; use a larger kappa or a separable potential (inverse CDF)");
		}
		if (method == GibbsSampling::inverse_cdf && !component)
			throw UnsupportedError("sample_gibbs: inverse-CDF sampling needs a separable potential");
		if (method == GibbsSampling::rejection && acceptance < 1e-6)
			throw ConvergenceError("sample_gibbs: rejection acceptance below 1e-6");

		std::vector<TorusPoint> out(n);
		if (method == GibbsSampling::inverse_cdf)
		{
			const MarginalCdf cdf(*component, m.kappa());
			parallel_for(n, workers, [&](std::size_t b, std::size_t e) {
				for (std::size_t k = b; k < e; ++k)
				{
					auto rng = make_stream(seed, k);
					Vec x(d);
					for (int a = 0; a < d; ++a)
						x(a) = cdf.inverse(rng.uniform());
					out[k] = TorusPoint::wrap(x);
				}
			});
			return out;
		}
		const double umin = m.u_min(), kappa = m.kappa();
		const Potential &U = m.potential();
		parallel_for(n, workers, [&](std::size_t b, std::size_t e) {
			Vec x(d);
			for (std::size_t k = b; k < e; ++k)
			{
				auto rng = make_stream(seed, k);
				for (;;)
				{
					for (int a = 0; a < d; ++a)
						x(a) = rng.uniform();
					if (rng.uniform() < std::exp(-(U.value(x) - umin) / kappa))
						break;
				}
				out[k] = TorusPoint::wrap(x);
			}
		});
		return out;
	}

	std::vector<double> histogram_masses(const GibbsMeasure &m, int bins, int sub)
	{
		const int d = m.dim();
		if (d > 3)
			throw UnsupportedError("histogram_masses: d <= 3 required");
		if (bins < 1 || sub < 1)
			throw PreconditionError("histogram_masses: bins and sub must be positive");
		const int n = bins * sub;
		const std::size_t total = ipow(n, d);
		std::vector<double> mass(ipow(bins, d), 0.0);
		const double umin = m.u_min(), kappa = m.kappa();
		double sum = 0.0;
		for (std::size_t i = 0; i < total; ++i)
		{
			const Vec x = lattice_point(i, n, d, 0.5);
			std::size_t cell = 0;
			for (int a = 0; a < d; ++a)
				cell = cell * bins + std::min(bins - 1, static_cast<int>(x(a) * bins));
			const double w = std::exp(-(m.potential().value(x) - umin) / kappa);
			mass[cell] += w;
			sum += w;
		}
		for (auto &v : mass)
			v /= sum;
		return mass;
	}

	std::vector<double> voronoi_masses(const GibbsMeasure &m, const std::vector<TorusPoint> &sites, int grid_n)
	{
		const int d = m.dim();
		if (d > 3)
			throw UnsupportedError("voronoi_masses: d <= 3 required");
		if (sites.empty())
			throw PreconditionError("voronoi_masses: no sites");
		const std::size_t total = ipow(grid_n, d);
		std::vector<double> mass(sites.size(), 0.0);
		const double umin = m.u_min(), kappa = m.kappa();
		double sum = 0.0;
		for (std::size_t i = 0; i < total; ++i)
		{
			const Vec x = lattice_point(i, grid_n, d, 0.5);
			std::size_t best = 0;
			double bd = std::numeric_limits<double>::infinity();
			for (std::size_t s = 0; s < sites.size(); ++s)
			{
				const double dist = torus_distance(x, sites[s].coords());
				if (dist < bd)
				{
					bd = dist;
					best = s;
				}
			}
			const double w = std::exp(-(m.potential().value(x) - umin) / kappa);
			mass[best] += w;
			sum += w;
		}
		for (auto &v : mass)
			v /= sum;
		return mass;
	}
} // namespace mixdrift
