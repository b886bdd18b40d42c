#pragma once

#include "mixdrift/potential.hpp"
#include "mixdrift/random.hpp"
#include "mixdrift/torus.hpp"

#include <vector>

namespace mixdrift
{
	/// mu = exp(-U/kappa)/Z dx on the unit torus.
	class GibbsMeasure
	{
	public:
		GibbsMeasure(PotentialPtr potential, double kappa);

		/// Periodic rectangle rule on grid_n^d nodes for Z; osc from the same
		/// grid refined by a Newton polish around the extreme nodes. d <= 3.
		GibbsMeasure &normalize(int grid_n = 512);

		const Potential &potential() const { return *potential_; }
		const PotentialPtr &potential_ptr() const { return potential_; }
		int dim() const { return potential_->dim(); }
		double kappa() const { return kappa_; }
		bool normalized() const { return normalized_; }

		double Z() const;
		/// log Z, usable when Z itself under/overflows.
		double log_Z() const;
		double osc() const;
		double u_min() const;
		double u_max() const;
		int grid_n() const { return grid_n_; }

		double density(const Vec &x) const;
		double log_density(const Vec &x) const;

	private:
		void require_normalized() const;

		PotentialPtr potential_;
		double kappa_;
		bool normalized_ = false;
		int grid_n_ = 0;
		double log_z_ = 0.0, u_min_ = 0.0, u_max_ = 0.0;
	};

	/// CDF of exp(-u/kappa) on [0,1] for a 1-periodic u, tabulated at `cells`+1
	/// nodes with Gauss-Legendre cell integrals and monotone cubic Hermite
	/// interpolation (slopes are the exact normalized density, Fritsch-Carlson
	/// limited).
	class MarginalCdf
	{
	public:
		MarginalCdf(const PeriodicFunction1D &u, double kappa, int cells = 1 << 14);

		double operator()(double x) const;
		/// Bisection to 1e-12 on the interpolant.
		double inverse(double p) const;
		double density(double x) const;
		double log_normalizer() const { return log_z_; }
		const std::vector<double> &table() const { return cdf_; }

	private:
		int cells_;
		double log_z_ = 0.0, shift_ = 0.0, kappa_;
		std::vector<double> cdf_, slope_;
		const PeriodicFunction1D *u_;
	};

	enum class GibbsSampling
	{
		automatic,
		rejection,
		inverse_cdf,
	};

	/// n i.i.d. mu-samples. Sample k uses stream k of `seed`, so the output does
	/// not depend on how the work is split across threads.
	std::vector<TorusPoint> sample_gibbs(const GibbsMeasure &m, std::size_t n, std::uint64_t seed,
										 GibbsSampling method = GibbsSampling::automatic, int workers = 1);

	/// Expected rejection acceptance rate, mean of exp(-(U - min U)/kappa).
	double rejection_acceptance(const GibbsMeasure &m);

	/// mu-mass of each cell of a bins^d histogram by tensor quadrature with
	/// `sub` nodes per bin and axis. Row-major, last axis fastest. d <= 3.
	std::vector<double> histogram_masses(const GibbsMeasure &m, int bins, int sub = 16);

	/// mu-mass of the Voronoi cells (torus metric) of the given points.
	std::vector<double> voronoi_masses(const GibbsMeasure &m, const std::vector<TorusPoint> &sites, int grid_n = 1024);
} // namespace mixdrift
