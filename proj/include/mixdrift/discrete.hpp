#pragma once

#include "mixdrift/gibbs.hpp"
#include "mixdrift/metrics.hpp"
#include "mixdrift/sampler.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace mixdrift
{
	using IntMat = Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>;
	using IntVec = Eigen::Matrix<long long, Eigen::Dynamic, 1>;

	/// x -> M x mod 1 with M block diagonal: [[2,1],[1,1]] blocks, plus one
	/// [[2,-1,0],[0,1,1],[1,0,1]] block first when d is odd.
	class ToralAutomorphism
	{
	public:
		explicit ToralAutomorphism(int dim);
		/// Explicit block sizes (2 or 3), in order.
		explicit ToralAutomorphism(const std::vector<int> &blocks);

		int dim() const { return static_cast<int>(M_.rows()); }
		const IntMat &matrix() const { return M_; }
		const std::vector<int> &blocks() const { return blocks_; }

		/// Exact integer determinant.
		long long determinant() const;
		/// Largest eigenvalue modulus.
		double spectral_radius() const;

		Vec apply(const Vec &x) const;
		Vec apply_n(const Vec &x, int n) const;

	private:
		std::vector<int> blocks_;
		IntMat M_;
	};

	struct AutomorphismSeries
	{
		std::vector<int> n;
		std::vector<double> corr;	  // <f o Psi^n, g> for modes e^{2 pi i k.x}, e^{2 pi i l.x}
		std::vector<double> norm;	  // |(M^T)^n k|
		std::vector<double> envelope; // lambda_1^{-n}
		double lambda1 = 0.0;
	};

	/// Exact correlations of single Fourier modes, (M^T)^n k tracked in
	/// 128-bit integers. Throws on k = 0 and on overflow.
	AutomorphismSeries automorphism_correlation(const ToralAutomorphism &M, const IntVec &k, const IntVec &l, int n_max);

	/// Monte-Carlo correlations (1/N) sum f(x_i) g(map^n(x_i)), n = 0..n_max,
	/// with the same floor convention as correlation_decay.
	CorrelationSeries map_correlation(const std::function<Vec(const Vec &)> &map, const std::vector<TorusPoint> &samples,
									  const std::function<double(const Vec &)> &f,
									  const std::function<double(const Vec &)> &g, int n_max, int workers = 1);

	/// Component-wise CDF map T sending mu to Lebesgue measure, for separable
	/// (or zero) potentials.
	class TransportMap
	{
	public:
		TransportMap(PotentialPtr potential, double kappa, int cells = 1 << 14);

		int dim() const { return potential_->dim(); }
		bool identity() const { return !cdf_; }
		Vec forward(const Vec &x) const;
		Vec inverse(const Vec &y) const;
		const MarginalCdf *marginal() const { return cdf_.get(); }

	private:
		PotentialPtr potential_;
		std::shared_ptr<const MarginalCdf> cdf_;
	};

	/// Phi(x) = T^{-1}(Psi(T(x))).
	Vec conjugated_map(const TransportMap &T, const ToralAutomorphism &Psi, const Vec &x);

	/// Y_{n+1} = Phi(Z_{1/A}) where Z is plain Langevin started at Y_n.
	struct HybridChain
	{
		double A = 1.0;
		double kappa = 1.0;
		PotentialPtr potential;
		std::function<Vec(const Vec &)> map; // empty: identity
		DtPolicy dt;
		int workers = 1;

		/// Advances the ensemble by n whole steps.
		void advance(Ensemble &ens, int n) const;
	};

	struct HybridMixingResult
	{
		CorrelationSeries decay; // f(Y_0) g(Y_n), Y_0 ~ mu
		MixingTimeResult mixing; // t in steps
		int n_mix = -1;			 // -1: not reached
	};

	/// Correlation decay of Y from exact mu samples, and the step mixing time
	/// from the given starts (floor-subtracted TV <= 1/4 at `bins` per axis).
	HybridMixingResult hybrid_mixing(const HybridChain &chain, const GibbsMeasure &mu, const TestFunction &f,
									 const TestFunction &g, int n_steps, std::size_t decay_samples,
									 const std::vector<TorusPoint> &starts, std::size_t n_traj, int bins,
									 std::uint64_t seed);
} // namespace mixdrift
