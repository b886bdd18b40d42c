#pragma once

#include "mixdrift/flows.hpp"
#include "mixdrift/gibbs.hpp"
#include "mixdrift/sampler.hpp"

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace mixdrift
{
	struct TestFunction
	{
		std::string name;
		std::function<double(const Vec &)> value;
		std::function<Vec(const Vec &)> gradient;
	};

	/// sqrt(2) sin(2 pi x_axis) or sqrt(2) cos(2 pi x_axis), axis zero-based.
	TestFunction fourier_mode(int dim, int axis, bool cosine = false);

	/// f shifted to mu-mean zero and scaled to unit H^1(mu) seminorm,
	/// || grad f ||_{L^2(mu)} = 1. Moments by midpoint quadrature (d = 2).
	struct NormalizedFunction
	{
		TestFunction f;
		double mean = 0.0;
		double h1 = 1.0;	// || grad f ||_{L^2(mu)} before scaling
		double l2_sq = 0.0; // || f - mean ||^2_{L^2(mu)} before scaling

		double operator()(const Vec &x) const { return (f.value(x) - mean) / h1; }
	};
	NormalizedFunction normalize_test_function(const GibbsMeasure &mu, TestFunction f, int grid_n = 256);

	struct CorrelationSeries
	{
		std::vector<double> corr;  // c(n), n = 0..n_max
		std::vector<double> floor; // 2 x Monte-Carlo standard error of c(n)
		std::string dictionary;	   // "f|g"
		std::size_t samples = 0;
	};

	/// c(n) = (1/N) sum_i f(X_i) g(phi_n(X_i)), X_i exact mu samples, phi_n
	/// the composition of the first n unit segments of `field`, f and g
	/// normalized.
	CorrelationSeries correlation_decay(const VelocityField &field, const GibbsMeasure &mu, const TestFunction &f,
										const TestFunction &g, int n_max, std::size_t mc_samples, std::uint64_t seed,
										const FlowOptions &opt = {}, int workers = 1);

	/// Same correlations computed the other way round, (1/N) sum f(phi_n^{-1}(Y_i)) g(Y_i).
	CorrelationSeries correlation_decay_inverse(const VelocityField &field, const GibbsMeasure &mu,
												const TestFunction &f, const TestFunction &g, int n_max,
												std::size_t mc_samples, std::uint64_t seed,
												const FlowOptions &opt = {}, int workers = 1);

	/// Typical size of the quenched correlations: root mean square over
	/// `schedules` independent fields make_field(k), k = 0..schedules-1, of
	/// correlation_decay with seed + k, minus the mean Monte-Carlo variance
	/// (clamped at 0). One fixed field gives sign-changing c(n) that no
	/// log-linear fit follows. floor(n) = (8/K)^{1/4} rms SE, two standard
	/// deviations of the estimator when every c_k(n) is pure noise.
	CorrelationSeries correlation_decay_rms(const std::function<FieldPtr(int)> &make_field, int schedules,
											const GibbsMeasure &mu, const TestFunction &f, const TestFunction &g,
											int n_max, std::size_t mc_samples, std::uint64_t seed,
											const FlowOptions &opt = {}, int workers = 1);

	/// Header `n,corr,abs_corr,floor`.
	void write_decay_csv(const std::filesystem::path &path, const CorrelationSeries &s);

	struct MixingFit
	{
		double D = 0.0;
		double gamma = 0.0;
		int n_min = 0, n_max = 0;
		double residual = 0.0; // rms of the log-linear fit
		bool exponential() const { return gamma > 0.0; }
	};

	/// Least squares on log|c(n)| over the window that starts at the first n
	/// with |c(n)| < |c(0)|/2 and runs while |c(n)| > 3 floor(n).
	MixingFit fit_rate(const std::vector<double> &corr, const std::vector<double> &floor);
	MixingFit fit_rate(const std::vector<double> &corr, double floor);

	/// Row-major cell index (first axis slowest), matching histogram_masses.
	std::size_t histogram_cell(const Vec &x, int bins);
	std::vector<double> empirical_histogram(const std::vector<TorusPoint> &pts, int bins);

	/// Half the l1 distance.
	double tv_distance(const std::vector<double> &p, const std::vector<double> &q);

	struct TvEstimate
	{
		int bins = 0;
		double tv = 0.0;
		double noise_floor = 0.0;
	};

	/// Mean + 2 sd of the TV between two independent n-sample histograms of
	/// the cell masses p (two_sample), or between one n-sample histogram and
	/// p itself. Histograms are drawn as multinomial counts.
	double noise_floor(std::size_t n_samples, const std::vector<double> &p, int bootstrap_reps, std::uint64_t seed,
					   bool two_sample = true);
	double noise_floor(std::size_t n_samples, int bins, const GibbsMeasure &mu, int bootstrap_reps, std::uint64_t seed,
					   bool two_sample = true);

	/// TV of an ensemble snapshot against the exact cell masses of mu.
	TvEstimate snapshot_tv(const std::vector<TorusPoint> &pts, const std::vector<double> &masses, int bins,
						   int bootstrap_reps = 100, std::uint64_t seed = 0);

	/// Mixed when the L1 distance to mu is <= 1/2, i.e. total variation <= 1/4.
	inline constexpr double kMixingTvThreshold = 0.25;

	struct MixingTimeRow
	{
		double t;
		int start_id;
		double tv; // floor-subtracted, >= 0
	};

	struct MixingTimeResult
	{
		double t_mix = 0.0; // +inf when not reached by the last checkpoint
		double t_max = 0.0;
		std::vector<MixingTimeRow> rows;
		bool reached() const { return std::isfinite(t_mix); }
	};

	/// Both double-well minima followed by `n_uniform` uniform points from `seed`.
	std::vector<TorusPoint> default_start_set(std::uint64_t seed, int n_uniform = 8);

	/// First checkpoint time at which the worst start's floor-subtracted
	/// L1 distance to mu is <= 1/2 (total variation <= 1/4). Each start runs n_traj trajectories of the SDE in cfg.
	MixingTimeResult mixing_time_mc(const SdeConfig &cfg, const VelocityField *field, const GibbsMeasure &mu,
									const std::vector<TorusPoint> &starts, std::size_t n_traj, int bins,
									const std::vector<double> &checkpoints, std::uint64_t seed);

	/// Same with arbitrary initial ensembles in place of point masses.
	MixingTimeResult mixing_time_from_laws(const SdeConfig &cfg, const VelocityField *field, const GibbsMeasure &mu,
										   const std::vector<std::vector<TorusPoint>> &initial, int bins,
										   const std::vector<double> &checkpoints, std::uint64_t seed);

	/// Header `t,start_id,tv`.
	void write_mixing_csv(const std::filesystem::path &path, const MixingTimeResult &r);
} // namespace mixdrift
