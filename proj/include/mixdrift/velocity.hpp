#pragma once

#include "mixdrift/gibbs.hpp"

#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <vector>

namespace mixdrift
{
	enum class ProfileKind
	{
		sawtooth,
		sine,
		localized_tent,
	};

	std::string to_string(ProfileKind kind);
	ProfileKind parse_profile(const std::string &name);

	/// 1-periodic stream profile F0 with F0' and F0''. At kinks the one-sided
	/// right limit is returned.
	class ShearProfile
	{
	public:
		explicit ShearProfile(ProfileKind kind) : kind_(kind) {}

		ProfileKind kind() const { return kind_; }
		double value(double x) const;
		double d1(double x) const;
		double d2(double x) const;
		/// F0 and F0' together.
		void value_d1(double x, double &f, double &f1) const;

		/// Distance from x to the nearest point where F0' or F0'' jumps
		/// (infinity for the sine profile).
		double kink_distance(double x) const;

		/// sup |F0''|: the Jacobian sup norm of the plain shear.
		double max_d2() const;

	private:
		ProfileKind kind_;
	};

	/// Parameters of one unit field-time segment.
	struct ShearTuple
	{
		double alpha = 0.0;
		double beta = 1.0;
		int i = 0; // zero-based, i < j
		int j = 1;
		int orientation = 1; // axis that moves for U = 0: 1 -> x_i, 2 -> x_j
	};

	/// v = grad_perp_ij F_alpha(x_m) - F_alpha(x_m) grad_perp_ij U / kappa with
	/// grad_perp_ij psi = -d_j psi e_i + d_i psi e_j. The stream coordinate is
	/// m = j for orientation 1 and m = i for orientation 2, so with U = 0 the
	/// field is a plain shear along axis i (resp. j). Scaled by tuple.beta.
	/// Returns the Jacobian in *jac when requested.
	Vec modified_shear(const ShearProfile &profile, const ShearTuple &tuple, const Potential &U, double kappa,
					   const Vec &x, Mat *jac = nullptr);

	/// Value only, with grad U(x) supplied by the caller (empty for U = 0).
	Vec modified_shear_given_gradient(const ShearProfile &profile, const ShearTuple &tuple, double kappa,
									  const Vec &x, const Vec &grad_u);

	/// i.i.d. shear tuples. Tuple n is drawn from its own counter-based stream,
	/// so random access is exact and cheap.
	class ShearSchedule
	{
	public:
		ShearSchedule(std::uint64_t seed, int dim, ProfileKind profile, double beta_lo = 0.0, double beta_hi = 1.0);

		ShearTuple tuple(std::int64_t n) const;
		const ShearProfile &profile() const { return profile_; }
		std::uint64_t seed() const { return seed_; }
		int dim() const { return dim_; }
		double beta_lo() const { return beta_lo_; }
		double beta_hi() const { return beta_hi_; }

		/// Header `n,alpha,beta,i,j,k`, one-based axes.
		void write_csv(const std::filesystem::path &path, std::int64_t count) const;

	private:
		std::uint64_t seed_;
		int dim_;
		ShearProfile profile_;
		double beta_lo_, beta_hi_;
	};

	/// Time dependent velocity field on T^d, evaluated at field time t.
	class VelocityField
	{
	public:
		virtual ~VelocityField() = default;
		virtual int dim() const = 0;

		/// Velocity at (t, x), Jacobian in *jac when non-null.
		virtual Vec eval(double t, const Vec &x, Mat *jac = nullptr) const = 0;

		/// Value at (t, x) when the caller already holds grad U(x).
		virtual Vec eval_given_gradient(double t, const Vec &x, const Vec &grad_u) const
		{
			(void)grad_u;
			return eval(t, x);
		}

		/// First time > t at which the field jumps; infinity if continuous.
		virtual double next_switch(double t) const
		{
			(void)t;
			return std::numeric_limits<double>::infinity();
		}

		/// Distance from x to the nearest non-smooth set of the field at time t.
		virtual double kink_distance(double t, const Vec &x) const
		{
			(void)t;
			(void)x;
			return std::numeric_limits<double>::infinity();
		}
	};

	using FieldPtr = std::shared_ptr<const VelocityField>;

	class ZeroField final : public VelocityField
	{
	public:
		explicit ZeroField(int dim) : dim_(dim) {}
		int dim() const override { return dim_; }
		Vec eval(double, const Vec &, Mat *jac) const override
		{
			if (jac)
				*jac = Mat::Zero(dim_, dim_);
			return Vec::Zero(dim_);
		}

	private:
		int dim_;
	};

	/// Segment index of field time t, robust to t = n - ulp.
	std::int64_t segment_index(double t);

	/// beta_n * modified shear of tuple n on [n, n+1).
	class ShearScheduleField final : public VelocityField
	{
	public:
		/// Tuples of the first `cached_segments` segments are drawn up front.
		ShearScheduleField(ShearSchedule schedule, PotentialPtr potential, double kappa,
						   std::int64_t cached_segments = 1 << 16);

		int dim() const override { return schedule_.dim(); }
		Vec eval(double t, const Vec &x, Mat *jac = nullptr) const override;
		Vec eval_given_gradient(double t, const Vec &x, const Vec &grad_u) const override;
		double next_switch(double t) const override;
		double kink_distance(double t, const Vec &x) const override;

		const ShearSchedule &schedule() const { return schedule_; }
		const Potential &potential() const { return *potential_; }
		double kappa() const { return kappa_; }

	private:
		ShearTuple tuple_at(double t) const;

		ShearSchedule schedule_;
		PotentialPtr potential_;
		double kappa_;
		std::vector<ShearTuple> cache_;
	};

	struct OUParams
	{
		double omega = 1.0;
		double reversion = 1.0;
		double volatility = 1.0;
		double mean = 0.0;
		double m0 = 1.0;
		double dt_path = 1e-4;
		double horizon = 10.0;
		std::uint64_t seed = 0;
	};

	/// Stream psi = M_t (sin^2(2 pi w t) sin(2 pi (x1 - B1_t)) + cos^2(2 pi w t) sin(2 pi (x2 - B2_t)))
	/// turned into the mu-preserving field grad_perp psi - psi grad_perp U / kappa.
	/// M is an Ornstein-Uhlenbeck process, B1, B2 Brownian motions, all sampled
	/// exactly on a grid of step dt_path and linearly interpolated. d = 2.
	class OUStreamField final : public VelocityField
	{
	public:
		OUStreamField(const OUParams &params, PotentialPtr potential, double kappa);

		int dim() const override { return 2; }
		Vec eval(double t, const Vec &x, Mat *jac = nullptr) const override;

		/// Stream value and its x-gradient/Hessian at time t.
		double stream(double t, const Vec &x, Vec *grad = nullptr, Mat *hess = nullptr) const;
		const OUParams &params() const { return params_; }

	private:
		struct PathSample
		{
			double m, b1, b2;
		};
		PathSample path(double t) const;

		OUParams params_;
		PotentialPtr potential_;
		double kappa_;
		std::vector<double> m_, b1_, b2_;
	};

	struct ResidualStats
	{
		double max_abs = 0.0;
		double rms = 0.0;
	};

	/// kappa div v - grad U . v at `samples` uniform points of field time t,
	/// divergence by centred differences with step h. Points within 1e-4 of a
	/// kink are redrawn.
	ResidualStats stationarity_residual(const VelocityField &field, double t, const Potential &U, double kappa,
										std::size_t samples, std::uint64_t seed, double h = 1e-5);

	/// Max over `samples` uniform points of the Frobenius norm of the
	/// centred-difference Jacobian at field time t.
	double grad_sup_norm(const VelocityField &field, double t, std::size_t samples, std::uint64_t seed,
						 double h = 1e-5);

	/// Centred-difference Jacobian.
	Mat fd_jacobian(const VelocityField &field, double t, const Vec &x, double h = 1e-5);
} // namespace mixdrift
