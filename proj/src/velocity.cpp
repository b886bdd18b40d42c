#include "mixdrift/velocity.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

namespace mixdrift
{
	std::string to_string(ProfileKind kind)
	{
		switch (kind)
		{
		case ProfileKind::sawtooth: return "sawtooth";
		case ProfileKind::sine: return "sine";
		case ProfileKind::localized_tent: return "localized-tent";
		}
		return "unknown";
	}

	ProfileKind parse_profile(const std::string &name)
	{
		if (name == "sawtooth")
			return ProfileKind::sawtooth;
		if (name == "sine")
			return ProfileKind::sine;
		if (name == "localized-tent" || name == "tent")
			return ProfileKind::localized_tent;
		throw PreconditionError("unknown profile '" + name + "' (expected sawtooth, sine or localized-tent)");
	}

	double ShearProfile::value(double x) const
	{
		x = wrap_unit(x);
		switch (kind_)
		{
		case ProfileKind::sawtooth:
			if (x < 0.25)
				return 2.0 * x * x;
			if (x < 0.75)
				return -2.0 * (x - 0.25) * (x - 0.75) + 0.125;
			return 2.0 * (x - 1.0) * (x - 1.0);
		case ProfileKind::sine: return std::sin(kTwoPi * x);
		case ProfileKind::localized_tent:
			if (x < 0.375 || x >= 0.625)
				return 0.0;
			return 1.0 - 8.0 * std::abs(x - 0.5);
		}
		return 0.0;
	}

	double ShearProfile::d1(double x) const
	{
		x = wrap_unit(x);
		switch (kind_)
		{
		case ProfileKind::sawtooth:
			if (x < 0.25)
				return 4.0 * x;
			if (x < 0.75)
				return 2.0 - 4.0 * x;
			return 4.0 * (x - 1.0);
		case ProfileKind::sine: return kTwoPi * std::cos(kTwoPi * x);
		case ProfileKind::localized_tent:
			if (x < 0.375 || x >= 0.625)
				return 0.0;
			return x < 0.5 ? 8.0 : -8.0;
		}
		return 0.0;
	}

	double ShearProfile::d2(double x) const
	{
		x = wrap_unit(x);
		switch (kind_)
		{
		case ProfileKind::sawtooth: return (x < 0.25 || x >= 0.75) ? 4.0 : -4.0;
		case ProfileKind::sine: return -kTwoPi * kTwoPi * std::sin(kTwoPi * x);
		case ProfileKind::localized_tent: return 0.0;
		}
		return 0.0;
	}

	void ShearProfile::value_d1(double x, double &f, double &f1) const
	{
		if (kind_ == ProfileKind::sine)
		{
			const double th = kTwoPi * wrap_unit(x);
			f = std::sin(th);
			f1 = kTwoPi * std::cos(th);
			return;
		}
		f = value(x);
		f1 = d1(x);
	}

	double ShearProfile::kink_distance(double x) const
	{
		static constexpr double saw[] = {0.25, 0.75};
		static constexpr double tent[] = {0.375, 0.5, 0.625};
		x = wrap_unit(x);
		double best = std::numeric_limits<double>::infinity();
		auto scan = [&](const double *k, int n) {
			for (int i = 0; i < n; ++i)
				best = std::min(best, std::abs(circle_delta(x, k[i])));
		};
		if (kind_ == ProfileKind::sawtooth)
			scan(saw, 2);
		else if (kind_ == ProfileKind::localized_tent)
			scan(tent, 3);
		return best;
	}

	double ShearProfile::max_d2() const
	{
		switch (kind_)
		{
		case ProfileKind::sawtooth: return 4.0;
		case ProfileKind::sine: return kTwoPi * kTwoPi;
		case ProfileKind::localized_tent: return std::numeric_limits<double>::infinity();
		}
		return 0.0;
	}

	// ---------------------------------------------------------------------------

	Vec modified_shear(const ShearProfile &profile, const ShearTuple &tuple, const Potential &U, double kappa,
					   const Vec &x, Mat *jac)
	{
		const int d = static_cast<int>(x.size());
		const int i = tuple.i, j = tuple.j;
		if (!(i >= 0 && i < j && j < d))
			throw PreconditionError("modified_shear: need 0 <= i < j < d");
		const int m = tuple.orientation == 1 ? j : i;
		const double z = x(m) - tuple.alpha;
		const double F = profile.value(z), F1 = profile.d1(z);
		const bool flat = U.kind() == PotentialKind::zero;
		const double b = tuple.beta;

		Vec v = Vec::Zero(d);
		// grad_perp_ij F(x_m) is -F' e_i (m = j) or F' e_j (m = i).
		if (m == j)
			v(i) = -F1;
		else
			v(j) = F1;
		Vec g;
		if (!flat)
		{
			g = U.gradient(x);
			v(i) += F * g(j) / kappa;
			v(j) -= F * g(i) / kappa;
		}
		v *= b;

		if (jac)
		{
			Mat J = Mat::Zero(d, d);
			const double F2 = profile.d2(z);
			if (m == j)
				J(i, m) = -F2;
			else
				J(j, m) = F2;
			if (!flat)
			{
				const Mat H = U.hessian(x);
				J(i, m) += F1 * g(j) / kappa;
				J(j, m) -= F1 * g(i) / kappa;
				J.row(i) += (F / kappa) * H.row(j);
				J.row(j) -= (F / kappa) * H.row(i);
			}
			*jac = b * J;
		}
		return v;
	}

	Vec modified_shear_given_gradient(const ShearProfile &profile, const ShearTuple &tuple, double kappa,
									  const Vec &x, const Vec &grad_u)
	{
		const int d = static_cast<int>(x.size());
		const int i = tuple.i, j = tuple.j;
		const int m = tuple.orientation == 1 ? j : i;
		double F, F1;
		profile.value_d1(x(m) - tuple.alpha, F, F1);
		Vec v = Vec::Zero(d);
		if (m == j)
			v(i) = -F1;
		else
			v(j) = F1;
		if (grad_u.size() == d)
		{
			v(i) += F * grad_u(j) / kappa;
			v(j) -= F * grad_u(i) / kappa;
		}
		return tuple.beta * v;
	}

	// ---------------------------------------------------------------------------

	ShearSchedule::ShearSchedule(std::uint64_t seed, int dim, ProfileKind profile, double beta_lo, double beta_hi)
		: seed_(seed), dim_(dim), profile_(profile), beta_lo_(beta_lo), beta_hi_(beta_hi)
	{
		if (dim < 2 || dim > kMaxDim)
			throw PreconditionError("schedule dimension must lie in [2, " + std::to_string(kMaxDim) + "]");
		if (!(beta_lo <= beta_hi))
			throw PreconditionError("schedule: beta range must satisfy lo <= hi");
	}

	ShearTuple ShearSchedule::tuple(std::int64_t n) const
	{
		if (n < 0)
			throw PreconditionError("schedule: negative segment index");
		auto rng = make_stream(seed_, static_cast<std::uint64_t>(n));
		ShearTuple t;
		t.alpha = rng.uniform();
		t.beta = beta_lo_ + (beta_hi_ - beta_lo_) * rng.uniform();
		const int pairs = dim_ * (dim_ - 1) / 2;
		int p = std::min(pairs - 1, static_cast<int>(rng.uniform() * pairs));
		for (int i = 0; i < dim_; ++i)
		{
			const int row = dim_ - 1 - i;
			if (p < row)
			{
				t.i = i;
				t.j = i + 1 + p;
				break;
			}
			p -= row;
		}
		t.orientation = rng.uniform() < 0.5 ? 1 : 2;
		return t;
	}

	void ShearSchedule::write_csv(const std::filesystem::path &path, std::int64_t count) const
	{
		std::ofstream out(path);
		if (!out)
			throw Error("cannot write " + path.string());
		out << "n,alpha,beta,i,j,k\n" << std::setprecision(17);
		for (std::int64_t n = 0; n < count; ++n)
		{
			const auto t = tuple(n);
			out << n << ',' << t.alpha << ',' << t.beta << ',' << t.i + 1 << ',' << t.j + 1 << ',' << t.orientation
				<< '\n';
		}
	}

	std::int64_t segment_index(double t) { return static_cast<std::int64_t>(std::floor(t + 1e-12 * std::max(1.0, std::abs(t)))); }

	ShearScheduleField::ShearScheduleField(ShearSchedule schedule, PotentialPtr potential, double kappa,
										   std::int64_t cached_segments)
		: schedule_(std::move(schedule)), potential_(std::move(potential)), kappa_(kappa)
	{
		if (!potential_ || potential_->dim() != schedule_.dim())
			throw PreconditionError("shear field: potential and schedule dimensions differ");
		if (!(kappa > 0.0))
			throw PreconditionError("shear field: kappa must be positive");
		cache_.reserve(static_cast<std::size_t>(std::max<std::int64_t>(cached_segments, 0)));
		for (std::int64_t n = 0; n < cached_segments; ++n)
			cache_.push_back(schedule_.tuple(n));
	}

	ShearTuple ShearScheduleField::tuple_at(double t) const
	{
		const auto n = segment_index(t);
		if (n >= 0 && n < static_cast<std::int64_t>(cache_.size()))
			return cache_[static_cast<std::size_t>(n)];
		return schedule_.tuple(n);
	}

	Vec ShearScheduleField::eval(double t, const Vec &x, Mat *jac) const
	{
		const auto tup = tuple_at(t);
		return modified_shear(schedule_.profile(), tup, *potential_, kappa_, x, jac);
	}

	Vec ShearScheduleField::eval_given_gradient(double t, const Vec &x, const Vec &grad_u) const
	{
		const auto tup = tuple_at(t);
		if (potential_->kind() == PotentialKind::zero)
			return modified_shear_given_gradient(schedule_.profile(), tup, kappa_, x, Vec());
		return modified_shear_given_gradient(schedule_.profile(), tup, kappa_, x, grad_u);
	}

	double ShearScheduleField::next_switch(double t) const { return static_cast<double>(segment_index(t) + 1); }

	double ShearScheduleField::kink_distance(double t, const Vec &x) const
	{
		const auto tup = tuple_at(t);
		const int m = tup.orientation == 1 ? tup.j : tup.i;
		return schedule_.profile().kink_distance(x(m) - tup.alpha);
	}

	// ---------------------------------------------------------------------------

	OUStreamField::OUStreamField(const OUParams &params, PotentialPtr potential, double kappa)
		: params_(params), potential_(std::move(potential)), kappa_(kappa)
	{
		if (!potential_ || potential_->dim() != 2)
			throw UnsupportedError("OU stream field is defined for d = 2 only");
		if (!(params.dt_path > 0.0) || !(params.horizon > 0.0) || !(params.omega > 0.0) || !(params.reversion > 0.0))
			throw PreconditionError("OU field: dt_path, horizon, omega and reversion must be positive");
		const auto steps = static_cast<std::size_t>(std::ceil(params.horizon / params.dt_path)) + 1;
		m_.resize(steps + 1);
		b1_.resize(steps + 1);
		b2_.resize(steps + 1);
		auto rm = make_stream(params.seed, 0), r1 = make_stream(params.seed, 1), r2 = make_stream(params.seed, 2);
		const double decay = std::exp(-params.reversion * params.dt_path);
		const double sd = params.volatility * std::sqrt((1.0 - decay * decay) / (2.0 * params.reversion));
		const double sq = std::sqrt(params.dt_path);
		m_[0] = params.m0;
		b1_[0] = b2_[0] = 0.0;
		for (std::size_t k = 0; k < steps; ++k)
		{
			m_[k + 1] = params.mean + (m_[k] - params.mean) * decay + sd * rm.normal();
			b1_[k + 1] = b1_[k] + sq * r1.normal();
			b2_[k + 1] = b2_[k] + sq * r2.normal();
		}
	}

	OUStreamField::PathSample OUStreamField::path(double t) const
	{
		if (t < 0.0 || t > params_.horizon)
			throw PreconditionError("OU field evaluated at t = " + std::to_string(t) + " outside the sampled horizon [0, " +
									std::to_string(params_.horizon) + "]");
		const double s = t / params_.dt_path;
		const auto k = std::min(static_cast<std::size_t>(s), m_.size() - 2);
		const double w = s - static_cast<double>(k);
		return {m_[k] + w * (m_[k + 1] - m_[k]), b1_[k] + w * (b1_[k + 1] - b1_[k]), b2_[k] + w * (b2_[k + 1] - b2_[k])};
	}

	double OUStreamField::stream(double t, const Vec &x, Vec *grad, Mat *hess) const
	{
		const auto p = path(t);
		const double sw = std::sin(kTwoPi * params_.omega * t);
		const double s2 = sw * sw, c2 = 1.0 - s2;
		const double p1 = kTwoPi * (x(0) - p.b1), p2 = kTwoPi * (x(1) - p.b2);
		const double sn1 = std::sin(p1), sn2 = std::sin(p2);
		if (grad)
		{
			grad->resize(2);
			(*grad) << p.m * s2 * kTwoPi * std::cos(p1), p.m * c2 * kTwoPi * std::cos(p2);
		}
		if (hess)
		{
			*hess = Mat::Zero(2, 2);
			(*hess)(0, 0) = -p.m * s2 * kTwoPi * kTwoPi * sn1;
			(*hess)(1, 1) = -p.m * c2 * kTwoPi * kTwoPi * sn2;
		}
		return p.m * (s2 * sn1 + c2 * sn2);
	}

	Vec OUStreamField::eval(double t, const Vec &x, Mat *jac) const
	{
		Vec gp;
		Mat hp;
		const double psi = stream(t, x, &gp, jac ? &hp : nullptr);
		const Vec gu = potential_->gradient(x);
		Vec v(2);
		v << -gp(1) + psi * gu(1) / kappa_, gp(0) - psi * gu(0) / kappa_;
		if (jac)
		{
			const Mat hu = potential_->hessian(x);
			Mat J(2, 2);
			for (int l = 0; l < 2; ++l)
			{
				J(0, l) = -hp(1, l) + (gp(l) * gu(1) + psi * hu(1, l)) / kappa_;
				J(1, l) = hp(0, l) - (gp(l) * gu(0) + psi * hu(0, l)) / kappa_;
			}
			*jac = J;
		}
		return v;
	}

	// ---------------------------------------------------------------------------

	namespace
	{
		Vec draw_smooth_point(const VelocityField &field, double t, Xoshiro256 &rng)
		{
			Vec x(field.dim());
			for (int attempt = 0; attempt < 10000; ++attempt)
			{
				for (int a = 0; a < x.size(); ++a)
					x(a) = rng.uniform();
				if (field.kink_distance(t, x) >= 1e-4)
					return x;
			}
			throw ConvergenceError("could not draw a point away from the field's kinks");
		}
	} // namespace

	Mat fd_jacobian(const VelocityField &field, double t, const Vec &x, double h)
	{
		const int d = field.dim();
		Mat J(d, d);
		for (int a = 0; a < d; ++a)
		{
			Vec xp = x, xm = x;
			xp(a) += h;
			xm(a) -= h;
			J.col(a) = (field.eval(t, xp) - field.eval(t, xm)) / (2.0 * h);
		}
		return J;
	}

	ResidualStats stationarity_residual(const VelocityField &field, double t, const Potential &U, double kappa,
										std::size_t samples, std::uint64_t seed, double h)
	{
		auto rng = make_stream(seed, 0);
		ResidualStats r;
		double sq = 0.0;
		for (std::size_t s = 0; s < samples; ++s)
		{
			const Vec x = draw_smooth_point(field, t, rng);
			const double div = fd_jacobian(field, t, x, h).trace();
			const double res = kappa * div - U.gradient(x).dot(field.eval(t, x));
			r.max_abs = std::max(r.max_abs, std::abs(res));
			sq += res * res;
		}
		r.rms = samples ? std::sqrt(sq / static_cast<double>(samples)) : 0.0;
		return r;
	}

	double grad_sup_norm(const VelocityField &field, double t, std::size_t samples, std::uint64_t seed, double h)
	{
		auto rng = make_stream(seed, 0);
		double best = 0.0;
		for (std::size_t s = 0; s < samples; ++s)
		{
			const Vec x = draw_smooth_point(field, t, rng);
			best = std::max(best, fd_jacobian(field, t, x, h).norm());
		}
		return best;
	}
} // namespace mixdrift
