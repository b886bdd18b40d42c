#include "mixdrift/bounds.hpp"

#include "mixdrift/core.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

namespace mixdrift
{
	namespace
	{
		// Root of a decreasing function with F(lo) >= 0 > F(hi), lo > 0.
		template <typename F>
		double bisect_decreasing(F &&f, double lo, double hi)
		{
			for (int it = 0; it < 400 && hi - lo > 4e-16 * hi; ++it)
			{
				const double mid = hi > 4.0 * lo ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
				(f(mid) >= 0.0 ? lo : hi) = mid;
			}
			return std::abs(f(lo)) <= std::abs(f(hi)) ? lo : hi;
		}

		void require_positive(double v, const char *what)
		{
			if (!(v > 0.0) || !std::isfinite(v))
				throw PreconditionError(std::string(what) + " must be positive and finite");
		}
	} // namespace

	double ExponentialRate::operator()(double t) const { return D * std::exp(-gamma * t); }

	double ExponentialRate::inverse(double y) const { return y >= D ? 0.0 : std::log(D / y) / gamma; }

	RateFunction ExponentialRate::function() const
	{
		const ExponentialRate r = *this;
		return [r](double t) { return r(t); };
	}

	double solve_H_residual(double H, double A, double kappa, const RateFunction &h, double grad_v_norm)
	{
		const double lhs = kappa / (4.0 * H);
		return std::abs(lhs - h(std::sqrt(A / (H * grad_v_norm)) / 16.0)) / lhs;
	}

	double solve_H(double A, double kappa, const RateFunction &h, double grad_v_norm)
	{
		require_positive(A, "A");
		require_positive(kappa, "kappa");
		require_positive(grad_v_norm, "|grad v|");
		const double h0 = h(0.0);
		if (!(h0 > 0.0) || !std::isfinite(h0))
			throw ConvergenceError("solve_H: bracket failure, h(0) must be positive and finite (malformed h)");
		auto F = [&](double H) { return kappa / (4.0 * H) - h(std::sqrt(A / (H * grad_v_norm)) / 16.0); };
		const double lo = kappa / (4.0 * h0);
		if (F(lo) < 0.0)
			throw ConvergenceError("solve_H: bracket failure at the lower end (malformed h)");
		double hi = 2.0 * lo;
		int doublings = 0;
		while (F(hi) >= 0.0)
		{
			hi *= 2.0;
			if (++doublings > 2000 || !std::isfinite(hi))
				throw ConvergenceError("solve_H: bracket failure, no sign change (malformed h)");
		}
		return bisect_decreasing(F, lo, hi);
	}

	double closed_form_tdis_constant() { return 16.0 * (1.0 + std::log(2.0)) * 256.0; }

	double tdis_closed_form(double A, double kappa, const ExponentialRate &rate, double grad_v_norm, double C)
	{
		const double g2 = rate.gamma * rate.gamma;
		const double l = std::log(rate.D * g2 * A / (kappa * grad_v_norm));
		return C * grad_v_norm / (g2 * A) * (1.0 + l * l);
	}

	double a0_exponential(double kappa, const ExponentialRate &rate, double grad_v_norm, double C_prime)
	{
		const double l = std::log(C_prime * rate.D / kappa);
		return C_prime * kappa * grad_v_norm / (rate.gamma * rate.gamma) * l * l;
	}

	double a0_from_lambda(double Lambda, double kappa, const ExponentialRate &rate, double grad_v_norm)
	{
		const double t = rate.inverse(kappa / (4.0 * Lambda));
		return 256.0 * Lambda * grad_v_norm * t * t;
	}

	LogFactor tmix_log_factor(double kappa, double osc, double tdis, double scale)
	{
		LogFactor f;
		f.value = 1.0 + osc / kappa - std::log(kappa * tdis / scale);
		if (f.value < 0.0)
		{
			f.value = 0.0;
			f.clamped = true;
		}
		return f;
	}

	double tdis_poincare(double kappa, double osc) { return std::exp(osc / (2.0 * kappa)) / kappa; }

	double poincare_as_stated(double kappa, double osc) { return kTwoPi * std::exp(-osc / (2.0 * kappa)); }

	double poincare_corrected(double kappa, double osc) { return 4.0 * kPi * kPi * kappa * std::exp(-osc / kappa); }

	double nash_constant(int d)
	{
		if (d < 3)
			throw PreconditionError("nash_constant: d >= 3 required");
		return std::pow(std::tgamma(d) / std::tgamma(0.5 * d), 1.0 / d) / std::sqrt(kPi * d * (d - 2));
	}

	double unit_ball_volume(int d)
	{
		if (d < 1)
			throw PreconditionError("unit_ball_volume: d >= 1 required");
		return std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
	}

	double weyl_leading(double lambda, double kappa, int d)
	{
		return unit_ball_volume(d) / std::pow(kTwoPi, d) * std::pow(lambda / kappa, 0.5 * d);
	}

	BoundReport bounds_report(const BoundInputs &in)
	{
		require_positive(in.kappa, "kappa");
		require_positive(in.A, "A");
		require_positive(in.D, "D");
		require_positive(in.gamma, "gamma");
		require_positive(in.grad_v_norm, "|grad v|");
		if (!(in.osc >= 0.0))
			throw PreconditionError("osc must be nonnegative");
		if (in.d < 2)
			throw PreconditionError("d >= 2 required");
		const ExponentialRate rate{in.D, in.gamma};
		BoundReport r;
		r.in = in;
		r.H = solve_H(in.A, in.kappa, rate.function(), in.grad_v_norm);
		r.A0 = a0_exponential(in.kappa, rate, in.grad_v_norm, in.C_prime);
		r.tdis_from_H = 16.0 * (1.0 + std::log(2.0)) / r.H;
		r.tdis_bound = tdis_closed_form(in.A, in.kappa, rate, in.grad_v_norm, in.C);
		r.log_factor = tmix_log_factor(in.kappa, in.osc, r.tdis_bound);
		r.tmix_bound = in.C * in.d * r.log_factor.value * r.tdis_bound;
		r.tdis_poincare = tdis_poincare(in.kappa, in.osc);
		r.poincare_as_stated = poincare_as_stated(in.kappa, in.osc);
		r.poincare_corrected = poincare_corrected(in.kappa, in.osc);
		if (in.d >= 3)
			r.nash_Cd = nash_constant(in.d);
		r.weyl_coefficient = weyl_leading(1.0, in.kappa, in.d);
		return r;
	}

	void write_bounds_csv(const std::filesystem::path &path, const BoundReport &r)
	{
		std::ofstream out(path);
		if (!out)
			throw Error("cannot write " + path.string());
		out << "kappa,A,D,gamma,grad_v_norm,osc,d,C,C_prime,H,A0,tdis_from_H,tdis_bound,tmix_bound,log_factor,"
			   "log_factor_clamped,tdis_poincare,poincare_as_stated,poincare_corrected,nash_Cd,weyl_coefficient\n";
		out << std::setprecision(17) << r.in.kappa << ',' << r.in.A << ',' << r.in.D << ',' << r.in.gamma << ','
			<< r.in.grad_v_norm << ',' << r.in.osc << ',' << r.in.d << ',' << r.in.C << ',' << r.in.C_prime << ','
			<< r.H << ',' << r.A0 << ',' << r.tdis_from_H << ',' << r.tdis_bound << ',' << r.tmix_bound << ','
			<< r.log_factor.value << ',' << (r.log_factor.clamped ? 1 : 0) << ',' << r.tdis_poincare << ','
			<< r.poincare_as_stated << ',' << r.poincare_corrected << ',';
		if (r.nash_Cd)
			out << *r.nash_Cd;
		else
			out << "NA";
		out << ',' << r.weyl_coefficient << '\n';
	}

	double discrete_H_residual(double H, double A, double kappa, const RateFunction &h)
	{
		const double rhs = kappa / (2.0 * H);
		return std::abs(h(std::sqrt(A) / (2.0 * std::sqrt(H))) - rhs) / rhs;
	}

	double discrete_H(double A, double kappa, const RateFunction &h)
	{
		require_positive(A, "A");
		require_positive(kappa, "kappa");
		auto G = [&](double l) { return kappa / (2.0 * l) - h(std::sqrt(A) / (2.0 * std::sqrt(l))); };
		double lo = 1.0, hi = 1.0;
		int it = 0;
		while (G(lo) < 0.0)
		{
			lo *= 0.5;
			if (++it > 2000 || lo == 0.0)
				throw ConvergenceError("discrete_H: bracket failure (malformed h)");
		}
		it = 0;
		while (G(hi) >= 0.0)
		{
			hi *= 2.0;
			if (++it > 2000 || !std::isfinite(hi))
				throw ConvergenceError("discrete_H: bracket failure (malformed h)");
		}
		return bisect_decreasing(G, lo, hi);
	}

	DiscreteBounds discrete_bounds(double A, double kappa, const RateFunction &h, double osc, int d, double C)
	{
		DiscreteBounds b;
		b.H = discrete_H(A, kappa, h);
		b.N_dis = C * A / b.H;
		b.log_factor = tmix_log_factor(kappa, osc, b.N_dis, A);
		b.N_mix = C * d * b.log_factor.value * b.N_dis;
		return b;
	}
} // namespace mixdrift
