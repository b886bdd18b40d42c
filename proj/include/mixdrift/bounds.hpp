#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

namespace mixdrift
{
	/// Mixing rate function h(t): continuous, strictly decreasing, vanishing at infinity.
	using RateFunction = std::function<double(double)>;

	/// h(t) = D exp(-gamma t).
	struct ExponentialRate
	{
		double D = 1.0;
		double gamma = 1.0;

		double operator()(double t) const;
		/// h^{-1}(y), clamped to 0 for y >= D.
		double inverse(double y) const;
		RateFunction function() const;
	};

	/// Unique H with kappa / (4H) = h( sqrt(A / (H grad_v_norm)) / 16 ), by
	/// bisection from H = kappa / (4 h(0)) with a doubled upper bracket.
	double solve_H(double A, double kappa, const RateFunction &h, double grad_v_norm);

	/// |kappa / (4H) - h(...)| relative to kappa / (4H).
	double solve_H_residual(double H, double A, double kappa, const RateFunction &h, double grad_v_norm);

	/// Constant of the closed-form dissipation bound that follows from
	/// t_dis <= 16 (1 + ln 2) / H with T = 1/H solving T = (4D/kappa) exp(-b sqrt T):
	/// C = 16 (1 + ln 2) * 256.
	double closed_form_tdis_constant();

	/// C |grad v| / (gamma^2 A) (1 + ln^2(D gamma^2 A / (kappa |grad v|))).
	double tdis_closed_form(double A, double kappa, const ExponentialRate &rate, double grad_v_norm, double C);

	/// C' kappa |grad v| / gamma^2 ln^2(C' D / kappa).
	double a0_exponential(double kappa, const ExponentialRate &rate, double grad_v_norm, double C_prime = 1.0);

	/// 256 Lambda |grad v| (h^{-1}(kappa / (4 Lambda)))^2, the eigenvalue-gap
	/// part of the threshold on A.
	double a0_from_lambda(double Lambda, double kappa, const ExponentialRate &rate, double grad_v_norm);

	/// 1 + osc/kappa - ln(kappa t_dis); negative values are clamped to 0.
	struct LogFactor
	{
		double value = 0.0;
		bool clamped = false;
	};
	LogFactor tmix_log_factor(double kappa, double osc, double tdis, double scale = 1.0);

	/// (1/kappa) exp(osc / (2 kappa)).
	double tdis_poincare(double kappa, double osc);
	/// Lower bounds on the smallest eigenvalue: 2 pi exp(-osc / (2 kappa)) as
	/// stated, and 4 pi^2 kappa exp(-osc / kappa) with the kappa restored.
	double poincare_as_stated(double kappa, double osc);
	double poincare_corrected(double kappa, double osc);

	/// (pi d (d - 2))^{-1/2} (Gamma(d) / Gamma(d/2))^{1/d}, d >= 3.
	double nash_constant(int d);

	/// Volume of the unit ball in R^d.
	double unit_ball_volume(int d);
	/// omega_d / (2 pi)^d (lambda / kappa)^{d/2}.
	double weyl_leading(double lambda, double kappa, int d);

	struct BoundInputs
	{
		double kappa = 0.0;
		double A = 0.0;
		double D = 0.0;
		double gamma = 0.0;
		double grad_v_norm = 0.0;
		double osc = 0.0;
		int d = 2;
		double C = 1.0;		  // constant of the dissipation and mixing bounds
		double C_prime = 1.0; // constant of A0
	};

	/// Every reported bound holds up to the unspecified universal constants C, C'.
	struct BoundReport
	{
		BoundInputs in;
		double H = 0.0;
		double A0 = 0.0;
		double tdis_from_H = 0.0; // 16 (1 + ln 2) / H
		double tdis_bound = 0.0;  // closed form with constant C
		double tmix_bound = 0.0;
		LogFactor log_factor;
		double tdis_poincare = 0.0;
		double poincare_as_stated = 0.0;
		double poincare_corrected = 0.0;
		std::optional<double> nash_Cd; // d >= 3 only
		double weyl_coefficient = 0.0; // N(lambda) ~ coefficient * lambda^{d/2}

		double weyl_leading(double lambda) const { return weyl_coefficient * std::pow(lambda, 0.5 * in.d); }
	};

	BoundReport bounds_report(const BoundInputs &in);

	/// Single data row with a header line.
	void write_bounds_csv(const std::filesystem::path &path, const BoundReport &r);

	struct DiscreteBounds
	{
		double H = 0.0;
		double N_dis = 0.0;
		double N_mix = 0.0;
		LogFactor log_factor;
	};

	/// sup{lambda : h(sqrt(A) / (2 sqrt(lambda))) <= kappa / (2 lambda)} by bisection.
	double discrete_H(double A, double kappa, const RateFunction &h);
	double discrete_H_residual(double H, double A, double kappa, const RateFunction &h);

	/// N_dis <= C A / H, N_mix <= C d (1 + osc/kappa - ln(kappa N_dis / A)) N_dis.
	DiscreteBounds discrete_bounds(double A, double kappa, const RateFunction &h, double osc, int d, double C = 1.0);
} // namespace mixdrift
