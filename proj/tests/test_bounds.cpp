#include <doctest.h>

#include "mixdrift/bounds.hpp"
#include "mixdrift/core.hpp"
#include "mixdrift/random.hpp"

#include <cmath>
#include <utility>
#include <vector>

using namespace mixdrift;

namespace
{
	double log_uniform(Xoshiro256 &rng, double lo, double hi)
	{
		return std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * rng.uniform());
	}

	double loglog_slope(const std::vector<double> &x, const std::vector<double> &y)
	{
		double mx = 0, my = 0;
		for (std::size_t k = 0; k < x.size(); ++k)
		{
			mx += std::log(x[k]);
			my += std::log(y[k]);
		}
		mx /= x.size();
		my /= x.size();
		double sxy = 0, sxx = 0;
		for (std::size_t k = 0; k < x.size(); ++k)
		{
			sxy += (std::log(x[k]) - mx) * (std::log(y[k]) - my);
			sxx += (std::log(x[k]) - mx) * (std::log(x[k]) - mx);
		}
		return sxy / sxx;
	}
}

TEST_CASE("solve_H residual and monotonicity")
{
	auto rng = make_stream(4, 0);
	for (int k = 0; k < 200; ++k)
	{
		const ExponentialRate rate{log_uniform(rng, 1e-2, 1e6), log_uniform(rng, 0.05, 5.0)};
		const double A = log_uniform(rng, 1e-2, 1e6), kappa = log_uniform(rng, 1e-3, 1.0);
		const double g = log_uniform(rng, 0.1, 1e3);
		const double H = solve_H(A, kappa, rate.function(), g);
		CHECK(solve_H_residual(H, A, kappa, rate.function(), g) <= 1e-10);
		CHECK(solve_H(4.0 * A, kappa, rate.function(), g) > H);
		CHECK(solve_H(A, kappa, ExponentialRate{2.0 * rate.D, rate.gamma}.function(), g) < H);
	}
	// e^{-t}: kappa / (4H) = exp(-sqrt(A / H) / 16) for |grad v| = 1
	const double H = solve_H(100.0, 0.1, [](double t) { return std::exp(-t); }, 1.0);
	CHECK(0.1 / (4.0 * H) == doctest::Approx(std::exp(-std::sqrt(100.0 / H) / 16.0)).epsilon(1e-12));
}

TEST_CASE("solve_H rejects malformed rate functions")
{
	CHECK_THROWS_AS(solve_H(1.0, 0.1, [](double) { return 0.0; }, 1.0), ConvergenceError);
	CHECK_THROWS_AS(solve_H(1.0, 0.1, [](double t) { return std::exp(t); }, 1.0), ConvergenceError);
	CHECK_THROWS_AS(solve_H(-1.0, 0.1, [](double t) { return std::exp(-t); }, 1.0), PreconditionError);
}

TEST_CASE("closed-form dissipation bound dominates the H bound")
{
	auto rng = make_stream(5, 0);
	const double C = closed_form_tdis_constant();
	CHECK(C == doctest::Approx(4096.0 * (1.0 + std::log(2.0))));
	for (int k = 0; k < 100; ++k)
	{
		const ExponentialRate rate{log_uniform(rng, 1e-3, 1e8), log_uniform(rng, 0.01, 10.0)};
		const double A = log_uniform(rng, 1e-3, 1e8), kappa = log_uniform(rng, 1e-3, 1.0);
		const double g = log_uniform(rng, 0.01, 1e4);
		const double H = solve_H(A, kappa, rate.function(), g);
		CHECK(tdis_closed_form(A, kappa, rate, g, C) >= 16.0 * (1.0 + std::log(2.0)) / H);
	}
}

namespace
{
	// tdis and tmix bounds at A = A0 under D = sqrt(d) e^{1/kappa}, gamma = 1, |grad v| = sqrt(d) / kappa
	std::pair<double, double> heuristic_slopes(const std::vector<int> &inverse_kappas)
	{
		const int d = 2;
		std::vector<double> ks, td, tm;
		for (int inv : inverse_kappas)
		{
			const double kappa = 1.0 / inv;
			BoundInputs in;
			in.kappa = kappa;
			in.D = std::sqrt(double(d)) * std::exp(1.0 / kappa);
			in.gamma = 1.0;
			in.grad_v_norm = std::sqrt(double(d)) / kappa;
			in.osc = 1.3328890618;
			in.d = d;
			in.A = a0_exponential(kappa, ExponentialRate{in.D, in.gamma}, in.grad_v_norm);
			const auto r = bounds_report(in);
			REQUIRE(r.A0 == doctest::Approx(in.A));
			REQUIRE_FALSE(r.log_factor.clamped);
			ks.push_back(kappa);
			td.push_back(r.tdis_bound);
			tm.push_back(r.tmix_bound);
		}
		return {loglog_slope(ks, td), loglog_slope(ks, tm)};
	}
}

TEST_CASE("polynomial scaling at the A0 threshold")
{
	// ln^2 corrections of relative size ~ kappa ln(1/kappa) keep the local
	// slopes shallower than -1 and -2 at moderate kappa
	const auto [s_dis, s_mix] = heuristic_slopes({10, 15, 20, 25, 30, 35, 40});
	CHECK(s_dis == doctest::Approx(-0.8342).epsilon(1e-3));
	CHECK(s_mix == doctest::Approx(-1.8137).epsilon(1e-3));
	CHECK(std::abs(s_mix + 2.0) <= 0.15 * 2.0);
	const auto [a_dis, a_mix] = heuristic_slopes({100, 200, 300, 400, 500, 600});
	CHECK(std::abs(a_dis + 1.0) <= 0.05);
	CHECK(std::abs(a_mix + 2.0) <= 0.05 * 2.0);
}

TEST_CASE("report constants")
{
	// Nash constant at d = 3 against a long-double evaluation
	const long double pi = 3.141592653589793238462643383279502884L;
	const long double c3 = std::pow(2.0L / (std::sqrt(pi) / 2.0L), 1.0L / 3.0L) / std::sqrt(3.0L * pi);
	CHECK(nash_constant(3) == doctest::Approx(double(c3)).epsilon(1e-14));
	CHECK_THROWS_AS(nash_constant(2), PreconditionError);

	CHECK(weyl_leading(400.0, 0.5, 2) == doctest::Approx(400.0 / (4.0 * kPi * 0.5)).epsilon(1e-14));
	CHECK(unit_ball_volume(3) == doctest::Approx(4.0 * kPi / 3.0).epsilon(1e-14));

	BoundInputs in;
	in.kappa = 0.05;
	in.A = 200.0;
	in.D = 3.0;
	in.gamma = 0.5;
	in.grad_v_norm = 40.0;
	in.osc = 1.3;
	in.d = 3;
	const auto r = bounds_report(in);
	CHECK(r.tdis_poincare == doctest::Approx(20.0 * std::exp(13.0)));
	CHECK(r.poincare_as_stated == doctest::Approx(kTwoPi * std::exp(-13.0)));
	CHECK(r.poincare_corrected == doctest::Approx(4.0 * kPi * kPi * 0.05 * std::exp(-26.0)));
	REQUIRE(r.nash_Cd.has_value());
	CHECK(*r.nash_Cd == doctest::Approx(double(c3)));
	CHECK(r.weyl_leading(2.0) == doctest::Approx(weyl_leading(2.0, 0.05, 3)));
	CHECK(r.H > 0.0);
	CHECK(r.tmix_bound > 0.0);
	in.d = 2;
	CHECK_FALSE(bounds_report(in).nash_Cd.has_value());
}

TEST_CASE("log factor sign guard")
{
	const auto ok = tmix_log_factor(0.1, 1.0, 5.0);
	CHECK(ok.value == doctest::Approx(1.0 + 10.0 - std::log(0.5)));
	CHECK_FALSE(ok.clamped);
	const auto bad = tmix_log_factor(0.1, 1.0, 10.0 * std::exp(12.0));
	CHECK(bad.value == 0.0);
	CHECK(bad.clamped);
}

TEST_CASE("discrete H")
{
	const auto h = [](double t) { return std::exp(-t); };
	const double H = discrete_H(100.0, 0.1, h);
	CHECK(discrete_H_residual(H, 100.0, 0.1, h) <= 1e-10);
	double prev = 0.0;
	for (double A : {1.0, 3.0, 10.0, 30.0, 100.0, 300.0, 1000.0})
	{
		const double h_a = discrete_H(A, 0.1, h);
		CHECK(h_a >= prev);
		prev = h_a;
		CHECK(discrete_H(A, 0.1, [](double t) { return 10.0 * std::exp(-t); }) < h_a);
	}
	const auto b = discrete_bounds(100.0, 0.1, h, 1.0, 2);
	CHECK(b.N_dis == doctest::Approx(100.0 / H));
	CHECK(b.N_mix == doctest::Approx(2.0 * (1.0 + 10.0 - std::log(0.1 * b.N_dis / 100.0)) * b.N_dis));
}
