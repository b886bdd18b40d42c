#include <doctest.h>

#include "mixdrift/flows.hpp"
#include "mixdrift/gibbs.hpp"
#include "mixdrift/random.hpp"

#include <cmath>

using namespace mixdrift;

namespace
{
	Vec v2(double a, double b)
	{
		Vec x(2);
		x << a, b;
		return x;
	}

	double stream_value(const ShearScheduleField &f, std::int64_t n, const Vec &x)
	{
		const auto t = f.schedule().tuple(n);
		const int m = t.orientation == 1 ? t.j : t.i;
		return std::exp(-f.potential().value(x) / f.kappa()) * f.schedule().profile().value(x(m) - t.alpha);
	}
}

TEST_CASE("plain shear closed form matches integration")
{
	ShearScheduleField f(ShearSchedule(11, 2, ProfileKind::sine), make_zero_potential(2), 0.1);
	FlowOptions exact, ode;
	ode.closed_form = false;
	auto rng = make_stream(5, 0);
	for (int k = 0; k < 20; ++k)
	{
		const Vec x = v2(rng.uniform(), rng.uniform());
		const auto a = flow_segment(f, k, x, exact);
		const auto b = flow_segment(f, k, x, ode);
		CHECK(torus_distance(a.position, b.position) < 1e-9);
		CHECK((a.jacobian - b.jacobian).norm() < 1e-8);
		CHECK(a.jacobian.determinant() == doctest::Approx(1.0).epsilon(1e-14));
	}
}

TEST_CASE("plain shear moves one axis by beta F'")
{
	ShearScheduleField f(ShearSchedule(3, 2, ProfileKind::sine), make_zero_potential(2), 1.0);
	const auto t = f.schedule().tuple(0);
	const Vec x = v2(0.1, 0.2);
	const auto r = flow_segment(f, 0.0, x);
	Vec expect = x;
	if (t.orientation == 1)
		expect(0) -= t.beta * kTwoPi * std::cos(kTwoPi * (x(1) - t.alpha));
	else
		expect(1) += t.beta * kTwoPi * std::cos(kTwoPi * (x(0) - t.alpha));
	CHECK(torus_distance(r.position, TorusPoint::wrap(expect)) < 1e-12);
}

TEST_CASE("modified shear flow preserves the Gibbs density")
{
	const double kappa = 0.1;
	auto U = make_double_well();
	GibbsMeasure mu(U, kappa);
	mu.normalize();
	for (auto prof : {ProfileKind::sine, ProfileKind::sawtooth, ProfileKind::localized_tent})
	{
		ShearScheduleField f(ShearSchedule(21, 2, prof), U, kappa);
		auto rng = make_stream(8, 1);
		double worst = 0.0;
		for (int k = 0; k < 40; ++k)
		{
			const Vec x = v2(rng.uniform(), rng.uniform());
			const auto r = flow_segment(f, k, x);
			const double lhs = mu.density(r.position.coords()) * r.jacobian.determinant();
			worst = std::max(worst, std::abs(lhs / mu.density(x) - 1.0));
			CHECK(stream_value(f, k, r.position.coords()) == doctest::Approx(stream_value(f, k, x)).epsilon(1e-7));
		}
		CHECK(worst < 1e-4);
	}
}

TEST_CASE("segment composition")
{
	ShearScheduleField f(ShearSchedule(4, 2, ProfileKind::sine), make_double_well(), 0.2);
	const Vec x = v2(0.3, 0.9);
	const auto a = flow_segment(f, 0.0, x);
	const auto b = flow_segment(f, 1.0, a.position.coords());
	const auto c = flow_segments(f, 0, 2, x);
	CHECK(torus_distance(b.position, c.position) < 1e-14);
	CHECK((b.jacobian * a.jacobian - c.jacobian).norm() < 1e-12);

	ProjectiveState s{TorusPoint::wrap(x), v2(1.0, 0.0)};
	const double g = projective_step(f, 0, s, {}) + projective_step(f, 1, s, {});
	CHECK(g == doctest::Approx(std::log((c.jacobian * v2(1.0, 0.0)).norm())).epsilon(1e-12));
	CHECK(torus_distance(s.position, c.position) < 1e-14);
}

TEST_CASE("flow rejects intervals crossing a switch")
{
	ShearScheduleField f(ShearSchedule(4, 2, ProfileKind::sine), make_zero_potential(2), 0.2);
	CHECK_THROWS_AS(flow_segment(f, 0.5, v2(0.1, 0.1)), PreconditionError);
}

TEST_CASE("alternating shear cocycle oracle")
{
	// Product of one period is [[1+s^2, s], [s, 1]].
	for (double s : {0.5, 1.0, 2.0})
	{
		Mat M1(2, 2), M2(2, 2);
		M1 << 1, s, 0, 1;
		M2 << 1, 0, s, 1;
		const double tr = 2.0 + s * s;
		const double rho = 0.5 * (tr + std::sqrt(tr * tr - 4.0));
		auto next = [&](std::int64_t n, const Vec &u) { return Vec((n % 2 == 0 ? M1 : M2) * u); };
		const auto e = lyapunov_cocycle(next, v2(0.3, 0.7), 20000);
		CHECK(e.lambda == doctest::Approx(0.5 * std::log(rho)).epsilon(1e-3));
		CHECK(e.half_width < 1e-3);
	}
}

TEST_CASE("zero amplitude schedule has zero exponent")
{
	ShearScheduleField f(ShearSchedule(4, 2, ProfileKind::sawtooth, 0.0, 0.0), make_zero_potential(2), 0.1);
	const auto e = lyapunov_top(f, v2(0.2, 0.4), 2000, 1);
	CHECK(e.lambda == 0.0);
	CHECK(e.half_width == 0.0);
}

TEST_CASE("sawtooth schedule stretches")
{
	ShearScheduleField f(ShearSchedule(9, 2, ProfileKind::sawtooth), make_zero_potential(2), 0.1);
	std::vector<std::pair<std::int64_t, double>> trace;
	const auto e = lyapunov_top(f, v2(0.2, 0.4), 20000, 1, {}, &trace, 1000);
	CHECK(e.lambda - e.half_width > 0.0);
	CHECK(trace.size() == 20);
	CHECK(trace.back().second == doctest::Approx(e.lambda).epsilon(1e-12));
}

TEST_CASE("two point span")
{
	std::vector<double> alphas;
	for (int k = 0; k < 8; ++k)
		alphas.push_back(k / 8.0 + 0.031);
	auto rng = make_stream(2, 0);
	for (auto [U, kappa] : {std::pair{make_zero_potential(2), 1.0}, std::pair{make_double_well(), 0.1}})
	{
		for (int k = 0; k < 20; ++k)
		{
			const Vec x = v2(rng.uniform(), rng.uniform());
			const Vec y = v2(rng.uniform(), rng.uniform());
			const auto r = two_point_span_rank(ShearProfile(ProfileKind::sine), *U, kappa, x, y, alphas);
			CHECK(r.rank == 4);
			CHECK(r.sv_ratio > 1e-6);
		}
	}
	CHECK_THROWS_AS(two_point_span_rank(ShearProfile(ProfileKind::sine), *make_zero_potential(2), 1.0, v2(0.1, 0.2),
										v2(0.1, 0.2), alphas),
					PreconditionError);
}

TEST_CASE("return map agrees with direct integration")
{
	FlowOptions direct;
	direct.return_map = false;
	direct.rtol = 1e-12;
	direct.atol = 1e-14;
	for (auto prof : {ProfileKind::sine, ProfileKind::sawtooth})
	{
		ShearScheduleField f(ShearSchedule(8, 2, prof), make_double_well(), 0.2);
		auto rng = make_stream(1, 0);
		for (int k = 0; k < 10; ++k)
		{
			const Vec x = v2(rng.uniform(), rng.uniform());
			const auto a = flow_segment(f, k, x);
			const auto b = flow_segment(f, k, x, direct);
			CHECK(torus_distance(a.position, b.position) < 1e-8);
			CHECK((a.jacobian - b.jacobian).norm() < 1e-6 * b.jacobian.norm());
			CHECK(torus_distance(flow_point(f, k, x), b.position) < 1e-7);
		}
	}
}
