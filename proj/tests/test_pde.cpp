#include <doctest.h>

#include "mixdrift/gibbs.hpp"
#include "mixdrift/pde.hpp"

#include <cmath>

using namespace mixdrift;

namespace
{
	GridPtr flat_grid(double kappa, int n) { return std::make_shared<GridOperator>(make_zero_potential(2), kappa, n); }
	GridPtr well_grid(double kappa, int n) { return std::make_shared<GridOperator>(make_double_well(), kappa, n); }

	FieldPtr sawtooth_field(const PotentialPtr &U, double kappa, std::uint64_t seed = 7)
	{
		return std::make_shared<ShearScheduleField>(ShearSchedule(seed, 2, ProfileKind::sawtooth), U, kappa);
	}

	Eigen::VectorXd random_field(int size, std::uint64_t seed)
	{
		auto rng = make_stream(seed, 0);
		Eigen::VectorXd v(size);
		for (int i = 0; i < size; ++i)
			v(i) = rng.normal();
		return v;
	}

	// smooth mean-zero bump pattern, not an eigenfunction of anything here
	double bumps(const Vec &x)
	{
		return std::sin(kTwoPi * x(0)) * std::cos(kTwoPi * x(1)) + 0.4 * std::cos(2 * kTwoPi * x(0) + 0.3) +
			   0.2 * std::sin(kTwoPi * (x(0) + 2 * x(1)));
	}

	// #{k in Z^2 \ 0 : 4 pi^2 |k|^2 <= lambda}
	int lattice_count(double lambda)
	{
		const int r = static_cast<int>(std::ceil(std::sqrt(lambda) / kTwoPi)) + 1;
		int c = 0;
		for (int a = -r; a <= r; ++a)
			for (int b = -r; b <= r; ++b)
				if ((a != 0 || b != 0) && 4 * kPi * kPi * (a * a + b * b) <= lambda)
					++c;
		return c;
	}
}

TEST_CASE("discrete generator is self adjoint in L2(mu) with the Dirichlet form")
{
	for (const auto &g : {well_grid(1.0 / 20, 48), flat_grid(0.3, 32), well_grid(1.0 / 70, 64)})
	{
		const Eigen::VectorXd f = random_field(g->size(), 1), h = random_field(g->size(), 2);
		const double lhs = -g->inner(g->apply(f), h);
		const double rhs = g->dirichlet(f, h);
		const double scale = std::sqrt(g->dirichlet(f, f) * g->dirichlet(h, h));
		CHECK(std::abs(lhs - rhs) <= 1e-10 * scale);
		const double sym = g->inner(g->apply(f), h) - g->inner(f, g->apply(h));
		CHECK(std::abs(sym) <= 1e-10 * scale);
		// constants are annihilated
		CHECK(g->apply(Eigen::VectorXd::Constant(g->size(), 3.0)).cwiseAbs().maxCoeff() <= 1e-9);
		CHECK(g->weights().sum() == doctest::Approx(1.0).epsilon(1e-13));
	}
}

TEST_CASE("bicubic interpolation reproduces nodes and converges at fourth order")
{
	auto f = [](double a, double b) { return std::sin(kTwoPi * a) * std::cos(kTwoPi * b) + std::cos(kTwoPi * (a - 2 * b)); };
	double err[2];
	int idx = 0;
	for (int n : {32, 64})
	{
		Eigen::VectorXd v(n * n);
		std::vector<double> nodes, pts;
		for (int a = 0; a < n; ++a)
			for (int b = 0; b < n; ++b)
			{
				v(a * n + b) = f((a + 0.5) / n, (b + 0.5) / n);
				nodes.push_back((a + 0.5) / n);
				nodes.push_back((b + 0.5) / n);
			}
		const Eigen::VectorXd back = interpolate_bicubic(n, v, nodes);
		CHECK((back - v).cwiseAbs().maxCoeff() <= 1e-12);
		auto rng = make_stream(3, 0);
		double worst = 0.0;
		for (int s = 0; s < 2000; ++s)
		{
			pts = {rng.uniform(), rng.uniform()};
			const double got = interpolate_bicubic(n, v, pts)(0);
			worst = std::max(worst, std::abs(got - f(pts[0], pts[1])));
		}
		err[idx++] = worst;
	}
	CHECK(err[0] < 1e-3);
	CHECK(err[0] / err[1] > 12.0); // ~16 for fourth order
}

TEST_CASE("heat eigenmode decays at 4 pi^2 kappa")
{
	const double kappa = 0.05;
	auto g = flat_grid(kappa, 128);
	const Eigen::VectorXd th0 = g->sample([](const Vec &x) { return std::cos(kTwoPi * x(0)); });
	const double exact = std::exp(-4 * kPi * kPi * kappa * 0.1);
	for (auto scheme : {DiffusionScheme::tr_bdf2, DiffusionScheme::crank_nicolson, DiffusionScheme::backward_euler})
	{
		PdeOptions o;
		o.dt_max = scheme == DiffusionScheme::crank_nicolson ? 5e-4 : 1e-3;
		o.scheme = scheme;
		BackwardSolver s(g, nullptr, 0.0, +1, o);
		Eigen::VectorXd th = th0;
		evolve(s, th, 0.1, 100);
		CHECK(s.time() == doctest::Approx(0.1));
		CHECK(std::abs(g->l2(th) / g->l2(th0) / exact - 1) <= 0.01);
	}
	const AutonomousDecay k(*g, th0);
	CHECK(std::abs(std::sqrt(k.norm_sq(0.1) / k.norm_sq(0.0)) / exact - 1) <= 0.01);
}

TEST_CASE("energy identity holds for the heat mode and constants stay put")
{
	const double kappa = 0.05;
	auto g = flat_grid(kappa, 256);
	PdeOptions o;
	o.dt_max = 1e-4;
	BackwardSolver s(g, nullptr, 0.0, +1, o);
	Eigen::VectorXd th = g->sample([](const Vec &x) { return std::cos(kTwoPi * x(0)); });
	const auto trace = evolve(s, th, 0.003, 1);
	CHECK(trace.size() == 31);
	CHECK(energy_residual(trace, kappa) <= 1e-3);

	std::vector<PdeTraceRow> flat = {{0, 2, 0, 2}, {0.1, 2, 0, 2}, {0.2, 2, 0, 2}};
	CHECK(energy_residual(flat, kappa) == 0.0);
	CHECK_THROWS_AS(energy_residual({{0, 1, 0, 1}, {0.1, 1, 0, 1}, {0.3, 1, 0, 1}}, kappa), PreconditionError);

	auto gw = well_grid(1.0 / 20, 48);
	BackwardSolver sw(gw, sawtooth_field(make_double_well(), 1.0 / 20), 200.0, +1);
	Eigen::VectorXd c = Eigen::VectorXd::Constant(gw->size(), 1.7);
	for (int k = 0; k < 5; ++k)
		sw.step(c);
	CHECK((c.array() - 1.7).abs().maxCoeff() <= 1e-10);
}

TEST_CASE("backward equation with drift: monotone L2, conserved mean")
{
	const double kappa = 1.0 / 20;
	auto g = well_grid(kappa, 48);
	PdeOptions o;
	o.dt_max = 1.0 / 800;
	BackwardSolver s(g, sawtooth_field(make_double_well(), kappa), 200.0, +1, o);
	CHECK(s.dt() == doctest::Approx(1.0 / 800));
	Eigen::VectorXd th = g->sample(bumps);
	th.array() -= g->mean(th);
	double prev = g->l2(th), worst_mean = 0.0;
	bool monotone = true;
	for (int k = 0; k < 40; ++k)
	{
		s.step(th);
		const double cur = g->l2(th);
		monotone = monotone && cur <= prev * (1 + 1e-10);
		prev = cur;
		worst_mean = std::max(worst_mean, std::abs(g->mean(th)) / cur);
	}
	CHECK(monotone);
	CHECK(worst_mean <= 1e-8);
	CHECK(prev < 0.999 * g->l2(g->sample(bumps).array() - g->mean(g->sample(bumps))));
}

TEST_CASE("density ratio equation contracts L1(mu)")
{
	const double kappa = 1.0 / 10;
	auto g = well_grid(kappa, 48);
	PdeOptions o;
	o.dt_max = 1.0 / 400;
	BackwardSolver s(g, sawtooth_field(make_double_well(), kappa, 3), 100.0, -1, o);
	CHECK(s.scheme() == DiffusionScheme::backward_euler);
	Eigen::VectorXd th = g->sample(bumps);
	th.array() -= g->mean(th);
	double prev = g->l1(th);
	double worst = -1.0;
	for (int k = 0; k < 40; ++k)
	{
		s.step(th);
		const double cur = g->l1(th);
		worst = std::max(worst, cur / prev - 1);
		prev = cur;
	}
	CHECK(worst <= 1e-6);
}

TEST_CASE("implicit step rejects a Crank-Nicolson step above its limit")
{
	auto g = flat_grid(1.0, 64);
	PdeOptions o;
	o.scheme = DiffusionScheme::crank_nicolson;
	o.dt_max = 10 * g->crank_nicolson_dt_limit();
	CHECK_THROWS_AS(BackwardSolver(g, nullptr, 0.0, +1, o), PreconditionError);
	CHECK_THROWS_AS(BackwardSolver(g, nullptr, 0.0, 0, PdeOptions{}), PreconditionError);
}

TEST_CASE("spectrum: flat torus eigenvalue, lattice count and the corrected lower bound")
{
	const double kappa = 0.3;
	auto g = flat_grid(kappa, 128);
	const auto sp = lowest_eigenpairs(*g, 5);
	CHECK(std::abs(sp.eigenvalues[0] / (4 * kPi * kPi * kappa) - 1) <= 0.01);
	// fourfold degenerate, then the (1,1) family
	CHECK(std::abs(sp.eigenvalues[3] / (4 * kPi * kPi * kappa) - 1) <= 0.01);
	CHECK(std::abs(sp.eigenvalues[4] / (8 * kPi * kPi * kappa) - 1) <= 0.01);

	auto g1 = flat_grid(1.0, 128);
	for (double lam : {400.0, 1000.0})
		CHECK(eigenvalue_count(*g1, lam) == lattice_count(lam));
	CHECK(lattice_count(400.0) == 36);

	const double kw = 1.0 / 20;
	auto gw = well_grid(kw, 64);
	GibbsMeasure mu(make_double_well(), kw);
	mu.normalize(512);
	const double lam0 = smallest_eigenvalue(*gw);
	CHECK(lam0 >= 4 * kPi * kPi * kw * std::exp(-mu.osc() / kw));
	CHECK(lam0 < 4 * kPi * kPi * kw);
}

TEST_CASE("Krylov evolution agrees with time stepping")
{
	const double kappa = 1.0 / 10;
	auto g = well_grid(kappa, 48);
	Eigen::VectorXd th = g->sample(bumps);
	th.array() -= g->mean(th);
	const AutonomousDecay k(*g, th);
	PdeOptions o;
	o.dt_max = 2e-4;
	BackwardSolver s(g, nullptr, 0.0, +1, o);
	Eigen::VectorXd x = th;
	evolve(s, x, 0.05, 1000);
	CHECK(std::abs(g->l2(x) / std::sqrt(k.norm_sq(0.05)) - 1) <= 1e-4);
	CHECK(g->l2(k.state(0.05) - x) <= 1e-3 * g->l2(x));
}

TEST_CASE("dissipation time: flat torus, Poincare bound and decrease with A")
{
	const double kappa = 0.5;
	auto g = flat_grid(kappa, 64);
	const auto dict = default_dictionary(*g);
	CHECK(dict.size() == 9);
	for (const auto &e : dict)
		CHECK(g->l2(e.values) == doctest::Approx(1.0));
	CHECK(std::abs(g->inner(dict[0].values, dict[3].values)) < 1e-12);
	const auto r = dissipation_time(g, nullptr, 0.0, dict, 10.0);
	CHECK(r.exact_in_time);
	CHECK(std::abs(r.t_dis / (std::log(2.0) / (4 * kPi * kPi * kappa)) - 1) <= 0.03);
	CHECK(dissipation_time(g, nullptr, 0.0, dict, 1e-3).t_dis == std::numeric_limits<double>::infinity());

	const double kw = 1.0 / 20;
	auto gw = well_grid(kw, 48);
	GibbsMeasure mu(make_double_well(), kw);
	mu.normalize(512);
	const auto rw = dissipation_time(gw, nullptr, 0.0, default_dictionary(*gw), 1e9);
	REQUIRE(rw.reached());
	CHECK(rw.t_dis <= std::exp(mu.osc() / (2 * kw)) / kw);

	// flat torus with plain shears: stirring speeds up dissipation
	const double kf = 1.0 / 50;
	auto gf = flat_grid(kf, 64);
	const auto df = default_dictionary(*gf);
	double prev = dissipation_time(gf, nullptr, 0.0, df, 100.0).t_dis;
	for (double A : {5.0, 20.0, 80.0})
	{
		PdeOptions o;
		o.dt_max = 2e-3;
		const double t = dissipation_time(gf, sawtooth_field(make_zero_potential(2), kf), A, df, 100.0, o).t_dis;
		CAPTURE(A);
		CHECK(t < prev);
		prev = t;
	}
}

TEST_CASE("dissipation time is grid converged")
{
	const double kappa = 1.0 / 50;
	double t[2];
	int idx = 0;
	for (int n : {128, 256})
	{
		auto g = flat_grid(kappa, n);
		PdeOptions o;
		o.dt_max = 2e-3;
		o.dt_max = 5e-3;
		t[idx++] = dissipation_time(g, sawtooth_field(make_zero_potential(2), kappa), 20.0, default_dictionary(*g, false),
									100.0, o)
					   .t_dis;
	}
	MESSAGE("t_dis n=128 ", t[0], " n=256 ", t[1]);
	CHECK(std::abs(t[0] / t[1] - 1) <= 0.03);
}

TEST_CASE("extrapolated halving is flagged")
{
	const double kappa = 0.05;
	auto g = flat_grid(kappa, 32);
	std::vector<DictionaryElement> d = {{"cos", g->sample([](const Vec &x) { return std::cos(kTwoPi * x(0)); })}};
	d[0].values /= g->l2(d[0].values);
	PdeOptions o;
	o.dt_max = 1e-2;
	const auto field = sawtooth_field(make_zero_potential(2), kappa);
	// A tiny A keeps the decay essentially that of the heat mode
	const auto r = dissipation_time(g, field, 1e-3, d, 0.2, o, true);
	REQUIRE(r.any_extrapolated());
	CHECK(std::abs(r.t_dis / (std::log(2.0) / (4 * kPi * kPi * kappa)) - 1) <= 0.03);
	const auto r2 = dissipation_time(g, field, 1e-3, d, 0.2, o, false);
	CHECK(!r2.reached());
}
