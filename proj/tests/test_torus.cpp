#include <doctest.h>

#include "mixdrift/gibbs.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>

using namespace mixdrift;

namespace
{
	Vec v2(double a, double b)
	{
		Vec x(2);
		x << a, b;
		return x;
	}

	// exact: U(0,0) = (sin^2(3pi/4) + sin^2(7pi/10))^2 = ((7 + sqrt5)/8)^2
	const double kDoubleWellMax = std::pow((7.0 + std::sqrt(5.0)) / 8.0, 2);

	// periodic rectangle rule at 2048^2, converged to ~1e-15 relative
	const double kDoubleWellZ70 = 0.004834030173216358;
}

TEST_CASE("wrap reduces coordinates into [0,1)")
{
	const auto p = TorusPoint::wrap(v2(1.25, -0.3));
	CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-15));
	CHECK(p[1] == doctest::Approx(0.7).epsilon(1e-15));
	const auto q = TorusPoint::wrap(v2(0.0, 0.999));
	CHECK(q[0] == 0.0);
	CHECK(q[1] == 0.999);
	const auto r = TorusPoint::wrap(v2(-1e-18, 3.0));
	CHECK(r[0] >= 0.0);
	CHECK(r[0] < 1.0);
	CHECK(r[1] == 0.0);
	CHECK_THROWS_AS(TorusPoint::wrap(v2(std::nan(""), 0.0)), PreconditionError);
	CHECK_THROWS_AS(TorusPoint::wrap(v2(INFINITY, 0.0)), PreconditionError);
}

TEST_CASE("torus distance wraps around")
{
	CHECK(torus_distance(v2(0.05, 0), v2(0.95, 0)) == doctest::Approx(0.1).epsilon(1e-12));
	CHECK(torus_distance(v2(0.5, 0.5), v2(0.5, 0.5)) == 0.0);
	CHECK(torus_distance(v2(0.0, 0.0), v2(0.5, 0.5)) == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("potentials are periodic with consistent gradients")
{
	auto spline_samples = std::vector<double>(64);
	for (int k = 0; k < 64; ++k)
		spline_samples[k] = std::cos(kTwoPi * k / 64.0) + 0.3 * std::sin(2 * kTwoPi * k / 64.0);
	std::vector<double> grid(32 * 32);
	for (int a = 0; a < 32; ++a)
		for (int b = 0; b < 32; ++b)
			grid[a * 32 + b] = std::sin(kTwoPi * a / 32.0) * std::cos(kTwoPi * b / 32.0);

	std::vector<PotentialPtr> pots = {
		make_double_well(),
		make_separable(2, std::make_shared<SinSquared>()),
		make_separable(3, std::make_shared<PeriodicCubicSpline>(spline_samples)),
		std::make_shared<GridPotential>(2, 32, grid),
	};
	auto rng = make_stream(11, 0);
	for (const auto &U : pots)
	{
		CAPTURE(to_string(U->kind()));
		const int d = U->dim();
		double worst_period = 0.0, worst_grad = 0.0, worst_hess = 0.0;
		for (int s = 0; s < 1000; ++s)
		{
			Vec x(d);
			for (int a = 0; a < d; ++a)
				x(a) = rng.uniform();
			for (int a = 0; a < d; ++a)
			{
				Vec y = x;
				y(a) += 1.0;
				worst_period = std::max(worst_period, std::abs(U->value(x) - U->value(y)));
			}
			const double h = 1e-5;
			const Vec g = U->gradient(x);
			const Mat H = U->hessian(x);
			Vec fd(d);
			for (int a = 0; a < d; ++a)
			{
				Vec xp = x, xm = x;
				xp(a) += h;
				xm(a) -= h;
				fd(a) = (U->value(xp) - U->value(xm)) / (2 * h);
				const Vec hcol = (U->gradient(xp) - U->gradient(xm)) / (2 * h);
				worst_hess = std::max(worst_hess, (hcol - H.col(a)).norm() / std::max(1.0, H.norm()));
			}
			worst_grad = std::max(worst_grad, (fd - g).norm() / std::max(1.0, g.norm()));
		}
		CHECK(worst_period <= 1e-10);
		CHECK(worst_grad <= 1e-5);
		CHECK(worst_hess <= 1e-5);
	}
}

TEST_CASE("double well minima, symmetry and the cubic spline interpolates its samples")
{
	const auto U = make_double_well();
	for (const auto &m : DoubleWellPotential::minima())
	{
		CHECK(U->value(m) == doctest::Approx(0.0).epsilon(1e-15));
		CHECK(U->gradient(m).norm() < 1e-12);
	}
	CHECK(U->value(v2(0.1, 0.2)) == doctest::Approx(U->value(v2(0.9, 0.8))).epsilon(1e-13));

	std::vector<double> f(40);
	for (int k = 0; k < 40; ++k)
		f[k] = std::sin(kTwoPi * k / 40.0) + 0.5 * std::cos(3 * kTwoPi * k / 40.0);
	PeriodicCubicSpline sp(f);
	for (int k = 0; k < 40; ++k)
		CHECK(sp.value(k / 40.0) == doctest::Approx(f[k]).epsilon(1e-13));
}

TEST_CASE("normalize: zero potential, double well Z and osc")
{
	GibbsMeasure flat(make_zero_potential(3), 0.37);
	flat.normalize(64);
	CHECK(flat.Z() == 1.0);
	CHECK(flat.osc() == 0.0);
	CHECK(flat.density(v2(0.1, 0.9)) == 1.0);

	GibbsMeasure dw(make_double_well(), 1.0 / 70);
	dw.normalize(512);
	CHECK(dw.Z() == doctest::Approx(kDoubleWellZ70).epsilon(1e-9));
	CHECK(dw.osc() == doctest::Approx(kDoubleWellMax).epsilon(1e-12));
	CHECK(dw.u_min() == doctest::Approx(0.0).epsilon(1e-14));

	GibbsMeasure dw2(make_double_well(), 1.0 / 70);
	dw2.normalize(1024);
	CHECK(std::abs(dw2.Z() / dw.Z() - 1) < 1e-6);

	CHECK_THROWS_AS(GibbsMeasure(make_zero_potential(4), 1.0).normalize(64), UnsupportedError);
	CHECK_THROWS_AS(GibbsMeasure(make_double_well(), 1.0).normalize(32), PreconditionError);
	CHECK_THROWS_AS(GibbsMeasure(make_double_well(), 0.0), PreconditionError);
}

TEST_CASE("density integrates to one")
{
	GibbsMeasure dw(make_double_well(), 0.05);
	dw.normalize(512);
	double s = 0.0;
	const int n = 700; // different resolution from the normalization grid
	for (int a = 0; a < n; ++a)
		for (int b = 0; b < n; ++b)
			s += dw.density(v2((a + 0.5) / n, (b + 0.5) / n));
	CHECK(std::abs(s / (n * n) - 1.0) <= 1e-6);
}

TEST_CASE("grid potential file round trip and rejection of bad headers")
{
	const auto dir = std::filesystem::temp_directory_path();
	const auto path = dir / "mixdrift_grid_test.bin";
	std::vector<double> vals(16 * 16);
	for (int a = 0; a < 16; ++a)
		for (int b = 0; b < 16; ++b)
			vals[a * 16 + b] = std::sin(kTwoPi * a / 16.0) + std::cos(kTwoPi * b / 16.0);
	save_grid_potential(path, 2, 16, vals);
	const auto U = load_grid_potential(path);
	CHECK(U->dim() == 2);
	CHECK(U->value(v2(3.0 / 16, 5.0 / 16)) == doctest::Approx(vals[3 * 16 + 5]).epsilon(1e-12));
	{
		std::FILE *f = std::fopen(path.string().c_str(), "r+b");
		std::fputc('X', f);
		std::fclose(f);
	}
	CHECK_THROWS_AS(load_grid_potential(path), Error);
	std::filesystem::remove(path);
}

TEST_CASE("sample_gibbs: uniform, determinism, chi-square fit")
{
	GibbsMeasure flat(make_zero_potential(2), 1.0);
	flat.normalize(64);
	const auto u = sample_gibbs(flat, 4, 3);
	CHECK(u.size() == 4);
	CHECK(!(u[0] == u[1]));

	GibbsMeasure dw(make_double_well(), 0.1);
	dw.normalize(512);
	const std::size_t n = 100000;
	const auto a = sample_gibbs(dw, n, 42, GibbsSampling::rejection, 1);
	const auto b = sample_gibbs(dw, n, 42, GibbsSampling::rejection, 3);
	CHECK(a == b);

	const int bins = 16;
	const auto p = histogram_masses(dw, bins, 16);
	std::vector<double> counts(bins * bins, 0.0);
	for (const auto &x : a)
		counts[std::min(bins - 1, int(x[0] * bins)) * bins + std::min(bins - 1, int(x[1] * bins))] += 1;
	double chi2 = 0.0;
	for (int c = 0; c < bins * bins; ++c)
	{
		const double e = p[c] * n;
		chi2 += (counts[c] - e) * (counts[c] - e) / e;
	}
	const boost::math::chi_squared dist(bins * bins - 1);
	CHECK(chi2 < boost::math::quantile(dist, 0.99));
}

TEST_CASE("inverse-CDF sampling for a separable potential passes KS against an independent marginal")
{
	const auto comp = std::make_shared<SinSquared>();
	GibbsMeasure m(make_separable(2, comp), 0.1);
	m.normalize(256);
	const std::size_t n = 100000;
	const auto xs = sample_gibbs(m, n, 9, GibbsSampling::inverse_cdf);

	auto q = [](double x) { return std::exp(-std::pow(std::sin(kPi * x), 2) / 0.1); };
	using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
	const double z = GK::integrate(q, 0.0, 1.0, 10, 1e-14);
	for (int axis = 0; axis < 2; ++axis)
	{
		std::vector<double> s(n);
		for (std::size_t k = 0; k < n; ++k)
			s[k] = xs[k][axis];
		std::sort(s.begin(), s.end());
		double cdf = 0.0, prev = 0.0, ks = 0.0;
		for (std::size_t k = 0; k < n; ++k)
		{
			cdf += GK::integrate(q, prev, s[k], 5, 1e-13) / z;
			prev = s[k];
			ks = std::max({ks, std::abs(cdf - double(k) / n), std::abs(cdf - double(k + 1) / n)});
		}
		CHECK(ks * std::sqrt(double(n)) < 1.6276);
	}
}

TEST_CASE("marginal CDF is monotone with an accurate inverse")
{
	SinSquared u;
	MarginalCdf T(u, 0.1);
	CHECK(T(0.0) == 0.0);
	CHECK(T(1.0) == 1.0);
	const auto &tab = T.table();
	for (std::size_t k = 1; k < tab.size(); ++k)
		REQUIRE(tab[k] > tab[k - 1]);
	auto rng = make_stream(5, 0);
	double worst = 0.0;
	for (int s = 0; s < 10000; ++s)
	{
		const double x = rng.uniform();
		worst = std::max(worst, std::abs(T.inverse(T(x)) - x));
	}
	CHECK(worst < 1e-8);
	// symmetric density about 1/2
	CHECK(T(0.5) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("Voronoi basin masses of the double well are one half each")
{
	GibbsMeasure dw(make_double_well(), 1.0 / 70);
	dw.normalize(512);
	std::vector<TorusPoint> sites;
	for (const auto &m : DoubleWellPotential::minima())
		sites.push_back(TorusPoint::wrap(m));
	const auto w = voronoi_masses(dw, sites, 512);
	CHECK(w[0] == doctest::Approx(0.5).epsilon(1e-9));
	CHECK(w[0] + w[1] == doctest::Approx(1.0));
}
