#include <doctest.h>

#include "mixdrift/discrete.hpp"
#include "mixdrift/random.hpp"

#include <algorithm>
#include <cmath>

using namespace mixdrift;

namespace
{
	IntVec iv(std::initializer_list<long long> v)
	{
		IntVec x(static_cast<Eigen::Index>(v.size()));
		Eigen::Index i = 0;
		for (long long a : v)
			x(i++) = a;
		return x;
	}

	std::vector<TorusPoint> uniform_points(std::size_t n, int d, std::uint64_t seed)
	{
		auto rng = make_stream(seed, 0);
		std::vector<TorusPoint> pts;
		pts.reserve(n);
		for (std::size_t k = 0; k < n; ++k)
		{
			Vec x(d);
			for (int a = 0; a < d; ++a)
				x(a) = rng.uniform();
			pts.push_back(TorusPoint::wrap(x));
		}
		return pts;
	}

	PotentialPtr sin_squared(int d) { return make_separable(d, std::make_shared<SinSquared>()); }
}

TEST_CASE("block automorphisms are unimodular and hyperbolic")
{
	for (int d = 2; d <= kMaxDim; ++d)
	{
		const ToralAutomorphism M(d);
		CHECK(M.determinant() == 1);
		CHECK(M.spectral_radius() > 1.0);
	}
	CHECK(ToralAutomorphism(std::vector<int>{3, 2}).determinant() == 1);
	CHECK(ToralAutomorphism(7).blocks() == std::vector<int>{3, 2, 2});
	CHECK_THROWS_AS(ToralAutomorphism(std::vector<int>{4}), PreconditionError);
	const ToralAutomorphism cat(2);
	CHECK(cat.spectral_radius() == doctest::Approx((3.0 + std::sqrt(5.0)) / 2.0).epsilon(1e-14));
	Vec x(2);
	x << 0.3, 0.9;
	const Vec y = cat.apply(x);
	CHECK(y(0) == doctest::Approx(0.5));
	CHECK(y(1) == doctest::Approx(0.2));
}

TEST_CASE("mode growth of the 2x2 block")
{
	const ToralAutomorphism cat(2);
	const auto s = automorphism_correlation(cat, iv({1, 0}), iv({1, 0}), 20);
	const double lambda = (3.0 + std::sqrt(5.0)) / 2.0;
	CHECK(s.norm[20] / s.norm[19] == doctest::Approx(lambda).epsilon(0.01));
	CHECK(s.corr[0] == 1.0);
	for (int n = 1; n <= 20; ++n)
		CHECK(s.corr[n] == 0.0);
	CHECK(s.envelope[20] == doctest::Approx(std::pow(lambda, -20)));
	// exact integer tracking: (M^T)^2 (1, 0) = (5, 3)
	CHECK(s.norm[2] == doctest::Approx(std::sqrt(34.0)));
	// alignment: l = (M^T)^3 k has correlation 1 at n = 3 only
	const auto t = automorphism_correlation(cat, iv({1, 0}), iv({13, 8}), 6);
	CHECK(t.corr[3] == 1.0);
	CHECK(t.corr[2] == 0.0);
	CHECK_THROWS_AS(automorphism_correlation(cat, iv({0, 0}), iv({1, 0}), 3), PreconditionError);
	CHECK_THROWS_AS(automorphism_correlation(cat, iv({1, 0}), iv({1, 0}), 200), ConvergenceError);
	const ToralAutomorphism big(5);
	CHECK(automorphism_correlation(big, iv({1, 0, 0, 0, 1}), iv({1, 0, 0, 0, 1}), 30).corr[0] == 1.0);
}

TEST_CASE("Monte-Carlo correlation of the cat map reaches the floor")
{
	const ToralAutomorphism cat(2);
	const auto pts = uniform_points(1000000, 2, 3);
	auto f = [](const Vec &x) { return std::sqrt(2.0) * std::sin(kTwoPi * x(0)); };
	const auto c = map_correlation([&](const Vec &x) { return cat.apply(x); }, pts, f, f, 8, 1);
	CHECK(c.corr[0] == doctest::Approx(1.0).epsilon(0.01));
	for (int n = 3; n <= 8; ++n)
		CHECK(std::abs(c.corr[n]) <= c.floor[n]);
}

TEST_CASE("automorphism preserves the uniform histogram")
{
	const ToralAutomorphism cat(2);
	auto pts = uniform_points(100000, 2, 8);
	const auto before = empirical_histogram(pts, 16);
	for (auto &p : pts)
		p = TorusPoint::wrap(cat.apply(p.coords()));
	const auto after = empirical_histogram(pts, 16);
	const std::vector<double> u(256, 1.0 / 256);
	// the two histograms share their sample, so compare each to the exact masses
	const double floor = noise_floor(100000, u, 100, 1, false);
	CHECK(tv_distance(before, u) <= floor);
	CHECK(tv_distance(after, u) <= floor);
}

TEST_CASE("transport map")
{
	const ToralAutomorphism cat(2);
	const TransportMap id(make_zero_potential(2), 0.1);
	CHECK(id.identity());
	auto rng = make_stream(2, 0);
	for (int k = 0; k < 100; ++k)
	{
		Vec x(2);
		x << rng.uniform(), rng.uniform();
		CHECK(conjugated_map(id, cat, x) == cat.apply(x));
	}
	CHECK_THROWS_AS(TransportMap(make_double_well(), 0.1), UnsupportedError);

	const TransportMap T(sin_squared(2), 0.1);
	const auto &tab = T.marginal()->table();
	CHECK(tab.front() == 0.0);
	CHECK(tab.back() == 1.0);
	for (std::size_t k = 1; k < tab.size(); ++k)
		REQUIRE(tab[k] > tab[k - 1]);
	double worst = 0.0;
	for (int k = 0; k < 10000; ++k)
	{
		Vec x(2);
		x << rng.uniform(), rng.uniform();
		worst = std::max(worst, (T.inverse(T.forward(x)) - x).cwiseAbs().maxCoeff());
	}
	CHECK(worst < 1e-8);
}

TEST_CASE("transport map sends mu to uniform")
{
	GibbsMeasure mu(sin_squared(2), 0.1);
	mu.normalize();
	const TransportMap T(mu.potential_ptr(), 0.1);
	const std::size_t n = 100000;
	const auto xs = sample_gibbs(mu, n, 12, GibbsSampling::rejection);
	for (int axis = 0; axis < 2; ++axis)
	{
		std::vector<double> u(n);
		for (std::size_t k = 0; k < n; ++k)
			u[k] = T.forward(xs[k].coords())(axis);
		std::sort(u.begin(), u.end());
		double ks = 0.0;
		for (std::size_t k = 0; k < n; ++k)
			ks = std::max({ks, std::abs(u[k] - double(k) / n), std::abs(u[k] - double(k + 1) / n)});
		CHECK(ks * std::sqrt(double(n)) < 1.6276);
	}
}

TEST_CASE("conjugated map preserves mu")
{
	GibbsMeasure mu(sin_squared(2), 0.1);
	mu.normalize();
	const TransportMap T(mu.potential_ptr(), 0.1);
	const ToralAutomorphism cat(2);
	auto xs = sample_gibbs(mu, 100000, 13, GibbsSampling::rejection);
	for (auto &x : xs)
		x = TorusPoint::wrap(conjugated_map(T, cat, x.coords()));
	const auto masses = histogram_masses(mu, 32);
	const auto e = snapshot_tv(xs, masses, 32, 100, 4);
	CHECK(e.tv <= 3.0 * e.noise_floor);
}

TEST_CASE("hybrid chain mixes quickly at large kappa")
{
	GibbsMeasure mu(sin_squared(2), 1.0);
	mu.normalize();
	const TransportMap T(mu.potential_ptr(), 1.0);
	const ToralAutomorphism cat(2);
	HybridChain chain;
	chain.A = 10.0;
	chain.kappa = 1.0;
	chain.potential = mu.potential_ptr();
	chain.map = [&](const Vec &x) { return conjugated_map(T, cat, x); };
	Vec a(2), b(2);
	a << 0.5, 0.5;
	b << 0.0, 0.0;
	const auto r = hybrid_mixing(chain, mu, fourier_mode(2, 0), fourier_mode(2, 0), 6, 5000,
								 {TorusPoint::wrap(a), TorusPoint::wrap(b)}, 5000, 32, 3);
	REQUIRE(r.n_mix >= 0);
	CHECK(r.n_mix <= 20);
	CHECK(r.decay.corr.size() == 7);
	CHECK(std::abs(r.decay.corr[4]) < 0.1 * r.decay.corr[0]);
}

TEST_CASE("without the map the double well stalls")
{
	const double kappa = 1.0 / 20.0;
	GibbsMeasure mu(make_double_well(), kappa);
	mu.normalize();
	HybridChain chain;
	chain.A = 10.0;
	chain.kappa = kappa;
	chain.potential = mu.potential_ptr();
	const auto r = hybrid_mixing(chain, mu, fourier_mode(2, 0), fourier_mode(2, 0), 5, 4000, {}, 1, 16, 5);
	CHECK(r.decay.corr[5] > 0.5 * r.decay.corr[0]);
	CHECK(r.n_mix == -1);
}
