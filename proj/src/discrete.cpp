#include "mixdrift/discrete.hpp"

#include "mixdrift/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace mixdrift
{
	namespace
	{
		using i128 = __int128;

		std::vector<int> default_blocks(int dim)
		{
			if (dim < 2)
				throw PreconditionError("ToralAutomorphism: d >= 2 required");
			std::vector<int> b;
			int left = dim;
			if (left % 2 == 1)
			{
				b.push_back(3);
				left -= 3;
			}
			for (; left > 0; left -= 2)
				b.push_back(2);
			return b;
		}

		long long det3(const IntMat &m, int o)
		{
			auto a = [&](int i, int j) { return m(o + i, o + j); };
			return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
				   a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
		}

		double to_double(i128 v) { return static_cast<double>(v); }
	} // namespace

	ToralAutomorphism::ToralAutomorphism(int dim) : ToralAutomorphism(default_blocks(dim)) {}

	ToralAutomorphism::ToralAutomorphism(const std::vector<int> &blocks) : blocks_(blocks)
	{
		int d = 0;
		for (int b : blocks)
		{
			if (b != 2 && b != 3)
				throw PreconditionError("ToralAutomorphism: blocks must be 2 or 3");
			d += b;
		}
		if (d < 2 || d > kMaxDim)
			throw PreconditionError("ToralAutomorphism: dimension out of range");
		M_ = IntMat::Zero(d, d);
		int o = 0;
		for (int b : blocks)
		{
			if (b == 2)
				M_.block(o, o, 2, 2) << 2, 1, 1, 1;
			else
				M_.block(o, o, 3, 3) << 2, -1, 0, 0, 1, 1, 1, 0, 1;
			o += b;
		}
	}

	long long ToralAutomorphism::determinant() const
	{
		long long det = 1;
		int o = 0;
		for (int b : blocks_)
		{
			det *= b == 2 ? M_(o, o) * M_(o + 1, o + 1) - M_(o, o + 1) * M_(o + 1, o) : det3(M_, o);
			o += b;
		}
		return det;
	}

	double ToralAutomorphism::spectral_radius() const
	{
		const Eigen::MatrixXd m = M_.cast<double>();
		return Eigen::EigenSolver<Eigen::MatrixXd>(m, false).eigenvalues().cwiseAbs().maxCoeff();
	}

	Vec ToralAutomorphism::apply(const Vec &x) const
	{
		if (x.size() != dim())
			throw PreconditionError("ToralAutomorphism: dimension mismatch");
		Vec y(dim());
		for (int i = 0; i < dim(); ++i)
		{
			double s = 0.0;
			for (int j = 0; j < dim(); ++j)
				if (M_(i, j) != 0)
					s += static_cast<double>(M_(i, j)) * x(j);
			y(i) = wrap_unit(s);
		}
		return y;
	}

	Vec ToralAutomorphism::apply_n(const Vec &x, int n) const
	{
		Vec y = x;
		for (int k = 0; k < n; ++k)
			y = apply(y);
		return y;
	}

	AutomorphismSeries automorphism_correlation(const ToralAutomorphism &M, const IntVec &k, const IntVec &l, int n_max)
	{
		const int d = M.dim();
		if (k.size() != d || l.size() != d)
			throw PreconditionError("automorphism_correlation: dimension mismatch");
		if (k.isZero())
			throw PreconditionError("automorphism_correlation: k = 0 is not mean zero");
		if (n_max < 0)
			throw PreconditionError("automorphism_correlation: n_max must be >= 0");
		AutomorphismSeries s;
		s.lambda1 = M.spectral_radius();
		std::vector<i128> v(k.data(), k.data() + d), w(d);
		const i128 limit = static_cast<i128>(1) << 120;
		for (int n = 0; n <= n_max; ++n)
		{
			bool equal = true;
			double sq = 0.0;
			for (int i = 0; i < d; ++i)
			{
				equal = equal && v[i] == l(i);
				sq += to_double(v[i]) * to_double(v[i]);
			}
			s.n.push_back(n);
			s.corr.push_back(equal ? 1.0 : 0.0);
			s.norm.push_back(std::sqrt(sq));
			s.envelope.push_back(std::pow(s.lambda1, -n));
			if (n == n_max)
				break;
			// v <- M^T v
			for (int i = 0; i < d; ++i)
			{
				i128 acc = 0;
				for (int j = 0; j < d; ++j)
					acc += static_cast<i128>(M.matrix()(j, i)) * v[j];
				if (acc > limit || acc < -limit)
					throw ConvergenceError("automorphism_correlation: mode index overflow at n = " + std::to_string(n + 1));
				w[i] = acc;
			}
			v.swap(w);
		}
		return s;
	}

	CorrelationSeries map_correlation(const std::function<Vec(const Vec &)> &map, const std::vector<TorusPoint> &samples,
									  const std::function<double(const Vec &)> &f,
									  const std::function<double(const Vec &)> &g, int n_max, int workers)
	{
		const std::size_t N = samples.size();
		if (N < 2)
			throw PreconditionError("map_correlation: need at least 2 samples");
		std::vector<double> prod(N * (n_max + 1));
		parallel_for(N, workers, [&](std::size_t b, std::size_t e) {
			for (std::size_t i = b; i < e; ++i)
			{
				Vec x = samples[i].coords();
				const double fx = f(x);
				for (int n = 0; n <= n_max; ++n)
				{
					if (n > 0)
						x = map(x);
					prod[i * (n_max + 1) + n] = fx * g(x);
				}
			}
		});
		CorrelationSeries out;
		out.samples = N;
		out.dictionary = "map";
		for (int n = 0; n <= n_max; ++n)
		{
			double s = 0.0, q = 0.0;
			for (std::size_t i = 0; i < N; ++i)
			{
				const double p = prod[i * (n_max + 1) + n];
				s += p;
				q += p * p;
			}
			const double mean = s / N;
			out.corr.push_back(mean);
			out.floor.push_back(2.0 * std::sqrt(std::max(0.0, q / N - mean * mean) / N));
		}
		return out;
	}

	TransportMap::TransportMap(PotentialPtr potential, double kappa, int cells) : potential_(std::move(potential))
	{
		if (!potential_)
			throw PreconditionError("TransportMap: null potential");
		if (potential_->kind() == PotentialKind::zero)
			return;
		const auto *u = potential_->separable_component();
		if (!u)
			throw UnsupportedError("TransportMap: separable potential required");
		if (!(kappa > 0.0))
			throw PreconditionError("TransportMap: kappa must be positive");
		cdf_ = std::make_shared<MarginalCdf>(*u, kappa, cells);
	}

	Vec TransportMap::forward(const Vec &x) const
	{
		Vec y = x;
		if (cdf_)
			for (Eigen::Index i = 0; i < x.size(); ++i)
				y(i) = (*cdf_)(wrap_unit(x(i)));
		return y;
	}

	Vec TransportMap::inverse(const Vec &y) const
	{
		Vec x = y;
		if (cdf_)
			for (Eigen::Index i = 0; i < y.size(); ++i)
				x(i) = cdf_->inverse(wrap_unit(y(i)));
		return x;
	}

	Vec conjugated_map(const TransportMap &T, const ToralAutomorphism &Psi, const Vec &x)
	{
		if (T.dim() != Psi.dim())
			throw PreconditionError("conjugated_map: dimension mismatch");
		return T.inverse(Psi.apply(T.forward(x)));
	}

	void HybridChain::advance(Ensemble &ens, int n) const
	{
		if (!(A > 0.0))
			throw PreconditionError("HybridChain: A must be positive");
		SdeConfig cfg;
		cfg.kappa = kappa;
		cfg.A = 0.0;
		cfg.dt = dt;
		cfg.workers = workers;
		for (int k = 0; k < n; ++k)
		{
			cfg.t_end = ens.time() + 1.0 / A;
			ens.evolve(cfg, nullptr, *potential, {});
			if (map)
				ens.apply_map(map, workers);
		}
	}

	HybridMixingResult hybrid_mixing(const HybridChain &chain, const GibbsMeasure &mu, const TestFunction &f,
									 const TestFunction &g, int n_steps, std::size_t decay_samples,
									 const std::vector<TorusPoint> &starts, std::size_t n_traj, int bins,
									 std::uint64_t seed)
	{
		if (mu.dim() != 2)
			throw UnsupportedError("hybrid_mixing: d = 2 only");
		if (n_steps < 1)
			throw PreconditionError("hybrid_mixing: n_steps must be >= 1");
		HybridMixingResult out;

		const auto fn = normalize_test_function(mu, f);
		const auto gn = normalize_test_function(mu, g);
		Ensemble ens(sample_gibbs(mu, decay_samples, seed, GibbsSampling::automatic, chain.workers),
					 make_stream(seed, 1)());
		std::vector<double> f0(ens.size());
		for (std::size_t i = 0; i < ens.size(); ++i)
			f0[i] = fn(ens.positions()[i].coords());
		auto record = [&] {
			double s = 0.0, q = 0.0;
			for (std::size_t i = 0; i < ens.size(); ++i)
			{
				const double p = f0[i] * gn(ens.positions()[i].coords());
				s += p;
				q += p * p;
			}
			const double N = static_cast<double>(ens.size());
			const double mean = s / N;
			out.decay.corr.push_back(mean);
			out.decay.floor.push_back(2.0 * std::sqrt(std::max(0.0, q / N - mean * mean) / N));
		};
		record();
		for (int n = 1; n <= n_steps; ++n)
		{
			chain.advance(ens, 1);
			record();
		}
		out.decay.samples = ens.size();
		out.decay.dictionary = f.name + "|" + g.name;

		const auto masses = histogram_masses(mu, bins);
		const double floor = noise_floor(n_traj, masses, 100, seed, false);
		std::vector<double> worst(n_steps + 1, 0.0);
		out.mixing.t_max = n_steps;
		for (std::size_t s = 0; s < starts.size(); ++s)
		{
			auto e = Ensemble::dirac(starts[s], n_traj, make_stream(seed, s + 2)());
			for (int n = 0; n <= n_steps; ++n)
			{
				if (n > 0)
					chain.advance(e, 1);
				const double tv = std::max(0.0, tv_distance(empirical_histogram(e.positions(), bins), masses) - floor);
				out.mixing.rows.push_back({static_cast<double>(n), static_cast<int>(s), tv});
				worst[n] = std::max(worst[n], tv);
			}
		}
		out.mixing.t_mix = std::numeric_limits<double>::infinity();
		if (!starts.empty())
			for (int n = 0; n <= n_steps; ++n)
				if (worst[n] <= kMixingTvThreshold)
				{
					out.n_mix = n;
					out.mixing.t_mix = n;
					break;
				}
		return out;
	}
} // namespace mixdrift
