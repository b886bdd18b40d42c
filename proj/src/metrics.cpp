#include "mixdrift/metrics.hpp"

#include "mixdrift/parallel.hpp"
#include "mixdrift/random.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>

namespace mixdrift
{
	namespace
	{
		constexpr std::size_t kBlock = 1024;

		struct Moments
		{
			std::vector<double> sum, sq;
		};

		CorrelationSeries finish(const std::vector<Moments> &blocks, int n_max, std::size_t N, std::string name)
		{
			CorrelationSeries out;
			out.dictionary = std::move(name);
			out.samples = N;
			out.corr.assign(n_max + 1, 0.0);
			out.floor.assign(n_max + 1, 0.0);
			for (int n = 0; n <= n_max; ++n)
			{
				double s = 0.0, q = 0.0;
				for (const auto &b : blocks)
				{
					s += b.sum[n];
					q += b.sq[n];
				}
				const double mean = s / N;
				const double var = std::max(0.0, q / N - mean * mean);
				out.corr[n] = mean;
				out.floor[n] = 2.0 * std::sqrt(var / N);
			}
			return out;
		}

		template <typename PerSample>
		CorrelationSeries run_blocks(const GibbsMeasure &mu, int n_max, std::size_t N, std::uint64_t seed, int workers,
									 std::string name, PerSample &&per_sample)
		{
			if (n_max < 0)
				throw PreconditionError("correlation_decay: n_max must be >= 0");
			if (N < 2)
				throw PreconditionError("correlation_decay: need at least 2 samples");
			const auto xs = sample_gibbs(mu, N, seed, GibbsSampling::automatic, workers);
			const std::size_t nb = (N + kBlock - 1) / kBlock;
			std::vector<Moments> blocks(nb);
			parallel_for(nb, workers, [&](std::size_t b0, std::size_t b1) {
				std::vector<double> prod(n_max + 1);
				for (std::size_t b = b0; b < b1; ++b)
				{
					auto &m = blocks[b];
					m.sum.assign(n_max + 1, 0.0);
					m.sq.assign(n_max + 1, 0.0);
					for (std::size_t i = b * kBlock; i < std::min(N, (b + 1) * kBlock); ++i)
					{
						per_sample(xs[i].coords(), prod);
						for (int n = 0; n <= n_max; ++n)
						{
							m.sum[n] += prod[n];
							m.sq[n] += prod[n] * prod[n];
						}
					}
				}
			});
			return finish(blocks, n_max, N, std::move(name));
		}
	} // namespace

	TestFunction fourier_mode(int dim, int axis, bool cosine)
	{
		if (axis < 0 || axis >= dim)
			throw PreconditionError("fourier_mode: axis out of range");
		TestFunction f;
		f.name = std::string(cosine ? "cos" : "sin") + "(2pi x" + std::to_string(axis + 1) + ")";
		const double r2 = std::sqrt(2.0);
		f.value = [=](const Vec &x) { return r2 * (cosine ? std::cos(kTwoPi * x(axis)) : std::sin(kTwoPi * x(axis))); };
		f.gradient = [=](const Vec &x) {
			Vec g = Vec::Zero(dim);
			g(axis) = r2 * kTwoPi * (cosine ? -std::sin(kTwoPi * x(axis)) : std::cos(kTwoPi * x(axis)));
			return g;
		};
		return f;
	}

	NormalizedFunction normalize_test_function(const GibbsMeasure &mu, TestFunction f, int grid_n)
	{
		if (mu.dim() != 2)
			throw UnsupportedError("normalize_test_function: d = 2 only");
		if (!f.value || !f.gradient)
			throw PreconditionError("normalize_test_function: value and gradient required");
		const double umin = mu.u_min(), kappa = mu.kappa();
		double w_sum = 0.0, m1 = 0.0, m2 = 0.0, g2 = 0.0;
		Vec x(2);
		for (int a = 0; a < grid_n; ++a)
			for (int b = 0; b < grid_n; ++b)
			{
				x << (a + 0.5) / grid_n, (b + 0.5) / grid_n;
				const double w = std::exp(-(mu.potential().value(x) - umin) / kappa);
				const double v = f.value(x);
				w_sum += w;
				m1 += w * v;
				m2 += w * v * v;
				g2 += w * f.gradient(x).squaredNorm();
			}
		NormalizedFunction out;
		out.mean = m1 / w_sum;
		out.l2_sq = m2 / w_sum - out.mean * out.mean;
		out.h1 = std::sqrt(g2 / w_sum);
		if (!(out.h1 > 0.0))
			throw PreconditionError("normalize_test_function: '" + f.name + "' has zero H^1 seminorm");
		out.f = std::move(f);
		return out;
	}

	CorrelationSeries correlation_decay(const VelocityField &field, const GibbsMeasure &mu, const TestFunction &f,
										const TestFunction &g, int n_max, std::size_t mc_samples, std::uint64_t seed,
										const FlowOptions &opt, int workers)
	{
		const auto fn = normalize_test_function(mu, f);
		const auto gn = normalize_test_function(mu, g);
		return run_blocks(mu, n_max, mc_samples, seed, workers, f.name + "|" + g.name,
						  [&](const Vec &x0, std::vector<double> &prod) {
							  const double fx = fn(x0);
							  Vec x = x0;
							  prod[0] = fx * gn(x);
							  for (int n = 1; n <= n_max; ++n)
							  {
								  x = flow_point(field, static_cast<double>(n - 1), x, opt).coords();
								  prod[n] = fx * gn(x);
							  }
						  });
	}

	CorrelationSeries correlation_decay_inverse(const VelocityField &field, const GibbsMeasure &mu,
												const TestFunction &f, const TestFunction &g, int n_max,
												std::size_t mc_samples, std::uint64_t seed, const FlowOptions &opt,
												int workers)
	{
		const auto fn = normalize_test_function(mu, f);
		const auto gn = normalize_test_function(mu, g);
		return run_blocks(mu, n_max, mc_samples, seed, workers, f.name + "|" + g.name,
						  [&](const Vec &y, std::vector<double> &prod) {
							  const double gy = gn(y);
							  for (int n = 0; n <= n_max; ++n)
							  {
								  Vec x = y;
								  for (int k = n - 1; k >= 0; --k)
									  x = flow_segment_inverse(field, k, x, opt).coords();
								  prod[n] = fn(x) * gy;
							  }
						  });
	}

	CorrelationSeries correlation_decay_rms(const std::function<FieldPtr(int)> &make_field, int schedules,
											const GibbsMeasure &mu, const TestFunction &f, const TestFunction &g,
											int n_max, std::size_t mc_samples, std::uint64_t seed,
											const FlowOptions &opt, int workers)
	{
		if (schedules < 1)
			throw PreconditionError("correlation_decay_rms: need at least one schedule");
		std::vector<double> ms(static_cast<std::size_t>(n_max) + 1, 0.0), se2(ms.size(), 0.0);
		CorrelationSeries out;
		for (int k = 0; k < schedules; ++k)
		{
			const auto field = make_field(k);
			const auto s = correlation_decay(*field, mu, f, g, n_max, mc_samples, seed + static_cast<std::uint64_t>(k),
											 opt, workers);
			for (std::size_t n = 0; n < ms.size(); ++n)
			{
				ms[n] += s.corr[n] * s.corr[n] / schedules;
				se2[n] += 0.25 * s.floor[n] * s.floor[n] / schedules; // floor = 2 SE
			}
			out.dictionary = s.dictionary;
			out.samples += s.samples;
		}
		const double widen = std::pow(8.0 / schedules, 0.25);
		for (std::size_t n = 0; n < ms.size(); ++n)
		{
			out.corr.push_back(std::sqrt(std::max(ms[n] - se2[n], 0.0)));
			out.floor.push_back(widen * std::sqrt(se2[n]));
		}
		out.dictionary += " rms/" + std::to_string(schedules);
		return out;
	}

	void write_decay_csv(const std::filesystem::path &path, const CorrelationSeries &s)
	{
		std::ofstream out(path);
		if (!out)
			throw Error("cannot write " + path.string());
		out << "n,corr,abs_corr,floor\n" << std::setprecision(17);
		for (std::size_t n = 0; n < s.corr.size(); ++n)
			out << n << ',' << s.corr[n] << ',' << std::abs(s.corr[n]) << ',' << s.floor[n] << '\n';
	}

	MixingFit fit_rate(const std::vector<double> &corr, const std::vector<double> &floor)
	{
		if (floor.size() != corr.size())
			throw PreconditionError("fit_rate: corr and floor sizes differ");
		if (corr.empty())
			throw PreconditionError("insufficient decay window");
		const double c0 = std::abs(corr[0]);
		std::size_t start = 1;
		while (start < corr.size() && !(std::abs(corr[start]) < 0.5 * c0))
			++start;
		std::size_t end = start;
		while (end < corr.size() && std::abs(corr[end]) > 3.0 * floor[end])
			++end;
		if (end - start < 4)
			throw PreconditionError("insufficient decay window");
		const std::size_t m = end - start;
		Eigen::MatrixXd X(m, 2);
		Eigen::VectorXd y(m);
		for (std::size_t k = 0; k < m; ++k)
		{
			X(k, 0) = 1.0;
			X(k, 1) = static_cast<double>(start + k);
			y(k) = std::log(std::abs(corr[start + k]));
		}
		const Eigen::Vector2d beta = X.colPivHouseholderQr().solve(y);
		MixingFit fit;
		fit.D = std::exp(beta(0));
		fit.gamma = -beta(1);
		fit.n_min = static_cast<int>(start);
		fit.n_max = static_cast<int>(end - 1);
		fit.residual = std::sqrt((X * beta - y).squaredNorm() / m);
		return fit;
	}

	MixingFit fit_rate(const std::vector<double> &corr, double floor)
	{
		return fit_rate(corr, std::vector<double>(corr.size(), floor));
	}

	std::size_t histogram_cell(const Vec &x, int bins)
	{
		std::size_t cell = 0;
		for (Eigen::Index a = 0; a < x.size(); ++a)
			cell = cell * bins + std::clamp(static_cast<int>(x(a) * bins), 0, bins - 1);
		return cell;
	}

	std::vector<double> empirical_histogram(const std::vector<TorusPoint> &pts, int bins)
	{
		if (pts.empty())
			throw PreconditionError("empirical_histogram: no points");
		if (bins < 1)
			throw PreconditionError("empirical_histogram: bins must be positive");
		std::size_t cells = 1;
		for (int a = 0; a < pts.front().dim(); ++a)
			cells *= bins;
		std::vector<double> h(cells, 0.0);
		for (const auto &p : pts)
			h[histogram_cell(p.coords(), bins)] += 1.0;
		for (auto &v : h)
			v /= static_cast<double>(pts.size());
		return h;
	}

	double tv_distance(const std::vector<double> &p, const std::vector<double> &q)
	{
		if (p.size() != q.size())
			throw PreconditionError("tv_distance: size mismatch");
		double s = 0.0;
		for (std::size_t k = 0; k < p.size(); ++k)
			s += std::abs(p[k] - q[k]);
		return 0.5 * s;
	}

	namespace
	{
		std::vector<double> multinomial_histogram(std::size_t n, const std::vector<double> &p, Xoshiro256 &rng)
		{
			std::vector<double> h(p.size(), 0.0);
			long long left = static_cast<long long>(n);
			double mass_left = 1.0;
			for (std::size_t k = 0; k < p.size() && left > 0; ++k)
			{
				const double q = mass_left > 0.0 ? std::clamp(p[k] / mass_left, 0.0, 1.0) : 1.0;
				const long long c = k + 1 == p.size() ? left : std::binomial_distribution<long long>(left, q)(rng);
				h[k] = static_cast<double>(c) / static_cast<double>(n);
				left -= c;
				mass_left -= p[k];
			}
			return h;
		}
	} // namespace

	double noise_floor(std::size_t n_samples, const std::vector<double> &p, int bootstrap_reps, std::uint64_t seed,
					   bool two_sample)
	{
		if (bootstrap_reps < 100)
			throw PreconditionError("noise_floor: bootstrap_reps must be >= 100");
		if (n_samples < 1 || p.empty())
			throw PreconditionError("noise_floor: need samples and cells");
		double s = 0.0, q = 0.0;
		for (int r = 0; r < bootstrap_reps; ++r)
		{
			auto rng = make_stream(seed, static_cast<std::uint64_t>(r));
			const auto a = multinomial_histogram(n_samples, p, rng);
			const double tv = two_sample ? tv_distance(a, multinomial_histogram(n_samples, p, rng)) : tv_distance(a, p);
			s += tv;
			q += tv * tv;
		}
		const double mean = s / bootstrap_reps;
		const double sd = std::sqrt(std::max(0.0, (q - s * mean) / (bootstrap_reps - 1)));
		return mean + 2.0 * sd;
	}

	double noise_floor(std::size_t n_samples, int bins, const GibbsMeasure &mu, int bootstrap_reps, std::uint64_t seed,
					   bool two_sample)
	{
		return noise_floor(n_samples, histogram_masses(mu, bins), bootstrap_reps, seed, two_sample);
	}

	TvEstimate snapshot_tv(const std::vector<TorusPoint> &pts, const std::vector<double> &masses, int bins,
						   int bootstrap_reps, std::uint64_t seed)
	{
		TvEstimate e;
		e.bins = bins;
		e.tv = tv_distance(empirical_histogram(pts, bins), masses);
		e.noise_floor = noise_floor(pts.size(), masses, bootstrap_reps, seed, false);
		return e;
	}

	std::vector<TorusPoint> default_start_set(std::uint64_t seed, int n_uniform)
	{
		std::vector<TorusPoint> s;
		Vec a(2), b(2);
		a << 0.25, 0.3;
		b << 0.75, 0.7;
		s.push_back(TorusPoint::wrap(a));
		s.push_back(TorusPoint::wrap(b));
		auto rng = make_stream(seed, 0);
		for (int k = 0; k < n_uniform; ++k)
		{
			Vec x(2);
			x << rng.uniform(), rng.uniform();
			s.push_back(TorusPoint::wrap(x));
		}
		return s;
	}

	MixingTimeResult mixing_time_from_laws(const SdeConfig &cfg, const VelocityField *field, const GibbsMeasure &mu,
										   const std::vector<std::vector<TorusPoint>> &initial, int bins,
										   const std::vector<double> &checkpoints, std::uint64_t seed)
	{
		if (initial.empty())
			throw PreconditionError("mixing_time_mc: empty start set");
		if (checkpoints.empty())
			throw PreconditionError("mixing_time_mc: no checkpoints");
		for (std::size_t k = 1; k < checkpoints.size(); ++k)
			if (!(checkpoints[k] > checkpoints[k - 1]))
				throw PreconditionError("mixing_time_mc: checkpoints must increase");
		const auto masses = histogram_masses(mu, bins);
		SdeConfig c = cfg;
		c.t_end = checkpoints.back();
		MixingTimeResult r;
		r.t_max = c.t_end;
		std::vector<double> worst(checkpoints.size(), 0.0);
		for (std::size_t s = 0; s < initial.size(); ++s)
		{
			if (initial[s].empty())
				throw PreconditionError("mixing_time_mc: empty initial ensemble");
			const double floor = noise_floor(initial[s].size(), masses, 100, seed, false);
			Ensemble ens(initial[s], make_stream(seed, s + 1)());
			const auto snaps = ens.evolve(c, field, mu.potential(), checkpoints);
			for (std::size_t k = 0; k < snaps.size(); ++k)
			{
				const double raw = tv_distance(empirical_histogram(snaps[k].positions, bins), masses);
				const double tv = std::max(0.0, raw - floor);
				r.rows.push_back({snaps[k].t, static_cast<int>(s), tv});
				worst[k] = std::max(worst[k], tv);
			}
		}
		r.t_mix = std::numeric_limits<double>::infinity();
		for (std::size_t k = 0; k < checkpoints.size(); ++k)
			if (worst[k] <= kMixingTvThreshold)
			{
				r.t_mix = checkpoints[k];
				break;
			}
		return r;
	}

	MixingTimeResult mixing_time_mc(const SdeConfig &cfg, const VelocityField *field, const GibbsMeasure &mu,
									const std::vector<TorusPoint> &starts, std::size_t n_traj, int bins,
									const std::vector<double> &checkpoints, std::uint64_t seed)
	{
		if (starts.empty())
			throw PreconditionError("mixing_time_mc: empty start set");
		if (n_traj < 1)
			throw PreconditionError("mixing_time_mc: n_traj must be >= 1");
		std::vector<std::vector<TorusPoint>> laws;
		for (const auto &x : starts)
			laws.emplace_back(n_traj, x);
		return mixing_time_from_laws(cfg, field, mu, laws, bins, checkpoints, seed);
	}

	void write_mixing_csv(const std::filesystem::path &path, const MixingTimeResult &r)
	{
		std::ofstream out(path);
		if (!out)
			throw Error("cannot write " + path.string());
		out << "t,start_id,tv\n" << std::setprecision(17);
		for (const auto &row : r.rows)
			out << row.t << ',' << row.start_id << ',' << row.tv << '\n';
	}
} // namespace mixdrift
