#include "commands.hpp"
#include "config.hpp"

#include "mixdrift/bounds.hpp"
#include "mixdrift/discrete.hpp"
#include "mixdrift/flows.hpp"
#include "mixdrift/gibbs.hpp"
#include "mixdrift/metrics.hpp"
#include "mixdrift/pde.hpp"
#include "mixdrift/random.hpp"
#include "mixdrift/sampler.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;

namespace mixdrift::cli
{
	namespace
	{
		struct Context
		{
			Config cfg;
			fs::path out;
			std::vector<std::string> outputs;
			std::ostream *log = nullptr;

			fs::path file(const std::string &name)
			{
				outputs.push_back(name);
				return out / name;
			}
			int workers() const { return static_cast<int>(cfg.integer("run.workers")); }
			std::uint64_t seed() const { return cfg.u64("run.seed"); }
			double kappa() const { return cfg.num("physics.kappa"); }
		};

		std::ofstream open_csv(const fs::path &path)
		{
			std::ofstream f(path, std::ios::binary);
			if (!f)
				throw Error("cannot write " + path.string());
			f << std::setprecision(17);
			return f;
		}

		Vec to_vec(const std::vector<double> &v)
		{
			Vec x(static_cast<Eigen::Index>(v.size()));
			for (std::size_t i = 0; i < v.size(); ++i)
				x(static_cast<Eigen::Index>(i)) = v[i];
			return x;
		}

		std::vector<double> sorted_times(const Config &cfg, const std::string &key)
		{
			auto t = cfg.list(key);
			if (t.empty())
				throw UsageError(key + ": at least one time is required");
			for (std::size_t i = 0; i < t.size(); ++i)
				if (!(t[i] >= 0.0) || (i > 0 && !(t[i] > t[i - 1])))
					throw UsageError(key + ": times must be nonnegative and increasing");
			return t;
		}

		PotentialPtr make_potential(const Config &cfg)
		{
			const std::string kind = cfg.str("potential.kind");
			const int dim = static_cast<int>(cfg.integer("potential.dim"));
			if (dim < 1)
				throw UsageError("potential.dim must be positive");
			if (kind == "zero")
				return make_zero_potential(dim);
			if (kind == "double_well")
			{
				if (dim != 2)
					throw UsageError("potential.kind = double_well needs potential.dim = 2");
				return make_double_well();
			}
			if (kind == "sin2")
				return make_separable(dim, std::make_shared<SinSquared>());
			if (kind == "grid")
			{
				if (cfg.str("potential.file").empty())
					throw UsageError("potential.kind = grid needs potential.file");
				return load_grid_potential(cfg.str("potential.file"));
			}
			throw UsageError("potential.kind: expected zero, double_well, sin2 or grid, got '" + kind + "'");
		}

		FlowOptions flow_options(const Config &cfg)
		{
			FlowOptions o;
			const std::string m = cfg.str("flow.method");
			if (m == "rk4")
				o.method = FlowMethod::rk4;
			else if (m != "adaptive")
				throw UsageError("flow.method: expected adaptive or rk4");
			o.substeps = static_cast<int>(cfg.integer("flow.substeps"));
			o.rtol = cfg.num("flow.rtol");
			o.atol = cfg.num("flow.atol");
			return o;
		}

		DtPolicy dt_policy(const Config &cfg)
		{
			DtPolicy p;
			p.adaptive = cfg.flag("sde.adaptive");
			p.dt = cfg.num("sde.dt");
			p.c = cfg.num("sde.c");
			p.dt_min = cfg.num("sde.dt_min");
			p.dt_max = cfg.num("sde.dt_max");
			return p;
		}

		ProfileKind profile_kind(const Config &cfg)
		{
			try
			{
				return parse_profile(cfg.str("field.profile"));
			}
			catch (const Error &e)
			{
				throw UsageError(std::string("field.profile: ") + e.what());
			}
		}

		/// `horizon` is the largest field time the run will touch (OU paths).
		FieldPtr make_field(const Config &cfg, const PotentialPtr &U, double horizon)
		{
			const std::string kind = cfg.str("field.kind");
			if (kind == "none")
				return nullptr;
			if (kind == "schedule")
				return std::make_shared<ShearScheduleField>(
					ShearSchedule(cfg.u64("field.seed"), U->dim(), profile_kind(cfg), cfg.num("field.beta_lo"),
								  cfg.num("field.beta_hi")),
					U, cfg.num("physics.kappa"));
			if (kind == "ou")
			{
				OUParams p;
				p.omega = cfg.num("ou.omega");
				p.reversion = cfg.num("ou.reversion");
				p.volatility = cfg.num("ou.volatility");
				p.mean = cfg.num("ou.mean");
				p.m0 = cfg.num("ou.m0");
				p.dt_path = cfg.num("ou.dt_path");
				p.horizon = cfg.is_auto("ou.horizon") ? horizon + 1.0 : cfg.num("ou.horizon");
				p.seed = cfg.u64("ou.seed");
				if (p.dt_path > 0.0 && p.horizon / p.dt_path > 5.0e7)
					throw UsageError("ou.horizon / ou.dt_path exceeds 5e7 path samples; raise ou.dt_path");
				return std::make_shared<OUStreamField>(p, U, cfg.num("physics.kappa"));
			}
			throw UsageError("field.kind: expected none, schedule or ou, got '" + kind + "'");
		}

		FieldPtr require_field(const Config &cfg, const PotentialPtr &U, double horizon)
		{
			auto f = make_field(cfg, U, horizon);
			if (!f)
				throw UsageError("this subcommand needs field.kind = schedule or ou");
			return f;
		}

		std::vector<TorusPoint> well_minima()
		{
			std::vector<TorusPoint> m;
			for (const auto &x : DoubleWellPotential::minima())
				m.push_back(TorusPoint::wrap(x));
			return m;
		}

		TestFunction named_mode(const std::string &key, const std::string &name, int dim)
		{
			if (name.size() >= 4 && (name.rfind("sin", 0) == 0 || name.rfind("cos", 0) == 0))
			{
				const int axis = std::atoi(name.c_str() + 3) - 1;
				if (axis >= 0 && axis < dim && name.substr(3) == std::to_string(axis + 1))
					return fourier_mode(dim, axis, name[0] == 'c');
			}
			throw UsageError(key + ": expected sinN or cosN with 1 <= N <= " + std::to_string(dim));
		}

		// ---------------------------------------------------------------- sample

		void cmd_sample(Context &c)
		{
			const auto &cfg = c.cfg;
			auto U = make_potential(cfg);
			const double A = cfg.num("physics.A");
			const auto checkpoints = sorted_times(cfg, "sample.checkpoints");
			const double t_end = checkpoints.back();
			FieldPtr field = A != 0.0 ? require_field(cfg, U, A * t_end) : nullptr;

			SdeConfig sc;
			sc.kappa = c.kappa();
			sc.A = A;
			sc.dt = dt_policy(cfg);
			sc.t_end = t_end;
			sc.seed = c.seed();
			sc.workers = c.workers();

			const auto start = cfg.list("sample.start");
			if (static_cast<int>(start.size()) != U->dim())
				throw UsageError("sample.start must have potential.dim coordinates");
			auto ens = Ensemble::dirac(TorusPoint::wrap(to_vec(start)),
									   static_cast<std::size_t>(cfg.integer("sample.particles")), sc.seed);
			const auto snaps = ens.evolve(sc, field.get(), *U, checkpoints);
			write_snapshot_csv(c.file("snapshots.csv"), snaps);
			if (U->kind() == PotentialKind::double_well)
				write_occupancy_csv(c.file("occupancy.csv"), snaps, well_minima());
			if (const auto *sf = dynamic_cast<const ShearScheduleField *>(field.get());
				sf && cfg.flag("sample.schedule_dump"))
				sf->schedule().write_csv(c.file("schedule.csv"), static_cast<std::int64_t>(std::ceil(A * t_end)) + 1);
			*c.log << "sample: " << ens.size() << " trajectories to t = " << t_end << ", " << ens.steps()
				   << " steps\n";
		}

		// --------------------------------------------------------------- mixrate

		void cmd_mixrate(Context &c)
		{
			const auto &cfg = c.cfg;
			auto U = make_potential(cfg);
			const int n_max = static_cast<int>(cfg.integer("mixrate.n_max"));
			const auto field = require_field(cfg, U, n_max);
			GibbsMeasure mu(U, c.kappa());
			mu.normalize();
			const auto f = named_mode("mixrate.f", cfg.str("mixrate.f"), U->dim());
			const auto g = named_mode("mixrate.g", cfg.str("mixrate.g"), U->dim());
			const auto samples = static_cast<std::size_t>(cfg.integer("mixrate.samples"));
			const std::string dir = cfg.str("mixrate.direction");
			CorrelationSeries s;
			const int schedules = static_cast<int>(cfg.integer("mixrate.schedules"));
			if (schedules > 1)
			{
				if (dir != "forward" || cfg.str("field.kind") != "schedule")
					throw UsageError("mixrate.schedules > 1 needs field.kind = schedule and direction = forward");
				const std::uint64_t base = cfg.u64("field.seed");
				auto make = [&](int k) -> FieldPtr
				{
					Config one = cfg;
					one.set("field.seed", std::to_string(base + static_cast<std::uint64_t>(k)), "schedules");
					return make_field(one, U, n_max);
				};
				s = correlation_decay_rms(make, schedules, mu, f, g, n_max, samples, c.seed(), flow_options(cfg),
										  c.workers());
			}
			else if (dir == "forward")
				s = correlation_decay(*field, mu, f, g, n_max, samples, c.seed(), flow_options(cfg), c.workers());
			else if (dir == "inverse")
				s = correlation_decay_inverse(*field, mu, f, g, n_max, samples, c.seed(), flow_options(cfg),
											  c.workers());
			else
				throw UsageError("mixrate.direction: expected forward or inverse");
			write_decay_csv(c.file("decay.csv"), s);
			auto out = open_csv(c.file("fit.csv"));
			out << "D,gamma,n_min,n_max,residual\n";
			try
			{
				const auto fit = fit_rate(s.corr, s.floor);
				out << fit.D << ',' << fit.gamma << ',' << fit.n_min << ',' << fit.n_max << ',' << fit.residual << '\n';
				*c.log << "mixrate: gamma = " << fit.gamma << " over n in [" << fit.n_min << ", " << fit.n_max << "]\n";
			}
			catch (const Error &e)
			{
				// decay too slow or too fast for the window; the series is still written
				out << "nan,nan,0,0,nan\n";
				*c.log << "mixrate: no fit (" << e.what() << ")\n";
			}
		}

		// ------------------------------------------------------------------ tdis

		void cmd_tdis(Context &c)
		{
			const auto &cfg = c.cfg;
			auto U = make_potential(cfg);
			const double A = cfg.num("physics.A");
			const double t_max = cfg.num("tdis.t_max");
			FieldPtr field = A != 0.0 ? require_field(cfg, U, A * t_max + 1.0) : nullptr;
			auto grid = std::make_shared<const GridOperator>(U, c.kappa(), static_cast<int>(cfg.integer("tdis.grid")));
			const auto dict = default_dictionary(*grid, cfg.flag("tdis.eigenfunction"));
			PdeOptions opt;
			opt.dt_max = cfg.num("tdis.dt_max");
			opt.workers = c.workers();
			const auto r = dissipation_time(grid, field, A, dict, t_max, opt, cfg.flag("tdis.extrapolate"));

			auto out = open_csv(c.file("tdis.csv"));
			out << "element,t_dis,extrapolated\n";
			for (std::size_t i = 0; i < r.names.size(); ++i)
				out << r.names[i] << ',' << r.per_element[i] << ',' << (r.extrapolated[i] ? 1 : 0) << '\n';
			out << "max," << r.t_dis << ',' << (r.any_extrapolated() ? 1 : 0) << '\n';

			const std::string which = cfg.str("tdis.trace_element");
			if (!which.empty())
			{
				const auto it = std::find_if(dict.begin(), dict.end(), [&](const auto &e) { return e.name == which; });
				if (it == dict.end())
					throw UsageError("tdis.trace_element: no dictionary element named '" + which + "'");
				const int every = static_cast<int>(cfg.integer("tdis.trace_every"));
				std::vector<PdeTraceRow> rows;
				if (!field)
				{
					AutonomousDecay decay(*grid, it->values);
					const int points = 200;
					for (int k = 0; k <= points; ++k)
					{
						const double t = t_max * k / points;
						const Eigen::VectorXd s = decay.state(t);
						rows.push_back({t, std::sqrt(decay.norm_sq(t)), grid->h1(s), grid->l1(s)});
					}
				}
				else
				{
					BackwardSolver solver(grid, field, A, +1, opt);
					Eigen::VectorXd theta = it->values;
					rows = evolve(solver, theta, t_max, every);
				}
				write_pde_trace_csv(c.file("trace.csv"), rows);
			}
			*c.log << "tdis: " << r.t_dis << " (worst " << r.worst << (r.any_extrapolated() ? ", extrapolated" : "")
				   << ")\n";
		}

		// ------------------------------------------------------------------ tmix

		void cmd_tmix(Context &c)
		{
			const auto &cfg = c.cfg;
			auto U = make_potential(cfg);
			if (U->dim() != 2)
				throw UsageError("tmix needs potential.dim = 2");
			const double A = cfg.num("physics.A");
			const auto checkpoints = sorted_times(cfg, "tmix.checkpoints");
			FieldPtr field = A != 0.0 ? require_field(cfg, U, A * checkpoints.back()) : nullptr;
			GibbsMeasure mu(U, c.kappa());
			mu.normalize();
			SdeConfig sc;
			sc.kappa = c.kappa();
			sc.A = A;
			sc.dt = dt_policy(cfg);
			sc.t_end = checkpoints.back();
			sc.seed = c.seed();
			sc.workers = c.workers();
			const auto starts = default_start_set(c.seed(), static_cast<int>(cfg.integer("tmix.uniform_starts")));
			const auto r = mixing_time_mc(sc, field.get(), mu, starts,
										  static_cast<std::size_t>(cfg.integer("tmix.trajectories")),
										  static_cast<int>(cfg.integer("tmix.bins")), checkpoints, c.seed());
			write_mixing_csv(c.file("mixing.csv"), r);
			auto out = open_csv(c.file("tmix.csv"));
			out << "t_mix,t_max,reached\n" << r.t_mix << ',' << r.t_max << ',' << (r.reached() ? 1 : 0) << '\n';
			*c.log << "tmix: " << (r.reached() ? std::to_string(r.t_mix) : "> " + std::to_string(r.t_max)) << '\n';
		}

		// -------------------------------------------------------------- lyapunov

		void cmd_lyapunov(Context &c)
		{
			const auto &cfg = c.cfg;
			auto U = make_potential(cfg);
			const auto steps = static_cast<std::int64_t>(cfg.integer("lyapunov.steps"));
			auto field = require_field(cfg, U, static_cast<double>(steps));
			const auto x0 = cfg.list("lyapunov.x0");
			if (static_cast<int>(x0.size()) != U->dim())
				throw UsageError("lyapunov.x0 must have potential.dim coordinates");
			std::vector<std::pair<std::int64_t, double>> trace;
			const auto e = lyapunov_top(*field, to_vec(x0), steps, c.seed(), flow_options(cfg), &trace,
										cfg.integer("lyapunov.trace_every"));
			write_lyapunov_csv(c.file("lyapunov.csv"), trace);
			auto out = open_csv(c.file("lyapunov_summary.csv"));
			out << "lambda,half_width,steps\n" << e.lambda << ',' << e.half_width << ',' << e.steps << '\n';
			*c.log << "lyapunov: " << e.lambda << " +- " << e.half_width << '\n';
		}

		// --------------------------------------------------------------- liespan

		void cmd_liespan(Context &c)
		{
			const auto &cfg = c.cfg;
			auto U = make_potential(cfg);
			if (U->dim() != 2)
				throw UsageError("liespan needs potential.dim = 2");
			const int m = static_cast<int>(cfg.integer("liespan.alphas"));
			if (m < 1)
				throw UsageError("liespan.alphas must be positive");
			std::vector<double> alphas;
			for (int k = 0; k < m; ++k)
				alphas.push_back((k + 0.25) / m);
			const double sep = cfg.num("liespan.min_separation");
			const ShearProfile profile(profile_kind(cfg));
			auto rng = make_stream(c.seed(), 0);
			std::vector<SpanScanRow> rows;
			int full = 0;
			const auto points = cfg.integer("liespan.points");
			while (static_cast<long long>(rows.size()) < points)
			{
				Vec x(2), y(2);
				x << rng.uniform(), rng.uniform();
				y << rng.uniform(), rng.uniform();
				auto gap = [](double a, double b) { return std::abs(a - b - std::round(a - b)); };
				if (gap(x(0), y(0)) < sep || gap(x(1), y(1)) < sep)
					continue;
				const auto r = two_point_span_rank(profile, *U, c.kappa(), x, y, alphas, 1e-5,
												   cfg.num("liespan.threshold"));
				full += r.rank == 4;
				rows.push_back({x, y, r});
			}
			write_span_csv(c.file("span.csv"), rows);
			*c.log << "liespan: rank 4 at " << full << " of " << rows.size() << " pairs\n";
		}

		// ---------------------------------------------------------------- bounds

		MixingFit fit_from_decay_csv(const fs::path &path)
		{
			std::ifstream in(path);
			if (!in)
				throw UsageError("cannot read decay CSV " + path.string());
			std::string line;
			std::getline(in, line);
			if (!line.empty() && line.back() == '\r')
				line.pop_back();
			if (line != "n,corr,abs_corr,floor")
				throw UsageError(path.string() + ":1: expected header 'n,corr,abs_corr,floor', got '" + line + "'");
			std::vector<double> corr, floor;
			int lineno = 1;
			while (std::getline(in, line))
			{
				++lineno;
				if (line.empty())
					continue;
				std::stringstream ss(line);
				std::string cell;
				std::vector<double> v;
				while (std::getline(ss, cell, ','))
				{
					try
					{
						v.push_back(parse_number(cell));
					}
					catch (const UsageError &e)
					{
						throw UsageError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
					}
				}
				if (v.size() != 4)
					throw UsageError(path.string() + ":" + std::to_string(lineno) + ": expected 4 columns");
				corr.push_back(v[1]);
				floor.push_back(v[3]);
			}
			MixingFit fit;
			try
			{
				fit = fit_rate(corr, floor);
			}
			catch (const Error &e)
			{
				throw Error(path.string() + ": " + e.what());
			}
			if (!fit.exponential())
				throw Error(path.string() + ": no exponential decay window above the noise floor");
			return fit;
		}

		void cmd_bounds(Context &c)
		{
			const auto &cfg = c.cfg;
			auto U = make_potential(cfg);
			GibbsMeasure mu(U, c.kappa());
			mu.normalize();
			ExponentialRate rate{cfg.num("bounds.D"), cfg.num("bounds.gamma")};
			if (!cfg.str("bounds.decay").empty())
			{
				const auto fit = fit_from_decay_csv(cfg.str("bounds.decay"));
				rate = {fit.D, fit.gamma};
			}
			double grad_v = 0.0;
			if (cfg.is_auto("bounds.grad_v"))
			{
				auto field = require_field(cfg, U, 16.0);
				for (int k = 0; k < 8; ++k)
					grad_v = std::max(grad_v, grad_sup_norm(*field, k + 0.5,
															static_cast<std::size_t>(cfg.integer("bounds.samples")),
															c.seed() + static_cast<std::uint64_t>(k)));
			}
			else
				grad_v = cfg.num("bounds.grad_v");

			BoundInputs in;
			in.kappa = c.kappa();
			in.D = rate.D;
			in.gamma = rate.gamma;
			in.grad_v_norm = grad_v;
			in.osc = mu.osc();
			in.d = U->dim();
			in.C = cfg.num("bounds.C");
			in.C_prime = cfg.num("bounds.C_prime");
			in.A = cfg.is_auto("physics.A") ? a0_exponential(in.kappa, rate, grad_v, in.C_prime) : cfg.num("physics.A");
			const auto r = bounds_report(in);
			write_bounds_csv(c.file("bounds.csv"), r);
			*c.log << "bounds: A = " << in.A << ", t_dis <= " << r.tdis_bound << ", t_mix <= " << r.tmix_bound << '\n';
		}

		// -------------------------------------------------------------- spectrum

		void cmd_spectrum(Context &c)
		{
			const auto &cfg = c.cfg;
			auto U = make_potential(cfg);
			const GridOperator grid(U, c.kappa(), static_cast<int>(cfg.integer("spectrum.grid")));
			const auto r = lowest_eigenpairs(grid, static_cast<int>(cfg.integer("spectrum.count")),
											 cfg.num("spectrum.tol"), 500, c.seed());
			write_spectrum_csv(c.file("spectrum.csv"), r.eigenvalues);
			const auto ratios = cfg.list("spectrum.lambdas");
			if (!ratios.empty())
			{
				auto out = open_csv(c.file("counts.csv"));
				out << "lambda,count,weyl_leading\n";
				for (double q : ratios)
				{
					const double lambda = q * c.kappa();
					out << lambda << ',' << eigenvalue_count(grid, lambda) << ','
						<< weyl_leading(lambda, c.kappa(), U->dim()) << '\n';
				}
			}
			*c.log << "spectrum: lambda_0 = " << r.eigenvalues.front() << '\n';
		}

		// -------------------------------------------------------------- discrete

		IntVec int_vector(const Config &cfg, const std::string &key, int dim)
		{
			const auto v = cfg.list(key);
			if (static_cast<int>(v.size()) != dim)
				throw UsageError(key + " must have " + std::to_string(dim) + " entries");
			IntVec k(dim);
			for (int i = 0; i < dim; ++i)
			{
				if (v[static_cast<std::size_t>(i)] != std::round(v[static_cast<std::size_t>(i)]))
					throw UsageError(key + " must be integers");
				k(i) = static_cast<long long>(v[static_cast<std::size_t>(i)]);
			}
			return k;
		}

		void cmd_discrete(Context &c)
		{
			const auto &cfg = c.cfg;
			auto U = make_potential(cfg);
			const int dim = U->dim();
			std::shared_ptr<ToralAutomorphism> psi;
			const auto blocks = cfg.list("discrete.blocks");
			if (blocks.empty())
				psi = std::make_shared<ToralAutomorphism>(dim);
			else
			{
				std::vector<int> b;
				for (double x : blocks)
					b.push_back(static_cast<int>(x));
				psi = std::make_shared<ToralAutomorphism>(b);
				if (psi->dim() != dim)
					throw UsageError("discrete.blocks must add up to potential.dim");
			}
			const int n_max = static_cast<int>(cfg.integer("discrete.n_max"));
			const auto series = automorphism_correlation(*psi, int_vector(cfg, "discrete.k", dim),
														 int_vector(cfg, "discrete.l", dim), n_max);
			{
				auto out = open_csv(c.file("automorphism.csv"));
				out << "n,corr,norm,envelope\n";
				for (std::size_t i = 0; i < series.n.size(); ++i)
					out << series.n[i] << ',' << series.corr[i] << ',' << series.norm[i] << ',' << series.envelope[i]
						<< '\n';
			}

			GibbsMeasure mu(U, c.kappa());
			mu.normalize();
			auto T = std::make_shared<TransportMap>(U, c.kappa());
			auto phi = [T, psi](const Vec &x) { return conjugated_map(*T, *psi, x); };
			// mean zero under mu needs the quadrature normalisation, available for d = 2
			TestFunction mode = fourier_mode(dim, 0);
			std::function<double(const Vec &)> f = mode.value;
			if (dim == 2)
			{
				const auto nf = normalize_test_function(mu, mode);
				f = [nf](const Vec &x) { return nf(x); };
			}
			const auto samples = sample_gibbs(mu, static_cast<std::size_t>(cfg.integer("discrete.samples")), c.seed(),
											  GibbsSampling::automatic, c.workers());
			write_decay_csv(c.file("decay.csv"), map_correlation(phi, samples, f, f, n_max, c.workers()));

			const int steps = static_cast<int>(cfg.integer("discrete.hybrid_steps"));
			if (steps > 0)
			{
				HybridChain chain;
				chain.A = cfg.num("physics.A");
				chain.kappa = c.kappa();
				chain.potential = U;
				chain.map = phi;
				chain.dt = dt_policy(cfg);
				chain.workers = c.workers();
				const auto h = hybrid_mixing(chain, mu, mode, mode, steps,
											 static_cast<std::size_t>(cfg.integer("discrete.samples")),
											 default_start_set(c.seed()),
											 static_cast<std::size_t>(cfg.integer("discrete.trajectories")),
											 static_cast<int>(cfg.integer("discrete.bins")), c.seed());
				write_decay_csv(c.file("hybrid_decay.csv"), h.decay);
				write_mixing_csv(c.file("hybrid_mixing.csv"), h.mixing);
				*c.log << "discrete: hybrid n_mix = " << h.n_mix << '\n';
			}
			*c.log << "discrete: lambda_1 = " << series.lambda1 << '\n';
		}

		// ---------------------------------------------------------------- figure

		std::string time_tag(double t)
		{
			std::ostringstream s;
			s << t;
			return s.str();
		}

		void cmd_figure(Context &c)
		{
			const auto &cfg = c.cfg;
			auto U = make_potential(cfg);
			if (U->dim() != 2)
				throw UsageError("figure needs potential.dim = 2");
			const double A = cfg.num("physics.A");
			const auto checkpoints = sorted_times(cfg, "figure.checkpoints");
			auto field = require_field(cfg, U, A * checkpoints.back());
			GibbsMeasure mu(U, c.kappa());
			mu.normalize();

			const auto start = cfg.list("figure.start");
			if (start.size() != 2)
				throw UsageError("figure.start must have 2 coordinates");
			const auto particles = static_cast<std::size_t>(cfg.integer("figure.particles"));
			const bool wells = U->kind() == PotentialKind::double_well;
			for (const bool drift : {false, true})
			{
				const std::string eq = drift ? "drift" : "langevin";
				SdeConfig sc;
				sc.kappa = c.kappa();
				sc.A = drift ? A : 0.0;
				sc.dt = dt_policy(cfg);
				sc.t_end = checkpoints.back();
				sc.seed = c.seed();
				sc.workers = c.workers();
				auto ens = Ensemble::dirac(TorusPoint::wrap(to_vec(start)), particles, sc.seed);
				const auto snaps = ens.evolve(sc, drift ? field.get() : nullptr, *U, checkpoints);
				for (const auto &s : snaps)
					write_snapshot_csv(c.file("snapshots_" + eq + "_T" + time_tag(s.t) + ".csv"), {s});
				if (wells)
					write_occupancy_csv(c.file("occupancy_" + eq + ".csv"), snaps, well_minima());
				*c.log << "figure: " << eq << " done, " << ens.steps() << " steps\n";
			}
			if (wells)
			{
				const auto masses = voronoi_masses(mu, well_minima());
				auto out = open_csv(c.file("basin_masses.csv"));
				out << "basin,mass\n";
				for (std::size_t i = 0; i < masses.size(); ++i)
					out << i << ',' << masses[i] << '\n';
			}

			std::vector<double> times;
			if (!cfg.is_auto("figure.stream_times"))
				times = cfg.list("figure.stream_times");
			else if (cfg.str("field.kind") == "ou")
				times = {0.0, (2.0 * kPi + 1.0) / (2.0 * cfg.num("ou.omega"))};
			else
				times = {0.5, 1.5};
			const int n = static_cast<int>(cfg.integer("figure.stream_grid"));
			{
				auto out = open_csv(c.file("stream.csv"));
				out << "t,x1,x2,v1,v2,rho\n";
				for (double t : times)
					for (int a = 0; a < n; ++a)
						for (int b = 0; b < n; ++b)
						{
							Vec x(2);
							x << (a + 0.5) / n, (b + 0.5) / n;
							const Vec v = field->eval(t, x);
							out << t << ',' << x(0) << ',' << x(1) << ',' << v(0) << ',' << v(1) << ','
								<< mu.density(x) << '\n';
						}
			}
			{
				const ShearProfile profile(profile_kind(cfg));
				const int m = static_cast<int>(cfg.integer("figure.profile_points"));
				auto out = open_csv(c.file("profile.csv"));
				out << "x,F,dF\n";
				for (int k = 0; k <= m; ++k)
				{
					const double x = static_cast<double>(k) / m;
					out << x << ',' << profile.value(x) << ',' << profile.d1(x) << '\n';
				}
			}
		}

		using Handler = void (*)(Context &);

		Handler handler(const std::string &name)
		{
			static const std::map<std::string, Handler> h = {
				{"sample", cmd_sample},	   {"mixrate", cmd_mixrate}, {"tdis", cmd_tdis},
				{"tmix", cmd_tmix},		   {"lyapunov", cmd_lyapunov}, {"liespan", cmd_liespan},
				{"bounds", cmd_bounds},	   {"spectrum", cmd_spectrum}, {"discrete", cmd_discrete},
				{"figure", cmd_figure},
			};
			return h.at(name);
		}

		struct Flags
		{
			std::string config, out, kappa, A, seed, workers, potential, profile, field, decay;
			std::vector<std::string> sets;
		};

		void write_manifest(const Context &c, const std::vector<std::string> &args, double wall)
		{
			nlohmann::ordered_json j;
			j["program"] = "mixdrift";
			j["version"] = kVersion;
			j["command"] = c.cfg.command();
			j["argv"] = args;
			j["seed"] = c.cfg.str("run.seed");
			nlohmann::ordered_json conf = nlohmann::ordered_json::object(), origin = nlohmann::ordered_json::object();
			for (const auto &[k, s] : c.cfg.values())
			{
				conf[k] = s.value;
				origin[k] = s.origin;
			}
			j["config"] = conf;
			j["origin"] = origin;
			j["outputs"] = c.outputs;
			j["compiler"] = __VERSION__;
			j["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
						 std::to_string(EIGEN_MINOR_VERSION);
			j["wall_time_s"] = wall;
			std::ofstream f(c.out / "manifest.json", std::ios::binary);
			f << j.dump(2) << '\n';
			std::ofstream ini(c.out / "config.ini", std::ios::binary);
			ini << c.cfg.to_ini();
		}
	}

	int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err)
	{
		CLI::App app{"Langevin sampling with mixing drifts on the torus", "mixdrift"};
		app.set_version_flag("--version", kVersion);
		app.require_subcommand(1, 1);
		Flags fl;
		for (const auto &name : commands())
		{
			static const std::map<std::string, std::string> about = {
				{"sample", "ensemble snapshots and basin occupancy"},
				{"mixrate", "correlation decay under a shear schedule and its exponential fit"},
				{"tdis", "dissipation time from the backward equation"},
				{"tmix", "Monte-Carlo mixing time over a start set"},
				{"lyapunov", "top Lyapunov exponent of the segment maps"},
				{"liespan", "two-point Lie-span rank scan"},
				{"bounds", "H(A), A0 and the dissipation and mixing bounds"},
				{"spectrum", "lowest eigenvalues and counts N(lambda)"},
				{"discrete", "toral automorphisms, transport map and the hybrid chain"},
				{"figure", "Langevin and drift snapshots, stream field, profile"},
			};
			auto *sub = app.add_subcommand(name, about.count(name) ? about.at(name) : "");
			sub->add_option("-c,--config", fl.config, "INI config file or a manifest.json to re-run");
			sub->add_option("-o,--out", fl.out, "output directory");
			sub->add_option("--kappa", fl.kappa, "noise strength");
			sub->add_option("-A,--A", fl.A, "drift amplitude");
			sub->add_option("--seed", fl.seed, "master seed");
			sub->add_option("-j,--workers", fl.workers, "worker threads");
			sub->add_option("--potential", fl.potential, "zero, double_well, sin2 or grid");
			sub->add_option("--field", fl.field, "none, schedule or ou");
			sub->add_option("--profile", fl.profile, "sawtooth, sine or localized_tent");
			sub->add_option("--set", fl.sets, "section.key=value (repeatable)");
			if (name == "bounds")
				sub->add_option("--decay", fl.decay, "decay CSV to fit D and gamma from");
		}

		std::vector<std::string> rev(args.rbegin(), args.rend());
		try
		{
			app.parse(std::move(rev));
		}
		catch (const CLI::Success &e)
		{
			app.exit(e, out, err);
			return exit_ok;
		}
		catch (const CLI::ParseError &e)
		{
			app.exit(e, out, err);
			return exit_usage;
		}

		const std::string command = app.get_subcommands().front()->get_name();
		Context c{Config(command), {}, {}, &out};
		try
		{
			if (!fl.config.empty())
				c.cfg.load_file(fl.config);
			for (const auto &s : fl.sets)
			{
				const auto eq = s.find('=');
				if (eq == std::string::npos)
					throw UsageError("--set " + s + ": expected section.key=value");
				c.cfg.set(s.substr(0, eq), s.substr(eq + 1), "--set");
			}
			const std::pair<const std::string *, const char *> named[] = {
				{&fl.out, "run.out"},		 {&fl.kappa, "physics.kappa"}, {&fl.A, "physics.A"},
				{&fl.seed, "run.seed"},		 {&fl.workers, "run.workers"}, {&fl.potential, "potential.kind"},
				{&fl.field, "field.kind"},	 {&fl.profile, "field.profile"}, {&fl.decay, "bounds.decay"},
			};
			for (const auto &[value, key] : named)
				if (!value->empty())
					c.cfg.set(key, *value, std::string("--") + key);
			// validate the shared keys up front so typos fail before any work
			c.seed();
			if (c.workers() < 1)
				throw UsageError("run.workers must be at least 1");
			if (!(c.kappa() > 0.0))
				throw UsageError("physics.kappa must be positive");

			const std::string o = c.cfg.str("run.out");
			if (!o.empty())
				c.out = o;
			else if (const char *root = std::getenv("MIXDRIFT_OUT"); root && *root)
				c.out = fs::path(root) / command;
			else
				c.out = fs::path("out") / command;
			fs::create_directories(c.out);

			const auto t0 = std::chrono::steady_clock::now();
			handler(command)(c);
			const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
			write_manifest(c, args, wall);
			out << "wrote " << c.outputs.size() << " files to " << c.out.string() << '\n';
			return exit_ok;
		}
		catch (const UsageError &e)
		{
			err << "mixdrift " << command << ": " << e.what() << '\n';
			return exit_usage;
		}
		catch (const std::exception &e)
		{
			err << "mixdrift " << command << ": " << e.what() << '\n';
			return exit_runtime;
		}
	}
} // namespace mixdrift::cli
