#include "mixdrift/flows.hpp"

#include <boost/numeric/odeint.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>

namespace mixdrift
{
	namespace
	{
		using State = std::vector<double>;

		const ShearScheduleField *as_plain_shear(const VelocityField &field)
		{
			const auto *f = dynamic_cast<const ShearScheduleField *>(&field);
			if (f && f->potential().kind() == PotentialKind::zero)
				return f;
			return nullptr;
		}

		FlowSegmentResult plain_shear_flow(const ShearScheduleField &f, double t0, const Vec &x, double duration)
		{
			const auto tup = f.schedule().tuple(segment_index(t0));
			const auto &prof = f.schedule().profile();
			const int d = static_cast<int>(x.size());
			const int m = tup.orientation == 1 ? tup.j : tup.i;
			const int moved = tup.orientation == 1 ? tup.i : tup.j;
			const double sign = tup.orientation == 1 ? -1.0 : 1.0;
			const double z = x(m) - tup.alpha;
			Vec y = x;
			y(moved) += sign * tup.beta * prof.d1(z) * duration;
			Mat J = Mat::Identity(d, d);
			J(moved, m) += sign * tup.beta * prof.d2(z) * duration;
			return {TorusPoint::wrap(y), J};
		}

		void pack(const Vec &x, const Mat &J, State &s)
		{
			const int d = static_cast<int>(x.size());
			s.resize(d + d * d);
			for (int a = 0; a < d; ++a)
				s[a] = x(a);
			for (int a = 0; a < d; ++a)
				for (int b = 0; b < d; ++b)
					s[d + a * d + b] = J(a, b);
		}

		void unpack(const State &s, int d, Vec &x, Mat &J)
		{
			x.resize(d);
			J.resize(d, d);
			for (int a = 0; a < d; ++a)
				x(a) = s[a];
			for (int a = 0; a < d; ++a)
				for (int b = 0; b < d; ++b)
					J(a, b) = s[d + a * d + b];
		}
	} // namespace

	namespace
	{
		namespace ode = boost::numeric::odeint;

		Mat matrix_power(Mat M, std::int64_t k)
		{
			Mat R = Mat::Identity(M.rows(), M.cols());
			while (k > 0)
			{
				if (k & 1)
					R = R * M;
				M = M * M;
				k >>= 1;
			}
			return R;
		}

		// Integrates sign * v over [0, duration] in local time s, where the
		// field time is t0 + s (sign = +1) or t0 + duration - s (sign = -1).
		// Returns the unwrapped end point and, if requested, the Jacobian.
		struct Integrator
		{
			const VelocityField &field;
			double t0, duration, sign;
			const FlowOptions &opt;
			bool with_jac;
			int d;
			bool autonomous;
			double t_field;

			Integrator(const VelocityField &f, double t0_, double dur, double sg, const FlowOptions &o, bool jac)
				: field(f), t0(t0_), duration(dur), sign(sg), opt(o), with_jac(jac), d(f.dim())
			{
				// Evaluate switching fields at the segment midpoint so trial
				// points at the segment end do not pick up the next segment.
				autonomous = std::isfinite(field.next_switch(t0));
				t_field = t0 + 0.5 * duration;
			}

			double field_time(double s) const
			{
				if (autonomous)
					return t_field;
				return sign > 0 ? t0 + s : t0 + duration - s;
			}

			void operator()(const State &st, State &ds, double s) const
			{
				Vec p(d);
				for (int a = 0; a < d; ++a)
					p(a) = st[a];
				ds.resize(st.size());
				if (!with_jac)
				{
					const Vec v = field.eval(field_time(s), p);
					for (int a = 0; a < d; ++a)
						ds[a] = sign * v(a);
					return;
				}
				Vec q;
				Mat J;
				unpack(st, d, q, J);
				Mat Dv;
				const Vec v = field.eval(field_time(s), p, &Dv);
				const Mat dJ = sign * Dv * J;
				for (int a = 0; a < d; ++a)
					ds[a] = sign * v(a);
				for (int a = 0; a < d; ++a)
					for (int b = 0; b < d; ++b)
						ds[d + a * d + b] = dJ(a, b);
			}

			State initial(const Vec &x) const
			{
				State st;
				if (with_jac)
					pack(x, Mat::Identity(d, d), st);
				else
					st.assign(x.data(), x.data() + d);
				return st;
			}

			void plain(State &st, double s_end) const
			{
				if (s_end <= 0.0)
					return;
				auto rhs = std::cref(*this);
				if (opt.method == FlowMethod::rk4)
				{
					ode::runge_kutta4<State> stepper;
					const double h = s_end / opt.substeps;
					double s = 0.0;
					for (int k = 0; k < opt.substeps; ++k, s += h)
						stepper.do_step(rhs, st, s, h);
				}
				else
				{
					auto stepper = ode::make_controlled(opt.atol, opt.rtol, ode::runge_kutta_dopri5<State>());
					ode::integrate_adaptive(stepper, rhs, st, 0.0, s_end, s_end / 64.0);
				}
			}

			// Segment flows are autonomous and, in the plane of the shear,
			// conserve a stream function, so orbits are periodic on the
			// torus. Integrate to the first return x(T) = x0 (mod 1) and
			// use phi_t = phi_r o (phi_T)^k, D phi_t = D phi_r (D phi_T)^k.
			State with_return_map(const Vec &x0) const
			{
				const Vec v0 = sign * field.eval(t_field, x0);
				State st = initial(x0);
				if (!(v0.squaredNorm() > 0.0))
				{
					plain(st, duration);
					return st;
				}
				auto rhs = std::cref(*this);
				auto ds = ode::make_dense_output(opt.atol, opt.rtol, ode::runge_kutta_dopri5<State>());
				ds.initialize(st, 0.0, duration / 64.0);
				Vec delta(d);
				auto offset = [&](const State &y) {
					for (int a = 0; a < d; ++a)
						delta(a) = circle_delta(x0(a), y[a]);
					return v0.dot(delta);
				};
				const double close = 1e-6;
				double g_prev = 0.0, period = -1.0;
				State tmp(st.size());
				while (ds.current_time() < duration)
				{
					const auto [sa, sb] = ds.do_step(rhs);
					const double gb = offset(ds.current_state());
					if (g_prev < 0.0 && gb >= 0.0)
					{
						double lo = sa, hi = sb;
						for (int it = 0; it < 60 && hi - lo > 1e-15 * hi; ++it)
						{
							const double mid = 0.5 * (lo + hi);
							ds.calc_state(mid, tmp);
							(offset(tmp) < 0.0 ? lo : hi) = mid;
						}
						ds.calc_state(hi, tmp);
						offset(tmp);
						if (delta.norm() < close)
						{
							period = hi;
							break;
						}
					}
					g_prev = gb;
				}
				if (period < 0.0)
				{
					ds.calc_state(duration, tmp);
					return tmp;
				}
				const auto k = static_cast<std::int64_t>(std::floor(duration / period));
				const double r = duration - static_cast<double>(k) * period;
				State out = initial(x0);
				plain(out, r);
				if (with_jac)
				{
					Vec y, yT;
					Mat Jr, M;
					unpack(out, d, y, Jr);
					unpack(tmp, d, yT, M);
					pack(y, Jr * matrix_power(M, k), out);
				}
				return out;
			}

			State run(const Vec &x0) const
			{
				if (autonomous && opt.method == FlowMethod::adaptive && opt.return_map)
					return with_return_map(x0);
				State st = initial(x0);
				plain(st, duration);
				return st;
			}
		};

		void check_interval(const VelocityField &field, double t0, double duration, const Vec &x, const char *who)
		{
			if (!(duration >= 0.0))
				throw PreconditionError(std::string(who) + ": negative duration");
			const double t1 = t0 + duration;
			if (t1 > field.next_switch(t0) + 1e-9 * std::max(1.0, std::abs(t1)))
				throw PreconditionError(std::string(who) + ": interval crosses a field switch");
			if (x.size() != field.dim())
				throw PreconditionError(std::string(who) + ": dimension mismatch");
		}
	} // namespace

	FlowSegmentResult flow_segment(const VelocityField &field, double t0, const Vec &x, const FlowOptions &opt,
								   double duration)
	{
		check_interval(field, t0, duration, x, "flow_segment");
		const int d = field.dim();
		if (opt.method == FlowMethod::rk4 && opt.substeps < 1)
			throw PreconditionError("flow_segment: substeps must be >= 1");
		if (opt.closed_form)
			if (const auto *shear = as_plain_shear(field))
				return plain_shear_flow(*shear, t0, x, duration);
		if (duration == 0.0)
			return {TorusPoint::wrap(x), Mat::Identity(d, d)};
		const State st = Integrator(field, t0, duration, 1.0, opt, true).run(x);
		Vec y;
		Mat J;
		unpack(st, d, y, J);
		return {TorusPoint::wrap(y), J};
	}

	TorusPoint flow_point(const VelocityField &field, double t0, const Vec &x, const FlowOptions &opt, double duration)
	{
		check_interval(field, t0, duration, x, "flow_point");
		if (opt.method == FlowMethod::rk4 && opt.substeps < 1)
			throw PreconditionError("flow_point: substeps must be >= 1");
		if (opt.closed_form)
			if (const auto *shear = as_plain_shear(field))
				return plain_shear_flow(*shear, t0, x, duration).position;
		if (duration == 0.0)
			return TorusPoint::wrap(x);
		const State st = Integrator(field, t0, duration, 1.0, opt, false).run(x);
		return TorusPoint::wrap(Vec(Eigen::Map<const Vec>(st.data(), field.dim())));
	}

	TorusPoint flow_point_backward(const VelocityField &field, double t0, const Vec &x, const FlowOptions &opt,
								   double duration)
	{
		check_interval(field, t0, duration, x, "flow_point_backward");
		if (opt.method == FlowMethod::rk4 && opt.substeps < 1)
			throw PreconditionError("flow_point_backward: substeps must be >= 1");
		if (opt.closed_form)
			if (const auto *shear = as_plain_shear(field))
				return plain_shear_flow(*shear, t0, x, -duration).position;
		if (duration == 0.0)
			return TorusPoint::wrap(x);
		const State st = Integrator(field, t0, duration, -1.0, opt, false).run(x);
		return TorusPoint::wrap(Vec(Eigen::Map<const Vec>(st.data(), field.dim())));
	}

	TorusPoint flow_segment_inverse(const VelocityField &field, std::int64_t n, const Vec &x, const FlowOptions &opt)
	{
		return flow_point_backward(field, static_cast<double>(n), x, opt, 1.0);
	}

	FlowSegmentResult flow_segments(const VelocityField &field, std::int64_t n0, std::int64_t count, const Vec &x,
									const FlowOptions &opt)
	{
		const int d = field.dim();
		FlowSegmentResult acc{TorusPoint::wrap(x), Mat::Identity(d, d)};
		for (std::int64_t k = 0; k < count; ++k)
		{
			const auto r = flow_segment(field, static_cast<double>(n0 + k), acc.position.coords(), opt);
			acc.position = r.position;
			acc.jacobian = r.jacobian * acc.jacobian;
		}
		return acc;
	}

	double projective_step(const VelocityField &field, std::int64_t n, ProjectiveState &s, const FlowOptions &opt)
	{
		const auto r = flow_segment(field, static_cast<double>(n), s.position.coords(), opt);
		const Vec w = r.jacobian * s.direction;
		const double len = w.norm();
		s.position = r.position;
		s.direction = w / len;
		return std::log(len);
	}

	void two_point_step(const VelocityField &field, std::int64_t n, TwoPointState &s, const FlowOptions &opt)
	{
		s.x = flow_point(field, static_cast<double>(n), s.x.coords(), opt);
		s.y = flow_point(field, static_cast<double>(n), s.y.coords(), opt);
	}

	LyapunovEstimate lyapunov_cocycle(const std::function<Vec(std::int64_t, const Vec &)> &next, Vec u0,
									  std::int64_t n_steps, int batches, double z,
									  std::vector<std::pair<std::int64_t, double>> *trace, std::int64_t trace_every)
	{
		if (batches < 2 || n_steps < batches)
			throw PreconditionError("lyapunov: need at least `batches` >= 2 steps");
		Vec u = u0.normalized();
		const std::int64_t per_batch = n_steps / batches;
		const std::int64_t used = per_batch * batches;
		std::vector<double> batch_sum(batches, 0.0);
		double total = 0.0;
		for (std::int64_t n = 0; n < used; ++n)
		{
			const Vec w = next(n, u);
			const double len = w.norm();
			if (!(len > 0.0) || !std::isfinite(len))
				throw ConvergenceError("lyapunov: tangent vector degenerated at step " + std::to_string(n));
			const double g = std::log(len);
			u = w / len;
			total += g;
			batch_sum[n / per_batch] += g;
			if (trace && (n + 1) % trace_every == 0)
				trace->emplace_back(n + 1, total / static_cast<double>(n + 1));
		}
		LyapunovEstimate e;
		e.steps = used;
		e.lambda = total / static_cast<double>(used);
		double var = 0.0;
		for (double b : batch_sum)
		{
			const double dm = b / per_batch - e.lambda;
			var += dm * dm;
		}
		var /= (batches - 1);
		e.half_width = z * std::sqrt(var / batches);
		return e;
	}

	LyapunovEstimate lyapunov_top(const VelocityField &field, const Vec &x0, std::int64_t n_steps, std::uint64_t seed,
								  const FlowOptions &opt, std::vector<std::pair<std::int64_t, double>> *trace,
								  std::int64_t trace_every)
	{
		if (field.dim() != 2)
			throw UnsupportedError("lyapunov_top: d = 2 only");
		if (n_steps < 1000)
			throw PreconditionError("lyapunov_top: n_steps must be >= 1000");
		auto rng = make_stream(seed, 0);
		const double th = kTwoPi * rng.uniform();
		Vec u(2);
		u << std::cos(th), std::sin(th);
		Vec x = TorusPoint::wrap(x0).coords();
		auto next = [&](std::int64_t n, const Vec &dir) {
			const auto r = flow_segment(field, static_cast<double>(n), x, opt);
			x = r.position.coords();
			return Vec(r.jacobian * dir);
		};
		return lyapunov_cocycle(next, u, n_steps, 20, 2.576, trace, trace_every);
	}

	void write_lyapunov_csv(const std::filesystem::path &path, const std::vector<std::pair<std::int64_t, double>> &trace)
	{
		std::ofstream out(path);
		if (!out)
			throw Error("cannot write " + path.string());
		out << "n,lyap_partial\n" << std::setprecision(17);
		for (const auto &[n, l] : trace)
			out << n << ',' << l << '\n';
	}

	SpanRank two_point_span_rank(const ShearProfile &profile, const Potential &U, double kappa, const Vec &x,
								 const Vec &y, const std::vector<double> &alphas, double h_fd, double threshold)
	{
		if (U.dim() != 2 || x.size() != 2 || y.size() != 2)
			throw UnsupportedError("two_point_span_rank: d = 2 only");
		if (std::abs(circle_delta(x(0), y(0))) < 1e-12)
			throw PreconditionError("two_point_span_rank: degenerate pair, x1 == y1 (outside the set where the pair can be separated)");
		if (std::abs(circle_delta(x(1), y(1))) < 1e-12)
			throw PreconditionError("two_point_span_rank: degenerate pair, x2 == y2 (outside the set where the pair can be separated)");
		if (alphas.empty())
			throw PreconditionError("two_point_span_rank: no alpha samples");

		struct Field
		{
			ShearTuple t;
		};
		std::vector<Field> fields;
		for (double a : alphas)
			for (int k : {1, 2})
			{
				ShearTuple t;
				t.alpha = a;
				t.beta = 1.0;
				t.orientation = k;
				fields.push_back({t});
			}
		auto value = [&](const Field &f, const Vec &p) { return modified_shear(profile, f.t, U, kappa, p); };
		auto jac = [&](const Field &f, const Vec &p) {
			Mat J(2, 2);
			for (int a = 0; a < 2; ++a)
			{
				Vec pp = p, pm = p;
				pp(a) += h_fd;
				pm(a) -= h_fd;
				J.col(a) = (value(f, pp) - value(f, pm)) / (2.0 * h_fd);
			}
			return J;
		};

		std::vector<Eigen::Vector4d> rows;
		std::vector<Vec> vx, vy;
		std::vector<Mat> jx, jy;
		for (const auto &f : fields)
		{
			vx.push_back(value(f, x));
			vy.push_back(value(f, y));
			jx.push_back(jac(f, x));
			jy.push_back(jac(f, y));
			rows.emplace_back(vx.back()(0), vx.back()(1), vy.back()(0), vy.back()(1));
		}
		for (std::size_t a = 0; a < fields.size(); ++a)
			for (std::size_t b = a + 1; b < fields.size(); ++b)
			{
				const Vec bx = jx[b] * vx[a] - jx[a] * vx[b];
				const Vec by = jy[b] * vy[a] - jy[a] * vy[b];
				rows.emplace_back(bx(0), bx(1), by(0), by(1));
			}
		Eigen::MatrixXd M(static_cast<Eigen::Index>(rows.size()), 4);
		Eigen::Index used = 0;
		for (const auto &r : rows)
		{
			const double nr = r.norm();
			if (nr > 0.0 && std::isfinite(nr))
				M.row(used++) = r.transpose() / nr;
		}
		SpanRank out;
		out.singular_values = Eigen::VectorXd::Zero(4);
		if (used == 0)
			return out;
		Eigen::JacobiSVD<Eigen::MatrixXd> svd(M.topRows(used));
		const auto &sv = svd.singularValues();
		out.singular_values.head(sv.size()) = sv;
		for (Eigen::Index k = 0; k < sv.size(); ++k)
			if (sv(k) / sv(0) > threshold)
				++out.rank;
		out.sv_ratio = out.singular_values(3) / sv(0);
		return out;
	}

	void write_span_csv(const std::filesystem::path &path, const std::vector<SpanScanRow> &rows)
	{
		std::ofstream out(path);
		if (!out)
			throw Error("cannot write " + path.string());
		out << "x1,x2,y1,y2,rank,sv_ratio\n" << std::setprecision(17);
		for (const auto &r : rows)
			out << r.x(0) << ',' << r.x(1) << ',' << r.y(0) << ',' << r.y(1) << ',' << r.r.rank << ',' << r.r.sv_ratio
				<< '\n';
	}
} // namespace mixdrift
