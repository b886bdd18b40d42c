#include "mixdrift/pde.hpp"

#include "mixdrift/parallel.hpp"
#include "mixdrift/random.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <limits>

namespace mixdrift
{
	namespace
	{
		using SpMat = Eigen::SparseMatrix<double>;
		using Ldlt = Eigen::SimplicialLDLT<SpMat>;

		constexpr double kInf = std::numeric_limits<double>::infinity();

		int wrap_index(int k, int n)
		{
			k %= n;
			return k < 0 ? k + n : k;
		}

		// taps of the inverse of the periodic [1 4 1]/6 filter; they decay like
		// (2 - sqrt3)^k, so 30 of them on each side reach round-off
		struct Prefilter
		{
			int n = 0, lo = 0, hi = 0;
			std::vector<double> taps;

			explicit Prefilter(int n_) : n(n_)
			{
				std::vector<double> delta(n, 0.0);
				delta[0] = 1.0;
				const auto h = PeriodicCubicSpline::prefilter(delta);
				lo = std::min(30, (n - 1) / 2);
				hi = std::min(30, n / 2);
				taps.resize(lo + hi + 1);
				for (int k = -lo; k <= hi; ++k)
					taps[k + lo] = h[wrap_index(k, n)];
			}

			// c_i = sum_k h_k f_{i+k} along stride `stride` starting at `base`
			void apply(const double *f, double *c, int base, int stride) const
			{
				for (int i = 0; i < n; ++i)
				{
					double s = 0.0;
					for (int k = -lo; k <= hi; ++k)
						s += taps[k + lo] * f[base + wrap_index(i + k, n) * stride];
					c[base + i * stride] = s;
				}
			}
		};

		Eigen::VectorXd spline_coefficients(int n, const Eigen::VectorXd &values, const Prefilter &pf, int workers)
		{
			Eigen::VectorXd tmp(values.size()), out(values.size());
			// along x2 (contiguous), then along x1
			parallel_for(static_cast<std::size_t>(n), workers, [&](std::size_t b, std::size_t e) {
				for (std::size_t a = b; a < e; ++a)
					pf.apply(values.data(), tmp.data(), static_cast<int>(a) * n, 1);
			});
			parallel_for(static_cast<std::size_t>(n), workers, [&](std::size_t b, std::size_t e) {
				for (std::size_t col = b; col < e; ++col)
					pf.apply(tmp.data(), out.data(), static_cast<int>(col), n);
			});
			return out;
		}

		double eval_spline(int n, const double *coef, double x1, double x2)
		{
			const double u1 = x1 * n - 0.5, u2 = x2 * n - 0.5;
			const double f1 = std::floor(u1), f2 = std::floor(u2);
			const CubicBSplineWeights w1(u1 - f1), w2(u2 - f2);
			const int i1 = static_cast<int>(f1), i2 = static_cast<int>(f2);
			int cols[4];
			for (int m = 0; m < 4; ++m)
				cols[m] = wrap_index(i2 - 1 + m, n);
			double s = 0.0;
			for (int l = 0; l < 4; ++l)
			{
				const double *row = coef + wrap_index(i1 - 1 + l, n) * n;
				double r = 0.0;
				for (int m = 0; m < 4; ++m)
					r += w2.w[m] * row[cols[m]];
				s += w1.w[l] * r;
			}
			return s;
		}

		Eigen::VectorXd interpolate_with(const Prefilter &pf, const Eigen::VectorXd &values,
										 const std::vector<double> &points, int workers)
		{
			const int n = pf.n;
			const Eigen::VectorXd coef = spline_coefficients(n, values, pf, workers);
			const std::size_t m = points.size() / 2;
			Eigen::VectorXd out(static_cast<Eigen::Index>(m));
			parallel_for(m, workers, [&](std::size_t b, std::size_t e) {
				for (std::size_t k = b; k < e; ++k)
					out(static_cast<Eigen::Index>(k)) = eval_spline(n, coef.data(), points[2 * k], points[2 * k + 1]);
			});
			return out;
		}

		void project_out(Eigen::MatrixXd &x, const Eigen::VectorXd &unit)
		{
			for (int c = 0; c < x.cols(); ++c)
				x.col(c) -= unit.dot(x.col(c)) * unit;
		}
	} // namespace

	// ---------------------------------------------------------------------------

	GridOperator::GridOperator(PotentialPtr potential, double kappa, int n)
		: potential_(std::move(potential)), kappa_(kappa), n_(n)
	{
		if (!potential_ || potential_->dim() != 2)
			throw UnsupportedError("grid solver: d = 2 only");
		if (!(kappa > 0.0))
			throw PreconditionError("grid solver: kappa must be positive");
		if (n < 8)
			throw PreconditionError("grid solver: n must be >= 8");
		const int N = n * n;
		Eigen::VectorXd uc(N), u1(N), u2(N);
		Vec x(2);
		for (int a = 0; a < n; ++a)
			for (int b = 0; b < n; ++b)
			{
				const int i = a * n + b;
				x << (a + 0.5) / n, (b + 0.5) / n;
				uc(i) = potential_->value(x);
				x << (a + 1.0) / n, (b + 0.5) / n;
				u1(i) = potential_->value(x);
				x << (a + 0.5) / n, (b + 1.0) / n;
				u2(i) = potential_->value(x);
			}
		const double umin = std::min({uc.minCoeff(), u1.minCoeff(), u2.minCoeff()});
		auto boltz = [&](const Eigen::VectorXd &u) { return ((umin - u.array()) / kappa).exp().matrix().eval(); };
		w_ = boltz(uc);
		const double s = w_.sum();
		w_ /= s;
		c1_ = boltz(u1) / s;
		c2_ = boltz(u2) / s;
		sqrt_w_ = w_.cwiseSqrt();

		std::vector<Eigen::Triplet<double>> trip;
		trip.reserve(5 * N);
		Eigen::VectorXd diag = Eigen::VectorXd::Zero(N);
		const double scale = kappa * n * n;
		for (int a = 0; a < n; ++a)
			for (int b = 0; b < n; ++b)
			{
				const int i = a * n + b;
				const int j1 = wrap_index(a + 1, n) * n + b, j2 = a * n + wrap_index(b + 1, n);
				for (const auto &[j, c] : {std::pair{j1, c1_(i)}, std::pair{j2, c2_(i)}})
				{
					const double k = scale * c;
					diag(i) += k;
					diag(j) += k;
					const double off = -k / (sqrt_w_(i) * sqrt_w_(j));
					trip.emplace_back(i, j, off);
					trip.emplace_back(j, i, off);
				}
			}
		for (int i = 0; i < N; ++i)
			trip.emplace_back(i, i, diag(i) / w_(i));
		ks_.resize(N, N);
		ks_.setFromTriplets(trip.begin(), trip.end());
		ks_.makeCompressed();
	}

	Vec GridOperator::cell_center(int i) const
	{
		Vec x(2);
		x << (i / n_ + 0.5) / n_, (i % n_ + 0.5) / n_;
		return x;
	}

	Eigen::VectorXd GridOperator::sample(const std::function<double(const Vec &)> &f) const
	{
		Eigen::VectorXd out(size());
		for (int i = 0; i < size(); ++i)
			out(i) = f(cell_center(i));
		return out;
	}

	double GridOperator::mean(const Eigen::VectorXd &f) const { return w_.dot(f); }

	double GridOperator::inner(const Eigen::VectorXd &f, const Eigen::VectorXd &g) const
	{
		return (w_.array() * f.array() * g.array()).sum();
	}

	double GridOperator::l2(const Eigen::VectorXd &f) const { return std::sqrt(inner(f, f)); }

	double GridOperator::l1(const Eigen::VectorXd &f) const { return (w_.array() * f.array().abs()).sum(); }

	double GridOperator::dirichlet(const Eigen::VectorXd &f, const Eigen::VectorXd &g) const
	{
		const int n = n_;
		double s = 0.0;
		for (int a = 0; a < n; ++a)
			for (int b = 0; b < n; ++b)
			{
				const int i = a * n + b;
				const int j1 = wrap_index(a + 1, n) * n + b, j2 = a * n + wrap_index(b + 1, n);
				s += c1_(i) * (f(i) - f(j1)) * (g(i) - g(j1)) + c2_(i) * (f(i) - f(j2)) * (g(i) - g(j2));
			}
		return kappa_ * n * n * s;
	}

	double GridOperator::h1(const Eigen::VectorXd &f) const { return std::sqrt(dirichlet(f, f) / kappa_); }

	Eigen::VectorXd GridOperator::apply(const Eigen::VectorXd &f) const
	{
		const int n = n_;
		Eigen::VectorXd out(size());
		for (int a = 0; a < n; ++a)
			for (int b = 0; b < n; ++b)
			{
				const int i = a * n + b;
				const int up = wrap_index(a + 1, n), dn = wrap_index(a - 1, n);
				const int rt = wrap_index(b + 1, n), lf = wrap_index(b - 1, n);
				const double flux = c1_(i) * (f(up * n + b) - f(i)) + c1_(dn * n + b) * (f(dn * n + b) - f(i)) +
									c2_(i) * (f(a * n + rt) - f(i)) + c2_(a * n + lf) * (f(a * n + lf) - f(i));
				out(i) = kappa_ * n * n * flux / w_(i);
			}
		return out;
	}

	double GridOperator::crank_nicolson_dt_limit() const
	{
		double m = 0.0;
		for (int k = 0; k < ks_.outerSize(); ++k)
			for (SpMat::InnerIterator it(ks_, k); it; ++it)
				if (it.row() == it.col())
					m = std::max(m, it.value());
		return 2.0 / m;
	}

	// ---------------------------------------------------------------------------

	Eigen::VectorXd interpolate_bicubic(int n, const Eigen::VectorXd &values, const std::vector<double> &points,
										int workers)
	{
		if (values.size() != static_cast<Eigen::Index>(n) * n)
			throw PreconditionError("interpolate_bicubic: value count is not n^2");
		return interpolate_with(Prefilter(n), values, points, workers);
	}

	// ---------------------------------------------------------------------------

	BackwardSolver::BackwardSolver(GridPtr grid, FieldPtr field, double A, int sign, PdeOptions opt)
		: grid_(std::move(grid)), field_(std::move(field)), A_(A), sign_(sign), opt_(opt)
	{
		if (!grid_)
			throw PreconditionError("backward solver: no grid");
		if (sign != 1 && sign != -1)
			throw PreconditionError("backward solver: sign must be +1 or -1");
		if (!(A >= 0.0))
			throw PreconditionError("backward solver: A must be >= 0");
		if (!(opt.dt_max > 0.0))
			throw PreconditionError("backward solver: dt_max must be positive");
		if (A > 0.0 && (!field_ || field_->dim() != 2))
			throw PreconditionError("backward solver: need a two dimensional field when A > 0");
		scheme_ = opt.scheme;
		if (scheme_ == DiffusionScheme::automatic)
			scheme_ = sign > 0 ? DiffusionScheme::tr_bdf2 : DiffusionScheme::backward_euler;
		if (field_ && dynamic_cast<const ZeroField *>(field_.get()))
			A_ = A > 0.0 ? A : 0.0;
		dt_ = opt.dt_max;
		if (A > 0.0)
		{
			const double m = std::ceil(1.0 / (A * opt.dt_max) - 1e-9);
			dt_ = 1.0 / (A * m);
		}
		if (scheme_ == DiffusionScheme::crank_nicolson && dt_ > grid_->crank_nicolson_dt_limit() * (1 + 1e-12))
			throw PreconditionError("backward solver: dt " + std::to_string(dt_) +
									" above the Crank-Nicolson limit " +
									std::to_string(grid_->crank_nicolson_dt_limit()));
		segment_cache_ = field_ && dynamic_cast<const ShearScheduleField *>(field_.get()) != nullptr;
	}

	void BackwardSolver::compute_departures(double field_time, std::vector<double> &out) const
	{
		const int N = grid_->size();
		out.resize(2 * static_cast<std::size_t>(N));
		const double dur = 0.5 * A_ * dt_;
		parallel_for(static_cast<std::size_t>(N), opt_.workers, [&](std::size_t b, std::size_t e) {
			for (std::size_t i = b; i < e; ++i)
			{
				const Vec x = grid_->cell_center(static_cast<int>(i));
				const TorusPoint p = sign_ > 0 ? flow_point(*field_, field_time, x, opt_.flow, dur)
											   : flow_point_backward(*field_, field_time, x, opt_.flow, dur);
				out[2 * i] = p[0];
				out[2 * i + 1] = p[1];
			}
		});
	}

	const std::vector<double> &BackwardSolver::departures(double t_real)
	{
		const double s = A_ * t_real;
		if (segment_cache_)
		{
			// autonomous on each unit segment, so one map per segment
			const std::int64_t k = segment_index(s + 0.25 * A_ * dt_);
			if (k != cached_segment_)
			{
				compute_departures(static_cast<double>(k), dep_);
				cached_segment_ = k;
			}
			return dep_;
		}
		compute_departures(s, dep_);
		return dep_;
	}

	void BackwardSolver::transport(Eigen::MatrixXd &theta, double t_real)
	{
		if (A_ == 0.0 || !field_ || dynamic_cast<const ZeroField *>(field_.get()))
			return;
		const auto &dep = departures(t_real);
		if (!prefilter_)
			prefilter_ = std::make_shared<Prefilter>(grid_->n());
		for (int c = 0; c < theta.cols(); ++c)
		{
			const Eigen::VectorXd before = theta.col(c);
			const double m0 = grid_->mean(before);
			const double e0 = grid_->l2((before.array() - m0).matrix());
			Eigen::VectorXd after = interpolate_with(*static_cast<const Prefilter *>(prefilter_.get()), before, dep, opt_.workers);
			const double m1 = grid_->mean(after);
			after.array() += m0 - m1;
			if (opt_.restore_energy)
			{
				const double e1 = grid_->l2((after.array() - m0).matrix());
				if (e1 > 0.0)
					after = (m0 + (after.array() - m0) * (e0 / e1)).matrix();
			}
			const double scale = std::max(grid_->l2(before), 1e-300);
			mean_fix_ = std::max(mean_fix_, std::abs(m0 - m1) / scale);
			theta.col(c) = after;
		}
	}

	const Ldlt &BackwardSolver::factor(double alpha)
	{
		auto it = factors_.find(alpha);
		if (it != factors_.end())
			return *it->second;
		const int N = grid_->size();
		SpMat id(N, N);
		id.setIdentity();
		const SpMat M = id + alpha * grid_->symmetric_generator();
		auto f = std::make_unique<Ldlt>(M);
		if (f->info() != Eigen::Success)
			throw ConvergenceError("backward solver: factorisation of the implicit step failed");
		return *factors_.emplace(alpha, std::move(f)).first->second;
	}

	Eigen::MatrixXd BackwardSolver::solve(double alpha, const Eigen::MatrixXd &rhs)
	{
		const auto &f = factor(alpha);
		const auto &ks = grid_->symmetric_generator();
		Eigen::MatrixXd x = f.solve(rhs);
		const double nb = std::max(rhs.norm(), 1e-300);
		double rel = 0.0;
		for (int it = 0; it < 4; ++it)
		{
			const Eigen::MatrixXd r = rhs - x - alpha * (ks * x);
			rel = r.norm() / nb;
			if (rel <= opt_.solve_tol)
				return x;
			x += f.solve(r);
		}
		throw ConvergenceError("backward solver: implicit step residual " + std::to_string(rel));
	}

	void BackwardSolver::diffuse(Eigen::MatrixXd &theta)
	{
		const auto &sw = grid_->sqrt_weights();
		const auto &ks = grid_->symmetric_generator();
		Eigen::MatrixXd y = sw.asDiagonal() * theta;
		switch (scheme_)
		{
		case DiffusionScheme::crank_nicolson:
			y = solve(0.5 * dt_, y - 0.5 * dt_ * (ks * y));
			break;
		case DiffusionScheme::backward_euler:
			y = solve(dt_, y);
			break;
		default:
		{
			const double g = 2.0 - std::sqrt(2.0);
			const double a = 0.5 * g * dt_;
			const Eigen::MatrixXd mid = solve(a, y - a * (ks * y));
			const double c1 = 1.0 / (g * (2.0 - g)), c0 = (1.0 - g) * (1.0 - g) / (g * (2.0 - g));
			y = solve(a, c1 * mid - c0 * y);
		}
		}
		theta = sw.cwiseInverse().asDiagonal() * y;
	}

	void BackwardSolver::step(Eigen::MatrixXd &theta)
	{
		if (theta.rows() != grid_->size())
			throw PreconditionError("backward solver: field size does not match the grid");
		mean_fix_ = 0.0;
		transport(theta, t_);
		diffuse(theta);
		transport(theta, t_ + 0.5 * dt_);
		t_ += dt_;
	}

	void BackwardSolver::step(Eigen::VectorXd &theta)
	{
		Eigen::MatrixXd m = theta;
		step(m);
		theta = m.col(0);
	}

	// ---------------------------------------------------------------------------

	std::vector<PdeTraceRow> evolve(BackwardSolver &solver, Eigen::VectorXd &theta, double t_end, int record_every)
	{
		if (record_every < 1)
			throw PreconditionError("evolve: record_every must be >= 1");
		const auto &g = solver.grid();
		auto row = [&] { return PdeTraceRow{solver.time(), g.l2(theta), g.h1(theta), g.l1(theta)}; };
		std::vector<PdeTraceRow> rows{row()};
		const auto steps = static_cast<std::int64_t>(std::ceil((t_end - solver.time()) / solver.dt() - 1e-9));
		for (std::int64_t k = 1; k <= steps; ++k)
		{
			solver.step(theta);
			if (k % record_every == 0 || k == steps)
				rows.push_back(row());
		}
		return rows;
	}

	void write_pde_trace_csv(const std::filesystem::path &path, const std::vector<PdeTraceRow> &rows)
	{
		std::ofstream out(path);
		if (!out)
			throw Error("cannot write " + path.string());
		out << "t,l2mu,h1mu,l1mu\n" << std::setprecision(12);
		for (const auto &r : rows)
			out << r.t << ',' << r.l2mu << ',' << r.h1mu << ',' << r.l1mu << '\n';
	}

	double energy_residual(const std::vector<PdeTraceRow> &trace, double kappa)
	{
		if (trace.size() < 3)
			throw PreconditionError("energy_residual: need at least 3 trace rows");
		const double dt = trace[1].t - trace[0].t;
		for (std::size_t k = 1; k < trace.size(); ++k)
			if (std::abs(trace[k].t - trace[k - 1].t - dt) > 1e-9 * std::max(1.0, std::abs(dt)))
				throw PreconditionError("energy_residual: trace is not uniform in t");
		const double e0 = trace[0].l2mu * trace[0].l2mu;
		if (e0 == 0.0)
			return 0.0;
		double worst = 0.0;
		for (std::size_t k = 1; k + 1 < trace.size(); ++k)
		{
			const double lhs = (trace[k + 1].l2mu * trace[k + 1].l2mu - trace[k - 1].l2mu * trace[k - 1].l2mu) / (2 * dt);
			const double rhs = -2.0 * kappa * trace[k].h1mu * trace[k].h1mu;
			worst = std::max(worst, std::abs(lhs - rhs));
		}
		return worst / e0;
	}

	// ---------------------------------------------------------------------------

	AutonomousDecay::AutonomousDecay(const GridOperator &grid, const Eigen::VectorXd &theta0, int krylov_dim,
									 double sigma)
		: grid_(grid)
	{
		if (krylov_dim < 2)
			throw PreconditionError("autonomous decay: krylov_dim must be >= 2");
		if (sigma <= 0.0)
			sigma = 4.0 * kPi * kPi * grid.kappa();
		const auto &ks = grid.symmetric_generator();
		const int N = grid.size();
		SpMat id(N, N);
		id.setIdentity();
		const Ldlt f(SpMat(ks + sigma * id));
		if (f.info() != Eigen::Success)
			throw ConvergenceError("autonomous decay: factorisation failed");
		const Eigen::VectorXd y0 = grid.sqrt_weights().cwiseProduct(theta0);
		const double ny = y0.norm();
		if (ny == 0.0)
		{
			basis_ = Eigen::MatrixXd::Zero(N, 1);
			lambda_ = Eigen::VectorXd::Zero(1);
			coef_ = Eigen::VectorXd::Zero(1);
			return;
		}
		basis_.resize(N, krylov_dim);
		basis_.col(0) = y0 / ny;
		int m = 1;
		for (; m < krylov_dim; ++m)
		{
			Eigen::VectorXd z = f.solve(Eigen::VectorXd(basis_.col(m - 1)));
			const double nz0 = z.norm();
			for (int pass = 0; pass < 2; ++pass)
				z -= basis_.leftCols(m) * (basis_.leftCols(m).transpose() * z);
			const double nz = z.norm();
			if (nz <= 1e-13 * nz0)
				break; // invariant subspace
			basis_.col(m) = z / nz;
		}
		basis_.conservativeResize(N, m);
		const Eigen::MatrixXd kv = ks * basis_;
		Eigen::MatrixXd h = basis_.transpose() * kv;
		h = 0.5 * (h + h.transpose());
		const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
		lambda_ = es.eigenvalues().cwiseMax(0.0);
		basis_ = basis_ * es.eigenvectors();
		coef_ = ny * es.eigenvectors().row(0).transpose();
	}

	double AutonomousDecay::norm_sq(double t) const
	{
		return (coef_.array().square() * (-2.0 * t * lambda_.array()).exp()).sum();
	}

	Eigen::VectorXd AutonomousDecay::state(double t) const
	{
		const Eigen::VectorXd c = (coef_.array() * (-t * lambda_.array()).exp()).matrix();
		return grid_.sqrt_weights().cwiseInverse().cwiseProduct(basis_ * c);
	}

	double AutonomousDecay::first_time_below(double ratio, double t_max) const
	{
		const double target = ratio * ratio * norm_sq(0.0);
		if (norm_sq(0.0) <= target)
			return 0.0;
		if (norm_sq(t_max) > target)
			return kInf;
		double lo = 0.0, hi = t_max;
		for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it)
		{
			const double mid = 0.5 * (lo + hi);
			(norm_sq(mid) > target ? lo : hi) = mid;
		}
		return hi;
	}

	// ---------------------------------------------------------------------------

	SpectrumResult lowest_eigenpairs(const GridOperator &grid, int count, double tol, int max_iter, std::uint64_t seed)
	{
		if (count < 1)
			throw PreconditionError("lowest_eigenpairs: count must be >= 1");
		const int N = grid.size();
		const int b = std::min(N - 1, count + std::max(4, count / 2));
		const auto &ks = grid.symmetric_generator();
		const Eigen::VectorXd e0 = grid.sqrt_weights() / grid.sqrt_weights().norm();
		const double sigma = 0.01 * 4.0 * kPi * kPi * grid.kappa();
		SpMat id(N, N);
		id.setIdentity();
		const Ldlt f(SpMat(ks + sigma * id));
		if (f.info() != Eigen::Success)
			throw ConvergenceError("lowest_eigenpairs: factorisation failed");

		auto rng = make_stream(seed, 0);
		Eigen::MatrixXd x(N, b);
		for (int c = 0; c < b; ++c)
			for (int i = 0; i < N; ++i)
				x(i, c) = rng.normal();
		project_out(x, e0);

		SpectrumResult res;
		Eigen::VectorXd lam;
		for (int it = 1; it <= max_iter; ++it)
		{
			Eigen::MatrixXd y = f.solve(x);
			project_out(y, e0);
			const Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
			Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(N, b);
			project_out(q, e0);
			const Eigen::MatrixXd kq = ks * q;
			Eigen::MatrixXd h = q.transpose() * kq;
			h = 0.5 * (h + h.transpose());
			const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
			lam = es.eigenvalues();
			x = q * es.eigenvectors();
			const Eigen::MatrixXd r = kq * es.eigenvectors() - x * lam.asDiagonal();
			double worst = 0.0;
			for (int c = 0; c < count; ++c)
				worst = std::max(worst, r.col(c).norm() / (lam(c) + sigma));
			res.iterations = it;
			res.max_residual = worst;
			if (worst <= tol)
				break;
		}
		if (res.max_residual > tol)
			throw ConvergenceError("lowest_eigenpairs: residual " + std::to_string(res.max_residual) + " after " +
								   std::to_string(max_iter) + " iterations");
		res.eigenvalues.assign(lam.data(), lam.data() + count);
		res.eigenvectors = grid.sqrt_weights().cwiseInverse().asDiagonal() * x.leftCols(count);
		return res;
	}

	double smallest_eigenvalue(const GridOperator &grid) { return lowest_eigenpairs(grid, 1).eigenvalues[0]; }

	int eigenvalue_count(const GridOperator &grid, double lambda)
	{
		if (!(lambda > 0.0))
			throw PreconditionError("eigenvalue_count: lambda must be positive");
		const int N = grid.size();
		SpMat id(N, N);
		id.setIdentity();
		const Ldlt f(SpMat(grid.symmetric_generator() - lambda * id));
		if (f.info() != Eigen::Success)
			throw ConvergenceError("eigenvalue_count: indefinite factorisation failed");
		const Eigen::VectorXd d = f.vectorD();
		int neg = 0;
		for (int i = 0; i < N; ++i)
			neg += d(i) < 0.0;
		return neg - 1; // the constant mode
	}

	void write_spectrum_csv(const std::filesystem::path &path, const std::vector<double> &eigenvalues)
	{
		std::ofstream out(path);
		if (!out)
			throw Error("cannot write " + path.string());
		out << "k,lambda_k\n" << std::setprecision(12);
		for (std::size_t k = 0; k < eigenvalues.size(); ++k)
			out << k << ',' << eigenvalues[k] << '\n';
	}

	// ---------------------------------------------------------------------------

	std::vector<DictionaryElement> default_dictionary(const GridOperator &grid, bool with_eigenfunction)
	{
		std::vector<DictionaryElement> out;
		const int ks[4][2] = {{1, 0}, {0, 1}, {1, 1}, {1, -1}};
		for (const auto &k : ks)
			for (int trig = 0; trig < 2; ++trig)
			{
				const std::string arg = "2pi(" + std::to_string(k[0]) + "x1" + (k[1] < 0 ? "-" : "+") +
										std::to_string(std::abs(k[1])) + "x2)";
				Eigen::VectorXd f = grid.sample([&](const Vec &x) {
					const double p = kTwoPi * (k[0] * x(0) + k[1] * x(1));
					return trig == 0 ? std::cos(p) : std::sin(p);
				});
				f.array() -= grid.mean(f);
				for (int pass = 0; pass < 2; ++pass)
					for (const auto &e : out)
						f -= grid.inner(f, e.values) * e.values;
				const double nf = grid.l2(f);
				if (nf < 1e-8)
					continue; // degenerate under this measure
				out.push_back({(trig == 0 ? "cos " : "sin ") + arg, f / nf});
			}
		if (with_eigenfunction)
		{
			const auto sp = lowest_eigenpairs(grid, 1);
			Eigen::VectorXd f = sp.eigenvectors.col(0);
			f.array() -= grid.mean(f);
			out.push_back({"eigen0", f / grid.l2(f)});
		}
		return out;
	}

	DissipationResult dissipation_time(GridPtr grid, FieldPtr field, double A,
									   const std::vector<DictionaryElement> &dictionary, double t_max,
									   const PdeOptions &opt, bool extrapolate)
	{
		if (dictionary.empty())
			throw PreconditionError("dissipation_time: empty dictionary");
		if (!(t_max > 0.0))
			throw PreconditionError("dissipation_time: t_max must be positive");
		for (const auto &e : dictionary)
			if (std::abs(grid->mean(e.values)) > 1e-8 * std::max(grid->l2(e.values), 1e-300))
				throw PreconditionError("dissipation_time: dictionary element '" + e.name + "' is not mean zero");

		DissipationResult res;
		res.t_max = t_max;
		const std::size_t E = dictionary.size();
		res.per_element.assign(E, kInf);
		res.extrapolated.assign(E, false);
		for (const auto &e : dictionary)
			res.names.push_back(e.name);

		const bool still = A == 0.0 || !field || dynamic_cast<const ZeroField *>(field.get());
		if (still)
		{
			res.exact_in_time = true;
			for (std::size_t k = 0; k < E; ++k)
				res.per_element[k] = AutonomousDecay(*grid, dictionary[k].values).first_time_below(0.5, t_max);
		}
		else
		{
			BackwardSolver solver(grid, field, A, +1, opt);
			std::vector<std::size_t> live(E);
			Eigen::MatrixXd theta(grid->size(), static_cast<Eigen::Index>(E));
			std::vector<double> target(E), prev(E);
			std::vector<std::vector<std::pair<double, double>>> tail(E);
			for (std::size_t k = 0; k < E; ++k)
			{
				live[k] = k;
				theta.col(static_cast<Eigen::Index>(k)) = dictionary[k].values;
				prev[k] = grid->l2(dictionary[k].values);
				target[k] = 0.5 * prev[k];
			}
			while (!live.empty() && solver.time() < t_max * (1 - 1e-12))
			{
				const double t0 = solver.time();
				solver.step(theta);
				std::vector<std::size_t> keep;
				for (std::size_t c = 0; c < live.size(); ++c)
				{
					const std::size_t k = live[c];
					const double cur = grid->l2(theta.col(static_cast<Eigen::Index>(c)));
					if (cur <= target[k])
					{
						const double a = std::log(prev[k] / target[k]), b = std::log(prev[k] / std::max(cur, 1e-300));
						res.per_element[k] = t0 + solver.dt() * (b > 0 ? a / b : 1.0);
					}
					else
					{
						prev[k] = cur;
						keep.push_back(c);
						if (extrapolate && solver.time() >= 0.5 * t_max)
							tail[k].emplace_back(solver.time(), std::log(cur));
					}
				}
				if (keep.size() != live.size())
				{
					Eigen::MatrixXd next(theta.rows(), static_cast<Eigen::Index>(keep.size()));
					std::vector<std::size_t> live2;
					for (std::size_t c = 0; c < keep.size(); ++c)
					{
						next.col(static_cast<Eigen::Index>(c)) = theta.col(static_cast<Eigen::Index>(keep[c]));
						live2.push_back(live[keep[c]]);
					}
					theta = std::move(next);
					live = std::move(live2);
				}
			}
			for (std::size_t k : live)
			{
				const auto &pts = tail[k];
				if (pts.size() < 8)
					continue;
				double mt = 0.0, my = 0.0;
				for (const auto &[t, y] : pts)
				{
					mt += t;
					my += y;
				}
				mt /= pts.size();
				my /= pts.size();
				double stt = 0.0, sty = 0.0;
				for (const auto &[t, y] : pts)
				{
					stt += (t - mt) * (t - mt);
					sty += (t - mt) * (y - my);
				}
				const double slope = sty / stt;
				if (!(slope < 0.0))
					continue;
				res.per_element[k] = mt + (std::log(target[k]) - my) / slope;
				res.extrapolated[k] = true;
			}
		}
		res.t_dis = 0.0;
		for (std::size_t k = 0; k < E; ++k)
			if (res.per_element[k] >= res.t_dis)
			{
				res.t_dis = res.per_element[k];
				res.worst = res.names[k];
			}
		return res;
	}
} // namespace mixdrift
