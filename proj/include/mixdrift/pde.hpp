#pragma once

#include "mixdrift/flows.hpp"

#include <Eigen/Sparse>

#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace mixdrift
{
	/// Cell-centred n x n grid on T^2 carrying the discrete Gibbs measure and
	/// the Dirichlet form of L_kappa. Cell i = a n + b sits at ((a+.5)/n, (b+.5)/n).
	///
	/// Cell masses w_i ~ exp(-U(x_i)/kappa) sum to 1. Each face between
	/// neighbours i, j carries c_ij ~ exp(-U(face midpoint)/kappa) with the same
	/// normaliser, and
	///   kappa <grad f, grad g>_mu := kappa n^2 sum_faces c_ij (f_i - f_j)(g_i - g_j),
	///   (L f)_i := -(kappa n^2 / w_i) sum_{j ~ i} c_ij (f_i - f_j),
	/// so -<L f, g>_mu = kappa <grad f, grad g>_mu holds by summation by parts.
	class GridOperator
	{
	public:
		GridOperator(PotentialPtr potential, double kappa, int n);

		int n() const { return n_; }
		int size() const { return n_ * n_; }
		double kappa() const { return kappa_; }
		const Potential &potential() const { return *potential_; }
		const PotentialPtr &potential_ptr() const { return potential_; }

		const Eigen::VectorXd &weights() const { return w_; }
		const Eigen::VectorXd &sqrt_weights() const { return sqrt_w_; }
		/// Face weights in the x1 direction (between cell (a,b) and (a+1,b)) and
		/// in the x2 direction (between (a,b) and (a,b+1)), indexed by (a,b).
		const Eigen::VectorXd &face_weights_x1() const { return c1_; }
		const Eigen::VectorXd &face_weights_x2() const { return c2_; }

		/// W^{-1/2} K W^{-1/2}, K the stiffness matrix; similar to -L_kappa and
		/// symmetric in the Euclidean product of y = W^{1/2} theta.
		const Eigen::SparseMatrix<double> &symmetric_generator() const { return ks_; }

		Vec cell_center(int i) const;
		Eigen::VectorXd sample(const std::function<double(const Vec &)> &f) const;

		double mean(const Eigen::VectorXd &f) const;
		double inner(const Eigen::VectorXd &f, const Eigen::VectorXd &g) const;
		double l2(const Eigen::VectorXd &f) const;
		double l1(const Eigen::VectorXd &f) const;
		/// kappa <grad f, grad g>_mu, summed face by face.
		double dirichlet(const Eigen::VectorXd &f, const Eigen::VectorXd &g) const;
		/// ||grad f||_{L^2(mu)}.
		double h1(const Eigen::VectorXd &f) const;
		/// L_kappa f, cell by cell.
		Eigen::VectorXd apply(const Eigen::VectorXd &f) const;

		/// Largest dt for which the Crank-Nicolson diffusion step has a
		/// nonnegative explicit half (positivity and L^1(mu) contraction).
		double crank_nicolson_dt_limit() const;

	private:
		PotentialPtr potential_;
		double kappa_;
		int n_;
		Eigen::VectorXd w_, sqrt_w_, c1_, c2_;
		Eigen::SparseMatrix<double> ks_;
	};

	using GridPtr = std::shared_ptr<const GridOperator>;

	/// theta on the cells of `grid`.
	struct GridField
	{
		GridPtr grid;
		Eigen::VectorXd values;

		double mean() const { return grid->mean(values); }
		double l2() const { return grid->l2(values); }
		double l1() const { return grid->l1(values); }
		double h1() const { return grid->h1(values); }
	};

	enum class DiffusionScheme
	{
		automatic, // tr_bdf2 for sign +1, backward_euler for sign -1
		crank_nicolson,
		backward_euler,
		tr_bdf2,
	};

	struct PdeOptions
	{
		double dt_max = 1e-3;
		DiffusionScheme scheme = DiffusionScheme::automatic;
		/// Transport by a mu-preserving flow is an L^2(mu) isometry; rescale the
		/// fluctuation after each transport substep to undo interpolation loss.
		bool restore_energy = true;
		double solve_tol = 1e-10;
		FlowOptions flow{FlowMethod::adaptive, 64, 1e-9, 1e-11, true, false};
		int workers = 1;
	};

	/// Strang-split solver for d_t theta = sign A v_{At} . grad theta + L_kappa theta
	/// (sign +1: backward Kolmogorov equation, sign -1: density-ratio equation).
	/// Transport half steps are semi-Lagrangian with periodic bicubic B-spline
	/// interpolation at departure points from the exact segment flow; the
	/// diffusion step is implicit. Single owner, not thread safe.
	class BackwardSolver
	{
	public:
		BackwardSolver(GridPtr grid, FieldPtr field, double A, int sign, PdeOptions opt = {});

		/// Step actually used: dt_max shrunk so that A dt divides a unit segment.
		double dt() const { return dt_; }
		double time() const { return t_; }
		void reset(double t = 0.0) { t_ = t; }
		DiffusionScheme scheme() const { return scheme_; }
		const GridOperator &grid() const { return *grid_; }

		/// One Strang step on every column of theta.
		void step(Eigen::MatrixXd &theta);
		void step(Eigen::VectorXd &theta);

		/// Largest |mean shift| removed by mean restoration in the last step,
		/// relative to the column's L^2(mu) norm.
		double last_mean_correction() const { return mean_fix_; }

	private:
		void transport(Eigen::MatrixXd &theta, double t_real);
		void diffuse(Eigen::MatrixXd &theta);
		const std::vector<double> &departures(double t_real);
		void compute_departures(double field_time, std::vector<double> &out) const;
		const Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> &factor(double alpha);
		Eigen::MatrixXd solve(double alpha, const Eigen::MatrixXd &rhs);

		GridPtr grid_;
		FieldPtr field_;
		double A_;
		int sign_;
		PdeOptions opt_;
		DiffusionScheme scheme_;
		double dt_ = 0.0, t_ = 0.0, mean_fix_ = 0.0;
		bool segment_cache_ = false;
		std::int64_t cached_segment_ = -1;
		std::vector<double> dep_;
		std::shared_ptr<void> prefilter_;
		std::map<double, std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>> factors_;
	};

	/// Periodic cubic B-spline interpolation of cell values at arbitrary points
	/// (pairs x1, x2 in `points`).
	Eigen::VectorXd interpolate_bicubic(int n, const Eigen::VectorXd &values, const std::vector<double> &points,
										int workers = 1);

	struct PdeTraceRow
	{
		double t = 0.0;
		double l2mu = 0.0; // ||theta||_{L^2(mu)}
		double h1mu = 0.0; // ||grad theta||_{L^2(mu)}
		double l1mu = 0.0; // ||theta||_{L^1(mu)}
	};

	/// Evolves theta to t_end (rounded up to whole steps), recording every
	/// `record_every` steps including the initial state.
	std::vector<PdeTraceRow> evolve(BackwardSolver &solver, Eigen::VectorXd &theta, double t_end, int record_every = 1);

	/// Header `t,l2mu,h1mu,l1mu`.
	void write_pde_trace_csv(const std::filesystem::path &path, const std::vector<PdeTraceRow> &rows);

	/// Max over interior trace points of |D_t ||theta||^2 + 2 kappa ||grad theta||^2|
	/// with the centred difference D_t, divided by ||theta_0||^2. 0 for a zero
	/// initial state. Needs a uniform trace of at least 3 rows.
	double energy_residual(const std::vector<PdeTraceRow> &trace, double kappa);

	/// Exact-in-time evolution of theta_t = exp(t L_kappa) theta_0 in a rational
	/// Krylov space of (Ks + sigma)^{-1} (time independent problems, A = 0).
	class AutonomousDecay
	{
	public:
		AutonomousDecay(const GridOperator &grid, const Eigen::VectorXd &theta0, int krylov_dim = 48,
						double sigma = -1.0);

		double norm_sq(double t) const;
		Eigen::VectorXd state(double t) const;
		/// First t with ||theta_t|| <= ratio ||theta_0|| (bisection on the
		/// monotone norm); infinity when not reached by t_max.
		double first_time_below(double ratio, double t_max) const;
		int dimension() const { return static_cast<int>(lambda_.size()); }

	private:
		const GridOperator &grid_;
		Eigen::MatrixXd basis_; // columns in y = W^{1/2} theta
		Eigen::VectorXd lambda_, coef_;
	};

	struct DictionaryElement
	{
		std::string name;
		Eigen::VectorXd values; // mu-mean zero, unit L^2(mu) norm
	};

	/// cos and sin of 2 pi k.x for k in {(1,0), (0,1), (1,1), (1,-1)}, made
	/// mu-mean zero and mu-orthonormal, then optionally the slowest eigenfunction.
	std::vector<DictionaryElement> default_dictionary(const GridOperator &grid, bool with_eigenfunction = true);

	struct DissipationResult
	{
		double t_dis = 0.0; // max over the dictionary; infinity if some element never halved
		double t_max = 0.0;
		std::vector<std::string> names;
		std::vector<double> per_element;
		std::string worst;
		bool exact_in_time = false;
		/// Elements whose crossing was extrapolated from a log-linear fit of
		/// the second half of the run instead of observed.
		std::vector<bool> extrapolated;
		bool any_extrapolated() const
		{
			for (bool e : extrapolated)
				if (e)
					return true;
			return false;
		}

		bool reached() const { return std::isfinite(t_dis); }
	};

	/// First time the L^2(mu) norm of each dictionary element halves under the
	/// backward equation, maximised over the dictionary. A = 0 uses the
	/// Krylov evolution; otherwise the Strang solver, with sub-step
	/// log-linear interpolation of the crossing. With `extrapolate`, an element
	/// still above half at t_max gets the crossing of the least-squares line
	/// through log ||theta_t|| over [t_max/2, t_max] (flagged in the result).
	DissipationResult dissipation_time(GridPtr grid, FieldPtr field, double A,
									   const std::vector<DictionaryElement> &dictionary, double t_max,
									   const PdeOptions &opt = {}, bool extrapolate = false);

	struct SpectrumResult
	{
		std::vector<double> eigenvalues; // ascending, of -L_kappa on mean-zero fields
		Eigen::MatrixXd eigenvectors;   // theta values, unit L^2(mu) norm, columns
		int iterations = 0;
		double max_residual = 0.0;
	};

	/// Lowest `count` eigenvalues of -L_kappa on mu-mean-zero fields by block
	/// inverse iteration with constants deflated. Throws ConvergenceError when
	/// the relative residual stays above tol.
	SpectrumResult lowest_eigenpairs(const GridOperator &grid, int count, double tol = 1e-8, int max_iter = 500,
									 std::uint64_t seed = 1);

	double smallest_eigenvalue(const GridOperator &grid);

	/// Number of eigenvalues of -L_kappa in (0, lambda] on mean-zero fields:
	/// inertia of Ks - lambda I, minus the constant mode.
	int eigenvalue_count(const GridOperator &grid, double lambda);

	/// Header `k,lambda_k`, k from 0.
	void write_spectrum_csv(const std::filesystem::path &path, const std::vector<double> &eigenvalues);
} // namespace mixdrift
