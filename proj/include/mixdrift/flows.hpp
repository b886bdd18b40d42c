#pragma once

#include "mixdrift/velocity.hpp"

#include <filesystem>
#include <functional>
#include <utility>
#include <vector>

namespace mixdrift
{
	enum class FlowMethod
	{
		rk4,      // fixed substeps
		adaptive, // Dormand-Prince 5(4) with error control
	};

	struct FlowOptions
	{
		FlowMethod method = FlowMethod::adaptive;
		int substeps = 64;
		double rtol = 1e-10;
		double atol = 1e-12;
		/// Use the closed form for plain shears (U = 0 schedule fields).
		bool closed_form = true;
		/// Adaptive method on switching fields: integrate one period of the
		/// (periodic) segment orbit and reduce the remaining time modulo it.
		bool return_map = true;
	};

	struct FlowSegmentResult
	{
		TorusPoint position;
		Mat jacobian;
	};

	/// Integrates dx/dt = v(t, x), dJ/dt = Dv(t, x) J over [t0, t0 + duration]
	/// (field time). The interval must not cross a field switch.
	FlowSegmentResult flow_segment(const VelocityField &field, double t0, const Vec &x,
								   const FlowOptions &opt = {}, double duration = 1.0);

	/// Position only, same integration as flow_segment.
	TorusPoint flow_point(const VelocityField &field, double t0, const Vec &x, const FlowOptions &opt = {},
						  double duration = 1.0);

	/// Inverse of the flow over [t0, t0 + duration]: integrates backwards from
	/// t0 + duration to t0.
	TorusPoint flow_point_backward(const VelocityField &field, double t0, const Vec &x, const FlowOptions &opt = {},
								   double duration = 1.0);

	/// Inverse of the segment-n map: integrates the field backwards from n + 1 to n.
	TorusPoint flow_segment_inverse(const VelocityField &field, std::int64_t n, const Vec &x, const FlowOptions &opt = {});

	/// Composition of the unit segments n0, n0+1, ..., n0+count-1.
	FlowSegmentResult flow_segments(const VelocityField &field, std::int64_t n0, std::int64_t count, const Vec &x,
									const FlowOptions &opt = {});

	struct ProjectiveState
	{
		TorusPoint position;
		Vec direction; // unit
	};

	/// Advances (X_n, U_n) by segment n: X_{n+1} = phi(X_n), U_{n+1} = D phi U_n / |D phi U_n|.
	/// Returns log |D phi U_n|.
	double projective_step(const VelocityField &field, std::int64_t n, ProjectiveState &s, const FlowOptions &opt = {});

	struct TwoPointState
	{
		TorusPoint x, y;
	};

	void two_point_step(const VelocityField &field, std::int64_t n, TwoPointState &s, const FlowOptions &opt = {});

	struct LyapunovEstimate
	{
		double lambda = 0.0;
		double half_width = 0.0; // confidence half-width, batch means
		std::int64_t steps = 0;
	};

	/// Top Lyapunov exponent of the cocycle J_0, J_1, ... from the renormalised
	/// tangent vector u0; `next(n, u)` returns J_n u. Batch means over
	/// `batches` equal batches with normal quantile z. If `trace` is given it
	/// receives (n, running estimate) every `trace_every` steps.
	LyapunovEstimate lyapunov_cocycle(const std::function<Vec(std::int64_t, const Vec &)> &next, Vec u0,
									  std::int64_t n_steps, int batches = 20, double z = 2.576,
									  std::vector<std::pair<std::int64_t, double>> *trace = nullptr,
									  std::int64_t trace_every = 100);

	/// Top Lyapunov exponent of the unit-segment flow maps of `field` (d = 2),
	/// starting from x0 and a direction drawn from `seed`.
	LyapunovEstimate lyapunov_top(const VelocityField &field, const Vec &x0, std::int64_t n_steps, std::uint64_t seed,
								  const FlowOptions &opt = {},
								  std::vector<std::pair<std::int64_t, double>> *trace = nullptr,
								  std::int64_t trace_every = 100);

	/// Header `n,lyap_partial`.
	void write_lyapunov_csv(const std::filesystem::path &path, const std::vector<std::pair<std::int64_t, double>> &trace);

	struct SpanRank
	{
		int rank = 0;
		double sv_ratio = 0.0; // sigma_4 / sigma_1
		Eigen::VectorXd singular_values;
	};

	/// Rank of the span of {(v(x), v(y))} over the modified shear family with
	/// the given alpha values and both orientations, plus first-order Lie
	/// brackets [v, w] = (Dw) v - (Dv) w by centred differences with step h_fd.
	/// d = 2; requires x1 != y1 and x2 != y2 (mod 1).
	SpanRank two_point_span_rank(const ShearProfile &profile, const Potential &U, double kappa, const Vec &x,
								 const Vec &y, const std::vector<double> &alphas, double h_fd = 1e-5,
								 double threshold = 1e-6);

	/// Header `x1,x2,y1,y2,rank,sv_ratio`.
	struct SpanScanRow
	{
		Vec x, y;
		SpanRank r;
	};
	void write_span_csv(const std::filesystem::path &path, const std::vector<SpanScanRow> &rows);
} // namespace mixdrift
