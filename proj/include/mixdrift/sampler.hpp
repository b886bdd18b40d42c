#pragma once

#include "mixdrift/velocity.hpp"

#include <filesystem>
#include <functional>
#include <vector>

namespace mixdrift
{
	/// dt = clamp(c / (A |v(x)| + |grad U(x)| + 1), dt_min, dt_max) when adaptive.
	struct DtPolicy
	{
		bool adaptive = true;
		double dt = 1e-4; // fixed step
		double c = 0.02;
		double dt_min = 1e-9;
		double dt_max = 1e-3;

		static DtPolicy fixed(double dt)
		{
			DtPolicy p;
			p.adaptive = false;
			p.dt = dt;
			return p;
		}
	};

	struct SdeConfig
	{
		double kappa = 1.0;
		double A = 0.0; // 0: plain Langevin
		DtPolicy dt;
		double t_end = 1.0;
		std::uint64_t seed = 0;
		int workers = 1;
	};

	/// One Euler-Maruyama step of dX = A v_{At}(X) dt - grad U(X) dt + sqrt(2 kappa) dW.
	/// Throws PreconditionError when [A t, A(t+dt)] crosses a field switch.
	Vec em_step(const Vec &x, double t, double dt, const SdeConfig &cfg, const VelocityField *field,
				const Potential &U, Xoshiro256 &rng);

	struct Snapshot
	{
		double t = 0.0;
		std::vector<TorusPoint> positions;
	};

	class Ensemble
	{
	public:
		Ensemble(std::vector<TorusPoint> initial, std::uint64_t seed);
		/// n copies of one point.
		static Ensemble dirac(const TorusPoint &x0, std::size_t n, std::uint64_t seed);

		std::size_t size() const { return positions_.size(); }
		double time() const { return t_; }
		const std::vector<TorusPoint> &positions() const { return positions_; }
		std::uint64_t seed() const { return seed_; }

		/// Advances every trajectory to cfg.t_end, recording snapshots at the
		/// increasing checkpoint times (all >= time(), <= t_end). Results do
		/// not depend on cfg.workers.
		std::vector<Snapshot> evolve(const SdeConfig &cfg, const VelocityField *field, const Potential &U,
									 const std::vector<double> &checkpoints);

		/// Replaces every position x by wrap(map(x)); time is unchanged.
		void apply_map(const std::function<Vec(const Vec &)> &map, int workers = 1);

		/// Total Euler-Maruyama steps taken so far.
		std::uint64_t steps() const { return steps_; }

	private:
		std::vector<TorusPoint> positions_;
		std::vector<Xoshiro256> rngs_;
		double t_ = 0.0;
		std::uint64_t seed_;
		std::uint64_t steps_ = 0;
	};

	/// Fraction of points nearest (torus metric) to each minimum.
	std::vector<double> basin_occupancy(const std::vector<TorusPoint> &snapshot, const std::vector<TorusPoint> &minima);

	/// Header `t,id,x1,...,xd`.
	void write_snapshot_csv(const std::filesystem::path &path, const std::vector<Snapshot> &snaps);
	/// Header `t,basin,fraction`, one block per snapshot.
	void write_occupancy_csv(const std::filesystem::path &path, const std::vector<Snapshot> &snaps,
							 const std::vector<TorusPoint> &minima);
} // namespace mixdrift
