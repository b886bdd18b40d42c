#include "mixdrift/sampler.hpp"

#include "mixdrift/parallel.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>

namespace mixdrift
{
	namespace
	{
		// Streams for the SDE noise are kept apart from sampling streams.
		constexpr std::uint64_t kNoiseTag = 0x6a09e667f3bcc909ULL;

		bool crosses_switch(double t, double dt, double A, const VelocityField *field)
		{
			if (!field || A == 0.0)
				return false;
			const double tau = A * t;
			const double next = field->next_switch(tau);
			return A * (t + dt) > next + 1e-9 * std::max(1.0, std::abs(next));
		}

		void check_checkpoints(const std::vector<double> &cp, double t0, double t_end)
		{
			for (std::size_t k = 0; k < cp.size(); ++k)
			{
				if (cp[k] < t0 - 1e-15 || cp[k] > t_end + 1e-15)
					throw PreconditionError("evolve: checkpoint " + std::to_string(cp[k]) + " outside [" +
											std::to_string(t0) + ", " + std::to_string(t_end) + "]");
				if (k > 0 && !(cp[k] > cp[k - 1]))
					throw PreconditionError("evolve: checkpoints must be strictly increasing");
			}
		}
	} // namespace

	Vec em_step(const Vec &x, double t, double dt, const SdeConfig &cfg, const VelocityField *field,
				const Potential &U, Xoshiro256 &rng)
	{
		if (!(dt > 0.0))
			throw PreconditionError("em_step: dt must be positive");
		if (crosses_switch(t, dt, cfg.A, field))
			throw PreconditionError("em_step: step crosses a shear-segment boundary; split it");
		Vec drift = -U.gradient(x);
		if (field && cfg.A != 0.0)
			drift += cfg.A * field->eval(cfg.A * t, x);
		Vec y = x + dt * drift;
		if (cfg.kappa > 0.0)
		{
			const double s = std::sqrt(2.0 * cfg.kappa * dt);
			for (Eigen::Index a = 0; a < y.size(); ++a)
				y(a) += s * rng.normal();
		}
		wrap_in_place(y);
		return y;
	}

	Ensemble::Ensemble(std::vector<TorusPoint> initial, std::uint64_t seed) : positions_(std::move(initial)), seed_(seed)
	{
		rngs_.reserve(positions_.size());
		for (std::size_t k = 0; k < positions_.size(); ++k)
			rngs_.push_back(make_stream(seed ^ kNoiseTag, k));
	}

	Ensemble Ensemble::dirac(const TorusPoint &x0, std::size_t n, std::uint64_t seed)
	{
		return Ensemble(std::vector<TorusPoint>(n, x0), seed);
	}

	void Ensemble::apply_map(const std::function<Vec(const Vec &)> &map, int workers)
	{
		parallel_for(positions_.size(), workers, [&](std::size_t b, std::size_t e) {
			for (std::size_t id = b; id < e; ++id)
				positions_[id] = TorusPoint::wrap(map(positions_[id].coords()));
		});
	}

	std::vector<Snapshot> Ensemble::evolve(const SdeConfig &cfg, const VelocityField *field, const Potential &U,
										   const std::vector<double> &checkpoints)
	{
		if (cfg.t_end < t_)
			throw PreconditionError("evolve: t_end precedes the ensemble time");
		if (!cfg.dt.adaptive && !(cfg.dt.dt > 0.0))
			throw PreconditionError("evolve: fixed dt must be positive");
		if (cfg.dt.adaptive && !(cfg.dt.c > 0.0 && cfg.dt.dt_min > 0.0 && cfg.dt.dt_max >= cfg.dt.dt_min))
			throw PreconditionError("evolve: adaptive policy needs c > 0 and 0 < dt_min <= dt_max");
		check_checkpoints(checkpoints, t_, cfg.t_end);

		const std::size_t n = size();
		std::vector<Snapshot> snaps(checkpoints.size());
		for (std::size_t k = 0; k < checkpoints.size(); ++k)
		{
			snaps[k].t = checkpoints[k];
			snaps[k].positions.resize(n);
		}
		std::vector<std::uint64_t> step_count(n, 0);
		const bool with_field = field && cfg.A != 0.0;
		const double sigma = std::sqrt(2.0 * std::max(cfg.kappa, 0.0));
		const double t0 = t_;

		parallel_for(n, cfg.workers, [&](std::size_t b, std::size_t e) {
			for (std::size_t id = b; id < e; ++id)
			{
				Vec x = positions_[id].coords();
				auto &rng = rngs_[id];
				double t = t0;
				std::uint64_t steps = 0;
				std::size_t next_cp = 0;
				while (next_cp < checkpoints.size() && checkpoints[next_cp] <= t0)
					snaps[next_cp++].positions[id] = positions_[id];
				const int d = static_cast<int>(x.size());
				while (true)
				{
					const double target = next_cp < checkpoints.size() ? checkpoints[next_cp] : cfg.t_end;
					if (t >= target)
					{
						if (next_cp < checkpoints.size())
						{
							snaps[next_cp++].positions[id] = TorusPoint::wrap(x);
							continue;
						}
						break;
					}
					const Vec g = U.gradient(x);
					Vec drift = -g;
					double speed = drift.norm();
					if (with_field)
					{
						const Vec v = field->eval_given_gradient(cfg.A * t, x, g);
						drift += cfg.A * v;
						speed += cfg.A * v.norm();
					}
					double dt = cfg.dt.dt;
					if (cfg.dt.adaptive)
						dt = std::clamp(cfg.dt.c / (speed + 1.0), cfg.dt.dt_min, cfg.dt.dt_max);
					dt = std::min(dt, target - t);
					bool snap_to_target = dt == target - t;
					if (with_field)
					{
						const double remain = (field->next_switch(cfg.A * t) - cfg.A * t) / cfg.A;
						if (remain <= dt)
						{
							dt = remain;
							snap_to_target = false;
						}
					}
					if (dt <= 0.0)
					{
						// landed on a switch within round-off; nudge into the next segment
						t = std::nextafter(t, INFINITY);
						continue;
					}
					x += dt * drift;
					const double s = sigma * std::sqrt(dt);
					if (s > 0.0)
						for (int a = 0; a < d; ++a)
							x(a) += s * rng.normal();
					wrap_in_place(x);
					t = snap_to_target ? target : t + dt;
					++steps;
				}
				positions_[id] = TorusPoint::wrap(x);
				step_count[id] = steps;
			}
		});
		for (auto s : step_count)
			steps_ += s;
		t_ = cfg.t_end;
		return snaps;
	}

	std::vector<double> basin_occupancy(const std::vector<TorusPoint> &snapshot, const std::vector<TorusPoint> &minima)
	{
		if (snapshot.empty())
			throw PreconditionError("basin_occupancy: empty snapshot");
		if (minima.empty())
			throw PreconditionError("basin_occupancy: at least one minimum required");
		std::vector<double> frac(minima.size(), 0.0);
		for (const auto &p : snapshot)
		{
			std::size_t best = 0;
			double bd = INFINITY;
			for (std::size_t m = 0; m < minima.size(); ++m)
			{
				const double dist = torus_distance(p, minima[m]);
				if (dist < bd)
				{
					bd = dist;
					best = m;
				}
			}
			frac[best] += 1.0;
		}
		for (auto &f : frac)
			f /= static_cast<double>(snapshot.size());
		return frac;
	}

	void write_snapshot_csv(const std::filesystem::path &path, const std::vector<Snapshot> &snaps)
	{
		std::ofstream out(path);
		if (!out)
			throw Error("cannot write " + path.string());
		const int d = snaps.empty() || snaps[0].positions.empty() ? 2 : snaps[0].positions[0].dim();
		out << "t,id";
		for (int a = 1; a <= d; ++a)
			out << ",x" << a;
		out << '\n' << std::setprecision(17);
		for (const auto &s : snaps)
			for (std::size_t id = 0; id < s.positions.size(); ++id)
			{
				out << s.t << ',' << id;
				for (int a = 0; a < d; ++a)
					out << ',' << s.positions[id][a];
				out << '\n';
			}
	}

	void write_occupancy_csv(const std::filesystem::path &path, const std::vector<Snapshot> &snaps,
							 const std::vector<TorusPoint> &minima)
	{
		std::ofstream out(path);
		if (!out)
			throw Error("cannot write " + path.string());
		out << "t,basin,fraction\n" << std::setprecision(17);
		for (const auto &s : snaps)
		{
			const auto f = basin_occupancy(s.positions, minima);
			for (std::size_t m = 0; m < f.size(); ++m)
				out << s.t << ',' << m << ',' << f[m] << '\n';
		}
	}
} // namespace mixdrift
