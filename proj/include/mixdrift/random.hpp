#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace mixdrift
{
	inline std::uint64_t splitmix64(std::uint64_t &state)
	{
		std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
		z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
		z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
		return z ^ (z >> 31);
	}

	/// xoshiro256++ (Blackman & Vigna). 32 bytes of state, so every trajectory
	/// of an ensemble can own one.
	class Xoshiro256
	{
	public:
		using result_type = std::uint64_t;

		Xoshiro256() : Xoshiro256(0) {}

		explicit Xoshiro256(std::uint64_t seed)
		{
			std::uint64_t sm = seed;
			for (auto &w : s_)
				w = splitmix64(sm);
		}

		static constexpr result_type min() { return 0; }
		static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

		result_type operator()()
		{
			const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
			const std::uint64_t t = s_[1] << 17;
			s_[2] ^= s_[0];
			s_[3] ^= s_[1];
			s_[1] ^= s_[2];
			s_[0] ^= s_[3];
			s_[2] ^= t;
			s_[3] = rotl(s_[3], 45);
			return result;
		}

		/// Uniform double in [0, 1) with 53 random bits.
		double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

		/// Standard normal by the polar method. No cached second variate, so
		/// the stream position is a pure function of the number of calls.
		double normal()
		{
			for (;;)
			{
				const double u = 2.0 * uniform() - 1.0;
				const double v = 2.0 * uniform() - 1.0;
				const double s = u * u + v * v;
				if (s > 0.0 && s < 1.0)
					return u * std::sqrt(-2.0 * std::log(s) / s);
			}
		}

		friend bool operator==(const Xoshiro256 &, const Xoshiro256 &) = default;

	private:
		static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

		std::uint64_t s_[4];
	};

	/// Independent stream `stream` of the run seeded by `seed`. Counter-based:
	/// stream k does not depend on how many other streams were created.
	inline Xoshiro256 make_stream(std::uint64_t seed, std::uint64_t stream)
	{
		std::uint64_t sm = seed ^ (0xd1b54a32d192ed03ULL * (stream + 1));
		const std::uint64_t mixed = splitmix64(sm) ^ splitmix64(sm);
		return Xoshiro256(mixed);
	}
} // namespace mixdrift
