#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace mixdrift
{
	/// Runs body(begin, end) over contiguous chunks of [0, n) on `workers`
	/// threads. The first exception thrown by any chunk is rethrown.
	template <typename Body>
	void parallel_for(std::size_t n, int workers, Body &&body)
	{
		const std::size_t w = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), n));
		if (w <= 1)
		{
			if (n > 0)
				body(std::size_t{0}, n);
			return;
		}
		std::vector<std::thread> threads;
		std::vector<std::exception_ptr> errors(w);
		const std::size_t chunk = (n + w - 1) / w;
		for (std::size_t t = 0; t < w; ++t)
		{
			const std::size_t b = t * chunk, e = std::min(n, b + chunk);
			if (b >= e)
				break;
			threads.emplace_back([&, t, b, e] {
				try
				{
					body(b, e);
				}
				catch (...)
				{
					errors[t] = std::current_exception();
				}
			});
		}
		for (auto &th : threads)
			th.join();
		for (auto &err : errors)
			if (err)
				std::rethrow_exception(err);
	}

	inline int default_workers()
	{
		const unsigned hc = std::thread::hardware_concurrency();
		return hc == 0 ? 1 : static_cast<int>(hc);
	}
} // namespace mixdrift
