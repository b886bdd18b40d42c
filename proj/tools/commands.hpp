#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mixdrift::cli
{
	inline constexpr const char *kVersion = "0.1.0";

	enum ExitCode
	{
		exit_ok = 0,
		exit_usage = 1,
		exit_runtime = 2,
	};

	/// Full command line without the program name, e.g. {"sample", "--seed", "7"}.
	int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);
} // namespace mixdrift::cli
