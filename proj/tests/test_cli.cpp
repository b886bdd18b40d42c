#include <doctest.h>

#include "commands.hpp"
#include "config.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unistd.h>

using namespace mixdrift::cli;
namespace fs = std::filesystem;

namespace
{
	struct TempDir
	{
		fs::path path;
		TempDir()
		{
			path = fs::temp_directory_path() / ("mixdrift_cli_" + std::to_string(::getpid()));
			fs::remove_all(path);
			fs::create_directories(path);
		}
		~TempDir() { fs::remove_all(path); }
	};

	std::string slurp(const fs::path &p)
	{
		std::ifstream f(p, std::ios::binary);
		std::stringstream s;
		s << f.rdbuf();
		return s.str();
	}

	int call(std::vector<std::string> args, std::string *err = nullptr)
	{
		std::ostringstream o, e;
		const int rc = run(args, o, e);
		if (err)
			*err = e.str();
		return rc;
	}

	std::vector<std::string> small_sample(const fs::path &out)
	{
		return {"sample", "-A", "20", "--seed", "7", "--set", "sample.particles=64", "--set",
				"sample.checkpoints=0.05,0.1", "-o", out.string()};
	}

	int line_count(const std::string &s)
	{
		int n = 0;
		for (char ch : s)
			n += ch == '\n';
		return n;
	}
}

TEST_CASE("numbers accept fractions")
{
	CHECK(parse_number("1/70") == doctest::Approx(1.0 / 70.0).epsilon(1e-15));
	CHECK(parse_number(" 2.5e-3 ") == 2.5e-3);
	CHECK_THROWS_AS(parse_number("1/0"), UsageError);
	CHECK_THROWS_AS(parse_number("0.1x"), UsageError);
}

TEST_CASE("config errors carry line numbers")
{
	Config c("tdis");
	const std::string text = "# comment\n[physics]\nkappa = 0.05\nkapa = 1\n";
	try
	{
		c.load_ini(text, "run.ini");
		FAIL("no error");
	}
	catch (const UsageError &e)
	{
		CHECK(std::string(e.what()).find("run.ini:4") != std::string::npos);
		CHECK(std::string(e.what()).find("physics.kapa") != std::string::npos);
	}
	CHECK_THROWS_AS(Config("tdis").load_ini("[nosuch]\n", "x"), UsageError);
	CHECK_THROWS_AS(Config("tdis").load_ini("[physics]\nkappa\n", "x"), UsageError);
	CHECK_THROWS_AS(Config("tdis").load_ini("kappa = 1\n", "x"), UsageError);
}

TEST_CASE("sections of other subcommands are skipped but still checked")
{
	Config c("tdis");
	c.load_ini("[sample]\nparticles = 10\n[tdis]\ngrid = 16 ; coarse\n", "x");
	CHECK(c.integer("tdis.grid") == 16);
	CHECK_FALSE(c.allows("sample.particles"));
	CHECK_THROWS_AS(Config("tdis").load_ini("[sample]\nparticle = 10\n", "x"), UsageError);
}

TEST_CASE("type errors name the origin")
{
	Config c("sample");
	c.load_ini("[run]\nseed = -3\n", "f.ini");
	try
	{
		c.u64("run.seed");
		FAIL("no error");
	}
	catch (const UsageError &e)
	{
		CHECK(std::string(e.what()).find("f.ini:2") != std::string::npos);
	}
}

TEST_CASE("flags override the config file")
{
	TempDir d;
	std::ofstream(d.path / "c.ini") << "[physics]\nkappa = 0.5\nA = 3\n[sample]\nparticles = 8\ncheckpoints = 0.01\n";
	REQUIRE(call({"sample", "-c", (d.path / "c.ini").string(), "--kappa", "1/4", "-o", (d.path / "o").string()}) == exit_ok);
	const auto j = nlohmann::json::parse(slurp(d.path / "o" / "manifest.json"));
	CHECK(j["config"]["physics.kappa"] == "1/4");
	CHECK(j["config"]["physics.A"] == "3");
	CHECK(j["origin"]["physics.A"].get<std::string>().find("c.ini:3") != std::string::npos);
}

TEST_CASE("equal seeds give byte-identical CSVs, any worker count")
{
	TempDir d;
	REQUIRE(call(small_sample(d.path / "a")) == exit_ok);
	REQUIRE(call(small_sample(d.path / "b")) == exit_ok);
	auto args = small_sample(d.path / "c");
	args.insert(args.end(), {"-j", "3"});
	REQUIRE(call(args) == exit_ok);
	for (const char *f : {"snapshots.csv", "occupancy.csv", "schedule.csv"})
	{
		const std::string a = slurp(d.path / "a" / f);
		CHECK(!a.empty());
		CHECK(a == slurp(d.path / "b" / f));
		CHECK(a == slurp(d.path / "c" / f));
		CHECK(a.find('\r') == std::string::npos);
	}
	CHECK(slurp(d.path / "a" / "snapshots.csv").rfind("t,id,x1,x2\n", 0) == 0);
}

TEST_CASE("a manifest re-runs bit-identically")
{
	TempDir d;
	REQUIRE(call(small_sample(d.path / "a")) == exit_ok);
	REQUIRE(call({"sample", "-c", (d.path / "a" / "manifest.json").string(), "-o", (d.path / "b").string()}) ==
			exit_ok);
	CHECK(slurp(d.path / "a" / "snapshots.csv") == slurp(d.path / "b" / "snapshots.csv"));
	REQUIRE(call({"sample", "-c", (d.path / "a" / "config.ini").string(), "-o", (d.path / "c").string()}) == exit_ok);
	CHECK(slurp(d.path / "a" / "snapshots.csv") == slurp(d.path / "c" / "snapshots.csv"));
}

TEST_CASE("bounds from a decay CSV gives one row")
{
	TempDir d;
	{
		std::ofstream f(d.path / "decay.csv", std::ios::binary);
		f << "n,corr,abs_corr,floor\n" << std::setprecision(17);
		for (int n = 0; n <= 30; ++n)
		{
			const double c = 0.8 * std::exp(-0.5 * n);
			f << n << ',' << c << ',' << c << ',' << 1e-6 << '\n';
		}
	}
	REQUIRE(call({"bounds", "--kappa", "0.05", "--decay", (d.path / "decay.csv").string(), "--set", "bounds.grad_v=4",
				  "-A", "1000", "-o", (d.path / "b").string()}) == exit_ok);
	const std::string csv = slurp(d.path / "b" / "bounds.csv");
	CHECK(line_count(csv) == 2);

	std::ofstream(d.path / "bad.csv") << "n,corr\n0,1\n";
	std::string err;
	CHECK(call({"bounds", "--decay", (d.path / "bad.csv").string(), "-o", (d.path / "x").string()}, &err) ==
		  exit_usage);
	CHECK(err.find(":1:") != std::string::npos);
}

TEST_CASE("exit codes")
{
	TempDir d;
	CHECK(call({}) == exit_usage);
	CHECK(call({"nosuch"}) == exit_usage);
	CHECK(call({"tdis", "--set", "tdis.gird=3"}) == exit_usage);
	CHECK(call({"tdis", "--kappa", "-1"}) == exit_usage);
	CHECK(call({"sample", "--help"}) == exit_ok);
	// flat decay: no exponential window, a runtime failure
	{
		std::ofstream f(d.path / "flat.csv");
		f << "n,corr,abs_corr,floor\n";
		for (int n = 0; n < 10; ++n)
			f << n << ",0.5,0.5,0.001\n";
	}
	CHECK(call({"bounds", "--decay", (d.path / "flat.csv").string(), "-o", (d.path / "x").string()}) ==
		  exit_runtime);
}

TEST_CASE("output root from the environment")
{
	TempDir d;
	::setenv("MIXDRIFT_OUT", d.path.c_str(), 1);
	const int rc = call({"spectrum", "--potential", "zero", "--kappa", "1", "--set", "spectrum.grid=16", "--set",
						 "spectrum.count=2"});
	::unsetenv("MIXDRIFT_OUT");
	REQUIRE(rc == exit_ok);
	CHECK(fs::exists(d.path / "spectrum" / "spectrum.csv"));
	CHECK(fs::exists(d.path / "spectrum" / "manifest.json"));
}

TEST_CASE("figure recipe writes four snapshots and the occupancies")
{
	TempDir d;
	REQUIRE(call({"figure", "-A", "350", "--set", "figure.particles=4", "--set", "figure.stream_grid=4", "-o",
				  d.path.string()}) == exit_ok);
	for (const char *eq : {"langevin", "drift"})
	{
		for (const char *t : {"0.63", "3.14"})
			CHECK(fs::exists(d.path / (std::string("snapshots_") + eq + "_T" + t + ".csv")));
		CHECK(fs::exists(d.path / (std::string("occupancy_") + eq + ".csv")));
	}
	CHECK(line_count(slurp(d.path / "stream.csv")) == 1 + 2 * 16);
	// sawtooth stream profile through (0, 0), (1/4, 1/8), (1/2, 1/4)
	std::istringstream prof(slurp(d.path / "profile.csv"));
	std::string line;
	std::getline(prof, line);
	CHECK(line == "x,F,dF");
	int hits = 0;
	while (std::getline(prof, line))
	{
		double x, F;
		char comma;
		std::istringstream(line) >> x >> comma >> F;
		if (x == 0.0 || x == 0.25 || x == 0.5)
		{
			CHECK(F == doctest::Approx(x / 2.0).epsilon(1e-12));
			++hits;
		}
	}
	CHECK(hits == 3);
}
