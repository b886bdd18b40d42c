#include "config.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace mixdrift::cli
{
	namespace
	{
		using Table = std::vector<std::pair<std::string, std::string>>;

		const Table &common_keys()
		{
			static const Table t = {
				{"run.seed", "7"},
				{"run.workers", "1"},
				{"run.out", ""},
				{"potential.kind", "double_well"},
				{"potential.file", ""},
				{"potential.dim", "2"},
				{"physics.kappa", "1/20"},
				{"physics.A", "0"},
				{"field.kind", "schedule"},
				{"field.profile", "sawtooth"},
				{"field.seed", "1"},
				{"field.beta_lo", "0"},
				{"field.beta_hi", "1"},
				{"ou.omega", "1"},
				{"ou.reversion", "1"},
				{"ou.volatility", "1"},
				{"ou.mean", "0"},
				{"ou.m0", "1"},
				{"ou.dt_path", "1e-3"},
				{"ou.horizon", "auto"},
				{"ou.seed", "1"},
				{"sde.adaptive", "true"},
				{"sde.dt", "1e-4"},
				{"sde.c", "0.02"},
				{"sde.dt_min", "1e-9"},
				{"sde.dt_max", "1e-3"},
				{"flow.method", "adaptive"},
				{"flow.substeps", "64"},
				{"flow.rtol", "1e-10"},
				{"flow.atol", "1e-12"},
			};
			return t;
		}

		const std::map<std::string, Table> &command_keys()
		{
			static const std::map<std::string, Table> t = {
				{"sample",
				 {{"sample.particles", "2000"},
				  {"sample.start", "0.75,0.7"},
				  {"sample.checkpoints", "0.63,3.14"},
				  {"sample.schedule_dump", "true"}}},
				{"mixrate",
				 {{"mixrate.n_max", "30"},
				  {"mixrate.samples", "20000"},
				  {"mixrate.f", "sin1"},
				  {"mixrate.g", "sin1"},
				  {"mixrate.direction", "forward"},
				  {"mixrate.schedules", "1"}}},
				{"tdis",
				 {{"tdis.grid", "48"},
				  {"tdis.t_max", "1"},
				  {"tdis.dt_max", "1e-3"},
				  {"tdis.extrapolate", "false"},
				  {"tdis.eigenfunction", "true"},
				  {"tdis.trace_element", ""},
				  {"tdis.trace_every", "10"}}},
				{"tmix",
				 {{"tmix.trajectories", "1000"},
				  {"tmix.bins", "32"},
				  {"tmix.checkpoints", "0.25,0.5,1,2,4"},
				  {"tmix.uniform_starts", "8"}}},
				{"lyapunov",
				 {{"lyapunov.steps", "100000"}, {"lyapunov.x0", "0.2,0.4"}, {"lyapunov.trace_every", "1000"}}},
				{"liespan",
				 {{"liespan.points", "100"},
				  {"liespan.alphas", "8"},
				  {"liespan.threshold", "1e-6"},
				  {"liespan.min_separation", "0.05"}}},
				{"bounds",
				 {{"bounds.D", "1"},
				  {"bounds.gamma", "1"},
				  {"bounds.grad_v", "auto"},
				  {"bounds.C", "1"},
				  {"bounds.C_prime", "1"},
				  {"bounds.decay", ""},
				  {"bounds.samples", "4096"}}},
				{"spectrum",
				 {{"spectrum.grid", "64"}, {"spectrum.count", "8"}, {"spectrum.lambdas", ""}, {"spectrum.tol", "1e-8"}}},
				{"discrete",
				 {{"discrete.blocks", ""},
				  {"discrete.k", "1,0"},
				  {"discrete.l", "1,0"},
				  {"discrete.n_max", "20"},
				  {"discrete.samples", "100000"},
				  {"discrete.hybrid_steps", "0"},
				  {"discrete.trajectories", "1000"},
				  {"discrete.bins", "16"}}},
				{"figure",
				 {{"figure.particles", "2000"},
				  {"figure.start", "0.75,0.7"},
				  {"figure.checkpoints", "0.63,3.14"},
				  {"figure.stream_grid", "32"},
				  {"figure.stream_times", "auto"},
				  {"figure.profile_points", "1024"}}},
			};
			return t;
		}

		// figure and sample start from the two-well experiment settings
		const std::map<std::string, Table> &default_overrides()
		{
			static const std::map<std::string, Table> t = {
				{"figure",
				 {{"physics.kappa", "1/70"}, {"physics.A", "3500"}, {"field.kind", "ou"}, {"ou.dt_path", "1e-2"}, {"sde.c", "0.2"}}},
				{"sample", {{"physics.kappa", "1/70"}}},
			};
			return t;
		}

		std::string trim(const std::string &s)
		{
			const auto a = s.find_first_not_of(" \t\r");
			if (a == std::string::npos)
				return "";
			const auto b = s.find_last_not_of(" \t\r");
			return s.substr(a, b - a + 1);
		}

		std::set<std::string> known_sections()
		{
			std::set<std::string> out;
			auto add = [&](const Table &t)
			{
				for (const auto &[k, v] : t)
					out.insert(k.substr(0, k.find('.')));
			};
			add(common_keys());
			for (const auto &[c, t] : command_keys())
				add(t);
			return out;
		}
	}

	const std::vector<std::string> &commands()
	{
		static const std::vector<std::string> c = {"sample", "mixrate", "tdis", "tmix", "lyapunov",
												   "liespan", "bounds", "spectrum", "discrete", "figure"};
		return c;
	}

	double parse_number(const std::string &text)
	{
		const std::string s = trim(text);
		auto one = [&](const std::string &p) -> double
		{
			std::size_t used = 0;
			double v = 0.0;
			try
			{
				v = std::stod(p, &used);
			}
			catch (const std::exception &)
			{
				throw UsageError("not a number: '" + s + "'");
			}
			if (used != p.size())
				throw UsageError("not a number: '" + s + "'");
			return v;
		};
		const auto slash = s.find('/');
		if (slash == std::string::npos)
			return one(s);
		const double den = one(trim(s.substr(slash + 1)));
		if (den == 0.0)
			throw UsageError("zero denominator: '" + s + "'");
		return one(trim(s.substr(0, slash))) / den;
	}

	Config::Config(const std::string &command) : command_(command)
	{
		const auto it = command_keys().find(command);
		if (it == command_keys().end())
			throw UsageError("unknown subcommand '" + command + "'");
		for (const auto &[k, v] : common_keys())
			values_[k] = {v, "default"};
		for (const auto &[k, v] : it->second)
			values_[k] = {v, "default"};
		if (const auto o = default_overrides().find(command); o != default_overrides().end())
			for (const auto &[k, v] : o->second)
				values_[k] = {v, "default"};
	}

	void Config::load_ini(const std::string &text, const std::string &source)
	{
		static const std::set<std::string> sections = known_sections();
		std::istringstream in(text);
		std::string line, section;
		bool skip = false;
		int lineno = 0;
		while (std::getline(in, line))
		{
			++lineno;
			const std::string where = source + ":" + std::to_string(lineno);
			const auto hash = line.find_first_of("#;");
			const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
			if (body.empty())
				continue;
			if (body.front() == '[')
			{
				if (body.back() != ']')
					throw UsageError(where + ": malformed section header '" + body + "'");
				section = trim(body.substr(1, body.size() - 2));
				if (!sections.count(section))
					throw UsageError(where + ": unknown section [" + section + "]");
				// another subcommand's section: tolerated, not applied
				skip = std::none_of(values_.begin(), values_.end(),
									[&](const auto &kv) { return kv.first.rfind(section + ".", 0) == 0; });
				continue;
			}
			const auto eq = body.find('=');
			if (eq == std::string::npos)
				throw UsageError(where + ": expected 'key = value', got '" + body + "'");
			if (section.empty())
				throw UsageError(where + ": key outside any section");
			const std::string key = section + "." + trim(body.substr(0, eq));
			std::string value = trim(body.substr(eq + 1));
			if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
				value = value.substr(1, value.size() - 2);
			if (skip)
			{
				bool known = false;
				for (const auto &[c, t] : command_keys())
					for (const auto &kv : t)
						known = known || kv.first == key;
				if (!known)
					throw UsageError(where + ": unknown key '" + key + "'");
				continue;
			}
			if (!allows(key))
				throw UsageError(where + ": unknown key '" + key + "'");
			values_[key] = {value, where};
		}
	}

	void Config::load_file(const std::filesystem::path &path)
	{
		if (path.extension() == ".json")
			return load_manifest(path);
		std::ifstream f(path);
		if (!f)
			throw UsageError("cannot read config file " + path.string());
		std::stringstream ss;
		ss << f.rdbuf();
		load_ini(ss.str(), path.string());
	}

	void Config::load_manifest(const std::filesystem::path &path)
	{
		std::ifstream f(path);
		if (!f)
			throw UsageError("cannot read manifest " + path.string());
		nlohmann::json j;
		try
		{
			j = nlohmann::json::parse(f);
		}
		catch (const nlohmann::json::parse_error &e)
		{
			throw UsageError(path.string() + ": " + e.what());
		}
		if (!j.contains("config") || !j["config"].is_object())
			throw UsageError(path.string() + ": no config object");
		for (const auto &[k, v] : j["config"].items())
		{
			if (!v.is_string())
				throw UsageError(path.string() + ": config value of '" + k + "' is not a string");
			if (!allows(k))
				throw UsageError(path.string() + ": unknown key '" + k + "'");
			values_[k] = {v.get<std::string>(), path.string()};
		}
	}

	void Config::set(const std::string &key, const std::string &value, const std::string &origin)
	{
		if (!allows(key))
			throw UsageError(origin + ": unknown key '" + key + "'");
		values_[key] = {value, origin};
	}

	void Config::bad(const std::string &key, const std::string &what) const
	{
		const auto &s = values_.at(key);
		throw UsageError(s.origin + ": " + key + " = '" + s.value + "': " + what);
	}

	std::string Config::str(const std::string &key) const
	{
		const auto it = values_.find(key);
		if (it == values_.end())
			throw std::logic_error("key not registered: " + key);
		return it->second.value;
	}

	double Config::num(const std::string &key) const
	{
		try
		{
			return parse_number(str(key));
		}
		catch (const UsageError &e)
		{
			bad(key, e.what());
		}
	}

	bool Config::is_auto(const std::string &key) const { return str(key) == "auto"; }

	long long Config::integer(const std::string &key) const
	{
		const double v = num(key);
		if (v != std::floor(v) || std::abs(v) > 9.0e15)
			bad(key, "expected an integer");
		return static_cast<long long>(v);
	}

	std::uint64_t Config::u64(const std::string &key) const
	{
		const std::string s = str(key);
		if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
			bad(key, "expected a nonnegative integer");
		try
		{
			return std::stoull(s);
		}
		catch (const std::exception &)
		{
			bad(key, "out of range");
		}
	}

	bool Config::flag(const std::string &key) const
	{
		const std::string s = str(key);
		if (s == "true" || s == "1" || s == "yes" || s == "on")
			return true;
		if (s == "false" || s == "0" || s == "no" || s == "off")
			return false;
		bad(key, "expected true or false");
	}

	std::vector<double> Config::list(const std::string &key) const
	{
		std::vector<double> out;
		std::stringstream ss(str(key));
		std::string item;
		while (std::getline(ss, item, ','))
		{
			if (trim(item).empty())
				continue;
			try
			{
				out.push_back(parse_number(item));
			}
			catch (const UsageError &e)
			{
				bad(key, e.what());
			}
		}
		return out;
	}

	std::string Config::to_ini() const
	{
		std::ostringstream out;
		std::string section;
		for (const auto &[k, s] : values_)
		{
			const auto dot = k.find('.');
			if (k.substr(0, dot) != section)
			{
				section = k.substr(0, dot);
				out << (out.tellp() > 0 ? "\n" : "") << '[' << section << "]\n";
			}
			out << k.substr(dot + 1) << " = " << s.value << '\n';
		}
		return out.str();
	}
} // namespace mixdrift::cli
