#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace mixdrift::cli
{
	/// Bad configuration or arguments (exit status 1).
	class UsageError : public std::runtime_error
	{
	public:
		using std::runtime_error::runtime_error;
	};

	struct Setting
	{
		std::string value;
		std::string origin = "default"; // "file.ini:12", "--kappa", "default"
	};

	/// Flat `section.key -> value` map for one subcommand. The allowed keys
	/// and their defaults come from the subcommand's key table.
	class Config
	{
	public:
		explicit Config(const std::string &command);

		const std::string &command() const { return command_; }
		bool allows(const std::string &key) const { return values_.count(key) != 0; }

		/// INI-style text: `[section]` headers, `key = value`, `#` or `;`
		/// comments. Unknown sections or keys are errors with the line number.
		/// Sections that belong to other subcommands are skipped.
		void load_ini(const std::string &text, const std::string &source);
		void load_file(const std::filesystem::path &path);
		/// Flat object from a manifest sidecar (`config` member).
		void load_manifest(const std::filesystem::path &path);

		void set(const std::string &key, const std::string &value, const std::string &origin);

		std::string str(const std::string &key) const;
		double num(const std::string &key) const;
		bool is_auto(const std::string &key) const;
		long long integer(const std::string &key) const;
		std::uint64_t u64(const std::string &key) const;
		bool flag(const std::string &key) const;
		std::vector<double> list(const std::string &key) const;

		const std::map<std::string, Setting> &values() const { return values_; }
		std::string to_ini() const;

	private:
		[[noreturn]] void bad(const std::string &key, const std::string &what) const;

		std::string command_;
		std::map<std::string, Setting> values_;
	};

	/// Accepts decimals and simple fractions such as `1/70`.
	double parse_number(const std::string &text);

	const std::vector<std::string> &commands();
} // namespace mixdrift::cli
