#include "mixdrift/potential.hpp"

#include "mixdrift/torus.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace mixdrift
{
	std::string to_string(PotentialKind kind)
	{
		switch (kind)
		{
		case PotentialKind::zero: return "zero";
		case PotentialKind::double_well: return "double-well";
		case PotentialKind::separable: return "separable";
		case PotentialKind::custom_grid: return "custom-grid";
		}
		return "unknown";
	}

	CubicBSplineWeights::CubicBSplineWeights(double u)
	{
		const double u2 = u * u, u3 = u2 * u, m = 1.0 - u;
		w[0] = m * m * m / 6.0;
		w[1] = (3.0 * u3 - 6.0 * u2 + 4.0) / 6.0;
		w[2] = (-3.0 * u3 + 3.0 * u2 + 3.0 * u + 1.0) / 6.0;
		w[3] = u3 / 6.0;
		dw[0] = -0.5 * m * m;
		dw[1] = 0.5 * (3.0 * u2 - 4.0 * u);
		dw[2] = 0.5 * (-3.0 * u2 + 2.0 * u + 1.0);
		dw[3] = 0.5 * u2;
		ddw[0] = m;
		ddw[1] = 3.0 * u - 2.0;
		ddw[2] = 1.0 - 3.0 * u;
		ddw[3] = u;
	}

	std::vector<double> PeriodicCubicSpline::prefilter(const std::vector<double> &f)
	{
		const int n = static_cast<int>(f.size());
		if (n < 4)
			throw PreconditionError("periodic spline needs at least 4 samples");
		// Gauss-Seidel on c_k = (6 f_k - c_{k-1} - c_{k+1}) / 4; the iteration
		// matrix has norm 1/2 so ~60 sweeps reach round-off.
		std::vector<double> c(f.begin(), f.end());
		double scale = 0.0;
		for (double v : f)
			scale = std::max(scale, std::abs(v));
		for (int sweep = 0; sweep < 200; ++sweep)
		{
			double change = 0.0;
			for (int k = 0; k < n; ++k)
			{
				const double prev = c[(k + n - 1) % n], next = c[(k + 1) % n];
				const double updated = (6.0 * f[k] - prev - next) / 4.0;
				change = std::max(change, std::abs(updated - c[k]));
				c[k] = updated;
			}
			if (change <= 1e-16 * std::max(scale, 1.0))
				break;
		}
		return c;
	}

	PeriodicCubicSpline::PeriodicCubicSpline(std::vector<double> samples) : coef_(prefilter(samples)) {}

	double PeriodicCubicSpline::eval(double x, int order) const
	{
		const int n = size();
		const double t = wrap_unit(x) * n;
		int i = static_cast<int>(std::floor(t));
		const double u = t - i;
		const CubicBSplineWeights b(u);
		const double *w = order == 0 ? b.w : (order == 1 ? b.dw : b.ddw);
		double s = 0.0;
		for (int m = 0; m < 4; ++m)
			s += coef_[((i - 1 + m) % n + n) % n] * w[m];
		return s * std::pow(static_cast<double>(n), order);
	}

	// ---------------------------------------------------------------------------

	namespace
	{
		struct SinSq
		{
			double s, d1, d2;
			// from r = sin(pi z), c = cos(pi z)
			SinSq(double r, double c)
			{
				s = r * r;
				d1 = kTwoPi * r * c;
				d2 = 2.0 * kPi * kPi * (c * c - r * r);
			}
		};

		// The four factors of the double well from two sin/cos pairs:
		// pi(x1 + .75) = pi(x1 - .75) + 3pi/2 and pi(x2 + .7) = pi(x2 - .7) + 7pi/5.
		struct WellFactors
		{
			SinSq a1, a2, b1, b2;
			static WellFactors at(const Vec &x)
			{
				const double t1 = kPi * (x(0) - 0.75), t2 = kPi * (x(1) - 0.7);
				const double r1 = std::sin(t1), c1 = std::cos(t1), r2 = std::sin(t2), c2 = std::cos(t2);
				static const double sp = std::sin(1.4 * kPi), cp = std::cos(1.4 * kPi);
				return {SinSq(r1, c1), SinSq(r2, c2), SinSq(-c1, r1), SinSq(r2 * cp + c2 * sp, c2 * cp - r2 * sp)};
			}
		};
	} // namespace

	Vec DoubleWellPotential::gradient(const Vec &x) const
	{
		const auto [a1, a2, b1, b2] = WellFactors::at(x);
		const double a = a1.s + a2.s, b = b1.s + b2.s;
		Vec g(2);
		g << a1.d1 * b + a * b1.d1, a2.d1 * b + a * b2.d1;
		return g;
	}

	Mat DoubleWellPotential::hessian(const Vec &x) const
	{
		const auto [a1, a2, b1, b2] = WellFactors::at(x);
		const double a = a1.s + a2.s, b = b1.s + b2.s;
		Mat h(2, 2);
		h(0, 0) = a1.d2 * b + 2.0 * a1.d1 * b1.d1 + a * b1.d2;
		h(1, 1) = a2.d2 * b + 2.0 * a2.d1 * b2.d1 + a * b2.d2;
		h(0, 1) = h(1, 0) = a1.d1 * b2.d1 + a2.d1 * b1.d1;
		return h;
	}

	std::vector<Vec> DoubleWellPotential::minima()
	{
		Vec p(2), q(2);
		p << 0.25, 0.3;
		q << 0.75, 0.7;
		return {p, q};
	}

	// ---------------------------------------------------------------------------

	SeparablePotential::SeparablePotential(int dim, std::shared_ptr<const PeriodicFunction1D> component)
		: Potential(dim), component_(std::move(component))
	{
		if (!component_)
			throw PreconditionError("separable potential needs a component");
	}

	double SeparablePotential::value(const Vec &x) const
	{
		double s = 0.0;
		for (int i = 0; i < dim(); ++i)
			s += component_->value(x(i));
		return s;
	}

	Vec SeparablePotential::gradient(const Vec &x) const
	{
		Vec g(dim());
		for (int i = 0; i < dim(); ++i)
			g(i) = component_->d1(x(i));
		return g;
	}

	Mat SeparablePotential::hessian(const Vec &x) const
	{
		Mat h = Mat::Zero(dim(), dim());
		for (int i = 0; i < dim(); ++i)
			h(i, i) = component_->d2(x(i));
		return h;
	}

	// ---------------------------------------------------------------------------

	GridPotential::GridPotential(int dim, int n, std::vector<double> values) : Potential(dim), n_(n)
	{
		if (dim < 2 || dim > 3)
			throw UnsupportedError("grid potentials support d = 2 or 3");
		if (n < 4)
			throw PreconditionError("grid potential needs n >= 4");
		std::size_t total = 1;
		for (int i = 0; i < dim; ++i)
			total *= static_cast<std::size_t>(n);
		if (values.size() != total)
			throw PreconditionError("grid potential: expected n^d values");

		// Separable prefilter, one axis at a time.
		coef_ = std::move(values);
		std::size_t stride = 1;
		for (int axis = dim - 1; axis >= 0; --axis)
		{
			const std::size_t block = stride * n;
			std::vector<double> line(n);
			for (std::size_t base = 0; base < total; ++base)
			{
				// visit each line once: base must have axis-coordinate 0
				if ((base / stride) % n != 0)
					continue;
				for (int k = 0; k < n; ++k)
					line[k] = coef_[base + k * stride];
				const auto c = PeriodicCubicSpline::prefilter(line);
				for (int k = 0; k < n; ++k)
					coef_[base + k * stride] = c[k];
			}
			stride = block;
		}
	}

	void GridPotential::eval(const Vec &x, double *value, Vec *grad, Mat *hess) const
	{
		const int d = dim();
		std::array<int, 3> base{};
		std::array<CubicBSplineWeights, 3> wts{CubicBSplineWeights(0), CubicBSplineWeights(0), CubicBSplineWeights(0)};
		for (int a = 0; a < d; ++a)
		{
			const double t = wrap_unit(x(a)) * n_;
			base[a] = static_cast<int>(std::floor(t));
			wts[a] = CubicBSplineWeights(t - base[a]);
		}
		double v = 0.0;
		Vec g = Vec::Zero(d);
		Mat h = Mat::Zero(d, d);
		const int combos = d == 2 ? 16 : 64;
		for (int c = 0; c < combos; ++c)
		{
			std::array<int, 3> m{c & 3, (c >> 2) & 3, (c >> 4) & 3};
			std::size_t idx = 0;
			for (int a = 0; a < d; ++a)
				idx = idx * n_ + static_cast<std::size_t>(((base[a] - 1 + m[a]) % n_ + n_) % n_);
			const double coef = coef_[idx];
			double w = 1.0;
			for (int a = 0; a < d; ++a)
				w *= wts[a].w[m[a]];
			v += coef * w;
			if (!grad && !hess)
				continue;
			for (int a = 0; a < d; ++a)
			{
				double ga = wts[a].dw[m[a]];
				for (int b = 0; b < d; ++b)
					if (b != a)
						ga *= wts[b].w[m[b]];
				g(a) += coef * ga;
				for (int b = a; b < d; ++b)
				{
					double hab = 1.0;
					for (int e = 0; e < d; ++e)
					{
						if (e == a && e == b)
							hab *= wts[e].ddw[m[e]];
						else if (e == a || e == b)
							hab *= wts[e].dw[m[e]];
						else
							hab *= wts[e].w[m[e]];
					}
					h(a, b) += coef * hab;
				}
			}
		}
		const double nn = static_cast<double>(n_);
		if (value)
			*value = v;
		if (grad)
			*grad = g * nn;
		if (hess)
		{
			for (int a = 0; a < d; ++a)
				for (int b = 0; b < a; ++b)
					h(a, b) = h(b, a);
			*hess = h * (nn * nn);
		}
	}

	double GridPotential::value(const Vec &x) const
	{
		double v;
		eval(x, &v, nullptr, nullptr);
		return v;
	}

	Vec GridPotential::gradient(const Vec &x) const
	{
		Vec g;
		eval(x, nullptr, &g, nullptr);
		return g;
	}

	Mat GridPotential::hessian(const Vec &x) const
	{
		Mat h;
		eval(x, nullptr, nullptr, &h);
		return h;
	}

	// ---------------------------------------------------------------------------

	PotentialPtr make_zero_potential(int dim)
	{
		if (dim < 2 || dim > kMaxDim)
			throw PreconditionError("dimension must lie in [2, " + std::to_string(kMaxDim) + "]");
		return std::make_shared<ZeroPotential>(dim);
	}

	PotentialPtr make_double_well() { return std::make_shared<DoubleWellPotential>(); }

	PotentialPtr make_separable(int dim, std::shared_ptr<const PeriodicFunction1D> component)
	{
		if (dim < 2 || dim > kMaxDim)
			throw PreconditionError("dimension must lie in [2, " + std::to_string(kMaxDim) + "]");
		return std::make_shared<SeparablePotential>(dim, std::move(component));
	}

	namespace
	{
		constexpr char kMagic[8] = {'T', 'O', 'R', 'U', 'S', 'P', 'O', 'T'};

		template <typename T>
		T read_le(std::istream &in)
		{
			unsigned char buf[sizeof(T)];
			if (!in.read(reinterpret_cast<char *>(buf), sizeof(T)))
				throw Error("grid potential file truncated");
			if constexpr (std::endian::native == std::endian::big)
				std::reverse(buf, buf + sizeof(T));
			T v;
			std::memcpy(&v, buf, sizeof(T));
			return v;
		}

		template <typename T>
		void write_le(std::ostream &out, T v)
		{
			unsigned char buf[sizeof(T)];
			std::memcpy(buf, &v, sizeof(T));
			if constexpr (std::endian::native == std::endian::big)
				std::reverse(buf, buf + sizeof(T));
			out.write(reinterpret_cast<const char *>(buf), sizeof(T));
		}
	} // namespace

	PotentialPtr load_grid_potential(const std::filesystem::path &path)
	{
		std::ifstream in(path, std::ios::binary);
		if (!in)
			throw Error("cannot open grid potential file " + path.string());
		char magic[8];
		if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
			throw Error("grid potential file " + path.string() + ": bad magic (expected TORUSPOT)");
		const auto d = read_le<std::uint32_t>(in);
		const auto n = read_le<std::uint32_t>(in);
		if (d < 2 || d > 3 || n < 4 || n > 4096)
			throw Error("grid potential file " + path.string() + ": unsupported header d=" + std::to_string(d) +
						" n=" + std::to_string(n));
		std::size_t total = 1;
		for (std::uint32_t i = 0; i < d; ++i)
			total *= n;
		std::vector<double> values(total);
		for (auto &v : values)
			v = read_le<double>(in);
		return std::make_shared<GridPotential>(static_cast<int>(d), static_cast<int>(n), std::move(values));
	}

	void save_grid_potential(const std::filesystem::path &path, int dim, int n, const std::vector<double> &values)
	{
		std::ofstream out(path, std::ios::binary);
		if (!out)
			throw Error("cannot write " + path.string());
		out.write(kMagic, 8);
		write_le<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
		write_le<std::uint32_t>(out, static_cast<std::uint32_t>(n));
		for (double v : values)
			write_le<double>(out, v);
	}

	std::vector<double> load_table_1d(const std::filesystem::path &path)
	{
		std::ifstream in(path);
		if (!in)
			throw Error("cannot open table " + path.string());
		std::vector<double> values;
		double v;
		while (in >> v)
			values.push_back(v);
		if (!in.eof())
			throw Error("table " + path.string() + ": non-numeric entry after " + std::to_string(values.size()) +
						" values");
		return values;
	}
} // namespace mixdrift
