// Copyright 2026 The metalic Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

/// Reference solutions on uniform grids: a five-point finite-difference Poisson solver, the
/// Cole-Hopf representation of viscous Burgers evaluated by Gauss-Hermite quadrature, and the
/// closed forms of the advection and reaction families. Grids can be cached on disk.

#include "metalic/csv.hpp"
#include "metalic/error.hpp"
#include "metalic/problems.hpp"

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace metalic {

/// Solution samples on the tensor grid z1 x z2. values(j, i) is the value at (z1[i], z2[j]).
struct GroundTruthGrid {
    Family family = Family::poisson;
    double param = 0.0;
    PoissonVariant variant = PoissonVariant::parametric;
    std::vector<double> z1;
    std::vector<double> z2;
    Eigen::MatrixXd values;

    Eigen::Index nx() const noexcept { return static_cast<Eigen::Index>(z1.size()); }
    Eigen::Index ny() const noexcept { return static_cast<Eigen::Index>(z2.size()); }
};

inline std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
    return v;
}

// ---------------------------------------------------------------------------------------------
// Poisson

struct PoissonSolveStats {
    int iterations = 0;
    double relative_residual = 0.0;
};

/// Solve u_xx + u_yy = f on the (n x n)-node uniform grid of [0,1]^2 with u = g on the boundary.
/// Conjugate gradients on the negated five-point Laplacian, run to relative residual `tol`.
/// Returns the full nodal grid, rows indexed by y.
inline Eigen::MatrixXd poisson_fd_solve(const std::function<double(double, double)>& f, int n,
                                        const std::function<double(double, double)>& g, double tol = 1e-10,
                                        int max_iterations = 0, PoissonSolveStats* stats = nullptr) {
    if (n < 17) throw ConfigError("ground_truth.grid_n", "Poisson grid needs at least 17 nodes per side");
    const double h = 1.0 / (n - 1);
    const int m = n - 2;
    if (max_iterations <= 0) max_iterations = 20 * n * n;
    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        const double s = i * h;
        u(0, i) = g(s, 0.0);
        u(n - 1, i) = g(s, 1.0);
        u(i, 0) = g(0.0, s);
        u(i, n - 1) = g(1.0, s);
    }
    // Interior system A v = b with A = -Laplacian_h * h^2 (SPD) and the boundary moved into b.
    Eigen::MatrixXd b(m, m);
    for (int j = 0; j < m; ++j) {
        for (int i = 0; i < m; ++i) {
            double rhs = -h * h * f((i + 1) * h, (j + 1) * h);
            if (i == 0) rhs += u(j + 1, 0);
            if (i == m - 1) rhs += u(j + 1, n - 1);
            if (j == 0) rhs += u(0, i + 1);
            if (j == m - 1) rhs += u(n - 1, i + 1);
            b(j, i) = rhs;
        }
    }
    auto apply = [m](const Eigen::MatrixXd& v, Eigen::MatrixXd& out) {
        for (int j = 0; j < m; ++j) {
            for (int i = 0; i < m; ++i) {
                double acc = 4.0 * v(j, i);
                if (i > 0) acc -= v(j, i - 1);
                if (i + 1 < m) acc -= v(j, i + 1);
                if (j > 0) acc -= v(j - 1, i);
                if (j + 1 < m) acc -= v(j + 1, i);
                out(j, i) = acc;
            }
        }
    };
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(m, m), r = b, p = b, ap(m, m);
    const double bnorm = b.norm();
    PoissonSolveStats st;
    if (bnorm > 0.0) {
        double rr = r.squaredNorm();
        for (st.iterations = 0; st.iterations < max_iterations; ++st.iterations) {
            if (std::sqrt(rr) <= tol * bnorm) break;
            apply(p, ap);
            const double alpha = rr / p.cwiseProduct(ap).sum();
            v += alpha * p;
            r -= alpha * ap;
            const double rr_new = r.squaredNorm();
            p = r + (rr_new / rr) * p;
            rr = rr_new;
        }
        st.relative_residual = std::sqrt(rr) / bnorm;
        if (st.relative_residual > tol) {
            throw NumericalError("poisson_fd_solve: CG did not reach relative residual " + std::to_string(tol) +
                                 " within " + std::to_string(max_iterations) + " iterations");
        }
    }
    u.block(1, 1, m, m) = v;
    if (stats) *stats = st;
    return u;
}

/// Reference grid of a Poisson instance: solved on a grid refined by `refine`, then sampled at
/// the n x n nodes.
inline GroundTruthGrid poisson_ground_truth(const PdeProblem& p, int n = 101, int refine = 2) {
    const int fine = (n - 1) * refine + 1;
    const Eigen::MatrixXd u = poisson_fd_solve([&](double x, double y) { return p.source(x, y); }, fine,
                                               [&](double x, double y) { return p.boundary_value(x, y); });
    GroundTruthGrid g{p.family, p.param, p.poisson_variant, linspace(0.0, 1.0, n), linspace(0.0, 1.0, n), {}};
    g.values.resize(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) g.values(j, i) = u(j * refine, i * refine);
    return g;
}

/// Parametric Poisson instance with sharpness s solved directly on a grid_n x grid_n grid.
inline GroundTruthGrid poisson_fd_solve(double s, int grid_n) {
    return poisson_ground_truth(make_problem(Family::poisson, s), grid_n, 1);
}

// ---------------------------------------------------------------------------------------------
// Burgers

/// Gauss-Hermite rule for weight exp(-z^2). Nodes start from the eigenvalues of the Jacobi
/// matrix and are polished by Newton iteration on the orthonormal three-term recurrence, which
/// also yields relatively accurate weights. Nodes ascend; weights are stored as logarithms so
/// that large rules do not underflow.
struct GaussHermite {
    std::vector<double> nodes;
    std::vector<double> log_weights;
};

inline GaussHermite gauss_hermite(int n) {
    if (n < 1) throw std::invalid_argument("gauss_hermite: need n >= 1");
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n), sub(std::max(n - 1, 0));
    for (int k = 1; k < n; ++k) sub[k - 1] = std::sqrt(0.5 * k);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> jacobi;
    jacobi.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
    const double pim4 = 1.0 / std::pow(std::numbers::pi, 0.25);
    GaussHermite gh;
    gh.nodes.resize(n);
    gh.log_weights.resize(n);
    for (int i = 0; i < n; ++i) {
        double z = jacobi.eigenvalues()[i];
        double pp = 1.0;
        for (int it = 0; it < 20; ++it) {
            double p1 = pim4, p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
            }
            pp = std::sqrt(2.0 * n) * p2;
            const double dz = p1 / pp;
            z -= dz;
            if (std::abs(dz) <= 1e-15 * std::max(1.0, std::abs(z))) break;
        }
        gh.nodes[i] = z;
        gh.log_weights[i] = std::log(2.0) - 2.0 * std::log(std::abs(pp));
    }
    return gh;
}

/// u(x, t) of u_t + u u_x = nu u_xx, u(x, 0) = -sin(pi x), from the Cole-Hopf quotient
///
///   u = - int sin(pi (x - e)) F(x - e) exp(-e^2 / (4 nu t)) de / int F(x - e) exp(-e^2 / (4 nu t)) de,
///   F(y) = exp(-cos(pi y) / (2 pi nu)),
///
/// with e = sqrt(4 nu t) z and the exponents shifted by their maximum before exponentiation.
inline double burgers_cole_hopf(double x, double t, double nu, const GaussHermite& gh) {
    if (t <= 0.0) return -std::sin(std::numbers::pi * x);
    const double a = std::sqrt(4.0 * nu * t);
    const double k = 1.0 / (2.0 * std::numbers::pi * nu);
    const std::size_t n = gh.nodes.size();
    double emax = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const double y = x - a * gh.nodes[i];
        emax = std::max(emax, gh.log_weights[i] - k * std::cos(std::numbers::pi * y));
    }
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double y = x - a * gh.nodes[i];
        const double w = std::exp(gh.log_weights[i] - k * std::cos(std::numbers::pi * y) - emax);
        num += w * std::sin(std::numbers::pi * y);
        den += w;
    }
    const double u = -num / den;
    if (!std::isfinite(u) || !(den > 0.0)) {
        throw NumericalError("burgers_cole_hopf: quadrature overflow at x=" + std::to_string(x) +
                             ", t=" + std::to_string(t) + ", nu=" + std::to_string(nu));
    }
    return u;
}

inline double burgers_cole_hopf(double x, double t, double nu, int nodes = 256) {
    return burgers_cole_hopf(x, t, nu, gauss_hermite(nodes));
}

// ---------------------------------------------------------------------------------------------
// Grids for every family

struct GroundTruthOptions {
    /// Poisson nodes per side.
    int poisson_n = 101;
    int poisson_refine = 2;
    /// Space-time grid: nx spatial by nt temporal nodes.
    int nx = 256;
    int nt = 101;
    int hermite_nodes = 256;
};

inline GroundTruthGrid ground_truth(const PdeProblem& p, const GroundTruthOptions& opt = {}) {
    if (p.family == Family::poisson) return poisson_ground_truth(p, opt.poisson_n, opt.poisson_refine);
    GroundTruthGrid g{p.family, p.param, p.poisson_variant, linspace(p.domain.lo[0], p.domain.hi[0], opt.nx),
                      linspace(p.domain.lo[1], p.domain.hi[1], opt.nt), {}};
    g.values.resize(opt.nt, opt.nx);
    if (p.family == Family::burgers) {
        const GaussHermite gh = gauss_hermite(opt.hermite_nodes);
        for (int j = 0; j < opt.nt; ++j)
            for (int i = 0; i < opt.nx; ++i) g.values(j, i) = burgers_cole_hopf(g.z1[i], g.z2[j], p.param, gh);
    } else {
        for (int j = 0; j < opt.nt; ++j)
            for (int i = 0; i < opt.nx; ++i) g.values(j, i) = p.exact(g.z1[i], g.z2[j]);
    }
    return g;
}

// ---------------------------------------------------------------------------------------------
// Cache: 8-byte magic "MTLCGTR1", u32 version, u32 family, u32 variant, f64 param, u32 nx,
// u32 ny, then nx + ny coordinates and nx * ny values (row-major by z2), all little-endian.

constexpr std::uint32_t kGroundTruthVersion = 1;

namespace detail {

template <typename T>
void gt_write(std::ostream& os, T v) {
    static_assert(std::endian::native == std::endian::little, "cache format is little-endian");
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T gt_read(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw SchemaError("ground-truth cache: truncated file");
    return v;
}

}  // namespace detail

inline void save_ground_truth(const GroundTruthGrid& g, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    os.write("MTLCGTR1", 8);
    detail::gt_write<std::uint32_t>(os, kGroundTruthVersion);
    detail::gt_write<std::uint32_t>(os, static_cast<std::uint32_t>(g.family));
    detail::gt_write<std::uint32_t>(os, static_cast<std::uint32_t>(g.variant));
    detail::gt_write<double>(os, g.param);
    detail::gt_write<std::uint32_t>(os, static_cast<std::uint32_t>(g.nx()));
    detail::gt_write<std::uint32_t>(os, static_cast<std::uint32_t>(g.ny()));
    for (double v : g.z1) detail::gt_write(os, v);
    for (double v : g.z2) detail::gt_write(os, v);
    for (Eigen::Index j = 0; j < g.ny(); ++j)
        for (Eigen::Index i = 0; i < g.nx(); ++i) detail::gt_write<double>(os, g.values(j, i));
}

inline GroundTruthGrid load_ground_truth(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw SchemaError(path + ": cannot open");
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, "MTLCGTR1", 8) != 0) throw SchemaError(path + ": not a ground-truth cache");
    if (detail::gt_read<std::uint32_t>(is) != kGroundTruthVersion) throw SchemaError(path + ": version mismatch");
    GroundTruthGrid g;
    g.family = static_cast<Family>(detail::gt_read<std::uint32_t>(is));
    g.variant = static_cast<PoissonVariant>(detail::gt_read<std::uint32_t>(is));
    g.param = detail::gt_read<double>(is);
    const auto nx = detail::gt_read<std::uint32_t>(is), ny = detail::gt_read<std::uint32_t>(is);
    g.z1.resize(nx);
    g.z2.resize(ny);
    for (auto& v : g.z1) v = detail::gt_read<double>(is);
    for (auto& v : g.z2) v = detail::gt_read<double>(is);
    g.values.resize(ny, nx);
    for (std::uint32_t j = 0; j < ny; ++j)
        for (std::uint32_t i = 0; i < nx; ++i) g.values(j, i) = detail::gt_read<double>(is);
    return g;
}

/// File name that identifies a grid by everything it depends on.
inline std::string ground_truth_key(const PdeProblem& p, const GroundTruthOptions& opt) {
    std::ostringstream os;
    os << "gt-" << to_string(p.family);
    if (p.family == Family::poisson) {
        os << (p.poisson_variant == PoissonVariant::unit ? "-unit" : "") << "-n" << opt.poisson_n << "r"
           << opt.poisson_refine;
    } else {
        os << "-" << opt.nx << "x" << opt.nt;
        if (p.family == Family::burgers) os << "-gh" << opt.hermite_nodes;
    }
    os << "-p" << std::hex << std::bit_cast<std::uint64_t>(p.param) << "-v" << kGroundTruthVersion << ".bin";
    return os.str();
}

/// ground_truth() backed by a cache directory; an empty directory disables caching.
inline GroundTruthGrid cached_ground_truth(const PdeProblem& p, const std::string& cache_dir,
                                           const GroundTruthOptions& opt = {}) {
    if (cache_dir.empty()) return ground_truth(p, opt);
    const std::filesystem::path path = std::filesystem::path(cache_dir) / ground_truth_key(p, opt);
    if (std::filesystem::exists(path)) return load_ground_truth(path.string());
    GroundTruthGrid g = ground_truth(p, opt);
    std::filesystem::create_directories(cache_dir);
    // Write then rename so a concurrent reader never sees a partial file; the temporary name is
    // per thread so concurrent writers of one key do not interleave.
    const std::filesystem::path tmp =
        path.string() + "." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) + ".tmp";
    save_ground_truth(g, tmp.string());
    std::filesystem::rename(tmp, path);
    return g;
}

inline void write_grid_csv(const GroundTruthGrid& g, std::ostream& os, const char* value_name = "u") {
    CsvWriter w(os, {"z1", "z2", value_name});
    for (Eigen::Index j = 0; j < g.ny(); ++j) {
        for (Eigen::Index i = 0; i < g.nx(); ++i) {
            w << g.z1[i] << g.z2[j] << g.values(j, i);
            w.end_row();
        }
    }
}

}  // namespace metalic
