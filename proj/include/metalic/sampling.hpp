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

/// Collocation, boundary and interface point sets for a PdeProblem.
///
/// Every set is drawn from its own named random stream, so the sets are reproducible from the
/// seed and independent of each other.

#include "metalic/error.hpp"
#include "metalic/mlp.hpp"
#include "metalic/problems.hpp"
#include "metalic/rng.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace metalic {

enum class SamplingScheme { random, grid, poisson_disc };

inline const char* to_string(SamplingScheme s) {
    switch (s) {
    case SamplingScheme::random: return "random";
    case SamplingScheme::grid: return "grid";
    case SamplingScheme::poisson_disc: return "poisson_disc";
    }
    return "unknown";
}

inline SamplingScheme sampling_scheme_from_string(std::string_view name) {
    if (name == "random") return SamplingScheme::random;
    if (name == "grid") return SamplingScheme::grid;
    if (name == "poisson_disc") return SamplingScheme::poisson_disc;
    throw ConfigError("sampling.scheme", "unknown scheme '" + std::string(name) + "'");
}

struct SamplingConfig {
    int n_collocation = 1000;
    int n_boundary = 100;
    /// Interface points per interface; 0 selects the family default (802 for burgers, else 101).
    int n_interface = 0;
    SamplingScheme scheme = SamplingScheme::random;
    std::uint64_t seed = 0;

    int interface_count(Family f) const noexcept {
        return n_interface > 0 ? n_interface : (f == Family::burgers ? 802 : 101);
    }

    void validate() const {
        if (n_collocation <= 0) throw ConfigError("sampling.n_collocation", "must be > 0");
        if (n_boundary <= 0) throw ConfigError("sampling.n_boundary", "must be > 0");
        if (n_interface < 0) throw ConfigError("sampling.n_interface", "must be >= 0");
    }
};

struct InterfacePoints {
    int a = 0;
    int b = 1;
    Points points;
    /// Unit normal at each point, from subdomain a into b.
    Points normals;
};

struct PointSets {
    /// Indexed by subdomain id.
    std::vector<Points> collocation;
    std::vector<Points> boundary;
    std::vector<Eigen::VectorXd> boundary_values;
    std::vector<InterfacePoints> interfaces;
};

namespace detail {

enum : std::uint64_t { kStreamCollocation = 1, kStreamBoundary = 2, kStreamInterface = 3 };

inline Points to_points(const std::vector<Vec2>& v) {
    Points p(static_cast<Eigen::Index>(v.size()), 2);
    for (std::size_t i = 0; i < v.size(); ++i) {
        p(static_cast<Eigen::Index>(i), 0) = v[i][0];
        p(static_cast<Eigen::Index>(i), 1) = v[i][1];
    }
    return p;
}

/// Bridson dart throwing with minimum distance r inside a box.
inline std::vector<Vec2> bridson(const Box& box, double r, std::mt19937_64& rng, int k = 30) {
    const double w = box.hi[0] - box.lo[0], h = box.hi[1] - box.lo[1];
    const double cell = r / std::sqrt(2.0);
    const int gx = std::max(1, static_cast<int>(std::ceil(w / cell)));
    const int gy = std::max(1, static_cast<int>(std::ceil(h / cell)));
    std::vector<int> grid(static_cast<std::size_t>(gx) * gy, -1);
    std::vector<Vec2> pts;
    std::vector<int> active;
    auto cell_of = [&](const Vec2& p) {
        const int cx = std::min(gx - 1, static_cast<int>((p[0] - box.lo[0]) / cell));
        const int cy = std::min(gy - 1, static_cast<int>((p[1] - box.lo[1]) / cell));
        return std::pair{cx, cy};
    };
    auto insert = [&](const Vec2& p) {
        const auto [cx, cy] = cell_of(p);
        grid[static_cast<std::size_t>(cy) * gx + cx] = static_cast<int>(pts.size());
        active.push_back(static_cast<int>(pts.size()));
        pts.push_back(p);
    };
    auto far_enough = [&](const Vec2& p) {
        const auto [cx, cy] = cell_of(p);
        for (int y = std::max(0, cy - 2); y <= std::min(gy - 1, cy + 2); ++y) {
            for (int x = std::max(0, cx - 2); x <= std::min(gx - 1, cx + 2); ++x) {
                const int q = grid[static_cast<std::size_t>(y) * gx + x];
                if (q >= 0 && std::hypot(pts[q][0] - p[0], pts[q][1] - p[1]) < r) return false;
            }
        }
        return true;
    };
    insert({uniform(rng, box.lo[0], box.hi[0]), uniform(rng, box.lo[1], box.hi[1])});
    while (!active.empty()) {
        const std::size_t slot = uniform_index(rng, active.size());
        const Vec2 c = pts[active[slot]];
        bool placed = false;
        for (int t = 0; t < k; ++t) {
            const double rad = r * (1.0 + uniform01(rng));
            const double ang = 6.283185307179586 * uniform01(rng);
            const Vec2 p{c[0] + rad * std::cos(ang), c[1] + rad * std::sin(ang)};
            if (!box.contains(p, 0.0) || !far_enough(p)) continue;
            insert(p);
            placed = true;
            break;
        }
        if (!placed) {
            active[slot] = active.back();
            active.pop_back();
        }
    }
    return pts;
}

/// Poisson-disc set whose size is within 10% of `n`, found by bisection on the radius.
inline std::vector<Vec2> poisson_disc(const Box& box, int n, std::uint64_t seed, int max_attempts = 60) {
    // Maximal Poisson-disc sets have density near 0.7 / r^2.
    double r = std::sqrt(0.7 * box.area() / n);
    double lo = 0.0, hi = 0.0;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        auto rng = make_stream(seed, {static_cast<std::uint64_t>(attempt)});
        std::vector<Vec2> pts = bridson(box, r, rng);
        const double count = static_cast<double>(pts.size());
        if (std::abs(count - n) <= 0.1 * n) return pts;
        if (count > n) {
            lo = r;
            r = hi > 0.0 ? 0.5 * (lo + hi) : 1.25 * r;
        } else {
            hi = r;
            r = lo > 0.0 ? 0.5 * (lo + hi) : 0.8 * r;
        }
    }
    throw NumericalError("poisson_disc: could not reach " + std::to_string(n) + " points within 10% after " +
                         std::to_string(max_attempts) + " attempts");
}

/// Cell-centred nx x ny lattice with nx * ny close to n and cells close to square.
inline std::vector<Vec2> lattice(const Box& box, int n) {
    const double w = box.hi[0] - box.lo[0], h = box.hi[1] - box.lo[1];
    const int nx = std::max(1, static_cast<int>(std::lround(std::sqrt(n * w / h))));
    const int ny = std::max(1, static_cast<int>(std::lround(static_cast<double>(n) / nx)));
    std::vector<Vec2> pts;
    pts.reserve(static_cast<std::size_t>(nx) * ny);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            pts.push_back({box.lo[0] + (i + 0.5) * w / nx, box.lo[1] + (j + 0.5) * h / ny});
        }
    }
    return pts;
}

/// Point at arc length s along a chain of segments.
inline Vec2 along(const std::vector<Segment>& segs, double s) {
    for (const Segment& seg : segs) {
        const double len = seg.length();
        if (s <= len) return seg.at(len > 0.0 ? s / len : 0.0);
        s -= len;
    }
    return segs.back().b;
}

}  // namespace detail

/// Interior points of one subdomain. Multi-box subdomains split the count by area.
inline Points sample_region(const Subdomain& sub, int n, SamplingScheme scheme, std::uint64_t seed) {
    std::vector<Vec2> all;
    const double area = sub.area();
    int remaining = n;
    for (std::size_t b = 0; b < sub.boxes.size(); ++b) {
        const Box& box = sub.boxes[b];
        const int nb = (b + 1 == sub.boxes.size()) ? remaining
                                                   : static_cast<int>(std::lround(n * box.area() / area));
        remaining -= nb;
        if (nb <= 0) continue;
        const std::uint64_t s = stream_seed(seed, {static_cast<std::uint64_t>(b)});
        std::vector<Vec2> pts;
        switch (scheme) {
        case SamplingScheme::random: {
            std::mt19937_64 rng(s);
            for (int i = 0; i < nb; ++i) {
                const double x = uniform(rng, box.lo[0], box.hi[0]);
                const double y = uniform(rng, box.lo[1], box.hi[1]);
                pts.push_back({x, y});
            }
            break;
        }
        case SamplingScheme::grid: pts = detail::lattice(box, nb); break;
        case SamplingScheme::poisson_disc: pts = detail::poisson_disc(box, nb, s); break;
        }
        all.insert(all.end(), pts.begin(), pts.end());
    }
    return detail::to_points(all);
}

/// Points on a chain of segments, uniform in arc length: i.i.d. for the random schemes and
/// equally spaced (cell-centred) for the grid scheme.
inline Points sample_segments(const std::vector<Segment>& segs, int n, SamplingScheme scheme, std::uint64_t seed) {
    double total = 0.0;
    for (const Segment& s : segs) total += s.length();
    std::mt19937_64 rng(seed);
    std::vector<Vec2> pts;
    pts.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double s = scheme == SamplingScheme::grid ? (i + 0.5) * total / n : uniform(rng, 0.0, total);
        pts.push_back(detail::along(segs, s));
    }
    return detail::to_points(pts);
}

inline PointSets sample_points(const PdeProblem& problem, const SamplingConfig& cfg) {
    cfg.validate();
    PointSets out;
    for (const Subdomain& sub : problem.subdomains) {
        const auto id = static_cast<std::uint64_t>(sub.id);
        out.collocation.push_back(sample_region(sub, cfg.n_collocation, cfg.scheme,
                                                stream_seed(cfg.seed, {detail::kStreamCollocation, id})));
        Points bnd = sample_segments(sub.boundary, cfg.n_boundary, cfg.scheme,
                                     stream_seed(cfg.seed, {detail::kStreamBoundary, id}));
        Eigen::VectorXd vals(bnd.rows());
        for (Eigen::Index i = 0; i < bnd.rows(); ++i) vals[i] = problem.boundary_value(bnd(i, 0), bnd(i, 1));
        out.boundary.push_back(std::move(bnd));
        out.boundary_values.push_back(std::move(vals));
    }
    const int n_if = cfg.interface_count(problem.family);
    for (std::size_t k = 0; k < problem.interfaces.size(); ++k) {
        const Interface& itf = problem.interfaces[k];
        InterfacePoints ip{itf.a, itf.b, Points(n_if, 2), Points(n_if, 2)};
        double total = 0.0;
        for (const auto& s : itf.segments) total += s.segment.length();
        Eigen::Index row = 0;
        int remaining = n_if;
        for (std::size_t j = 0; j < itf.segments.size(); ++j) {
            const InterfaceSegment& seg = itf.segments[j];
            const int m = (j + 1 == itf.segments.size())
                              ? remaining
                              : static_cast<int>(std::lround(n_if * seg.segment.length() / total));
            remaining -= m;
            std::mt19937_64 rng(stream_seed(cfg.seed, {detail::kStreamInterface, k, j}));
            for (int i = 0; i < m; ++i, ++row) {
                // The grid scheme spaces points evenly including both ends of the segment.
                const double s = cfg.scheme == SamplingScheme::grid ? (m > 1 ? static_cast<double>(i) / (m - 1) : 0.5)
                                                                    : uniform01(rng);
                const Vec2 p = seg.segment.at(s);
                ip.points(row, 0) = p[0];
                ip.points(row, 1) = p[1];
                ip.normals(row, 0) = seg.normal[0];
                ip.normals(row, 1) = seg.normal[1];
            }
        }
        out.interfaces.push_back(std::move(ip));
    }
    return out;
}

}  // namespace metalic
