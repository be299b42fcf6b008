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

/// Parametric PDE families on two-subdomain decompositions.
///
/// Variables are (z1, z2) = (x, y) for Poisson and (x, t) for the space-time families.
///
///   poisson    u_xx + u_yy = f~(x, y; s)    on [0,1]^2, u = 0 on the boundary, split at y = 1/2
///   advection  u_t + beta u_x = 0           on [0,2pi] x [0,1], u = sin(x - beta t), split at t = 1/2
///   reaction   u_t - rho u (1 - u) = 0      on [0,2pi] x [0,1], logistic closed form, split at t = 1/2
///   burgers    u_t + u u_x = nu u_xx        on [-1,1] x [0,1], u(x,0) = -sin(pi x), u(+-1,t) = 0,
///                                           middle band |x| <= 0.1 versus the two outer strips
///
/// Boundary data of the space-time families is imposed on t = 0 and on both spatial ends; the
/// final time t = 1 is not part of the Dirichlet boundary.

#include "metalic/error.hpp"
#include "metalic/linearized.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace metalic {

enum class Family { poisson, advection, reaction, burgers };

inline const char* to_string(Family f) {
    switch (f) {
    case Family::poisson: return "poisson";
    case Family::advection: return "advection";
    case Family::reaction: return "reaction";
    case Family::burgers: return "burgers";
    }
    return "unknown";
}

inline Family family_from_string(std::string_view name) {
    if (name == "poisson") return Family::poisson;
    if (name == "advection") return Family::advection;
    if (name == "reaction") return Family::reaction;
    if (name == "burgers") return Family::burgers;
    throw ConfigError("family", "unknown family '" + std::string(name) +
                                    "' (expected poisson, advection, reaction or burgers)");
}

struct ParamRange {
    double lo = 0.0;
    double hi = 1.0;

    bool contains(double v) const noexcept { return v >= lo && v <= hi; }
    /// Affine map of [lo, hi] onto [0, 1]; a degenerate range maps to 0.
    double normalize(double v) const noexcept { return hi > lo ? (v - lo) / (hi - lo) : 0.0; }
};

/// s in [0, 50], beta in [1, 40], rho in [1, 10], nu in [0.001, 0.05].
inline ParamRange default_param_range(Family f) {
    switch (f) {
    case Family::poisson: return {0.0, 50.0};
    case Family::advection: return {1.0, 40.0};
    case Family::reaction: return {1.0, 10.0};
    case Family::burgers: return {0.001, 0.05};
    }
    return {};
}

using Vec2 = std::array<double, 2>;

struct Box {
    Vec2 lo{0.0, 0.0};
    Vec2 hi{1.0, 1.0};

    bool contains(const Vec2& p, double tol = 1e-12) const noexcept {
        return p[0] >= lo[0] - tol && p[0] <= hi[0] + tol && p[1] >= lo[1] - tol && p[1] <= hi[1] + tol;
    }
    double area() const noexcept { return (hi[0] - lo[0]) * (hi[1] - lo[1]); }
};

struct Segment {
    Vec2 a;
    Vec2 b;

    double length() const noexcept { return std::hypot(b[0] - a[0], b[1] - a[1]); }
    Vec2 at(double s) const noexcept { return {a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])}; }
};

struct Subdomain {
    int id = 0;
    /// Closed region: the union of these boxes.
    std::vector<Box> boxes;
    /// This subdomain's portion of the Dirichlet boundary.
    std::vector<Segment> boundary;
    std::vector<int> neighbors;

    bool contains(const Vec2& p, double tol = 1e-12) const noexcept {
        for (const Box& b : boxes) {
            if (b.contains(p, tol)) return true;
        }
        return false;
    }
    double area() const noexcept {
        double a = 0.0;
        for (const Box& b : boxes) a += b.area();
        return a;
    }
};

/// One straight piece of the interface between subdomains `a` < `b`, with the unit normal
/// pointing from a into b.
struct InterfaceSegment {
    Segment segment;
    Vec2 normal;
};

struct Interface {
    int a = 0;
    int b = 1;
    std::vector<InterfaceSegment> segments;
};

/// The source term of the Poisson family: f(x,y;s) = F(x)F(y) with
/// F(x) = erf((x - 1/4)s) - erf((x - 3/4)s), divided by its maximum over the 201 x 201 lattice
/// on [0,1]^2. A maximum below 1e-12 makes the source identically zero.
class PoissonSource {
public:
    explicit PoissonSource(double s) : s_(s) {
        double peak = 0.0;
        for (int i = 0; i <= 200; ++i) peak = std::max(peak, std::abs(factor(i / 200.0)));
        // F >= 0 for s >= 0, so the lattice maximum of F(x)F(y) is the square of max F.
        const double m = peak * peak;
        scale_ = m < 1e-12 ? 0.0 : 1.0 / m;
    }

    double sharpness() const noexcept { return s_; }
    double operator()(double x, double y) const { return scale_ * factor(x) * factor(y); }
    Vec2 gradient(double x, double y) const {
        return {scale_ * dfactor(x) * factor(y), scale_ * factor(x) * dfactor(y)};
    }

private:
    double factor(double x) const { return std::erf((x - 0.25) * s_) - std::erf((x - 0.75) * s_); }
    double dfactor(double x) const {
        const double a = (x - 0.25) * s_, b = (x - 0.75) * s_;
        return s_ * std::numbers::inv_sqrtpi * 2.0 * (std::exp(-a * a) - std::exp(-b * b));
    }

    double s_;
    double scale_ = 0.0;
};

/// f~(x, y; s) on [0,1]^2.
inline double poisson_source(double x, double y, double s) { return PoissonSource(s)(x, y); }

inline double advection_exact(double x, double t, double beta) { return std::sin(x - beta * t); }

inline double reaction_initial(double x) {
    constexpr double w = std::numbers::pi / 4.0;
    return std::exp(-(x - std::numbers::pi) * (x - std::numbers::pi) / (2.0 * w * w));
}

inline double reaction_exact(double x, double t, double rho) {
    const double u0 = reaction_initial(x);
    const double e = std::exp(rho * t);
    return u0 * e / (u0 * e + 1.0 - u0);
}

/// Which right-hand side the Poisson family uses.
enum class PoissonVariant {
    /// The parametric erf source f~(x, y; s).
    parametric,
    /// The constant source f = 1 (parameter ignored).
    unit,
};

class PdeProblem {
public:
    Family family = Family::poisson;
    double param = 0.0;
    PoissonVariant poisson_variant = PoissonVariant::parametric;
    Box domain;
    std::vector<Subdomain> subdomains;
    std::vector<Interface> interfaces;

    /// Highest total derivative order in the residual.
    int residual_order() const noexcept {
        return (family == Family::poisson || family == Family::burgers) ? 2 : 1;
    }

    bool has_closed_form() const noexcept { return family == Family::advection || family == Family::reaction; }

    double exact(double z1, double z2) const {
        switch (family) {
        case Family::advection: return advection_exact(z1, z2, param);
        case Family::reaction: return reaction_exact(z1, z2, param);
        default: throw std::logic_error(std::string("no closed form for ") + to_string(family));
        }
    }

    /// Dirichlet data on the boundary segments.
    double boundary_value(double z1, double z2) const {
        switch (family) {
        case Family::poisson: return 0.0;
        case Family::advection:
        case Family::reaction: return exact(z1, z2);
        case Family::burgers: return z2 <= 0.0 ? -std::sin(std::numbers::pi * z1) : 0.0;
        }
        return 0.0;
    }

    /// Right-hand side f of the Poisson family (zero for the homogeneous families).
    double source(double x, double y) const {
        if (family != Family::poisson) return 0.0;
        return poisson_variant == PoissonVariant::unit ? 1.0 : source_(x, y);
    }
    Vec2 source_gradient(double x, double y) const {
        if (family != Family::poisson || poisson_variant == PoissonVariant::unit) return {0.0, 0.0};
        return source_.gradient(x, y);
    }

    const char* variable_name(int axis) const noexcept {
        return axis == 0 ? "x" : (family == Family::poisson ? "y" : "t");
    }

    /// Index of the subdomain owning p when it is interior to exactly one; -1 otherwise.
    int owner(const Vec2& p) const noexcept {
        int found = -1;
        for (const Subdomain& s : subdomains) {
            if (s.contains(p)) {
                if (found >= 0) return -1;
                found = s.id;
            }
        }
        return found;
    }

private:
    friend PdeProblem make_problem(Family, double, PoissonVariant, std::optional<ParamRange>);
    PoissonSource source_{0.0};
};

/// Build one family instance. `range` defaults to default_param_range(family) and bounds `param`.
inline PdeProblem make_problem(Family family, double param,
                               PoissonVariant variant = PoissonVariant::parametric,
                               std::optional<ParamRange> range = std::nullopt) {
    const ParamRange r = range.value_or(default_param_range(family));
    if (!std::isfinite(param) || !r.contains(param)) {
        throw ConfigError("problem.param", "value " + std::to_string(param) + " outside [" + std::to_string(r.lo) +
                                               ", " + std::to_string(r.hi) + "] for " + to_string(family));
    }
    if (family == Family::burgers && !(param > 0.0)) throw ConfigError("problem.param", "viscosity must be > 0");

    PdeProblem p;
    p.family = family;
    p.param = param;
    p.poisson_variant = variant;
    if (family == Family::poisson && variant == PoissonVariant::parametric) p.source_ = PoissonSource(param);

    const double pi = std::numbers::pi;
    switch (family) {
    case Family::poisson: {
        p.domain = {{0.0, 0.0}, {1.0, 1.0}};
        Subdomain lower{0, {{{0.0, 0.0}, {1.0, 0.5}}}, {}, {1}};
        lower.boundary = {{{0.0, 0.0}, {1.0, 0.0}}, {{0.0, 0.0}, {0.0, 0.5}}, {{1.0, 0.0}, {1.0, 0.5}}};
        Subdomain upper{1, {{{0.0, 0.5}, {1.0, 1.0}}}, {}, {0}};
        upper.boundary = {{{0.0, 1.0}, {1.0, 1.0}}, {{0.0, 0.5}, {0.0, 1.0}}, {{1.0, 0.5}, {1.0, 1.0}}};
        p.subdomains = {lower, upper};
        p.interfaces = {{0, 1, {{{{0.0, 0.5}, {1.0, 0.5}}, {0.0, 1.0}}}}};
        break;
    }
    case Family::advection:
    case Family::reaction: {
        const double L = 2.0 * pi;
        p.domain = {{0.0, 0.0}, {L, 1.0}};
        Subdomain early{0, {{{0.0, 0.0}, {L, 0.5}}}, {}, {1}};
        early.boundary = {{{0.0, 0.0}, {L, 0.0}}, {{0.0, 0.0}, {0.0, 0.5}}, {{L, 0.0}, {L, 0.5}}};
        Subdomain late{1, {{{0.0, 0.5}, {L, 1.0}}}, {}, {0}};
        late.boundary = {{{0.0, 0.5}, {0.0, 1.0}}, {{L, 0.5}, {L, 1.0}}};
        p.subdomains = {early, late};
        p.interfaces = {{0, 1, {{{{0.0, 0.5}, {L, 0.5}}, {0.0, 1.0}}}}};
        break;
    }
    case Family::burgers: {
        p.domain = {{-1.0, 0.0}, {1.0, 1.0}};
        Subdomain band{0, {{{-0.1, 0.0}, {0.1, 1.0}}}, {}, {1}};
        band.boundary = {{{-0.1, 0.0}, {0.1, 0.0}}};
        Subdomain outer{1, {{{-1.0, 0.0}, {-0.1, 1.0}}, {{0.1, 0.0}, {1.0, 1.0}}}, {}, {0}};
        outer.boundary = {{{-1.0, 0.0}, {-0.1, 0.0}}, {{0.1, 0.0}, {1.0, 0.0}},
                          {{-1.0, 0.0}, {-1.0, 1.0}}, {{1.0, 0.0}, {1.0, 1.0}}};
        p.subdomains = {band, outer};
        p.interfaces = {{0, 1, {{{{-0.1, 0.0}, {-0.1, 1.0}}, {-1.0, 0.0}}, {{{0.1, 0.0}, {0.1, 1.0}}, {1.0, 0.0}}}}};
        break;
    }
    }
    return p;
}

/// The Poisson problem u_xx + u_yy = 1 with zero boundary data.
inline PdeProblem make_unit_poisson() { return make_problem(Family::poisson, 0.0, PoissonVariant::unit); }

// ---------------------------------------------------------------------------------------------
// Operators on the jet of one point. All return linearized values so that the caller can pull
// losses back to the jet coefficients.

/// PDE residual F[u] - f at `z`.
inline Lin residual(const PdeProblem& p, const JetRow& u, const Vec2& z) {
    switch (p.family) {
    case Family::poisson: return u.partial(2, 0) + u.partial(0, 2) - p.source(z[0], z[1]);
    case Family::advection: return u.partial(0, 1) + p.param * u.partial(1, 0);
    case Family::reaction: {
        const Lin v = u.partial(0, 0);
        return u.partial(0, 1) - p.param * (v - v * v);
    }
    case Family::burgers:
        return u.partial(0, 1) + u.partial(0, 0) * u.partial(1, 0) - p.param * u.partial(2, 0);
    }
    return {};
}

/// (d/dz1, d/dz2) of the residual; needs derivatives one order above residual_order().
inline std::array<Lin, 2> residual_gradient(const PdeProblem& p, const JetRow& u, const Vec2& z) {
    switch (p.family) {
    case Family::poisson: {
        const Vec2 g = p.source_gradient(z[0], z[1]);
        return {u.partial(3, 0) + u.partial(1, 2) - g[0], u.partial(2, 1) + u.partial(0, 3) - g[1]};
    }
    case Family::advection: {
        const double b = p.param;
        return {u.partial(1, 1) + b * u.partial(2, 0), u.partial(0, 2) + b * u.partial(1, 1)};
    }
    case Family::reaction: {
        const double rho = p.param;
        const Lin v = u.partial(0, 0), vx = u.partial(1, 0), vt = u.partial(0, 1);
        const Lin k = 2.0 * rho * v - rho;
        return {u.partial(1, 1) + k * vx, u.partial(0, 2) + k * vt};
    }
    case Family::burgers: {
        const double nu = p.param;
        const Lin v = u.partial(0, 0), vx = u.partial(1, 0), vt = u.partial(0, 1);
        return {u.partial(1, 1) + vx * vx + v * u.partial(2, 0) - nu * u.partial(3, 0),
                u.partial(0, 2) + vt * vx + v * u.partial(1, 1) - nu * u.partial(2, 1)};
    }
    }
    return {};
}

/// Conserved flux through the unit normal `n`.
///
///   poisson    grad u . n
///   advection  (beta u, u) . n
///   reaction   (0, u) . n
///   burgers    (u^2/2 - nu u_x, u) . n
inline Lin flux_normal(const PdeProblem& p, const JetRow& u, const Vec2& n) {
    switch (p.family) {
    case Family::poisson: return n[0] * u.partial(1, 0) + n[1] * u.partial(0, 1);
    case Family::advection: {
        const Lin v = u.partial(0, 0);
        return (n[0] * p.param + n[1]) * v;
    }
    case Family::reaction: return n[1] * u.partial(0, 0);
    case Family::burgers: {
        const Lin v = u.partial(0, 0);
        return n[0] * (0.5 * (v * v) - p.param * u.partial(1, 0)) + n[1] * v;
    }
    }
    return {};
}

}  // namespace metalic
