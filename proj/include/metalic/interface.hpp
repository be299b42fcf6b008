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

/// Interface conditions between neighbouring subdomain networks and the 9-bit action encoding.
///
/// Each family has a catalog of nine distinct conditions. Slots 0..4 are shared:
///
///   0 I_u     (u_k - u_k')^2
///   1 I_uavg  (u_k - (u_k + u_k')/2)^2
///   2 I_r     r_k^2 + r_k'^2
///   3 I_rc    (r_k - r_k')^2
///   4 I_gr    |grad r_k|^2 + |grad r_k'|^2
///
/// Slots 5..8 differ where a candidate would duplicate another entry:
///
///   poisson            I_c  I_x  I_xx I_yy    (I_y is the normal flux, i.e. I_c)
///   burgers            I_c  I_x  I_xx I_tt    (I_t dropped to keep nine entries)
///   advection/reaction I_x  I_t  I_xx I_tt    (I_c is u on a time-normal interface, i.e. I_u)
///
/// Every term is the mean over the interface points. An action is a mask over the catalog and
/// its index is sum_i 2^i mask[i].

#include "metalic/error.hpp"
#include "metalic/linearized.hpp"
#include "metalic/mlp.hpp"
#include "metalic/problems.hpp"
#include "metalic/sampling.hpp"

#include <array>
#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>

namespace metalic {

constexpr int kNumConditions = 9;
constexpr int kNumActions = 1 << kNumConditions;

enum class ConditionKind { u, uavg, r, rc, gr, c, d1, d2 };

struct ConditionDescriptor {
    ConditionKind kind = ConditionKind::u;
    /// Differentiation axis of d1 and d2; unused otherwise.
    int axis = 0;
    const char* name = "";

    friend bool operator==(const ConditionDescriptor& a, const ConditionDescriptor& b) {
        return a.kind == b.kind && a.axis == b.axis;
    }
};

using Catalog = std::array<ConditionDescriptor, kNumConditions>;

inline Catalog catalog(Family f) {
    using K = ConditionKind;
    constexpr ConditionDescriptor u{K::u, 0, "I_u"}, uavg{K::uavg, 0, "I_uavg"}, r{K::r, 0, "I_r"},
        rc{K::rc, 0, "I_rc"}, gr{K::gr, 0, "I_gr"}, c{K::c, 0, "I_c"};
    switch (f) {
    case Family::poisson: return {u, uavg, r, rc, gr, c, {K::d1, 0, "I_x"}, {K::d2, 0, "I_xx"}, {K::d2, 1, "I_yy"}};
    case Family::burgers: return {u, uavg, r, rc, gr, c, {K::d1, 0, "I_x"}, {K::d2, 0, "I_xx"}, {K::d2, 1, "I_tt"}};
    case Family::advection:
    case Family::reaction:
        return {u, uavg, r, rc, gr, {K::d1, 0, "I_x"}, {K::d1, 1, "I_t"}, {K::d2, 0, "I_xx"}, {K::d2, 1, "I_tt"}};
    }
    return {};
}

/// Jet degree the condition needs at the interface points.
inline int required_degree(const ConditionDescriptor& d, const PdeProblem& p) {
    switch (d.kind) {
    case ConditionKind::u:
    case ConditionKind::uavg: return 0;
    case ConditionKind::r:
    case ConditionKind::rc: return p.residual_order();
    case ConditionKind::gr: return p.residual_order() + 1;
    case ConditionKind::c: return (p.family == Family::poisson || p.family == Family::burgers) ? 1 : 0;
    case ConditionKind::d1: return 1;
    case ConditionKind::d2: return 2;
    }
    return kMaxJetDegree;
}

struct Action {
    std::array<bool, kNumConditions> mask{};

    friend bool operator==(const Action&, const Action&) = default;

    int count() const noexcept {
        int n = 0;
        for (bool b : mask) n += b;
        return n;
    }
};

inline int action_index(const Action& a) noexcept {
    int idx = 0;
    for (int i = 0; i < kNumConditions; ++i) idx |= static_cast<int>(a.mask[i]) << i;
    return idx;
}

inline Action action_from_index(int index) {
    if (index < 0 || index >= kNumActions) {
        throw std::out_of_range("action index " + std::to_string(index) + " outside [0, 511]");
    }
    Action a;
    for (int i = 0; i < kNumConditions; ++i) a.mask[i] = (index >> i) & 1;
    return a;
}

/// Mask text with slot 0 first, e.g. "010001001".
inline std::string action_mask_string(const Action& a) {
    std::string s(kNumConditions, '0');
    for (int i = 0; i < kNumConditions; ++i) s[i] = a.mask[i] ? '1' : '0';
    return s;
}

/// Parse either a decimal index in [0, 511] or a nine-character 0/1 mask (slot 0 first).
inline Action parse_action(std::string_view text) {
    if (text.size() == kNumConditions && text.find_first_not_of("01") == std::string_view::npos) {
        Action a;
        for (int i = 0; i < kNumConditions; ++i) a.mask[i] = text[i] == '1';
        return a;
    }
    int idx = -1;
    const auto r = std::from_chars(text.data(), text.data() + text.size(), idx);
    if (r.ec != std::errc{} || r.ptr != text.data() + text.size() || idx < 0 || idx >= kNumActions) {
        throw ConfigError("action", "expected an index in [0, 511] or a 9-digit 0/1 mask, got '" +
                                        std::string(text) + "'");
    }
    return action_from_index(idx);
}

/// Names of the selected conditions joined by '+', or "none".
inline std::string action_names(const Action& a, const Catalog& cat) {
    std::string s;
    for (int i = 0; i < kNumConditions; ++i) {
        if (!a.mask[i]) continue;
        if (!s.empty()) s += '+';
        s += cat[i].name;
    }
    return s.empty() ? "none" : s;
}

inline int required_degree(const Action& a, const Catalog& cat, const PdeProblem& p) {
    int deg = 0;
    for (int i = 0; i < kNumConditions; ++i) {
        if (a.mask[i]) deg = std::max(deg, required_degree(cat[i], p));
    }
    return deg;
}

/// One condition over an interface, given both networks' jets at its points. When the adjoint
/// matrices are supplied, `weight` times the term's derivative with respect to each jet block is
/// added to them.
inline double condition_term(const ConditionDescriptor& d, const PdeProblem& p, const InterfacePoints& ip,
                             const Eigen::MatrixXd& jets_a, const Eigen::MatrixXd& jets_b,
                             Eigen::MatrixXd* adj_a = nullptr, Eigen::MatrixXd* adj_b = nullptr,
                             double weight = 1.0) {
    const Eigen::Index n = ip.points.rows();
    if (n == 0) throw std::invalid_argument(std::string("condition_term: ") + d.name + " has no interface points");
    const double inv_n = 1.0 / static_cast<double>(n);
    const bool grad = adj_a && adj_b;
    double total = 0.0;
    // Squared difference q_a - q_b, or the sum of squares when `sum_of_squares` is set.
    auto accumulate = [&](const JetRow& ra, const JetRow& rb, const Lin& qa, const Lin& qb, bool sum_of_squares,
                          double scale = 1.0) {
        if (sum_of_squares) {
            total += scale * (qa.v * qa.v + qb.v * qb.v);
            if (grad) {
                ra.scatter(qa, weight * inv_n * 2.0 * scale * qa.v, *adj_a);
                rb.scatter(qb, weight * inv_n * 2.0 * scale * qb.v, *adj_b);
            }
        } else {
            const double diff = qa.v - qb.v;
            total += scale * diff * diff;
            if (grad) {
                ra.scatter(qa, weight * inv_n * 2.0 * scale * diff, *adj_a);
                rb.scatter(qb, -weight * inv_n * 2.0 * scale * diff, *adj_b);
            }
        }
    };
    for (Eigen::Index i = 0; i < n; ++i) {
        const JetRow ra(jets_a, i), rb(jets_b, i);
        const Vec2 z{ip.points(i, 0), ip.points(i, 1)};
        switch (d.kind) {
        case ConditionKind::u: accumulate(ra, rb, ra.partial(0, 0), rb.partial(0, 0), false); break;
        case ConditionKind::uavg:
            // u_k - (u_k + u_k')/2 = (u_k - u_k')/2.
            accumulate(ra, rb, ra.partial(0, 0), rb.partial(0, 0), false, 0.25);
            break;
        case ConditionKind::r: accumulate(ra, rb, residual(p, ra, z), residual(p, rb, z), true); break;
        case ConditionKind::rc: accumulate(ra, rb, residual(p, ra, z), residual(p, rb, z), false); break;
        case ConditionKind::gr: {
            const auto ga = residual_gradient(p, ra, z), gb = residual_gradient(p, rb, z);
            accumulate(ra, rb, ga[0], gb[0], true);
            accumulate(ra, rb, ga[1], gb[1], true);
            break;
        }
        case ConditionKind::c: {
            const Vec2 nrm{ip.normals(i, 0), ip.normals(i, 1)};
            accumulate(ra, rb, flux_normal(p, ra, nrm), flux_normal(p, rb, nrm), false);
            break;
        }
        case ConditionKind::d1:
        case ConditionKind::d2: {
            const int order = d.kind == ConditionKind::d1 ? 1 : 2;
            const int i1 = d.axis == 0 ? order : 0, i2 = d.axis == 0 ? 0 : order;
            accumulate(ra, rb, ra.partial(i1, i2), rb.partial(i1, i2), false);
            break;
        }
        }
    }
    return total * inv_n;
}

/// Multiplicity of each unordered neighbour pair in the interface sum. Summing the per-subdomain
/// losses over k counts every pair once from each side; every condition is symmetric under the
/// swap, so the ordered sum is twice the unordered one.
inline double pair_multiplicity(bool halve_pairs) noexcept { return halve_pairs ? 1.0 : 2.0; }

/// Sum of the selected conditions over one interface, times the pair multiplicity.
inline double interface_loss(const Action& a, const Catalog& cat, const PdeProblem& p, const InterfacePoints& ip,
                             const Eigen::MatrixXd& jets_a, const Eigen::MatrixXd& jets_b,
                             Eigen::MatrixXd* adj_a = nullptr, Eigen::MatrixXd* adj_b = nullptr,
                             double weight = 1.0, bool halve_pairs = false) {
    const double mult = pair_multiplicity(halve_pairs);
    double total = 0.0;
    for (int i = 0; i < kNumConditions; ++i) {
        if (!a.mask[i]) continue;
        total += mult * condition_term(cat[i], p, ip, jets_a, jets_b, adj_a, adj_b, weight * mult);
    }
    return total;
}

/// Convenience: evaluate both networks at the interface points and return one condition term.
inline double condition_term(const ConditionDescriptor& d, const PdeProblem& p, const InterfacePoints& ip,
                             const MlpSpec& spec, const ParamVector& theta_a, const ParamVector& theta_b) {
    const int deg = required_degree(d, p);
    MlpJetTape ta, tb;
    ta.forward(spec, {theta_a.data(), static_cast<std::size_t>(theta_a.size())}, ip.points, deg);
    tb.forward(spec, {theta_b.data(), static_cast<std::size_t>(theta_b.size())}, ip.points, deg);
    const Eigen::MatrixXd ja = ta.jets(), jb = tb.jets();
    return condition_term(d, p, ip, ja, jb);
}

}  // namespace metalic
