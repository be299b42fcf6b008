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

/// Fully connected tanh networks R^2 -> R evaluated over Taylor jets.
///
/// Parameters live in one flat vector, layer by layer: the weight matrix of a layer in row-major
/// (fan_out x fan_in) order followed by its fan_out biases.
///
/// MlpJetTape evaluates a network on a batch of points at a chosen truncation degree and keeps
/// the intermediate jets so that a loss defined on the output jets can be pulled back to the
/// parameters. Each layer's jets are stored as a (width x C*N) matrix whose column block c holds
/// Taylor coefficient c for all N points, so a dense layer is a single matrix product.

#include "metalic/error.hpp"
#include "metalic/jet.hpp"
#include "metalic/rng.hpp"

#include <Eigen/Dense>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace metalic {

using ParamVector = Eigen::VectorXd;
using Points = Eigen::Matrix<double, Eigen::Dynamic, 2>;

struct MlpSpec {
    int input_dim = 2;
    int hidden_layers = 2;
    int width = 20;
    int output_dim = 1;

    /// Layer sizes from input to output.
    std::vector<int> layer_sizes() const {
        std::vector<int> sizes{input_dim};
        for (int l = 0; l < hidden_layers; ++l) sizes.push_back(width);
        sizes.push_back(output_dim);
        return sizes;
    }

    std::size_t param_count() const {
        const auto sizes = layer_sizes();
        std::size_t n = 0;
        for (std::size_t l = 1; l < sizes.size(); ++l) {
            n += static_cast<std::size_t>(sizes[l - 1] + 1) * static_cast<std::size_t>(sizes[l]);
        }
        return n;
    }

    void validate() const {
        if (input_dim != 2) throw ConfigError("network.input_dim", "only 2 inputs are supported");
        if (output_dim != 1) throw ConfigError("network.output_dim", "only 1 output is supported");
        if (hidden_layers < 1) throw ConfigError("network.hidden_layers", "must be >= 1");
        if (width < 1) throw ConfigError("network.width", "must be >= 1");
    }

    friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

/// Glorot-uniform weights and zero biases.
inline ParamVector init_params(const MlpSpec& spec, std::uint64_t seed) {
    spec.validate();
    ParamVector params = ParamVector::Zero(static_cast<Eigen::Index>(spec.param_count()));
    std::mt19937_64 rng(seed);
    const auto sizes = spec.layer_sizes();
    Eigen::Index offset = 0;
    for (std::size_t l = 1; l < sizes.size(); ++l) {
        const int fan_in = sizes[l - 1], fan_out = sizes[l];
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (int k = 0; k < fan_in * fan_out; ++k) params[offset + k] = uniform(rng, -limit, limit);
        offset += static_cast<Eigen::Index>(fan_in + 1) * fan_out;
    }
    return params;
}

/// Plain scalar forward pass.
inline double forward_value(std::span<const double> params, const MlpSpec& spec, double z1, double z2) {
    const auto sizes = spec.layer_sizes();
    std::vector<double> act{z1, z2}, next;
    std::size_t offset = 0;
    for (std::size_t l = 1; l < sizes.size(); ++l) {
        const int fan_in = sizes[l - 1], fan_out = sizes[l];
        const double* w = params.data() + offset;
        const double* b = w + static_cast<std::size_t>(fan_in) * fan_out;
        next.assign(static_cast<std::size_t>(fan_out), 0.0);
        for (int o = 0; o < fan_out; ++o) {
            double acc = b[o];
            for (int i = 0; i < fan_in; ++i) acc += w[o * fan_in + i] * act[i];
            next[o] = (l + 1 < sizes.size()) ? std::tanh(acc) : acc;
        }
        act.swap(next);
        offset += static_cast<std::size_t>(fan_in + 1) * fan_out;
    }
    return act[0];
}

/// Network output at one point as a degree-3 jet in (z1, z2).
inline Jet forward_jet(std::span<const double> params, const MlpSpec& spec, Jet::Point point) {
    const auto sizes = spec.layer_sizes();
    std::vector<Jet> act{Jet::seed(point, Seed::first), Jet::seed(point, Seed::second)}, next;
    std::size_t offset = 0;
    for (std::size_t l = 1; l < sizes.size(); ++l) {
        const int fan_in = sizes[l - 1], fan_out = sizes[l];
        const double* w = params.data() + offset;
        const double* b = w + static_cast<std::size_t>(fan_in) * fan_out;
        next.clear();
        for (int o = 0; o < fan_out; ++o) {
            Jet acc(b[o], point);
            for (int i = 0; i < fan_in; ++i) acc += w[o * fan_in + i] * act[i];
            next.push_back((l + 1 < sizes.size()) ? tanh(acc) : acc);
        }
        act.swap(next);
        offset += static_cast<std::size_t>(fan_in + 1) * fan_out;
    }
    return act[0];
}

/// Elementwise tanh through the vectorized exponential: sign(x) (1 - e) / (1 + e) with
/// e = exp(-2|x|). Absolute error within 2.3e-16 of std::tanh.
template <typename Derived>
Eigen::ArrayXXd tanh_array(const Eigen::ArrayBase<Derived>& x) {
    const Eigen::ArrayXXd e = (-2.0 * x.abs()).exp();
    return x.sign() * (1.0 - e) / (1.0 + e);
}

/// Batched jet evaluation of a network with reverse-mode parameter gradients.
class MlpJetTape {
public:
    using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    /// Evaluate the network at `points` with jets truncated at `degree` (0..3).
    void forward(const MlpSpec& spec, std::span<const double> params, const Points& points, int degree) {
        if (degree < 0 || degree > kMaxJetDegree) throw std::invalid_argument("MlpJetTape: bad degree");
        if (params.size() != spec.param_count()) {
            throw std::invalid_argument("MlpJetTape: parameter vector length does not match spec");
        }
        spec_ = spec;
        params_ = params;
        degree_ = degree;
        n_ = points.rows();
        coeffs_ = jet_size(degree);
        sizes_ = spec.layer_sizes();
        const std::size_t layers = sizes_.size() - 1;
        const Eigen::Index cols = n_ * coeffs_;

        inputs_.setZero(2, cols);
        inputs_.row(0).head(n_) = points.col(0).transpose();
        inputs_.row(1).head(n_) = points.col(1).transpose();
        if (degree >= 1) {
            inputs_.row(0).segment(jet_index(1, 0) * n_, n_).setOnes();
            inputs_.row(1).segment(jet_index(0, 1) * n_, n_).setOnes();
        }

        pre_.resize(layers);
        post_.resize(layers - 1);
        t_.resize(layers - 1);
        p2_.resize(layers - 1);
        p3_.resize(layers - 1);

        const Eigen::MatrixXd* prev = &inputs_;
        std::size_t offset = 0;
        for (std::size_t l = 0; l < layers; ++l) {
            const int fan_in = sizes_[l], fan_out = sizes_[l + 1];
            const auto w = weights(offset, fan_out, fan_in);
            const auto b = biases(offset, fan_out, fan_in);
            pre_[l].noalias() = w * (*prev);
            pre_[l].leftCols(n_).colwise() += b;
            if (l + 1 < layers) {
                apply_tanh(l);
                prev = &post_[l];
            }
            offset += static_cast<std::size_t>(fan_in + 1) * fan_out;
        }
    }

    int degree() const noexcept { return degree_; }
    Eigen::Index points() const noexcept { return n_; }
    int coeffs() const noexcept { return coeffs_; }

    /// Output Taylor coefficients, one row per point and one column per coefficient.
    Eigen::Map<const Eigen::MatrixXd> jets() const {
        return {pre_.back().data(), n_, coeffs_};
    }

    /// Partial derivative (i, j) of the output at point n.
    double partial(Eigen::Index n, int i, int j) const {
        return jets()(n, jet_index(i, j)) * factorial(i) * factorial(j);
    }

    /// Accumulate d(loss)/d(params) into `grad` given d(loss)/d(output coefficients) laid out
    /// like jets().
    void backward(const Eigen::MatrixXd& jet_adjoint, std::span<double> grad) {
        if (jet_adjoint.rows() != n_ || jet_adjoint.cols() != coeffs_) {
            throw std::invalid_argument("MlpJetTape::backward: adjoint shape mismatch");
        }
        if (grad.size() != spec_.param_count()) {
            throw std::invalid_argument("MlpJetTape::backward: gradient length mismatch");
        }
        const std::size_t layers = sizes_.size() - 1;
        std::vector<std::size_t> offsets(layers);
        std::size_t offset = 0;
        for (std::size_t l = 0; l < layers; ++l) {
            offsets[l] = offset;
            offset += static_cast<std::size_t>(sizes_[l] + 1) * sizes_[l + 1];
        }

        zbar_ = Eigen::Map<const Eigen::MatrixXd>(jet_adjoint.data(), 1, n_ * coeffs_);
        for (std::size_t l = layers; l-- > 0;) {
            const int fan_in = sizes_[l], fan_out = sizes_[l + 1];
            const Eigen::MatrixXd& input = (l == 0) ? inputs_ : post_[l - 1];
            Eigen::Map<RowMajorMatrix> dw(grad.data() + offsets[l], fan_out, fan_in);
            Eigen::Map<Eigen::VectorXd> db(grad.data() + offsets[l] + static_cast<std::size_t>(fan_in) * fan_out,
                                           fan_out);
            dw.noalias() += zbar_ * input.transpose();
            db += zbar_.leftCols(n_).rowwise().sum();
            if (l == 0) break;
            abar_.noalias() = weights(offsets[l], fan_out, fan_in).transpose() * zbar_;
            tanh_adjoint(l - 1);
        }
    }

private:
    Eigen::Map<const RowMajorMatrix> weights(std::size_t offset, int fan_out, int fan_in) const {
        return {params_.data() + offset, fan_out, fan_in};
    }
    Eigen::Map<const Eigen::VectorXd> biases(std::size_t offset, int fan_out, int fan_in) const {
        return {params_.data() + offset + static_cast<std::size_t>(fan_in) * fan_out, fan_out};
    }

    auto block(Eigen::MatrixXd& m, int c) { return m.middleCols(c * n_, n_).array(); }
    auto block(const Eigen::MatrixXd& m, int c) const { return m.middleCols(c * n_, n_).array(); }

    // post = tanh composed with pre, truncated at degree_.
    void apply_tanh(std::size_t l) {
        const Eigen::MatrixXd& z = pre_[l];
        const Eigen::Index rows = z.rows();
        Eigen::MatrixXd& a = post_[l];
        a.resize(rows, z.cols());
        auto& t = t_[l];
        t.resize(4);
        t[0] = tanh_array(block(z, 0));
        // tanh derivatives up to order degree + 1; the adjoint needs one more than the forward.
        t[1] = 1.0 - t[0].square();
        if (degree_ >= 1) t[2] = -2.0 * t[0] * t[1];
        if (degree_ >= 2) t[3] = -2.0 * t[1].square() - 2.0 * t[0] * t[2];
        block(a, 0) = t[0];
        if (degree_ == 0) return;

        Eigen::MatrixXd& p2 = p2_[l];
        Eigen::MatrixXd& p3 = p3_[l];
        if (degree_ >= 2) {
            p2.setZero(rows, z.cols());
            for (const ProductTerm& term : product_table(degree_, true)) {
                block(p2, term.result) += block(z, term.lhs) * block(z, term.rhs);
            }
        }
        if (degree_ >= 3) {
            p3.setZero(rows, z.cols());
            for (const ProductTerm& term : product_table(degree_, true)) {
                if (jet_multi_index(term.lhs).order() < 2) continue;
                block(p3, term.result) += block(p2, term.lhs) * block(z, term.rhs);
            }
        }
        for (int c = 1; c < coeffs_; ++c) {
            const int order = jet_multi_index(c).order();
            auto out = block(a, c);
            out = t[1] * block(z, c);
            if (order >= 2) out += 0.5 * t[2] * block(p2, c);
            if (order >= 3) out += (1.0 / 6.0) * t[3] * block(p3, c);
        }
    }

    // zbar_ <- d(loss)/d(pre_[l]) given abar_ = d(loss)/d(post_[l]).
    void tanh_adjoint(std::size_t l) {
        const Eigen::MatrixXd& z = pre_[l];
        const auto& t = t_[l];
        const Eigen::Index rows = z.rows();
        zbar_.resize(rows, z.cols());
        auto z0bar = block(zbar_, 0);
        z0bar = block(abar_, 0) * t[1];
        if (degree_ == 0) return;

        const Eigen::MatrixXd& p2 = p2_[l];
        const Eigen::MatrixXd& p3 = p3_[l];
        Eigen::ArrayXXd t4;
        if (degree_ >= 3) t4 = -6.0 * t[1] * t[2] - 2.0 * t[0] * t[3];

        if (degree_ >= 2) p2bar_.setZero(rows, z.cols());
        if (degree_ >= 3) p3bar_.setZero(rows, z.cols());
        for (int c = 1; c < coeffs_; ++c) {
            const int order = jet_multi_index(c).order();
            const auto ab = block(abar_, c);
            z0bar += ab * t[2] * block(z, c);
            if (order >= 2) {
                z0bar += ab * (0.5 * t[3]) * block(p2, c);
                block(p2bar_, c) = 0.5 * t[2] * ab;
            }
            if (order >= 3) {
                z0bar += ab * ((1.0 / 6.0) * t4) * block(p3, c);
                block(p3bar_, c) = (1.0 / 6.0) * t[3] * ab;
            }
            block(zbar_, c) = t[1] * ab;
        }
        if (degree_ >= 3) {
            for (const ProductTerm& term : product_table(degree_, true)) {
                if (jet_multi_index(term.lhs).order() < 2) continue;
                block(p2bar_, term.lhs) += block(p3bar_, term.result) * block(z, term.rhs);
                block(zbar_, term.rhs) += block(p3bar_, term.result) * block(p2, term.lhs);
            }
        }
        if (degree_ >= 2) {
            for (const ProductTerm& term : product_table(degree_, true)) {
                block(zbar_, term.lhs) += block(p2bar_, term.result) * block(z, term.rhs);
                block(zbar_, term.rhs) += block(p2bar_, term.result) * block(z, term.lhs);
            }
        }
    }

    MlpSpec spec_;
    std::span<const double> params_;
    int degree_ = 0;
    Eigen::Index n_ = 0;
    int coeffs_ = 1;
    std::vector<int> sizes_;
    Eigen::MatrixXd inputs_;
    std::vector<Eigen::MatrixXd> pre_, post_, p2_, p3_;
    std::vector<std::vector<Eigen::ArrayXXd>> t_;
    Eigen::MatrixXd zbar_, abar_, p2bar_, p3bar_;
};

/// One jet-evaluated piece of an objective: the network is evaluated at `points` to `degree`,
/// and `fn` maps the output jets (rows = points, cols = Taylor coefficients) to a scalar while
/// writing d(scalar)/d(jets) into its second argument (pre-sized, zero-filled).
struct JetObjectiveTerm {
    Points points;
    int degree = 0;
    std::function<double(const Eigen::MatrixXd& jets, Eigen::MatrixXd& adjoint)> fn;
};

/// Objective pieces that depend on the parameters directly; returns the value and accumulates
/// the gradient into its second argument.
using DirectObjective = std::function<double(std::span<const double> params, std::span<double> grad)>;

/// Value and exact gradient of sum(terms) + direct(params).
inline double grad_params(const ParamVector& params, const MlpSpec& spec, std::span<const JetObjectiveTerm> terms,
                          const DirectObjective& direct, ParamVector& grad) {
    grad = ParamVector::Zero(params.size());
    std::span<const double> theta(params.data(), static_cast<std::size_t>(params.size()));
    std::span<double> g(grad.data(), static_cast<std::size_t>(grad.size()));
    double total = 0.0;
    MlpJetTape tape;
    for (const JetObjectiveTerm& term : terms) {
        tape.forward(spec, theta, term.points, term.degree);
        const Eigen::MatrixXd jets = tape.jets();
        Eigen::MatrixXd adjoint = Eigen::MatrixXd::Zero(jets.rows(), jets.cols());
        total += term.fn(jets, adjoint);
        tape.backward(adjoint, g);
    }
    if (direct) total += direct(theta, g);
    if (!std::isfinite(total)) {
        throw NumericalError("grad_params: objective is not finite",
                             std::vector<double>(params.data(), params.data() + params.size()));
    }
    return total;
}

// ---------------------------------------------------------------------------------------------
// Parameter snapshots: 8-byte magic "MTLCPRM1", then little-endian u32 version, input_dim,
// hidden_layers, width, output_dim, u64 seed, u64 count, followed by `count` IEEE-754 doubles.

namespace detail {
static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes a little-endian host");

template <typename T>
void write_pod(std::ostream& os, T value) {
    os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}
template <typename T>
T read_pod(std::istream& is) {
    T value{};
    is.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!is) throw SchemaError("unexpected end of file");
    return value;
}
}  // namespace detail

inline constexpr std::uint32_t kSnapshotVersion = 1;

inline void save_params(const std::string& path, const MlpSpec& spec, std::uint64_t seed, const ParamVector& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os.write("MTLCPRM1", 8);
    detail::write_pod<std::uint32_t>(os, kSnapshotVersion);
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(spec.input_dim));
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(spec.hidden_layers));
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(spec.width));
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(spec.output_dim));
    detail::write_pod<std::uint64_t>(os, seed);
    detail::write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(params.size()));
    os.write(reinterpret_cast<const char*>(params.data()), static_cast<std::streamsize>(params.size() * sizeof(double)));
}

struct ParamSnapshot {
    MlpSpec spec;
    std::uint64_t seed = 0;
    ParamVector params;
};

inline ParamSnapshot load_params(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, "MTLCPRM1", 8) != 0) throw SchemaError(path + ": not a parameter snapshot");
    if (detail::read_pod<std::uint32_t>(is) != kSnapshotVersion) throw SchemaError(path + ": unsupported version");
    ParamSnapshot snap;
    snap.spec.input_dim = static_cast<int>(detail::read_pod<std::uint32_t>(is));
    snap.spec.hidden_layers = static_cast<int>(detail::read_pod<std::uint32_t>(is));
    snap.spec.width = static_cast<int>(detail::read_pod<std::uint32_t>(is));
    snap.spec.output_dim = static_cast<int>(detail::read_pod<std::uint32_t>(is));
    snap.seed = detail::read_pod<std::uint64_t>(is);
    const auto count = detail::read_pod<std::uint64_t>(is);
    if (count != snap.spec.param_count()) throw SchemaError(path + ": parameter count does not match dims");
    snap.params.resize(static_cast<Eigen::Index>(count));
    is.read(reinterpret_cast<char*>(snap.params.data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (!is) throw SchemaError(path + ": truncated parameter data");
    return snap;
}

}  // namespace metalic
