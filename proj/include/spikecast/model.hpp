// SPDX-License-Identifier: Apache-2.0
#pragma once

// Named parameter storage shared by both networks: deterministic ordering for
// optimizer steps and checkpoints, plus per-graph leaf binding.

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "spikecast/autodiff.hpp"
#include "spikecast/rng.hpp"
#include "spikecast/tensor.hpp"

namespace spikecast::model {

class ParamSet {
  public:
    std::size_t add(const std::string& name, Tensor t) {
        if (index_.count(name)) throw std::invalid_argument("ParamSet: duplicate name " + name);
        t.requires_grad = true;
        index_[name] = names_.size();
        names_.push_back(name);
        values_.push_back(std::move(t));
        grads_.push_back(Tensor::zeros(values_.back().shape));
        return names_.size() - 1;
    }

    std::size_t size() const { return names_.size(); }
    const std::string& name(std::size_t i) const { return names_[i]; }
    Tensor& value(std::size_t i) { return values_[i]; }
    const Tensor& value(std::size_t i) const { return values_[i]; }
    Tensor& grad(std::size_t i) { return grads_[i]; }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    std::size_t index_of(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::out_of_range("ParamSet: unknown parameter " + name);
        return it->second;
    }

    Tensor& operator[](const std::string& name) { return values_[index_of(name)]; }
    const Tensor& operator[](const std::string& name) const { return values_[index_of(name)]; }

    std::size_t count_scalars() const {
        std::size_t n = 0;
        for (const Tensor& t : values_) n += t.numel();
        return n;
    }

    void zero_grads() {
        for (Tensor& gt : grads_) std::fill(gt.data.begin(), gt.data.end(), 0.0);
    }

  private:
    std::vector<std::string> names_;
    std::vector<Tensor> values_;
    std::vector<Tensor> grads_;
    std::map<std::string, std::size_t> index_;
};

/// Leaves for one tape evaluation: params bound on demand so each sample's
/// graph only carries what it touches.
class Binding {
  public:
    Binding(ad::Graph& g, const ParamSet& params, bool trainable = true)
        : g_(&g), params_(&params), trainable_(trainable), bound_(params.size()) {}

    ad::Value operator()(const std::string& name) { return bind(name, trainable_); }

    /// Bind with gradients disabled regardless of the set's mode (e.g. a
    /// frozen threshold).
    ad::Value as_constant(const std::string& name) { return bind(name, false); }

    /// Use an existing graph value in place of the stored parameter, e.g. to
    /// probe one tensor in a gradient check.
    void substitute(const std::string& name, ad::Value v) {
        bound_[params_->index_of(name)] = v;
    }

    /// Accumulate tape gradients back into the parameter grad buffers,
    /// in parameter order (deterministic reduction).
    void accumulate_grads(ParamSet& params) const {
        for (std::size_t i = 0; i < bound_.size(); ++i) {
            if (!bound_[i].valid()) continue;
            const Tensor& gt = g_->grad(bound_[i]);
            Tensor& acc = params.grad(i);
            for (std::size_t k = 0; k < acc.numel(); ++k) acc[k] += gt[k];
        }
    }

  private:
    ad::Value bind(const std::string& name, bool trainable) {
        std::size_t i = params_->index_of(name);
        if (!bound_[i].valid()) {
            Tensor leaf = params_->value(i);
            leaf.requires_grad = trainable;
            bound_[i] = g_->input(std::move(leaf));
        }
        return bound_[i];
    }

    ad::Graph* g_;
    const ParamSet* params_;
    bool trainable_;
    std::vector<ad::Value> bound_;
};

// Per-channel input normalization: physical units into a tanh-friendly range.
// Visual vectors (dp_x, dp_y, ds, da) and context matrices (ds, dtheta).
inline constexpr double kVisualScale[4] = {20.0, 4.0, 4.0, 2.0};
inline constexpr double kContextScale[2] = {4.0, 1.0};

/// Scaled-uniform init in the fan-in convention.
inline Tensor glorot(Rng& rng, std::vector<std::size_t> shape, std::size_t fan_in,
                     std::size_t fan_out) {
    Tensor t(std::move(shape));
    double lim = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    rng.fill_uniform(t, -lim, lim);
    return t;
}

inline void add_linear(ParamSet& p, Rng& rng, const std::string& prefix, std::size_t in,
                       std::size_t out) {
    p.add(prefix + ".w", glorot(rng, {in, out}, in, out));
    p.add(prefix + ".b", Tensor::zeros({out}));
}

/// y = x W + b for a row-major batch x {r, in}.
inline ad::Value linear(ad::Graph& g, Binding& bind, const std::string& prefix, ad::Value x) {
    return ad::add_rowvec(g, ad::matmul(g, x, bind(prefix + ".w")), bind(prefix + ".b"));
}

}  // namespace spikecast::model
