// SPDX-License-Identifier: Apache-2.0
#pragma once

// Student: pooled visual vectors over a half-length window, flattened to a
// compact per-frame feature (target row + mean-pooled neighbors), run through
// the FA-SNN, then the shared GMM decoder.

#include <stdexcept>
#include <string>

#include "spikecast/autodiff.hpp"
#include "spikecast/decoder.hpp"
#include "spikecast/fasnn.hpp"
#include "spikecast/model.hpp"
#include "spikecast/tensor.hpp"

namespace spikecast::student {

struct StudentConfig {
    std::size_t t_obs = 8;  // half the teacher window
    std::size_t neurons = 48;
    std::size_t decoder_hidden = 48;
    std::size_t maneuvers = 6;
    std::size_t t_f = 25;
    double leak_rate = 1.0;
    double grad_width = 0.5;
    double grad_scale = 1.0;
    // ablation switches (Table-5 AST x FT grid)
    bool adaptive_threshold = true;  // AST: learnable vs frozen threshold
    bool fourier_features = true;    // FT: power spectrum vs raw voltages

    static constexpr std::size_t kInputDim = 8;  // 4 target + 4 neighbor-mean channels

    std::size_t feature_dim() const { return neurons * (t_obs + 1); }

    void validate() const {
        if (t_obs < 1 || neurons < 1 || decoder_hidden < 1 || maneuvers < 1 || t_f < 1) {
            throw std::invalid_argument("StudentConfig: extents must be positive");
        }
        if (leak_rate <= 0.0) throw std::invalid_argument("StudentConfig: leak_rate must be > 0");
    }
};

/// Flatten pooled visual vectors into the FA-SNN frame sequence: per frame,
/// the target's 4 channels followed by the neighbor rows' mean (zero when the
/// scene has no neighbors).
inline Tensor flatten_window(const Tensor& s_tilde, std::size_t t_obs) {
    if (s_tilde.rank() != 3 || s_tilde.shape[2] != 4) {
        throw std::invalid_argument("flatten_window: expected {n+1, T, 4} visual vectors");
    }
    if (s_tilde.shape[1] < t_obs) {
        throw std::invalid_argument("flatten_window: window shorter than t_obs");
    }
    std::size_t na = s_tilde.shape[0];
    std::size_t skip = s_tilde.shape[1] - t_obs;  // keep the most recent frames
    Tensor seq({t_obs, StudentConfig::kInputDim});
    for (std::size_t t = 0; t < t_obs; ++t) {
        for (std::size_t c = 0; c < 4; ++c) {
            seq.at(t, c) = s_tilde.at(0, skip + t, c) / model::kVisualScale[c];
            double mean = 0.0;
            for (std::size_t a = 1; a < na; ++a) mean += s_tilde.at(a, skip + t, c);
            seq.at(t, 4 + c) =
                na > 1 ? mean / (static_cast<double>(na - 1) * model::kVisualScale[c]) : 0.0;
        }
    }
    return seq;
}

class StudentNet {
  public:
    StudentConfig cfg;
    model::ParamSet params;

    StudentNet(const StudentConfig& c, std::uint64_t seed) : cfg(c) {
        cfg.validate();
        Rng rng(Rng::mix(seed, 0x57d));
        params.add("snn.w", model::glorot(rng, {StudentConfig::kInputDim, cfg.neurons},
                                          StudentConfig::kInputDim, cfg.neurons));
        params.add("snn.u0", Tensor::full({1, cfg.neurons}, 1.0));
        gmm::add_decoder_params(params, rng, "dec", cfg.feature_dim(), cfg.decoder_hidden,
                                cfg.maneuvers, cfg.t_f);
    }

    struct Forward {
        gmm::DecodeOut decode;
        ad::Value features;
    };

    Forward forward(ad::Graph& g, model::Binding& bind, const Tensor& s_tilde,
                    const gmm::Anchor& anchor) const {
        Tensor seq = flatten_window(s_tilde, cfg.t_obs);
        fasnn::GraphOptions opt;
        opt.leak_rate = cfg.leak_rate;
        opt.grad_width = cfg.grad_width;
        opt.grad_scale = cfg.grad_scale;
        opt.fourier_features = cfg.fourier_features;
        ad::Value u0 = cfg.adaptive_threshold ? bind("snn.u0") : bind.as_constant("snn.u0");
        fasnn::GraphResult snn = fasnn::fasnn_forward_graph(g, bind("snn.w"), u0, seq, opt);
        Forward fw;
        fw.features = snn.features;
        fw.decode = gmm::decode_multimodal(g, bind, "dec", snn.features, cfg.maneuvers, cfg.t_f,
                                           anchor);
        return fw;
    }

    gmm::MultimodalPrediction predict(const Tensor& s_tilde, const gmm::Anchor& anchor) const {
        ad::Graph g;
        model::Binding bind(g, params, false);
        Forward fw = forward(g, bind, s_tilde, anchor);
        return gmm::extract(g, fw.decode, cfg.maneuvers, cfg.t_f);
    }
};

/// Total scalar parameter count of a model's parameter set.
inline std::size_t count_params(const model::ParamSet& p) { return p.count_scalars(); }

}  // namespace spikecast::student
