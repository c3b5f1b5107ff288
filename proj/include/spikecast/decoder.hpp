// SPDX-License-Identifier: Apache-2.0
#pragma once

// Multimodal GMM head shared by both networks: a maneuver probability per
// mode and a bivariate-Gaussian trajectory per mode. Means decode as offsets
// from a constant-velocity anchor so the heads learn residual motion.

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "spikecast/autodiff.hpp"
#include "spikecast/model.hpp"
#include "spikecast/tensor.hpp"

namespace spikecast::gmm {

struct MultimodalPrediction {
    Tensor maneuver_probs;  // {C}
    Tensor traj;            // {C, T_f, 5}: mu_x, mu_y, sigma_x, sigma_y, rho

    std::size_t modes() const { return maneuver_probs.numel(); }
    std::size_t horizon() const { return traj.rank() == 3 ? traj.shape[1] : 0; }

    std::size_t argmax_mode() const {
        std::size_t best = 0;
        for (std::size_t c = 1; c < modes(); ++c) {
            if (maneuver_probs[c] > maneuver_probs[best]) best = c;
        }
        return best;
    }

    /// Mean trajectory of one mode as (x, y) per future frame.
    std::vector<std::array<double, 2>> mode_mean(std::size_t c) const {
        std::vector<std::array<double, 2>> out(horizon());
        for (std::size_t t = 0; t < horizon(); ++t) out[t] = {traj.at(c, t, 0), traj.at(c, t, 1)};
        return out;
    }

    /// Probability-weighted mixture of the mode means.
    std::vector<std::array<double, 2>> mixture_mean() const {
        std::vector<std::array<double, 2>> out(horizon(), {0.0, 0.0});
        for (std::size_t c = 0; c < modes(); ++c) {
            for (std::size_t t = 0; t < horizon(); ++t) {
                out[t][0] += maneuver_probs[c] * traj.at(c, t, 0);
                out[t][1] += maneuver_probs[c] * traj.at(c, t, 1);
            }
        }
        return out;
    }

    void validate() const {
        double sum = 0.0;
        for (std::size_t c = 0; c < modes(); ++c) {
            double p = maneuver_probs[c];
            if (p < 0.0 || p > 1.0) throw std::logic_error("MultimodalPrediction: prob out of [0,1]");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-6) {
            throw std::logic_error("MultimodalPrediction: probs do not sum to 1");
        }
        for (std::size_t c = 0; c < modes(); ++c) {
            for (std::size_t t = 0; t < horizon(); ++t) {
                if (!(traj.at(c, t, 2) > 0.0) || !(traj.at(c, t, 3) > 0.0)) {
                    throw std::logic_error("MultimodalPrediction: sigma must be > 0");
                }
                if (!(std::abs(traj.at(c, t, 4)) < 1.0)) {
                    throw std::logic_error("MultimodalPrediction: |rho| must be < 1");
                }
            }
        }
    }
};

/// Constant-velocity extrapolation from the last observed target state; the
/// decoded means are residuals added on top of it.
struct Anchor {
    double x0 = 0.0, y0 = 0.0;
    double vx = 0.0, vy = 0.0;
    double dt = 0.2;

    double x_at(std::size_t t) const { return x0 + vx * dt * static_cast<double>(t + 1); }
    double y_at(std::size_t t) const { return y0 + vy * dt * static_cast<double>(t + 1); }

    /// Tiled per-mode anchor series for one coordinate, length C * T_f.
    Tensor tiled(std::size_t C, std::size_t t_f, bool ycoord) const {
        Tensor out({C * t_f});
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t t = 0; t < t_f; ++t) {
                out[c * t_f + t] = ycoord ? y_at(t) : x_at(t);
            }
        }
        return out;
    }
};

inline void add_decoder_params(model::ParamSet& p, Rng& rng, const std::string& prefix,
                               std::size_t in_dim, std::size_t hidden, std::size_t C,
                               std::size_t t_f) {
    model::add_linear(p, rng, prefix + ".trunk", in_dim, hidden);
    model::add_linear(p, rng, prefix + ".man1", in_dim, hidden);
    model::add_linear(p, rng, prefix + ".man2", hidden, C);
    model::add_linear(p, rng, prefix + ".traj", hidden, C * t_f * 5);
}

struct DecodeOut {
    ad::Value probs;     // {1, C}, softmax-normalized
    ad::Value traj_mat;  // {5, C*T_f}: rows mu_x, mu_y, sigma_x, sigma_y, rho
};

// Scale floor on the decoded standard deviations. Keeps 1/sigma^2 gradients
// through the shared encoder bounded; without it sigma collapse destabilizes
// joint training of the regression and maneuver heads.
inline constexpr double kSigmaFloor = 0.2;

/// Hidden state -> maneuver distribution and per-mode Gaussian parameters.
/// sigma = exp(raw), rho = tanh(raw); means are anchor + decoded residual.
inline DecodeOut decode_multimodal(ad::Graph& g, model::Binding& bind, const std::string& prefix,
                                   ad::Value hidden_row, std::size_t C, std::size_t t_f,
                                   const Anchor& anchor) {
    if (!g.value(hidden_row).all_finite()) {
        throw std::invalid_argument("decode_multimodal: non-finite hidden state");
    }
    // parameter-free normalization so the heads read a stable-scale state
    ad::Value centered = ad::sub_bcast(g, hidden_row, ad::mean_all(g, hidden_row));
    ad::Value var = ad::mean_all(g, ad::mul(g, centered, centered));
    ad::Value hn = ad::div_bcast(g, centered, ad::sqrt_(g, ad::add_const(g, var, 1e-6)));

    ad::Value trunk = ad::tanh_(g, model::linear(g, bind, prefix + ".trunk", hn));
    DecodeOut out;
    ad::Value man_h = ad::tanh_(g, model::linear(g, bind, prefix + ".man1", hn));
    out.probs = ad::softmax(g, model::linear(g, bind, prefix + ".man2", man_h));

    ad::Value raw = ad::reshape(g, model::linear(g, bind, prefix + ".traj", trunk), {C * t_f * 5});
    std::size_t m = C * t_f;
    ad::Value mu_x = ad::add(g, ad::slice_stride(g, raw, 0, 5, m),
                             g.constant(anchor.tiled(C, t_f, false)));
    ad::Value mu_y = ad::add(g, ad::slice_stride(g, raw, 1, 5, m),
                             g.constant(anchor.tiled(C, t_f, true)));
    ad::Value sig_x = ad::add_const(g, ad::exp_(g, ad::slice_stride(g, raw, 2, 5, m)), kSigmaFloor);
    ad::Value sig_y = ad::add_const(g, ad::exp_(g, ad::slice_stride(g, raw, 3, 5, m)), kSigmaFloor);
    ad::Value rho = ad::tanh_(g, ad::slice_stride(g, raw, 4, 5, m));

    auto as_row = [&](ad::Value v) { return ad::reshape(g, v, {1, m}); };
    out.traj_mat = ad::concat_rows(
        g, {as_row(mu_x), as_row(mu_y), as_row(sig_x), as_row(sig_y), as_row(rho)});
    return out;
}

/// Materialize the tape outputs into the plain prediction contract.
inline MultimodalPrediction extract(const ad::Graph& g, const DecodeOut& d, std::size_t C,
                                    std::size_t t_f) {
    MultimodalPrediction p;
    const Tensor& probs = g.value(d.probs);
    p.maneuver_probs = Tensor({C});
    std::copy(probs.data.begin(), probs.data.end(), p.maneuver_probs.data.begin());
    const Tensor& tm = g.value(d.traj_mat);
    p.traj = Tensor({C, t_f, 5});
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t t = 0; t < t_f; ++t) {
            for (std::size_t k = 0; k < 5; ++k) p.traj.at(c, t, k) = tm.at(k, c * t_f + t);
        }
    }
    return p;
}

}  // namespace spikecast::gmm
