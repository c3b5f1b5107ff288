// SPDX-License-Identifier: Apache-2.0
#pragma once

// Teacher: gated recurrence + multi-head attention over agents for the
// temporal stream, strided-subsample conv + graph attention for the spatial
// stream, one inverted-attention fusion block, and the shared GMM decoder.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "spikecast/autodiff.hpp"
#include "spikecast/decoder.hpp"
#include "spikecast/model.hpp"
#include "spikecast/rng.hpp"
#include "spikecast/tensor.hpp"

namespace spikecast::teacher {

struct TeacherConfig {
    std::size_t hidden_dim = 64;
    std::size_t heads = 4;
    std::size_t maneuvers = 6;  // C: {left, keep, right} x {normal, braking}
    std::size_t t_obs = 16;
    std::size_t t_f = 25;
    double dropout = 0.1;
    std::size_t decoder_hidden = 128;
    std::size_t ffn_dim = 256;
    std::size_t fuse_key_dim = 16;
    // ablation switches (Table-3-style component grid)
    bool use_spatial = true;
    bool use_fusion = true;

    void validate() const {
        if (hidden_dim == 0 || heads == 0 || hidden_dim % heads != 0) {
            throw std::invalid_argument("TeacherConfig: hidden_dim must divide by heads");
        }
        if (maneuvers < 1) throw std::invalid_argument("TeacherConfig: maneuvers must be >= 1");
        if (t_obs < 4 || t_obs % 4 != 0) {
            throw std::invalid_argument("TeacherConfig: t_obs must be a positive multiple of 4");
        }
        if (t_f < 1) throw std::invalid_argument("TeacherConfig: t_f must be >= 1");
        if (dropout < 0.0 || dropout >= 1.0) {
            throw std::invalid_argument("TeacherConfig: dropout out of [0, 1)");
        }
    }
};

/// Network-ready scene: pooled visual vectors, context matrices, and the
/// constant-velocity anchor the decoder offsets from.
struct SceneInput {
    Tensor s_tilde;  // {n+1, t_obs, 4}
    Tensor m;        // {n+1, t_obs, 2}
    gmm::Anchor anchor;

    std::size_t agents() const { return s_tilde.rank() == 3 ? s_tilde.shape[0] : 0; }
    std::size_t frames() const { return s_tilde.rank() == 3 ? s_tilde.shape[1] : 0; }
};

namespace detail {

/// One frame of a rank-3 feature tensor as a constant {n+1, channels} matrix,
/// normalized per channel.
inline ad::Value frame_const(ad::Graph& g, const Tensor& feat, std::size_t t,
                             const double* channel_scale) {
    std::size_t na = feat.shape[0], ch = feat.shape[2];
    Tensor f({na, ch});
    for (std::size_t a = 0; a < na; ++a) {
        for (std::size_t c = 0; c < ch; ++c) f.at(a, c) = feat.at(a, t, c) / channel_scale[c];
    }
    return g.constant(std::move(f));
}

/// Row-wise layer normalization with learned scale/shift.
inline ad::Value layer_norm(ad::Graph& g, model::Binding& bind, const std::string& prefix,
                            ad::Value x, double eps = 1e-5) {
    std::size_t rows = g.value(x).shape[0];
    std::vector<ad::Value> out;
    out.reserve(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        ad::Value r = ad::slice_rows(g, x, i, i + 1);
        ad::Value centered = ad::sub_bcast(g, r, ad::mean_all(g, r));
        ad::Value var = ad::mean_all(g, ad::mul(g, centered, centered));
        ad::Value normed = ad::div_bcast(g, centered, ad::sqrt_(g, ad::add_const(g, var, eps)));
        out.push_back(ad::add_rowvec(g, ad::mul_rowvec(g, normed, bind(prefix + ".gamma")),
                                     bind(prefix + ".beta")));
    }
    return rows == 1 ? out[0] : ad::concat_rows(g, out);
}

/// Multi-head scaled dot-product self-attention over rows (agents). The key
/// projection carries no bias: softmax scores are invariant to one, so it
/// would be a dead parameter.
inline ad::Value self_attention(ad::Graph& g, model::Binding& bind, const std::string& prefix,
                                ad::Value x, std::size_t heads) {
    std::size_t dim = g.value(x).shape[1];
    std::size_t dh = dim / heads;
    ad::Value q = model::linear(g, bind, prefix + ".q", x);
    ad::Value k = ad::matmul(g, x, bind(prefix + ".k.w"));
    ad::Value v = model::linear(g, bind, prefix + ".v", x);
    std::vector<ad::Value> outs;
    outs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        ad::Value qh = ad::slice_cols(g, q, h * dh, (h + 1) * dh);
        ad::Value kh = ad::slice_cols(g, k, h * dh, (h + 1) * dh);
        ad::Value vh = ad::slice_cols(g, v, h * dh, (h + 1) * dh);
        ad::Value scores =
            ad::scale(g, ad::matmul(g, qh, ad::transpose(g, kh)), 1.0 / std::sqrt(double(dh)));
        outs.push_back(ad::matmul(g, ad::softmax(g, scores), vh));
    }
    return model::linear(g, bind, prefix + ".o", ad::concat_cols(g, outs));
}

}  // namespace detail

class TeacherNet {
  public:
    TeacherConfig cfg;
    model::ParamSet params;

    TeacherNet(const TeacherConfig& c, std::uint64_t seed) : cfg(c) {
        cfg.validate();
        Rng rng(Rng::mix(seed, 0x7ea));
        std::size_t H = cfg.hidden_dim;
        for (const char* gate : {"z", "r", "h"}) {
            params.add(std::string("tem.gru.w") + gate, model::glorot(rng, {4, H}, 4, H));
            params.add(std::string("tem.gru.u") + gate, model::glorot(rng, {H, H}, H, H));
            params.add(std::string("tem.gru.b") + gate, Tensor::zeros({H}));
        }
        for (const char* m : {"q", "v", "o"}) {
            model::add_linear(params, rng, std::string("tem.attn.") + m, H, H);
        }
        params.add("tem.attn.k.w", model::glorot(rng, {H, H}, H, H));
        model::add_linear(params, rng, "spa.conv1", 2, H);
        model::add_linear(params, rng, "spa.conv3", 9 * H, H);
        params.add("spa.norm.gamma", Tensor::full({H}, 1.0));
        params.add("spa.norm.beta", Tensor::zeros({H}));
        params.add("spa.gat.w", model::glorot(rng, {H, H}, H, H));
        params.add("spa.gat.a1", model::glorot(rng, {H, 1}, H, 1));
        params.add("spa.gat.a2", model::glorot(rng, {H, 1}, H, 1));
        params.add("spa.gat.b", Tensor::zeros({H}));
        params.add("fuse.ln1.gamma", Tensor::full({2 * H}, 1.0));
        params.add("fuse.ln1.beta", Tensor::zeros({2 * H}));
        params.add("fuse.ln2.gamma", Tensor::full({2 * H}, 1.0));
        params.add("fuse.ln2.beta", Tensor::zeros({2 * H}));
        params.add("fuse.attn.wq", model::glorot(rng, {2, cfg.fuse_key_dim}, 2, cfg.fuse_key_dim));
        params.add("fuse.attn.wk", model::glorot(rng, {2, cfg.fuse_key_dim}, 2, cfg.fuse_key_dim));
        model::add_linear(params, rng, "fuse.ffn1", 2 * H, cfg.ffn_dim);
        model::add_linear(params, rng, "fuse.ffn2", cfg.ffn_dim, 2 * H);
        model::add_linear(params, rng, "fuse.proj_t", H, H);
        model::add_linear(params, rng, "fuse.proj_s", H, H);
        gmm::add_decoder_params(params, rng, "dec", 2 * H, cfg.decoder_hidden, cfg.maneuvers,
                                cfg.t_f);
    }

    /// Per-agent recurrent encoding over the window, then attention across
    /// agents at the final step. Output {n+1, hidden}.
    ad::Value temporal_encode(ad::Graph& g, model::Binding& bind, const Tensor& s_tilde) const {
        if (s_tilde.rank() != 3 || s_tilde.shape[1] != cfg.t_obs || s_tilde.shape[2] != 4) {
            throw std::invalid_argument("temporal_encode: extent mismatch " + s_tilde.shape_str());
        }
        std::size_t na = s_tilde.shape[0];
        ad::Value h = g.constant(Tensor::zeros({na, cfg.hidden_dim}));
        for (std::size_t t = 0; t < cfg.t_obs; ++t) {
            ad::Value x = detail::frame_const(g, s_tilde, t, model::kVisualScale);
            auto gate = [&](const char* n, ad::Value hh) {
                return ad::add_rowvec(
                    g,
                    ad::add(g, ad::matmul(g, x, bind(std::string("tem.gru.w") + n)),
                            ad::matmul(g, hh, bind(std::string("tem.gru.u") + n))),
                    bind(std::string("tem.gru.b") + n));
            };
            ad::Value z = ad::sigmoid(g, gate("z", h));
            ad::Value r = ad::sigmoid(g, gate("r", h));
            ad::Value cand = ad::tanh_(g, gate("h", ad::mul(g, r, h)));
            h = ad::add(g, h, ad::mul(g, z, ad::sub(g, cand, h)));
        }
        return ad::add(g, h, detail::self_attention(g, bind, "tem.attn", h, cfg.heads));
    }

    /// Subsampled context grid -> 1x1 expansion -> 3x3 conv over the
    /// (agent x frame) grid -> per-channel normalization (+dropout) -> graph
    /// attention across agents with ELU. Output {n+1, hidden}.
    ad::Value spatial_encode(ad::Graph& g, model::Binding& bind, const Tensor& m, bool training,
                             Rng* dropout_rng) const {
        if (m.rank() != 3 || m.shape[1] != cfg.t_obs || m.shape[2] != 2) {
            throw std::invalid_argument("spatial_encode: extent mismatch " + m.shape_str());
        }
        if (cfg.t_obs < 4) throw std::invalid_argument("spatial_encode: fewer than 4 frames");
        std::size_t na = m.shape[0];
        std::size_t ts = cfg.t_obs / 4;
        std::size_t H = cfg.hidden_dim;

        // every 4th frame, most recent last
        Tensor grid({na * ts, 2});
        for (std::size_t a = 0; a < na; ++a) {
            for (std::size_t f = 0; f < ts; ++f) {
                std::size_t src = cfg.t_obs - 1 - 4 * (ts - 1 - f);
                grid.at(a * ts + f, 0) = m.at(a, src, 0) / model::kContextScale[0];
                grid.at(a * ts + f, 1) = m.at(a, src, 1) / model::kContextScale[1];
            }
        }
        ad::Value x = model::linear(g, bind, "spa.conv1", g.constant(std::move(grid)));

        // 3x3 conv via im2col over the (agent, frame) grid, zero padded
        std::vector<long> gather;
        gather.reserve(na * ts * 9);
        for (long a = 0; a < static_cast<long>(na); ++a) {
            for (long f = 0; f < static_cast<long>(ts); ++f) {
                for (long da = -1; da <= 1; ++da) {
                    for (long df = -1; df <= 1; ++df) {
                        long aa = a + da, ff = f + df;
                        bool in = aa >= 0 && aa < static_cast<long>(na) && ff >= 0 &&
                                  ff < static_cast<long>(ts);
                        gather.push_back(in ? aa * static_cast<long>(ts) + ff : -1);
                    }
                }
            }
        }
        ad::Value patches =
            ad::reshape(g, ad::gather_rows(g, x, std::move(gather)), {na * ts, 9 * H});
        ad::Value y = model::linear(g, bind, "spa.conv3", patches);

        // per-channel normalization over the grid cells of this scene
        ad::Value mean = ad::mean_rows(g, y);
        ad::Value centered = ad::add_rowvec(g, y, ad::neg(g, mean));
        ad::Value var = ad::mean_rows(g, ad::mul(g, centered, centered));
        ad::Value inv_std = ad::div(g, g.constant(Tensor::full({1, H}, 1.0)),
                                    ad::sqrt_(g, ad::add_const(g, var, 1e-5)));
        ad::Value normed = ad::add_rowvec(
            g, ad::mul_rowvec(g, ad::mul_rowvec(g, centered, inv_std), bind("spa.norm.gamma")),
            bind("spa.norm.beta"));

        if (training && cfg.dropout > 0.0 && dropout_rng) {
            Tensor mask({na * ts, H});
            double keep = 1.0 - cfg.dropout;
            for (double& v : mask.data) v = dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
            normed = ad::mul(g, normed, g.constant(std::move(mask)));
        }

        // frame-mean per agent, then single-head graph attention
        std::vector<ad::Value> agent_rows;
        agent_rows.reserve(na);
        for (std::size_t a = 0; a < na; ++a) {
            agent_rows.push_back(ad::mean_rows(g, ad::slice_rows(g, normed, a * ts, (a + 1) * ts)));
        }
        ad::Value nodes = na == 1 ? agent_rows[0] : ad::concat_rows(g, agent_rows);
        ad::Value wh = ad::matmul(g, nodes, bind("spa.gat.w"));
        ad::Value s1 = ad::matmul(g, wh, bind("spa.gat.a1"));
        ad::Value s2 = ad::matmul(g, wh, bind("spa.gat.a2"));
        ad::Value e = ad::add(g, ad::matmul(g, s1, g.constant(Tensor::full({1, na}, 1.0))),
                              ad::matmul(g, g.constant(Tensor::full({na, 1}, 1.0)),
                                         ad::transpose(g, s2)));
        ad::Value att = ad::softmax(g, ad::leaky_relu(g, e, 0.2));
        return ad::elu(g, ad::add_rowvec(g, ad::matmul(g, att, wh), bind("spa.gat.b")));
    }

    struct FuseOut {
        ad::Value hidden;  // {1, 2*hidden}: fused target-row state I
        ad::Value l_st;    // {1}: temporal-spatial consistency loss
    };

    /// Concatenate the streams, run one pre-norm inverted-attention block
    /// (tokens = feature variates, token content = agent profile), and emit
    /// the target row plus the projection-consistency loss.
    FuseOut fuse(ad::Graph& g, model::Binding& bind, ad::Value o_t, ad::Value o_s) const {
        const Tensor &tt = g.value(o_t), &ts = g.value(o_s);
        if (!tt.same_shape(ts)) {
            throw std::invalid_argument("fuse: extent mismatch " + tt.shape_str() + " vs " +
                                        ts.shape_str());
        }
        std::size_t na = tt.shape[0];
        ad::Value f = ad::concat_cols(g, {o_t, o_s});

        if (cfg.use_fusion) {
            // pre-norm inverted attention across the 2H variates
            ad::Value fn = detail::layer_norm(g, bind, "fuse.ln1", f);
            ad::Value p = ad::transpose(g, fn);  // {2H, n+1}
            ad::Value tgt = ad::slice_cols(g, p, 0, 1);
            ad::Value nbm = na > 1 ? ad::mean_cols(g, ad::slice_cols(g, p, 1, na))
                                   : g.constant(Tensor::zeros({2 * cfg.hidden_dim, 1}));
            ad::Value phi = ad::concat_cols(g, {tgt, nbm});  // {2H, 2}
            ad::Value q = ad::matmul(g, phi, bind("fuse.attn.wq"));
            ad::Value k = ad::matmul(g, phi, bind("fuse.attn.wk"));
            ad::Value scores = ad::scale(g, ad::matmul(g, q, ad::transpose(g, k)),
                                         1.0 / std::sqrt(double(cfg.fuse_key_dim)));
            ad::Value mixed = ad::matmul(g, ad::softmax(g, scores), p);
            f = ad::add(g, f, ad::transpose(g, mixed));

            ad::Value f1n = detail::layer_norm(g, bind, "fuse.ln2", f);
            ad::Value ff = model::linear(
                g, bind, "fuse.ffn2", ad::elu(g, model::linear(g, bind, "fuse.ffn1", f1n)));
            f = ad::add(g, f, ff);
        }

        FuseOut out;
        out.hidden = ad::slice_rows(g, f, 0, 1);
        if (cfg.use_fusion) {
            ad::Value pt = model::linear(g, bind, "fuse.proj_t", o_t);
            ad::Value ps = model::linear(g, bind, "fuse.proj_s", o_s);
            ad::Value d = ad::sub(g, pt, ps);
            out.l_st = ad::mean_all(g, ad::mul(g, d, d));
        } else {
            out.l_st = g.constant(0.0);
        }
        return out;
    }

    struct Forward {
        gmm::DecodeOut decode;
        ad::Value l_st;
        ad::Value o_t;
        ad::Value o_s;
    };

    Forward forward(ad::Graph& g, model::Binding& bind, const SceneInput& in, bool training,
                    Rng* dropout_rng) const {
        Forward fw;
        fw.o_t = temporal_encode(g, bind, in.s_tilde);
        fw.o_s = cfg.use_spatial
                     ? spatial_encode(g, bind, in.m, training, dropout_rng)
                     : g.constant(Tensor::zeros({in.agents(), cfg.hidden_dim}));
        FuseOut fo = fuse(g, bind, fw.o_t, fw.o_s);
        fw.l_st = fo.l_st;
        fw.decode = gmm::decode_multimodal(g, bind, "dec", fo.hidden, cfg.maneuvers, cfg.t_f,
                                           in.anchor);
        return fw;
    }

    /// Inference convenience: dropout off, plain prediction out.
    gmm::MultimodalPrediction predict(const SceneInput& in) const {
        ad::Graph g;
        model::Binding bind(g, params, false);
        Forward fw = forward(g, bind, in, false, nullptr);
        return gmm::extract(g, fw.decode, cfg.maneuvers, cfg.t_f);
    }
};

}  // namespace spikecast::teacher
