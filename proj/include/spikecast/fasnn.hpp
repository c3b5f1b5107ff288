// SPDX-License-Identifier: Apache-2.0
#pragma once

// Fourier-adaptive spiking layer. Forward runs charge -> leak -> fire per
// input frame; the post-firing voltage series then yields per-neuron power
// spectrum features. Firing is discontinuous, so its backward rule is the
// exponential surrogate; charge and leak are affine and use exact gradients.

#include <cmath>
#include <complex>
#include <memory>
#include <stdexcept>
#include <vector>

#include "spikecast/autodiff.hpp"
#include "spikecast/tensor.hpp"

namespace spikecast::fasnn {

struct FasnnParams {
    Tensor input_weights;      // in_dim x neurons
    Tensor thresholds;         // 1 x neurons, learnable, > 0 elementwise
    double leak_rate = 1.0;    // eta
    double equilibrium = 0.0;  // U
    double dt = 1.0;           // one step per input frame
    double grad_width = 0.5;   // w_g
    double grad_scale = 1.0;   // s

    std::size_t in_dim() const { return input_weights.rank() == 2 ? input_weights.shape[0] : 0; }
    std::size_t neurons() const { return thresholds.numel(); }

    void validate() const {
        if (input_weights.rank() != 2 || thresholds.numel() != input_weights.shape[1]) {
            throw std::invalid_argument("FasnnParams: weight/threshold extent mismatch");
        }
        if (leak_rate <= 0.0) throw std::invalid_argument("FasnnParams: leak_rate must be > 0");
        if (dt <= 0.0) throw std::invalid_argument("FasnnParams: dt must be > 0");
        for (double u : thresholds.data) {
            if (u <= 0.0) throw std::domain_error("FasnnParams: thresholds must stay > 0");
        }
    }
};

struct MembraneState {
    Tensor voltage;          // {neurons}
    std::size_t step = 0;
    Tensor voltage_history;  // {steps, neurons}, post-firing values

    explicit MembraneState(std::size_t neurons)
        : voltage(Tensor::zeros({neurons})), voltage_history({0, neurons}) {}

    std::size_t neurons() const { return voltage.numel(); }
};

/// Per-neuron power spectrum, W[n][k] = (|A| + |B|)^2; bins == steps.
struct SpectralFeatures {
    Tensor w;  // {neurons, bins}
};

// ---------------------------------------------------------------------------
// The three LIF processes (plain, stateful form)
// ---------------------------------------------------------------------------

inline void charge(MembraneState& st, const std::vector<double>& input_frame,
                   const FasnnParams& p) {
    if (input_frame.size() != p.in_dim() || st.neurons() != p.neurons()) {
        throw std::invalid_argument("charge: dimension mismatch");
    }
    std::size_t nn = p.neurons();
    for (std::size_t i = 0; i < input_frame.size(); ++i) {
        double x = input_frame[i];
        if (x == 0.0) continue;
        const double* wrow = &p.input_weights.data[i * nn];
        for (std::size_t j = 0; j < nn; ++j) st.voltage[j] += x * wrow[j];
    }
}

/// V <- e^(-dt/eta) (V - U) + U, the exact solution of the leak ODE.
inline void leak(MembraneState& st, const FasnnParams& p) {
    double decay = std::exp(-p.dt / p.leak_rate);
    for (double& v : st.voltage.data) v = decay * (v - p.equilibrium) + p.equilibrium;
}

/// Soft reset: subtract the threshold when exceeded, pass through otherwise.
/// The post-firing voltage is both the carried state and the emitted signal.
inline void fire(MembraneState& st, const FasnnParams& p) {
    std::size_t nn = st.neurons();
    for (std::size_t j = 0; j < nn; ++j) {
        double u0 = p.thresholds[j];
        if (st.voltage[j] > u0) st.voltage[j] -= u0;
    }
    std::size_t r = st.voltage_history.shape[0];
    st.voltage_history.shape[0] = r + 1;
    st.voltage_history.data.insert(st.voltage_history.data.end(), st.voltage.data.begin(),
                                   st.voltage.data.end());
    ++st.step;
}

/// Surrogate firing gradient G = (s / w_a) exp(-|v' - u0| / w_a), w_a = u0 w_g.
/// Replaces the discontinuous true derivative with respect to V; negated for
/// the threshold.
inline double surrogate_grad(double v_prime, double u0, const FasnnParams& p) {
    if (u0 <= 0.0) throw std::domain_error("surrogate_grad: threshold must be > 0");
    double wa = u0 * p.grad_width;
    return (p.grad_scale / wa) * std::exp(-std::abs(v_prime - u0) / wa);
}

// ---------------------------------------------------------------------------
// Spectrum
// ---------------------------------------------------------------------------

/// DFT of one real series: F[k] = sum_tau v[tau] e^(-2 pi i k tau / n).
inline std::vector<std::complex<double>> dft_bins(const double* seq, std::size_t n,
                                                  std::size_t stride = 1) {
    std::vector<std::complex<double>> f(n);
    double theta = 2.0 * M_PI / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
        double re = 0.0, im = 0.0;
        for (std::size_t tau = 0; tau < n; ++tau) {
            double ang = theta * static_cast<double>(k) * static_cast<double>(tau);
            double v = seq[tau * stride];
            re += v * std::cos(ang);
            im -= v * std::sin(ang);
        }
        f[k] = {re, im};
    }
    return f;
}

inline SpectralFeatures spectral_features(const MembraneState& st) {
    if (st.step == 0) throw std::logic_error("spectral_features: empty voltage history");
    std::size_t steps = st.step, nn = st.neurons();
    SpectralFeatures out;
    out.w = Tensor({nn, steps});
    for (std::size_t n = 0; n < nn; ++n) {
        auto f = dft_bins(&st.voltage_history.data[n], steps, nn);
        for (std::size_t k = 0; k < steps; ++k) {
            double s = std::abs(f[k].real()) + std::abs(f[k].imag());
            out.w.at(n, k) = s * s;
        }
    }
    return out;
}

struct ForwardResult {
    SpectralFeatures spectrum;
    Tensor voltage_history;  // {steps, neurons}
    Tensor features;         // {neurons * (steps + 1)}: W flattened then final V'
};

/// Full plain forward over a frame sequence; the emitted feature vector is
/// the flattened power spectrum concatenated with the final step's voltages.
inline ForwardResult fasnn_forward(const Tensor& sequence, const FasnnParams& p) {
    if (sequence.rank() != 2 || sequence.shape[1] != p.in_dim()) {
        throw std::invalid_argument("fasnn_forward: sequence must be T x in_dim");
    }
    std::size_t T = sequence.shape[0];
    if (T < 1) throw std::invalid_argument("fasnn_forward: empty sequence");
    MembraneState st(p.neurons());
    std::vector<double> frame(p.in_dim());
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t i = 0; i < frame.size(); ++i) frame[i] = sequence.at(t, i);
        charge(st, frame, p);
        leak(st, p);
        fire(st, p);
    }
    ForwardResult r;
    r.spectrum = spectral_features(st);
    r.voltage_history = st.voltage_history;
    r.features = Tensor({p.neurons() * (T + 1)});
    std::copy(r.spectrum.w.data.begin(), r.spectrum.w.data.end(), r.features.data.begin());
    for (std::size_t j = 0; j < p.neurons(); ++j) {
        r.features[p.neurons() * T + j] = st.voltage[j];
    }
    return r;
}

// ---------------------------------------------------------------------------
// Differentiable primitives
// ---------------------------------------------------------------------------

/// Firing nonlinearity as a tape op. dV' / dV := G and dV' / dU0 := -G, the
/// registered surrogate rule.
inline ad::Value snn_fire(ad::Graph& g, ad::Value v, ad::Value u0, double w_g, double s) {
    const Tensor &tv = g.value(v), &tu = g.value(u0);
    ad::detail::require_same_shape("snn_fire", tv, tu);
    for (double u : tu.data) {
        if (u <= 0.0) throw std::domain_error("snn_fire: threshold must be > 0");
    }
    Tensor out = tv;
    for (std::size_t i = 0; i < out.numel(); ++i) {
        if (out[i] > tu[i]) out[i] -= tu[i];
    }
    return g.make("snn_fire", {v.id, u0.id}, std::move(out),
                  [w_g, s](ad::Graph& g, std::int32_t id) {
                      const auto& n = g.node(id);
                      const Tensor& tu = g.val(n.in[1]);
                      double* gv = g.gptr(n.in[0]);
                      double* gu = g.gptr(n.in[1]);
                      for (std::size_t i = 0; i < n.grad.numel(); ++i) {
                          double wa = tu[i] * w_g;
                          double G = (s / wa) * std::exp(-std::abs(n.value[i] - tu[i]) / wa);
                          if (gv) gv[i] += n.grad[i] * G;
                          if (gu) gu[i] -= n.grad[i] * G;
                      }
                  });
}

/// Power spectrum of each neuron's voltage series as a tape op.
/// Input {steps, neurons} -> output {neurons, steps}.
inline ad::Value dft_power(ad::Graph& g, ad::Value history) {
    const Tensor& th = g.value(history);
    ad::detail::require(th.rank() == 2 && th.shape[0] >= 1, "dft_power",
                        "history must be non-empty rank 2");
    std::size_t steps = th.shape[0], nn = th.shape[1];
    Tensor out({nn, steps});
    // saved transform parts for the backward sweep
    auto A = std::make_shared<std::vector<double>>(nn * steps);
    auto B = std::make_shared<std::vector<double>>(nn * steps);
    for (std::size_t n = 0; n < nn; ++n) {
        auto f = dft_bins(&th.data[n], steps, nn);
        for (std::size_t k = 0; k < steps; ++k) {
            (*A)[n * steps + k] = f[k].real();
            (*B)[n * steps + k] = f[k].imag();
            double sum = std::abs(f[k].real()) + std::abs(f[k].imag());
            out.at(n, k) = sum * sum;
        }
    }
    auto sgn = [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); };
    return g.make("dft_power", {history.id}, std::move(out),
                  [A, B, steps, nn, sgn](ad::Graph& g, std::int32_t id) {
                      const auto& node = g.node(id);
                      double* gh = g.gptr(node.in[0]);
                      if (!gh) return;
                      double theta = 2.0 * M_PI / static_cast<double>(steps);
                      for (std::size_t n = 0; n < nn; ++n) {
                          for (std::size_t k = 0; k < steps; ++k) {
                              double gw = node.grad.data[n * steps + k];
                              if (gw == 0.0) continue;
                              double a = (*A)[n * steps + k], b = (*B)[n * steps + k];
                              double mag = std::abs(a) + std::abs(b);
                              double common = 2.0 * mag * gw;
                              for (std::size_t tau = 0; tau < steps; ++tau) {
                                  double ang = theta * static_cast<double>(k) *
                                               static_cast<double>(tau);
                                  gh[tau * nn + n] += common * (sgn(a) * std::cos(ang) -
                                                                sgn(b) * std::sin(ang));
                              }
                          }
                      }
                  });
}

struct GraphOptions {
    double leak_rate = 1.0;
    double equilibrium = 0.0;
    double dt = 1.0;
    double grad_width = 0.5;
    double grad_scale = 1.0;
    bool fourier_features = true;  // FT: power spectrum vs raw voltage history
};

struct GraphResult {
    ad::Value features;  // {1, neurons * (steps + 1)}
    ad::Value history;   // {steps, neurons}
};

/// Differentiable forward over a constant frame sequence. `weights` and `u0`
/// are tape leaves so gradients reach them; threshold adaptivity is decided
/// by whether `u0` requires grad.
inline GraphResult fasnn_forward_graph(ad::Graph& g, ad::Value weights, ad::Value u0,
                                       const Tensor& sequence, const GraphOptions& opt) {
    const Tensor& wt = g.value(weights);
    ad::detail::require(sequence.rank() == 2 && sequence.shape[1] == wt.shape[0],
                        "fasnn_forward_graph", "sequence extent mismatch");
    std::size_t T = sequence.shape[0];
    std::size_t nn = wt.shape[1];
    double decay = std::exp(-opt.dt / opt.leak_rate);

    ad::Value v = g.constant(Tensor::zeros({1, nn}));
    std::vector<ad::Value> emitted;
    emitted.reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
        Tensor frame({1, sequence.shape[1]});
        for (std::size_t i = 0; i < frame.numel(); ++i) frame[i] = sequence.at(t, i);
        ad::Value x = g.constant(std::move(frame));
        v = ad::add(g, v, ad::matmul(g, x, weights));                      // charge
        v = ad::add_const(g, ad::scale(g, ad::add_const(g, v, -opt.equilibrium), decay),
                          opt.equilibrium);                                // leak
        v = snn_fire(g, v, u0, opt.grad_width, opt.grad_scale);            // fire
        emitted.push_back(v);
    }
    GraphResult r;
    r.history = ad::concat_rows(g, emitted);
    ad::Value spectral = opt.fourier_features
                             ? dft_power(g, r.history)
                             : ad::transpose(g, r.history);  // raw series, neuron-major
    ad::Value flat = ad::reshape(g, spectral, {1, nn * T});
    r.features = ad::concat_cols(g, {flat, emitted.back()});
    return r;
}

}  // namespace spikecast::fasnn
