// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "spikecast/fasnn.hpp"

using namespace spikecast;
using namespace spikecast::fasnn;

namespace {

FasnnParams make_params(std::size_t in_dim, std::size_t neurons, Rng* rng = nullptr) {
    FasnnParams p;
    p.input_weights = Tensor({in_dim, neurons});
    if (rng) rng->fill_normal(p.input_weights, 0.5);
    p.thresholds = Tensor::full({1, neurons}, 1.0);
    return p;
}

}  // namespace

TEST(Charge, ZeroInputLeavesVoltage) {
    Rng rng(1);
    FasnnParams p = make_params(3, 4, &rng);
    MembraneState st(4);
    rng.fill_normal(st.voltage, 1.0);
    Tensor before = st.voltage;
    charge(st, {0, 0, 0}, p);
    EXPECT_EQ(st.voltage.data, before.data);
}

TEST(Charge, IdentityWeightsBasisVector) {
    FasnnParams p = make_params(4, 4);
    for (std::size_t i = 0; i < 4; ++i) p.input_weights.at(i, i) = 1.0;
    MembraneState st(4);
    charge(st, {0, 0, 1, 0}, p);
    EXPECT_EQ(st.voltage.data, (std::vector<double>{0, 0, 1, 0}));
}

TEST(Charge, MatchesBruteForceMatvec) {
    Rng rng(2);
    FasnnParams p = make_params(5, 7, &rng);
    MembraneState st(7);
    std::vector<double> x(5);
    for (double& v : x) v = rng.normal();
    charge(st, x, p);
    for (std::size_t j = 0; j < 7; ++j) {
        double expect = 0.0;
        for (std::size_t i = 0; i < 5; ++i) expect += x[i] * p.input_weights.at(i, j);
        EXPECT_NEAR(st.voltage[j], expect, 1e-12);
    }
}

TEST(Charge, DimensionMismatchIsError) {
    FasnnParams p = make_params(3, 4);
    MembraneState st(4);
    EXPECT_THROW(charge(st, {1.0, 2.0}, p), std::invalid_argument);
}

TEST(Leak, EquilibriumIsFixedPoint) {
    FasnnParams p = make_params(1, 3);
    p.equilibrium = 0.7;
    MembraneState st(3);
    st.voltage = Tensor::full({3}, 0.7);
    leak(st, p);
    for (double v : st.voltage.data) EXPECT_DOUBLE_EQ(v, 0.7);
}

TEST(Leak, ZeroElapsedTimeLeavesVoltage) {
    FasnnParams p = make_params(1, 2);
    p.dt = 0.0;
    MembraneState st(2);
    st.voltage = Tensor::vec({1.5, -0.3});
    leak(st, p);
    EXPECT_DOUBLE_EQ(st.voltage[0], 1.5);
    EXPECT_DOUBLE_EQ(st.voltage[1], -0.3);
}

TEST(Leak, MatchesFourthOrderIntegration) {
    // dV/dt = -(V - U)/eta integrated by RK4 vs the closed form
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        FasnnParams p = make_params(1, 1);
        p.leak_rate = rng.uniform(0.5, 3.0);
        p.dt = rng.uniform(0.05, 2.0);
        p.equilibrium = rng.uniform(-1.0, 1.0);
        MembraneState st(1);
        double v0 = rng.uniform(-3.0, 3.0);
        st.voltage[0] = v0;
        leak(st, p);
        double expect = oracles::rk4_leak(v0, p.equilibrium, p.leak_rate, p.dt);
        EXPECT_NEAR(st.voltage[0], expect, 1e-8);
    }
    // the spec's worked value
    FasnnParams p = make_params(1, 1);
    MembraneState st(1);
    st.voltage[0] = 1.0;
    leak(st, p);
    EXPECT_NEAR(st.voltage[0], 0.367879, 1e-6);
}

TEST(Leak, ContractionFactorIsExactDecay) {
    Rng rng(4);
    FasnnParams p = make_params(1, 6);
    p.leak_rate = 1.7;
    p.dt = 0.8;
    p.equilibrium = 0.2;
    double decay = std::exp(-p.dt / p.leak_rate);
    MembraneState a(6), b(6);
    rng.fill_normal(a.voltage, 2.0);
    rng.fill_normal(b.voltage, 2.0);
    Tensor va = a.voltage, vb = b.voltage;
    leak(a, p);
    leak(b, p);
    for (std::size_t i = 0; i < 6; ++i) {
        EXPECT_NEAR(std::abs(a.voltage[i] - b.voltage[i]), decay * std::abs(va[i] - vb[i]), 1e-12);
    }
}

TEST(Fire, SupraThresholdSoftReset) {
    FasnnParams p = make_params(1, 1);
    p.thresholds[0] = 0.5;
    MembraneState st(1);
    st.voltage[0] = 0.8;
    fire(st, p);
    EXPECT_NEAR(st.voltage[0], 0.3, 1e-15);
}

TEST(Fire, SubThresholdPassThrough) {
    FasnnParams p = make_params(1, 1);
    p.thresholds[0] = 0.5;
    MembraneState st(1);
    st.voltage[0] = 0.4;
    fire(st, p);
    EXPECT_DOUBLE_EQ(st.voltage[0], 0.4);
}

TEST(Fire, BoundaryUsesLessOrEqualBranch) {
    FasnnParams p = make_params(1, 1);
    p.thresholds[0] = 0.5;
    MembraneState st(1);
    st.voltage[0] = 0.5;
    fire(st, p);
    EXPECT_DOUBLE_EQ(st.voltage[0], 0.5);
}

TEST(Fire, NeverIncreasesVoltageAndRecordsHistory) {
    Rng rng(5);
    FasnnParams p = make_params(1, 8);
    rng.fill_uniform(p.thresholds, 0.2, 2.0);
    MembraneState st(8);
    for (int step = 0; step < 5; ++step) {
        rng.fill_normal(st.voltage, 2.0);
        Tensor before = st.voltage;
        fire(st, p);
        for (std::size_t i = 0; i < 8; ++i) {
            EXPECT_LE(st.voltage[i], before[i]);
            EXPECT_LE(st.voltage[i], std::max(before[i], p.thresholds[i]));
        }
    }
    EXPECT_EQ(st.step, 5u);
    EXPECT_EQ(st.voltage_history.shape[0], 5u);
}

TEST(Surrogate, PaperConstantsAtThreshold) {
    FasnnParams p = make_params(1, 1);  // w_g = 0.5, s = 1.0
    EXPECT_DOUBLE_EQ(surrogate_grad(1.0, 1.0, p), 2.0);
}

TEST(Surrogate, UnitDistance) {
    FasnnParams p = make_params(1, 1);
    double u0 = 0.8, wa = u0 * p.grad_width;
    EXPECT_DOUBLE_EQ(surrogate_grad(u0 + wa, u0, p), (p.grad_scale / wa) * std::exp(-1.0));
}

TEST(Surrogate, ExponentialDecayFarFromThreshold) {
    FasnnParams p = make_params(1, 1);
    double u0 = 1.0, wa = u0 * p.grad_width;
    EXPECT_LT(surrogate_grad(u0 + 20.0 * wa, u0, p), 1e-8 * (p.grad_scale / wa));
}

TEST(Surrogate, SymmetricAboutThreshold) {
    Rng rng(6);
    FasnnParams p = make_params(1, 1);
    for (int trial = 0; trial < 20; ++trial) {
        double u0 = rng.uniform(0.1, 2.0);
        double vp = u0 + rng.uniform(0.0, 3.0);
        double vm = u0 - (vp - u0);  // exact mirror of the realized offset
        EXPECT_EQ(surrogate_grad(vp, u0, p), surrogate_grad(vm, u0, p));
    }
}

TEST(Surrogate, NonPositiveThresholdIsDomainError) {
    FasnnParams p = make_params(1, 1);
    EXPECT_THROW(surrogate_grad(0.5, 0.0, p), std::domain_error);
    EXPECT_THROW(surrogate_grad(0.5, -1.0, p), std::domain_error);
}

TEST(Spectrum, ConstantSequenceConcentratesAtZeroFrequency) {
    std::size_t n = 6;
    double c = 0.8;
    MembraneState st(1);
    FasnnParams p = make_params(1, 1);
    p.thresholds[0] = 100.0;  // never fires
    for (std::size_t i = 0; i < n; ++i) {
        st.voltage[0] = c;
        fire(st, p);
    }
    SpectralFeatures w = spectral_features(st);
    EXPECT_NEAR(w.w.at(0, 0), (double(n) * c) * (double(n) * c), 1e-9);
    for (std::size_t k = 1; k < n; ++k) EXPECT_NEAR(w.w.at(0, k), 0.0, 1e-9);
}

TEST(Spectrum, SingleStepHistory) {
    MembraneState st(1);
    FasnnParams p = make_params(1, 1);
    p.thresholds[0] = 100.0;
    st.voltage[0] = -1.3;
    fire(st, p);
    SpectralFeatures w = spectral_features(st);
    ASSERT_EQ(w.w.numel(), 1u);
    EXPECT_NEAR(w.w[0], 1.3 * 1.3, 1e-12);
}

TEST(Spectrum, MatchesDirectDftOracle) {
    Rng rng(7);
    for (std::size_t n : {8u, 16u}) {
        std::vector<double> seq(n);
        for (double& v : seq) v = rng.normal();
        MembraneState st(1);
        st.step = n;
        st.voltage_history = Tensor({n, 1}, seq);
        SpectralFeatures w = spectral_features(st);
        auto f = oracles::direct_dft(seq);
        for (std::size_t k = 0; k < n; ++k) {
            double expect = std::abs(f[k].real()) + std::abs(f[k].imag());
            expect *= expect;
            EXPECT_NEAR(w.w.at(0, k), expect, 1e-9);
        }
    }
}

TEST(Spectrum, ParsevalOnTransformParts) {
    Rng rng(8);
    for (std::size_t n : {8u, 16u}) {
        std::vector<double> seq(n);
        for (double& v : seq) v = rng.normal();
        auto f = dft_bins(seq.data(), n);
        double lhs = 0.0, rhs = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            lhs += f[k].real() * f[k].real() + f[k].imag() * f[k].imag();
        }
        for (double v : seq) rhs += v * v;
        EXPECT_NEAR(lhs, double(n) * rhs, 1e-9);
    }
}

TEST(Spectrum, EmptyHistoryIsStateError) {
    MembraneState st(2);
    EXPECT_THROW(spectral_features(st), std::logic_error);
}

TEST(ForwardPass, QuiescentNetwork) {
    FasnnParams p = make_params(3, 4);
    ForwardResult r = fasnn_forward(Tensor({5, 3}), p);
    for (double v : r.voltage_history.data) EXPECT_EQ(v, 0.0);
    for (double v : r.features.data) EXPECT_EQ(v, 0.0);
}

TEST(ForwardPass, ImpulseDecaysGeometrically) {
    // single neuron, identity weight, impulse at frame 0, threshold never hit
    FasnnParams p = make_params(1, 1);
    p.input_weights.at(0, 0) = 1.0;
    p.thresholds[0] = 10.0;
    Tensor seq({6, 1});
    seq.at(0, 0) = 1.0;
    ForwardResult r = fasnn_forward(seq, p);
    // closed-form iteration of the leak map: V(n) = e^{-(n+1)}
    for (std::size_t n = 0; n < 6; ++n) {
        EXPECT_NEAR(r.voltage_history.at(n, 0), std::exp(-double(n + 1)), 1e-12);
    }
}

TEST(ForwardPass, FeatureLayoutIsSpectrumThenFinalVoltage) {
    Rng rng(9);
    FasnnParams p = make_params(4, 3, &rng);
    Tensor seq({5, 4});
    rng.fill_normal(seq, 1.0);
    ForwardResult r = fasnn_forward(seq, p);
    ASSERT_EQ(r.features.numel(), 3u * 6u);
    for (std::size_t i = 0; i < r.spectrum.w.numel(); ++i) {
        EXPECT_EQ(r.features[i], r.spectrum.w[i]);
    }
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_EQ(r.features[15 + j], r.voltage_history.at(4, j));
    }
    for (std::size_t i = 0; i < r.spectrum.w.numel(); ++i) EXPECT_GE(r.spectrum.w[i], 0.0);
}

TEST(GraphForward, MatchesPlainForward) {
    Rng rng(10);
    FasnnParams p = make_params(4, 5, &rng);
    Tensor seq({7, 4});
    rng.fill_normal(seq, 1.0);
    ForwardResult plain = fasnn_forward(seq, p);

    ad::Graph g;
    Tensor w = p.input_weights;
    Tensor u0 = p.thresholds;
    ad::Value vw = g.input(w), vu = g.input(u0);
    GraphResult gr = fasnn_forward_graph(g, vw, vu, seq, GraphOptions{});
    EXPECT_LT(max_abs_diff(g.value(gr.history), plain.voltage_history), 1e-12);
    const Tensor& feats = g.value(gr.features);
    ASSERT_EQ(feats.numel(), plain.features.numel());
    for (std::size_t i = 0; i < feats.numel(); ++i) {
        EXPECT_NEAR(feats[i], plain.features[i], 1e-12);
    }
}

TEST(GraphForward, SmoothPiecesPassGradCheck) {
    // charge + leak only (no firing): exact gradients, FD-checkable
    Rng rng(11);
    Tensor w({3, 4});
    rng.fill_normal(w, 0.5);
    Tensor seq({4, 3});
    rng.fill_normal(seq, 1.0);
    auto build = [&](ad::Graph& g, const std::vector<ad::Value>& v) {
        double decay = std::exp(-1.0);
        ad::Value volt = g.constant(Tensor::zeros({1, 4}));
        for (std::size_t t = 0; t < 4; ++t) {
            Tensor frame({1, 3});
            for (std::size_t i = 0; i < 3; ++i) frame[i] = seq.at(t, i);
            volt = ad::add(g, volt, ad::matmul(g, g.constant(std::move(frame)), v[0]));
            volt = ad::scale(g, volt, decay);
        }
        return ad::sum_all(g, ad::mul(g, volt, volt));
    };
    auto rep = ad::grad_check("charge_leak", build, {w}, 1e-4, 1e-5);
    EXPECT_TRUE(rep.passed) << rep.max_rel_err;
}

TEST(GraphForward, WeightGradientIsFiniteThroughFiring) {
    Rng rng(12);
    Tensor w({4, 6});
    rng.fill_normal(w, 0.6);
    w.requires_grad = true;
    Tensor u0 = Tensor::full({1, 6}, 1.0);
    u0.requires_grad = true;
    Tensor seq({8, 4});
    rng.fill_normal(seq, 1.0);

    ad::Graph g;
    ad::Value vw = g.input(w), vu = g.input(u0);
    GraphResult gr = fasnn_forward_graph(g, vw, vu, seq, GraphOptions{});
    ad::Value loss = ad::sum_all(g, ad::mul(g, gr.features, gr.features));
    g.backward(loss);
    const Tensor& gw = g.grad(vw);
    const Tensor& gu = g.grad(vu);
    EXPECT_TRUE(gw.all_finite());
    EXPECT_TRUE(gu.all_finite());
    double mag = 0.0;
    for (double v : gw.data) mag += std::abs(v);
    EXPECT_GT(mag, 0.0);
}

TEST(GraphForward, DeterministicGivenInputs) {
    Rng rng(13);
    Tensor w({4, 5}), u0 = Tensor::full({1, 5}, 0.9), seq({6, 4});
    rng.fill_normal(w, 0.5);
    rng.fill_normal(seq, 1.0);
    auto run = [&]() {
        ad::Graph g;
        GraphResult r = fasnn_forward_graph(g, g.input(w), g.input(u0), seq, GraphOptions{});
        return g.value(r.features).data;
    };
    EXPECT_EQ(run(), run());
}

TEST(GraphForward, RawSeriesModeMatchesHistory) {
    Rng rng(14);
    Tensor w({3, 4}), u0 = Tensor::full({1, 4}, 1.0), seq({5, 3});
    rng.fill_normal(w, 0.5);
    rng.fill_normal(seq, 1.0);
    GraphOptions opt;
    opt.fourier_features = false;
    ad::Graph g;
    GraphResult r = fasnn_forward_graph(g, g.input(w), g.input(u0), seq, opt);
    const Tensor& feats = g.value(r.features);
    const Tensor& hist = g.value(r.history);
    ASSERT_EQ(feats.numel(), 4u * 6u);
    // neuron-major raw voltages in place of the spectrum
    for (std::size_t n = 0; n < 4; ++n) {
        for (std::size_t t = 0; t < 5; ++t) {
            EXPECT_EQ(feats[n * 5 + t], hist.at(t, n));
        }
    }
}
