// SPDX-License-Identifier: Apache-2.0
#pragma once

// Training objectives. Each loss exists once, as a tape builder; the plain
// scalar entry points evaluate the same builder on a throwaway graph so the
// formula has a single source.

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "spikecast/autodiff.hpp"
#include "spikecast/decoder.hpp"
#include "spikecast/tensor.hpp"

namespace spikecast::losses {

/// The four learnable homoscedastic uncertainties, stored as log-variances so
/// sigma = exp(log_var / 2) stays positive by construction.
/// Order: trajectory, maneuver, student-level, distillation-level.
struct KdmState {
    Tensor log_vars = Tensor::zeros({4});

    double sigma(std::size_t i) const { return std::exp(log_vars[i] / 2.0); }
    double sigma_t() const { return sigma(0); }
    double sigma_m() const { return sigma(1); }
    double sigma_s() const { return sigma(2); }
    double sigma_d() const { return sigma(3); }
};

struct LossBundle {
    double traj = 0.0;
    double man = 0.0;
    double dis_traj = 0.0;
    double dis_man = 0.0;
    double st = 0.0;
    double total = 0.0;
};

// ---------------------------------------------------------------------------
// Tape builders
// ---------------------------------------------------------------------------

/// Mean squared difference of two same-shape values.
inline ad::Value mse_graph(ad::Graph& g, ad::Value a, ad::Value b) {
    ad::Value d = ad::sub(g, a, b);
    return ad::mean_all(g, ad::mul(g, d, d));
}

/// Negative log-likelihood of the ground-truth future under one mode's
/// bivariate Gaussians, summed over the horizon.
/// `traj_mat` is the decoder output {5, C*T_f}; `gt` is {T_f, 2}.
inline ad::Value nll_bivariate_graph(ad::Graph& g, ad::Value traj_mat, const Tensor& gt,
                                     std::size_t maneuver, std::size_t C, std::size_t t_f) {
    if (gt.rank() != 2 || gt.shape[0] != t_f || gt.shape[1] != 2) {
        throw std::invalid_argument("nll_bivariate: ground truth must be T_f x 2");
    }
    if (maneuver >= C) throw std::invalid_argument("nll_bivariate: maneuver index out of range");
    ad::Value block = ad::slice_cols(g, traj_mat, maneuver * t_f, (maneuver + 1) * t_f);
    auto channel = [&](std::size_t k) {
        return ad::reshape(g, ad::slice_rows(g, block, k, k + 1), {t_f});
    };
    ad::Value mu_x = channel(0), mu_y = channel(1);
    ad::Value sig_x = channel(2), sig_y = channel(3), rho = channel(4);

    Tensor gx({t_f}), gy({t_f});
    for (std::size_t t = 0; t < t_f; ++t) {
        gx[t] = gt.at(t, 0);
        gy[t] = gt.at(t, 1);
    }
    ad::Value u = ad::div(g, ad::sub(g, g.constant(std::move(gx)), mu_x), sig_x);
    ad::Value v = ad::div(g, ad::sub(g, g.constant(std::move(gy)), mu_y), sig_y);
    ad::Value z = ad::sub(g, ad::add(g, ad::mul(g, u, u), ad::mul(g, v, v)),
                          ad::scale(g, ad::mul(g, rho, ad::mul(g, u, v)), 2.0));
    ad::Value omr = ad::add_const(g, ad::neg(g, ad::mul(g, rho, rho)), 1.0);  // 1 - rho^2
    ad::Value per_frame = ad::add_const(
        g,
        ad::add(g, ad::add(g, ad::log_(g, sig_x), ad::log_(g, sig_y)),
                ad::add(g, ad::scale(g, ad::log_(g, omr), 0.5), ad::div(g, z, ad::scale(g, omr, 2.0)))),
        std::log(2.0 * M_PI));
    return ad::sum_all(g, per_frame);
}

/// MSE between the maneuver probability vector and a one-hot target.
inline ad::Value maneuver_mse_graph(ad::Graph& g, ad::Value probs, const Tensor& onehot) {
    const Tensor& tp = g.value(probs);
    if (tp.numel() != onehot.numel()) {
        throw std::invalid_argument("maneuver_mse: length mismatch");
    }
    ad::Value flat = ad::reshape(g, probs, {tp.numel()});
    return mse_graph(g, flat, g.constant(onehot.reshaped({onehot.numel()})));
}

/// Two-level KDM total:
///   (1/2s^2)[(1/2t^2) L_stu_traj + (1/2m^2) L_stu_man]
/// + (1/2d^2)[(1/2t^2) L_dis_traj + (1/2m^2) L_dis_man]
/// + log(sigma_t sigma_m sigma_s sigma_d)
inline ad::Value kdm_total_graph(ad::Graph& g, ad::Value log_vars, ad::Value stu_traj,
                                 ad::Value stu_man, ad::Value dis_traj, ad::Value dis_man) {
    auto weight = [&](std::size_t i) {
        // 1 / (2 sigma_i^2) = exp(-log_var_i) / 2
        ad::Value lv = ad::slice_flat(g, log_vars, i, 1);
        return ad::scale(g, ad::exp_(g, ad::neg(g, lv)), 0.5);
    };
    ad::Value wt = weight(0), wm = weight(1), ws = weight(2), wd = weight(3);
    ad::Value stu = ad::add(g, ad::mul(g, wt, stu_traj), ad::mul(g, wm, stu_man));
    ad::Value dis = ad::add(g, ad::mul(g, wt, dis_traj), ad::mul(g, wm, dis_man));
    ad::Value weighted = ad::add(g, ad::mul(g, ws, stu), ad::mul(g, wd, dis));
    // log prod sigma = sum(log_var) / 2
    ad::Value reg = ad::scale(g, ad::sum_all(g, log_vars), 0.5);
    return ad::add(g, weighted, reg);
}

// ---------------------------------------------------------------------------
// Plain entry points (thin wrappers over the builders)
// ---------------------------------------------------------------------------

namespace detail {

inline ad::Value traj_mat_const(ad::Graph& g, const gmm::MultimodalPrediction& p) {
    std::size_t C = p.modes(), t_f = p.horizon();
    Tensor tm({5, C * t_f});
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t t = 0; t < t_f; ++t) {
            for (std::size_t k = 0; k < 5; ++k) tm.at(k, c * t_f + t) = p.traj.at(c, t, k);
        }
    }
    return g.constant(std::move(tm));
}

}  // namespace detail

inline double nll_bivariate(const gmm::MultimodalPrediction& pred, const Tensor& gt,
                            std::size_t maneuver_index) {
    ad::Graph g;
    ad::Value v = nll_bivariate_graph(g, detail::traj_mat_const(g, pred), gt, maneuver_index,
                                      pred.modes(), pred.horizon());
    return g.value(v)[0];
}

inline double maneuver_mse(const Tensor& pred_probs, const Tensor& gt_onehot) {
    ad::Graph g;
    ad::Value v = maneuver_mse_graph(g, g.constant(pred_probs), gt_onehot);
    return g.value(v)[0];
}

/// Teacher total, Eq-style unweighted sum of its three parts.
inline double teacher_total(double traj, double man, double st) {
    if (!std::isfinite(traj) || !std::isfinite(man) || !std::isfinite(st)) {
        throw std::invalid_argument("teacher_total: non-finite component");
    }
    return traj + man + st;
}

/// MSE between student and teacher outputs (trajectory parameters, maneuver
/// probabilities). Teacher outputs enter as constants: no gradient reaches
/// the teacher.
inline std::pair<double, double> distill_losses(const gmm::MultimodalPrediction& student,
                                                const gmm::MultimodalPrediction& teacher) {
    if (student.modes() != teacher.modes() || student.horizon() != teacher.horizon()) {
        throw std::invalid_argument("distill_losses: prediction contracts differ");
    }
    ad::Graph g;
    ad::Value dt = mse_graph(g, detail::traj_mat_const(g, student), detail::traj_mat_const(g, teacher));
    ad::Value dm = mse_graph(g, g.constant(student.maneuver_probs), g.constant(teacher.maneuver_probs));
    return {g.value(dt)[0], g.value(dm)[0]};
}

inline double kdm_total(double stu_traj, double stu_man, double dis_traj, double dis_man,
                        const KdmState& kdm) {
    for (double c : {stu_traj, stu_man, dis_traj, dis_man}) {
        if (!std::isfinite(c)) throw std::invalid_argument("kdm_total: non-finite component");
    }
    ad::Graph g;
    ad::Value v = kdm_total_graph(g, g.constant(kdm.log_vars), g.constant(stu_traj),
                                  g.constant(stu_man), g.constant(dis_traj), g.constant(dis_man));
    return g.value(v)[0];
}

}  // namespace spikecast::losses
