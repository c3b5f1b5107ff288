// SPDX-License-Identifier: Apache-2.0
#pragma once

// Training machinery: Adam with bias correction, cosine annealing with warm
// restarts, the teacher-then-student procedure with KDM, versioned binary
// checkpoints, and per-step metrics. Batches evaluate per-sample graphs in
// parallel but always reduce gradients in sample order, so results are
// bit-identical for any worker count.

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "spikecast/data.hpp"
#include "spikecast/losses.hpp"
#include "spikecast/model.hpp"
#include "spikecast/student.hpp"
#include "spikecast/teacher.hpp"
#include "spikecast/threads.hpp"

namespace spikecast::train {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t step = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;

    void init(const model::ParamSet& p) {
        m.clear();
        v.clear();
        for (std::size_t i = 0; i < p.size(); ++i) {
            m.push_back(Tensor::zeros(p.value(i).shape));
            v.push_back(Tensor::zeros(p.value(i).shape));
        }
        step = 0;
    }
};

/// One bias-corrected Adam update from the grads accumulated in `p`.
inline void adam_step(model::ParamSet& p, AdamState& st, double lr) {
    if (st.m.size() != p.size()) throw std::invalid_argument("adam_step: state/param mismatch");
    ++st.step;
    double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (std::size_t i = 0; i < p.size(); ++i) {
        Tensor& theta = p.value(i);
        Tensor& g = p.grad(i);
        if (!theta.same_shape(g)) throw std::invalid_argument("adam_step: grad shape mismatch");
        for (std::size_t k = 0; k < theta.numel(); ++k) {
            st.m[i][k] = st.beta1 * st.m[i][k] + (1.0 - st.beta1) * g[k];
            st.v[i][k] = st.beta2 * st.v[i][k] + (1.0 - st.beta2) * g[k] * g[k];
            double mhat = st.m[i][k] / bc1;
            double vhat = st.v[i][k] / bc2;
            theta[k] -= lr * mhat / (std::sqrt(vhat) + st.eps);
        }
    }
}

// ---------------------------------------------------------------------------
// Learning-rate schedule
// ---------------------------------------------------------------------------

struct ScheduleConfig {
    double lr_max = 1e-3;
    double lr_min = 1e-5;
    double restart_period = 25.0;  // T_i, in epochs
    double restart_mult = 2.0;

    void validate() const {
        if (!(lr_min < lr_max)) throw std::invalid_argument("ScheduleConfig: lr_min >= lr_max");
        if (restart_period < 1.0 || restart_mult < 1.0) {
            throw std::invalid_argument("ScheduleConfig: period must be >= 1, mult >= 1");
        }
    }
};

/// Cosine within one cycle: fraction 0 -> lr_max, fraction 1 -> lr_min.
inline double lr_at(double epoch_fraction, const ScheduleConfig& cfg) {
    return cfg.lr_min + 0.5 * (cfg.lr_max - cfg.lr_min) * (1.0 + std::cos(M_PI * epoch_fraction));
}

/// Resolve warm restarts: position `epoch` (fractional) in the cycle ladder.
inline double schedule_lr(double epoch, const ScheduleConfig& cfg) {
    cfg.validate();
    double t = cfg.restart_period;
    double e = epoch;
    while (e >= t) {
        e -= t;
        t *= cfg.restart_mult;
    }
    return lr_at(e / t, cfg);
}

// ---------------------------------------------------------------------------
// Gradient clipping
// ---------------------------------------------------------------------------

inline double grad_global_norm(const std::vector<model::ParamSet*>& sets) {
    double acc = 0.0;
    for (model::ParamSet* p : sets) {
        for (std::size_t i = 0; i < p->size(); ++i) {
            for (double v : p->grad(i).data) acc += v * v;
        }
    }
    return std::sqrt(acc);
}

inline void clip_grads(const std::vector<model::ParamSet*>& sets, double max_norm) {
    double n = grad_global_norm(sets);
    if (n <= max_norm || n == 0.0) return;
    double s = max_norm / n;
    for (model::ParamSet* p : sets) {
        for (std::size_t i = 0; i < p->size(); ++i) {
            for (double& v : p->grad(i).data) v *= s;
        }
    }
}

// ---------------------------------------------------------------------------
// Checkpoints: magic "HLTP", u32 version, config digest, then length-prefixed
// named blocks of little-endian f64.
// ---------------------------------------------------------------------------

struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;
    std::string digest;
    std::vector<std::pair<std::string, Tensor>> blocks;

    void add(const std::string& name, const Tensor& t) { blocks.emplace_back(name, t); }

    const Tensor* find(const std::string& name) const {
        for (const auto& [n, t] : blocks) {
            if (n == name) return &t;
        }
        return nullptr;
    }

    const Tensor& require(const std::string& name) const {
        const Tensor* t = find(name);
        if (!t) throw std::runtime_error("Checkpoint: missing block " + name);
        return *t;
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("Checkpoint: cannot open " + path);
        out.write("HLTP", 4);
        write_u32(out, kVersion);
        write_u32(out, static_cast<std::uint32_t>(digest.size()));
        out.write(digest.data(), static_cast<long>(digest.size()));
        write_u64(out, blocks.size());
        for (const auto& [name, t] : blocks) {
            write_u32(out, static_cast<std::uint32_t>(name.size()));
            out.write(name.data(), static_cast<long>(name.size()));
            write_u64(out, t.numel());
            out.write(reinterpret_cast<const char*>(t.data.data()),
                      static_cast<long>(t.numel() * sizeof(double)));
        }
        if (!out) throw std::runtime_error("Checkpoint: write failed for " + path);
    }

    static Checkpoint load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("Checkpoint: cannot open " + path);
        char magic[4];
        in.read(magic, 4);
        if (!in || std::string(magic, 4) != "HLTP") {
            throw std::runtime_error("Checkpoint: bad magic in " + path);
        }
        std::uint32_t version = read_u32(in);
        if (version != kVersion) {
            throw std::runtime_error("Checkpoint: unsupported format version " +
                                     std::to_string(version));
        }
        Checkpoint c;
        std::uint32_t dlen = read_u32(in);
        c.digest.resize(dlen);
        in.read(c.digest.data(), dlen);
        std::uint64_t nblocks = read_u64(in);
        for (std::uint64_t b = 0; b < nblocks; ++b) {
            std::uint32_t nlen = read_u32(in);
            std::string name(nlen, '\0');
            in.read(name.data(), nlen);
            std::uint64_t count = read_u64(in);
            Tensor t({static_cast<std::size_t>(count)});
            in.read(reinterpret_cast<char*>(t.data.data()),
                    static_cast<long>(count * sizeof(double)));
            if (!in) throw std::runtime_error("Checkpoint: truncated file " + path);
            c.blocks.emplace_back(std::move(name), std::move(t));
        }
        return c;
    }

  private:
    static void write_u32(std::ofstream& o, std::uint32_t v) {
        o.write(reinterpret_cast<const char*>(&v), 4);
    }
    static void write_u64(std::ofstream& o, std::uint64_t v) {
        o.write(reinterpret_cast<const char*>(&v), 8);
    }
    static std::uint32_t read_u32(std::ifstream& i) {
        std::uint32_t v = 0;
        i.read(reinterpret_cast<char*>(&v), 4);
        return v;
    }
    static std::uint64_t read_u64(std::ifstream& i) {
        std::uint64_t v = 0;
        i.read(reinterpret_cast<char*>(&v), 8);
        return v;
    }
};

/// role: 0 teacher, 1 student.
inline Checkpoint make_checkpoint(std::uint32_t role, std::uint64_t epoch,
                                  const std::string& digest, const model::ParamSet& params,
                                  const AdamState& adam, const losses::KdmState* kdm) {
    Checkpoint c;
    c.digest = digest;
    c.add("meta/role", Tensor::scalar(static_cast<double>(role)));
    c.add("meta/epoch", Tensor::scalar(static_cast<double>(epoch)));
    for (std::size_t i = 0; i < params.size(); ++i) {
        c.add("param/" + params.name(i), params.value(i));
    }
    c.add("optim/step", Tensor::scalar(static_cast<double>(adam.step)));
    for (std::size_t i = 0; i < params.size(); ++i) {
        c.add("optim/m/" + params.name(i), adam.m[i]);
        c.add("optim/v/" + params.name(i), adam.v[i]);
    }
    if (kdm) c.add("kdm/log_vars", kdm->log_vars);
    return c;
}

inline void restore_params(const Checkpoint& c, model::ParamSet& params, AdamState* adam,
                           losses::KdmState* kdm) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor& src = c.require("param/" + params.name(i));
        Tensor& dst = params.value(i);
        if (src.numel() != dst.numel()) {
            throw std::runtime_error("Checkpoint: extent mismatch for " + params.name(i));
        }
        dst.data = src.data;
    }
    if (adam) {
        adam->init(params);
        adam->step = static_cast<std::uint64_t>(c.require("optim/step")[0]);
        for (std::size_t i = 0; i < params.size(); ++i) {
            adam->m[i].data = c.require("optim/m/" + params.name(i)).data;
            adam->v[i].data = c.require("optim/v/" + params.name(i)).data;
        }
    }
    if (kdm) {
        if (const Tensor* lv = c.find("kdm/log_vars")) kdm->log_vars.data = lv->data;
    }
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct StepRecord {
    std::uint64_t step = 0;
    std::size_t epoch = 0;
    double lr = 0.0;
    double total = 0.0;
    double traj = 0.0;
    double man = 0.0;
    double dis_traj = 0.0;
    double dis_man = 0.0;
    double st = 0.0;
    double sigma_t = 1.0, sigma_m = 1.0, sigma_s = 1.0, sigma_d = 1.0;
};

class MetricsWriter {
  public:
    MetricsWriter(const std::string& path, const std::string& digest, std::uint64_t seed)
        : out_(path) {
        if (!out_) throw std::runtime_error("MetricsWriter: cannot open " + path);
        out_ << "# config_digest=" << digest << " seed=" << seed << "\n";
        out_ << "step,epoch,lr,loss_total,loss_traj,loss_man,loss_dis_traj,loss_dis_man,loss_st,"
                "sigma_t,sigma_m,sigma_s,sigma_d\n";
    }

    void row(const StepRecord& r) {
        out_ << r.step << ',' << r.epoch;
        for (double v : {r.lr, r.total, r.traj, r.man, r.dis_traj, r.dis_man, r.st, r.sigma_t,
                         r.sigma_m, r.sigma_s, r.sigma_d}) {
            out_ << ',' << data::detail::fmt_double(v);
        }
        out_ << '\n';
    }

    void flush() { out_.flush(); }

  private:
    std::ofstream out_;
};

// ---------------------------------------------------------------------------
// Shared loss assembly
// ---------------------------------------------------------------------------

struct TrainOptions {
    std::size_t epochs = 100;
    std::size_t batch_size = 256;
    double grad_clip = 10.0;
    bool kdm = true;           // student only
    bool mixture_nll = false;  // weight NLL channels by predicted probability
    ScheduleConfig sched;
    std::uint64_t seed = 1;
};

namespace detail {

/// NLL term: ground-truth channel only by default, or the probability
/// weighted sum over all channels behind the mixture flag.
inline ad::Value traj_loss(ad::Graph& g, const gmm::DecodeOut& dec, const Tensor& future,
                           std::size_t label, std::size_t C, std::size_t t_f, bool mixture) {
    if (!mixture) {
        return losses::nll_bivariate_graph(g, dec.traj_mat, future, label < C ? label : C - 1, C,
                                           t_f);
    }
    ad::Value probs = ad::reshape(g, dec.probs, {C});
    ad::Value acc = g.constant(0.0);
    for (std::size_t c = 0; c < C; ++c) {
        ad::Value nll = losses::nll_bivariate_graph(g, dec.traj_mat, future, c, C, t_f);
        acc = ad::add(g, acc, ad::mul(g, ad::slice_flat(g, probs, c, 1), nll));
    }
    return acc;
}

struct SampleCache {
    teacher::SceneInput input;
    Tensor future;       // {t_f, 2}
    std::size_t label;
    Tensor onehot;       // {C}
};

inline std::vector<SampleCache> cache_split(const data::Dataset& ds,
                                            const data::FeatureOptions& fopt, std::size_t C,
                                            const std::string& split) {
    std::vector<const data::SceneSample*> scenes = ds.split(split);
    std::vector<SampleCache> out(scenes.size());
    parallel_for(scenes.size(), [&](std::size_t i) {
        out[i].input = data::make_scene_input(*scenes[i], fopt);
        out[i].future = scenes[i]->future;
        out[i].label = scenes[i]->label < C ? scenes[i]->label : 0;
        out[i].onehot = data::one_hot(out[i].label, C);
    });
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Teacher training
// ---------------------------------------------------------------------------

struct TeacherTrainResult {
    std::vector<StepRecord> steps;
    AdamState adam;
    std::size_t epochs = 0;
};

inline TeacherTrainResult train_teacher(const data::Dataset& ds, teacher::TeacherNet& net,
                                        const data::FeatureOptions& fopt, const TrainOptions& opt,
                                        MetricsWriter* mw = nullptr) {
    auto cache = detail::cache_split(ds, fopt, net.cfg.maneuvers, "train");
    if (cache.empty()) throw std::invalid_argument("train_teacher: empty dataset");
    opt.sched.validate();

    TeacherTrainResult res;
    res.adam.init(net.params);
    res.epochs = opt.epochs;
    Rng order_rng(Rng::mix(opt.seed, 0x0bd));
    std::vector<std::size_t> order(cache.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::uint64_t step = 0;
    std::size_t batches_per_epoch = (cache.size() + opt.batch_size - 1) / opt.batch_size;

    struct Slot {
        std::unique_ptr<ad::Graph> g;
        std::unique_ptr<model::Binding> bind;
        double traj = 0.0, man = 0.0, st = 0.0, total = 0.0;
    };

    for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
        order_rng.shuffle(order);
        for (std::size_t b0 = 0; b0 < cache.size(); b0 += opt.batch_size) {
            std::size_t bn = std::min(opt.batch_size, cache.size() - b0);
            net.params.zero_grads();
            double lr = schedule_lr(static_cast<double>(epoch) +
                                        static_cast<double>(b0 / opt.batch_size) /
                                            static_cast<double>(batches_per_epoch),
                                    opt.sched);
            StepRecord rec;
            std::size_t chunk = std::max<unsigned>(worker_count(), 1);
            for (std::size_t c0 = 0; c0 < bn; c0 += chunk) {
                std::size_t cn = std::min(chunk, bn - c0);
                std::vector<Slot> slots(cn);
                parallel_for(cn, [&](std::size_t j) {
                    const auto& s = cache[order[b0 + c0 + j]];
                    Slot& sl = slots[j];
                    sl.g = std::make_unique<ad::Graph>();
                    sl.bind = std::make_unique<model::Binding>(*sl.g, net.params, true);
                    Rng drop(Rng::mix(opt.seed, (step + 1) * 7919 + c0 + j));
                    auto fw = net.forward(*sl.g, *sl.bind, s.input, true, &drop);
                    ad::Value traj = detail::traj_loss(*sl.g, fw.decode, s.future, s.label,
                                                       net.cfg.maneuvers, net.cfg.t_f,
                                                       opt.mixture_nll);
                    ad::Value man = losses::maneuver_mse_graph(*sl.g, fw.decode.probs, s.onehot);
                    ad::Value total = ad::add(*sl.g, ad::add(*sl.g, traj, man), fw.l_st);
                    sl.traj = sl.g->value(traj)[0];
                    sl.man = sl.g->value(man)[0];
                    sl.st = sl.g->value(fw.l_st)[0];
                    sl.total = sl.g->value(total)[0];
                    sl.g->backward(total);
                });
                for (Slot& sl : slots) {
                    sl.bind->accumulate_grads(net.params);
                    rec.traj += sl.traj;
                    rec.man += sl.man;
                    rec.st += sl.st;
                    rec.total += sl.total;
                }
            }
            double inv = 1.0 / static_cast<double>(bn);
            for (std::size_t i = 0; i < net.params.size(); ++i) {
                for (double& v : net.params.grad(i).data) v *= inv;
            }
            std::vector<model::ParamSet*> sets{&net.params};
            clip_grads(sets, opt.grad_clip);
            adam_step(net.params, res.adam, lr);

            rec.step = ++step;
            rec.epoch = epoch;
            rec.lr = lr;
            rec.traj *= inv;
            rec.man *= inv;
            rec.st *= inv;
            rec.total *= inv;
            if (!std::isfinite(rec.total)) throw std::runtime_error("train_teacher: loss diverged");
            res.steps.push_back(rec);
            if (mw) mw->row(rec);
        }
    }
    if (mw) mw->flush();
    return res;
}

// ---------------------------------------------------------------------------
// Student training (with knowledge distillation)
// ---------------------------------------------------------------------------

struct StudentTrainResult {
    std::vector<StepRecord> steps;
    AdamState adam;       // over student params
    AdamState adam_kdm;   // over the KDM log-variances
    losses::KdmState kdm;
    std::size_t epochs = 0;
};

inline StudentTrainResult train_student(const data::Dataset& ds,
                                        const teacher::TeacherNet& teacher_net,
                                        student::StudentNet& net,
                                        const data::FeatureOptions& fopt, const TrainOptions& opt,
                                        MetricsWriter* mw = nullptr) {
    if (net.cfg.maneuvers != teacher_net.cfg.maneuvers || net.cfg.t_f != teacher_net.cfg.t_f) {
        throw std::invalid_argument("train_student: teacher/student output contracts differ");
    }
    auto cache = detail::cache_split(ds, fopt, net.cfg.maneuvers, "train");
    if (cache.empty()) throw std::invalid_argument("train_student: empty dataset");
    opt.sched.validate();

    // the teacher runs in inference mode only; its outputs are constants
    std::vector<gmm::MultimodalPrediction> teacher_preds(cache.size());
    parallel_for(cache.size(), [&](std::size_t i) {
        teacher_preds[i] = teacher_net.predict(cache[i].input);
    });

    StudentTrainResult res;
    res.adam.init(net.params);
    res.epochs = opt.epochs;
    model::ParamSet kdm_params;
    kdm_params.add("log_vars", res.kdm.log_vars);
    res.adam_kdm.init(kdm_params);

    std::size_t C = net.cfg.maneuvers, t_f = net.cfg.t_f;
    Rng order_rng(Rng::mix(opt.seed, 0x57d2));
    std::vector<std::size_t> order(cache.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::uint64_t step = 0;
    std::size_t batches_per_epoch = (cache.size() + opt.batch_size - 1) / opt.batch_size;

    struct Slot {
        std::unique_ptr<ad::Graph> g;
        std::unique_ptr<model::Binding> bind;
        std::unique_ptr<model::Binding> bind_kdm;
        double traj = 0.0, man = 0.0, dis_traj = 0.0, dis_man = 0.0, total = 0.0;
    };

    for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
        order_rng.shuffle(order);
        for (std::size_t b0 = 0; b0 < cache.size(); b0 += opt.batch_size) {
            std::size_t bn = std::min(opt.batch_size, cache.size() - b0);
            net.params.zero_grads();
            kdm_params.zero_grads();
            double lr = schedule_lr(static_cast<double>(epoch) +
                                        static_cast<double>(b0 / opt.batch_size) /
                                            static_cast<double>(batches_per_epoch),
                                    opt.sched);
            StepRecord rec;
            std::size_t chunk = std::max<unsigned>(worker_count(), 1);
            for (std::size_t c0 = 0; c0 < bn; c0 += chunk) {
                std::size_t cn = std::min(chunk, bn - c0);
                std::vector<Slot> slots(cn);
                parallel_for(cn, [&](std::size_t j) {
                    std::size_t idx = order[b0 + c0 + j];
                    const auto& s = cache[idx];
                    const auto& tp = teacher_preds[idx];
                    Slot& sl = slots[j];
                    sl.g = std::make_unique<ad::Graph>();
                    ad::Graph& g = *sl.g;
                    sl.bind = std::make_unique<model::Binding>(g, net.params, true);
                    sl.bind_kdm = std::make_unique<model::Binding>(g, kdm_params, opt.kdm);
                    auto fw = net.forward(g, *sl.bind, s.input.s_tilde, s.input.anchor);

                    ad::Value stu_traj = detail::traj_loss(g, fw.decode, s.future, s.label, C, t_f,
                                                           opt.mixture_nll);
                    ad::Value stu_man = losses::maneuver_mse_graph(g, fw.decode.probs, s.onehot);
                    ad::Value dis_traj = losses::mse_graph(
                        g, fw.decode.traj_mat, losses::detail::traj_mat_const(g, tp));
                    ad::Value dis_man =
                        losses::mse_graph(g, ad::reshape(g, fw.decode.probs, {C}),
                                          g.constant(tp.maneuver_probs));
                    ad::Value lv = (*sl.bind_kdm)("log_vars");
                    ad::Value total =
                        losses::kdm_total_graph(g, lv, stu_traj, stu_man, dis_traj, dis_man);
                    sl.traj = g.value(stu_traj)[0];
                    sl.man = g.value(stu_man)[0];
                    sl.dis_traj = g.value(dis_traj)[0];
                    sl.dis_man = g.value(dis_man)[0];
                    sl.total = g.value(total)[0];
                    g.backward(total);
                });
                for (Slot& sl : slots) {
                    sl.bind->accumulate_grads(net.params);
                    if (opt.kdm) sl.bind_kdm->accumulate_grads(kdm_params);
                    rec.traj += sl.traj;
                    rec.man += sl.man;
                    rec.dis_traj += sl.dis_traj;
                    rec.dis_man += sl.dis_man;
                    rec.total += sl.total;
                }
            }
            double inv = 1.0 / static_cast<double>(bn);
            for (std::size_t i = 0; i < net.params.size(); ++i) {
                for (double& v : net.params.grad(i).data) v *= inv;
            }
            for (double& v : kdm_params.grad(0).data) v *= inv;
            std::vector<model::ParamSet*> sets{&net.params};
            if (opt.kdm) sets.push_back(&kdm_params);
            clip_grads(sets, opt.grad_clip);
            adam_step(net.params, res.adam, lr);
            if (opt.kdm) {
                adam_step(kdm_params, res.adam_kdm, lr);
                res.kdm.log_vars = kdm_params["log_vars"];
            }
            // keep the surrogate width w_a = U0 * w_g well-defined
            for (double& u : net.params["snn.u0"].data) u = std::max(u, 1e-3);

            rec.step = ++step;
            rec.epoch = epoch;
            rec.lr = lr;
            rec.traj *= inv;
            rec.man *= inv;
            rec.dis_traj *= inv;
            rec.dis_man *= inv;
            rec.total *= inv;
            rec.sigma_t = res.kdm.sigma_t();
            rec.sigma_m = res.kdm.sigma_m();
            rec.sigma_s = res.kdm.sigma_s();
            rec.sigma_d = res.kdm.sigma_d();
            if (!std::isfinite(rec.total)) throw std::runtime_error("train_student: loss diverged");
            res.steps.push_back(rec);
            if (mw) mw->row(rec);
        }
    }
    if (mw) mw->flush();
    return res;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

using Predictor = std::function<gmm::MultimodalPrediction(const data::SceneSample&)>;

/// Evaluate a predictor over one split. The evaluated trajectory is the mean
/// of the argmax-probability mode (or the probability-weighted mixture mean).
inline data::EvalReport evaluate(const data::Dataset& ds, const std::string& split,
                                 const Predictor& predict, bool mixture_mean = false) {
    auto scenes = ds.split(split);
    if (scenes.empty()) throw std::invalid_argument("evaluate: empty split '" + split + "'");
    std::vector<data::Track2d> preds(scenes.size()), gts(scenes.size());
    parallel_for(scenes.size(), [&](std::size_t i) {
        gmm::MultimodalPrediction p = predict(*scenes[i]);
        preds[i] = mixture_mean ? p.mixture_mean() : p.mode_mean(p.argmax_mode());
        gts[i].resize(scenes[i]->future.shape[0]);
        for (std::size_t t = 0; t < gts[i].size(); ++t) {
            gts[i][t] = {scenes[i]->future.at(t, 0), scenes[i]->future.at(t, 1)};
        }
    });
    return data::horizon_report(preds, gts, ds.frame_rate);
}

inline Predictor teacher_predictor(const teacher::TeacherNet& net,
                                   const data::FeatureOptions& fopt) {
    return [&net, fopt](const data::SceneSample& s) {
        return net.predict(data::make_scene_input(s, fopt));
    };
}

inline Predictor student_predictor(const student::StudentNet& net,
                                   const data::FeatureOptions& fopt) {
    return [&net, fopt](const data::SceneSample& s) {
        teacher::SceneInput in = data::make_scene_input(s, fopt);
        return net.predict(in.s_tilde, in.anchor);
    };
}

}  // namespace spikecast::train
