// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#include "mepg/neural/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mepg/core/error.hpp"
#include "mepg/core/rng.hpp"
#include "mepg/neural/optim.hpp"

namespace mepg::neural {

namespace {

Tensor normal_tensor(Rng& rng, const Shape& shape) {
    Tensor t(shape);
    for (double& v : t.data()) v = rng.normal();
    return t;
}

std::vector<Tensor*> param_list(DenoiserParams& p) {
    std::vector<Tensor*> out;
    for (auto& n : p.tensors()) out.push_back(n.tensor);
    return out;
}

void validate(const StyleDataset& dataset, const TrainConfig& c) {
    if (dataset.empty()) raise(ErrorCode::EmptyDataset, "dataset '" + dataset.name + "' has no samples");
    if (c.epochs == 0 || c.batch_size == 0) raise(ErrorCode::InvalidConfig, "epochs and batch_size must be positive");
    if (!(c.lr >= 0.0) || !std::isfinite(c.lr)) raise(ErrorCode::InvalidConfig, "learning rate must be >= 0");
    if (!(c.holdout_fraction >= 0.0 && c.holdout_fraction < 1.0)) {
        raise(ErrorCode::InvalidConfig, "holdout_fraction must be in [0, 1)");
    }
}

}  // namespace

std::vector<DenoiseExample> make_eval_examples(const std::vector<Sample>& samples,
                                               const diffusion::NoiseSchedule& schedule, std::size_t draws,
                                               std::uint64_t seed) {
    Rng rng(seed, 0xE7A1);
    std::vector<DenoiseExample> out;
    const std::size_t n = schedule.steps();
    for (const Sample& s : samples) {
        for (std::size_t d = 0; d < draws; ++d) {
            DenoiseExample ex;
            ex.t = static_cast<int>(1 + rng.below(n));
            ex.noise = normal_tensor(rng, s.image.shape());
            ex.x_t = diffusion::q_sample(schedule, s.image, static_cast<std::size_t>(ex.t), ex.noise);
            ex.cond = s.cond;
            out.push_back(std::move(ex));
        }
    }
    return out;
}

TrainReport train_expert(const StyleDataset& dataset, const TrainConfig& config,
                         const std::optional<DenoiserParams>& init, const EpochCallback& on_epoch) {
    validate(dataset, config);
    TrainReport report;
    report.params = init ? *init : DenoiserParams::init(config.model, config.seed);
    DenoiserParams& params = report.params;
    const diffusion::NoiseSchedule schedule(params.config.steps, config.schedule);

    // Seeded split: the tail of a shuffled index list is held out.
    Rng rng(config.seed, 0x7A11);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    std::size_t held = static_cast<std::size_t>(std::floor(config.holdout_fraction * static_cast<double>(order.size())));
    if (held == order.size()) held = order.size() - 1;
    std::vector<std::size_t> train_idx(order.begin(), order.end() - static_cast<std::ptrdiff_t>(held));
    std::vector<Sample> holdout;
    for (std::size_t i = order.size() - held; i < order.size(); ++i) holdout.push_back(dataset.samples[order[i]]);
    if (holdout.empty()) holdout.push_back(dataset.samples[train_idx.front()]);

    const auto eval = make_eval_examples(holdout, schedule, std::max<std::size_t>(1, config.holdout_draws),
                                         config.seed ^ 0x5EEDu);
    report.initial_heldout_loss = denoiser_loss(params, eval);
    const double diverge_limit = 10.0 * report.initial_heldout_loss;

    Adam adam(config.lr);
    DenoiserParams grads = DenoiserParams::zeros(params.config);
    const auto plist = param_list(params);
    const auto glist = param_list(grads);
    const std::vector<const Tensor*> gconst(glist.begin(), glist.end());

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t i = train_idx.size(); i > 1; --i) std::swap(train_idx[i - 1], train_idx[rng.below(i)]);
        for (std::size_t start = 0; start < train_idx.size(); start += config.batch_size) {
            const std::size_t end = std::min(start + config.batch_size, train_idx.size());
            std::vector<DenoiseExample> batch;
            for (std::size_t b = start; b < end; ++b) {
                const Sample& s = dataset.samples[train_idx[b]];
                DenoiseExample ex;
                ex.t = static_cast<int>(1 + rng.below(schedule.steps()));
                ex.noise = normal_tensor(rng, s.image.shape());
                ex.x_t = diffusion::q_sample(schedule, s.image, static_cast<std::size_t>(ex.t), ex.noise);
                if (rng.uniform() >= config.cond_dropout) ex.cond = s.cond;
                batch.push_back(std::move(ex));
            }
            for (Tensor* g : glist) g->fill(0.0);
            double loss = 0.0;
            try {
                loss = denoiser_loss(params, batch, &grads);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::NonFiniteActivation) throw;
                raise(ErrorCode::Diverged, e.what());
            }
            if (!std::isfinite(loss) || loss > diverge_limit) {
                raise(ErrorCode::Diverged, "batch loss " + std::to_string(loss) + " after " +
                                               std::to_string(report.updates) + " updates");
            }
            if (config.lr > 0.0) {
                clip_global_norm(glist, config.grad_clip);
                adam.step(plist, gconst);
            }
            ++report.updates;
        }
        const double held_loss = denoiser_loss(params, eval);
        report.epoch_heldout_losses.push_back(held_loss);
        if (on_epoch) on_epoch(epoch, held_loss);
    }
    report.final_heldout_loss = report.epoch_heldout_losses.back();
    report.met_target = report.final_heldout_loss < config.target_ratio * report.initial_heldout_loss;
    return report;
}

}  // namespace mepg::neural
