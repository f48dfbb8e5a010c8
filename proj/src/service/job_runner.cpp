// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#include "mepg/service/job_runner.hpp"

#include <algorithm>

#include "mepg/core/error.hpp"
#include "mepg/diffusion/image_io.hpp"
#include "mepg/geometry/layout_io.hpp"
#include "mepg/scheduler/cross_denoise.hpp"

namespace mepg::service {

using nlohmann::json;

std::size_t default_worker_count() {
    const std::size_t hw = std::thread::hardware_concurrency();
    return std::clamp<std::size_t>(hw, 1, 4);
}

JobRunner::JobRunner(JobStore& store, std::shared_ptr<const moe::ExpertSet> experts, std::size_t workers,
                     std::size_t queue_capacity)
    : m_store(store), m_experts(std::move(experts)), m_capacity(queue_capacity) {
    if (!m_experts || m_experts->size() == 0) raise(ErrorCode::InvalidConfig, "job runner needs at least one expert");
    for (std::size_t i = 0; i < workers; ++i) m_workers.emplace_back([this] { worker_loop(); });
}

JobRunner::~JobRunner() { shutdown(); }

Job JobRunner::submit(const geometry::Layout& layout, const scheduler::GenerationConfig& config) {
    config.validate();
    const geometry::ValidationResult check = geometry::validate_layout(layout);
    if (!check.ok()) raise(ErrorCode::InvalidBox, "layout invalid: " + check.violations.front().message);
    const std::size_t global = scheduler::resolve_global_expert(m_experts->registry(), config);
    scheduler::resolve_region_experts(layout, m_experts->registry(), global);
    if (m_stopping) raise(ErrorCode::QueueFull, "service is shutting down");
    {
        std::lock_guard lock(m_mutex);
        if (m_queue.size() + m_reserved >= m_capacity) {
            raise(ErrorCode::QueueFull, "job queue full (" + std::to_string(m_capacity) + " waiting)");
        }
        // Hold the slot while job.json is written.
        ++m_reserved;
    }
    Job job;
    try {
        job = m_store.create({{"layout", geometry::layout_to_json(layout)}, {"config", scheduler::config_to_json(config)}},
                             config.steps);
    } catch (...) {
        std::lock_guard lock(m_mutex);
        --m_reserved;
        throw;
    }
    {
        std::lock_guard lock(m_mutex);
        --m_reserved;
        m_queue.push_back(job.job_id);
    }
    m_cv.notify_one();
    return job;
}

void JobRunner::resume(std::vector<Job> queued) {
    for (const Job& job : queued) {
        bool accepted = false;
        {
            std::lock_guard lock(m_mutex);
            if (m_queue.size() + m_reserved < m_capacity) {
                m_queue.push_back(job.job_id);
                accepted = true;
            }
        }
        if (accepted) {
            m_cv.notify_one();
        } else {
            m_store.update(job.job_id, [](Job& j) {
                j.status = JobStatus::Failed;
                j.error = "queue full on restart";
                j.finished_at = utc_now();
            });
        }
    }
}

std::size_t JobRunner::queued() const {
    std::lock_guard lock(m_mutex);
    return m_queue.size();
}

void JobRunner::wait_idle() {
    std::unique_lock lock(m_mutex);
    m_idle_cv.wait(lock, [&] { return (m_queue.empty() || m_workers.empty()) && m_running == 0; });
}

void JobRunner::shutdown() {
    if (m_stopping.exchange(true)) return;
    m_cv.notify_all();
    for (auto& w : m_workers) w.join();
    m_workers.clear();
}

void JobRunner::worker_loop() {
    for (;;) {
        std::string id;
        {
            std::unique_lock lock(m_mutex);
            m_cv.wait(lock, [&] { return m_stopping || !m_queue.empty(); });
            if (m_stopping) return;
            id = std::move(m_queue.front());
            m_queue.pop_front();
            ++m_running;
        }
        run_job(id);
        {
            std::lock_guard lock(m_mutex);
            --m_running;
        }
        m_idle_cv.notify_all();
    }
}

void JobRunner::run_job(const std::string& id) {
    try {
        const Job job = m_store.update(id, [](Job& j) { j.status = JobStatus::Running; });
        const geometry::Layout layout = geometry::layout_from_json(job.request.at("layout"));
        const scheduler::GenerationConfig config = scheduler::config_from_json(job.request.at("config"));
        scheduler::CrossDenoiseHooks hooks;
        hooks.on_step = [&](const scheduler::StepRecord& record, const Tensor&) {
            m_store.update(id, [&](Job& j) { j.steps_done = record.t; });
        };
        hooks.cancelled = [this] { return m_stopping.load(); };
        const scheduler::CrossDenoiseResult result = scheduler::cross_denoise(layout, *m_experts, config, hooks);
        atomic_write(m_store.trace_path(id), scheduler::trace_to_jsonl(result.trace));
        atomic_write(m_store.result_path(id), diffusion::encode_png(result.image));
        m_store.update(id, [&](Job& j) {
            j.status = JobStatus::Done;
            j.steps_done = j.steps_total;
            j.result_path = m_store.result_path(id).string();
            j.trace_path = m_store.trace_path(id).string();
            j.finished_at = utc_now();
        });
    } catch (const std::exception& e) {
        const bool interrupted = m_stopping.load();
        const std::string reason = interrupted ? std::string("interrupted") : e.what();
        try {
            m_store.update(id, [&](Job& j) {
                j.status = JobStatus::Failed;
                j.error = reason;
                j.finished_at = utc_now();
            });
        } catch (const std::exception&) {
            // The job directory is gone; nothing left to record.
        }
    }
}

}  // namespace mepg::service
