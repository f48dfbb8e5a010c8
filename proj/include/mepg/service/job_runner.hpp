// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "mepg/geometry/geometry.hpp"
#include "mepg/moe/med.hpp"
#include "mepg/scheduler/config.hpp"
#include "mepg/service/job_store.hpp"

namespace mepg::service {

/// min(hardware threads, 4), at least 1.
std::size_t default_worker_count();

/// Bounded FIFO of generation jobs drained by a fixed worker pool. Each job
/// writes result.png and trace.jsonl into its directory before it is marked
/// done.
class JobRunner {
public:
    /// `workers` may be 0, leaving jobs queued (useful for inspection).
    JobRunner(JobStore& store, std::shared_ptr<const moe::ExpertSet> experts, std::size_t workers,
              std::size_t queue_capacity = 16);
    ~JobRunner();
    JobRunner(const JobRunner&) = delete;
    JobRunner& operator=(const JobRunner&) = delete;

    /// Validates the request, persists a queued job and enqueues it. Throws
    /// InvalidConfig/InvalidBox/UnknownExpert for bad requests, QueueFull when
    /// the queue is at capacity.
    Job submit(const geometry::Layout& layout, const scheduler::GenerationConfig& config);

    /// Re-enqueues jobs found queued at startup; those beyond capacity fail.
    void resume(std::vector<Job> queued);

    std::size_t queued() const;
    /// Blocks until no job is queued or running.
    void wait_idle();
    /// Stops accepting work; running jobs are cancelled and marked failed.
    void shutdown();

private:
    void worker_loop();
    void run_job(const std::string& id);

    JobStore& m_store;
    std::shared_ptr<const moe::ExpertSet> m_experts;
    std::size_t m_capacity;
    mutable std::mutex m_mutex;
    std::condition_variable m_cv;
    std::condition_variable m_idle_cv;
    std::deque<std::string> m_queue;
    std::size_t m_reserved = 0;
    std::size_t m_running = 0;
    std::atomic<bool> m_stopping{false};
    std::vector<std::thread> m_workers;
};

}  // namespace mepg::service
