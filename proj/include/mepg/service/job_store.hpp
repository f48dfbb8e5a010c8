// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <json.hpp>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mepg::service {

enum class JobStatus { Queued, Running, Done, Failed };

std::string to_string(JobStatus status);
JobStatus job_status_from_string(std::string_view name);

struct Job {
    std::string job_id;
    JobStatus status = JobStatus::Queued;
    nlohmann::json request;  // {"layout": ..., "config": ...}
    std::size_t steps_done = 0;
    std::size_t steps_total = 0;
    std::string result_path;  // set iff done
    std::string trace_path;
    std::string error;
    std::string created_at;   // UTC, ISO 8601
    std::string finished_at;  // empty until done or failed
};

nlohmann::json to_json(const Job& job);
Job job_from_json(const nlohmann::json& doc);

/// Random version-4 UUID in canonical text form.
std::string make_uuid();
std::string utc_now();

/// Writes `bytes` to a sibling temp file and renames it over `path`.
void atomic_write(const std::filesystem::path& path, std::string_view bytes);

/// Jobs persisted as {root}/jobs/{id}/job.json. One mutex serializes every
/// job.json write, so each job directory has a single writer at a time.
class JobStore {
public:
    explicit JobStore(std::filesystem::path root);

    std::filesystem::path job_dir(std::string_view id) const;
    std::filesystem::path result_path(std::string_view id) const { return job_dir(id) / "result.png"; }
    std::filesystem::path trace_path(std::string_view id) const { return job_dir(id) / "trace.jsonl"; }

    Job create(nlohmann::json request, std::size_t steps_total);
    /// Throws NotFound.
    Job get(std::string_view id) const;
    /// Applies `edit` to the stored job and persists it. Throws NotFound.
    template <typename Fn>
    Job update(std::string_view id, Fn&& edit) {
        std::lock_guard lock(m_mutex);
        Job job = read_locked(id);
        edit(job);
        write_locked(job);
        return job;
    }

    /// Startup recovery: running jobs become failed ("interrupted"); queued
    /// jobs are returned, oldest first, for resubmission.
    std::vector<Job> recover();

    const std::filesystem::path& root() const noexcept { return m_root; }

private:
    Job read_locked(std::string_view id) const;
    void write_locked(const Job& job);

    std::filesystem::path m_root;
    mutable std::mutex m_mutex;
};

}  // namespace mepg::service
