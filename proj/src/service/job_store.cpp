// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#include "mepg/service/job_store.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>
#include <tuple>

#include "mepg/core/error.hpp"

namespace mepg::service {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::array<std::string_view, 4> kStatusNames{"queued", "running", "done", "failed"};

bool valid_id(std::string_view id) {
    return !id.empty() && id.size() <= 64 && std::all_of(id.begin(), id.end(), [](char c) {
        return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f') || c == '-';
    });
}

}  // namespace

std::string to_string(JobStatus status) { return std::string(kStatusNames[static_cast<std::size_t>(status)]); }

JobStatus job_status_from_string(std::string_view name) {
    for (std::size_t i = 0; i < kStatusNames.size(); ++i) {
        if (kStatusNames[i] == name) return static_cast<JobStatus>(i);
    }
    raise(ErrorCode::Format, "unknown job status '" + std::string(name) + "'");
}

json to_json(const Job& job) {
    return {{"job_id", job.job_id},
            {"status", to_string(job.status)},
            {"request", job.request},
            {"progress", {{"completed", job.steps_done}, {"total", job.steps_total}}},
            {"result_path", job.result_path.empty() ? json(nullptr) : json(job.result_path)},
            {"trace_path", job.trace_path.empty() ? json(nullptr) : json(job.trace_path)},
            {"error", job.error.empty() ? json(nullptr) : json(job.error)},
            {"created_at", job.created_at},
            {"finished_at", job.finished_at.empty() ? json(nullptr) : json(job.finished_at)}};
}

Job job_from_json(const json& doc) {
    auto text = [&](const char* key) { return doc.contains(key) && doc[key].is_string() ? doc[key].get<std::string>() : ""; };
    try {
        Job job;
        job.job_id = doc.at("job_id").get<std::string>();
        job.status = job_status_from_string(doc.at("status").get<std::string>());
        job.request = doc.value("request", json::object());
        job.steps_done = doc.at("progress").at("completed").get<std::size_t>();
        job.steps_total = doc.at("progress").at("total").get<std::size_t>();
        job.result_path = text("result_path");
        job.trace_path = text("trace_path");
        job.error = text("error");
        job.created_at = text("created_at");
        job.finished_at = text("finished_at");
        return job;
    } catch (const json::exception& e) {
        raise(ErrorCode::Format, std::string("job document: ") + e.what());
    }
}

std::string make_uuid() {
    static std::mutex mutex;
    static std::mt19937_64 engine{[] {
        std::random_device rd;
        return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    }()};
    std::uint64_t hi, lo;
    {
        std::lock_guard lock(mutex);
        hi = engine();
        lo = engine();
    }
    hi = (hi & 0xffffffffffff0fffULL) | 0x0000000000004000ULL;  // version 4
    lo = (lo & 0x3fffffffffffffffULL) | 0x8000000000000000ULL;  // RFC 4122 variant
    char buf[37];
    std::snprintf(buf, sizeof buf, "%08x-%04x-%04x-%04x-%012llx", static_cast<unsigned>(hi >> 32),
                  static_cast<unsigned>((hi >> 16) & 0xffff), static_cast<unsigned>(hi & 0xffff),
                  static_cast<unsigned>(lo >> 48), static_cast<unsigned long long>(lo & 0xffffffffffffULL));
    return buf;
}

std::string utc_now() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void atomic_write(const fs::path& path, std::string_view bytes) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) raise(ErrorCode::Io, "cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) raise(ErrorCode::Io, "short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) raise(ErrorCode::Io, "cannot rename " + tmp.string() + ": " + ec.message());
}

JobStore::JobStore(fs::path root) : m_root(std::move(root)) {
    std::error_code ec;
    fs::create_directories(m_root / "jobs", ec);
    if (ec) raise(ErrorCode::Io, "cannot create state directory " + m_root.string() + ": " + ec.message());
}

fs::path JobStore::job_dir(std::string_view id) const {
    if (!valid_id(id)) raise(ErrorCode::NotFound, "no job '" + std::string(id) + "'");
    return m_root / "jobs" / std::string(id);
}

Job JobStore::create(json request, std::size_t steps_total) {
    Job job;
    job.job_id = make_uuid();
    job.request = std::move(request);
    job.steps_total = steps_total;
    job.created_at = utc_now();
    std::lock_guard lock(m_mutex);
    fs::create_directories(job_dir(job.job_id));
    write_locked(job);
    return job;
}

Job JobStore::get(std::string_view id) const {
    std::lock_guard lock(m_mutex);
    return read_locked(id);
}

Job JobStore::read_locked(std::string_view id) const {
    const fs::path file = job_dir(id) / "job.json";
    std::ifstream in(file);
    if (!in) raise(ErrorCode::NotFound, "no job '" + std::string(id) + "'");
    try {
        return job_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        raise(ErrorCode::Format, file.string() + ": " + e.what());
    }
}

void JobStore::write_locked(const Job& job) {
    atomic_write(job_dir(job.job_id) / "job.json", to_json(job).dump(2) + "\n");
}

std::vector<Job> JobStore::recover() {
    std::lock_guard lock(m_mutex);
    std::vector<Job> queued;
    for (const auto& entry : fs::directory_iterator(m_root / "jobs")) {
        if (!entry.is_directory() || !valid_id(entry.path().filename().string())) continue;
        Job job;
        try {
            job = read_locked(entry.path().filename().string());
        } catch (const Error&) {
            continue;  // half-created directory or foreign content
        }
        if (job.status == JobStatus::Running) {
            job.status = JobStatus::Failed;
            job.error = "interrupted";
            job.finished_at = utc_now();
            write_locked(job);
        } else if (job.status == JobStatus::Queued) {
            queued.push_back(std::move(job));
        }
    }
    std::sort(queued.begin(), queued.end(), [](const Job& a, const Job& b) {
        return std::tie(a.created_at, a.job_id) < std::tie(b.created_at, b.job_id);
    });
    return queued;
}

}  // namespace mepg::service
