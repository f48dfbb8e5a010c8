// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "mepg/core/error.hpp"
#include "mepg/moe/med.hpp"
#include "mepg/planner/backend.hpp"
#include "mepg/planner/templates.hpp"
#include "mepg/service/job_runner.hpp"
#include "mepg/service/job_store.hpp"

namespace httplib {
class Server;
}

namespace mepg::service {

struct ServiceOptions {
    std::filesystem::path state_dir = "mepg-state";
    std::size_t workers = default_worker_count();
    std::size_t queue_capacity = 16;
    planner::RemoteBackendConfig llm;
    /// Rerun the chain on the rule backend when the LLM is unreachable.
    bool fallback_rule = false;
    std::optional<std::filesystem::path> prompts_dir;
    int plan_grid_h = 32;
    int plan_grid_w = 32;
};

/// HTTP status for a library error.
int http_status(ErrorCode code);

/// The HTTP facade: planning, validation, expert listing and generation jobs.
class Service {
public:
    /// Recovers jobs left in `state_dir` by an earlier process.
    Service(ServiceOptions options, std::shared_ptr<const moe::ExpertSet> experts);
    ~Service();

    /// Registers every route (and CORS handling) on `server`.
    void mount(httplib::Server& server);

    JobStore& store() noexcept { return m_store; }
    JobRunner& runner() noexcept { return *m_runner; }

private:
    ServiceOptions m_options;
    std::shared_ptr<const moe::ExpertSet> m_experts;
    planner::TemplateSet m_templates;
    planner::RemoteBackend m_llm;
    JobStore m_store;
    std::unique_ptr<JobRunner> m_runner;
};

/// Blocks serving on host:port until the process is stopped.
void serve(Service& service, const std::string& host, int port);

}  // namespace mepg::service
