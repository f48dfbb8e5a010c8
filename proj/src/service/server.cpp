// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#include "mepg/service/server.hpp"

#include <fstream>
#include <httplib.h>
#include <sstream>

#include "mepg/geometry/layout_io.hpp"
#include "mepg/planner/chain.hpp"
#include "mepg/scheduler/config.hpp"

namespace mepg::service {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message,
                json extra = json::object()) {
    json body = {{"error", {{"code", code}, {"message", message}}}};
    for (auto& [k, v] : extra.items()) body["error"][k] = v;
    send_json(res, status, body);
}

json parse_body(const httplib::Request& req) {
    json body = json::parse(req.body, nullptr, /*allow_exceptions=*/false);
    if (body.is_discarded() || !body.is_object()) raise(ErrorCode::Format, "request body must be a JSON object");
    return body;
}

// Runs a handler, translating library errors into status codes.
template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const GrammarError& e) {
            send_error(res, 422, to_string(e.code()), e.what(), {{"offset", e.offset()}});
        } catch (const Error& e) {
            send_error(res, http_status(e.code()), to_string(e.code()), e.what());
        } catch (const json::exception& e) {
            send_error(res, 422, "Format", e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "Internal", e.what());
        }
    };
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::NotFound, "missing artifact " + path.filename().string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

int http_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::GrammarError:
        case ErrorCode::PlanEmpty:
        case ErrorCode::NoParsableCoordinates:
        case ErrorCode::TransformError:
        case ErrorCode::RepairImpossible:
        case ErrorCode::InvalidBox:
        case ErrorCode::InvalidConfig:
        case ErrorCode::Format:
        case ErrorCode::UnknownExpert:
        case ErrorCode::StepOutOfRange:
        case ErrorCode::KOutOfRange:
            return 422;
        case ErrorCode::BackendUnavailable:
            return 502;
        case ErrorCode::QueueFull:
            return 429;
        case ErrorCode::NotFound:
            return 404;
        case ErrorCode::NotReady:
            return 409;
        default:
            return 500;
    }
}

Service::Service(ServiceOptions options, std::shared_ptr<const moe::ExpertSet> experts)
    : m_options(std::move(options)),
      m_experts(std::move(experts)),
      m_templates(m_options.prompts_dir ? planner::TemplateSet::from_directory(*m_options.prompts_dir)
                                        : planner::TemplateSet()),
      m_llm(m_options.llm),
      m_store(m_options.state_dir) {
    std::vector<Job> pending = m_store.recover();
    m_runner = std::make_unique<JobRunner>(m_store, m_experts, m_options.workers, m_options.queue_capacity);
    m_runner->resume(std::move(pending));
}

Service::~Service() { m_runner->shutdown(); }

void Service::mount(httplib::Server& server) {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, {{"status", "ok"}});
    });

    server.Post("/v1/plan", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        const std::string prompt = body.value("prompt", std::string());
        const std::string backend = body.value("backend", std::string("rule"));
        planner::PlannerOptions options;
        options.grid_h = m_options.plan_grid_h;
        options.grid_w = m_options.plan_grid_w;
        if (body.contains("grid")) {
            options.grid_h = body["grid"].at("h").get<int>();
            options.grid_w = body["grid"].at("w").get<int>();
        }
        options.templates = &m_templates;
        planner::RuleBackend rule;
        planner::PlanResult plan;
        if (backend == "rule") {
            plan = planner::run_enhanced_chain(prompt, rule, options);
        } else if (backend == "llm") {
            if (m_options.fallback_rule) options.fallback_backend = &rule;
            plan = planner::run_enhanced_chain(prompt, m_llm, options);
        } else {
            raise(ErrorCode::InvalidConfig, "backend must be 'rule' or 'llm'");
        }
        send_json(res, 200, {{"layout", geometry::layout_to_json(plan.layout)}, {"trace", planner::to_json(plan.trace)}});
    }));

    server.Post("/v1/layouts/validate", guarded([](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        const geometry::Layout layout = geometry::layout_from_json(body.contains("layout") ? body["layout"] : body);
        const geometry::ValidationResult result = geometry::validate_layout(layout);
        json report = geometry::validation_to_json(result);
        try {
            report["repaired"] = geometry::layout_to_json(geometry::repair_layout(layout));
        } catch (const Error& e) {
            report["repaired"] = nullptr;
            report["repair_error"] = e.what();
        }
        if (layout.grid && layout.grid->h > 0 && layout.grid->w > 0 && result.ok()) {
            report["coverage"] = geometry::coverage_to_json(geometry::coverage(layout, layout.grid->h, layout.grid->w));
        }
        send_json(res, 200, report);
    }));

    server.Get("/v1/experts", guarded([this](const httplib::Request&, httplib::Response& res) {
        json experts = json::array();
        for (const auto& e : m_experts->registry().entries()) {
            experts.push_back({{"expert_id", e.expert_id},
                               {"style_tag", e.style_tag},
                               {"role", moe::to_string(e.role)},
                               {"notes", e.notes}});
        }
        send_json(res, 200, {{"experts", experts}, {"gate", m_experts->gate().has_value()}});
    }));

    server.Post("/v1/generate", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        if (!body.contains("layout")) raise(ErrorCode::Format, "missing 'layout'");
        const geometry::Layout layout = geometry::layout_from_json(body["layout"]);
        const scheduler::GenerationConfig config =
            scheduler::config_from_json(body.contains("config") ? body["config"] : json::object());
        const Job job = m_runner->submit(layout, config);
        send_json(res, 202, {{"job_id", job.job_id}, {"status", to_string(job.status)}});
    }));

    server.Get(R"(/v1/jobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, to_json(m_store.get(req.matches[1].str())));
    }));

    server.Get(R"(/v1/jobs/([^/]+)/image)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const Job job = m_store.get(req.matches[1].str());
        if (job.status != JobStatus::Done) raise(ErrorCode::NotReady, "job is " + to_string(job.status));
        res.status = 200;
        res.set_content(read_file(m_store.result_path(job.job_id)), "image/png");
    }));

    server.Get(R"(/v1/jobs/([^/]+)/trace)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const Job job = m_store.get(req.matches[1].str());
        if (job.status != JobStatus::Done) raise(ErrorCode::NotReady, "job is " + to_string(job.status));
        res.status = 200;
        res.set_content(read_file(m_store.trace_path(job.job_id)), "application/x-ndjson");
    }));
}

void serve(Service& service, const std::string& host, int port) {
    httplib::Server server;
    service.mount(server);
    if (!server.listen(host, port)) raise(ErrorCode::Io, "cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace mepg::service
