// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#include "mepg/planner/backend.hpp"

#include <cstdlib>
#include <fstream>
#include <httplib.h>
#include <sstream>

#include "mepg/core/error.hpp"
#include "mepg/planner/grammar.hpp"
#include "mepg/planner/wire.hpp"

namespace mepg::planner {

using nlohmann::json;

std::string RuleBackend::complete(std::string_view step, const std::string&, const std::string& context) {
    const std::vector<Clause> clauses = parse_clauses(context);
    std::ostringstream out;
    if (step == step::kLoraElements || step == step::kElements) {
        for (std::size_t i = 0; i < clauses.size(); ++i) out << (i ? ", " : "") << clauses[i].element;
    } else if (step == step::kLoraLayout || step == step::kArrange) {
        for (const auto& c : clauses) out << format_box_line(c.element, c.box) << '\n';
    } else if (step == step::kPositions) {
        std::size_t strip = 0, strips = 0;
        for (const auto& c : clauses) strips += !c.placement;
        for (const auto& c : clauses) {
            out << c.element << ": ";
            if (c.placement) {
                out << placement_phrase(*c.placement) << '\n';
            } else {
                out << "vertical strip " << ++strip << " of " << strips << '\n';
            }
        }
    } else if (step == step::kDetails) {
        for (const auto& c : clauses) out << format_detail_line({c.element, c.box, c.text, c.style_tag}) << '\n';
    } else {
        raise(ErrorCode::BackendUnavailable, "rule backend has no answer for step '" + std::string(step) + "'");
    }
    return out.str();
}

ReplayBackend::ReplayBackend(const json& transcript) {
    try {
        m_name = transcript.value("name", std::string("transcript"));
        m_prompt = transcript.value("prompt", std::string());
        for (const auto& [key, value] : transcript.at("responses").items()) {
            m_responses.emplace(key, value.get<std::string>());
        }
    } catch (const json::exception& e) {
        raise(ErrorCode::Format, std::string("transcript: ") + e.what());
    }
}

ReplayBackend ReplayBackend::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorCode::Io, "cannot read transcript " + path.string());
    try {
        return ReplayBackend(json::parse(in));
    } catch (const json::parse_error& e) {
        raise(ErrorCode::Format, "transcript " + path.string() + ": " + e.what());
    }
}

std::string ReplayBackend::complete(std::string_view step, const std::string&, const std::string&) {
    auto it = m_responses.find(step);
    if (it == m_responses.end()) {
        raise(ErrorCode::BackendUnavailable, "transcript " + m_name + " has no '" + std::string(step) + "' response");
    }
    return it->second;
}

RemoteBackend::RemoteBackend(RemoteBackendConfig config) : m_config(std::move(config)) {
    if (m_config.max_in_flight == 0) raise(ErrorCode::InvalidConfig, "max_in_flight must be positive");
}

std::string RemoteBackend::request_once(const std::string& instruction, std::string& error) {
    httplib::Client client(m_config.base_url);
    const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(m_config.timeout);
    const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(m_config.timeout - seconds);
    client.set_connection_timeout(seconds.count(), micros.count());
    client.set_read_timeout(seconds.count(), micros.count());
    client.set_write_timeout(seconds.count(), micros.count());

    httplib::Headers headers;
    if (const char* token = std::getenv(m_config.token_env.c_str()); token != nullptr && *token != '\0') {
        headers.emplace("Authorization", std::string("Bearer ") + token);
    }
    const json body = {{"model", m_config.model},
                       {"temperature", 0},
                       {"messages", json::array({{{"role", "user"}, {"content", instruction}}})}};
    auto res = client.Post(m_config.path, headers, body.dump(), "application/json");
    if (!res) {
        error = "request failed: " + httplib::to_string(res.error());
        return {};
    }
    if (res->status < 200 || res->status >= 300) {
        error = "HTTP " + std::to_string(res->status);
        return {};
    }
    try {
        const json doc = json::parse(res->body);
        const json& content = doc.at("choices").at(0).at("message").at("content");
        if (!content.is_string()) throw std::runtime_error("content is not text");
        return content.get<std::string>();
    } catch (const std::exception& e) {
        error = std::string("malformed completion envelope: ") + e.what();
        return {};
    }
}

std::string RemoteBackend::complete(std::string_view step, const std::string& instruction, const std::string&) {
    {
        std::unique_lock lock(m_mutex);
        m_cv.wait(lock, [&] { return m_in_flight < m_config.max_in_flight; });
        ++m_in_flight;
    }
    struct Release {
        RemoteBackend& self;
        ~Release() {
            {
                std::lock_guard lock(self.m_mutex);
                --self.m_in_flight;
            }
            self.m_cv.notify_one();
        }
    } release{*this};

    std::string error;
    for (int attempt = 0; attempt < 2; ++attempt) {
        error.clear();
        std::string text = request_once(instruction, error);
        if (error.empty()) return text;
    }
    raise(ErrorCode::BackendUnavailable, "planner backend " + m_config.base_url + " step " + std::string(step) + ": " +
                                             error);
}

}  // namespace mepg::planner
