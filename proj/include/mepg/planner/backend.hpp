// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <json.hpp>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

namespace mepg::planner {

/// Chain step names; each matches a prompt template.
namespace step {
inline constexpr std::string_view kLoraElements = "lora_elements";
inline constexpr std::string_view kLoraLayout = "lora_layout";
inline constexpr std::string_view kElements = "step1_elements";
inline constexpr std::string_view kPositions = "step1_positions";
inline constexpr std::string_view kArrange = "step2_arrange";
inline constexpr std::string_view kDetails = "step3_details";
}  // namespace step

/// A text-completion service used by the planning chain. `instruction` is the
/// rendered prompt template, `context` the user's original prompt, and
/// `step` names the chain step so offline backends can answer without
/// parsing the instruction.
class PlannerBackend {
public:
    virtual ~PlannerBackend() = default;
    virtual std::string complete(std::string_view step, const std::string& instruction,
                                 const std::string& context) = 0;
    virtual std::string identifier() const = 0;
    virtual std::chrono::milliseconds timeout() const { return std::chrono::milliseconds(30000); }
};

/// Deterministic offline backend answering every step from the rule grammar.
/// Throws GrammarError for prompts outside the grammar.
class RuleBackend final : public PlannerBackend {
public:
    std::string complete(std::string_view step, const std::string& instruction, const std::string& context) override;
    std::string identifier() const override { return "rule"; }
};

/// Plays back recorded step outputs. Transcript JSON:
///   {"name": "...", "prompt": "...", "responses": {"<step>": "<text>", ...}}
/// A step missing from the transcript raises BackendUnavailable.
class ReplayBackend final : public PlannerBackend {
public:
    explicit ReplayBackend(const nlohmann::json& transcript);
    static ReplayBackend from_file(const std::filesystem::path& path);

    std::string complete(std::string_view step, const std::string& instruction, const std::string& context) override;
    std::string identifier() const override { return "replay:" + m_name; }
    const std::string& prompt() const noexcept { return m_prompt; }

private:
    std::string m_name;
    std::string m_prompt;
    std::map<std::string, std::string, std::less<>> m_responses;
};

struct RemoteBackendConfig {
    /// Scheme, host and optional port, e.g. "http://127.0.0.1:8081".
    std::string base_url = "http://127.0.0.1:8081";
    std::string path = "/v1/chat/completions";
    std::string model = "planner";
    /// Environment variable holding the bearer token; unset sends no header.
    std::string token_env = "MEPG_LLM_TOKEN";
    std::chrono::milliseconds timeout{30000};
    /// Concurrent requests allowed through one backend instance.
    std::size_t max_in_flight = 4;
};

/// Chat-completions client. Each call is attempted twice before raising
/// BackendUnavailable. Output is untrusted and re-validated by the chain.
class RemoteBackend final : public PlannerBackend {
public:
    explicit RemoteBackend(RemoteBackendConfig config);

    std::string complete(std::string_view step, const std::string& instruction, const std::string& context) override;
    std::string identifier() const override { return "remote:" + m_config.model; }
    std::chrono::milliseconds timeout() const override { return m_config.timeout; }

private:
    std::string request_once(const std::string& instruction, std::string& error);

    RemoteBackendConfig m_config;
    std::mutex m_mutex;
    std::condition_variable m_cv;
    std::size_t m_in_flight = 0;
};

}  // namespace mepg::planner
