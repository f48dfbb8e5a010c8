// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "mepg/core/rng.hpp"
#include "mepg/diffusion/image_io.hpp"
#include "mepg/geometry/layout_io.hpp"
#include "mepg/service/server.hpp"

namespace {

using namespace mepg;
using namespace mepg::service;
using nlohmann::json;
namespace fs = std::filesystem;

fs::path temp_dir() {
    std::string tmpl = (fs::temp_directory_path() / "mepg-service-XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    return tmpl;
}

std::shared_ptr<const neural::DenoiserParams> tiny_expert(std::uint64_t seed) {
    neural::DenoiserConfig cfg;
    cfg.channels = 4;
    cfg.steps = 12;
    auto p = neural::DenoiserParams::init(cfg, seed);
    Rng rng(seed, 9);
    for (double& v : p.cond_emb.data()) v = 0.3 * rng.normal();
    return std::make_shared<const neural::DenoiserParams>(std::move(p));
}

std::shared_ptr<const moe::ExpertSet> four_experts() {
    moe::ExpertRegistry reg({{"base", "base.ckpt", "", moe::ExpertRole::Global, ""},
                             {"realism", "realism.ckpt", "realism", moe::ExpertRole::Global, ""},
                             {"anime", "anime.ckpt", "anime", moe::ExpertRole::Local, ""},
                             {"stripes", "stripes.ckpt", "stripes", moe::ExpertRole::Local, ""}});
    return std::make_shared<const moe::ExpertSet>(
        reg, std::vector{tiny_expert(1), tiny_expert(2), tiny_expert(3), tiny_expert(4)},
        neural::GateParams::init(4, 4, 7));
}

json tiny_config(std::uint64_t seed = 3) {
    return {{"N", 12}, {"seed", seed}, {"schedule", "linear"}, {"height", 8}, {"width", 8}};
}

json two_region_layout() {
    return {{"schema", "mepg_layout_v1"},
            {"global_prompt", "a cat and a dog"},
            {"regions",
             {{{"box", {0, 0, 500, 1000}}, {"prompt", "a cat"}, {"expert_id", "anime"}, {"style_tag", ""}},
              {{"box", {500, 0, 1000, 1000}}, {"prompt", "a dog"}, {"expert_id", ""}, {"style_tag", "stripes"}}}}};
}

// A Service mounted on an ephemeral port.
class Harness {
public:
    explicit Harness(ServiceOptions options, std::shared_ptr<const moe::ExpertSet> experts = four_experts())
        : service(std::move(options), std::move(experts)) {
        service.mount(server);
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
        client = std::make_unique<httplib::Client>("127.0.0.1", port);
        client->set_read_timeout(30, 0);
    }
    ~Harness() {
        server.stop();
        thread.join();
    }

    httplib::Result post(const std::string& path, const json& body) {
        return client->Post(path, body.dump(), "application/json");
    }

    json wait_done(const std::string& id) {
        for (int i = 0; i < 3000; ++i) {
            auto res = client->Get("/v1/jobs/" + id);
            const json job = json::parse(res->body);
            if (job["status"] == "done" || job["status"] == "failed") return job;
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
        }
        ADD_FAILURE() << "job " << id << " did not finish";
        return {};
    }

    Service service;
    httplib::Server server;
    int port = 0;
    std::thread thread;
    std::unique_ptr<httplib::Client> client;
};

ServiceOptions options_in(const fs::path& dir, std::size_t workers = 1, std::size_t capacity = 16) {
    ServiceOptions o;
    o.state_dir = dir;
    o.workers = workers;
    o.queue_capacity = capacity;
    return o;
}

TEST(Service, PlanWithRuleBackend) {
    Harness h(options_in(temp_dir()));
    auto res = h.post("/v1/plan", {{"prompt", "a cat on the left and a dog on the right"}, {"backend", "rule"}});
    ASSERT_TRUE(res);
    ASSERT_EQ(res->status, 200) << res->body;
    const json body = json::parse(res->body);
    ASSERT_EQ(body["layout"]["regions"].size(), 2u);
    EXPECT_EQ(body["layout"]["regions"][0]["box"], json::array({0, 250, 400, 750}));
    EXPECT_EQ(body["layout"]["regions"][1]["box"], json::array({600, 250, 1000, 750}));
    EXPECT_EQ(body["layout"]["schema"], "mepg_layout_v1");
    EXPECT_EQ(body["trace"]["fallback_engaged"], false);
    EXPECT_EQ(body["trace"]["steps"].size(), 6u);
    EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");
}

TEST(Service, PlanErrors) {
    ServiceOptions o = options_in(temp_dir());
    {
        httplib::Server probe;
        o.llm.base_url = "http://127.0.0.1:" + std::to_string(probe.bind_to_any_port("127.0.0.1"));
    }
    o.llm.timeout = std::chrono::milliseconds(300);
    Harness h(o);
    auto empty = h.post("/v1/plan", {{"prompt", ""}, {"backend", "rule"}});
    EXPECT_EQ(empty->status, 422);
    auto grammar = h.post("/v1/plan", {{"prompt", "a cat; a dog"}, {"backend", "rule"}});
    EXPECT_EQ(grammar->status, 422);
    EXPECT_EQ(json::parse(grammar->body)["error"]["offset"], 5);
    auto down = h.post("/v1/plan", {{"prompt", "a cat"}, {"backend", "llm"}});
    EXPECT_EQ(down->status, 502);
    EXPECT_EQ(h.post("/v1/plan", {{"prompt", "a cat"}, {"backend", "oracle"}})->status, 422);
    EXPECT_EQ(h.client->Post("/v1/plan", "{not json", "application/json")->status, 422);
}

TEST(Service, PlanLlmFallbackWhenConfigured) {
    ServiceOptions o = options_in(temp_dir());
    {
        httplib::Server probe;
        o.llm.base_url = "http://127.0.0.1:" + std::to_string(probe.bind_to_any_port("127.0.0.1"));
    }
    o.llm.timeout = std::chrono::milliseconds(300);
    o.fallback_rule = true;
    Harness h(o);
    auto res = h.post("/v1/plan", {{"prompt", "a cat on the left"}, {"backend", "llm"}});
    ASSERT_EQ(res->status, 200);
    EXPECT_EQ(json::parse(res->body)["trace"]["backend_used"], "rule");
}

TEST(Service, ExpertsListing) {
    Harness h(options_in(temp_dir()));
    auto res = h.client->Get("/v1/experts");
    ASSERT_EQ(res->status, 200);
    const json body = json::parse(res->body);
    ASSERT_EQ(body["experts"].size(), 4u);
    EXPECT_EQ(body["experts"][2]["expert_id"], "anime");
    EXPECT_EQ(body["experts"][2]["style_tag"], "anime");
    EXPECT_EQ(body["experts"][2]["role"], "local");
    EXPECT_EQ(body["gate"], true);
}

TEST(Service, ValidateLayouts) {
    Harness h(options_in(temp_dir()));
    json full = {{"global_prompt", "x"}, {"regions", {{{"box", {0, 0, 1000, 1000}}, {"prompt", "x"}}}}};
    auto ok = h.post("/v1/layouts/validate", {{"layout", full}});
    ASSERT_EQ(ok->status, 200);
    EXPECT_EQ(json::parse(ok->body)["ok"], true);

    json inverted = {{"global_prompt", "x"}, {"regions", {{{"box", {600, 0, 100, 1000}}, {"prompt", "x"}}}}};
    auto bad = h.post("/v1/layouts/validate", inverted);
    ASSERT_EQ(bad->status, 200);
    const json report = json::parse(bad->body);
    EXPECT_EQ(report["ok"], false);
    EXPECT_FALSE(report["violations"].empty());
    EXPECT_EQ(report["repaired"]["regions"][0]["box"], json::array({100, 0, 600, 1000}));
}

TEST(Service, GenerateRoundTrip) {
    Harness h(options_in(temp_dir()));
    auto res = h.post("/v1/generate", {{"layout", two_region_layout()}, {"config", tiny_config()}});
    ASSERT_EQ(res->status, 202) << res->body;
    const std::string id = json::parse(res->body)["job_id"];
    EXPECT_EQ(id.size(), 36u);
    const json job = h.wait_done(id);
    ASSERT_EQ(job["status"], "done") << job.dump();
    EXPECT_EQ(job["progress"]["completed"], 12);
    EXPECT_EQ(job["progress"]["total"], 12);
    EXPECT_TRUE(job["result_path"].is_string());

    auto image = h.client->Get("/v1/jobs/" + id + "/image");
    ASSERT_EQ(image->status, 200);
    EXPECT_EQ(image->get_header_value("Content-Type"), "image/png");
    const Tensor decoded = diffusion::decode_png(image->body);
    EXPECT_EQ(decoded.shape(), (std::vector<std::size_t>{1, 8, 8}));

    auto trace = h.client->Get("/v1/jobs/" + id + "/trace");
    ASSERT_EQ(trace->status, 200);
    std::istringstream lines(trace->body);
    std::size_t count = 0;
    for (std::string line; std::getline(lines, line); ++count) {
        const json step = json::parse(line);
        EXPECT_EQ(step["t"], count + 1);
    }
    EXPECT_EQ(count, 12u);

    // Same request, same bytes.
    auto again = h.post("/v1/generate", {{"layout", two_region_layout()}, {"config", tiny_config()}});
    const std::string id2 = json::parse(again->body)["job_id"];
    ASSERT_EQ(h.wait_done(id2)["status"], "done");
    EXPECT_EQ(h.client->Get("/v1/jobs/" + id2 + "/image")->body, image->body);
    EXPECT_FALSE(fs::exists(h.service.store().job_dir(id) / "job.json.tmp"));
}

TEST(Service, GenerateRejectsBadRequests) {
    Harness h(options_in(temp_dir()));
    json zero = tiny_config();
    zero["N"] = 0;
    EXPECT_EQ(h.post("/v1/generate", {{"layout", two_region_layout()}, {"config", zero}})->status, 422);
    json big = tiny_config();
    big["N"] = 1001;
    EXPECT_EQ(h.post("/v1/generate", {{"layout", two_region_layout()}, {"config", big}})->status, 422);
    json layout = two_region_layout();
    layout["regions"][0]["box"] = {0, 0, 5, 1000};
    EXPECT_EQ(h.post("/v1/generate", {{"layout", layout}, {"config", tiny_config()}})->status, 422);
    layout = two_region_layout();
    layout["regions"][0]["expert_id"] = "nobody";
    EXPECT_EQ(h.post("/v1/generate", {{"layout", layout}, {"config", tiny_config()}})->status, 422);
    json many = two_region_layout();
    for (int i = 0; i < 8; ++i) many["regions"].push_back({{"box", {0, 0, 100, 100}}, {"prompt", "p" + std::to_string(i)}});
    EXPECT_EQ(h.post("/v1/generate", {{"layout", many}, {"config", tiny_config()}})->status, 422);
    EXPECT_EQ(h.client->Get("/v1/jobs/00000000-0000-4000-8000-000000000000")->status, 404);
    EXPECT_EQ(h.client->Get("/v1/jobs/..%2F..%2Fetc/image")->status, 404);
}

TEST(Service, QueueFullAndNotReady) {
    Harness h(options_in(temp_dir(), /*workers=*/0, /*capacity=*/2));
    const json request = {{"layout", two_region_layout()}, {"config", tiny_config()}};
    auto first = h.post("/v1/generate", request);
    ASSERT_EQ(first->status, 202);
    EXPECT_EQ(h.post("/v1/generate", request)->status, 202);
    EXPECT_EQ(h.post("/v1/generate", request)->status, 429);
    const std::string id = json::parse(first->body)["job_id"];
    EXPECT_EQ(json::parse(h.client->Get("/v1/jobs/" + id)->body)["status"], "queued");
    EXPECT_EQ(h.client->Get("/v1/jobs/" + id + "/image")->status, 409);
    EXPECT_EQ(h.client->Get("/v1/jobs/" + id + "/trace")->status, 409);
}

TEST(Service, CorsPreflight) {
    Harness h(options_in(temp_dir()));
    auto res = h.client->Options("/v1/generate");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 204);
    EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");
    EXPECT_NE(res->get_header_value("Access-Control-Allow-Methods").find("POST"), std::string::npos);
}

TEST(Service, RestartMarksRunningInterruptedAndResumesQueued) {
    const fs::path dir = temp_dir();
    std::string running_id, queued_id;
    {
        JobStore store(dir);
        const json request = {{"layout", two_region_layout()}, {"config", tiny_config()}};
        running_id = store.update(store.create(request, 12).job_id, [](Job& j) {
                              j.status = JobStatus::Running;
                              j.steps_done = 4;
                          }).job_id;
        queued_id = store.create(request, 12).job_id;
    }
    Harness h(options_in(dir));
    const json running = json::parse(h.client->Get("/v1/jobs/" + running_id)->body);
    EXPECT_EQ(running["status"], "failed");
    EXPECT_EQ(running["error"], "interrupted");
    EXPECT_EQ(h.wait_done(queued_id)["status"], "done");
}

TEST(JobStore, DocumentRoundTrip) {
    JobStore store(temp_dir());
    const Job created = store.create({{"k", 1}}, 50);
    const Job loaded = store.get(created.job_id);
    EXPECT_EQ(to_json(loaded), to_json(created));
    EXPECT_EQ(loaded.status, JobStatus::Queued);
    EXPECT_EQ(job_from_json(to_json(loaded)).job_id, created.job_id);
    EXPECT_THROW(store.get("ffff"), Error);
    EXPECT_THROW(store.job_dir("../x"), Error);
    EXPECT_NE(make_uuid(), make_uuid());
}

TEST(JobStore, StatusCodes) {
    EXPECT_EQ(http_status(ErrorCode::GrammarError), 422);
    EXPECT_EQ(http_status(ErrorCode::BackendUnavailable), 502);
    EXPECT_EQ(http_status(ErrorCode::QueueFull), 429);
    EXPECT_EQ(http_status(ErrorCode::NotFound), 404);
    EXPECT_EQ(http_status(ErrorCode::NotReady), 409);
    EXPECT_EQ(http_status(ErrorCode::Io), 500);
}

}  // namespace
