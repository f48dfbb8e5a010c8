// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

// mepg: plan layouts, train experts and the gate, generate, evaluate, serve.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include "mepg/core/error.hpp"
#include "mepg/diffusion/image_io.hpp"
#include "mepg/experiment/toy.hpp"
#include "mepg/geometry/layout_io.hpp"
#include "mepg/moe/registry.hpp"
#include "mepg/neural/checkpoint.hpp"
#include "mepg/neural/datasets.hpp"
#include "mepg/neural/gate.hpp"
#include "mepg/neural/train.hpp"
#include "mepg/planner/chain.hpp"
#include "mepg/scheduler/cross_denoise.hpp"
#include "mepg/service/server.hpp"

namespace {

using namespace mepg;
using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitValidation = 2;

void log_line(const std::string& line) { std::cerr << line << '\n'; }

void write_text(const fs::path& path, const std::string& text) {
    if (path == "-") {
        std::cout << text;
        return;
    }
    neural::write_file_atomic(path, text);
}

std::string env_or(const char* name, std::string fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

// Generation flags shared by `generate` and `eval`. Only flags the user set
// reach the config document, so unset ones keep the library defaults.
struct GenerationFlags {
    std::optional<std::size_t> steps, k, interleave, height, width;
    std::optional<double> p1, alpha_start;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> alpha_mode, overlap, schedule, activation, global_expert;
    std::optional<std::string> config_file;

    void add_to(CLI::App& app) {
        app.add_option("--config", config_file, "Generation config JSON (flags override it)");
        app.add_option("--n,--steps", steps, "Denoising steps N (default 50)");
        app.add_option("--p1", p1, "Fraction of steps in the local phase (default 0.7)");
        app.add_option("--k", k, "Experts activated per MoE site (default 2)");
        app.add_option("--interleave", interleave, "Global step every g-th local step, 0 disables (default 5)");
        app.add_option("--alpha-mode", alpha_mode, "lead-ramp | fixed");
        app.add_option("--alpha-start", alpha_start, "Global expert weight at the first global step (default 0.5)");
        app.add_option("--overlap", overlap, "mean | priority | inverse-area");
        app.add_option("--schedule", schedule, "scaled_linear | linear");
        app.add_option("--gate-activation", activation, "sigmoid | softmax");
        app.add_option("--global-expert", global_expert, "Expert id leading the global phase");
        app.add_option("--seed", seed, "Noise seed (default 42)");
        app.add_option("--height", height, "Image height when the layout has no grid");
        app.add_option("--width", width, "Image width when the layout has no grid");
    }

    scheduler::GenerationConfig build() const {
        json doc = json::object();
        if (config_file) {
            std::ifstream in(*config_file);
            if (!in) raise(ErrorCode::Io, "cannot read " + *config_file);
            doc = json::parse(in, nullptr, false);
            if (doc.is_discarded()) raise(ErrorCode::Format, *config_file + " is not valid JSON");
        }
        if (steps) doc["N"] = *steps;
        if (p1) doc["p1"] = *p1;
        if (k) doc["k"] = *k;
        if (interleave) doc["interleave_g"] = *interleave;
        if (alpha_mode) doc["alpha_mode"] = *alpha_mode;
        if (alpha_start) doc["alpha_global_start"] = *alpha_start;
        if (overlap) doc["overlap"] = *overlap;
        if (schedule) doc["schedule"] = *schedule;
        if (activation) doc["gate_activation"] = *activation;
        if (global_expert) doc["global_expert"] = *global_expert;
        if (seed) doc["seed"] = *seed;
        if (height) doc["height"] = *height;
        if (width) doc["width"] = *width;
        return scheduler::config_from_json(doc);
    }
};

struct LlmFlags {
    std::string url = "http://127.0.0.1:8081";
    std::string model = "planner";
    int timeout_ms = 30000;
    std::string fallback;

    void add_to(CLI::App& app) {
        app.add_option("--llm-url", url, "Chat-completions base URL")->capture_default_str();
        app.add_option("--llm-model", model, "Model name sent to the endpoint")->capture_default_str();
        app.add_option("--llm-timeout-ms", timeout_ms, "Per-request timeout")->capture_default_str();
        app.add_option("--fallback", fallback, "Backend used when the LLM is unreachable")
            ->check(CLI::IsMember({"rule"}));
    }

    planner::RemoteBackendConfig config() const {
        planner::RemoteBackendConfig c;
        c.base_url = url;
        c.model = model;
        c.timeout = std::chrono::milliseconds(timeout_ms);
        return c;
    }
};

int run_plan(const std::string& prompt, const std::string& backend, const std::string& out,
             const std::string& trace_out, int grid_h, int grid_w, const LlmFlags& llm) {
    planner::PlannerOptions options;
    options.grid_h = grid_h;
    options.grid_w = grid_w;
    planner::RuleBackend rule;
    planner::PlanResult plan;
    if (backend == "rule") {
        plan = planner::run_enhanced_chain(prompt, rule, options);
    } else {
        planner::RemoteBackend remote(llm.config());
        if (llm.fallback == "rule") options.fallback_backend = &rule;
        plan = planner::run_enhanced_chain(prompt, remote, options);
    }
    write_text(out, geometry::layout_to_json(plan.layout).dump(2) + "\n");
    if (!trace_out.empty()) write_text(trace_out, planner::to_json(plan.trace).dump(2) + "\n");
    if (plan.trace.fallback_engaged) log_line("planner fell back to the step-0 layout: " + plan.trace.fallback_reason);
    return kExitOk;
}

int run_generate(const std::string& layout_path, const std::string& experts_config, const GenerationFlags& flags,
                 const std::string& out, const std::string& trace_out, bool quiet) {
    const scheduler::GenerationConfig config = flags.build();
    const geometry::Layout layout = geometry::read_layout(layout_path);
    const geometry::ValidationResult check = geometry::validate_layout(layout);
    if (!check.ok()) {
        raise(ErrorCode::InvalidBox, layout_path + ": " + check.violations.front().message +
                                         " (run `mepg plan` or the validate endpoint to repair)");
    }
    const moe::ExpertSet experts = moe::ExpertSet::load(moe::ExpertRegistry::load(experts_config));
    scheduler::CrossDenoiseHooks hooks;
    if (!quiet) {
        hooks.on_step = [&](const scheduler::StepRecord& r, const Tensor&) {
            std::cerr << "\rstep " << r.t << "/" << config.steps << " (" << scheduler::to_string(r.executed) << ")   "
                      << std::flush;
        };
    }
    const scheduler::CrossDenoiseResult result = scheduler::cross_denoise(layout, experts, config, hooks);
    if (!quiet) std::cerr << '\n';
    neural::write_file_atomic(out, diffusion::encode_png(result.image));
    if (!trace_out.empty()) write_text(trace_out, scheduler::trace_to_jsonl(result.trace));
    return kExitOk;
}

struct TrainExpertFlags {
    std::string style = "stripes";
    std::string out;
    std::string id;
    std::string init;
    std::size_t samples = 256;
    std::size_t epochs = 3;
    std::size_t channels = 24;
    std::size_t steps = 50;
    double lr = 3e-3;
    std::uint64_t seed = 1;
    std::string schedule = "scaled_linear";
};

int run_train_expert(const TrainExpertFlags& f) {
    neural::TrainConfig config;
    config.model.channels = f.channels;
    config.model.steps = f.steps;
    config.schedule = diffusion::beta_schedule_from_string(f.schedule);
    config.epochs = f.epochs;
    config.lr = f.lr;
    config.seed = f.seed;
    std::optional<neural::DenoiserParams> init;
    if (!f.init.empty()) {
        init = neural::load_denoiser(f.init);
        config.model = init->config;
    }
    const neural::StyleDataset data = neural::make_dataset(f.style, f.samples, f.seed + 101);
    const neural::TrainReport report = neural::train_expert(data, config, init, [](std::size_t epoch, double loss) {
        log_line("epoch " + std::to_string(epoch + 1) + " held-out loss " + std::to_string(loss));
    });
    neural::CheckpointMeta meta;
    meta.expert_id = f.id.empty() ? f.style : f.id;
    meta.style_tag = f.style;
    meta.training_seed = f.seed;
    meta.dataset_hash = neural::dataset_hash(data);
    neural::save_denoiser(f.out, report.params, meta);
    std::cout << json{{"checkpoint", f.out},
                      {"expert_id", meta.expert_id},
                      {"style_tag", meta.style_tag},
                      {"initial_heldout_loss", report.initial_heldout_loss},
                      {"final_heldout_loss", report.final_heldout_loss},
                      {"met_target", report.met_target},
                      {"params_hash", neural::params_hash(report.params)}}
                     .dump(2)
              << '\n';
    return kExitOk;
}

struct TrainGateFlags {
    std::string experts_config;
    std::string data = "synthetic";
    std::string out;
    std::size_t per_style = 64;
    std::size_t t_max = 0;
    std::size_t epochs = 400;
    double lr = 0.05;
    std::uint64_t seed = 7;
    std::string schedule = "scaled_linear";
    bool update_config = false;
};

int run_train_gate(const TrainGateFlags& f) {
    // Absolute paths keep the registry valid if it is written back.
    moe::ExpertRegistry registry = moe::ExpertRegistry::load(fs::absolute(f.experts_config));
    std::vector<neural::DenoiserParams> experts;
    std::vector<std::string> tags;
    for (const auto& e : registry.entries()) {
        experts.push_back(neural::load_denoiser(e.checkpoint));
        tags.push_back(e.style_tag);
    }
    const std::size_t steps = experts.front().config.steps;
    const diffusion::NoiseSchedule schedule(steps, diffusion::beta_schedule_from_string(f.schedule));
    const std::vector<std::string> styles(experiment::kToyStyles.begin(), experiment::kToyStyles.end());
    const auto samples =
        neural::make_gate_dataset(styles, f.per_style, f.seed + 303, schedule, f.t_max ? f.t_max : std::max<std::size_t>(1, steps / 5));
    neural::GateTrainConfig config;
    config.epochs = f.epochs;
    config.lr = f.lr;
    config.seed = f.seed;
    const neural::GateTrainReport report = neural::train_gate(experts, tags, samples, config);
    neural::CheckpointMeta meta;
    meta.kind = "gate";
    meta.training_seed = f.seed;
    neural::save_gate(f.out, report.gate, meta);
    if (f.update_config) {
        registry.set_gate_path(fs::absolute(f.out));
        registry.save(f.experts_config);
    }
    std::cout << json{{"gate", f.out},
                      {"heldout_routing_accuracy", report.heldout_accuracy},
                      {"heldout_examples", report.heldout_examples},
                      {"initial_loss", report.initial_loss},
                      {"final_loss", report.final_loss},
                      {"experts_unchanged", report.expert_hashes_before == report.expert_hashes_after}}
                     .dump(2)
              << '\n';
    return kExitOk;
}

struct EvalFlags {
    std::size_t trials = 50;
    std::string report = "-";
    std::string experts_config;
    std::string models_dir;
    std::size_t calibration_samples = 8;
    std::uint64_t calibration_seed = 1000;
    std::uint64_t train_seed = 1;
};

int run_eval(const EvalFlags& f, const GenerationFlags& gen) {
    const scheduler::GenerationConfig config = gen.build();
    moe::ExpertSet experts;
    json training = nullptr;
    if (!f.experts_config.empty()) {
        experts = moe::ExpertSet::load(moe::ExpertRegistry::load(f.experts_config));
    } else {
        experiment::ToyConfig toy;
        toy.seed = f.train_seed;
        toy.schedule = config.schedule;
        const experiment::ToyModels models = experiment::train_toy_models(toy, log_line);
        if (!f.models_dir.empty()) experiment::save_toy_models(models, f.models_dir);
        experts = experiment::toy_expert_set(models);
        training = {{"gate_heldout_accuracy", models.gate_report.heldout_accuracy},
                    {"base_final_loss", models.base_report.final_heldout_loss},
                    {"blobs_final_loss", models.blobs_report.final_heldout_loss},
                    {"stripes_final_loss", models.stripes_report.final_heldout_loss}};
    }
    const experiment::Calibration calibration =
        experiment::calibrate(experts, f.calibration_samples, f.calibration_seed, config.schedule);
    const experiment::AttributionReport report =
        experiment::run_attribution(experts, config, f.trials, calibration, log_line);
    json doc = experiment::to_json(report);
    doc["trials"] = f.trials;
    doc["config"] = scheduler::config_to_json(config);
    doc["training"] = training;
    write_text(f.report, doc.dump(2) + "\n");
    log_line("attribution accuracy " + std::to_string(report.accuracy));
    return kExitOk;
}

struct ServeFlags {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string experts_config;
    std::string state_dir;
    std::size_t workers = service::default_worker_count();
    std::size_t queue = 16;
    std::string prompts_dir;
};

int run_serve(const ServeFlags& f, const LlmFlags& llm) {
    service::ServiceOptions options;
    options.state_dir = f.state_dir.empty() ? env_or("MEPG_STATE_DIR", "mepg-state") : f.state_dir;
    options.workers = f.workers;
    options.queue_capacity = f.queue;
    options.llm = llm.config();
    options.fallback_rule = llm.fallback == "rule";
    if (!f.prompts_dir.empty()) options.prompts_dir = f.prompts_dir;
    auto experts = std::make_shared<const moe::ExpertSet>(moe::ExpertSet::load(moe::ExpertRegistry::load(f.experts_config)));
    service::Service svc(options, experts);
    log_line("serving on http://" + f.host + ":" + std::to_string(f.port) + " (state " + options.state_dir.string() + ")");
    service::serve(svc, f.host, f.port);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Layout-planned multi-expert diffusion toolkit"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    std::string prompt, backend = "rule", plan_out = "-", plan_trace;
    int grid_h = 32, grid_w = 32;
    LlmFlags llm;
    auto* plan = app.add_subcommand("plan", "Turn a prompt into a layout document");
    plan->add_option("prompt", prompt, "Prompt text")->required();
    plan->add_option("--backend", backend, "rule | llm")->check(CLI::IsMember({"rule", "llm"}))->capture_default_str();
    plan->add_option("--out", plan_out, "Layout JSON path, - for stdout")->capture_default_str();
    plan->add_option("--trace", plan_trace, "Write the planning trace JSON here");
    plan->add_option("--grid-h", grid_h, "Target latent grid height")->capture_default_str();
    plan->add_option("--grid-w", grid_w, "Target latent grid width")->capture_default_str();
    llm.add_to(*plan);

    std::string layout_path, experts_config = env_or("MEPG_EXPERTS_CONFIG", ""), gen_out = "out.png", gen_trace;
    bool quiet = false;
    GenerationFlags gen;
    auto* generate = app.add_subcommand("generate", "Cross-denoise an image from a layout");
    generate->add_option("layout", layout_path, "Layout JSON")->required()->check(CLI::ExistingFile);
    generate->add_option("--experts-config", experts_config, "Expert registry YAML/JSON")->required();
    generate->add_option("--out", gen_out, "Output PNG")->capture_default_str();
    generate->add_option("--trace", gen_trace, "Per-step trace JSONL");
    generate->add_flag("--quiet", quiet, "No progress output");
    gen.add_to(*generate);

    TrainExpertFlags te;
    auto* train_expert = app.add_subcommand("train-expert", "Train a toy-style expert denoiser");
    train_expert->add_option("--style", te.style, "blobs | stripes | mixed")
        ->check(CLI::IsMember({"blobs", "stripes", "mixed"}))
        ->capture_default_str();
    train_expert->add_option("--out", te.out, "Checkpoint path")->required();
    train_expert->add_option("--id", te.id, "Expert id stored in the sidecar (default: style)");
    train_expert->add_option("--init", te.init, "Fine-tune from this checkpoint")->check(CLI::ExistingFile);
    train_expert->add_option("--samples", te.samples, "Training images")->capture_default_str();
    train_expert->add_option("--epochs", te.epochs, "Epochs")->capture_default_str();
    train_expert->add_option("--channels", te.channels, "Hidden channels")->capture_default_str();
    train_expert->add_option("--steps", te.steps, "Diffusion steps of the timestep table")->capture_default_str();
    train_expert->add_option("--lr", te.lr, "Learning rate")->capture_default_str();
    train_expert->add_option("--seed", te.seed, "Seed")->capture_default_str();
    train_expert->add_option("--schedule", te.schedule, "scaled_linear | linear")->capture_default_str();

    TrainGateFlags tg;
    auto* train_gate = app.add_subcommand("train-gate", "Train the routing gate over frozen experts");
    train_gate->add_option("--experts-config", tg.experts_config, "Expert registry")->required();
    train_gate->add_option("--data", tg.data, "Training data source")->check(CLI::IsMember({"synthetic"}))->capture_default_str();
    train_gate->add_option("--out", tg.out, "Gate checkpoint path")->required();
    train_gate->add_option("--per-style", tg.per_style, "Labeled samples per style")->capture_default_str();
    train_gate->add_option("--t-max", tg.t_max, "Largest noise step of training samples (0: steps/5)");
    train_gate->add_option("--epochs", tg.epochs, "Epochs")->capture_default_str();
    train_gate->add_option("--lr", tg.lr, "Learning rate")->capture_default_str();
    train_gate->add_option("--seed", tg.seed, "Seed")->capture_default_str();
    train_gate->add_option("--schedule", tg.schedule, "Noise schedule the experts were trained with")->capture_default_str();
    train_gate->add_flag("--update-config", tg.update_config, "Record the gate path in the registry file");

    EvalFlags ev;
    GenerationFlags eval_gen;
    auto* eval = app.add_subcommand("eval", "Region-style attribution experiment on toy experts");
    eval->add_option("--trials", ev.trials, "Generated images")->capture_default_str();
    eval->add_option("--report", ev.report, "Report JSON path, - for stdout")->capture_default_str();
    eval->add_option("--experts-config", ev.experts_config, "Use trained toy experts instead of training");
    eval->add_option("--models-dir", ev.models_dir, "Save the trained toy experts here");
    eval->add_option("--calibration-samples", ev.calibration_samples, "Plain samples per style")->capture_default_str();
    eval->add_option("--calibration-seed", ev.calibration_seed, "Seed of the calibration samples")->capture_default_str();
    eval->add_option("--train-seed", ev.train_seed, "Seed for toy training")->capture_default_str();
    eval_gen.add_to(*eval);

    ServeFlags sv;
    LlmFlags serve_llm;
    auto* serve = app.add_subcommand("serve", "Run the HTTP service");
    serve->add_option("--host", sv.host, "Bind address")->capture_default_str();
    serve->add_option("--port", sv.port, "Port")->capture_default_str();
    serve->add_option("--experts-config", sv.experts_config, "Expert registry")->required();
    serve->add_option("--state-dir", sv.state_dir, "Job state directory (default $MEPG_STATE_DIR or ./mepg-state)");
    serve->add_option("--workers", sv.workers, "Generation workers")->capture_default_str();
    serve->add_option("--queue", sv.queue, "Queued job limit")->capture_default_str();
    serve->add_option("--prompts-dir", sv.prompts_dir, "Override planner prompt templates");
    serve_llm.add_to(*serve);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    try {
        if (*plan) return run_plan(prompt, backend, plan_out, plan_trace, grid_h, grid_w, llm);
        if (*generate) return run_generate(layout_path, experts_config, gen, gen_out, gen_trace, quiet);
        if (*train_expert) return run_train_expert(te);
        if (*train_gate) return run_train_gate(tg);
        if (*eval) return run_eval(ev, eval_gen);
        if (*serve) return run_serve(sv, serve_llm);
    } catch (const GrammarError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return service::http_status(e.code()) == 422 ? kExitValidation : kExitFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitFailure;
}
