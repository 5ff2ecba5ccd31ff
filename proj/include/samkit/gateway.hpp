#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace samkit {

enum class Effort { none, low, medium, high };

std::string_view effort_name(Effort effort);
Effort parse_effort(std::string_view name);

struct ModelSpec {
  std::string model_id;
  Effort reasoning_effort = Effort::none;
  std::optional<double> temperature;  // provider default when unset
  int max_output_tokens = 0;          // 0 = provider default
  int context_window_tokens = 0;      // 0 = unknown, overflow check skipped
};

// Parses "model-id" or "model-id:effort".
ModelSpec parse_model_spec(std::string_view spec);
std::string model_spec_label(const ModelSpec& spec);

struct Message {
  std::string role;
  std::string text;
};

struct Usage {
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
};

struct Completion {
  std::string text;
  Usage usage;
};

class Provider {
 public:
  virtual ~Provider() = default;
  virtual Completion complete(const ModelSpec& spec, const std::vector<Message>& messages) = 0;
  virtual std::string name() const = 0;
};

// Returns the last user message verbatim.
class EchoProvider : public Provider {
 public:
  Completion complete(const ModelSpec& spec, const std::vector<Message>& messages) override;
  std::string name() const override { return "echo"; }
};

// Replays a fixed response queue; raises a scripted error when the entry
// starts with "!transient" or "!fail". Thread-safe.
class ScriptedProvider : public Provider {
 public:
  ScriptedProvider() = default;
  explicit ScriptedProvider(std::vector<std::string> responses);
  void push(std::string response);
  Completion complete(const ModelSpec& spec, const std::vector<Message>& messages) override;
  std::string name() const override { return "scripted"; }
  int calls() const;

 private:
  mutable std::mutex mutex_;
  std::deque<std::string> responses_;
  int calls_ = 0;
};

// Fails on any call. Used to assert that replay mode never touches the
// network.
class FailingProvider : public Provider {
 public:
  Completion complete(const ModelSpec& spec, const std::vector<Message>& messages) override;
  std::string name() const override { return "failing"; }
};

// Deterministic offline model. Recognizes the pipeline's prompt shapes
// (mimicry, privacy judge, grading, feedback, labeling) and produces
// plausible output as a pure function of (model id, messages). Fixture runs
// in record mode use it so replays are byte-stable.
class MockProvider : public Provider {
 public:
  Completion complete(const ModelSpec& spec, const std::vector<Message>& messages) override;
  std::string name() const override { return "mock"; }

  // Optional per-call delay schedule for concurrency tests.
  std::function<void()> call_hook;
};

// Chat-completions HTTP provider. Base URL and credentials come from
// SAMKIT_API_BASE / SAMKIT_API_KEY (OPENAI_API_KEY respected as fallback).
class HttpProvider : public Provider {
 public:
  HttpProvider();
  HttpProvider(std::string base_url, std::string api_key);
  Completion complete(const ModelSpec& spec, const std::vector<Message>& messages) override;
  std::string name() const override { return "http"; }

 private:
  std::string base_url_;
  std::string api_key_;
};

enum class GatewayMode { live, record, replay };

std::string_view gateway_mode_name(GatewayMode mode);
GatewayMode parse_gateway_mode(std::string_view name);

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{2000};
  double backoff_factor = 2.0;
};

struct GatewayConfig {
  GatewayMode mode = GatewayMode::replay;
  std::filesystem::path run_dir;
  RetryPolicy retry;
  int inflight_limit = 8;
  // Replaces the real backoff sleep when set; lets tests observe the schedule.
  std::function<void(std::chrono::milliseconds)> sleep_fn;
};

/// Uniform front door to model providers: mode handling (live / record /
/// replay), retries with exponential backoff, usage accounting and cassette
/// storage (one file per request key under <run_dir>/cassettes).
class Gateway {
 public:
  Gateway(GatewayConfig config, std::shared_ptr<Provider> provider);

  Completion complete(const ModelSpec& spec, const std::vector<Message>& messages);

  // Pure function of (model id, effort, messages).
  static std::string cassette_key(const ModelSpec& spec, const std::vector<Message>& messages);

  GatewayMode mode() const { return config_.mode; }
  const std::filesystem::path& run_dir() const { return config_.run_dir; }

 private:
  Completion call_with_retries(const ModelSpec& spec, const std::vector<Message>& messages,
                               int& attempts_used);
  void record_usage(const ModelSpec& spec, const Completion& completion, int attempt,
                    std::int64_t latency_ms);

  GatewayConfig config_;
  std::shared_ptr<Provider> provider_;
  std::mutex cassette_mutex_;
  std::mutex usage_mutex_;
  std::mutex inflight_mutex_;
  std::condition_variable inflight_cv_;
  int inflight_ = 0;
};

struct ModelUsage {
  std::int64_t calls = 0;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
};

/// Aggregate token and call counts per model for a run. Models with zero
/// calls are omitted; an unknown run directory raises NotFound.
std::map<std::string, ModelUsage> usage_report(const std::filesystem::path& run_dir);

}  // namespace samkit
