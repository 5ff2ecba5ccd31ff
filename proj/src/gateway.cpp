#include <httplib.h>

#include "samkit/gateway.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "samkit/errors.hpp"
#include "samkit/util.hpp"

namespace samkit {

using nlohmann::json;

std::string_view effort_name(Effort effort) {
  switch (effort) {
    case Effort::none: return "none";
    case Effort::low: return "low";
    case Effort::medium: return "medium";
    case Effort::high: return "high";
  }
  return "none";
}

Effort parse_effort(std::string_view name) {
  if (name == "none") return Effort::none;
  if (name == "low") return Effort::low;
  if (name == "medium") return Effort::medium;
  if (name == "high") return Effort::high;
  throw ConfigError("unknown reasoning effort: " + std::string(name));
}

ModelSpec parse_model_spec(std::string_view spec) {
  ModelSpec result;
  std::size_t colon = spec.rfind(':');
  if (colon != std::string_view::npos) {
    std::string_view suffix = spec.substr(colon + 1);
    if (suffix == "none" || suffix == "low" || suffix == "medium" || suffix == "high") {
      result.model_id = std::string(spec.substr(0, colon));
      result.reasoning_effort = parse_effort(suffix);
      return result;
    }
  }
  result.model_id = std::string(spec);
  return result;
}

std::string model_spec_label(const ModelSpec& spec) {
  if (spec.reasoning_effort == Effort::none) return spec.model_id;
  return spec.model_id + "-" + std::string(effort_name(spec.reasoning_effort));
}

Completion EchoProvider::complete(const ModelSpec&, const std::vector<Message>& messages) {
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->role == "user") {
      Completion c;
      c.text = it->text;
      c.usage.input_tokens = static_cast<std::int64_t>(estimate_tokens(word_count(it->text)));
      c.usage.output_tokens = c.usage.input_tokens;
      return c;
    }
  }
  return {};
}

ScriptedProvider::ScriptedProvider(std::vector<std::string> responses) {
  for (auto& r : responses) responses_.push_back(std::move(r));
}

void ScriptedProvider::push(std::string response) {
  std::lock_guard lock(mutex_);
  responses_.push_back(std::move(response));
}

int ScriptedProvider::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

Completion ScriptedProvider::complete(const ModelSpec&, const std::vector<Message>& messages) {
  std::string next;
  {
    std::lock_guard lock(mutex_);
    ++calls_;
    if (responses_.empty()) throw ProviderError("scripted provider exhausted");
    next = std::move(responses_.front());
    responses_.pop_front();
  }
  if (next.rfind("!transient", 0) == 0) throw TransientProviderError("scripted transient failure");
  if (next.rfind("!fail", 0) == 0) throw ProviderError("scripted hard failure");
  Completion c;
  c.text = std::move(next);
  std::size_t input_words = 0;
  for (const auto& m : messages) input_words += word_count(m.text);
  c.usage.input_tokens = static_cast<std::int64_t>(estimate_tokens(input_words));
  c.usage.output_tokens = static_cast<std::int64_t>(estimate_tokens(word_count(c.text)));
  return c;
}

Completion FailingProvider::complete(const ModelSpec&, const std::vector<Message>&) {
  throw ProviderError("provider invoked while network activity is forbidden");
}

namespace {

// Last <<<...>>> block of a prompt; that is where templates put the artifact
// being imitated or graded.
std::string last_payload_block(const std::string& prompt) {
  std::size_t open = prompt.rfind("<<<\n");
  if (open == std::string::npos) return prompt;
  std::size_t start = open + 4;
  std::size_t close = prompt.find("\n>>>", start);
  if (close == std::string::npos) return prompt.substr(start);
  return prompt.substr(start, close - start);
}

std::string mock_imitation(const std::string& payload, std::uint64_t h) {
  auto words = whitespace_tokens(payload);
  std::size_t drop_every = 5 + h % 7;
  std::ostringstream body;
  std::size_t kept = 0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if ((i + 1) % drop_every == 0) continue;
    if (kept++) body << (kept % 14 == 0 ? "\n" : " ");
    body << words[i];
  }
  return body.str();
}

const char* kMockFeedbackBank[] = {
    "The submission engages with the brief and covers the core requirements.",
    "The work demonstrates a sound grasp of the material with room to deepen the analysis.",
    "The response is organised clearly, though several rubric criteria deserve fuller treatment.",
};

}  // namespace

Completion MockProvider::complete(const ModelSpec& spec, const std::vector<Message>& messages) {
  if (call_hook) call_hook();
  std::string prompt;
  for (const auto& m : messages) {
    prompt += m.text;
    prompt.push_back('\n');
  }
  std::string payload = last_payload_block(prompt);
  std::uint64_t h = fnv1a64(spec.model_id + "\x1f" + payload);

  std::string text;
  if (prompt.find("BEGIN_SYNTHETIC") != std::string::npos) {
    text = "Step 1: I evaluated the original along the required dimensions.\n"
           "Step 2: I drafted a synthetic counterpart imitating those dimensions.\n"
           "Step 3: I evaluated the draft along the same dimensions.\n"
           "Step 4: The evaluations agree, so I am outputting the result.\n"
           "BEGIN_SYNTHETIC\n" +
           mock_imitation(payload, h) + "\nEND_SYNTHETIC";
  } else if (prompt.find("student name and id") != std::string::npos) {
    text = "No student name or id found.\nNo student name or id found.\nNO";
  } else if (prompt.find("MARK:") != std::string::npos) {
    text = "The submission addresses most rubric criteria with reasonable depth.\nMARK: " +
           std::to_string(55 + h % 41);
  } else if (prompt.find("one line per dimension") != std::string::npos) {
    std::ostringstream lines;
    for (const auto& line : split_lines(prompt)) {
      if (line.rfind("- ", 0) != 0) continue;
      std::size_t paren = line.find(" (");
      if (paren == std::string::npos) continue;
      std::string dim = line.substr(2, paren - 2);
      std::uint64_t h2 = fnv1a64(dim + "\x1f" + spec.model_id + "\x1f" + payload);
      if (line.find("likert3", paren) != std::string::npos) {
        lines << dim << ": " << 1 + h2 % 3 << '\n';
      } else {
        // Binary dimensions lean positive, hallucination flags lean clean.
        bool hallucination = dim.find("conflicting") != std::string::npos;
        lines << dim << ": " << (hallucination ? (h2 % 10 == 0 ? 1 : 0) : (h2 % 4 != 0 ? 1 : 0))
              << '\n';
      }
    }
    text = lines.str();
  } else if (prompt.find("formative feedback") != std::string::npos) {
    text = std::string(kMockFeedbackBank[h % 3]) +
           " Next, revisit the weakest criterion and tie your claims back to the rubric.";
  } else {
    for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
      if (it->role == "user") {
        text = it->text;
        break;
      }
    }
  }

  Completion c;
  c.text = std::move(text);
  std::size_t input_words = 0;
  for (const auto& m : messages) input_words += word_count(m.text);
  c.usage.input_tokens = static_cast<std::int64_t>(estimate_tokens(input_words));
  c.usage.output_tokens = static_cast<std::int64_t>(estimate_tokens(word_count(c.text)));
  return c;
}

HttpProvider::HttpProvider() {
  const char* base = std::getenv("SAMKIT_API_BASE");
  const char* key = std::getenv("SAMKIT_API_KEY");
  if (!key) key = std::getenv("OPENAI_API_KEY");
  base_url_ = base ? base : "https://api.openai.com/v1";
  api_key_ = key ? key : "";
}

HttpProvider::HttpProvider(std::string base_url, std::string api_key)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)) {}

Completion HttpProvider::complete(const ModelSpec& spec, const std::vector<Message>& messages) {
  std::string host = base_url_;
  std::string path_prefix;
  std::size_t scheme = host.find("://");
  std::size_t slash = host.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (slash != std::string::npos) {
    path_prefix = host.substr(slash);
    host = host.substr(0, slash);
  }
  while (!path_prefix.empty() && path_prefix.back() == '/') path_prefix.pop_back();

  json body{{"model", spec.model_id}};
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.text}});
  body["messages"] = std::move(msgs);
  if (spec.temperature) body["temperature"] = *spec.temperature;
  if (spec.max_output_tokens > 0) body["max_completion_tokens"] = spec.max_output_tokens;
  if (spec.reasoning_effort != Effort::none) {
    body["reasoning_effort"] = std::string(effort_name(spec.reasoning_effort));
  }

  httplib::Client client(host);
  client.set_read_timeout(300, 0);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  auto res = client.Post(path_prefix + "/chat/completions", headers, body.dump(),
                         "application/json");
  if (!res) {
    throw TransientProviderError("http transport error: " + httplib::to_string(res.error()));
  }
  if (res->status == 429 || res->status >= 500) {
    throw TransientProviderError("provider returned status " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw ProviderError("provider returned status " + std::to_string(res->status) + ": " +
                        res->body);
  }
  json parsed;
  try {
    parsed = json::parse(res->body);
  } catch (const json::exception&) {
    throw ProviderError("provider response is not valid json");
  }
  Completion c;
  try {
    c.text = parsed.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw ProviderError("provider response missing choices[0].message.content");
  }
  if (parsed.contains("usage")) {
    c.usage.input_tokens = parsed["usage"].value("prompt_tokens", 0);
    c.usage.output_tokens = parsed["usage"].value("completion_tokens", 0);
  }
  return c;
}

std::string_view gateway_mode_name(GatewayMode mode) {
  switch (mode) {
    case GatewayMode::live: return "live";
    case GatewayMode::record: return "record";
    case GatewayMode::replay: return "replay";
  }
  return "replay";
}

GatewayMode parse_gateway_mode(std::string_view name) {
  if (name == "live") return GatewayMode::live;
  if (name == "record") return GatewayMode::record;
  if (name == "replay") return GatewayMode::replay;
  throw ConfigError("unknown gateway mode: " + std::string(name));
}

Gateway::Gateway(GatewayConfig config, std::shared_ptr<Provider> provider)
    : config_(std::move(config)), provider_(std::move(provider)) {}

std::string Gateway::cassette_key(const ModelSpec& spec, const std::vector<Message>& messages) {
  json canonical{{"model_id", spec.model_id},
                 {"effort", std::string(effort_name(spec.reasoning_effort))}};
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"text", m.text}});
  canonical["messages"] = std::move(msgs);
  return sha256_hex(canonical.dump());
}

Completion Gateway::call_with_retries(const ModelSpec& spec,
                                      const std::vector<Message>& messages, int& attempts_used) {
  auto backoff = config_.retry.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    attempts_used = attempt;
    try {
      struct InflightSlot {
        Gateway& gw;
        InflightSlot(Gateway& gw) : gw(gw) {
          std::unique_lock lock(gw.inflight_mutex_);
          gw.inflight_cv_.wait(lock, [&] { return gw.inflight_ < gw.config_.inflight_limit; });
          ++gw.inflight_;
        }
        ~InflightSlot() {
          {
            std::lock_guard lock(gw.inflight_mutex_);
            --gw.inflight_;
          }
          gw.inflight_cv_.notify_one();
        }
      } slot(*this);
      return provider_->complete(spec, messages);
    } catch (const TransientProviderError& e) {
      if (attempt > config_.retry.max_retries) {
        throw ProviderError("retry cap exhausted after " + std::to_string(attempt) +
                            " attempts: " + e.what());
      }
      if (config_.sleep_fn)
        config_.sleep_fn(backoff);
      else if (backoff.count() > 0)
        std::this_thread::sleep_for(backoff);
      auto next = std::chrono::milliseconds(
          static_cast<std::int64_t>(static_cast<double>(backoff.count()) *
                                    config_.retry.backoff_factor));
      backoff = std::max(backoff, next);  // nondecreasing
    }
  }
}

void Gateway::record_usage(const ModelSpec& spec, const Completion& completion, int attempt,
                           std::int64_t latency_ms) {
  if (config_.run_dir.empty()) return;
  json entry{{"model_id", spec.model_id},
             {"effort", std::string(effort_name(spec.reasoning_effort))},
             {"response_chars", completion.text.size()},
             {"input_tokens", completion.usage.input_tokens},
             {"output_tokens", completion.usage.output_tokens},
             {"latency_ms", latency_ms},
             {"attempt", attempt}};
  std::lock_guard lock(usage_mutex_);
  std::filesystem::create_directories(config_.run_dir / "gateway");
  std::ofstream out(config_.run_dir / "gateway" / "usage.jsonl", std::ios::app);
  out << entry.dump() << '\n';
}

Completion Gateway::complete(const ModelSpec& spec, const std::vector<Message>& messages) {
  if (spec.model_id.empty()) throw ConfigError("model_id must be non-empty");
  if (spec.context_window_tokens > 0) {
    std::size_t words = 0;
    for (const auto& m : messages) words += word_count(m.text);
    if (estimate_tokens(words) > static_cast<std::size_t>(spec.context_window_tokens)) {
      throw ContextOverflow("estimated prompt tokens exceed context window of " +
                            std::to_string(spec.context_window_tokens));
    }
  }

  std::string key = cassette_key(spec, messages);
  std::filesystem::path cassette_path = config_.run_dir / "cassettes" / (key + ".json");

  if (config_.mode == GatewayMode::replay) {
    json stored;
    {
      std::lock_guard lock(cassette_mutex_);
      std::ifstream in(cassette_path);
      if (!in) throw CassetteMiss("no cassette for request key " + key);
      try {
        in >> stored;
      } catch (const json::exception&) {
        throw CassetteMiss("cassette unreadable for request key " + key);
      }
    }
    Completion c;
    c.text = stored.at("response").get<std::string>();
    c.usage.input_tokens = stored.value("input_tokens", 0);
    c.usage.output_tokens = stored.value("output_tokens", 0);
    record_usage(spec, c, 1, 0);
    return c;
  }

  auto start = std::chrono::steady_clock::now();
  int attempts_used = 1;
  Completion completion = call_with_retries(spec, messages, attempts_used);
  auto latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - start)
                        .count();

  if (config_.mode == GatewayMode::record) {
    json msgs = json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"text", m.text}});
    json cassette{{"key", key},
                  {"model_id", spec.model_id},
                  {"effort", std::string(effort_name(spec.reasoning_effort))},
                  {"messages", std::move(msgs)},
                  {"response", completion.text},
                  {"input_tokens", completion.usage.input_tokens},
                  {"output_tokens", completion.usage.output_tokens}};
    std::lock_guard lock(cassette_mutex_);
    atomic_write_file(cassette_path, cassette.dump(2) + "\n");
  }
  record_usage(spec, completion, attempts_used, latency_ms);
  return completion;
}

std::map<std::string, ModelUsage> usage_report(const std::filesystem::path& run_dir) {
  if (!std::filesystem::is_directory(run_dir)) {
    throw NotFound("run directory not found: " + run_dir.string());
  }
  std::map<std::string, ModelUsage> report;
  std::filesystem::path log = run_dir / "gateway" / "usage.jsonl";
  if (!std::filesystem::exists(log)) return report;
  std::string content = read_file(log);
  for (const auto& line : split_lines(content)) {
    if (trim(line).empty()) continue;
    json entry = json::parse(line);
    ModelSpec spec;
    spec.model_id = entry.at("model_id").get<std::string>();
    spec.reasoning_effort = parse_effort(entry.value("effort", "none"));
    auto& usage = report[model_spec_label(spec)];
    usage.calls += 1;
    usage.input_tokens += entry.value("input_tokens", 0);
    usage.output_tokens += entry.value("output_tokens", 0);
  }
  return report;
}

}  // namespace samkit
