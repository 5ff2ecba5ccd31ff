#include "samkit/runstore.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "samkit/errors.hpp"
#include "samkit/util.hpp"

namespace samkit {

namespace {

std::int64_t steady_now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

ItemStatus status_from_name(const std::string& name) {
  if (name == "started") return ItemStatus::started;
  if (name == "done") return ItemStatus::done;
  if (name == "failed") return ItemStatus::failed;
  throw LedgerCorrupt("ledger: unknown status '" + name + "'");
}

}  // namespace

RunLedger::RunLedger(std::filesystem::path run_dir) {
  std::filesystem::create_directories(run_dir);
  path_ = run_dir / "ledger.jsonl";
  if (!std::filesystem::exists(path_)) return;

  std::string content = read_file(path_);
  std::size_t line_no = 0;
  std::istringstream in(content);
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json parsed = nlohmann::json::parse(line, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object()) {
      throw LedgerCorrupt("ledger: unparsable line " + std::to_string(line_no));
    }
    try {
      LedgerRecord record;
      record.seq = parsed.at("seq").get<std::int64_t>();
      record.ts_ns = parsed.at("ts_ns").get<std::int64_t>();
      record.stage = parsed.at("stage").get<std::string>();
      record.item = parsed.at("item").get<std::string>();
      record.status = parsed.at("status").get<std::string>();
      record.detail = parsed.value("detail", "");
      ItemStatus status = status_from_name(record.status);
      auto key = std::make_pair(record.stage, record.item);
      if (status == ItemStatus::done && state_[key] == ItemStatus::done) {
        throw LedgerCorrupt("ledger: duplicate done for " + record.stage + "/" + record.item);
      }
      if (state_[key] != ItemStatus::done) state_[key] = status;
      if (status == ItemStatus::failed) failures_[key] += 1;
      next_seq_ = std::max(next_seq_, record.seq + 1);
      last_ts_ns_ = std::max(last_ts_ns_, record.ts_ns);
      records_.push_back(std::move(record));
    } catch (const nlohmann::json::exception&) {
      throw LedgerCorrupt("ledger: bad record at line " + std::to_string(line_no));
    }
  }
}

void RunLedger::append(const std::string& stage, const std::string& item,
                       const std::string& status, const std::string& detail) {
  std::lock_guard<std::mutex> lock(mutex_);
  auto key = std::make_pair(stage, item);
  if (state_[key] == ItemStatus::done) {
    throw Error("ledger: " + stage + "/" + item + " is already done");
  }
  LedgerRecord record;
  record.seq = next_seq_++;
  record.ts_ns = std::max(steady_now_ns(), last_ts_ns_);
  last_ts_ns_ = record.ts_ns;
  record.stage = stage;
  record.item = item;
  record.status = status;
  record.detail = detail;
  ItemStatus parsed = status_from_name(status);
  state_[key] = parsed;
  if (parsed == ItemStatus::failed) failures_[key] += 1;
  records_.push_back(std::move(record));
  persist_locked();
}

void RunLedger::persist_locked() {
  std::string out;
  for (const auto& record : records_) {
    nlohmann::json line{{"seq", record.seq},   {"ts_ns", record.ts_ns},
                        {"stage", record.stage}, {"item", record.item},
                        {"status", record.status}};
    if (!record.detail.empty()) line["detail"] = record.detail;
    out += line.dump();
    out += '\n';
  }
  atomic_write_file(path_, out);
}

void RunLedger::record_started(const std::string& stage, const std::string& item) {
  append(stage, item, "started", "");
}

void RunLedger::record_done(const std::string& stage, const std::string& item,
                            const std::string& output_ref) {
  append(stage, item, "done", output_ref);
}

void RunLedger::record_failed(const std::string& stage, const std::string& item,
                              const std::string& reason) {
  append(stage, item, "failed", reason);
}

bool RunLedger::is_done(const std::string& stage, const std::string& item) const {
  return status_of(stage, item) == ItemStatus::done;
}

int RunLedger::failure_count(const std::string& stage, const std::string& item) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = failures_.find(std::make_pair(stage, item));
  return it == failures_.end() ? 0 : it->second;
}

ItemStatus RunLedger::status_of(const std::string& stage, const std::string& item) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = state_.find(std::make_pair(stage, item));
  return it == state_.end() ? ItemStatus::pending : it->second;
}

std::vector<LedgerRecord> RunLedger::records() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return records_;
}

ResumePlan plan_resume(const RunLedger& ledger, const std::vector<WorkItem>& all_items) {
  ResumePlan plan;
  for (const auto& work : all_items) {
    if (ledger.is_done(work.stage, work.item)) {
      plan.done.push_back(work);
    } else if (ledger.failure_count(work.stage, work.item) > kMaxItemRetries) {
      plan.permanent_failed.push_back(work);
    } else {
      plan.todo.push_back(work);
    }
  }
  return plan;
}

void ensure_config_snapshot(const std::filesystem::path& run_dir,
                            const std::string& canonical_json) {
  std::filesystem::create_directories(run_dir);
  auto path = run_dir / "config.json";
  if (std::filesystem::exists(path)) {
    if (read_file(path) != canonical_json) {
      throw ConfigError("config does not match the snapshot taken when this run started: " +
                        path.string());
    }
    return;
  }
  atomic_write_file(path, canonical_json);
}

std::string read_config_snapshot(const std::filesystem::path& run_dir) {
  return read_file(run_dir / "config.json");
}

std::string sanitize_item(const std::string& id) {
  std::string safe;
  safe.reserve(id.size() + 9);
  for (char c : id) {
    bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                c == '.' || c == '_' || c == '-';
    safe += keep ? c : '_';
  }
  char hash[10];
  std::snprintf(hash, sizeof(hash), "-%08llx",
                static_cast<unsigned long long>(fnv1a64(id) & 0xffffffffull));
  return safe + hash;
}

}  // namespace samkit
