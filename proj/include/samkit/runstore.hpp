#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

namespace samkit {

struct LedgerRecord {
  std::int64_t seq = 0;    // strictly increasing append index
  std::int64_t ts_ns = 0;  // steady clock, nondecreasing across appends
  std::string stage;
  std::string item;
  std::string status;  // started | done | failed
  std::string detail;  // output reference or failure reason
};

enum class ItemStatus { pending, started, done, failed };

/// Append-only record of pipeline progress, one JSON line per event in
/// <run_dir>/ledger.jsonl. Appends rewrite through a temp file and rename so
/// readers never see a torn line. A (stage, item) can be marked done at most
/// once. Thread-safe for one writer process.
class RunLedger {
 public:
  explicit RunLedger(std::filesystem::path run_dir);

  void record_started(const std::string& stage, const std::string& item);
  void record_done(const std::string& stage, const std::string& item,
                   const std::string& output_ref = "");
  void record_failed(const std::string& stage, const std::string& item,
                     const std::string& reason);

  bool is_done(const std::string& stage, const std::string& item) const;
  int failure_count(const std::string& stage, const std::string& item) const;
  ItemStatus status_of(const std::string& stage, const std::string& item) const;

  std::vector<LedgerRecord> records() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  void append(const std::string& stage, const std::string& item, const std::string& status,
              const std::string& detail);
  void persist_locked();

  mutable std::mutex mutex_;
  std::filesystem::path path_;
  std::vector<LedgerRecord> records_;
  std::map<std::pair<std::string, std::string>, ItemStatus> state_;
  std::map<std::pair<std::string, std::string>, int> failures_;
  std::int64_t next_seq_ = 1;
  std::int64_t last_ts_ns_ = 0;
};

struct WorkItem {
  std::string stage;
  std::string item;

  bool operator==(const WorkItem&) const = default;
};

// Automatic retries granted to a failed item on resume before it is parked.
inline constexpr int kMaxItemRetries = 2;

struct ResumePlan {
  std::vector<WorkItem> todo;              // in the order the caller listed them
  std::vector<WorkItem> done;
  std::vector<WorkItem> permanent_failed;  // retry budget exhausted
};

/// Split the full work list against the ledger: done items are skipped,
/// failed items are retried until kMaxItemRetries is spent, everything else
/// is still to do. Deterministic for a given ledger and item list.
ResumePlan plan_resume(const RunLedger& ledger, const std::vector<WorkItem>& all_items);

/// Writes <run_dir>/config.json on first call; later calls verify the stored
/// snapshot matches and raise ConfigError when it does not.
void ensure_config_snapshot(const std::filesystem::path& run_dir, const std::string& canonical_json);
std::string read_config_snapshot(const std::filesystem::path& run_dir);  // NotFound when absent

/// Filesystem-safe file stem for an item id: alphanumerics, '.', '_' and '-'
/// kept, everything else replaced, plus a short content hash so distinct ids
/// never collide.
std::string sanitize_item(const std::string& id);

}  // namespace samkit
