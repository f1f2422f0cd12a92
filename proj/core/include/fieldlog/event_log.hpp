#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "fieldlog/model.hpp"

namespace fieldlog {

/// Append-only JSONL log, one file per machine under `<dir>/log/`. Each line
/// is a canonical gateway report. Appends are fsync'd before returning.
///
/// The first report for a (machine, t) pair wins; later ones are duplicates.
/// Appends to one machine are serialized; different machines proceed in
/// parallel.
class EventLog {
 public:
  explicit EventLog(std::filesystem::path dir);

  struct LoadStats {
    std::size_t lines = 0;
    std::size_t corrupt = 0;  // unparsable lines (e.g. a torn tail after a crash)
  };

  /// Reads every existing log file. Call once before appending.
  LoadStats load();

  struct AppendResult {
    std::size_t appended = 0;
    std::size_t duplicates = 0;
  };

  /// Appends the reports not yet present for `machine_id`, in order.
  AppendResult append(const std::string& machine_id, const std::vector<GatewayReport>& reports);

  /// Copy of the machine's reports in append order.
  [[nodiscard]] std::vector<GatewayReport> reports(std::string_view machine_id) const;
  [[nodiscard]] std::vector<std::string> machines() const;
  [[nodiscard]] std::size_t size() const;

  /// Log file for a machine; ids are percent-encoded outside [A-Za-z0-9._-].
  [[nodiscard]] std::filesystem::path file_for(std::string_view machine_id) const;

 private:
  struct Stream {
    mutable std::mutex mu;
    std::set<std::int64_t> seen;  // unix ms
    std::vector<GatewayReport> reports;
  };

  Stream& stream(const std::string& machine_id);
  [[nodiscard]] const Stream* find(std::string_view machine_id) const;

  std::filesystem::path dir_;
  mutable std::mutex index_mu_;
  std::map<std::string, std::unique_ptr<Stream>, std::less<>> streams_;
};

}  // namespace fieldlog
