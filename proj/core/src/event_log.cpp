#include "fieldlog/event_log.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cctype>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "fieldlog/error.hpp"
#include "fieldlog/ingest.hpp"

namespace fieldlog {
namespace {

std::string encode_name(std::string_view id) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (const char ch : id) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) != 0 || c == '.' || c == '_' || c == '-') {
      out += ch;
    } else {
      out += '%';
      out += kHex[c >> 4];
      out += kHex[c & 0xF];
    }
  }
  if (out.empty() || out == "." || out == "..") out = "%2E" + out;
  return out;
}

void write_all(int fd, std::string_view data, const std::filesystem::path& path) {
  while (!data.empty()) {
    const ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::io_error, "write " + path.string() + ": " + std::strerror(errno));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

void fsync_dir(const std::filesystem::path& dir) {
  const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (fd < 0) return;
  ::fsync(fd);
  ::close(fd);
}

}  // namespace

EventLog::EventLog(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_ / "log", ec);
  if (ec) throw Error(ErrorCode::io_error, "cannot create " + (dir_ / "log").string() + ": " + ec.message());
}

std::filesystem::path EventLog::file_for(std::string_view machine_id) const {
  return dir_ / "log" / (encode_name(machine_id) + ".jsonl");
}

EventLog::LoadStats EventLog::load() {
  LoadStats stats;
  for (const auto& entry : std::filesystem::directory_iterator(dir_ / "log")) {
    if (!entry.is_regular_file() || entry.path().extension() != ".jsonl") continue;
    std::string content;
    {
      std::ifstream in(entry.path(), std::ios::binary);
      content.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    // A write interrupted by a crash leaves an unterminated tail that was never
    // acknowledged. Cut it so the next append starts on a fresh line.
    const auto last_nl = content.rfind('\n');
    const std::size_t keep = last_nl == std::string::npos ? 0 : last_nl + 1;
    if (keep != content.size()) {
      ++stats.corrupt;
      content.resize(keep);
      std::error_code ec;
      std::filesystem::resize_file(entry.path(), keep, ec);
      if (ec) throw Error(ErrorCode::io_error, "truncate " + entry.path().string() + ": " + ec.message());
    }
    std::istringstream in(content);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      GatewayReport r;
      try {
        r = ingest::parse_gateway_report(line);
      } catch (const Error&) {
        ++stats.corrupt;
        continue;
      }
      Stream& s = stream(r.fix.machine_id);
      if (!s.seen.insert(to_unix_ms(r.fix.t)).second) continue;
      s.reports.push_back(std::move(r));
      ++stats.lines;
    }
  }
  return stats;
}

EventLog::Stream& EventLog::stream(const std::string& machine_id) {
  std::lock_guard lock(index_mu_);
  auto& slot = streams_[machine_id];
  if (!slot) slot = std::make_unique<Stream>();
  return *slot;
}

const EventLog::Stream* EventLog::find(std::string_view machine_id) const {
  std::lock_guard lock(index_mu_);
  const auto it = streams_.find(machine_id);
  return it == streams_.end() ? nullptr : it->second.get();
}

EventLog::AppendResult EventLog::append(const std::string& machine_id, const std::vector<GatewayReport>& reports) {
  AppendResult result;
  Stream& s = stream(machine_id);
  std::lock_guard lock(s.mu);

  std::string buffer;
  std::vector<const GatewayReport*> fresh;
  std::set<std::int64_t> batch;
  for (const auto& r : reports) {
    const auto key = to_unix_ms(r.fix.t);
    if (s.seen.contains(key) || !batch.insert(key).second) {
      ++result.duplicates;
      continue;
    }
    buffer += ingest::serialize_gateway_report(r);
    buffer += '\n';
    fresh.push_back(&r);
  }
  if (fresh.empty()) return result;

  const auto path = file_for(machine_id);
  const bool existed = std::filesystem::exists(path);
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(ErrorCode::io_error, "open " + path.string() + ": " + std::strerror(errno));
  const off_t before = ::lseek(fd, 0, SEEK_END);
  try {
    write_all(fd, buffer, path);
    if (::fsync(fd) != 0) throw Error(ErrorCode::io_error, "fsync " + path.string() + ": " + std::strerror(errno));
  } catch (...) {
    // Leave no partial line behind for the next append to extend.
    if (before >= 0 && ::ftruncate(fd, before) == 0) ::fsync(fd);
    ::close(fd);
    throw;
  }
  ::close(fd);
  if (!existed) fsync_dir(path.parent_path());

  for (const auto* r : fresh) {
    s.seen.insert(to_unix_ms(r->fix.t));
    s.reports.push_back(*r);
  }
  result.appended = fresh.size();
  return result;
}

std::vector<GatewayReport> EventLog::reports(std::string_view machine_id) const {
  const Stream* s = find(machine_id);
  if (s == nullptr) return {};
  std::lock_guard lock(s->mu);
  return s->reports;
}

std::vector<std::string> EventLog::machines() const {
  std::lock_guard lock(index_mu_);
  std::vector<std::string> out;
  for (const auto& [id, s] : streams_) out.push_back(id);
  return out;
}

std::size_t EventLog::size() const {
  std::lock_guard lock(index_mu_);
  std::size_t n = 0;
  for (const auto& [id, s] : streams_) {
    std::lock_guard slock(s->mu);
    n += s->reports.size();
  }
  return n;
}

}  // namespace fieldlog
