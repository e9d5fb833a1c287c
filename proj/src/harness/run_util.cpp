#include "run_util.hpp"

#include <atomic>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "himo/version.hpp"

namespace himo::harness {

OutFile OutFile::fresh(const std::filesystem::path& path, const std::string& preamble) {
  std::filesystem::create_directories(path.parent_path());
  OutFile f;
  f.out_.open(path, std::ios::binary | std::ios::trunc);
  if (!f.out_) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f.out_ << preamble;
  f.offset_ = preamble.size();
  return f;
}

OutFile OutFile::resume_at(const std::filesystem::path& path, std::uint64_t offset) {
  if (!std::filesystem::exists(path))
    throw std::runtime_error("resume: " + path.string() + " is missing");
  if (std::filesystem::file_size(path) < offset)
    throw std::runtime_error("resume: " + path.string() +
                             " is shorter than the checkpoint recorded");
  std::filesystem::resize_file(path, offset);
  OutFile f;
  f.out_.open(path, std::ios::binary | std::ios::app);
  if (!f.out_) throw std::runtime_error("cannot reopen " + path.string());
  f.offset_ = offset;
  return f;
}

void OutFile::line(const std::string& text) {
  out_ << text << '\n';
  offset_ += text.size() + 1;
}

std::string csv_comment(const ExperimentConfig& cfg) {
  return "# config_hash=" + config_hash(cfg) + " version=" + std::string(kVersion) + "\n";
}

int execute_tasks(std::vector<RunTask> tasks, int parallel, bool quiet) {
  std::atomic<std::size_t> next{0};
  std::atomic<int> failures{0};
  std::mutex log_mutex;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      if (!quiet) {
        std::lock_guard<std::mutex> lock(log_mutex);
        std::cerr << "[run] " << tasks[i].what << "\n";
      }
      try {
        tasks[i].run();
      } catch (const std::exception& e) {
        failures.fetch_add(1);
        std::lock_guard<std::mutex> lock(log_mutex);
        std::cerr << "[fail] " << tasks[i].what << ": " << e.what() << "\n";
      }
    }
  };

  const int n_workers =
      std::max(1, std::min<int>(parallel, static_cast<int>(tasks.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return failures.load();
}

}  // namespace himo::harness
