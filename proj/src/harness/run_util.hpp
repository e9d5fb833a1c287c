#pragma once

// Internals shared by the experiment runners: output-file plumbing with
// byte-exact resume, and the task scheduler used by --parallel-runs.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "himo/harness/config.hpp"

namespace himo::harness {

// Append-only text file that knows its byte offset, so a checkpoint can
// record "the file had N bytes" and a resume can truncate back to exactly
// that prefix before appending.
class OutFile {
 public:
  OutFile() = default;

  // Truncates and writes the preamble (comment + header lines).
  static OutFile fresh(const std::filesystem::path& path, const std::string& preamble);

  // Truncates to `offset` bytes and appends from there.
  static OutFile resume_at(const std::filesystem::path& path, std::uint64_t offset);

  void line(const std::string& text);  // appends text + '\n'

  // Flushes before reporting, so an offset recorded in a checkpoint never
  // exceeds what the file actually holds if the process dies right after.
  std::uint64_t offset() {
    out_.flush();
    return offset_;
  }

  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
  std::uint64_t offset_ = 0;
};

// "# config_hash=... version=..." — the comment line every CSV starts with.
std::string csv_comment(const ExperimentConfig& cfg);

// One independent training run; `what` names it in logs ("portal_ac/himo
// seed 3"). Throws out of run() propagate to the scheduler, which reports
// them and turns the whole experiment into exit status 3.
struct RunTask {
  std::string what;
  std::function<void()> run;
};

// Executes tasks on min(parallel, tasks) worker threads (in order on one).
// Returns the number of failed tasks; failures are logged to stderr.
int execute_tasks(std::vector<RunTask> tasks, int parallel, bool quiet);

}  // namespace himo::harness
