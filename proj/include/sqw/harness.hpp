#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "sqw/config.hpp"
#include "sqw/parallel.hpp"

namespace sqw {

std::string library_version();

/// One output file. CSV tables carry a header and rows; text outputs carry
/// their body verbatim.
struct OutputFile {
  std::string name;  // file name including extension
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::string text;

  bool is_csv() const { return text.empty(); }
  std::string body() const;
};

/// A checked bound or inequality. `record` names the failing row.
struct Assertion {
  std::string record;
  std::string detail;
  bool pass = true;
};

struct ResultRecord {
  std::string key;
  double value = 0.0;
  double std_error = 0.0;
  int n_samples = 0;
};

struct EstimatorOutput {
  Estimator estimator = Estimator::Build;
  std::vector<OutputFile> files;
  std::vector<Assertion> assertions;
  std::vector<ResultRecord> records;
};

/// Pure computation for one estimator; no files are touched.
EstimatorOutput run_estimator(const ExperimentConfig& cfg, Estimator est, const Executor& exec);

struct RunOptions {
  std::string out_dir;
  int threads = 0;
  bool quiet = false;
};

struct RunSummary {
  std::vector<std::string> written;
  std::vector<Assertion> failures;
  int exit_code() const { return failures.empty() ? 0 : 1; }
};

/// Validate, run every selected estimator, and write CSV files with JSON
/// sidecars plus an append-only records.csv.
RunSummary run(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& log);

/// Text after the leading config-hash comment line.
std::string read_body(const std::string& path);

struct VerifyReport {
  int checked = 0;
  std::vector<std::string> mismatches;
};

/// Cross-check every output file in `dir` against its sidecar.
VerifyReport verify(const std::string& dir);

std::string format_double(double v);

}  // namespace sqw
