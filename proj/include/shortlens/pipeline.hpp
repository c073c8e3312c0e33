#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "shortlens/backend.hpp"
#include "shortlens/frames.hpp"
#include "shortlens/util.hpp"

namespace shortlens {

enum class Stage { kIngest, kProbe, kTranscribe, kLink, kAbsa, kSample, kScenes, kAggregate, kEvaluate, kReport };

inline constexpr std::array<Stage, 10> kAllStages = {Stage::kIngest, Stage::kProbe,  Stage::kTranscribe,
                                                     Stage::kLink,   Stage::kAbsa,   Stage::kSample,
                                                     Stage::kScenes, Stage::kAggregate, Stage::kEvaluate,
                                                     Stage::kReport};

std::string_view to_string(Stage s);
std::optional<Stage> parse_stage(std::string_view s);

/// Direct upstream stages.
std::vector<Stage> stage_requires(Stage s);

/// Stages in an order where every stage follows its requirements. Throws
/// if the requirement graph has a cycle.
std::vector<Stage> topological_stages();

struct ManifestSource {
  std::string outlet;
  fs::path path;
};

struct WorkerConfig {
  std::size_t asr = 2;
  std::size_t absa = 8;
  std::size_t vlm = 4;
};

struct PipelineConfig {
  fs::path store_root = "store";
  std::string backend_url = "http://127.0.0.1:8000";
  std::optional<fs::path> lexicon_path;
  fs::path media_root = ".";
  std::vector<ManifestSource> manifests;
  SamplingConfig sampling;
  double absa_threshold = 0.75;
  WorkerConfig workers;
  std::uint64_t seed = 0;
  std::string prompt_version = "scene-v1";
  double probe_window_s = 30.0;
  std::size_t eval_sample_size = 799;
  RetryPolicy retry;

  /// Relative paths are resolved against `base_dir`.
  static PipelineConfig from_json(const json& j, const fs::path& base_dir);
  static PipelineConfig load(const fs::path& path);
  json to_json() const;
  /// Throws UsageError on out-of-range values.
  void validate() const;
};

struct StageOptions {
  bool force = false;
  bool dry_run = false;
  // report: output directory and optional table subset
  std::optional<fs::path> out_dir;
  std::set<std::string> tables;
};

struct FailedVideo {
  std::string video_id;
  std::string error;
};

struct StageReport {
  Stage stage = Stage::kIngest;
  std::string status;  // complete | aborted | dry-run
  std::vector<std::string> processed;
  std::vector<std::string> skipped;
  std::vector<FailedVideo> failed;
  std::vector<std::string> notes;

  json to_json() const;
};

/// Table files of the report bundle, without extension.
const std::vector<std::string>& report_tables();

/// Runs pipeline stages against one store directory.
class Pipeline {
 public:
  /// `transport` may be null, in which case one is built from backend_url
  /// ("stub" or "stub:<script.json>" selects the in-process stub).
  explicit Pipeline(PipelineConfig config, std::shared_ptr<Transport> transport = nullptr);
  ~Pipeline();

  StageReport run(Stage stage, const StageOptions& options = {});

  /// Throws DependencyError naming the first unfinished requirement.
  void check_requirements(Stage stage) const;

  const PipelineConfig& config() const { return config_; }

 private:
  struct State;
  PipelineConfig config_;
  std::unique_ptr<State> state_;
};

}  // namespace shortlens
