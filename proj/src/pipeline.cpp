#include "shortlens/pipeline.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <mutex>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "shortlens/absa.hpp"
#include "shortlens/analytics.hpp"
#include "shortlens/aspect_linking.hpp"
#include "shortlens/corpus_store.hpp"
#include "shortlens/errors.hpp"
#include "shortlens/eval_harness.hpp"
#include "shortlens/parallel.hpp"
#include "shortlens/scenes.hpp"
#include "shortlens/stub_backend.hpp"
#include "shortlens/transcripts.hpp"

namespace shortlens {

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::kIngest: return "ingest";
    case Stage::kProbe: return "probe";
    case Stage::kTranscribe: return "transcribe";
    case Stage::kLink: return "link";
    case Stage::kAbsa: return "absa";
    case Stage::kSample: return "sample";
    case Stage::kScenes: return "scenes";
    case Stage::kAggregate: return "aggregate";
    case Stage::kEvaluate: return "evaluate";
    case Stage::kReport: return "report";
  }
  return "?";
}

std::optional<Stage> parse_stage(std::string_view s) {
  for (Stage st : kAllStages)
    if (to_string(st) == s) return st;
  return std::nullopt;
}

std::vector<Stage> stage_requires(Stage s) {
  switch (s) {
    case Stage::kIngest: return {};
    case Stage::kProbe: return {Stage::kIngest};
    case Stage::kTranscribe: return {Stage::kProbe};
    case Stage::kLink: return {Stage::kTranscribe};
    case Stage::kAbsa: return {Stage::kLink};
    case Stage::kSample: return {Stage::kIngest};
    case Stage::kScenes: return {Stage::kSample};
    case Stage::kAggregate: return {Stage::kAbsa, Stage::kScenes};
    case Stage::kEvaluate: return {Stage::kScenes};
    case Stage::kReport: return {Stage::kAggregate};
  }
  return {};
}

std::vector<Stage> topological_stages() {
  std::vector<Stage> order;
  std::map<Stage, int> state;  // 0 new, 1 visiting, 2 done
  std::function<void(Stage)> visit = [&](Stage s) {
    if (state[s] == 2) return;
    if (state[s] == 1) throw std::logic_error("stage graph has a cycle at " + std::string(to_string(s)));
    state[s] = 1;
    for (Stage r : stage_requires(s)) visit(r);
    state[s] = 2;
    order.push_back(s);
  };
  for (Stage s : kAllStages) visit(s);
  return order;
}

// ---------------------------------------------------------------------------

PipelineConfig PipelineConfig::from_json(const json& j, const fs::path& base_dir) {
  PipelineConfig c;
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base_dir / p; };
  try {
    if (j.contains("store_root")) c.store_root = resolve(j["store_root"].get<std::string>());
    if (j.contains("backend_url")) c.backend_url = j["backend_url"].get<std::string>();
    if (j.contains("lexicon_path") && !j["lexicon_path"].is_null())
      c.lexicon_path = resolve(j["lexicon_path"].get<std::string>());
    c.media_root = resolve(j.value("media_root", std::string(".")));
    for (const auto& m : j.value("manifests", json::array()))
      c.manifests.push_back({m.at("outlet").get<std::string>(), resolve(m.at("path").get<std::string>())});
    if (j.contains("sampling")) {
      const auto& s = j["sampling"];
      c.sampling.fps_out = s.value("fps", 1.0);
      auto fmt_name = s.value("format", std::string("jpeg"));
      auto f = parse_image_format(fmt_name);
      if (!f) throw UsageError("unknown image format '" + fmt_name + "'");
      c.sampling.image_format = *f;
      if (s.contains("max_frames") && !s["max_frames"].is_null()) c.sampling.max_frames = s["max_frames"].get<std::size_t>();
    }
    c.absa_threshold = j.value("absa_threshold", c.absa_threshold);
    if (j.contains("workers")) {
      const auto& w = j["workers"];
      c.workers.asr = w.value("asr", c.workers.asr);
      c.workers.absa = w.value("absa", c.workers.absa);
      c.workers.vlm = w.value("vlm", c.workers.vlm);
    }
    c.seed = j.value("seed", c.seed);
    c.prompt_version = j.value("prompt_version", c.prompt_version);
    c.probe_window_s = j.value("probe_window_s", c.probe_window_s);
    c.eval_sample_size = j.value("eval_sample_size", c.eval_sample_size);
    if (j.contains("retry")) {
      const auto& r = j["retry"];
      c.retry.max_retries = r.value("max_retries", c.retry.max_retries);
      c.retry.base_delay = std::chrono::milliseconds(r.value("base_delay_ms", c.retry.base_delay.count()));
    }
  } catch (const json::exception& e) {
    throw UsageError(std::string("invalid configuration: ") + e.what());
  }
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw UsageError("config file " + path.string() + " not found");
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw UsageError("config file " + path.string() + " is not a JSON object");
  return from_json(j, path.parent_path());
}

json PipelineConfig::to_json() const {
  json manifests_json = json::array();
  for (const auto& m : manifests) manifests_json.push_back({{"outlet", m.outlet}, {"path", m.path.string()}});
  return {{"store_root", store_root.string()},
          {"backend_url", backend_url},
          {"lexicon_path", lexicon_path ? json(lexicon_path->string()) : json(nullptr)},
          {"media_root", media_root.string()},
          {"manifests", manifests_json},
          {"sampling", sampling.to_json()},
          {"absa_threshold", absa_threshold},
          {"workers", {{"asr", workers.asr}, {"absa", workers.absa}, {"vlm", workers.vlm}}},
          {"seed", seed},
          {"prompt_version", prompt_version},
          {"probe_window_s", probe_window_s},
          {"eval_sample_size", eval_sample_size},
          {"retry", {{"max_retries", retry.max_retries}, {"base_delay_ms", retry.base_delay.count()}}}};
}

void PipelineConfig::validate() const {
  constexpr std::size_t kMaxWorkers = 64;
  for (auto [name, n] : {std::pair{"asr", workers.asr}, {"absa", workers.absa}, {"vlm", workers.vlm}})
    if (n < 1 || n > kMaxWorkers)
      throw UsageError(fmt::format("workers.{} must be between 1 and {}, got {}", name, kMaxWorkers, n));
  if (!(absa_threshold > 0.0 && absa_threshold <= 1.0)) throw UsageError("absa_threshold must be in (0, 1]");
  if (!(probe_window_s > 0.0)) throw UsageError("probe_window_s must be positive");
  if (retry.max_retries < 0 || retry.base_delay.count() < 0) throw UsageError("retry settings must be non-negative");
  if (!backend_url.starts_with("stub")) BaseUrl::parse(backend_url);
  sampling.validate();
  build_prompt(prompt_version);
}

json StageReport::to_json() const {
  json failed_json = json::array();
  for (const auto& f : failed) failed_json.push_back({{"video_id", f.video_id}, {"error", f.error}});
  return {{"stage", to_string(stage)}, {"status", status},     {"processed", processed},
          {"skipped", skipped},        {"failed", failed_json}, {"notes", notes}};
}

const std::vector<std::string>& report_tables() {
  static const std::vector<std::string> kTables = {
      "corpus_stats",     "aspect_sentiment",   "video_polarity",   "engagement",
      "sentiment_trend_long", "scene_distribution", "scene_share_long", "scene_eval"};
  return kTables;
}

// ---------------------------------------------------------------------------

namespace {

std::string read_if_exists(const fs::path& p) { return fs::exists(p) ? read_file(p) : std::string(); }

void write_json(const fs::path& p, const json& j) {
  fs::create_directories(p.parent_path());
  write_file_atomic(p, j.dump(2) + "\n");
}

void write_text(const fs::path& p, std::string_view text) {
  fs::create_directories(p.parent_path());
  write_file_atomic(p, text);
}

std::string video_of(const fs::path& p) { return p.stem().string(); }

// Video ids with a file of the given extension in `dir`, sorted.
std::vector<std::string> ids_in(const fs::path& dir, std::string_view ext) {
  std::vector<std::string> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(video_of(e.path()));
  std::sort(out.begin(), out.end());
  return out;
}

enum class Outcome { kProcessed, kSkipped, kFailed };

}  // namespace

struct Pipeline::State {
  std::unique_ptr<StubModels> stub;
  std::shared_ptr<Transport> base;
  std::unique_ptr<RetryingTransport> retrying;

  Transport& transport() { return *retrying; }
};

Pipeline::Pipeline(PipelineConfig config, std::shared_ptr<Transport> transport)
    : config_(std::move(config)), state_(std::make_unique<State>()) {
  config_.validate();
  if (transport) {
    state_->base = std::move(transport);
  } else if (config_.backend_url.starts_with("stub")) {
    std::string_view url = config_.backend_url;
    if (url == "stub") {
      state_->stub = std::make_unique<StubModels>();
    } else if (url.starts_with("stub:")) {
      state_->stub = std::make_unique<StubModels>(StubModels::from_file(std::string(url.substr(5))).script());
    } else {
      throw UsageError("backend '" + config_.backend_url + "' is neither a URL nor stub[:script]");
    }
    state_->base = std::make_shared<InProcessTransport>(*state_->stub);
  } else {
    state_->base = std::make_shared<HttpTransport>(config_.backend_url);
  }
  state_->retrying = std::make_unique<RetryingTransport>(*state_->base, config_.retry);
}

Pipeline::~Pipeline() = default;

void Pipeline::check_requirements(Stage stage) const {
  for (Stage req : stage_requires(stage)) {
    fs::path p = config_.store_root / "stages" / (std::string(to_string(req)) + ".json");
    bool done = false;
    if (fs::exists(p)) {
      json j = json::parse(read_file(p), nullptr, false);
      done = !j.is_discarded() && j.value("status", "") == "complete";
    }
    if (!done)
      throw DependencyError(fmt::format("{} requires: {}", to_string(stage), to_string(req)),
                            {std::string(to_string(req))});
  }
}

namespace {

class StageRunner {
 public:
  StageRunner(const PipelineConfig& config, Transport& transport, const StageOptions& options, StageReport& report)
      : cfg(config), transport(transport), opt(options), rep(report), root(config.store_root) {}

  const PipelineConfig& cfg;
  Transport& transport;
  const StageOptions& opt;
  StageReport& rep;
  fs::path root;

  fs::path marker(std::string_view video_id) const {
    return root / "markers" / std::string(to_string(rep.stage)) / (std::string(video_id) + ".json");
  }

  bool up_to_date(std::string_view video_id, const std::string& hash) const {
    if (opt.force) return false;
    fs::path m = marker(video_id);
    if (!fs::exists(m)) return false;
    json j = json::parse(read_file(m), nullptr, false);
    return !j.is_discarded() && j.value("input_hash", "") == hash;
  }

  void mark(std::string_view video_id, const std::string& hash) const {
    write_json(marker(video_id), {{"input_hash", hash}});
  }

  std::vector<VideoRecord> records() const { return CorpusStore::open_reader(root).records(); }

  std::string locator(const VideoRecord& r) const {
    if (r.source_url.empty()) throw DataError("video " + r.video_id + " has no source_url");
    std::string_view u = r.source_url;
    if (u.starts_with("http://") || u.starts_with("https://")) return r.source_url;
    if (u.starts_with("file://")) u.remove_prefix(7);
    fs::path p{std::string(u)};
    return (p.is_absolute() ? p : cfg.media_root / p).string();
  }

  // Runs `work` for every video whose input hash changed since its marker.
  void for_each_video(const std::vector<std::string>& ids, std::size_t workers,
                      const std::function<std::string(const std::string&)>& input_hash,
                      const std::function<void(const std::string&)>& work) {
    std::vector<Outcome> outcome(ids.size(), Outcome::kProcessed);
    std::vector<std::string> error(ids.size());
    parallel_for(ids.size(), workers, [&](std::size_t i) {
      const std::string& id = ids[i];
      try {
        std::string hash = input_hash(id);
        if (up_to_date(id, hash)) {
          outcome[i] = Outcome::kSkipped;
          return;
        }
        if (opt.dry_run) return;
        work(id);
        mark(id, hash);
      } catch (const TransportError&) {
        throw;
      } catch (const Error& e) {
        outcome[i] = Outcome::kFailed;
        error[i] = e.what();
        spdlog::error("{} {}: {}", to_string(rep.stage), id, e.what());
      }
    });
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (outcome[i] == Outcome::kProcessed) rep.processed.push_back(ids[i]);
      if (outcome[i] == Outcome::kSkipped) rep.skipped.push_back(ids[i]);
      if (outcome[i] == Outcome::kFailed) rep.failed.push_back({ids[i], error[i]});
    }
  }

  std::map<std::string, VideoRecord> record_map() const {
    std::map<std::string, VideoRecord> out;
    for (auto& r : records()) out.emplace(r.video_id, std::move(r));
    return out;
  }

  Lexicon lexicon() const {
    Lexicon lex = Lexicon::builtin();
    if (cfg.lexicon_path) lex = lex.merged_with(Lexicon::from_file(*cfg.lexicon_path));
    return lex;
  }

  std::optional<LanguageStatus> language_of(const VideoRecord& r) const {
    fs::path p = root / "probes" / (r.video_id + ".json");
    if (fs::exists(p)) return LanguageProbe::from_json(json::parse(read_file(p))).status();
    return r.language_status;
  }

  // Records with language and speech flags filled in from stage outputs.
  std::vector<VideoRecord> resolved_records() const {
    auto recs = records();
    for (auto& r : recs) {
      r.language_status = language_of(r);
      fs::path t = root / "transcripts" / (r.video_id + ".json");
      if (fs::exists(t)) r.has_speech = Transcript::from_json(json::parse(read_file(t))).has_speech;
    }
    return recs;
  }

  std::vector<LabeledRow> labeled_rows() const {
    std::vector<LabeledRow> out;
    for (const auto& id : ids_in(root / "aspects", ".jsonl")) {
      std::map<std::string, SentimentLabel> labels;
      fs::path a = root / "absa" / (id + ".jsonl");
      if (fs::exists(a))
        for (const auto& j : read_jsonl(a))
          labels[j.at("row_key").get<std::string>()] = SentimentPrediction::from_json(j).label;
      for (const auto& j : read_jsonl(root / "aspects" / (id + ".jsonl"))) {
        LabeledRow lr{AspectRow::from_json(j), std::nullopt};
        if (auto it = labels.find(row_key(lr.row)); it != labels.end()) lr.label = it->second;
        out.push_back(std::move(lr));
      }
    }
    return out;
  }

  std::vector<SceneLabel> scene_labels() const {
    std::vector<SceneLabel> out;
    for (const auto& id : ids_in(root / "scenes", ".jsonl"))
      for (const auto& j : read_jsonl(root / "scenes" / (id + ".jsonl"))) out.push_back(SceneLabel::from_json(j));
    return out;
  }

  std::vector<std::string> sampled_videos() const {
    std::vector<std::string> out;
    fs::path dir = root / "frames";
    if (!fs::is_directory(dir)) return out;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_directory() && fs::exists(e.path() / "index.jsonl")) out.push_back(e.path().filename().string());
    std::sort(out.begin(), out.end());
    return out;
  }

  // ---- stages -------------------------------------------------------------

  void ingest() {
    if (cfg.manifests.empty()) throw UsageError("no manifests configured");
    if (opt.dry_run) {
      for (const auto& m : cfg.manifests)
        for (const auto& r : parse_manifest(m.path, outlet_from_code(m.outlet))) rep.processed.push_back(r.video_id);
      return;
    }
    auto store = CorpusStore::open_writer(root);
    std::set<std::string> before;
    for (const auto& r : store.records()) before.insert(r.video_id);
    for (const auto& m : cfg.manifests) {
      for (const auto& r : store.import_manifest(m.path, outlet_from_code(m.outlet))) {
        (before.count(r.video_id) ? rep.skipped : rep.processed).push_back(r.video_id);
        before.insert(r.video_id);
      }
    }
  }

  void probe() {
    auto recs = record_map();
    std::vector<std::string> ids;
    for (const auto& [id, r] : recs) {
      if (r.language_status)
        rep.skipped.push_back(id);  // language given by the manifest
      else
        ids.push_back(id);
    }
    AsrClient asr(transport);
    for_each_video(
        ids, cfg.workers.asr,
        [&](const std::string& id) {
          return sha256_hex(recs.at(id).to_json().dump() + fmt::format("|{}", cfg.probe_window_s));
        },
        [&](const std::string& id) {
          auto p = asr.probe_language(id, locator(recs.at(id)), cfg.probe_window_s);
          write_json(root / "probes" / (id + ".json"), p.to_json());
        });
  }

  void transcribe() {
    auto recs = record_map();
    std::vector<std::string> ids;
    std::size_t non_english = 0;
    std::vector<std::string> unresolved;
    for (const auto& [id, r] : recs) {
      auto status = language_of(r);
      if (!status || *status == LanguageStatus::kUndetermined)
        unresolved.push_back(id);
      else if (*status == LanguageStatus::kEnglish)
        ids.push_back(id);
      else
        ++non_english;
    }
    rep.notes.push_back(fmt::format("{} non-English video(s) not transcribed", non_english));
    if (!unresolved.empty())
      rep.notes.push_back(fmt::format("{} video(s) with undetermined language excluded: {}", unresolved.size(),
                                      fmt::join(unresolved, ", ")));
    AsrClient asr(transport);
    for_each_video(
        ids, cfg.workers.asr,
        [&](const std::string& id) {
          return sha256_hex(recs.at(id).to_json().dump() + read_if_exists(root / "probes" / (id + ".json")));
        },
        [&](const std::string& id) {
          const auto& r = recs.at(id);
          fs::path probe_file = root / "probes" / (id + ".json");
          std::string language =
              fs::exists(probe_file) ? LanguageProbe::from_json(json::parse(read_file(probe_file))).detected_language
                                     : std::string("en");
          std::optional<double> duration;
          if (r.duration_s > 0) duration = r.duration_s;
          auto result = asr.transcribe(id, locator(r), language, duration);
          write_text(root / "transcripts" / "raw" / (id + ".json"), result.raw_response);
          write_json(root / "transcripts" / (id + ".json"), result.transcript.to_json());
        });
  }

  void link() {
    Lexicon lex = lexicon();
    ParserClient parser(transport);
    auto ids = ids_in(root / "transcripts", ".json");
    for_each_video(
        ids, 1,
        [&](const std::string& id) {
          return sha256_hex(read_file(root / "transcripts" / (id + ".json")) + "|" + lex.version());
        },
        [&](const std::string& id) {
          auto t = Transcript::from_json(json::parse(read_file(root / "transcripts" / (id + ".json"))));
          auto result = link_transcript(t, lex, parser);
          std::vector<json> rows, rejected;
          for (const auto& r : result.rows) rows.push_back(r.to_json());
          for (const auto& r : result.rejected)
            rejected.push_back({{"ordinal", r.ordinal}, {"first_line", r.first_line}, {"reason", r.reason}});
          write_text(root / "aspects" / "rejected" / (id + ".jsonl"), to_jsonl(rejected));
          write_text(root / "aspects" / (id + ".jsonl"), to_jsonl(rows));
          if (!result.rejected.empty())
            spdlog::warn("link {}: {} sentence(s) rejected by the tree check", id, result.rejected.size());
        });
  }

  void absa() {
    auto ids = ids_in(root / "aspects", ".jsonl");
    for_each_video(
        ids, 1, [&](const std::string& id) { return sha256_hex(read_file(root / "aspects" / (id + ".jsonl"))); },
        [&](const std::string& id) {
          std::vector<AspectRow> rows;
          for (const auto& j : read_jsonl(root / "aspects" / (id + ".jsonl"))) rows.push_back(AspectRow::from_json(j));
          std::mutex audit_mu;
          std::vector<json> audit;
          AbsaClient client(transport, [&](const json& rec) {
            std::lock_guard lock(audit_mu);
            audit.push_back(rec);
          });
          std::vector<AbsaRequest> reqs;
          for (const auto& r : rows) reqs.push_back({r.sentence, r.surface});
          auto preds = client.classify_batch(reqs, cfg.workers.absa);
          std::vector<json> out;
          for (std::size_t i = 0; i < rows.size(); ++i) {
            json j = preds[i].to_json();
            j["row_key"] = row_key(rows[i]);
            out.push_back(std::move(j));
          }
          std::sort(audit.begin(), audit.end(), [](const json& a, const json& b) { return a.dump() < b.dump(); });
          write_text(root / "absa" / "audit" / (id + ".jsonl"), to_jsonl(audit));
          write_text(root / "absa" / (id + ".jsonl"), to_jsonl(out));
        });
    if (opt.dry_run) return;
    bootstrap();
  }

  // Rebuilds the pending silver file, keeping reviewer decisions on candidates seen before.
  void bootstrap() {
    std::vector<ScoredExample> scored;
    for (const auto& id : ids_in(root / "absa", ".jsonl")) {
      fs::path aspects = root / "aspects" / (id + ".jsonl");
      if (!fs::exists(aspects)) continue;
      std::map<std::string, SentimentPrediction> preds;
      for (const auto& j : read_jsonl(root / "absa" / (id + ".jsonl")))
        preds[j.at("row_key").get<std::string>()] = SentimentPrediction::from_json(j);
      for (const auto& j : read_jsonl(aspects)) {
        auto row = AspectRow::from_json(j);
        auto it = preds.find(row_key(row));
        if (it == preds.end()) continue;
        scored.push_back({{row.sentence, row.surface, row.group}, it->second});
      }
    }
    auto candidates = bootstrap_silver(scored, cfg.absa_threshold);
    fs::path pending = root / "absa" / "silver_pending.jsonl";
    if (fs::exists(pending)) {
      std::map<std::pair<std::string, std::string>, SilverCandidate> reviewed;
      for (const auto& c : read_pending(pending))
        if (c.status != CandidateStatus::kPending) reviewed[{c.example.text, c.example.aspect}] = c;
      for (auto& c : candidates)
        if (auto it = reviewed.find({c.example.text, c.example.aspect}); it != reviewed.end()) {
          c.status = it->second.status;
          c.label = it->second.label;
        }
    }
    write_pending(pending, candidates);
    rep.notes.push_back(fmt::format("{} of {} predictions at confidence >= {} queued for review", candidates.size(),
                                    scored.size(), cfg.absa_threshold));
  }

  void sample() {
    auto recs = record_map();
    std::vector<std::string> ids;
    for (const auto& [id, _] : recs) ids.push_back(id);
    OpenCvMediaBackend media;
    FrameSampler sampler(media, root / "frames");
    std::mutex notes_mu;
    for_each_video(
        ids, 1,
        [&](const std::string& id) {
          std::string loc = locator(recs.at(id));
          if (loc.starts_with("http://") || loc.starts_with("https://"))
            throw DataError("remote media " + loc + " must be downloaded before sampling");
          if (!fs::is_regular_file(loc)) throw DataError("video file " + loc + " not found");
          return sha256_hex(sha256_file(loc) + cfg.sampling.to_json().dump());
        },
        [&](const std::string& id) {
          const auto& r = recs.at(id);
          auto result = sampler.sample(locator(r), id, r.title, cfg.sampling);
          std::lock_guard lock(notes_mu);
          for (const auto& w : result.warnings) rep.notes.push_back(id + ": " + w);
        });
  }

  void scenes() {
    ScenePrompt prompt = build_prompt(cfg.prompt_version);
    SceneClassifier classifier(transport, prompt);
    auto ids = sampled_videos();
    for_each_video(
        ids, 1,
        [&](const std::string& id) {
          return sha256_hex(read_file(root / "frames" / id / "index.jsonl") + "|" + prompt.hash());
        },
        [&](const std::string& id) {
          std::vector<SceneFrame> frames;
          for (const auto& f : FrameSampler::read_index(root / "frames", id))
            frames.push_back({f.video_id, f.frame_id, root / "frames" / f.image_ref});
          auto outcomes = classifier.classify_batch(frames, cfg.workers.vlm);
          std::vector<SceneLabel> labels;
          std::vector<json> out, raw;
          for (const auto& o : outcomes) {
            labels.push_back(o.label);
            out.push_back(o.label.to_json());
            raw.push_back({{"video_id", o.label.video_id}, {"frame_id", o.label.frame_id}, {"attempts", o.raw_attempts}});
          }
          fs::path label_file = root / "scenes" / (id + ".jsonl");
          if (fs::exists(label_file)) {
            std::vector<SceneLabel> previous;
            for (const auto& j : read_jsonl(label_file)) previous.push_back(SceneLabel::from_json(j));
            auto changed = nondeterministic_frames(previous, labels);
            if (!changed.empty()) {
              spdlog::warn("scenes {}: {} frame label(s) changed under the same prompt and model version", id,
                           changed.size());
              write_text(root / "scenes" / "nondeterminism" / (id + ".json"), json(changed).dump(2) + "\n");
            }
          }
          write_text(root / "scenes" / "raw" / (id + ".jsonl"), to_jsonl(raw));
          write_text(label_file, to_jsonl(out));
        });
  }

  void aggregate() {
    if (opt.dry_run) {
      rep.notes.push_back("would rebuild " + (root / "aggregate").string());
      return;
    }
    auto recs = resolved_records();
    fs::path dir = root / "aggregate";
    json summary;
    summary["videos"] = recs.size();

    std::vector<VideoRecord> transcribed;
    for (const auto& r : recs)
      if (r.has_speech) transcribed.push_back(r);
    auto stats = compute_corpus_stats(transcribed);
    summary["transcribed_videos"] = transcribed.size();

    auto rows = labeled_rows();
    auto table = aspect_sentiment_table(rows, recs);
    auto polarities = video_polarities(rows);
    auto by_outlet = polarity_by_outlet(polarities, recs);
    auto trend = monthly_trend(rows, recs);
    auto engagement = engagement_stats(recs, polarities);
    summary["aspect_rows"] = rows.size();
    const auto& overall = by_outlet.at("Overall");
    summary["video_polarity"] = {{"negative", overall.counts.neg},
                                 {"neutral", overall.counts.neut},
                                 {"positive", overall.counts.pos},
                                 {"videos", overall.counts.total()},
                                 {"non_neutral_pct", overall.non_neutral_pct}};

    auto labels = scene_labels();
    std::map<std::string, std::int64_t> frame_totals;
    std::map<std::string, std::string> outlet_of;
    for (const auto& r : recs) outlet_of[r.video_id] = r.outlet.code;
    for (const auto& id : sampled_videos()) {
      auto it = outlet_of.find(id);
      if (it == outlet_of.end()) throw IntegrityError("frames for unknown video " + id);
      frame_totals[it->second] += static_cast<std::int64_t>(FrameSampler::read_index(root / "frames", id).size());
    }
    auto scenes = scene_distribution(labels, recs, frame_totals);
    auto timeline = scene_share_over_time(labels, recs);
    json shares = json::object();
    for (SceneType t : kAllSceneTypes) shares[std::string(to_string(t))] = scenes.share_pct1(t);
    std::map<std::string, std::int64_t> statuses;
    for (const auto& l : labels) ++statuses[std::string(to_string(l.parse_status))];
    std::set<std::string> versions;
    for (const auto& l : labels) versions.insert(l.model_version);
    summary["scenes"] = {{"frames", scenes.denominator},
                         {"labels", scenes.label_total},
                         {"share_pct", shares},
                         {"parse_status", statuses},
                         {"discrepancies", scenes.discrepancies},
                         {"model_versions", versions},
                         {"prompt_hash", build_prompt(cfg.prompt_version).hash()}};
    summary["excluded_videos"] = {{"sentiment_trend", trend.excluded_videos},
                                  {"scene_timeline", timeline.excluded_videos}};

    fs::create_directories(dir);
    write_text(dir / "corpus_stats.csv", corpus_stats_csv(stats));
    write_text(dir / "aspect_sentiment.csv", table.to_csv());
    write_text(dir / "video_polarity.csv", polarity_csv(by_outlet));
    write_text(dir / "engagement.csv", engagement.to_csv());
    write_text(dir / "sentiment_trend_long.csv", trend.to_long_csv());
    write_text(dir / "scene_distribution.csv", scenes.to_csv());
    write_text(dir / "scene_share_long.csv", timeline.to_long_csv());
    write_json(dir / "summary.json", summary);
    rep.processed.push_back("aggregate");
  }

  void evaluate() {
    std::map<std::pair<std::string, int>, std::string> image_of;
    for (const auto& id : sampled_videos())
      for (const auto& f : FrameSampler::read_index(root / "frames", id))
        image_of[{f.video_id, f.frame_id}] = (fs::path("frames") / f.image_ref).string();
    std::vector<LabeledFrame> population;
    for (const auto& l : scene_labels()) {
      auto it = image_of.find({l.video_id, l.frame_id});
      population.push_back({l.video_id, l.frame_id, l.effective_type(), it == image_of.end() ? "" : it->second});
    }
    fs::path sheet = root / "eval" / "scene_sheet.tsv";
    fs::path spot = root / "eval" / "absa_spot_check.tsv";
    if (!fs::exists(sheet) || opt.force) {
      std::size_t n = std::min(cfg.eval_sample_size, population.size());
      if (n < cfg.eval_sample_size)
        rep.notes.push_back(fmt::format("population has {} labels; sampling all of them", population.size()));
      auto sample = sample_heldout(population, n, cfg.seed);
      rep.notes.push_back(fmt::format("annotation sheet with {} items: {}", n, sheet.string()));
      if (opt.dry_run) return;
      write_sheet(sheet, sample);
      std::vector<LabeledRow> rows;
      for (auto& r : labeled_rows())
        if (r.label) rows.push_back(std::move(r));
      write_spot_check(spot, sample_spot_check(rows, std::min<std::size_t>(50, rows.size()), cfg.seed));
      rep.processed.push_back("sample");
      return;
    }
    auto annotated = read_sheet(sheet);
    auto result = score_eval(annotated.items);
    json j = result.to_json();
    if (fs::exists(spot)) {
      auto items = read_spot_check(spot);
      bool complete = std::all_of(items.begin(), items.end(), [](const auto& i) { return i.verdict.has_value(); });
      if (complete && !items.empty())
        j["absa_spot_check_accuracy_pct"] = spot_check_accuracy(items);
      else
        rep.notes.push_back("ABSA spot-check sheet not fully annotated; skipped");
    }
    rep.notes.push_back(fmt::format("scene accuracy {}% ({}/{})", format1(result.accuracy_pct()),
                                    result.overall.correct, result.overall.total()));
    if (opt.dry_run) return;
    write_text(root / "eval" / "scene_eval.csv", result.to_csv());
    write_json(root / "eval" / "scene_eval.json", j);
    rep.processed.push_back("score");
  }

  void report() {
    std::set<std::string> tables = opt.tables;
    const auto& known = report_tables();
    for (const auto& t : tables)
      if (std::find(known.begin(), known.end(), t) == known.end())
        throw UsageError(fmt::format("unknown table '{}'; known tables: {}", t, fmt::join(known, ", ")));
    if (tables.empty()) tables.insert(known.begin(), known.end());
    fs::path out = opt.out_dir.value_or(root / "report");
    if (!opt.dry_run) fs::create_directories(out);
    for (const auto& t : tables) {
      fs::path src = t == "scene_eval" ? root / "eval" / "scene_eval.csv" : root / "aggregate" / (t + ".csv");
      if (!fs::exists(src)) {
        if (t != "scene_eval") throw IncompleteInputError("aggregate output missing", {src.string()});
        rep.notes.push_back("scene evaluation not scored yet; scene_eval omitted");
        continue;
      }
      if (!opt.dry_run) write_text(out / (t + ".csv"), read_file(src));
      rep.processed.push_back(t);
    }
    json summary = json::parse(read_file(root / "aggregate" / "summary.json"));
    fs::path eval_json = root / "eval" / "scene_eval.json";
    if (fs::exists(eval_json)) summary["scene_eval"] = json::parse(read_file(eval_json));
    if (!opt.dry_run) write_json(out / "summary.json", summary);
  }
};

}  // namespace

StageReport Pipeline::run(Stage stage, const StageOptions& options) {
  check_requirements(stage);
  StageReport rep;
  rep.stage = stage;
  fs::create_directories(config_.store_root);
  std::unique_ptr<StoreLock> lock;
  if (!options.dry_run && stage != Stage::kIngest) lock = std::make_unique<StoreLock>(config_.store_root);

  StageRunner runner(config_, state_->transport(), options, rep);
  auto persist = [&] {
    if (!options.dry_run)
      write_json(config_.store_root / "stages" / (std::string(to_string(stage)) + ".json"), rep.to_json());
  };
  try {
    switch (stage) {
      case Stage::kIngest: runner.ingest(); break;
      case Stage::kProbe: runner.probe(); break;
      case Stage::kTranscribe: runner.transcribe(); break;
      case Stage::kLink: runner.link(); break;
      case Stage::kAbsa: runner.absa(); break;
      case Stage::kSample: runner.sample(); break;
      case Stage::kScenes: runner.scenes(); break;
      case Stage::kAggregate: runner.aggregate(); break;
      case Stage::kEvaluate: runner.evaluate(); break;
      case Stage::kReport: runner.report(); break;
    }
  } catch (const TransportError& e) {
    rep.status = "aborted";
    rep.notes.push_back(e.what());
    persist();
    throw;
  }
  rep.status = options.dry_run ? "dry-run" : "complete";
  persist();
  spdlog::info("{}: {} processed, {} skipped, {} failed", to_string(stage), rep.processed.size(), rep.skipped.size(),
               rep.failed.size());
  return rep;
}

}  // namespace shortlens
