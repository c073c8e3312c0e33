#include "shortlens/eval_harness.hpp"

#include <algorithm>
#include <charconv>
#include <tuple>

#include <fmt/format.h>

#include "shortlens/errors.hpp"
#include "shortlens/random.hpp"

namespace shortlens {

namespace {

std::string tsv_clean(std::string_view s) {
  std::string out(s);
  std::replace_if(out.begin(), out.end(), [](char c) { return c == '\t' || c == '\n' || c == '\r'; }, ' ');
  return out;
}

std::optional<bool> parse_verdict(std::string_view raw, std::size_t line_no) {
  std::string v = to_lower_ascii(trim(raw));
  if (v.empty()) return std::nullopt;
  if (v == "y") return true;
  if (v == "n") return false;
  throw ParseError("verdict must be y, n or blank, got '" + std::string(raw) + "'", line_no);
}

std::string verdict_str(const std::optional<bool>& v) { return !v ? "" : (*v ? "y" : "n"); }

std::string locked_columns(const EvalSample& s) {
  std::string out;
  for (const auto& it : s.items)
    out += fmt::format("{}\t{}\t{}\t{}\n", it.video_id, it.frame_id, to_string(it.predicted), it.image_path);
  return out;
}

fs::path meta_path(const fs::path& sheet) { return fs::path(sheet.string() + ".meta.json"); }

// Splits a sheet into rows after checking the header; blank lines are skipped.
std::vector<std::pair<std::size_t, std::vector<std::string>>> read_tsv(const fs::path& path,
                                                                       std::string_view header, std::size_t cols) {
  std::string text = read_file(path);
  auto lines = split(text, '\n');
  if (lines.empty() || trim(lines[0]) != header)
    throw ParseError("unexpected header in " + path.string() + ", expected '" + std::string(header) + "'", 1);
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::string l = lines[i];
    if (!l.empty() && l.back() == '\r') l.pop_back();
    if (trim(l).empty()) continue;
    auto fields = split(l, '\t');
    if (fields.size() == cols - 1) fields.emplace_back();  // trailing empty verdict without a tab
    if (fields.size() != cols)
      throw ParseError("expected " + std::to_string(cols) + " tab-separated fields, got " +
                           std::to_string(fields.size()),
                       i + 1);
    rows.emplace_back(i + 1, std::move(fields));
  }
  return rows;
}

int parse_int(std::string_view s, std::size_t line_no) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ParseError("bad frame_id '" + std::string(s) + "'", line_no);
  return v;
}

}  // namespace

std::string population_hash(std::span<const LabeledFrame> population) {
  std::vector<std::string> lines;
  lines.reserve(population.size());
  for (const auto& f : population)
    lines.push_back(fmt::format("{}\t{}\t{}\t{}\n", f.video_id, f.frame_id, to_string(f.predicted), f.image_path));
  std::sort(lines.begin(), lines.end());
  std::string all;
  for (const auto& l : lines) all += l;
  return sha256_hex(all);
}

EvalSample sample_heldout(std::span<const LabeledFrame> population, std::size_t n, std::uint64_t seed) {
  if (n > population.size())
    throw PreconditionError("sample size " + std::to_string(n) + " exceeds population of " +
                            std::to_string(population.size()));
  std::vector<const LabeledFrame*> canon;
  for (const auto& f : population) canon.push_back(&f);
  std::sort(canon.begin(), canon.end(), [](const LabeledFrame* a, const LabeledFrame* b) {
    return std::tie(a->video_id, a->frame_id) < std::tie(b->video_id, b->frame_id);
  });
  for (std::size_t i = 1; i < canon.size(); ++i)
    if (canon[i - 1]->video_id == canon[i]->video_id && canon[i - 1]->frame_id == canon[i]->frame_id)
      throw ConflictError("frame " + canon[i]->video_id + "/" + std::to_string(canon[i]->frame_id) +
                          " appears twice in the population");

  EvalSample s;
  s.seed = seed;
  s.population_size = population.size();
  s.population_hash = population_hash(population);
  auto picks = sample_without_replacement(canon.size(), n, seed);
  std::sort(picks.begin(), picks.end());
  for (auto i : picks) {
    const auto& f = *canon[i];
    s.items.push_back({f.video_id, f.frame_id, f.predicted, f.image_path, std::nullopt});
  }
  return s;
}

void write_sheet(const fs::path& path, const EvalSample& sample) {
  std::string out = std::string(kSheetHeader) + "\n";
  for (const auto& it : sample.items)
    out += fmt::format("{}\t{}\t{}\t{}\t{}\n", tsv_clean(it.video_id), it.frame_id, to_string(it.predicted),
                       tsv_clean(it.image_path), verdict_str(it.verdict));
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_atomic(path, out);
  json meta = {{"seed", sample.seed},
               {"n", sample.items.size()},
               {"population_size", sample.population_size},
               {"population_hash", sample.population_hash},
               {"locked_columns_sha256", sha256_hex(locked_columns(sample))},
               {"prng", "mt19937_64/rejection"}};
  write_file_atomic(meta_path(path), meta.dump(2) + "\n");
}

EvalSample read_sheet(const fs::path& path) {
  EvalSample s;
  for (auto& [line_no, f] : read_tsv(path, kSheetHeader, 5)) {
    EvalItem it;
    it.video_id = f[0];
    it.frame_id = parse_int(f[1], line_no);
    auto type = parse_scene_type(trim(f[2]));
    if (!type) throw ParseError("unknown predicted_type '" + f[2] + "'", line_no);
    it.predicted = *type;
    it.image_path = f[3];
    it.verdict = parse_verdict(f[4], line_no);
    s.items.push_back(std::move(it));
  }
  if (fs::exists(meta_path(path))) {
    json meta;
    try {
      meta = json::parse(read_file(meta_path(path)));
      s.seed = meta.at("seed").get<std::uint64_t>();
      s.population_size = meta.at("population_size").get<std::size_t>();
      s.population_hash = meta.at("population_hash").get<std::string>();
    } catch (const json::exception& e) {
      throw ParseError("malformed sheet metadata " + meta_path(path).string() + ": " + e.what(), 0);
    }
    if (meta.value("locked_columns_sha256", "") != sha256_hex(locked_columns(s)))
      throw IntegrityError("locked columns of " + path.string() + " were edited; only the verdict column may change");
  }
  return s;
}

std::string EvalResult::to_csv() const {
  std::vector<std::string> head = {"scene_type", "true", "false", "total", "false_pct"};
  std::string out = csv_row(head) + "\n";
  auto emit = [&](std::string_view name, const EvalRow& r) {
    std::vector<std::string> row = {std::string(name), std::to_string(r.correct), std::to_string(r.wrong),
                                    std::to_string(r.total()), format1(r.false_pct())};
    out += csv_row(row) + "\n";
  };
  for (SceneType t : kAllSceneTypes) emit(to_string(t), rows.at(t));
  emit("Overall", overall);
  return out;
}

json EvalResult::to_json() const {
  json per = json::object();
  for (const auto& [t, r] : rows)
    per[std::string(to_string(t))] = {
        {"true", r.correct}, {"false", r.wrong}, {"total", r.total()}, {"false_pct", r.false_pct()}};
  return {{"per_type", per},
          {"correct", overall.correct},
          {"total", overall.total()},
          {"accuracy_pct", accuracy_pct()}};
}

EvalResult score_eval(std::span<const EvalItem> items) {
  std::vector<std::string> missing;
  for (const auto& it : items)
    if (!it.verdict) missing.push_back(it.video_id + "/" + std::to_string(it.frame_id));
  if (!missing.empty()) throw IncompleteInputError("annotation sheet has unannotated items", std::move(missing));
  EvalResult r;
  for (SceneType t : kAllSceneTypes) r.rows[t];
  for (const auto& it : items) {
    auto& row = r.rows[it.predicted];
    (*it.verdict ? row.correct : row.wrong) += 1;
    (*it.verdict ? r.overall.correct : r.overall.wrong) += 1;
  }
  return r;
}

// ---------------------------------------------------------------------------

std::vector<SpotCheckItem> sample_spot_check(std::span<const LabeledRow> rows, std::size_t n, std::uint64_t seed) {
  std::vector<const LabeledRow*> canon;
  for (const auto& r : rows)
    if (r.label) canon.push_back(&r);
  if (n > canon.size())
    throw PreconditionError("spot-check size " + std::to_string(n) + " exceeds " + std::to_string(canon.size()) +
                            " labeled rows");
  std::sort(canon.begin(), canon.end(),
            [](const LabeledRow* a, const LabeledRow* b) { return row_key(a->row) < row_key(b->row); });
  auto picks = sample_without_replacement(canon.size(), n, seed);
  std::sort(picks.begin(), picks.end());
  std::vector<SpotCheckItem> out;
  for (auto i : picks) {
    const auto& r = *canon[i];
    out.push_back({row_key(r.row), r.row.surface, *r.label, r.row.sentence, std::nullopt});
  }
  return out;
}

void write_spot_check(const fs::path& path, std::span<const SpotCheckItem> items) {
  std::string out = std::string(kSpotCheckHeader) + "\n";
  for (const auto& it : items)
    out += fmt::format("{}\t{}\t{}\t{}\t{}\n", tsv_clean(it.row_key), tsv_clean(it.aspect), to_string(it.predicted),
                       tsv_clean(it.sentence), verdict_str(it.verdict));
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_atomic(path, out);
}

std::vector<SpotCheckItem> read_spot_check(const fs::path& path) {
  std::vector<SpotCheckItem> out;
  for (auto& [line_no, f] : read_tsv(path, kSpotCheckHeader, 5)) {
    auto label = parse_sentiment_label(trim(f[2]));
    if (!label) throw ParseError("unknown predicted_label '" + f[2] + "'", line_no);
    out.push_back({f[0], f[1], *label, f[3], parse_verdict(f[4], line_no)});
  }
  return out;
}

double spot_check_accuracy(std::span<const SpotCheckItem> items) {
  std::vector<std::string> missing;
  std::int64_t ok = 0;
  for (const auto& it : items) {
    if (!it.verdict)
      missing.push_back(it.row_key);
    else if (*it.verdict)
      ++ok;
  }
  if (!missing.empty()) throw IncompleteInputError("spot-check sheet has unannotated items", std::move(missing));
  return percent1(ok, static_cast<std::int64_t>(items.size()));
}

}  // namespace shortlens
