#include "shortlens/absa.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include <spdlog/spdlog.h>

#include "shortlens/errors.hpp"
#include "shortlens/parallel.hpp"
#include "shortlens/random.hpp"

namespace shortlens {

std::string_view to_string(SentimentLabel l) {
  switch (l) {
    case SentimentLabel::kNegative:
      return "negative";
    case SentimentLabel::kNeutral:
      return "neutral";
    case SentimentLabel::kPositive:
      return "positive";
  }
  return "neutral";
}

std::optional<SentimentLabel> parse_sentiment_label(std::string_view s) {
  std::string l = to_lower_ascii(trim(s));
  if (l == "negative") return SentimentLabel::kNegative;
  if (l == "neutral") return SentimentLabel::kNeutral;
  if (l == "positive") return SentimentLabel::kPositive;
  return std::nullopt;
}

json SentimentPrediction::to_json() const {
  return {{"label", to_string(label)}, {"confidence", confidence}, {"model_version", model_version}};
}

SentimentPrediction SentimentPrediction::from_json(const json& j) {
  auto l = parse_sentiment_label(j.at("label").get<std::string>());
  if (!l) throw ValidationError("unknown sentiment label " + j.at("label").dump());
  return {*l, j.at("confidence").get<double>(), j.value("model_version", std::string())};
}

std::string_view to_string(Provenance p) { return p == Provenance::kBaseGold ? "base_gold" : "silver_validated"; }

json GoldExample::to_json() const {
  return {{"text", text},
          {"aspect", aspect},
          {"group", to_string(group)},
          {"label", to_string(label)},
          {"provenance", to_string(provenance)}};
}

GoldExample GoldExample::from_json(const json& j) {
  GoldExample g;
  g.text = j.at("text").get<std::string>();
  g.aspect = j.at("aspect").get<std::string>();
  auto grp = parse_aspect_group(j.at("group").get<std::string>());
  if (!grp) throw ValidationError("unknown aspect group " + j.at("group").dump());
  g.group = *grp;
  auto l = parse_sentiment_label(j.at("label").get<std::string>());
  if (!l) throw ValidationError("unknown sentiment label " + j.at("label").dump());
  g.label = *l;
  std::string prov = j.value("provenance", std::string("base_gold"));
  if (prov == "base_gold")
    g.provenance = Provenance::kBaseGold;
  else if (prov == "silver_validated")
    g.provenance = Provenance::kSilverValidated;
  else
    throw ValidationError("unknown provenance '" + prov + "'");
  if (!aspect_in_text(g.text, g.aspect))
    throw ValidationError("aspect '" + g.aspect + "' does not occur in '" + g.text + "'");
  return g;
}

bool aspect_in_text(std::string_view text, std::string_view aspect) {
  std::string key = normalize_form(aspect);
  if (key.empty()) return false;
  for (const auto& w : tokenize_words(text))
    if (normalize_form(w) == key) return true;
  return normalize_form(text).find(key) != std::string::npos;
}

// ---------------------------------------------------------------------------

SentimentPrediction parse_absa_response(std::string_view body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error&) {
    throw ContractViolation("/absa: reply is not valid JSON", std::string(body));
  }
  if (!j.is_object() || !j.contains("label") || !j["label"].is_string() || !j.contains("confidence") ||
      !j["confidence"].is_number())
    throw ContractViolation("/absa: reply lacks label/confidence", std::string(body));
  auto label = parse_sentiment_label(j["label"].get<std::string>());
  if (!label) throw ContractViolation("/absa: unknown label " + j["label"].dump(), std::string(body));
  double c = j["confidence"].get<double>();
  if (!(c >= 0.0 && c <= 1.0)) throw ContractViolation("/absa: confidence outside [0,1]", std::string(body));
  std::string version = j.contains("model_version") && j["model_version"].is_string()
                            ? j["model_version"].get<std::string>()
                            : std::string("unknown");
  return {*label, c, version};
}

SentimentPrediction AbsaClient::classify(std::string_view text, std::string_view aspect) const {
  if (!aspect_in_text(text, aspect))
    throw PreconditionError("aspect '" + std::string(aspect) + "' does not occur in '" + std::string(text) + "'");
  auto key = std::make_pair(std::string(text), std::string(aspect));
  {
    std::lock_guard lock(mu_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  json req = {{"text", text}, {"aspect", aspect}};
  HttpReply reply = transport_.post(routes::kAbsa, req.dump());
  if (!reply.ok()) {
    spdlog::error("/absa: HTTP {}: {}", reply.status, reply.body);
    throw ContractViolation("/absa: HTTP " + std::to_string(reply.status), reply.body);
  }
  SentimentPrediction p = parse_absa_response(reply.body);
  {
    std::lock_guard lock(mu_);
    ++calls_;
    if (p.model_version != cache_version_) {
      cache_.clear();
      cache_version_ = p.model_version;
    }
    cache_.emplace(std::move(key), p);
  }
  if (audit_) audit_({{"request", req}, {"response", p.to_json()}});
  return p;
}

std::vector<SentimentPrediction> AbsaClient::classify_batch(std::span<const AbsaRequest> requests,
                                                            std::size_t workers) const {
  // Validate everything up front so a bad row fails before any traffic.
  for (const auto& r : requests)
    if (!aspect_in_text(r.text, r.aspect))
      throw PreconditionError("aspect '" + r.aspect + "' does not occur in '" + r.text + "'");
  std::vector<SentimentPrediction> out(requests.size());
  parallel_for(requests.size(), workers, [&](std::size_t i) { out[i] = classify(requests[i].text, requests[i].aspect); });
  return out;
}

std::size_t AbsaClient::backend_calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

// ---------------------------------------------------------------------------

std::string_view to_string(CandidateStatus s) {
  switch (s) {
    case CandidateStatus::kPending:
      return "pending";
    case CandidateStatus::kAccepted:
      return "accepted";
    case CandidateStatus::kRejected:
      return "rejected";
  }
  return "pending";
}

json SilverCandidate::to_json() const {
  return {{"text", example.text},
          {"aspect", example.aspect},
          {"group", to_string(example.group)},
          {"label", to_string(label)},
          {"provenance", to_string(Provenance::kSilverValidated)},
          {"confidence", confidence},
          {"status", to_string(status)}};
}

SilverCandidate SilverCandidate::from_json(const json& j) {
  SilverCandidate c;
  c.example.text = j.at("text").get<std::string>();
  c.example.aspect = j.at("aspect").get<std::string>();
  auto g = parse_aspect_group(j.at("group").get<std::string>());
  if (!g) throw ValidationError("unknown aspect group " + j.at("group").dump());
  c.example.group = *g;
  auto l = parse_sentiment_label(j.at("label").get<std::string>());
  if (!l) throw ValidationError("unknown sentiment label " + j.at("label").dump());
  c.label = *l;
  c.confidence = j.at("confidence").get<double>();
  std::string st = j.value("status", std::string("pending"));
  if (st == "pending")
    c.status = CandidateStatus::kPending;
  else if (st == "accepted")
    c.status = CandidateStatus::kAccepted;
  else if (st == "rejected")
    c.status = CandidateStatus::kRejected;
  else
    throw ValidationError("unknown candidate status '" + st + "'");
  return c;
}

std::vector<SilverCandidate> bootstrap_silver(std::span<const ScoredExample> predictions, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw PreconditionError("silver threshold must be in (0, 1]");
  std::vector<SilverCandidate> out;
  for (const auto& p : predictions)
    if (p.prediction.confidence >= threshold)
      out.push_back({p.example, p.prediction.label, p.prediction.confidence, CandidateStatus::kPending});
  return out;
}

std::vector<GoldExample> promote_validated(std::span<const SilverCandidate> candidates) {
  std::vector<GoldExample> out;
  for (const auto& c : candidates) {
    if (c.status != CandidateStatus::kAccepted) continue;
    if (!aspect_in_text(c.example.text, c.example.aspect))
      throw ValidationError("accepted candidate: aspect '" + c.example.aspect + "' not in text");
    out.push_back({c.example.text, c.example.aspect, c.example.group, c.label, Provenance::kSilverValidated});
  }
  return out;
}

std::vector<GoldExample> merge_gold(std::span<const GoldExample> gold, std::span<const GoldExample> additions) {
  std::vector<GoldExample> out(gold.begin(), gold.end());
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& g : gold) seen.emplace(g.text, g.aspect);
  for (const auto& a : additions)
    if (seen.emplace(a.text, a.aspect).second) out.push_back(a);
  return out;
}

std::vector<GoldExample> read_gold(const fs::path& path) {
  std::vector<GoldExample> out;
  std::size_t n = 0;
  for (const auto& j : read_jsonl(path)) {
    ++n;
    try {
      out.push_back(GoldExample::from_json(j));
    } catch (const json::exception& e) {
      throw ParseError(std::string("gold record: ") + e.what(), n);
    } catch (const ValidationError& e) {
      throw ParseError(std::string("gold record: ") + e.what(), n);
    }
  }
  return out;
}

void write_gold(const fs::path& path, std::span<const GoldExample> gold) {
  std::vector<json> rows;
  for (const auto& g : gold) rows.push_back(g.to_json());
  write_file_atomic(path, to_jsonl(rows));
}

std::vector<SilverCandidate> read_pending(const fs::path& path) {
  std::vector<SilverCandidate> out;
  std::size_t n = 0;
  for (const auto& j : read_jsonl(path)) {
    ++n;
    try {
      out.push_back(SilverCandidate::from_json(j));
    } catch (const json::exception& e) {
      throw ParseError(std::string("pending record: ") + e.what(), n);
    }
  }
  return out;
}

void write_pending(const fs::path& path, std::span<const SilverCandidate> candidates) {
  std::vector<json> rows;
  for (const auto& c : candidates) rows.push_back(c.to_json());
  write_file_atomic(path, to_jsonl(rows));
}

// ---------------------------------------------------------------------------

void LabelCounts::add(SentimentLabel l, std::int64_t n) {
  switch (l) {
    case SentimentLabel::kNegative:
      neg += n;
      break;
    case SentimentLabel::kNeutral:
      neut += n;
      break;
    case SentimentLabel::kPositive:
      pos += n;
      break;
  }
}

std::int64_t LabelCounts::get(SentimentLabel l) const {
  switch (l) {
    case SentimentLabel::kNegative:
      return neg;
    case SentimentLabel::kNeutral:
      return neut;
    case SentimentLabel::kPositive:
      return pos;
  }
  return 0;
}

LabelCounts& LabelCounts::operator+=(const LabelCounts& o) {
  neg += o.neg;
  neut += o.neut;
  pos += o.pos;
  return *this;
}

LabelCounts LabelDistribution::grand_total() const {
  LabelCounts t;
  for (const auto& [g, c] : rows) t += c;
  return t;
}

LabelDistribution label_distribution(std::span<const GoldExample> gold) {
  LabelDistribution d;
  for (auto g : kAllAspectGroups) d.rows[g] = {};
  for (const auto& ex : gold) d.rows[ex.group].add(ex.label);
  return d;
}

MacroF1Report macro_f1_report(std::span<const SentimentLabel> predictions, std::span<const SentimentLabel> gold) {
  if (predictions.size() != gold.size())
    throw PreconditionError("macro_f1: " + std::to_string(predictions.size()) + " predictions vs " +
                            std::to_string(gold.size()) + " gold labels");
  if (gold.empty()) throw PreconditionError("macro_f1: empty input");
  MacroF1Report r;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    auto p = static_cast<std::size_t>(predictions[i]);
    auto g = static_cast<std::size_t>(gold[i]);
    if (p == g) {
      ++r.per_class[p].tp;
    } else {
      ++r.per_class[p].fp;
      ++r.per_class[g].fn;
    }
  }
  double sum = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    auto& s = r.per_class[c];
    s.precision = s.tp + s.fp > 0 ? static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fp) : 0.0;
    s.recall = s.tp + s.fn > 0 ? static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fn) : 0.0;
    s.f1 = s.precision + s.recall > 0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    if (s.tp + s.fp + s.fn == 0) {
      r.absent_classes.push_back(kAllLabels[c]);
      spdlog::warn("macro_f1: class '{}' absent from gold and predictions; scored as 0", to_string(kAllLabels[c]));
    }
    sum += s.f1;
  }
  r.macro_f1 = sum / 3.0;
  return r;
}

double macro_f1(std::span<const SentimentLabel> predictions, std::span<const SentimentLabel> gold) {
  return macro_f1_report(predictions, gold).macro_f1;
}

GoldSplit stratified_split(std::span<const GoldExample> gold, std::uint64_t seed, SplitFractions fractions) {
  if (fractions.train < 0 || fractions.dev < 0 || fractions.test < 0 ||
      std::abs(fractions.train + fractions.dev + fractions.test - 1.0) > 1e-9)
    throw PreconditionError("split fractions must be non-negative and sum to 1");

  std::map<std::pair<AspectGroup, SentimentLabel>, std::vector<GoldExample>> strata;
  for (const auto& g : gold) strata[{g.group, g.label}].push_back(g);

  GoldSplit split;
  split.seed = seed;
  PortableRng rng(seed);
  for (auto& [key, items] : strata) {
    std::sort(items.begin(), items.end(), [](const GoldExample& a, const GoldExample& b) {
      return std::tie(a.text, a.aspect) < std::tie(b.text, b.aspect);
    });
    for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[rng.below(i)]);
    auto n = static_cast<double>(items.size());
    auto n_test = static_cast<std::size_t>(std::llround(n * fractions.test));
    auto n_dev = std::min(items.size() - n_test, static_cast<std::size_t>(std::llround(n * fractions.dev)));
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (i < n_test)
        split.test.push_back(items[i]);
      else if (i < n_test + n_dev)
        split.dev.push_back(items[i]);
      else
        split.train.push_back(items[i]);
    }
  }
  return split;
}

}  // namespace shortlens
