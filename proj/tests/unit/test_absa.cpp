#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "reference_fixtures.hpp"
#include "shortlens/absa.hpp"
#include "shortlens/errors.hpp"
#include "shortlens/stub_backend.hpp"

using namespace shortlens;
using namespace shortlens::testing;
using L = SentimentLabel;

namespace {

// Per-class F1 from an explicit confusion count, averaged over three classes.
double oracle_macro_f1(const std::vector<L>& pred, const std::vector<L>& gold) {
  double sum = 0;
  for (L c : kAllLabels) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (pred[i] == c && gold[i] == c) ++tp;
      if (pred[i] == c && gold[i] != c) ++fp;
      if (pred[i] != c && gold[i] == c) ++fn;
    }
    double denom = 2 * tp + fp + fn;
    sum += denom == 0 ? 0 : 2 * tp / denom;
  }
  return sum / 3;
}

std::vector<ScoredExample> scored(std::initializer_list<double> confidences) {
  std::vector<ScoredExample> out;
  int i = 0;
  for (double c : confidences) {
    std::string text = "Israel item " + std::to_string(i++);
    out.push_back({{text, "Israel", AspectGroup::kIsrael}, {L::kNegative, c, "m1"}});
  }
  return out;
}

}  // namespace

TEST_CASE("labels round trip") {
  for (L l : kAllLabels) CHECK(parse_sentiment_label(to_string(l)) == l);
  CHECK_FALSE(parse_sentiment_label("mixed"));
}

TEST_CASE("macro-F1 on the four-item example") {
  std::vector<L> gold = {L::kNegative, L::kNegative, L::kPositive, L::kPositive};
  std::vector<L> pred = {L::kNegative, L::kPositive, L::kPositive, L::kPositive};
  double expected = (2.0 / 3.0 + 0.0 + 0.8) / 3.0;
  CHECK(macro_f1(pred, gold) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(macro_f1(pred, gold) == doctest::Approx(0.4889).epsilon(1e-4));
  auto rep = macro_f1_report(pred, gold);
  CHECK(rep.per_class[1].f1 == 0.0);
  CHECK(rep.absent_classes == std::vector<L>{L::kNeutral});
  CHECK(rep.per_class[0].tp == 1);
  CHECK(rep.per_class[0].fn == 1);
  CHECK(rep.per_class[2].fp == 1);
  std::vector<L> all = {L::kNegative, L::kNeutral, L::kPositive, L::kNeutral};
  CHECK(macro_f1(all, all) == 1.0);
  // an absent class scores 0 even under perfect agreement
  CHECK(macro_f1(gold, gold) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("macro-F1 averages over the fixed class set") {
  std::vector<L> all_neutral(5, L::kNeutral);
  CHECK(macro_f1(all_neutral, all_neutral) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(macro_f1(std::vector<L>{L::kNeutral}, std::vector<L>{}), PreconditionError);
  CHECK_THROWS_AS(macro_f1(std::vector<L>{}, std::vector<L>{}), PreconditionError);
}

TEST_CASE("macro-F1 matches the confusion-matrix oracle on random inputs") {
  std::mt19937 g(11);
  std::uniform_int_distribution<int> d(0, 2);
  for (int round = 0; round < 200; ++round) {
    std::size_t n = 1 + round % 40;
    std::vector<L> gold(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      gold[i] = static_cast<L>(d(g));
      pred[i] = static_cast<L>(d(g));
    }
    CHECK(macro_f1(pred, gold) == doctest::Approx(oracle_macro_f1(pred, gold)).epsilon(1e-12));

    // consistent relabeling leaves the score unchanged
    std::array<int, 3> perm = {0, 1, 2};
    std::shuffle(perm.begin(), perm.end(), g);
    auto relabel = [&](std::vector<L> v) {
      for (auto& x : v) x = static_cast<L>(perm[static_cast<int>(x)]);
      return v;
    };
    CHECK(macro_f1(relabel(pred), relabel(gold)) == doctest::Approx(macro_f1(pred, gold)).epsilon(1e-12));
  }
}

TEST_CASE("macro-F1 equals accuracy on a diagonal confusion matrix with all classes") {
  std::vector<L> v = {L::kNegative, L::kNeutral, L::kPositive, L::kNeutral};
  CHECK(macro_f1(v, v) == 1.0);
}

TEST_CASE("silver threshold is inclusive") {
  auto preds = scored({0.7499, 0.75, 0.9});
  auto kept = bootstrap_silver(preds, 0.75);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].confidence == 0.75);
  CHECK(kept[1].confidence == 0.9);
  for (const auto& c : kept) CHECK(c.status == CandidateStatus::kPending);
  CHECK_THROWS_AS(bootstrap_silver(preds, 0.0), PreconditionError);
  CHECK_THROWS_AS(bootstrap_silver(preds, 1.01), PreconditionError);
  CHECK(bootstrap_silver(preds, 1.0).empty());
}

TEST_CASE("raising the threshold never grows the candidate set") {
  std::mt19937 g(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ScoredExample> preds;
  for (int i = 0; i < 300; ++i)
    preds.push_back({{"Hamas line " + std::to_string(i), "Hamas", AspectGroup::kIslamism}, {L::kPositive, u(g), "m"}});
  std::size_t prev = preds.size();
  for (double t = 0.05; t <= 1.0; t += 0.05) {
    auto n = bootstrap_silver(preds, t).size();
    CHECK(n <= prev);
    auto expected = std::count_if(preds.begin(), preds.end(), [&](auto& p) { return p.prediction.confidence >= t; });
    CHECK(n == static_cast<std::size_t>(expected));
    prev = n;
  }
}

TEST_CASE("only accepted candidates become gold") {
  auto cands = bootstrap_silver(scored({0.8, 0.85, 0.95}), 0.75);
  cands[0].status = CandidateStatus::kAccepted;
  cands[0].label = L::kNeutral;  // reviewer correction
  cands[1].status = CandidateStatus::kRejected;
  auto gold = promote_validated(cands);
  REQUIRE(gold.size() == 1);
  CHECK(gold[0].provenance == Provenance::kSilverValidated);
  CHECK(gold[0].label == L::kNeutral);

  std::vector<GoldExample> base = {{"Israel item 0", "Israel", AspectGroup::kIsrael, L::kNegative, Provenance::kBaseGold}};
  auto merged = merge_gold(base, gold);
  CHECK(merged.size() == 1);
  CHECK(merged[0].provenance == Provenance::kBaseGold);
}

TEST_CASE("gold and pending files round trip") {
  auto dir = fs::temp_directory_path() / "shortlens_absa_io";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto gold = gold_fixture();
  gold.resize(50);
  write_gold(dir / "gold.jsonl", gold);
  CHECK(read_gold(dir / "gold.jsonl") == gold);

  auto cands = bootstrap_silver(scored({0.8, 0.9}), 0.75);
  cands[1].status = CandidateStatus::kAccepted;
  write_pending(dir / "pending.jsonl", cands);
  auto back = read_pending(dir / "pending.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[1].status == CandidateStatus::kAccepted);
  CHECK(back[0].example.text == cands[0].example.text);

  write_file_atomic(dir / "bad.jsonl", R"({"text":"no aspect here","aspect":"Israel","group":"Israel","label":"neutral","provenance":"base_gold"})" "\n");
  CHECK_THROWS_AS(read_gold(dir / "bad.jsonl"), ParseError);
  fs::remove_all(dir);
}

TEST_CASE("aspect occurrence check") {
  CHECK(aspect_in_text("Netanyahu's cabinet met", "Netanyahu"));
  CHECK(aspect_in_text("the Israeli Defense Forces said", "Israeli Defense Forces"));
  CHECK(aspect_in_text("HAMAS denied it", "Hamas"));
  CHECK_FALSE(aspect_in_text("The weather is mild", "Israel"));
}

TEST_CASE("label distribution reproduces the gold table") {
  auto dist = label_distribution(gold_fixture());
  CHECK(dist.rows.size() == 10);
  std::int64_t oracle_total = 0;
  for (const auto& r : kGoldCounts) {
    const auto& c = dist.rows.at(r.group);
    CHECK(c.neg == r.neg);
    CHECK(c.neut == r.neut);
    CHECK(c.pos == r.pos);
    CHECK(c.total() == r.total);
    oracle_total += r.neg + r.neut + r.pos;
  }
  CHECK(dist.grand_total().total() == oracle_total);
  CHECK(oracle_total == 6981);
  CHECK(dist.rows.at(AspectGroup::kIslamism) == LabelCounts{612, 570, 244});
}

TEST_CASE("label distribution ignores input order") {
  auto gold = gold_fixture();
  auto expected = label_distribution(gold).rows;
  std::mt19937 g(9);
  std::shuffle(gold.begin(), gold.end(), g);
  CHECK(label_distribution(gold).rows == expected);
}

TEST_CASE("stratified split") {
  auto gold = gold_fixture();
  auto a = stratified_split(gold, 42);
  CHECK(a.train.size() + a.dev.size() + a.test.size() == gold.size());
  auto shuffled = gold;
  std::mt19937 g(2);
  std::shuffle(shuffled.begin(), shuffled.end(), g);
  auto b = stratified_split(shuffled, 42);
  CHECK(a.test == b.test);
  CHECK(a.dev == b.dev);
  auto c = stratified_split(gold, 43);
  CHECK_FALSE(c.test == a.test);
  // every stratum keeps its share in the test split
  auto test_dist = label_distribution(a.test);
  for (const auto& r : kGoldCounts) {
    CHECK(test_dist.rows.at(r.group).neg == std::llround(r.neg * 0.1));
  }
  CHECK_THROWS_AS(stratified_split(gold, 1, {0.5, 0.5, 0.5}), PreconditionError);
}

TEST_CASE("absa client caches and validates") {
  json script;
  script["absa"]["Hamas fired rockets\tHamas"] = {{"label", "negative"}, {"confidence", 0.91}};
  StubModels models(script);
  InProcessTransport transport(models);
  std::vector<json> audit;
  AbsaClient client(transport, [&](const json& j) { audit.push_back(j); });

  auto p = client.classify("Hamas fired rockets", "Hamas");
  CHECK(p.label == L::kNegative);
  CHECK(p.confidence == doctest::Approx(0.91));
  CHECK(p.model_version == StubModels::kAbsaVersion);
  client.classify("Hamas fired rockets", "Hamas");
  CHECK(client.backend_calls() == 1);
  CHECK(models.calls(routes::kAbsa) == 1);
  CHECK(audit.size() == 1);

  CHECK_THROWS_AS(client.classify("nothing relevant", "Israel"), PreconditionError);
  CHECK(models.calls(routes::kAbsa) == 1);

  std::vector<AbsaRequest> reqs;
  for (int i = 0; i < 40; ++i) reqs.push_back({"Israel statement " + std::to_string(i), "Israel"});
  auto out = client.classify_batch(reqs, 6);
  REQUIRE(out.size() == 40);
  for (std::size_t i = 0; i < reqs.size(); ++i) CHECK(out[i] == client.classify(reqs[i].text, reqs[i].aspect));

  reqs.push_back({"no match", "Jews"});
  auto before = models.calls(routes::kAbsa);
  CHECK_THROWS_AS(client.classify_batch(reqs, 4), PreconditionError);
  CHECK(models.calls(routes::kAbsa) == before);
}

TEST_CASE("absa reply contract") {
  CHECK(parse_absa_response(R"({"label":"positive","confidence":0.5})").model_version == "unknown");
  CHECK_THROWS_AS(parse_absa_response(R"({"label":"mixed","confidence":0.5})"), ContractViolation);
  CHECK_THROWS_AS(parse_absa_response(R"({"label":"positive","confidence":2})"), ContractViolation);
  CHECK_THROWS_AS(parse_absa_response(R"({"label":"positive"})"), ContractViolation);
  CHECK_THROWS_AS(parse_absa_response("oops"), ContractViolation);
}
