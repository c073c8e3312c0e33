#include "shortlens/aspect_linking.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "shortlens/errors.hpp"

namespace shortlens {

namespace {

constexpr std::array<std::string_view, 10> kGroupNames = {
    "Jews", "Zion", "Israel", "Islamism", "Islam", "Palestine", "Israeli_P", "Oppose_P", "Arab", "Gaza",
};

// Columnar: one column per group, one surface per cell. Gaza has no
// published forms and ships empty.
constexpr std::string_view kBuiltinLexicon =
    "Jews\tZion\tIsrael\tIslamism\tIslam\tPalestine\tIsraeli_P\tOppose_P\tArab\tGaza\n"
    "Jews\tZionists\tIsrael\tHamas\tMuslims\tPalestine\tNetanyahu\tHaniyeh\tArab\t\n"
    "Jewish\tZionist\tIsraeli\tHezbollah\tMuslims'\tPalestinians\tGvir\tSinwar\tArabs\t\n"
    "Jew\tZionist’s\tIsraelis\tHamas's\tMuslim\tPalestine's\tSmotrich\tAbbas\tArabic\t\n"
    "Jew’s\tZionists’s\tIsrael's\tHezbollah’s\tMuslims’s\tPalestinian\tGallant\tNasrallah\tArabics\t\n"
    "Judaism\tZionism\tIDF\tJihad\tIslam\tPalestinian’s\tNetanyahu's\tNasrallah’s\tArabic’s\t\n"
    "\t\t\tjihadists\t\t\tGallant's\tAbbas’s\t\t\n"
    "\t\t\tjihadist\t\t\tSmotrich's\tSinwar’s\t\t\n"
    "\t\t\tmartyr\t\t\tBen-Gvir’s\tHaniyeh’s\t\t\n"
    "\t\t\tmartyrs\t\t\t\t\t\t\n"
    "\t\t\tshahid\t\t\t\t\t\t\n";

constexpr std::string_view kBuiltinVersion = "builtin-56";

const icu::Normalizer2& nfc() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status) || n == nullptr) throw std::runtime_error("ICU NFC normalizer unavailable");
  return *n;
}

icu::UnicodeString to_nfc(const icu::UnicodeString& s) {
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString out = nfc().normalize(s, status);
  if (U_FAILURE(status)) return s;
  return out;
}

bool strippable(UChar32 c) { return u_ispunct(c) || u_isUWhiteSpace(c); }

bool strip_outer(icu::UnicodeString& s) {
  bool changed = false;
  while (s.length() > 0) {
    UChar32 c = s.char32At(0);
    if (!strippable(c)) break;
    s.remove(0, U16_LENGTH(c));
    changed = true;
  }
  while (s.length() > 0) {
    int32_t last = s.moveIndex32(s.length(), -1);
    UChar32 c = s.char32At(last);
    if (!strippable(c)) break;
    s.truncate(last);
    changed = true;
  }
  return changed;
}

bool strip_possessive(icu::UnicodeString& s) {
  static const icu::UnicodeString kSuffixes[] = {
      icu::UnicodeString::fromUTF8("'s"),
      icu::UnicodeString::fromUTF8("’s"),
      icu::UnicodeString::fromUTF8("ʼs"),
  };
  for (const auto& suf : kSuffixes) {
    if (s.length() > suf.length() && s.endsWith(suf)) {
      s.truncate(s.length() - suf.length());
      return true;
    }
  }
  return false;
}

}  // namespace

std::string_view to_string(AspectGroup g) { return kGroupNames[static_cast<std::size_t>(g)]; }

std::optional<AspectGroup> parse_aspect_group(std::string_view name) {
  for (std::size_t i = 0; i < kGroupNames.size(); ++i)
    if (kGroupNames[i] == name) return static_cast<AspectGroup>(i);
  return std::nullopt;
}

std::string normalize_form(std::string_view raw) {
  icu::UnicodeString s = icu::UnicodeString::fromUTF8(icu::StringPiece(raw.data(), static_cast<int32_t>(raw.size())));
  s = to_nfc(s);
  s.foldCase(U_FOLD_CASE_DEFAULT);
  s = to_nfc(s);
  while (true) {
    bool a = strip_outer(s);
    bool b = strip_possessive(s);
    if (!a && !b) break;
  }
  std::string out;
  s.toUTF8String(out);
  return out;
}

// ---------------------------------------------------------------------------

Lexicon Lexicon::builtin() { return from_text(kBuiltinLexicon, std::string(kBuiltinVersion)); }

Lexicon Lexicon::from_text(std::string_view text, std::string version) {
  Lexicon lex;
  lex.version_ = std::move(version);
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
  std::size_t lineno = 0;
  for (auto& line : split(text, '\n')) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.starts_with("#")) continue;
    if (trim(line).empty()) continue;
    auto cells = split(line, '\t');
    for (auto& c : cells) c = trim(c);
    rows.emplace_back(lineno, std::move(cells));
  }
  if (rows.empty()) return lex;

  const auto& header = rows.front().second;
  bool key_value = header.size() == 2 && to_lower_ascii(header[0]) == "form" && to_lower_ascii(header[1]) == "group";
  if (key_value) {
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& [ln, cells] = rows[r];
      if (cells.size() != 2 || cells[0].empty())
        throw ParseError("expected 'form<TAB>group'", ln);
      auto g = parse_aspect_group(cells[1]);
      if (!g) throw ValidationError("line " + std::to_string(ln) + ": unknown aspect group '" + cells[1] + "'");
      lex.add(cells[0], *g);
    }
    return lex;
  }

  std::vector<AspectGroup> columns;
  std::set<AspectGroup> seen;
  for (const auto& name : header) {
    auto g = parse_aspect_group(name);
    if (!g) throw ValidationError("lexicon header: unknown aspect group '" + name + "'");
    if (!seen.insert(*g).second) throw ValidationError("lexicon header: group '" + name + "' repeated");
    columns.push_back(*g);
  }
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& [ln, cells] = rows[r];
    if (cells.size() > columns.size()) throw ParseError("more cells than header columns", ln);
    for (std::size_t c = 0; c < cells.size(); ++c)
      if (!cells[c].empty()) lex.add(cells[c], columns[c]);
  }
  return lex;
}

Lexicon Lexicon::from_file(const fs::path& path) {
  std::string text = read_file(path);
  return from_text(text, path.filename().string() + "@" + sha256_hex(text).substr(0, 12));
}

void Lexicon::add(std::string_view surface, AspectGroup group) {
  std::string s(surface);
  std::string key = normalize_form(s);
  if (key.empty()) throw ValidationError("lexicon form '" + s + "' is empty after normalization");
  if (auto it = by_surface_.find(s); it != by_surface_.end()) {
    if (it->second == group) return;  // same mapping listed twice
    throw ValidationError("lexicon form '" + s + "' maps to both " + std::string(to_string(it->second)) + " and " +
                          std::string(to_string(group)));
  }
  if (auto it = by_key_.find(key); it != by_key_.end() && it->second != group)
    throw ValidationError("lexicon form '" + s + "' (key '" + key + "') maps to both " +
                          std::string(to_string(it->second)) + " and " + std::string(to_string(group)));
  by_surface_.emplace(s, group);
  by_key_.emplace(key, group);
  entries_.push_back({s, key, group});
}

Lexicon Lexicon::merged_with(const Lexicon& extra) const {
  Lexicon out = *this;
  for (const auto& e : extra.entries_) out.add(e.surface, e.group);
  out.version_ = version_ + "+" + extra.version_;
  return out;
}

std::optional<AspectGroup> Lexicon::lookup(std::string_view token) const {
  return lookup_normalized(normalize_form(token));
}

std::optional<AspectGroup> Lexicon::lookup_normalized(std::string_view key) const {
  auto it = by_key_.find(std::string(key));
  if (it == by_key_.end()) return std::nullopt;
  return it->second;
}

std::size_t Lexicon::count(AspectGroup g) const {
  return static_cast<std::size_t>(std::count_if(entries_.begin(), entries_.end(), [g](const auto& e) { return e.group == g; }));
}

std::size_t Lexicon::populated_groups() const {
  std::set<AspectGroup> groups;
  for (const auto& e : entries_) groups.insert(e.group);
  return groups.size();
}

std::vector<AspectMatch> match_sentence(std::span<const std::string> tokens, const Lexicon& lexicon) {
  std::vector<AspectMatch> out;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (auto g = lexicon.lookup(tokens[i])) out.push_back({i, tokens[i], *g});
  return out;
}

std::vector<std::string> tokenize_words(std::string_view sentence) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < sentence.size()) {
    while (i < sentence.size() && std::isspace(static_cast<unsigned char>(sentence[i]))) ++i;
    std::size_t j = i;
    while (j < sentence.size() && !std::isspace(static_cast<unsigned char>(sentence[j]))) ++j;
    if (j > i) out.emplace_back(sentence.substr(i, j - i));
    i = j;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sentence segmentation

namespace {

bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

// UTF-8 closing quotes ” and ’ end with these bytes after E2 80.
std::size_t closer_len(std::string_view s, std::size_t pos) {
  if (pos < s.size() && is_closer(s[pos])) return 1;
  if (pos + 3 <= s.size() && static_cast<unsigned char>(s[pos]) == 0xE2 &&
      static_cast<unsigned char>(s[pos + 1]) == 0x80 &&
      (static_cast<unsigned char>(s[pos + 2]) == 0x9D || static_cast<unsigned char>(s[pos + 2]) == 0x99))
    return 3;
  return 0;
}

const std::set<std::string>& abbreviations() {
  static const std::set<std::string> kAbbrev = {"mr", "mrs", "ms", "dr", "st", "prof", "gen", "sen", "rep",
                                                "gov", "lt", "col", "sgt", "capt", "jr", "sr", "vs", "no"};
  return kAbbrev;
}

// Whether the '.' at `dot` closes a sentence rather than an abbreviation.
bool period_ends_sentence(std::string_view text, std::size_t dot) {
  std::size_t start = dot;
  while (start > 0 && !std::isspace(static_cast<unsigned char>(text[start - 1]))) --start;
  std::string word(text.substr(start, dot - start));
  while (!word.empty() && (word.front() == '"' || word.front() == '(' || word.front() == '\'')) word.erase(0, 1);
  if (word.empty()) return true;
  // Initialisms: "U.S." or a lone capital like "J."
  if (word.find('.') != std::string::npos) return false;
  if (word.size() == 1 && std::isupper(static_cast<unsigned char>(word[0]))) return false;
  return !abbreviations().contains(to_lower_ascii(word));
}

// End offset (exclusive) of the sentence terminator run starting at i, or 0 if none closes here.
std::size_t sentence_end_at(std::string_view text, std::size_t i) {
  if (!is_terminal(text[i])) return 0;
  std::size_t j = i;
  while (j < text.size() && is_terminal(text[j])) ++j;
  while (std::size_t n = closer_len(text, j)) j += n;
  if (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) return 0;
  if (j == i + 1 && text[i] == '.' && !period_ends_sentence(text, i)) return 0;
  return j;
}

bool segment_closes_sentence(std::string_view text) {
  std::string t = trim(text);
  if (t.empty()) return false;
  std::size_t end = t.size();
  // Step back over closing quotes/brackets.
  while (end > 0) {
    if (is_closer(t[end - 1])) {
      --end;
    } else if (end >= 3 && static_cast<unsigned char>(t[end - 3]) == 0xE2 &&
               static_cast<unsigned char>(t[end - 2]) == 0x80 &&
               (static_cast<unsigned char>(t[end - 1]) == 0x9D || static_cast<unsigned char>(t[end - 1]) == 0x99)) {
      end -= 3;
    } else {
      break;
    }
  }
  if (end == 0 || !is_terminal(t[end - 1])) return false;
  std::size_t first = end - 1;
  while (first > 0 && is_terminal(t[first - 1])) --first;
  if (first == end - 1 && t[first] == '.') return period_ends_sentence(t, first);
  return true;
}

}  // namespace

std::vector<SentenceSpan> segment_sentences(const Transcript& transcript) {
  std::vector<std::vector<const TranscriptSegment*>> groups;
  std::vector<const TranscriptSegment*> current;
  for (const auto& seg : transcript.segments) {
    current.push_back(&seg);
    if (segment_closes_sentence(seg.text)) {
      groups.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) groups.push_back(std::move(current));

  std::vector<SentenceSpan> out;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    std::string text;
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (const auto* seg : groups[g]) {
      if (!text.empty()) text += ' ';
      std::string t = trim(seg->text);
      ranges.emplace_back(text.size(), text.size() + t.size());
      text += t;
    }
    auto emit = [&](std::size_t b, std::size_t e, int sent_ix) {
      while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
      while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
      if (b == e) return false;
      SentenceSpan s;
      s.seg_group_id = static_cast<int>(g);
      s.sent_ix = sent_ix;
      s.text = text.substr(b, e - b);
      for (std::size_t k = 0; k < ranges.size(); ++k) {
        if (ranges[k].first < e && b < ranges[k].second) {
          const auto* seg = groups[g][k];
          if (s.seg_ids.empty()) s.start_s = seg->start_s;
          s.seg_ids.push_back(seg->seg_id);
          s.end_s = seg->end_s;
        }
      }
      out.push_back(std::move(s));
      return true;
    };
    int sent_ix = 0;
    std::size_t begin = 0;
    std::size_t i = 0;
    while (i < text.size()) {
      if (std::size_t end = sentence_end_at(text, i)) {
        if (emit(begin, end, sent_ix)) ++sent_ix;
        begin = end;
        i = end;
      } else {
        ++i;
      }
    }
    if (begin < text.size()) emit(begin, text.size(), sent_ix);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CoNLL-U

std::vector<std::string> ParsedSentence::forms() const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.form);
  return out;
}

std::optional<std::string> tree_violation(const ParsedSentence& sentence) {
  const auto& toks = sentence.tokens;
  const int n = static_cast<int>(toks.size());
  if (n == 0) return "sentence has no tokens";
  int roots = 0;
  for (int i = 0; i < n; ++i) {
    if (toks[static_cast<std::size_t>(i)].index != i + 1)
      return "token ids are not 1.." + std::to_string(n) + " in order";
    int h = toks[static_cast<std::size_t>(i)].head;
    if (h < 0 || h > n) return "token " + std::to_string(i + 1) + " has head " + std::to_string(h) + " out of range";
    if (h == i + 1) return "token " + std::to_string(i + 1) + " heads itself";
    if (h == 0) ++roots;
  }
  if (roots == 0) return "no root token";
  if (roots > 1) return std::to_string(roots) + " root tokens";
  for (int i = 0; i < n; ++i) {
    int cur = i + 1;
    for (int steps = 0; cur != 0; ++steps) {
      if (steps > n) return "head cycle through token " + std::to_string(i + 1);
      cur = toks[static_cast<std::size_t>(cur - 1)].head;
    }
  }
  return std::nullopt;
}

namespace {

std::optional<int> parse_int(std::string_view s) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

ConlluDocument parse_conllu(std::string_view text) {
  ConlluDocument doc;
  ParsedSentence cur;
  std::optional<std::string> bad;
  std::size_t first_line = 0;
  bool open = false;
  std::size_t ordinal = 0;

  auto close = [&] {
    if (!open) return;
    if (!bad) bad = tree_violation(cur);
    if (bad) {
      doc.rejected.push_back({ordinal, first_line, *bad});
    } else {
      doc.sentences.push_back(std::move(cur));
      doc.ordinals.push_back(ordinal);
    }
    ++ordinal;
    cur = {};
    bad.reset();
    open = false;
  };

  std::size_t lineno = 0;
  for (auto& line : split(text, '\n')) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) {
      close();
      continue;
    }
    if (!open) {
      open = true;
      first_line = lineno;
    }
    if (line.starts_with("#")) {
      std::string c = line.substr(1);
      if (c.starts_with(" ")) c.erase(0, 1);
      cur.comments.push_back(std::move(c));
      continue;
    }
    auto cols = split(line, '\t');
    if (cols.size() != 10)
      throw ParseError("expected 10 tab-separated columns, found " + std::to_string(cols.size()), lineno);
    if (cols[0].find('-') != std::string::npos || cols[0].find('.') != std::string::npos) continue;
    if (bad) continue;
    auto id = parse_int(cols[0]);
    auto head = parse_int(cols[6]);
    if (!id) {
      bad = "line " + std::to_string(lineno) + ": invalid token id '" + cols[0] + "'";
      continue;
    }
    if (!head) {
      bad = "line " + std::to_string(lineno) + ": invalid head '" + cols[6] + "'";
      continue;
    }
    if (cols[7].empty() || cols[7] == "_") {
      bad = "line " + std::to_string(lineno) + ": missing deprel";
      continue;
    }
    cur.tokens.push_back({*id, cols[1], cols[2], cols[3], cols[4], cols[5], *head, cols[7], cols[8], cols[9]});
  }
  close();
  return doc;
}

std::string serialize_conllu(std::span<const ParsedSentence> sentences) {
  std::string out;
  for (const auto& s : sentences) {
    for (const auto& c : s.comments) out += "# " + c + "\n";
    for (const auto& t : s.tokens) {
      out += std::to_string(t.index) + '\t' + t.form + '\t' + t.lemma + '\t' + t.upos + '\t' + t.xpos + '\t' +
             t.feats + '\t' + std::to_string(t.head) + '\t' + t.deprel + '\t' + t.deps + '\t' + t.misc + '\n';
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rows

json AspectRow::to_json() const {
  return {
      {"aspect", triple.aspect_form},
      {"head", triple.head_form},
      {"deprel", triple.deprel},
      {"group", to_string(group)},
      {"video_id", video_id},
      {"seg_group_id", seg_group_id},
      {"seg_ids", seg_ids},
      {"start", start_s},
      {"end", end_s},
      {"sent_ix", sent_ix},
      {"surface", surface},
      {"sentence", sentence},
      {"token_index", token_index},
  };
}

AspectRow AspectRow::from_json(const json& j) {
  AspectRow r;
  r.triple = {j.at("aspect").get<std::string>(), j.at("head").get<std::string>(), j.at("deprel").get<std::string>()};
  auto g = parse_aspect_group(j.at("group").get<std::string>());
  if (!g) throw ValidationError("unknown aspect group '" + j.at("group").get<std::string>() + "'");
  r.group = *g;
  r.video_id = j.at("video_id").get<std::string>();
  r.seg_group_id = j.at("seg_group_id").get<int>();
  r.seg_ids = j.at("seg_ids").get<std::vector<int>>();
  r.start_s = j.at("start").get<double>();
  r.end_s = j.at("end").get<double>();
  r.sent_ix = j.at("sent_ix").get<int>();
  r.surface = j.value("surface", std::string());
  r.sentence = j.value("sentence", std::string());
  r.token_index = j.value("token_index", 0);
  return r;
}

std::vector<AspectRow> extract_rows(const ParsedSentence& parsed, std::span<const AspectMatch> matches,
                                    const SentenceMeta& meta, std::string_view sentence_text) {
  if (meta.seg_ids.empty()) throw IntegrityError("sentence metadata has no seg_ids");
  for (std::size_t i = 1; i < meta.seg_ids.size(); ++i)
    if (meta.seg_ids[i] != meta.seg_ids[i - 1] + 1) throw IntegrityError("sentence seg_ids are not contiguous");
  if (meta.sent_ix < 0) throw IntegrityError("negative sent_ix");

  std::vector<AspectRow> rows;
  rows.reserve(matches.size());
  for (const auto& m : matches) {
    if (m.token_index >= parsed.tokens.size())
      throw IntegrityError("aspect match index " + std::to_string(m.token_index) + " outside sentence of " +
                           std::to_string(parsed.tokens.size()) + " tokens");
    const auto& tok = parsed.tokens[m.token_index];
    AspectRow r;
    r.triple.aspect_form = normalize_form(m.surface);
    if (tok.head == 0) {
      r.triple.head_form = std::string(kRootHead);
    } else {
      auto h = static_cast<std::size_t>(tok.head - 1);
      if (h >= parsed.tokens.size()) throw IntegrityError("head index outside sentence");
      r.triple.head_form = normalize_form(parsed.tokens[h].form);
    }
    r.triple.deprel = tok.deprel;
    r.group = m.group;
    r.video_id = meta.video_id;
    r.seg_group_id = meta.seg_group_id;
    r.seg_ids = meta.seg_ids;
    r.start_s = meta.start_s;
    r.end_s = meta.end_s;
    r.sent_ix = meta.sent_ix;
    r.surface = m.surface;
    r.sentence = std::string(sentence_text);
    r.token_index = static_cast<int>(m.token_index);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string ParserClient::parse(std::span<const std::string> sentences) const {
  json req = {{"sentences", json(std::vector<std::string>(sentences.begin(), sentences.end()))}};
  HttpReply reply = transport_.post(routes::kParse, req.dump());
  if (!reply.ok()) throw ContractViolation("/parse: HTTP " + std::to_string(reply.status), reply.body);
  return reply.body;
}

LinkResult link_transcript(const Transcript& transcript, const Lexicon& lexicon, const ParserClient& parser) {
  LinkResult result;
  auto sentences = segment_sentences(transcript);
  result.sentences_total = sentences.size();

  std::vector<const SentenceSpan*> matched;
  for (const auto& s : sentences) {
    auto words = tokenize_words(s.text);
    if (!match_sentence(words, lexicon).empty()) matched.push_back(&s);
  }
  result.sentences_matched = matched.size();
  if (matched.empty()) return result;

  std::vector<std::string> texts;
  for (const auto* s : matched) texts.push_back(s->text);
  std::string raw = parser.parse(texts);
  ConlluDocument doc;
  try {
    doc = parse_conllu(raw);
  } catch (const ParseError& e) {
    throw ContractViolation(std::string("/parse: ") + e.what(), raw);
  }
  if (doc.total() != matched.size())
    throw ContractViolation("/parse returned " + std::to_string(doc.total()) + " sentences for " +
                                std::to_string(matched.size()) + " requested",
                            raw);

  for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
    const SentenceSpan& span = *matched[doc.ordinals[i]];
    const ParsedSentence& parsed = doc.sentences[i];
    auto forms = parsed.forms();
    auto matches = match_sentence(forms, lexicon);
    SentenceMeta meta{transcript.video_id, span.seg_group_id, span.seg_ids, span.start_s, span.end_s, span.sent_ix};
    auto rows = extract_rows(parsed, matches, meta, span.text);
    result.rows.insert(result.rows.end(), rows.begin(), rows.end());
  }
  for (auto rej : doc.rejected) {
    const SentenceSpan& span = *matched[rej.ordinal];
    rej.reason = "group " + std::to_string(span.seg_group_id) + " sentence " + std::to_string(span.sent_ix) + ": " +
                 rej.reason;
    result.rejected.push_back(std::move(rej));
  }
  return result;
}

}  // namespace shortlens
