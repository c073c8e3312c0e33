#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shortlens/backend.hpp"
#include "shortlens/transcripts.hpp"
#include "shortlens/util.hpp"

namespace shortlens {

enum class AspectGroup { kJews, kZion, kIsrael, kIslamism, kIslam, kPalestine, kIsraeliP, kOpposeP, kArab, kGaza };

inline constexpr std::array<AspectGroup, 10> kAllAspectGroups = {
    AspectGroup::kJews,      AspectGroup::kZion,     AspectGroup::kIsrael,  AspectGroup::kIslamism,
    AspectGroup::kIslam,     AspectGroup::kPalestine, AspectGroup::kIsraeliP, AspectGroup::kOpposeP,
    AspectGroup::kArab,      AspectGroup::kGaza,
};

std::string_view to_string(AspectGroup g);
std::optional<AspectGroup> parse_aspect_group(std::string_view name);

/// Canonical matching key for a token: NFC, full Unicode case folding,
/// outer punctuation and whitespace stripped, possessive 's / ’s removed.
/// Plurals are not folded; the lexicon lists them. Idempotent and total.
std::string normalize_form(std::string_view raw);

struct LexiconEntry {
  std::string surface;
  std::string normalized;
  AspectGroup group;
};

/// Surface form → aspect group table. Immutable once built; lookups go
/// through normalize_form. Several surfaces of one group may share a key
/// ("Netanyahu", "Netanyahu's"); one key never spans two groups.
class Lexicon {
 public:
  /// The shipped 56-form table. The Gaza group is present but empty;
  /// data/lexicon_gaza_extension.tsv fills it when merged in.
  static Lexicon builtin();

  /// Columnar text (header row of group names, one surface per cell,
  /// tab-separated) or key→group lines under a "form<TAB>group" header.
  /// Lines starting with '#' are comments.
  static Lexicon from_text(std::string_view text, std::string version);
  static Lexicon from_file(const fs::path& path);

  /// Union with `extra`; a surface or key landing in two groups is a ValidationError.
  Lexicon merged_with(const Lexicon& extra) const;

  std::optional<AspectGroup> lookup(std::string_view token) const;
  std::optional<AspectGroup> lookup_normalized(std::string_view key) const;

  std::size_t size() const { return entries_.size(); }
  std::size_t count(AspectGroup g) const;
  std::size_t populated_groups() const;
  const std::vector<LexiconEntry>& entries() const { return entries_; }
  const std::string& version() const { return version_; }

 private:
  void add(std::string_view surface, AspectGroup group);

  std::vector<LexiconEntry> entries_;
  std::map<std::string, AspectGroup> by_surface_;
  std::map<std::string, AspectGroup> by_key_;
  std::string version_;
};

struct AspectMatch {
  std::size_t token_index = 0;  // 0-based position in the token list
  std::string surface;
  AspectGroup group;

  bool operator==(const AspectMatch&) const = default;
};

/// One match per token whose normalized form is a lexicon key.
std::vector<AspectMatch> match_sentence(std::span<const std::string> tokens, const Lexicon& lexicon);

/// Whitespace tokenization used to pre-screen sentences before parsing.
std::vector<std::string> tokenize_words(std::string_view sentence);

// ---------------------------------------------------------------------------
// Sentence segmentation of ASR output

struct SentenceSpan {
  int seg_group_id = 0;
  int sent_ix = 0;
  std::string text;
  std::vector<int> seg_ids;
  double start_s = 0.0;
  double end_s = 0.0;
};

/// Contiguous segments are merged into a group until a segment ends with
/// terminal punctuation (. ! ?); groups are numbered per video and split
/// into sentences numbered within the group.
std::vector<SentenceSpan> segment_sentences(const Transcript& transcript);

// ---------------------------------------------------------------------------
// CoNLL-U

struct ConlluToken {
  int index = 0;  // 1-based
  std::string form;
  std::string lemma;
  std::string upos;
  std::string xpos = "_";
  std::string feats = "_";
  int head = 0;  // 0 = root
  std::string deprel;
  std::string deps = "_";
  std::string misc = "_";

  bool operator==(const ConlluToken&) const = default;
};

struct ParsedSentence {
  std::vector<std::string> comments;  // without the leading "# "
  std::vector<ConlluToken> tokens;

  std::vector<std::string> forms() const;
  bool operator==(const ParsedSentence&) const = default;
};

struct RejectedSentence {
  std::size_t ordinal = 0;  // 0-based position among all sentences in the input
  std::size_t first_line = 0;
  std::string reason;
};

struct ConlluDocument {
  std::vector<ParsedSentence> sentences;
  std::vector<std::size_t> ordinals;  // parallel to sentences
  std::vector<RejectedSentence> rejected;

  std::size_t total() const { return sentences.size() + rejected.size(); }
};

/// Reason a sentence is not a single rooted tree, or nullopt when it is.
std::optional<std::string> tree_violation(const ParsedSentence& sentence);

/// Wrong column counts raise ParseError; non-tree sentences are collected
/// in `rejected` and parsing continues. Multiword ranges and empty nodes
/// are skipped.
ConlluDocument parse_conllu(std::string_view text);
std::string serialize_conllu(std::span<const ParsedSentence> sentences);

// ---------------------------------------------------------------------------
// Dependency triples

struct DependencyTriple {
  std::string aspect_form;
  std::string head_form;
  std::string deprel;

  bool operator==(const DependencyTriple&) const = default;
};

inline constexpr std::string_view kRootHead = "<root>";

struct SentenceMeta {
  std::string video_id;
  int seg_group_id = 0;
  std::vector<int> seg_ids;
  double start_s = 0.0;
  double end_s = 0.0;
  int sent_ix = 0;
};

struct AspectRow {
  DependencyTriple triple;
  AspectGroup group = AspectGroup::kIsrael;
  std::string video_id;
  int seg_group_id = 0;
  std::vector<int> seg_ids;
  double start_s = 0.0;
  double end_s = 0.0;
  int sent_ix = 0;
  // Carried for the sentiment stage.
  std::string surface;
  std::string sentence;
  int token_index = 0;

  json to_json() const;
  static AspectRow from_json(const json& j);
  bool operator==(const AspectRow&) const = default;
};

/// One row per match: (normalized match form, normalized head form or
/// "<root>", deprel of the match token).
std::vector<AspectRow> extract_rows(const ParsedSentence& parsed, std::span<const AspectMatch> matches,
                                    const SentenceMeta& meta, std::string_view sentence_text = {});

/// Client for the /parse route.
class ParserClient {
 public:
  explicit ParserClient(Transport& transport) : transport_(transport) {}
  std::string parse(std::span<const std::string> sentences) const;

 private:
  Transport& transport_;
};

struct LinkResult {
  std::vector<AspectRow> rows;
  std::size_t sentences_total = 0;
  std::size_t sentences_matched = 0;
  std::vector<RejectedSentence> rejected;
};

/// Segment, pre-screen against the lexicon, parse the matching sentences,
/// and extract one row per aspect occurrence.
LinkResult link_transcript(const Transcript& transcript, const Lexicon& lexicon, const ParserClient& parser);

}  // namespace shortlens
