#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace drl {

// A document as read from disk, before any normalization.
struct RawDocument {
  std::string id;
  std::string text;
  std::optional<std::string> set_key;
};

enum class InputFormat { kJsonl, kCsv, kLines };

InputFormat parse_input_format(std::string_view name);
std::string_view to_string(InputFormat format);

struct IngestOptions {
  InputFormat format = InputFormat::kJsonl;
  std::string id_field = "id";
  std::string text_field = "text";
  // Field (JSONL) or column (CSV) holding the partition label. Empty means
  // documents are left unkeyed.
  std::string set_key_field = "set_key";
  // Malformed records are dropped with a warning instead of aborting.
  bool skip_errors = false;
};

// Reads one RawDocument per record. Ids come from `id_field` when present and
// default to the zero-based record ordinal otherwise.
std::vector<RawDocument> ingest(const std::filesystem::path& path, const IngestOptions& options);

// Term <-> index bijection with per-term document frequencies. Indices are
// dense in [0, size()).
class Vocabulary {
 public:
  struct Entry {
    std::string term;
    std::uint32_t index;
    std::uint32_t doc_freq;
  };

  Vocabulary() = default;

  // Appends `term` if new and returns its index.
  std::uint32_t add(std::string_view term, std::uint32_t doc_freq);

  std::optional<std::uint32_t> index_of(std::string_view term) const;
  const std::string& term(std::uint32_t index) const { return terms_.at(index); }
  std::uint32_t doc_freq(std::uint32_t index) const { return doc_freq_.at(index); }
  std::size_t size() const noexcept { return terms_.size(); }
  bool empty() const noexcept { return terms_.empty(); }
  const std::vector<std::string>& terms() const noexcept { return terms_; }

  std::vector<Entry> entries() const;

  // FNV-1a over the ordered term list; identifies the index mapping.
  std::uint64_t hash() const noexcept;
  std::string hash_hex() const;

  // JSON array of {term, index, doc_freq}.
  std::string to_json() const;
  static Vocabulary from_json(std::string_view json);

 private:
  std::vector<std::string> terms_;
  std::vector<std::uint32_t> doc_freq_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

// Sparse bag of words over a Vocabulary. All counts are >= 1 and
// total_tokens is their sum.
struct BowDocument {
  std::string id;
  std::map<std::uint32_t, std::uint32_t> counts;
  std::uint32_t total_tokens = 0;

  bool empty() const noexcept { return total_tokens == 0; }
};

struct DocumentSet {
  std::string key;
  std::vector<BowDocument> docs;
};

inline constexpr std::string_view kUnkeyedSet = "_unkeyed";

struct PreprocessConfig {
  std::unordered_set<std::string> stopwords;
  int min_doc_freq = 5;
  int min_doc_tokens = 2;
  bool lowercase = true;
  bool strip_urls = true;
  // Keep only Latin letters and digits. When off, non-ASCII bytes are kept
  // inside tokens so UTF-8 words survive intact.
  bool charset_filter = true;

  void validate() const;
};

// PreprocessConfig with the bundled English stopword list.
PreprocessConfig default_preprocess_config();

std::unordered_set<std::string> default_stopwords();
std::unordered_set<std::string> load_stopwords(const std::filesystem::path& path);

// Text normalization shared by documents and queries: lowercase, strip URLs,
// charset filter, split on non-alphanumeric boundaries, drop stopwords.
std::vector<std::string> tokenize(std::string_view text, const PreprocessConfig& config);

struct PreprocessResult {
  std::vector<BowDocument> docs;
  Vocabulary vocab;
  std::size_t dropped_short_docs = 0;
  std::size_t pruned_terms = 0;
};

// Runs the full pipeline: tokenize every document, count document
// frequencies, prune terms below min_doc_freq once, rebuild counts, and drop
// documents left with fewer than min_doc_tokens tokens. Vocabulary indices
// follow first occurrence in input order. Throws kEmptyCorpus when nothing
// survives.
PreprocessResult preprocess(std::span<const RawDocument> docs, const PreprocessConfig& config);

// Counts `tokens` against `vocab`. Out-of-vocabulary tokens are skipped and,
// if `oov` is given, appended to it once each in order of appearance.
BowDocument bow_from_tokens(std::string id, std::span<const std::string> tokens,
                            const Vocabulary& vocab, std::vector<std::string>* oov = nullptr);

struct QueryBow {
  std::vector<std::string> tokens;
  std::vector<std::string> oov_terms;
  BowDocument bow;
};

// Queries go through tokenize() but are never dropped for being short.
// Dropped out-of-vocabulary terms are logged as a single warning.
QueryBow preprocess_query(std::string_view text, const PreprocessConfig& config,
                          const Vocabulary& vocab);

// One set per distinct set_key, sorted by key. Documents whose raw record
// carries no key land in "_unkeyed".
std::vector<DocumentSet> partition(std::span<const BowDocument> docs,
                                   std::span<const RawDocument> raws);

// Dense count vector of length `vocab_size`.
std::vector<std::uint32_t> bow_vector(const BowDocument& doc, std::size_t vocab_size);

}  // namespace drl
