#include "drl/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "csv.hpp"
#include "drl/error.hpp"
#include "drl/log.hpp"
#include "drl/rng.hpp"

namespace drl {
namespace {

using json = nlohmann::json;

std::string at_line(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

// Converts a scalar JSON value to the string form used for ids and keys.
std::optional<std::string> scalar_to_string(const json& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_number_integer()) return std::to_string(value.get<long long>());
  if (value.is_number_unsigned()) return std::to_string(value.get<unsigned long long>());
  return std::nullopt;
}

// Accumulates documents while enforcing id uniqueness and the skip policy.
class RecordSink {
 public:
  RecordSink(const std::filesystem::path& path, bool skip_errors)
      : path_(path), skip_errors_(skip_errors) {}

  void malformed(std::size_t line, const std::string& why) {
    malformed_raw(at_line(path_, line) + why);
  }

  void malformed_raw(const std::string& message) {
    if (!skip_errors_) throw Error(ErrorKind::kParse, message);
    log_warning("skipping malformed record: " + message);
  }

  void accept(std::size_t line, RawDocument doc) {
    if (!ids_.insert(doc.id).second) {
      malformed(line, "duplicate document id '" + doc.id + "'");
      return;
    }
    docs_.push_back(std::move(doc));
  }

  std::vector<RawDocument> take() { return std::move(docs_); }

 private:
  const std::filesystem::path& path_;
  bool skip_errors_;
  std::set<std::string> ids_;
  std::vector<RawDocument> docs_;
};

std::vector<RawDocument> ingest_jsonl(std::istream& in, const std::filesystem::path& path,
                                      const IngestOptions& options) {
  RecordSink sink(path, options.skip_errors);
  std::string line;
  std::size_t line_no = 0;
  std::size_t ordinal = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::size_t record = ordinal++;

    json value = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (value.is_discarded() || !value.is_object()) {
      sink.malformed(line_no, "not a JSON object");
      continue;
    }
    auto text = value.find(options.text_field);
    if (text == value.end() || !text->is_string()) {
      sink.malformed(line_no, "missing string field '" + options.text_field + "'");
      continue;
    }

    RawDocument doc;
    doc.text = text->get<std::string>();
    auto id = value.find(options.id_field);
    if (id == value.end() || id->is_null()) {
      doc.id = std::to_string(record);
    } else if (auto s = scalar_to_string(*id)) {
      doc.id = *s;
    } else {
      sink.malformed(line_no, "field '" + options.id_field + "' must be a string or integer");
      continue;
    }
    if (!options.set_key_field.empty()) {
      auto key = value.find(options.set_key_field);
      if (key != value.end() && !key->is_null()) {
        auto s = scalar_to_string(*key);
        if (!s) {
          sink.malformed(line_no,
                         "field '" + options.set_key_field + "' must be a string or integer");
          continue;
        }
        doc.set_key = *s;
      }
    }
    sink.accept(line_no, std::move(doc));
  }
  return sink.take();
}

std::vector<RawDocument> ingest_csv(std::istream& in, const std::filesystem::path& path,
                                    const IngestOptions& options) {
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header) throw Error(ErrorKind::kParse, path.string() + ": empty CSV file (no header)");

  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = std::find(header->fields.begin(), header->fields.end(), name);
    if (it == header->fields.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header->fields.begin());
  };
  const auto text_col = column(options.text_field);
  if (!text_col) {
    throw Error(ErrorKind::kConfig,
                path.string() + ": CSV header has no column '" + options.text_field + "'");
  }
  const auto id_col = column(options.id_field);
  std::optional<std::size_t> key_col;
  if (!options.set_key_field.empty()) {
    key_col = column(options.set_key_field);
    if (!key_col) {
      log_warning(path.string() + ": CSV header has no column '" + options.set_key_field +
                  "'; documents are unkeyed");
    }
  }

  RecordSink sink(path, options.skip_errors);
  std::size_t ordinal = 0;
  for (;;) {
    std::optional<csv::Record> record;
    try {
      record = reader.next();
    } catch (const Error& e) {
      sink.malformed_raw(path.string() + ":" + e.what());
      reader.skip_line();
      ++ordinal;
      continue;
    }
    if (!record) break;
    if (record->fields.size() == 1 && record->fields[0].empty()) continue;  // blank line
    const std::size_t index = ordinal++;
    if (record->fields.size() != header->fields.size()) {
      sink.malformed(record->line, "expected " + std::to_string(header->fields.size()) +
                                       " fields, found " + std::to_string(record->fields.size()));
      continue;
    }
    RawDocument doc;
    doc.text = record->fields[*text_col];
    doc.id = id_col && !record->fields[*id_col].empty() ? record->fields[*id_col]
                                                        : std::to_string(index);
    if (key_col && !record->fields[*key_col].empty()) doc.set_key = record->fields[*key_col];
    sink.accept(record->line, std::move(doc));
  }
  return sink.take();
}

std::vector<RawDocument> ingest_lines(std::istream& in, const std::filesystem::path& path) {
  RecordSink sink(path, false);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    RawDocument doc;
    doc.id = std::to_string(line_no);
    doc.text = std::move(line);
    ++line_no;
    sink.accept(line_no, std::move(doc));
  }
  return sink.take();
}

bool is_latin_or_digit(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

bool starts_with_ci(std::string_view s, std::size_t pos, std::string_view prefix) {
  if (s.size() - pos < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    const auto c = static_cast<unsigned char>(s[pos + i]);
    const char lower = (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
    if (lower != prefix[i]) return false;
  }
  return true;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

// Removes every whitespace-delimited run that starts with a URL scheme or
// "www.", replacing it with a single space.
std::string strip_urls(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (starts_with_ci(text, i, "http://") || starts_with_ci(text, i, "https://") ||
        starts_with_ci(text, i, "www.")) {
      while (i < text.size() && !is_space(text[i])) ++i;
      out.push_back(' ');
      continue;
    }
    out.push_back(text[i++]);
  }
  return out;
}

}  // namespace

InputFormat parse_input_format(std::string_view name) {
  if (name == "jsonl") return InputFormat::kJsonl;
  if (name == "csv") return InputFormat::kCsv;
  if (name == "lines" || name == "one-doc-per-line") return InputFormat::kLines;
  throw Error(ErrorKind::kConfig, "unknown input format '" + std::string(name) +
                                      "' (expected jsonl, csv or lines)");
}

std::string_view to_string(InputFormat format) {
  switch (format) {
    case InputFormat::kJsonl: return "jsonl";
    case InputFormat::kCsv: return "csv";
    case InputFormat::kLines: return "lines";
  }
  return "jsonl";
}

std::vector<RawDocument> ingest(const std::filesystem::path& path, const IngestOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read input file '" + path.string() + "'");
  switch (options.format) {
    case InputFormat::kJsonl: return ingest_jsonl(in, path, options);
    case InputFormat::kCsv: return ingest_csv(in, path, options);
    case InputFormat::kLines: return ingest_lines(in, path);
  }
  return {};
}

// Vocabulary ----------------------------------------------------------------

std::uint32_t Vocabulary::add(std::string_view term, std::uint32_t doc_freq) {
  auto [it, inserted] = index_.try_emplace(std::string(term), static_cast<std::uint32_t>(terms_.size()));
  if (inserted) {
    terms_.emplace_back(term);
    doc_freq_.push_back(doc_freq);
  }
  return it->second;
}

std::optional<std::uint32_t> Vocabulary::index_of(std::string_view term) const {
  auto it = index_.find(std::string(term));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<Vocabulary::Entry> Vocabulary::entries() const {
  std::vector<Entry> out;
  out.reserve(terms_.size());
  for (std::uint32_t i = 0; i < terms_.size(); ++i) out.push_back({terms_[i], i, doc_freq_[i]});
  return out;
}

std::uint64_t Vocabulary::hash() const noexcept {
  std::string joined;
  for (const auto& t : terms_) {
    joined += t;
    joined.push_back('\n');
  }
  return fnv1a64(joined);
}

std::string Vocabulary::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
  return buf;
}

std::string Vocabulary::to_json() const {
  json out = json::array();
  for (const auto& e : entries()) {
    out.push_back({{"term", e.term}, {"index", e.index}, {"doc_freq", e.doc_freq}});
  }
  return out.dump(1);
}

Vocabulary Vocabulary::from_json(std::string_view text) {
  json in = json::parse(text, nullptr, false);
  if (in.is_discarded() || !in.is_array()) {
    throw Error(ErrorKind::kParse, "vocabulary file is not a JSON array");
  }
  std::vector<Entry> entries;
  for (const auto& item : in) {
    if (!item.is_object() || !item.contains("term") || !item.contains("index") ||
        !item["term"].is_string() || !item["index"].is_number_unsigned()) {
      throw Error(ErrorKind::kParse, "vocabulary entry must have string term and index");
    }
    const std::uint32_t df = item.contains("doc_freq") ? item["doc_freq"].get<std::uint32_t>() : 0;
    entries.push_back({item["term"].get<std::string>(), item["index"].get<std::uint32_t>(), df});
  }
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.index < b.index; });
  Vocabulary vocab;
  for (std::uint32_t i = 0; i < entries.size(); ++i) {
    if (entries[i].index != i) {
      throw Error(ErrorKind::kParse, "vocabulary indices must be dense starting at 0");
    }
    if (vocab.index_of(entries[i].term)) {
      throw Error(ErrorKind::kParse, "duplicate vocabulary term '" + entries[i].term + "'");
    }
    vocab.add(entries[i].term, entries[i].doc_freq);
  }
  return vocab;
}

// Preprocessing -------------------------------------------------------------

void PreprocessConfig::validate() const {
  if (min_doc_freq < 1) throw Error(ErrorKind::kConfig, "min_doc_freq must be >= 1");
  if (min_doc_tokens < 1) throw Error(ErrorKind::kConfig, "min_doc_tokens must be >= 1");
}

PreprocessConfig default_preprocess_config() {
  PreprocessConfig config;
  config.stopwords = default_stopwords();
  return config;
}

std::unordered_set<std::string> load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot read stopword file '" + path.string() + "'");
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    const auto begin = line.find_first_not_of(" \t\r");
    if (begin == std::string::npos || line[begin] == '#') continue;
    const auto end = line.find_last_not_of(" \t\r");
    words.insert(line.substr(begin, end - begin + 1));
  }
  return words;
}

std::vector<std::string> tokenize(std::string_view text, const PreprocessConfig& config) {
  std::string work(text);
  if (config.lowercase) {
    for (char& c : work) {
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
  }
  if (config.strip_urls) work = strip_urls(work);

  auto is_token_byte = [&](unsigned char c) {
    return is_latin_or_digit(c) || (!config.charset_filter && c >= 0x80);
  };

  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < work.size()) {
    while (i < work.size() && !is_token_byte(static_cast<unsigned char>(work[i]))) ++i;
    const std::size_t start = i;
    while (i < work.size() && is_token_byte(static_cast<unsigned char>(work[i]))) ++i;
    if (i > start) {
      std::string token = work.substr(start, i - start);
      if (!config.stopwords.contains(token)) tokens.push_back(std::move(token));
    }
  }
  return tokens;
}

PreprocessResult preprocess(std::span<const RawDocument> docs, const PreprocessConfig& config) {
  config.validate();
  if (docs.empty()) throw Error(ErrorKind::kEmptyCorpus, "no documents to preprocess");

  std::vector<std::vector<std::string>> tokenized;
  tokenized.reserve(docs.size());
  for (const auto& doc : docs) tokenized.push_back(tokenize(doc.text, config));

  // Document frequencies, keyed in first-occurrence order.
  std::vector<std::string> order;
  std::unordered_map<std::string, std::uint32_t> df;
  for (const auto& tokens : tokenized) {
    std::unordered_set<std::string_view> seen;
    for (const auto& t : tokens) {
      if (!seen.insert(t).second) continue;
      auto [it, inserted] = df.try_emplace(t, 0);
      if (inserted) order.push_back(t);
      ++it->second;
    }
  }

  PreprocessResult result;
  for (const auto& term : order) {
    const std::uint32_t f = df[term];
    if (f >= static_cast<std::uint32_t>(config.min_doc_freq)) {
      result.vocab.add(term, f);
    } else {
      ++result.pruned_terms;
    }
  }

  for (std::size_t i = 0; i < docs.size(); ++i) {
    BowDocument bow = bow_from_tokens(docs[i].id, tokenized[i], result.vocab);
    if (bow.total_tokens < static_cast<std::uint32_t>(config.min_doc_tokens)) {
      ++result.dropped_short_docs;
      continue;
    }
    result.docs.push_back(std::move(bow));
  }
  if (result.docs.empty()) {
    throw Error(ErrorKind::kEmptyCorpus,
                "empty corpus: every document was filtered out by preprocessing");
  }
  return result;
}

BowDocument bow_from_tokens(std::string id, std::span<const std::string> tokens,
                            const Vocabulary& vocab, std::vector<std::string>* oov) {
  BowDocument bow;
  bow.id = std::move(id);
  for (const auto& t : tokens) {
    if (auto index = vocab.index_of(t)) {
      ++bow.counts[*index];
      ++bow.total_tokens;
    } else if (oov && std::find(oov->begin(), oov->end(), t) == oov->end()) {
      oov->push_back(t);
    }
  }
  return bow;
}

QueryBow preprocess_query(std::string_view text, const PreprocessConfig& config,
                          const Vocabulary& vocab) {
  QueryBow query;
  query.tokens = tokenize(text, config);
  query.bow = bow_from_tokens("query", query.tokens, vocab, &query.oov_terms);
  if (!query.oov_terms.empty()) {
    std::string list;
    for (const auto& t : query.oov_terms) list += (list.empty() ? "" : ", ") + t;
    log_warning("query terms not in vocabulary were dropped: " + list);
  }
  return query;
}

std::vector<DocumentSet> partition(std::span<const BowDocument> docs,
                                   std::span<const RawDocument> raws) {
  std::unordered_map<std::string_view, const RawDocument*> by_id;
  for (const auto& raw : raws) by_id.emplace(raw.id, &raw);

  std::map<std::string, DocumentSet> sets;
  for (const auto& doc : docs) {
    auto it = by_id.find(doc.id);
    std::string key(kUnkeyedSet);
    if (it != by_id.end() && it->second->set_key) key = *it->second->set_key;
    auto& set = sets[key];
    set.key = key;
    set.docs.push_back(doc);
  }
  std::vector<DocumentSet> out;
  out.reserve(sets.size());
  for (auto& [key, set] : sets) out.push_back(std::move(set));
  return out;
}

std::vector<std::uint32_t> bow_vector(const BowDocument& doc, std::size_t vocab_size) {
  std::vector<std::uint32_t> dense(vocab_size, 0);
  for (const auto& [index, count] : doc.counts) {
    if (index >= vocab_size) {
      throw Error(ErrorKind::kInvalidArgument,
                  "term index " + std::to_string(index) + " out of range for vocabulary size " +
                      std::to_string(vocab_size));
    }
    dense[index] = count;
  }
  return dense;
}

}  // namespace drl
