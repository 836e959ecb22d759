// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace seqtag {

/// Tag given to words without an entity annotation.
inline constexpr std::string_view kOutsideTag = "O";

struct TaggedSentence {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;

  bool operator==(const TaggedSentence&) const = default;
};

/// Throws DataError if the sentence is empty, lengths differ, a token holds
/// whitespace, or a tag is empty or holds whitespace.
void validate(const TaggedSentence& sentence);

/// Token and tag index maps. Token ids 0 and 1 are PAD and UNK; the rest
/// follow descending corpus frequency, ties broken lexicographically. Tag
/// ids are dense and ordered lexicographically.
class Vocabulary {
 public:
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary();
  Vocabulary(std::vector<std::string> tokens, std::vector<std::string> tags);

  std::size_t token_count() const { return id_to_token_.size(); }
  std::size_t tag_count() const { return id_to_tag_.size(); }

  /// Id of a token, UNK when unknown.
  std::size_t token_id(const std::string& token) const;
  /// Throws DataError naming the tag when it is not in the vocabulary.
  std::size_t tag_id(const std::string& tag) const;
  bool has_tag(const std::string& tag) const { return tag_to_id_.contains(tag); }

  const std::string& token(std::size_t id) const { return id_to_token_.at(id); }
  const std::string& tag(std::size_t id) const { return id_to_tag_.at(id); }

  /// Token list starting with PAD and UNK.
  const std::vector<std::string>& tokens() const { return id_to_token_; }
  const std::vector<std::string>& tags() const { return id_to_tag_; }

  std::vector<std::size_t> encode_tokens(const std::vector<std::string>& tokens) const;
  std::vector<std::size_t> encode_tags(const std::vector<std::string>& tags) const;

  bool operator==(const Vocabulary& other) const {
    return id_to_token_ == other.id_to_token_ && id_to_tag_ == other.id_to_tag_;
  }

 private:
  std::vector<std::string> id_to_token_;
  std::vector<std::string> id_to_tag_;
  std::unordered_map<std::string, std::size_t> token_to_id_;
  std::unordered_map<std::string, std::size_t> tag_to_id_;
};

/// Tokens seen fewer than min_count times are left out and encode as UNK.
Vocabulary build_vocab(const std::vector<TaggedSentence>& sentences, std::size_t min_count = 1);

// --- CoNLL-2000 text -------------------------------------------------------

/// "token tag" per line, a blank line after every sentence.
std::string write_conll(const std::vector<TaggedSentence>& sentences);

/// Accepts CRLF line ends and any number of blank lines between or after
/// sentences. Throws ParseError with the 1-based line number for a line
/// that does not have exactly two fields.
std::vector<TaggedSentence> parse_conll(std::string_view text);

std::vector<TaggedSentence> read_conll_file(const std::string& path);
void write_conll_file(const std::string& path, const std::vector<TaggedSentence>& sentences);

/// Whole file as bytes; throws Error when unreadable.
std::string read_text_file(const std::string& path);

// --- Auto-labeled JSON corpus ----------------------------------------------

/// Converts an auto-labeled corpus document into one sentence stream with
/// the corpora concatenated in document order.
///
/// Accepted layout: the top level is an object whose members (or an array
/// whose elements) are corpora. A corpus is an array of sentences or an
/// object carrying one under "sentences". A sentence is an array of words
/// or an object carrying one under "words" or "tokens". A word is an object
/// with its text under "text", "word" or "token" and its entity type under
/// "entity", "type", "label" or "tag"; a null, empty or absent entity type
/// becomes "O". Unknown members are ignored. Word text containing
/// whitespace is split into several tokens sharing the tag.
///
/// Throws ParseError (naming the element path) when the text is not JSON or
/// a node has the wrong kind, DataError when a word lacks text.
std::vector<TaggedSentence> convert_json_corpus(std::string_view document);

// --- Splitting -------------------------------------------------------------

struct SplitSpec {
  double train = 0.70;
  double val = 0.10;
  double test = 0.20;
  std::uint64_t seed = 13;
};

struct DatasetSplit {
  std::vector<TaggedSentence> train;
  std::vector<TaggedSentence> val;
  std::vector<TaggedSentence> test;
};

/// Seeded shuffle, then cuts at floor(train*n) and floor((train+val)*n).
DatasetSplit split_dataset(const std::vector<TaggedSentence>& sentences, const SplitSpec& spec);

// --- Synthetic corpus ------------------------------------------------------

/// Token "c<class>w<index>" always carries the tag of its class; class 0 is
/// "O", class c > 0 is "E<c>". Tokens are drawn uniformly from vocab_size
/// entries with class = index mod n_tags; sentence lengths are uniform in
/// [3, 12].
std::vector<TaggedSentence> generate_synthetic_corpus(std::uint64_t seed,
                                                      std::size_t n_sentences,
                                                      std::size_t vocab_size,
                                                      std::size_t n_tags);

/// Tag the synthetic generator assigns to one of its tokens.
std::string synthetic_tag_of(const std::string& token);

}  // namespace seqtag
