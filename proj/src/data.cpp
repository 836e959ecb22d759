// SPDX-License-Identifier: Apache-2.0
#include "seqtag/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "seqtag/errors.hpp"
#include "seqtag/layers.hpp"

namespace seqtag {

namespace {

bool has_space(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

void validate(const TaggedSentence& sentence) {
  if (sentence.tokens.empty()) throw DataError("empty sentence");
  if (sentence.tokens.size() != sentence.tags.size()) {
    throw DataError("sentence has " + std::to_string(sentence.tokens.size()) + " tokens but " +
                    std::to_string(sentence.tags.size()) + " tags");
  }
  for (const auto& tok : sentence.tokens) {
    if (tok.empty() || has_space(tok)) throw DataError("invalid token '" + tok + "'");
  }
  for (const auto& tag : sentence.tags) {
    if (tag.empty() || has_space(tag)) throw DataError("invalid tag '" + tag + "'");
  }
}

// --- Vocabulary ------------------------------------------------------------

Vocabulary::Vocabulary() : Vocabulary({}, {}) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens, std::vector<std::string> tags)
    : id_to_tag_(std::move(tags)) {
  id_to_token_.emplace_back(kPadToken);
  id_to_token_.emplace_back(kUnkToken);
  for (auto& t : tokens) {
    if (t == kPadToken || t == kUnkToken) continue;
    id_to_token_.push_back(std::move(t));
  }
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
    if (!token_to_id_.emplace(id_to_token_[i], i).second) {
      throw ArgumentError("duplicate token in vocabulary: " + id_to_token_[i]);
    }
  }
  for (std::size_t i = 0; i < id_to_tag_.size(); ++i) {
    if (!tag_to_id_.emplace(id_to_tag_[i], i).second) {
      throw ArgumentError("duplicate tag in vocabulary: " + id_to_tag_[i]);
    }
  }
}

std::size_t Vocabulary::token_id(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnkId : it->second;
}

std::size_t Vocabulary::tag_id(const std::string& tag) const {
  auto it = tag_to_id_.find(tag);
  if (it == tag_to_id_.end()) throw DataError("tag '" + tag + "' is not in the vocabulary");
  return it->second;
}

std::vector<std::size_t> Vocabulary::encode_tokens(const std::vector<std::string>& tokens) const {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(token_id(t));
  return ids;
}

std::vector<std::size_t> Vocabulary::encode_tags(const std::vector<std::string>& tags) const {
  std::vector<std::size_t> ids;
  ids.reserve(tags.size());
  for (const auto& t : tags) ids.push_back(tag_id(t));
  return ids;
}

Vocabulary build_vocab(const std::vector<TaggedSentence>& sentences, std::size_t min_count) {
  if (sentences.empty()) throw ArgumentError("cannot build a vocabulary from an empty corpus");
  std::map<std::string, std::size_t> counts;
  std::map<std::string, bool> tag_set;
  for (const auto& s : sentences) {
    for (const auto& t : s.tokens) ++counts[t];
    for (const auto& t : s.tags) tag_set[t] = true;
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [tok, n] : counts) {
    if (n >= min_count && tok != Vocabulary::kPadToken && tok != Vocabulary::kUnkToken) {
      ranked.emplace_back(tok, n);
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  tokens.reserve(ranked.size());
  for (auto& [tok, n] : ranked) tokens.push_back(tok);
  std::vector<std::string> tags;
  for (auto& [tag, seen] : tag_set) tags.push_back(tag);
  return Vocabulary(std::move(tokens), std::move(tags));
}

// --- CoNLL -----------------------------------------------------------------

std::string write_conll(const std::vector<TaggedSentence>& sentences) {
  std::string out;
  for (const auto& s : sentences) {
    validate(s);
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      out += s.tokens[i];
      out += ' ';
      out += s.tags[i];
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

std::vector<TaggedSentence> parse_conll(std::string_view text) {
  std::vector<TaggedSentence> out;
  TaggedSentence current;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    std::vector<std::string_view> fields;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      std::size_t start = i;
      while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      if (i > start) fields.push_back(line.substr(start, i - start));
    }
    if (fields.empty()) {
      if (!current.tokens.empty()) out.push_back(std::move(current));
      current = {};
      continue;
    }
    if (fields.size() != 2) {
      throw ParseError("CoNLL line " + std::to_string(line_no) + ": expected 'token tag', found " +
                       std::to_string(fields.size()) + " fields");
    }
    current.tokens.emplace_back(fields[0]);
    current.tags.emplace_back(fields[1]);
  }
  if (!current.tokens.empty()) out.push_back(std::move(current));
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<TaggedSentence> read_conll_file(const std::string& path) {
  return parse_conll(read_text_file(path));
}

void write_conll_file(const std::string& path, const std::vector<TaggedSentence>& sentences) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << write_conll(sentences);
  if (!out) throw Error("write failed for '" + path + "'");
}

// --- JSON corpus -----------------------------------------------------------

namespace {

// Member order matters: corpora are concatenated in document order.
using json = nlohmann::ordered_json;

const json* find_member(const json& obj, std::initializer_list<const char*> keys) {
  for (const char* k : keys) {
    auto it = obj.find(k);
    if (it != obj.end()) return &*it;
  }
  return nullptr;
}

std::string member_path(const std::string& path, const std::string& key) {
  return path + "[" + json(key).dump() + "]";
}

std::string index_path(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> parts;
  std::istringstream in(s);
  std::string p;
  while (in >> p) parts.push_back(p);
  return parts;
}

void convert_word(const json& word, const std::string& path, TaggedSentence& out) {
  if (!word.is_object()) throw ParseError("expected a word object at " + path);
  const json* text = find_member(word, {"text", "word", "token"});
  if (text == nullptr || text->is_null()) throw DataError("word without token text at " + path);
  if (!text->is_string()) throw ParseError("token text is not a string at " + path);
  const auto pieces = split_ws(text->get<std::string>());
  if (pieces.empty()) throw DataError("word with empty token text at " + path);

  std::string tag(kOutsideTag);
  const json* entity = find_member(word, {"entity", "type", "label", "tag"});
  if (entity != nullptr && !entity->is_null()) {
    if (!entity->is_string()) throw ParseError("entity type is not a string at " + path);
    const auto tag_pieces = split_ws(entity->get<std::string>());
    if (tag_pieces.size() > 1) throw DataError("entity type holds whitespace at " + path);
    if (tag_pieces.size() == 1) tag = tag_pieces[0];
  }
  for (const auto& p : pieces) {
    out.tokens.push_back(p);
    out.tags.push_back(tag);
  }
}

void convert_sentence(const json& node, const std::string& path,
                      std::vector<TaggedSentence>& out) {
  const json* words = &node;
  std::string words_path = path;
  if (node.is_object()) {
    words = find_member(node, {"words", "tokens"});
    if (words == nullptr) throw ParseError("sentence object without 'words' at " + path);
    words_path = member_path(path, node.contains("words") ? "words" : "tokens");
  }
  if (!words->is_array()) throw ParseError("expected an array of words at " + words_path);
  TaggedSentence sentence;
  for (std::size_t i = 0; i < words->size(); ++i) {
    convert_word((*words)[i], index_path(words_path, i), sentence);
  }
  if (!sentence.tokens.empty()) out.push_back(std::move(sentence));
}

void convert_corpus(const json& node, const std::string& path, std::vector<TaggedSentence>& out) {
  const json* sentences = &node;
  std::string sentences_path = path;
  if (node.is_object()) {
    sentences = find_member(node, {"sentences"});
    if (sentences == nullptr) throw ParseError("corpus object without 'sentences' at " + path);
    sentences_path = member_path(path, "sentences");
  }
  if (!sentences->is_array()) {
    throw ParseError("expected an array of sentences at " + sentences_path);
  }
  for (std::size_t i = 0; i < sentences->size(); ++i) {
    convert_sentence((*sentences)[i], index_path(sentences_path, i), out);
  }
}

}  // namespace

std::vector<TaggedSentence> convert_json_corpus(std::string_view document) {
  json root;
  try {
    root = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed corpus document at $: ") + e.what());
  }
  std::vector<TaggedSentence> out;
  if (root.is_object()) {
    for (auto it = root.begin(); it != root.end(); ++it) {
      convert_corpus(it.value(), member_path("$", it.key()), out);
    }
  } else if (root.is_array()) {
    for (std::size_t i = 0; i < root.size(); ++i) convert_corpus(root[i], index_path("$", i), out);
  } else {
    throw ParseError("expected an object or array of corpora at $");
  }
  return out;
}

// --- Splitting -------------------------------------------------------------

DatasetSplit split_dataset(const std::vector<TaggedSentence>& sentences, const SplitSpec& spec) {
  const std::size_t n = sentences.size();
  if (n < 3) throw ArgumentError("need at least 3 sentences to split, got " + std::to_string(n));
  if (spec.train < 0 || spec.val < 0 || spec.test < 0 ||
      std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9) {
    throw ArgumentError("split fractions must be non-negative and sum to 1");
  }
  // The slack absorbs representation error such as 0.7 * 10 = 6.999...
  auto cut = [n](double fraction) {
    return std::min(n, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9)));
  };
  const std::size_t train_end = cut(spec.train);
  const std::size_t val_end = std::max(train_end, cut(spec.train + spec.val));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);

  DatasetSplit split;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = sentences[order[i]];
    if (i < train_end) {
      split.train.push_back(s);
    } else if (i < val_end) {
      split.val.push_back(s);
    } else {
      split.test.push_back(s);
    }
  }
  return split;
}

// --- Synthetic corpus ------------------------------------------------------

std::vector<TaggedSentence> generate_synthetic_corpus(std::uint64_t seed,
                                                      std::size_t n_sentences,
                                                      std::size_t vocab_size,
                                                      std::size_t n_tags) {
  if (n_tags < 2) throw ArgumentError("synthetic corpus needs at least 2 tags");
  if (vocab_size < n_tags) throw ArgumentError("synthetic vocabulary smaller than tag count");
  if (n_sentences == 0) throw ArgumentError("synthetic corpus needs at least 1 sentence");

  auto tag_name = [](std::size_t cls) {
    return cls == 0 ? std::string(kOutsideTag) : "E" + std::to_string(cls);
  };
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> length(3, 12);
  std::uniform_int_distribution<std::size_t> pick(0, vocab_size - 1);
  std::vector<TaggedSentence> out(n_sentences);
  for (auto& s : out) {
    const std::size_t len = length(rng);
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t index = pick(rng);
      const std::size_t cls = index % n_tags;
      s.tokens.push_back("c" + std::to_string(cls) + "w" + std::to_string(index));
      s.tags.push_back(tag_name(cls));
    }
  }
  return out;
}

std::string synthetic_tag_of(const std::string& token) {
  const auto w = token.find('w');
  if (token.size() < 3 || token[0] != 'c' || w == std::string::npos || w < 2) {
    throw ArgumentError("not a synthetic token: " + token);
  }
  const std::size_t cls = std::stoul(token.substr(1, w - 1));
  return cls == 0 ? std::string(kOutsideTag) : "E" + std::to_string(cls);
}

}  // namespace seqtag
