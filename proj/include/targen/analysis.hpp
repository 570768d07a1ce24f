#pragma once

// Dataset quality metrics: lexical diversity, embedding-based semantic
// diversity, entity-distribution bias, leakage against a reference corpus,
// and label statistics. Everything here is deterministic given a seed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "targen/core.hpp"
#include "targen/errors.hpp"

namespace targen::analysis {

// ---------------- tokenization ----------------

// Maximal alphanumeric runs, lowercased. Bytes outside ASCII are kept so
// UTF-8 words survive as single tokens.
inline bool is_token_byte(unsigned char c) {
  return std::isalnum(c) != 0 || c >= 0x80;
}

inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (is_token_byte(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

inline std::size_t vocab_count(const std::vector<std::string>& texts) {
  std::unordered_set<std::string> vocab;
  for (const auto& t : texts)
    for (auto& tok : tokenize(t)) vocab.insert(std::move(tok));
  return vocab.size();
}

// ---------------- instance text extraction ----------------

// Which fields feed the text metrics; empty selection means every input
// field in key order.
inline std::string instance_text(const GeneratedInstance& inst,
                                 const std::vector<std::string>& fields = {}) {
  std::string out;
  auto append = [&out](const std::string& value) {
    if (!out.empty()) out += " ";
    out += value;
  };
  if (fields.empty()) {
    for (const auto& [_, value] : inst.inputs) append(value);
  } else {
    for (const auto& f : fields) {
      auto it = inst.inputs.find(f);
      if (it != inst.inputs.end()) append(it->second);
    }
  }
  return out;
}

inline std::vector<std::string> dataset_texts(const Dataset& ds,
                                              const std::vector<std::string>& fields = {}) {
  std::vector<std::string> out;
  out.reserve(ds.instances.size());
  for (const auto& inst : ds.instances) out.push_back(instance_text(inst, fields));
  return out;
}

// ---------------- embeddings ----------------

// Fixed-dimension vector stored sparsely: (index, value) entries sorted by
// index with no repeats.
struct SparseVector {
  std::vector<std::pair<std::uint32_t, double>> entries;

  double norm() const {
    double sum = 0.0;
    for (const auto& [_, v] : entries) sum += v * v;
    return std::sqrt(sum);
  }
};

inline double dot(const SparseVector& a, const SparseVector& b) {
  double sum = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.entries.size() && j < b.entries.size()) {
    if (a.entries[i].first < b.entries[j].first) ++i;
    else if (a.entries[i].first > b.entries[j].first) ++j;
    else sum += a.entries[i++].second * b.entries[j++].second;
  }
  return sum;
}

inline double cosine(const SparseVector& a, const SparseVector& b) {
  double na = a.norm(), nb = b.norm();
  if (na < 1e-12 || nb < 1e-12) return 0.0;
  return dot(a, b) / (na * nb);
}

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline SparseVector accumulate_features(const std::map<std::uint32_t, double>& counts) {
  SparseVector v;
  v.entries.assign(counts.begin(), counts.end());
  double n = v.norm();
  if (n > 0.0)
    for (auto& [_, value] : v.entries) value /= n;
  return v;
}

}  // namespace detail

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string name() const = 0;
  virtual std::size_t dimension() const = 0;
  // Unit-norm vector; the zero vector only for text with no tokens.
  virtual SparseVector embed(const std::string& text) const = 0;
};

// Hashed character-trigram + word-unigram term frequencies. Trigrams are
// taken inside tokens, so texts with disjoint token sets share features only
// through hash collisions.
class HashedNgramEmbedding : public EmbeddingProvider {
 public:
  explicit HashedNgramEmbedding(std::size_t dimension = 1u << 16) : dim_(dimension) {}

  std::string name() const override { return "hashed-ngram"; }
  std::size_t dimension() const override { return dim_; }

  SparseVector embed(const std::string& text) const override {
    std::map<std::uint32_t, double> counts;
    auto bump = [&](const std::string& feature) {
      counts[static_cast<std::uint32_t>(detail::fnv1a(feature) % dim_)] += 1.0;
    };
    for (const auto& tok : tokenize(text)) {
      bump("u:" + tok);
      if (tok.size() < 3) {
        bump("t:" + tok);
      } else {
        for (std::size_t i = 0; i + 3 <= tok.size(); ++i) bump("t:" + tok.substr(i, 3));
      }
    }
    return detail::accumulate_features(counts);
  }

 private:
  std::size_t dim_;
};

// ---------------- pairwise similarity ----------------

struct SimilarityOptions {
  std::size_t max_pairs = 100000;
  std::uint64_t seed = 0;
  bool exclude_exact_duplicates = false;
};

struct SimilarityStats {
  double mean = 0.0;
  double stdev = 0.0;
  std::size_t pairs = 0;
  std::vector<std::int64_t> histogram = std::vector<std::int64_t>(40, 0);

  static constexpr int kBins = 40;
  static double bin_lower(int bin) { return -1.0 + bin * (2.0 / kBins); }
};

namespace detail {

// Unordered pair (i, j), i < j, from its rank in the lexicographic listing
// of all n-choose-2 pairs.
inline std::pair<std::size_t, std::size_t> decode_pair(std::uint64_t rank, std::size_t n) {
  // Rank of the first pair with left index i is i*n - i*(i+1)/2 - i... solved
  // numerically, then corrected to be exact.
  auto row_start = [n](std::uint64_t i) { return i * (2 * n - i - 1) / 2; };
  double nf = static_cast<double>(n);
  double guess = nf - 0.5 - std::sqrt((nf - 0.5) * (nf - 0.5) - 2.0 * static_cast<double>(rank));
  std::uint64_t i = guess < 0.0 ? 0 : static_cast<std::uint64_t>(guess);
  if (i >= n - 1) i = n - 2;
  while (i > 0 && row_start(i) > rank) --i;
  while (row_start(i + 1) <= rank) ++i;
  std::uint64_t j = i + 1 + (rank - row_start(i));
  return {static_cast<std::size_t>(i), static_cast<std::size_t>(j)};
}

}  // namespace detail

inline SimilarityStats pairwise_similarity_stats(const std::vector<std::string>& texts,
                                                 const EmbeddingProvider& provider,
                                                 const SimilarityOptions& options = {}) {
  if (texts.size() < 2)
    throw ValidationError("similarity statistics need at least 2 texts, got " +
                          std::to_string(texts.size()));

  std::vector<SparseVector> vectors;
  vectors.reserve(texts.size());
  for (const auto& t : texts) vectors.push_back(provider.embed(t));

  auto excluded = [&](std::size_t i, std::size_t j) {
    return options.exclude_exact_duplicates && texts[i] == texts[j];
  };

  std::vector<double> sims;
  std::uint64_t n = texts.size();
  std::uint64_t total_pairs = n * (n - 1) / 2;
  if (total_pairs <= options.max_pairs) {
    for (std::size_t i = 0; i + 1 < texts.size(); ++i)
      for (std::size_t j = i + 1; j < texts.size(); ++j)
        if (!excluded(i, j)) sims.push_back(cosine(vectors[i], vectors[j]));
  } else {
    std::mt19937_64 rng(options.seed);
    std::uniform_int_distribution<std::uint64_t> pick(0, total_pairs - 1);
    std::set<std::uint64_t> chosen;
    std::uint64_t attempts = 0;
    std::uint64_t attempt_cap = options.max_pairs * 100ull + 1000ull;
    while (chosen.size() < options.max_pairs && attempts < attempt_cap) {
      ++attempts;
      std::uint64_t rank = pick(rng);
      if (chosen.count(rank)) continue;
      auto [i, j] = detail::decode_pair(rank, texts.size());
      if (excluded(i, j)) continue;
      chosen.insert(rank);
      sims.push_back(cosine(vectors[i], vectors[j]));
    }
  }

  if (sims.empty())
    throw ValidationError("no text pairs left to compare after duplicate exclusion");

  SimilarityStats stats;
  stats.pairs = sims.size();
  double sum = 0.0, sum_sq = 0.0;
  for (double s : sims) {
    sum += s;
    sum_sq += s * s;
    int bin = static_cast<int>(std::floor((s + 1.0) / (2.0 / SimilarityStats::kBins)));
    bin = std::clamp(bin, 0, SimilarityStats::kBins - 1);
    ++stats.histogram[static_cast<std::size_t>(bin)];
  }
  stats.mean = sum / static_cast<double>(sims.size());
  double variance = sum_sq / static_cast<double>(sims.size()) - stats.mean * stats.mean;
  stats.stdev = std::sqrt(std::max(0.0, variance));
  return stats;
}

// ---------------- entity distributions ----------------

struct TaggedEntity {
  std::string surface;
  std::string tag;
};

class EntityTagger {
 public:
  virtual ~EntityTagger() = default;
  virtual std::string name() const = 0;
  virtual std::vector<TaggedEntity> tag(const std::string& text) const = 0;
};

inline const std::set<std::string>& known_entity_tags() {
  static const std::set<std::string> tags = {"GPE", "PERSON", "NORP", "PRODUCT", "OTHER"};
  return tags;
}

// Gazetteer-driven tagger: case-insensitive whole-word matches of listed
// surfaces; multi-word surfaces are matched as phrases.
class GazetteerTagger : public EntityTagger {
 public:
  explicit GazetteerTagger(std::vector<std::pair<std::string, std::string>> entries) {
    for (auto& [surface, tag] : entries) {
      std::string t = trim(tag);
      if (!known_entity_tags().count(t))
        throw ValidationError("unknown entity tag '" + t + "' for surface '" + surface + "'");
      std::string s = trim(surface);
      if (s.empty()) throw ValidationError("gazetteer surface is empty");
      entries_.emplace_back(std::move(s), std::move(t));
    }
  }

  std::string name() const override { return "gazetteer"; }

  std::vector<TaggedEntity> tag(const std::string& text) const override {
    std::vector<TaggedEntity> out;
    std::string hay = to_lower(text);
    for (const auto& [surface, entity_tag] : entries_) {
      std::string needle = to_lower(surface);
      std::size_t pos = 0;
      while ((pos = hay.find(needle, pos)) != std::string::npos) {
        bool left_ok = pos == 0 || !is_token_byte(static_cast<unsigned char>(hay[pos - 1]));
        std::size_t end = pos + needle.size();
        bool right_ok = end >= hay.size() || !is_token_byte(static_cast<unsigned char>(hay[end]));
        if (left_ok && right_ok)
          out.push_back({text.substr(pos, needle.size()), entity_tag});
        ++pos;
      }
    }
    return out;
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

// One "surface<TAB>TAG" entry per line; blank lines are skipped.
inline GazetteerTagger load_gazetteer(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw ValidationError("gazetteer line " + std::to_string(line_no) +
                            " has no tab separator: '" + line + "'");
    entries.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return GazetteerTagger(std::move(entries));
}

inline GazetteerTagger load_gazetteer_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open gazetteer file '" + path + "'");
  return load_gazetteer(in);
}

// Case-folded surface counts for one tag, most frequent first, ties in
// lexicographic order.
inline std::vector<std::pair<std::string, int>> entity_distribution(
    const std::vector<std::string>& texts, const EntityTagger& tagger, const std::string& tag) {
  std::map<std::string, int> counts;
  for (const auto& text : texts) {
    for (const auto& entity : tagger.tag(text)) {
      if (fold_label(entity.tag) != fold_label(tag)) continue;
      ++counts[to_lower(entity.surface)];
    }
  }
  std::vector<std::pair<std::string, int>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return ranked;
}

// ---------------- leakage ----------------

inline std::string normalize_for_leakage(const std::string& text) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  static const std::string terminal = ".,!?;:";
  while (!out.empty() &&
         (terminal.find(out.back()) != std::string::npos || out.back() == ' '))
    out.pop_back();
  return out;
}

struct LeakagePair {
  std::size_t dataset_index;
  std::size_t reference_index;
  std::string normalized;

  bool operator==(const LeakagePair&) const = default;
};

inline std::vector<LeakagePair> leakage_check(const std::vector<std::string>& dataset_texts,
                                              const std::vector<std::string>& reference_texts) {
  std::map<std::string, std::vector<std::size_t>> reference_index;
  for (std::size_t j = 0; j < reference_texts.size(); ++j)
    reference_index[normalize_for_leakage(reference_texts[j])].push_back(j);

  std::vector<LeakagePair> pairs;
  for (std::size_t i = 0; i < dataset_texts.size(); ++i) {
    std::string key = normalize_for_leakage(dataset_texts[i]);
    auto it = reference_index.find(key);
    if (it == reference_index.end()) continue;
    for (std::size_t j : it->second) pairs.push_back({i, j, key});
  }
  return pairs;
}

// ---------------- label statistics ----------------

struct LabelDistribution {
  std::map<std::string, int> original;
  std::map<std::string, int> corrected;
};

inline LabelDistribution label_distribution(const Dataset& ds) {
  LabelDistribution dist;
  for (const auto& inst : ds.instances) {
    ++dist.original[inst.original_label];
    ++dist.corrected[inst.final_label()];
  }
  return dist;
}

}  // namespace targen::analysis
