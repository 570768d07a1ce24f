#pragma once

// Parsers for the free-text reply shapes the prompt stages ask for: numbered
// lists, "Label: value" records, and bare labels. Parsers never call the
// backend; retry-on-failure is the pipeline's job.

#include <algorithm>
#include <cctype>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "targen/core.hpp"
#include "targen/errors.hpp"

namespace targen::text {

inline std::string strip_markdown(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c != '*' && c != '`') out.push_back(c);
  }
  return out;
}

namespace detail {

inline bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

inline std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : s) {
    if (c == '\n') {
      lines.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  lines.push_back(cur);
  return lines;
}

// "1.", "1)", "1 -", "1:" item prefix; returns content start or npos.
inline std::size_t numbered_prefix_end(const std::string& line) {
  std::size_t i = 0;
  while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
  std::size_t digits = i;
  while (digits < line.size() && std::isdigit(static_cast<unsigned char>(line[digits]))) ++digits;
  if (digits == i) return std::string::npos;
  std::size_t p = digits;
  while (p < line.size() && (line[p] == ' ' || line[p] == '\t')) ++p;
  if (p >= line.size() || (line[p] != '.' && line[p] != ')' && line[p] != '-' && line[p] != ':'))
    return std::string::npos;
  ++p;
  while (p < line.size() && (line[p] == ' ' || line[p] == '\t')) ++p;
  return p;
}

inline bool is_stop_line(const std::string& line, const std::vector<std::string>& stop_labels) {
  std::string t = fold_label(line);
  for (const auto& stop : stop_labels) {
    std::string s = fold_label(stop);
    if (t.rfind(s, 0) == 0) {
      std::size_t after = s.size();
      while (after < t.size() && t[after] == ' ') ++after;
      if (after < t.size() && t[after] == ':') return true;
      if (after >= t.size()) return true;
    }
  }
  return false;
}

// Case-insensitive find of `needle` in `hay` at a word boundary.
inline std::size_t find_word(const std::string& hay, const std::string& needle, std::size_t from) {
  if (needle.empty()) return std::string::npos;
  std::string h = to_lower(hay), n = to_lower(needle);
  std::size_t pos = from;
  while ((pos = h.find(n, pos)) != std::string::npos) {
    bool left_ok = pos == 0 || !is_word_char(h[pos - 1]);
    std::size_t end = pos + n.size();
    bool right_ok = end >= h.size() || !is_word_char(h[end]);
    if (left_ok && right_ok) return pos;
    ++pos;
  }
  return std::string::npos;
}

}  // namespace detail

struct NumberedListOptions {
  std::vector<std::string> stop_labels = {"Explanation"};
};

// Items in order; "1.", "1)", "1 -" prefixes; non-numbered preamble ignored;
// lines following an item are folded into it (multi-line paragraphs).
inline std::vector<std::string> parse_numbered_list(const std::string& text,
                                                    const NumberedListOptions& options = {}) {
  std::vector<std::string> items;
  bool in_item = false;
  for (const auto& line : detail::split_lines(text)) {
    std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    std::size_t content = detail::numbered_prefix_end(line);
    if (content != std::string::npos) {
      items.push_back(trim(line.substr(content)));
      in_item = true;
      continue;
    }
    if (in_item && detail::is_stop_line(trimmed, options.stop_labels)) break;
    if (in_item) {
      std::string& cur = items.back();
      if (!cur.empty()) cur += " ";
      cur += trimmed;
    }
  }
  std::vector<std::string> out;
  for (auto& item : items)
    if (!trim(item).empty()) out.push_back(trim(item));
  if (out.empty())
    throw ParseFailure(ParseErrorKind::empty_result, "no numbered list items found");
  return out;
}

struct ParsedRecord {
  // Expected-label → trimmed value, in the rule's declared order.
  std::vector<std::pair<std::string, std::string>> fields;
  std::string trailing_unparsed;

  // Raw slices, in text order, kept so nothing is ever lost:
  // preamble_raw + Σ(label+value raw) + stop_raw reassembles the input.
  std::string preamble_raw;
  std::vector<std::pair<std::string, std::string>> raw_segments;
  std::string stop_raw;

  const std::string* find(const std::string& label) const {
    for (const auto& [k, v] : fields)
      if (fold_label(k) == fold_label(label)) return &v;
    return nullptr;
  }

  const std::string& get(const std::string& label) const {
    const std::string* v = find(label);
    if (!v) throw ParseFailure(ParseErrorKind::missing_field, "field '" + label + "' absent");
    return *v;
  }

  std::string reconstruct() const {
    std::string out = preamble_raw;
    for (const auto& [label_raw, value_raw] : raw_segments) {
      out += label_raw;
      out += value_raw;
    }
    out += stop_raw;
    return out;
  }
};

namespace detail {

struct Marker {
  std::size_t pos = 0;        // start of the label text
  std::size_t value_at = 0;   // after label + optional colon + one space run
  int field_index = -1;       // index into rule.fields, or -1 for a stop label
};

// A field label counts as a marker only when followed by ':', or when it
// sits alone at the end of its line (value on the following lines).
inline std::optional<Marker> marker_at(const std::string& text, std::size_t pos,
                                       const std::string& label, int field_index,
                                       bool case_sensitive) {
  std::size_t found;
  if (case_sensitive) {
    found = text.find(label, pos);
    while (found != std::string::npos) {
      bool left_ok = found == 0 || !is_word_char(text[found - 1]);
      std::size_t end = found + label.size();
      bool right_ok = end >= text.size() || !is_word_char(text[end]);
      if (left_ok && right_ok) break;
      found = text.find(label, found + 1);
    }
  } else {
    found = find_word(text, label, pos);
  }
  if (found == std::string::npos) return std::nullopt;
  std::size_t p = found + label.size();
  while (p < text.size() && (text[p] == ' ' || text[p] == '\t')) ++p;
  bool colon = p < text.size() && text[p] == ':';
  bool line_end = p >= text.size() || text[p] == '\n';
  if (!colon && !line_end) return std::nullopt;
  if (colon) {
    ++p;
    if (p < text.size() && text[p] == ' ') ++p;
  }
  Marker m;
  m.pos = found;
  m.value_at = p;
  m.field_index = field_index;
  return m;
}

inline std::vector<Marker> scan_markers(const std::string& text, const ParseRule& rule) {
  std::vector<Marker> out;
  auto scan_one = [&](const std::string& label, int index) {
    std::size_t pos = 0;
    while (pos < text.size()) {
      auto m = marker_at(text, pos, label, index, rule.case_sensitive);
      if (!m) break;
      out.push_back(*m);
      pos = m->pos + 1;
    }
  };
  for (std::size_t i = 0; i < rule.fields.size(); ++i)
    scan_one(rule.fields[i], static_cast<int>(i));
  for (const auto& stop : rule.stop_labels) scan_one(stop, -1);
  std::sort(out.begin(), out.end(), [](const Marker& a, const Marker& b) { return a.pos < b.pos; });
  // A stop label shadowed by a field label at the same spot keeps the field.
  std::vector<Marker> dedup;
  for (const auto& m : out) {
    if (!dedup.empty() && dedup.back().pos == m.pos) continue;
    dedup.push_back(m);
  }
  return dedup;
}

inline ParsedRecord parse_one_record(const std::string& text, const ParseRule& rule,
                                     const std::vector<Marker>& markers) {
  ParsedRecord rec;
  std::vector<std::optional<std::string>> values(rule.fields.size());
  std::size_t next_expected = 0;

  std::size_t first_marker = markers.empty() ? text.size() : markers.front().pos;
  rec.preamble_raw = text.substr(0, first_marker);
  if (rule.implicit_first_field && !rule.fields.empty()) {
    bool first_is_field0 = !markers.empty() && markers.front().field_index == 0;
    if (!first_is_field0 && !trim(rec.preamble_raw).empty()) {
      values[0] = trim(rec.preamble_raw);
      rec.raw_segments.emplace_back("", rec.preamble_raw);
      rec.preamble_raw.clear();
      next_expected = 1;
    }
  }

  for (std::size_t mi = 0; mi < markers.size(); ++mi) {
    const Marker& m = markers[mi];
    if (m.field_index < 0) {  // stop label: the rest is kept, unparsed
      rec.stop_raw = text.substr(m.pos);
      break;
    }
    std::size_t f = static_cast<std::size_t>(m.field_index);
    if (values[f]) {  // second record begins; leave it for the caller
      rec.stop_raw = text.substr(m.pos);
      break;
    }
    if (rule.strict_order) {
      if (f != next_expected) {
        if (f > next_expected) {
          // Is the expected label still ahead? Then this is a permutation.
          bool ahead = false;
          for (std::size_t mj = mi + 1; mj < markers.size(); ++mj)
            if (markers[mj].field_index == static_cast<int>(next_expected)) ahead = true;
          if (ahead)
            throw ParseFailure(ParseErrorKind::out_of_order,
                               "field '" + rule.fields[f] + "' appears before '" +
                                   rule.fields[next_expected] + "'");
          throw ParseFailure(ParseErrorKind::missing_field,
                             "field '" + rule.fields[next_expected] + "' not found");
        }
        throw ParseFailure(ParseErrorKind::out_of_order,
                           "field '" + rule.fields[f] + "' repeated or out of order");
      }
      ++next_expected;
    }
    std::size_t value_end = text.size();
    if (mi + 1 < markers.size()) value_end = markers[mi + 1].pos;
    values[f] = trim(text.substr(m.value_at, value_end - m.value_at));
    rec.raw_segments.emplace_back(text.substr(m.pos, m.value_at - m.pos),
                                  text.substr(m.value_at, value_end - m.value_at));
  }

  for (std::size_t i = 0; i < rule.fields.size(); ++i) {
    if (!values[i])
      throw ParseFailure(ParseErrorKind::missing_field,
                         "field '" + rule.fields[i] + "' not found");
    rec.fields.emplace_back(rule.fields[i], *values[i]);
  }
  std::string extra = trim(rec.preamble_raw);
  std::string stop_trimmed = trim(rec.stop_raw);
  rec.trailing_unparsed = extra.empty() ? stop_trimmed
                          : stop_trimmed.empty() ? extra
                                                 : extra + "\n" + stop_trimmed;
  if (!rule.allow_extra_text && !rec.trailing_unparsed.empty())
    throw ParseFailure(ParseErrorKind::bad_format,
                       "unexpected extra text: " + rec.trailing_unparsed.substr(0, 80));
  return rec;
}

}  // namespace detail

inline ParsedRecord parse_fielded_record(const std::string& text, const ParseRule& rule) {
  if (rule.kind != ParseKind::fielded_record)
    throw ParseFailure(ParseErrorKind::bad_format, "rule kind is not fielded_record");
  if (rule.fields.empty())
    throw ParseFailure(ParseErrorKind::bad_format, "rule declares no expected fields");
  return detail::parse_one_record(text, rule, detail::scan_markers(text, rule));
}

// Repeated groups: a reappearance of the first expected label starts a new
// record. Used by stages that ask for several items per completion.
inline std::vector<ParsedRecord> parse_fielded_records(const std::string& text,
                                                       const ParseRule& rule) {
  if (rule.kind != ParseKind::fielded_record)
    throw ParseFailure(ParseErrorKind::bad_format, "rule kind is not fielded_record");
  if (rule.fields.empty())
    throw ParseFailure(ParseErrorKind::bad_format, "rule declares no expected fields");
  auto markers = detail::scan_markers(text, rule);
  std::vector<std::size_t> starts;
  for (const auto& m : markers)
    if (m.field_index == 0) starts.push_back(m.pos);
  if (starts.size() <= 1 || rule.implicit_first_field)
    return {detail::parse_one_record(text, rule, markers)};

  std::vector<ParsedRecord> out;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    std::size_t begin = (i == 0) ? 0 : starts[i];
    std::size_t end = (i + 1 < starts.size()) ? starts[i + 1] : text.size();
    std::string chunk = text.substr(begin, end - begin);
    // Numbered-item scaffolding between groups belongs to no field.
    ParseRule sub = rule;
    auto rec = detail::parse_one_record(chunk, sub, detail::scan_markers(chunk, sub));
    for (auto& [k, v] : rec.fields) {
      // strip a dangling "3." item prefix left at the tail of the last value
      std::size_t nl = v.find_last_of('\n');
      if (nl != std::string::npos) {
        std::string tail = trim(v.substr(nl + 1));
        bool all_digits = !tail.empty();
        for (std::size_t ci = 0; ci + 1 < tail.size() && all_digits; ++ci)
          if (!std::isdigit(static_cast<unsigned char>(tail[ci]))) all_digits = false;
        if (all_digits && (std::isdigit(static_cast<unsigned char>(tail.back())) ||
                           tail.back() == '.' || tail.back() == ')'))
          v = trim(v.substr(0, nl));
      }
    }
    out.push_back(std::move(rec));
  }
  return out;
}

// The unique schema label appearing in the text. Lines flagged by
// "Output:", "Answer:" or "LABEL:" are consulted first; overlapping label
// matches resolve to the longest ("not entailment" beats "entailment").
inline std::string extract_label(const std::string& raw_text, const LabelSchema& schema) {
  std::string text = strip_markdown(raw_text);

  auto matches_in = [&](const std::string& scope) -> std::vector<std::pair<std::size_t, std::size_t>> {
    // (label index, position); containment-filtered
    struct Match { std::size_t label; std::size_t begin; std::size_t end; };
    std::vector<Match> all;
    for (std::size_t li = 0; li < schema.labels.size(); ++li) {
      std::size_t pos = 0;
      while (true) {
        std::size_t at = detail::find_word(scope, schema.labels[li], pos);
        if (at == std::string::npos) break;
        all.push_back({li, at, at + schema.labels[li].size()});
        pos = at + 1;
      }
    }
    std::vector<std::pair<std::size_t, std::size_t>> kept;
    for (const auto& m : all) {
      bool contained = false;
      for (const auto& other : all) {
        if (other.label == m.label) continue;
        bool covers = other.begin <= m.begin && m.end <= other.end;
        bool larger = (other.end - other.begin) > (m.end - m.begin);
        if (covers && larger) contained = true;
      }
      if (!contained) kept.emplace_back(m.label, m.begin);
    }
    return kept;
  };

  auto decide = [&](const std::vector<std::pair<std::size_t, std::size_t>>& found)
      -> std::optional<std::string> {
    if (found.empty()) return std::nullopt;
    std::set<std::size_t> distinct;
    for (const auto& [label, _] : found) distinct.insert(label);
    if (distinct.size() > 1) {
      std::string msg = "ambiguous label: matched";
      for (auto li : distinct) msg += " '" + schema.labels[li] + "'";
      throw ParseFailure(ParseErrorKind::ambiguous_label, msg);
    }
    return schema.labels[*distinct.begin()];
  };

  static const std::vector<std::string> kMarkers = {"output", "answer", "label"};
  auto lines = detail::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    std::size_t best = std::string::npos;
    for (const auto& marker : kMarkers) {
      std::size_t at = detail::find_word(line, marker, 0);
      while (at != std::string::npos) {
        std::size_t p = at + marker.size();
        while (p < line.size() && (line[p] == ' ' || line[p] == '\t')) ++p;
        if (p < line.size() && line[p] == ':') {
          best = std::min(best == std::string::npos ? p + 1 : best, p + 1);
          break;
        }
        at = detail::find_word(line, marker, at + 1);
      }
    }
    if (best == std::string::npos) continue;
    std::string scope = line.substr(best);
    if (trim(scope).empty() && i + 1 < lines.size()) scope = lines[i + 1];
    if (auto label = decide(matches_in(scope))) return *label;
  }

  if (auto label = decide(matches_in(text))) return *label;
  throw ParseFailure(ParseErrorKind::label_not_found, "no schema label found in text");
}

}  // namespace targen::text
