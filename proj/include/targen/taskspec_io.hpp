#pragma once

// Plain-text task spec files. Sections: [task], [labels], [stage.N],
// [correction]. One "key = value" per line; values are single-line with
// \n, \t and \\ escapes; '#' starts a comment line. Key reference:
//
//   [task]      id, description, fields (comma list), balance
//               (balanced|alternating|explicit), explicit (label:count comma
//               list), map (ParsedLabel -> field, repeatable), seed
//               (payload_key -> field, repeatable)
//   [labels]    label (repeatable, order = schema order)
//   [stage.N]   role, label, count, template, parser, parser_fields
//               (pipe list), case_sensitive, allow_extra, strict_order,
//               implicit_first, stop_labels (pipe list)
//   [correction] instructions, max_retries, exemplar.K.input,
//               exemplar.K.actual, exemplar.K.predicted, exemplar.K.verdict
//               (CORRECT|INCORRECT)
//
// The content hash is the lowercase-hex SHA-256 of the canonicalized file:
// CRLF folded to LF, comment and blank lines dropped, trailing per-line
// whitespace stripped, exactly one trailing newline.

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "targen/core.hpp"
#include "targen/errors.hpp"
#include "targen/sha256.hpp"

namespace targen {

inline std::string escape_value(const std::string& v) {
  std::string out;
  out.reserve(v.size());
  for (char c : v) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': break;
      default: out.push_back(c);
    }
  }
  return out;
}

inline std::string unescape_value(const std::string& v) {
  std::string out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] == '\\' && i + 1 < v.size()) {
      char n = v[++i];
      if (n == 'n') out.push_back('\n');
      else if (n == 't') out.push_back('\t');
      else if (n == '\\') out.push_back('\\');
      else { out.push_back('\\'); out.push_back(n); }
    } else {
      out.push_back(v[i]);
    }
  }
  return out;
}

namespace detail {

inline std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      if (!trim(cur).empty()) out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!trim(cur).empty()) out.push_back(trim(cur));
  return out;
}

inline bool parse_bool(const std::string& s, const std::string& key) {
  std::string k = fold_label(s);
  if (k == "true" || k == "yes" || k == "1") return true;
  if (k == "false" || k == "no" || k == "0") return false;
  throw ValidationError("task spec: key '" + key + "' has non-boolean value '" + s + "'");
}

struct SpecLine {
  std::string section;
  std::string key;
  std::string value;
  int number = 0;
};

inline std::vector<SpecLine> lex_spec(const std::string& text) {
  std::vector<SpecLine> out;
  std::istringstream in(text);
  std::string line, section;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = fold_label(t.substr(1, t.size() - 2));
      continue;
    }
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ValidationError("task spec line " + std::to_string(number) + ": expected key = value");
    if (section.empty())
      throw ValidationError("task spec line " + std::to_string(number) + ": key before any section");
    SpecLine sl;
    sl.section = section;
    sl.key = fold_label(t.substr(0, eq));
    sl.value = trim(t.substr(eq + 1));
    sl.number = number;
    out.push_back(sl);
  }
  return out;
}

inline std::pair<std::string, std::string> parse_arrow(const std::string& v, int line) {
  auto pos = v.find("->");
  if (pos == std::string::npos)
    throw ValidationError("task spec line " + std::to_string(line) + ": expected 'from -> to'");
  return {trim(v.substr(0, pos)), trim(v.substr(pos + 2))};
}

}  // namespace detail

inline TaskSpec parse_task_spec(const std::string& text) {
  TaskSpec spec;
  std::map<int, PromptStage> stages;
  std::map<int, CorrectionExemplar> exemplars;
  std::map<int, bool> exemplar_has_verdict;

  for (const auto& l : detail::lex_spec(text)) {
    const std::string& section = l.section;
    if (section == "task") {
      if (l.key == "id") spec.task_id = l.value;
      else if (l.key == "description") spec.description = unescape_value(l.value);
      else if (l.key == "fields") spec.field_schema = detail::split_list(l.value, ',');
      else if (l.key == "balance") {
        auto p = balance_policy_from(l.value);
        if (!p) throw ValidationError("task spec line " + std::to_string(l.number) +
                                      ": unknown balance policy '" + l.value + "'");
        spec.balance_policy = *p;
      } else if (l.key == "explicit") {
        for (const auto& part : detail::split_list(l.value, ',')) {
          auto colon = part.rfind(':');
          if (colon == std::string::npos)
            throw ValidationError("task spec line " + std::to_string(l.number) +
                                  ": explicit counts use label:count");
          spec.explicit_counts[trim(part.substr(0, colon))] =
              std::stoi(trim(part.substr(colon + 1)));
        }
      } else if (l.key == "map") {
        auto [from, to] = detail::parse_arrow(l.value, l.number);
        spec.parse_field_map[from] = to;
      } else if (l.key == "seed") {
        auto [from, to] = detail::parse_arrow(l.value, l.number);
        spec.seed_field_map[from] = to;
      } else {
        throw ValidationError("task spec line " + std::to_string(l.number) +
                              ": unknown [task] key '" + l.key + "'");
      }
    } else if (section == "labels") {
      if (l.key != "label")
        throw ValidationError("task spec line " + std::to_string(l.number) +
                              ": [labels] only takes 'label' keys");
      spec.label_schema.labels.push_back(l.value);
    } else if (section.rfind("stage.", 0) == 0) {
      int idx = 0;
      try {
        idx = std::stoi(section.substr(6));
      } catch (...) {
        throw ValidationError("task spec: bad stage section [" + section + "]");
      }
      PromptStage& st = stages[idx];
      if (l.key == "role") {
        auto r = stage_role_from(l.value);
        if (!r) throw ValidationError("task spec line " + std::to_string(l.number) +
                                      ": unknown role '" + l.value + "'");
        st.role = *r;
      } else if (l.key == "label") st.label = l.value;
      else if (l.key == "count") st.count = std::stoi(l.value);
      else if (l.key == "template") st.template_text = unescape_value(l.value);
      else if (l.key == "parser") {
        auto k = parse_kind_from(l.value);
        if (!k) throw ValidationError("task spec line " + std::to_string(l.number) +
                                      ": unknown parser '" + l.value + "'");
        st.parser.kind = *k;
      } else if (l.key == "parser_fields") st.parser.fields = detail::split_list(l.value, '|');
      else if (l.key == "case_sensitive") st.parser.case_sensitive = detail::parse_bool(l.value, l.key);
      else if (l.key == "allow_extra") st.parser.allow_extra_text = detail::parse_bool(l.value, l.key);
      else if (l.key == "strict_order") st.parser.strict_order = detail::parse_bool(l.value, l.key);
      else if (l.key == "implicit_first") st.parser.implicit_first_field = detail::parse_bool(l.value, l.key);
      else if (l.key == "stop_labels") st.parser.stop_labels = detail::split_list(l.value, '|');
      else
        throw ValidationError("task spec line " + std::to_string(l.number) +
                              ": unknown [stage] key '" + l.key + "'");
    } else if (section == "correction") {
      if (l.key == "instructions") spec.correction.task_instructions = unescape_value(l.value);
      else if (l.key == "max_retries") spec.correction.max_retries = std::stoi(l.value);
      else if (l.key.rfind("exemplar.", 0) == 0) {
        auto rest = l.key.substr(9);
        auto dot = rest.find('.');
        if (dot == std::string::npos)
          throw ValidationError("task spec line " + std::to_string(l.number) +
                                ": exemplar keys look like exemplar.N.field");
        int idx = std::stoi(rest.substr(0, dot));
        std::string field = rest.substr(dot + 1);
        CorrectionExemplar& e = exemplars[idx];
        if (field == "input") e.input = unescape_value(l.value);
        else if (field == "actual") e.actual = unescape_value(l.value);
        else if (field == "predicted") e.predicted = unescape_value(l.value);
        else if (field == "verdict") {
          std::string v = fold_label(l.value);
          if (v != "correct" && v != "incorrect")
            throw ValidationError("task spec line " + std::to_string(l.number) +
                                  ": verdict must be CORRECT or INCORRECT");
          e.correct = (v == "correct");
          exemplar_has_verdict[idx] = true;
        } else
          throw ValidationError("task spec line " + std::to_string(l.number) +
                                ": unknown exemplar field '" + field + "'");
      } else
        throw ValidationError("task spec line " + std::to_string(l.number) +
                              ": unknown [correction] key '" + l.key + "'");
    } else {
      throw ValidationError("task spec line " + std::to_string(l.number) +
                            ": unknown section [" + section + "]");
    }
  }

  for (auto& [idx, st] : stages) spec.stages.push_back(std::move(st));
  for (auto& [idx, e] : exemplars) {
    if (!exemplar_has_verdict.count(idx))
      throw ValidationError("task spec: exemplar " + std::to_string(idx) + " has no verdict");
    spec.correction.exemplars.push_back(std::move(e));
  }
  return spec;
}

inline std::string serialize_task_spec(const TaskSpec& spec) {
  std::ostringstream out;
  out << "[task]\n";
  out << "id = " << spec.task_id << "\n";
  if (!spec.description.empty()) out << "description = " << escape_value(spec.description) << "\n";
  if (!spec.field_schema.empty()) {
    out << "fields = ";
    for (std::size_t i = 0; i < spec.field_schema.size(); ++i)
      out << (i ? ", " : "") << spec.field_schema[i];
    out << "\n";
  }
  out << "balance = " << balance_policy_name(spec.balance_policy) << "\n";
  if (!spec.explicit_counts.empty()) {
    out << "explicit = ";
    bool first = true;
    for (const auto& [label, n] : spec.explicit_counts) {
      out << (first ? "" : ", ") << label << ":" << n;
      first = false;
    }
    out << "\n";
  }
  for (const auto& [from, to] : spec.parse_field_map) out << "map = " << from << " -> " << to << "\n";
  for (const auto& [from, to] : spec.seed_field_map) out << "seed = " << from << " -> " << to << "\n";

  out << "\n[labels]\n";
  for (const auto& l : spec.label_schema.labels) out << "label = " << l << "\n";

  for (std::size_t i = 0; i < spec.stages.size(); ++i) {
    const auto& st = spec.stages[i];
    out << "\n[stage." << (i + 1) << "]\n";
    out << "role = " << stage_role_name(st.role) << "\n";
    if (st.label) out << "label = " << *st.label << "\n";
    out << "count = " << st.count << "\n";
    out << "parser = " << parse_kind_name(st.parser.kind) << "\n";
    if (!st.parser.fields.empty()) {
      out << "parser_fields = ";
      for (std::size_t j = 0; j < st.parser.fields.size(); ++j)
        out << (j ? " | " : "") << st.parser.fields[j];
      out << "\n";
    }
    ParseRule defaults;
    if (st.parser.case_sensitive != defaults.case_sensitive)
      out << "case_sensitive = " << (st.parser.case_sensitive ? "true" : "false") << "\n";
    if (st.parser.allow_extra_text != defaults.allow_extra_text)
      out << "allow_extra = " << (st.parser.allow_extra_text ? "true" : "false") << "\n";
    if (st.parser.strict_order != defaults.strict_order)
      out << "strict_order = " << (st.parser.strict_order ? "true" : "false") << "\n";
    if (st.parser.implicit_first_field != defaults.implicit_first_field)
      out << "implicit_first = " << (st.parser.implicit_first_field ? "true" : "false") << "\n";
    if (st.parser.stop_labels != defaults.stop_labels) {
      out << "stop_labels = ";
      for (std::size_t j = 0; j < st.parser.stop_labels.size(); ++j)
        out << (j ? " | " : "") << st.parser.stop_labels[j];
      out << "\n";
    }
    out << "template = " << escape_value(st.template_text) << "\n";
  }

  out << "\n[correction]\n";
  if (!spec.correction.task_instructions.empty())
    out << "instructions = " << escape_value(spec.correction.task_instructions) << "\n";
  out << "max_retries = " << spec.correction.max_retries << "\n";
  for (std::size_t i = 0; i < spec.correction.exemplars.size(); ++i) {
    const auto& e = spec.correction.exemplars[i];
    std::string p = "exemplar." + std::to_string(i + 1) + ".";
    out << p << "input = " << escape_value(e.input) << "\n";
    out << p << "actual = " << escape_value(e.actual) << "\n";
    out << p << "predicted = " << escape_value(e.predicted) << "\n";
    out << p << "verdict = " << (e.correct ? "CORRECT" : "INCORRECT") << "\n";
  }
  return out.str();
}

inline std::string canonicalize_task_spec_text(const std::string& text) {
  std::istringstream in(text);
  std::string line, out;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    out += line;
    out += '\n';
  }
  return out;
}

inline std::string task_spec_content_hash(const std::string& text) {
  return sha256_hex(canonicalize_task_spec_text(text));
}

inline std::string task_spec_hash(const TaskSpec& spec) {
  return task_spec_content_hash(serialize_task_spec(spec));
}

inline TaskSpec load_task_spec_file(const std::string& path, std::string* hash_out = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open task spec file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  if (hash_out) *hash_out = task_spec_content_hash(text);
  return parse_task_spec(text);
}

}  // namespace targen
