#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "targen/errors.hpp"

namespace targen {

// ---------------- small string utilities ----------------

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::string to_lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// Case-insensitive, whitespace-trimmed key used whenever labels are compared.
inline std::string fold_label(const std::string& s) { return to_lower(trim(s)); }

// ---------------- label schema ----------------

// Ordered label space of a task. Comparisons are case-insensitive after
// trimming; the declared casing is canonical and is what gets stored.
struct LabelSchema {
  std::vector<std::string> labels;

  LabelSchema() = default;
  LabelSchema(std::initializer_list<std::string> init) : labels(init) {}
  explicit LabelSchema(std::vector<std::string> init) : labels(std::move(init)) {}

  std::size_t size() const { return labels.size(); }

  std::optional<std::string> canonical(const std::string& raw) const {
    std::string key = fold_label(raw);
    for (const auto& l : labels) {
      if (fold_label(l) == key) return l;
    }
    return std::nullopt;
  }

  bool contains(const std::string& raw) const { return canonical(raw).has_value(); }

  bool operator==(const LabelSchema&) const = default;

  std::vector<std::string> issues() const {
    std::vector<std::string> out;
    if (labels.size() < 2) out.push_back("label schema needs at least 2 labels");
    std::set<std::string> seen;
    for (const auto& l : labels) {
      if (trim(l).empty()) out.push_back("label schema contains an empty label");
      if (!seen.insert(fold_label(l)).second)
        out.push_back("duplicate label '" + trim(l) + "' in schema");
    }
    return out;
  }
};

// ---------------- prompt stages ----------------

enum class StageRole { contexts, seeds, instances, correction };

inline const char* stage_role_name(StageRole r) {
  switch (r) {
    case StageRole::contexts: return "contexts";
    case StageRole::seeds: return "seeds";
    case StageRole::instances: return "instances";
    case StageRole::correction: return "correction";
  }
  return "?";
}

inline std::optional<StageRole> stage_role_from(const std::string& s) {
  std::string k = fold_label(s);
  if (k == "contexts") return StageRole::contexts;
  if (k == "seeds") return StageRole::seeds;
  if (k == "instances") return StageRole::instances;
  if (k == "correction") return StageRole::correction;
  return std::nullopt;
}

enum class ParseKind { numbered_list, fielded_record, label_only, verdict };

inline const char* parse_kind_name(ParseKind k) {
  switch (k) {
    case ParseKind::numbered_list: return "numbered_list";
    case ParseKind::fielded_record: return "fielded_record";
    case ParseKind::label_only: return "label_only";
    case ParseKind::verdict: return "verdict";
  }
  return "?";
}

inline std::optional<ParseKind> parse_kind_from(const std::string& s) {
  std::string k = fold_label(s);
  if (k == "numbered_list") return ParseKind::numbered_list;
  if (k == "fielded_record") return ParseKind::fielded_record;
  if (k == "label_only") return ParseKind::label_only;
  if (k == "verdict") return ParseKind::verdict;
  return std::nullopt;
}

struct ParseRule {
  ParseKind kind = ParseKind::numbered_list;
  std::vector<std::string> fields;  // expected field labels for fielded_record
  bool case_sensitive = false;
  bool allow_extra_text = true;
  bool strict_order = true;
  // Text before the first field label is taken as the value of fields[0].
  // Matches prompts that end with "FieldName:" so the reply starts mid-field.
  bool implicit_first_field = false;
  // A line starting with one of these ends field capture; the remainder goes
  // to trailing_unparsed (generated explanations are kept but never become
  // instance inputs).
  std::vector<std::string> stop_labels = {"Explanation"};

  bool operator==(const ParseRule&) const = default;

  std::vector<std::string> issues() const {
    std::vector<std::string> out;
    if (kind == ParseKind::fielded_record) {
      if (fields.empty()) out.push_back("fielded_record rule declares no expected fields");
      std::set<std::string> seen;
      for (const auto& f : fields) {
        if (trim(f).empty()) out.push_back("fielded_record rule has an empty field label");
        if (!seen.insert(fold_label(f)).second)
          out.push_back("fielded_record rule repeats field label '" + f + "'");
      }
    }
    return out;
  }
};

struct PromptStage {
  StageRole role = StageRole::instances;
  std::optional<std::string> label;  // set when the stage is bound to one label
  std::string template_text;
  ParseRule parser;
  int count = 1;

  bool operator==(const PromptStage&) const = default;
};

// Placeholder names each stage role may reference. Stage inputs beyond these
// come from seed payload keys, matched after stripping non-alphanumerics.
inline const std::set<std::string>& role_placeholders(StageRole role) {
  static const std::set<std::string> contexts = {"N"};
  static const std::set<std::string> seeds = {"N", "CONTEXT", "DOMAIN", "CATEGORY", "WORD", "TOPIC"};
  static const std::set<std::string> instances = {
      "N", "CONTEXT", "DOMAIN", "CATEGORY", "LABEL", "SEED", "WORD", "TOPIC",
      "SENTENCE", "PASSAGE", "PARAGRAPH", "PREMISE", "DEFINITIONS", "RELATION",
      "SUBJECT", "SUBJECT 1", "SUBJECT 2", "PRONOUNS", "QUERY",
      "EXAMPLE SENTENCE", "EXAMPLE HYPOTHESIS 1", "EXAMPLE HYPOTHESIS 2", "EXAMPLE EXPLANATION"};
  static const std::set<std::string> correction = {"INSTRUCTIONS", "EXEMPLARS", "INPUT", "OUTPUT"};
  switch (role) {
    case StageRole::contexts: return contexts;
    case StageRole::seeds: return seeds;
    case StageRole::instances: return instances;
    case StageRole::correction: return correction;
  }
  return instances;
}

inline std::vector<std::string> template_placeholders(const std::string& tmpl) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      std::size_t j = tmpl.find('}', i + 1);
      if (j == std::string::npos) break;
      out.push_back(tmpl.substr(i + 1, j - i - 1));
      i = j + 1;
    } else {
      ++i;
    }
  }
  return out;
}

// ---------------- correction spec ----------------

struct CorrectionExemplar {
  std::string input;
  std::string actual;     // the answer the instructions imply
  std::string predicted;  // the output being judged
  bool correct = true;

  bool operator==(const CorrectionExemplar&) const = default;
};

struct CorrectionSpec {
  std::string task_instructions;
  std::vector<CorrectionExemplar> exemplars;
  int max_retries = 1;

  bool operator==(const CorrectionSpec&) const = default;

  std::vector<std::string> issues() const {
    std::vector<std::string> out;
    bool any_correct = false, any_incorrect = false;
    for (const auto& e : exemplars) (e.correct ? any_correct : any_incorrect) = true;
    if (!any_correct) out.push_back("correction exemplars lack a CORRECT case");
    if (!any_incorrect) out.push_back("correction exemplars lack an INCORRECT case");
    if (max_retries < 0) out.push_back("correction max_retries is negative");
    return out;
  }
};

// ---------------- task spec ----------------

enum class BalancePolicy { balanced, alternating, explicit_counts };

inline const char* balance_policy_name(BalancePolicy p) {
  switch (p) {
    case BalancePolicy::balanced: return "balanced";
    case BalancePolicy::alternating: return "alternating";
    case BalancePolicy::explicit_counts: return "explicit";
  }
  return "?";
}

inline std::optional<BalancePolicy> balance_policy_from(const std::string& s) {
  std::string k = fold_label(s);
  if (k == "balanced") return BalancePolicy::balanced;
  if (k == "alternating") return BalancePolicy::alternating;
  if (k == "explicit") return BalancePolicy::explicit_counts;
  return std::nullopt;
}

struct TaskSpec {
  std::string task_id;
  std::string description;
  LabelSchema label_schema;
  std::vector<std::string> field_schema;
  std::vector<PromptStage> stages;
  BalancePolicy balance_policy = BalancePolicy::balanced;
  std::map<std::string, int> explicit_counts;
  CorrectionSpec correction;
  // Declarative wiring for the generic assembler: parsed field label →
  // instance field, and seed payload key → instance field.
  std::map<std::string, std::string> parse_field_map;
  std::map<std::string, std::string> seed_field_map;

  bool operator==(const TaskSpec&) const = default;

  const PromptStage* stage_for(StageRole role) const {
    for (const auto& s : stages)
      if (s.role == role) return &s;
    return nullptr;
  }

  const PromptStage* instance_stage_for(const std::string& label) const {
    const PromptStage* wildcard = nullptr;
    for (const auto& s : stages) {
      if (s.role != StageRole::instances) continue;
      if (s.label && fold_label(*s.label) == fold_label(label)) return &s;
      if (!s.label) wildcard = &s;
    }
    return wildcard;
  }
};

inline std::vector<std::string> validate_task_spec(const TaskSpec& spec) {
  std::vector<std::string> issues;
  if (trim(spec.task_id).empty()) issues.push_back("task_id is empty");
  for (const auto& i : spec.label_schema.issues()) issues.push_back(i);

  std::set<std::string> fields_seen;
  for (const auto& f : spec.field_schema) {
    if (trim(f).empty()) issues.push_back("field_schema contains an empty field name");
    if (!fields_seen.insert(fold_label(f)).second)
      issues.push_back("duplicate field '" + f + "' in field_schema");
  }
  if (spec.field_schema.empty()) issues.push_back("field_schema is empty");

  int contexts_stages = 0, seeds_stages = 0, unlabeled_instance_stages = 0;
  std::map<std::string, int> labeled_instance_stages;
  for (std::size_t i = 0; i < spec.stages.size(); ++i) {
    const auto& st = spec.stages[i];
    std::string where = "stage " + std::to_string(i + 1) + " (" + stage_role_name(st.role) + ")";
    if (st.count < 1) issues.push_back(where + ": count must be >= 1");
    if (trim(st.template_text).empty()) issues.push_back(where + ": template is empty");
    for (const auto& r : st.parser.issues()) issues.push_back(where + ": " + r);
    if (st.label) {
      auto canon = spec.label_schema.canonical(*st.label);
      if (!canon)
        issues.push_back(where + ": label '" + *st.label + "' is not in the label schema");
      if (st.role != StageRole::instances)
        issues.push_back(where + ": only instances stages may be label-bound");
    }
    switch (st.role) {
      case StageRole::contexts: ++contexts_stages; break;
      case StageRole::seeds: ++seeds_stages; break;
      case StageRole::instances:
        if (st.label)
          ++labeled_instance_stages[fold_label(*st.label)];
        else
          ++unlabeled_instance_stages;
        break;
      case StageRole::correction: break;
    }
    const auto& allowed = role_placeholders(st.role);
    for (const auto& ph : template_placeholders(st.template_text)) {
      if (!allowed.count(ph))
        issues.push_back(where + ": placeholder {" + ph + "} is not an input of this role");
    }
  }
  if (contexts_stages > 1) issues.push_back("more than one contexts stage");
  if (seeds_stages > 1) issues.push_back("more than one seeds stage");
  if (unlabeled_instance_stages > 1)
    issues.push_back("more than one label-parameterized instances stage");
  if (unlabeled_instance_stages == 0) {
    for (const auto& l : spec.label_schema.labels) {
      int n = labeled_instance_stages.count(fold_label(l)) ? labeled_instance_stages[fold_label(l)] : 0;
      if (n == 0) issues.push_back("no instances stage for label '" + l + "'");
      if (n > 1) issues.push_back("multiple instances stages for label '" + l + "'");
    }
  } else if (!labeled_instance_stages.empty()) {
    issues.push_back("mixing a label-parameterized instances stage with label-bound ones");
  }
  if (unlabeled_instance_stages == 0 && labeled_instance_stages.empty())
    issues.push_back("no instances stage");

  if (spec.balance_policy == BalancePolicy::explicit_counts) {
    for (const auto& [label, n] : spec.explicit_counts) {
      if (!spec.label_schema.contains(label))
        issues.push_back("explicit count for unknown label '" + label + "'");
      if (n < 0) issues.push_back("explicit count for '" + label + "' is negative");
    }
  }
  for (const auto& i : spec.correction.issues()) issues.push_back(i);
  return issues;
}

// ---------------- seeds, instances, datasets ----------------

struct InstanceSeed {
  std::string seed_id;
  std::optional<std::string> context_id;
  std::map<std::string, std::string> payload;

  std::vector<std::string> issues() const {
    std::vector<std::string> out;
    if (payload.empty()) out.push_back("seed payload is empty");
    for (const auto& [k, v] : payload) {
      if (trim(v).empty()) out.push_back("seed payload field '" + k + "' is empty");
    }
    return out;
  }
};

enum class InstanceStatus { raw, confirmed, relabeled, unverified };

inline const char* instance_status_name(InstanceStatus s) {
  switch (s) {
    case InstanceStatus::raw: return "raw";
    case InstanceStatus::confirmed: return "confirmed";
    case InstanceStatus::relabeled: return "relabeled";
    case InstanceStatus::unverified: return "unverified";
  }
  return "?";
}

inline std::optional<InstanceStatus> instance_status_from(const std::string& s) {
  std::string k = fold_label(s);
  if (k == "raw") return InstanceStatus::raw;
  if (k == "confirmed") return InstanceStatus::confirmed;
  if (k == "relabeled") return InstanceStatus::relabeled;
  if (k == "unverified") return InstanceStatus::unverified;
  return std::nullopt;
}

struct Provenance {
  std::optional<std::string> context_id;
  std::optional<std::string> seed_id;
  std::map<std::string, std::string> prompt_hashes;  // stage role → request hash
  std::string backend_id;
  std::int64_t timestamp = 0;  // UTC seconds; 0 under deterministic backends
};

struct GeneratedInstance {
  std::string instance_id;
  std::string task_id;
  std::map<std::string, std::string> inputs;
  std::string original_label;
  std::optional<std::string> corrected_label;
  InstanceStatus status = InstanceStatus::raw;
  Provenance provenance;

  const std::string& final_label() const {
    return corrected_label ? *corrected_label : original_label;
  }
};

// Shape-level checks shared by every task; task packs add their own.
inline std::vector<std::string> validate_instance_shape(const TaskSpec& spec,
                                                        const GeneratedInstance& inst) {
  std::vector<std::string> issues;
  if (trim(inst.instance_id).empty()) issues.push_back("instance_id is empty");
  if (fold_label(inst.task_id) != fold_label(spec.task_id))
    issues.push_back("task_id '" + inst.task_id + "' does not match spec '" + spec.task_id + "'");
  if (!spec.label_schema.contains(inst.original_label))
    issues.push_back("original_label '" + inst.original_label + "' is not in the label schema");
  if (inst.corrected_label && !spec.label_schema.contains(*inst.corrected_label))
    issues.push_back("corrected_label '" + *inst.corrected_label + "' is not in the label schema");
  bool relabel_shape = inst.corrected_label &&
                       fold_label(*inst.corrected_label) != fold_label(inst.original_label);
  if ((inst.status == InstanceStatus::relabeled) != relabel_shape)
    issues.push_back("status '" + std::string(instance_status_name(inst.status)) +
                     "' is inconsistent with corrected_label");
  std::set<std::string> expected(spec.field_schema.begin(), spec.field_schema.end());
  std::set<std::string> got;
  for (const auto& [k, _] : inst.inputs) got.insert(k);
  if (got != expected) {
    for (const auto& f : expected)
      if (!got.count(f)) issues.push_back("input field '" + f + "' is missing");
    for (const auto& f : got)
      if (!expected.count(f)) issues.push_back("unexpected input field '" + f + "'");
  }
  return issues;
}

// Checked constructor used by the pipeline: refuses out-of-schema labels.
inline GeneratedInstance make_instance(const TaskSpec& spec, std::string instance_id,
                                       std::map<std::string, std::string> inputs,
                                       const std::string& label, Provenance provenance) {
  auto canon = spec.label_schema.canonical(label);
  if (!canon)
    throw ValidationError("label '" + label + "' is not in the schema of task " + spec.task_id);
  GeneratedInstance inst;
  inst.instance_id = std::move(instance_id);
  inst.task_id = spec.task_id;
  inst.inputs = std::move(inputs);
  inst.original_label = *canon;
  inst.status = InstanceStatus::raw;
  inst.provenance = std::move(provenance);
  return inst;
}

struct Manifest {
  std::string run_id;
  std::string tool_version;
  std::string task_id;
  std::string spec_hash;
  std::string backend_id;
  double temperature_generate = 1.0;
  double temperature_correct = 0.0;
  int max_tokens = 1024;
  std::vector<std::string> labels;
  std::vector<std::string> fields;
  std::map<std::string, int> label_targets;
  std::vector<std::string> completed_steps;
  std::int64_t created_at = 0;
  bool deterministic_time = false;
  std::uint64_t instance_count = 0;

  std::vector<std::string> issues(std::uint64_t requested_total) const {
    std::vector<std::string> out;
    std::uint64_t sum = 0;
    for (const auto& [_, n] : label_targets) sum += static_cast<std::uint64_t>(n);
    if (!label_targets.empty() && sum != requested_total)
      out.push_back("per-label targets sum to " + std::to_string(sum) + ", expected " +
                    std::to_string(requested_total));
    return out;
  }
};

struct Dataset {
  std::string task_id;
  Manifest manifest;
  std::vector<GeneratedInstance> instances;

  std::vector<std::string> issues() const {
    std::vector<std::string> out;
    std::set<std::string> ids;
    for (const auto& inst : instances) {
      if (!ids.insert(inst.instance_id).second)
        out.push_back("duplicate instance_id '" + inst.instance_id + "'");
      if (inst.task_id != task_id)
        out.push_back("instance '" + inst.instance_id + "' has task_id '" + inst.task_id + "'");
    }
    return out;
  }
};

// "{task_id}-{zero-padded ordinal}", assigned in generation order.
inline std::string format_instance_id(const std::string& task_id, std::size_t ordinal) {
  std::string n = std::to_string(ordinal);
  if (n.size() < 6) n.insert(0, 6 - n.size(), '0');
  return task_id + "-" + n;
}

}  // namespace targen
