#pragma once

// Step 4: every instance is re-judged by the model through a common
// meta-prompt; CORRECT verdicts confirm the label, INCORRECT verdicts
// relabel it, and unparseable evaluations leave the instance unverified.
// The label movement is summarized in a confusion matrix.

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "targen/backend.hpp"
#include "targen/core.hpp"
#include "targen/taskpacks.hpp"
#include "targen/textparse.hpp"

namespace targen::correct {

enum class Judgement { correct, incorrect, unparseable };

inline const char* judgement_name(Judgement j) {
  switch (j) {
    case Judgement::correct: return "correct";
    case Judgement::incorrect: return "incorrect";
    case Judgement::unparseable: return "unparseable";
  }
  return "unparseable";
}

struct Verdict {
  Judgement judgement = Judgement::unparseable;
  std::optional<std::string> corrected_label;  // canonical; set when incorrect
  std::string rationale;
};

// Rows are original labels, columns final labels; unverified instances are
// tracked per original label outside the grid.
struct ConfusionMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<int>> cells;
  std::map<std::string, int> unverified;

  explicit ConfusionMatrix(const LabelSchema& schema = LabelSchema{}) : labels(schema.labels) {
    cells.assign(labels.size(), std::vector<int>(labels.size(), 0));
    for (const auto& l : labels) unverified[l] = 0;
  }

  std::size_t index_of(const std::string& label) const {
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (fold_label(labels[i]) == fold_label(label)) return i;
    throw ValidationError("label '" + label + "' is not part of the confusion matrix");
  }

  int& cell(const std::string& original, const std::string& final_label) {
    return cells[index_of(original)][index_of(final_label)];
  }
  int cell(const std::string& original, const std::string& final_label) const {
    return cells[index_of(original)][index_of(final_label)];
  }

  int row_sum(const std::string& original) const {
    int sum = 0;
    for (int c : cells[index_of(original)]) sum += c;
    return sum;
  }

  int grand_total() const {
    int sum = 0;
    for (const auto& row : cells)
      for (int c : row) sum += c;
    return sum;
  }

  int off_diagonal_total() const {
    int sum = 0;
    for (std::size_t i = 0; i < cells.size(); ++i)
      for (std::size_t j = 0; j < cells[i].size(); ++j)
        if (i != j) sum += cells[i][j];
    return sum;
  }

  // Header row/column of labels plus the trailing unverified column.
  std::string to_csv() const {
    auto quote = [](const std::string& s) {
      if (s.find(',') == std::string::npos && s.find('"') == std::string::npos) return s;
      std::string out = "\"";
      for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
      }
      out += "\"";
      return out;
    };
    std::string out = "original\\final";
    for (const auto& l : labels) out += "," + quote(l);
    out += ",unverified\n";
    for (std::size_t i = 0; i < labels.size(); ++i) {
      out += quote(labels[i]);
      for (std::size_t j = 0; j < labels.size(); ++j) out += "," + std::to_string(cells[i][j]);
      out += "," + std::to_string(unverified.at(labels[i])) + "\n";
    }
    return out;
  }
};

struct CorrectionConfig {
  std::string model = "default";
  int max_tokens = 1024;
  int checkpoint_every = 50;
};

// ---------------- meta prompt ----------------

inline std::string render_meta_prompt(const CorrectionSpec& correction,
                                      const std::string& input_text,
                                      const std::string& output_label) {
  std::string p;
  p += "These are the \"task instructions\" you are given to accomplish a task:\n\n";
  p += correction.task_instructions;
  p += "\n\nYour task is to evaluate whether, based on these instructions and an input, the "
       "output is correct or incorrect. Also provide an explanation for your reasoning.\n";
  for (const auto& ex : correction.exemplars) {
    p += "\nExample:\nInput: " + ex.input + "\nOutput: " + ex.predicted + "\nEvaluation:\n";
    p += "Actual result: " + ex.actual + "\n";
    p += ex.correct ? "Actual result matches the output, so the output is CORRECT.\n"
                    : "Actual result does not match the output, so the output is INCORRECT.\n";
  }
  p += "\nNow evaluate the input and output below based on task instructions, and print "
       "whether the output is correct or incorrect. Remember to provide an explanation for "
       "your evaluation. Remember, the actual answer is based on the input and the task "
       "instructions, not the output.\n";
  p += "Input: " + input_text + "\n";
  p += "Output: " + output_label + "\n";
  p += "Evaluation:";
  return p;
}

inline backend::ChatRequest build_meta_prompt(const packs::TaskPack& pack,
                                              const GeneratedInstance& instance,
                                              const CorrectionConfig& cfg = {}) {
  backend::ChatRequest req;
  req.model = cfg.model;
  req.temperature = 0.0;
  req.max_tokens = cfg.max_tokens;
  req.messages = {{"user", render_meta_prompt(pack.spec.correction, pack.format_input(instance),
                                              instance.final_label())}};
  return req;
}

// ---------------- verdict parsing ----------------

namespace detail {

// Scopes of "Actual result:" markers: the rest of the line, or the next
// nonblank line when the marker ends its line.
inline std::vector<std::string> actual_result_scopes(const std::string& text) {
  std::vector<std::string> scopes;
  auto lines = text::detail::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::size_t at = text::detail::find_word(lines[i], "Actual result", 0);
    if (at == std::string::npos) continue;
    std::size_t colon = lines[i].find(':', at);
    if (colon == std::string::npos) continue;
    std::string rest = trim(lines[i].substr(colon + 1));
    if (!rest.empty()) {
      scopes.push_back(rest);
      continue;
    }
    for (std::size_t j = i + 1; j < lines.size(); ++j) {
      if (trim(lines[j]).empty()) continue;
      scopes.push_back(trim(lines[j]));
      break;
    }
  }
  return scopes;
}

}  // namespace detail

inline Verdict parse_verdict(const std::string& raw_text, const LabelSchema& schema) {
  Verdict v;
  v.rationale = trim(raw_text);
  std::string text = text::strip_markdown(raw_text);

  bool incorrect = text::detail::find_word(text, "INCORRECT", 0) != std::string::npos;
  bool correct = !incorrect && text::detail::find_word(text, "CORRECT", 0) != std::string::npos;
  if (correct) {
    v.judgement = Judgement::correct;
    return v;
  }
  if (!incorrect) return v;  // neither token present: unparseable

  for (const auto& scope : detail::actual_result_scopes(text)) {
    try {
      v.corrected_label = text::extract_label(scope, schema);
      v.judgement = Judgement::incorrect;
      return v;
    } catch (const ParseFailure&) {
      // try the next Actual result line
    }
  }
  // INCORRECT without a usable replacement label cannot relabel anything.
  return v;
}

// ---------------- dataset correction ----------------

struct CorrectionOutcome {
  Dataset dataset;
  ConfusionMatrix matrix;
};

inline CorrectionOutcome self_correct_dataset(
    const packs::TaskPack& pack, backend::ChatBackend& backend, Dataset dataset,
    const CorrectionConfig& cfg = {},
    const std::function<void(const Dataset&)>& on_progress = nullptr) {
  const LabelSchema& schema = pack.spec.label_schema;
  ConfusionMatrix matrix(schema);
  int max_retries = pack.spec.correction.max_retries;

  for (std::size_t i = 0; i < dataset.instances.size(); ++i) {
    GeneratedInstance& inst = dataset.instances[i];
    backend::ChatRequest request = build_meta_prompt(pack, inst, cfg);
    std::vector<backend::ChatMessage> messages = request.messages;

    Verdict verdict;
    std::string first_hash;
    for (int attempt = 0; attempt <= max_retries; ++attempt) {
      request.messages = messages;
      std::string hash = backend::request_hash(request);
      if (attempt == 0) first_hash = hash;
      backend::ChatResponse response;
      try {
        response = backend.complete(request);
      } catch (const TransportError&) {
        if (on_progress) on_progress(dataset);
        throw;
      }
      messages.push_back({"assistant", response.content});
      verdict = parse_verdict(response.content, schema);
      if (verdict.judgement != Judgement::unparseable) {
        inst.provenance.prompt_hashes["correction"] = hash;
        break;
      }
      messages.push_back(
          {"user",
           "The evaluation could not be parsed. State the Actual result and finish with "
           "either \"the output is CORRECT\" or \"the output is INCORRECT\"."});
    }

    switch (verdict.judgement) {
      case Judgement::correct: {
        if (!(inst.corrected_label &&
              fold_label(*inst.corrected_label) != fold_label(inst.original_label)))
          inst.status = InstanceStatus::confirmed;
        ++matrix.cell(inst.original_label, inst.final_label());
        break;
      }
      case Judgement::incorrect: {
        const std::string& label = *verdict.corrected_label;
        if (fold_label(label) == fold_label(inst.original_label)) {
          inst.corrected_label.reset();
          inst.status = InstanceStatus::confirmed;
        } else {
          inst.corrected_label = label;
          inst.status = InstanceStatus::relabeled;
        }
        ++matrix.cell(inst.original_label, inst.final_label());
        break;
      }
      case Judgement::unparseable: {
        if (inst.status == InstanceStatus::raw) inst.status = InstanceStatus::unverified;
        inst.provenance.prompt_hashes["correction"] = first_hash;
        ++matrix.unverified[*schema.canonical(inst.original_label)];
        break;
      }
    }
    if (on_progress && cfg.checkpoint_every > 0 &&
        (i + 1) % static_cast<std::size_t>(cfg.checkpoint_every) == 0)
      on_progress(dataset);
  }

  bool seen = false;
  for (const auto& s : dataset.manifest.completed_steps) seen = seen || s == "correction";
  if (!seen) dataset.manifest.completed_steps.push_back("correction");
  return {std::move(dataset), std::move(matrix)};
}

}  // namespace targen::correct
