#pragma once

// Nine built-in task packs. Each pack bundles a TaskSpec (prompt templates,
// label schema, balance policy), the code hooks that turn raw completions
// into seeds and instance inputs, deterministic post-processors, a
// structural validator, and the input renderer used by self-correction.

#include <cctype>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "targen/core.hpp"
#include "targen/textparse.hpp"

namespace targen::packs {

struct TaskPack {
  TaskSpec spec;
  // Used instead of a contexts stage when nonempty (fixed category lists).
  std::vector<std::string> fixed_contexts;

  // raw Step 2 completion for one context -> seed payloads
  std::function<std::vector<std::map<std::string, std::string>>(
      const std::string& context, const std::string& raw)>
      seed_assembler;

  // raw Step 3 completion -> candidate instance inputs for the asked label
  std::function<std::vector<std::map<std::string, std::string>>(
      const std::string& label, const InstanceSeed& seed, const std::string& raw)>
      instance_assembler;

  using PostProcessor = std::function<void(GeneratedInstance&, const InstanceSeed&)>;
  std::vector<std::pair<std::string, PostProcessor>> post_processors;

  // Task-specific structural checks; shape checks live in
  // validate_instance_shape.
  std::function<std::vector<std::string>(const GeneratedInstance&)> validator;

  // Instance inputs -> the "Input:" block of the correction meta prompt.
  std::function<std::string(const GeneratedInstance&)> format_input;
};

inline std::vector<std::string> validate_instance(const TaskPack& pack,
                                                  const GeneratedInstance& inst) {
  auto issues = validate_instance_shape(pack.spec, inst);
  if (pack.validator)
    for (const auto& i : pack.validator(inst)) issues.push_back(i);
  return issues;
}

namespace detail {

inline std::string field_or(const GeneratedInstance& inst, const std::string& key) {
  auto it = inst.inputs.find(key);
  return it == inst.inputs.end() ? std::string() : it->second;
}

inline bool contains_fold(const std::string& hay, const std::string& needle) {
  return to_lower(hay).find(to_lower(needle)) != std::string::npos;
}

inline bool contains_word_fold(const std::string& hay, const std::string& needle) {
  return text::detail::find_word(hay, needle, 0) != std::string::npos;
}

inline std::vector<std::string> tokens_of(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '\'') {
      cur.push_back(c);
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

// Inflection-tolerant keyword matching: a token matches when it shares a
// prefix of >= 4 characters with the keyword, or extends the whole keyword
// ("keys"/"key" passes, "shot"/"shoot" does not).
inline bool sentence_has_keyword(const std::string& sentence, const std::string& word) {
  std::string w = to_lower(trim(word));
  for (const auto& raw : tokens_of(sentence)) {
    std::string t = to_lower(raw);
    if (t == w) return true;
    std::size_t common = 0;
    while (common < t.size() && common < w.size() && t[common] == w[common]) ++common;
    if (common >= 4) return true;
    if (common == w.size() && common >= 2) return true;
  }
  return false;
}

inline std::vector<std::string> require_nonempty(const GeneratedInstance& inst,
                                                 const std::vector<std::string>& fields) {
  std::vector<std::string> issues;
  for (const auto& f : fields)
    if (trim(field_or(inst, f)).empty()) issues.push_back("field '" + f + "' is empty");
  return issues;
}

inline std::string labeled_block(std::initializer_list<std::pair<std::string, std::string>> rows) {
  std::string out;
  for (const auto& [k, v] : rows) {
    if (!out.empty()) out += "\n";
    out += k + ": " + v;
  }
  return out;
}

inline ParseRule numbered_rule() {
  ParseRule r;
  r.kind = ParseKind::numbered_list;
  return r;
}

inline ParseRule fielded_rule(std::vector<std::string> fields, bool implicit_first = false) {
  ParseRule r;
  r.kind = ParseKind::fielded_record;
  r.fields = std::move(fields);
  r.implicit_first_field = implicit_first;
  return r;
}

inline PromptStage stage(StageRole role, std::string tmpl, ParseRule rule, int count = 1,
                         std::optional<std::string> label = std::nullopt) {
  PromptStage s;
  s.role = role;
  s.label = std::move(label);
  s.template_text = std::move(tmpl);
  s.parser = std::move(rule);
  s.count = count;
  return s;
}

// "1. a\n2. b" from items, for seed payloads that carry a rendered list.
inline std::string render_numbered(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    out += std::to_string(i + 1) + ". " + items[i];
    if (i + 1 < items.size()) out += "\n";
  }
  return out;
}

inline std::vector<std::map<std::string, std::string>> one_item_seeds(
    const std::string& key, const std::string& raw) {
  std::vector<std::map<std::string, std::string>> seeds;
  for (const auto& item : text::parse_numbered_list(raw)) seeds.push_back({{key, item}});
  return seeds;
}

}  // namespace detail

// ---------------- CommitmentBank ----------------

inline TaskPack make_cb_pack() {
  using namespace detail;
  TaskPack pack;
  TaskSpec& spec = pack.spec;
  spec.task_id = "cb";
  spec.description =
      "Premise-hypothesis pairs labeled entailment, contradiction, or neutral; "
      "pairs are generated per label within a sampled domain.";
  spec.label_schema = {"entailment", "contradiction", "neutral"};
  spec.field_schema = {"premise", "hypothesis"};
  spec.balance_policy = BalancePolicy::explicit_counts;
  spec.explicit_counts = {{"contradiction", 119}, {"entailment", 115}, {"neutral", 16}};

  spec.stages.push_back(stage(
      StageRole::contexts,
      "Generate a list of {N} domains or settings in which events can take place.",
      numbered_rule()));
  spec.stages.push_back(stage(
      StageRole::instances,
      "For the given domain {DOMAIN}, generate {N} pairs of sentences (Sentence 1, Sentence 2) "
      "such that Sentence 2 logically follows, or is implied by, Sentence 1.\n"
      "Example:\n"
      "Sentence 1: The singer was very nervous.\n"
      "Sentence 2: The singer saw critics in the front row.\n"
      "Now generate {N} such sentence pairs.\n"
      "Generated sentences:",
      fielded_rule({"Sentence 1", "Sentence 2"}), 5, "entailment"));
  spec.stages.push_back(stage(
      StageRole::instances,
      "For the given domain {DOMAIN}, generate {N} pairs of sentences (Sentence 1, Sentence 2) "
      "such that Sentence 2 has no relation with Sentence 1, and cannot be derived from it.\n"
      "Example:\n"
      "Sentence 1: I made coffee.\n"
      "Sentence 2: My assignment is due tomorrow.\n"
      "Now generate {N} such sentence pairs.\n"
      "Generated sentences:",
      fielded_rule({"Sentence 1", "Sentence 2"}), 5, "neutral"));
  spec.stages.push_back(stage(
      StageRole::instances,
      "For the given domain {DOMAIN}, generate {N} pairs of sentences (Sentence 1, Sentence 2) "
      "such that Sentence 2 is explicitly contradicted by Sentence 1.\n"
      "Example:\n"
      "Sentence 1: The musician was not on time for the gig.\n"
      "Sentence 2: The promoter praised the musician for being on time.\n"
      "Now generate {N} such sentence pairs.\n"
      "Generated sentences:",
      fielded_rule({"Sentence 1", "Sentence 2"}), 5, "contradiction"));

  spec.correction.task_instructions =
      "The input contains a premise and a hypothesis. Assume the premise is always true.\n"
      "1. If the hypothesis logically follows the premise and the hypothesis can be derived "
      "from the information in the premise, Output \"entailment\"\n"
      "2. If the hypothesis directly contradicts information in the premise, Output "
      "\"contradiction\"\n"
      "3. If the hypothesis is unrelated to the premise, or cannot be sufficiently proven from "
      "the information in the premise, Output \"neutral\"";
  spec.correction.exemplars = {
      {"Premise: The singer was very nervous.\nHypothesis: The singer saw critics in the front "
       "row.",
       "neutral", "entailment", false},
      {"Premise: The musician was not on time for the gig.\nHypothesis: The promoter praised "
       "the musician for being on time.",
       "contradiction", "contradiction", true},
  };

  pack.instance_assembler = [](const std::string&, const InstanceSeed& seed,
                               const std::string& raw) {
    ParseRule rule = fielded_rule({"Sentence 1", "Sentence 2"});
    std::vector<std::map<std::string, std::string>> out;
    for (const auto& rec : text::parse_fielded_records(raw, rule))
      out.push_back({{"premise", rec.get("Sentence 1")}, {"hypothesis", rec.get("Sentence 2")}});
    (void)seed;
    return out;
  };
  pack.validator = [](const GeneratedInstance& inst) {
    return require_nonempty(inst, {"premise", "hypothesis"});
  };
  pack.format_input = [](const GeneratedInstance& inst) {
    return labeled_block({{"Premise", field_or(inst, "premise")},
                          {"Hypothesis", field_or(inst, "hypothesis")}});
  };
  return pack;
}

// ---------------- COPA ----------------

inline const std::map<std::string, std::map<std::string, std::string>>& copa_relation_examples() {
  static const std::map<std::string, std::map<std::string, std::string>> examples = {
      {"CAUSE",
       {{"example_sentence", "I cast a long shadow."},
        {"example_hypothesis_1", "The sun was low in the sky."},
        {"example_hypothesis_2", "The grass was tall."},
        {"example_explanation",
         "Hypothesis 1, the low position of the sun is more likely to cause a long shadow. The "
         "height of the grass has nothing to do with the long shadow, and thus is unlikely to "
         "be a cause."}}},
      {"RESULT",
       {{"example_sentence", "I fell down the stairs."},
        {"example_hypothesis_1", "I injured myself."},
        {"example_hypothesis_2", "My mother bought a new car."},
        {"example_explanation",
         "Hypothesis 1, the injury is more likely to be a result of the fall. The buying of a "
         "car is not implied by the sentence which talks about falling down stairs - hence it "
         "is less likely to be the result of the sentence."}}},
  };
  return examples;
}

inline TaskPack make_copa_pack() {
  using namespace detail;
  TaskPack pack;
  TaskSpec& spec = pack.spec;
  spec.task_id = "copa";
  spec.description =
      "Premise with two candidate hypotheses; the label names the choice causally linked to "
      "the premise, with the cause/result query affixed in post-processing.";
  spec.label_schema = {"Choice 1", "Choice 2"};
  spec.field_schema = {"premise", "choice1", "choice2"};
  spec.balance_policy = BalancePolicy::alternating;

  spec.stages.push_back(stage(
      StageRole::contexts,
      "Generate a list of {N} domains or settings in which events can take place.",
      numbered_rule()));
  spec.stages.push_back(stage(
      StageRole::seeds,
      "Generate {N} sentences describing events that could take place in the domain {DOMAIN}.",
      numbered_rule()));
  spec.stages.push_back(stage(
      StageRole::instances,
      "For the given sentence, generate 2 hypotheses (Hypothesis 1, Hypothesis 2), such that\n"
      "Hypothesis 1 is a probable {RELATION} of the sentence.\n"
      "Hypothesis 2 is very unlikely to be the {RELATION} of the sentence.\n"
      "Example:\n"
      "Sentence: {EXAMPLE SENTENCE}\n"
      "Hypothesis 1: {EXAMPLE HYPOTHESIS 1}\n"
      "Hypothesis 2: {EXAMPLE HYPOTHESIS 2}\n"
      "Explanation: {EXAMPLE EXPLANATION}\n"
      "Sentence: {SENTENCE}",
      fielded_rule({"Hypothesis 1", "Hypothesis 2"})));

  spec.correction.task_instructions =
      "You are given a premise and 2 possible hypotheses (Choice 1 and Choice 2) as input. "
      "Select the hypothesis which is more likely to have a causal link to the sentence.\n"
      "If the premise asks for CAUSE:\n"
      "If the premise is more likely to be the result of Choice 1, output Choice 1. Otherwise, "
      "output Choice 2.\n"
      "If the premise asks for RESULT:\n"
      "If Choice 1 is more likely to be the result of the premise, output Choice 1. Otherwise, "
      "output Choice 2.";
  spec.correction.exemplars = {
      {"Premise: I cast a long shadow. What was the CAUSE of this?\nChoice 1: The sun was low "
       "in the sky.\nChoice 2: The grass was tall.",
       "Choice 1", "Choice 1", true},
      {"Premise: I fell down the stairs. What was the RESULT of this?\nChoice 1: My mother "
       "bought a new car.\nChoice 2: I injured myself.",
       "Choice 2", "Choice 1", false},
  };

  pack.seed_assembler = [](const std::string&, const std::string& raw) {
    auto sentences = text::parse_numbered_list(raw);
    std::vector<std::map<std::string, std::string>> seeds;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      std::string relation = (i % 2 == 0) ? "CAUSE" : "RESULT";
      std::map<std::string, std::string> payload = copa_relation_examples().at(relation);
      payload["sentence"] = sentences[i];
      payload["relation"] = relation;
      seeds.push_back(std::move(payload));
    }
    return seeds;
  };
  pack.instance_assembler = [](const std::string& label, const InstanceSeed& seed,
                               const std::string& raw) {
    auto rec = text::parse_fielded_record(raw, fielded_rule({"Hypothesis 1", "Hypothesis 2"}));
    std::string likely = rec.get("Hypothesis 1");
    std::string unlikely = rec.get("Hypothesis 2");
    bool answer_first = fold_label(label) == fold_label("Choice 1");
    std::map<std::string, std::string> inputs{
        {"premise", seed.payload.at("sentence")},
        {"choice1", answer_first ? likely : unlikely},
        {"choice2", answer_first ? unlikely : likely},
    };
    return std::vector<std::map<std::string, std::string>>{std::move(inputs)};
  };
  pack.post_processors.emplace_back(
      "copa_affix_query", [](GeneratedInstance& inst, const InstanceSeed& seed) {
        auto it = seed.payload.find("relation");
        std::string relation = it == seed.payload.end() ? "CAUSE" : it->second;
        std::string& premise = inst.inputs["premise"];
        premise = trim(premise);
        if (!premise.empty() && premise.back() != '.' && premise.back() != '?' &&
            premise.back() != '!')
          premise += ".";
        premise += " What was the " + relation + " of this?";
      });
  pack.validator = [](const GeneratedInstance& inst) {
    auto issues = require_nonempty(inst, {"premise", "choice1", "choice2"});
    if (trim(field_or(inst, "choice1")) == trim(field_or(inst, "choice2")))
      issues.push_back("choice1 and choice2 are identical");
    return issues;
  };
  pack.format_input = [](const GeneratedInstance& inst) {
    return labeled_block({{"Premise", field_or(inst, "premise")},
                          {"Choice 1", field_or(inst, "choice1")},
                          {"Choice 2", field_or(inst, "choice2")}});
  };
  return pack;
}

// ---------------- RTE ----------------

inline TaskPack make_rte_pack() {
  using namespace detail;
  TaskPack pack;
  TaskSpec& spec = pack.spec;
  spec.task_id = "rte";
  spec.description =
      "Premise-hypothesis pairs labeled entailment or not entailment, built from complex "
      "sentences generated per domain.";
  spec.label_schema = {"entailment", "not entailment"};
  spec.field_schema = {"premise", "hypothesis"};
  spec.balance_policy = BalancePolicy::balanced;

  spec.stages.push_back(stage(StageRole::contexts,
                              "Generate a list of {N} topics or domains to talk about.",
                              numbered_rule()));
  spec.stages.push_back(stage(
      StageRole::seeds,
      "For the given domain {DOMAIN}, generate {N} complex sentences containing information "
      "relevant to this domain.",
      numbered_rule()));
  spec.stages.push_back(stage(
      StageRole::instances,
      "Given a sentence as premise, add a logically sound hypothesis concerning the "
      "information in the premise.\n"
      "Premise: A place of sorrow after Pope John Paul II died became a place of celebration "
      "as Roman Catholic faithful gathered in downtown Chicago to mark the installation of "
      "new Pope Benedict XVI.\n"
      "Hypothesis: Benedict XVI is the new Catholic Pope.\n"
      "Premise: {SENTENCE}",
      fielded_rule({"Hypothesis"}, true), 1, "entailment"));
  spec.stages.push_back(stage(
      StageRole::instances,
      "Given a sentence as premise, add a logically unsound hypothesis concerning the "
      "information in the premise.\n"
      "Premise: A place of sorrow after Pope John Paul II died became a place of celebration "
      "as Roman Catholic faithful gathered in downtown Chicago to mark the installation of "
      "new Pope Benedict XVI.\n"
      "Hypothesis: Benedict XVI died recently.\n"
      "Premise: {SENTENCE}",
      fielded_rule({"Hypothesis"}, true), 1, "not entailment"));

  spec.correction.task_instructions =
      "You are given a premise and a hypothesis. If the hypothesis logically follows from the "
      "premise, output entailment. If the hypothesis cannot be logically derived from the "
      "information in the premise, output not entailment.";
  spec.correction.exemplars = {
      {"Premise: A place of sorrow after Pope John Paul II died became a place of celebration "
       "as Roman Catholic faithful gathered in downtown Chicago to mark the installation of "
       "new Pope Benedict XVI.\nHypothesis: Benedict XVI is the new Catholic Pope.",
       "entailment", "entailment", true},
      {"Premise: A place of sorrow after Pope John Paul II died became a place of celebration "
       "as Roman Catholic faithful gathered in downtown Chicago to mark the installation of "
       "new Pope Benedict XVI.\nHypothesis: Benedict XVI died recently.",
       "not entailment", "entailment", false},
  };

  pack.seed_assembler = [](const std::string&, const std::string& raw) {
    return one_item_seeds("sentence", raw);
  };
  pack.instance_assembler = [](const std::string&, const InstanceSeed& seed,
                               const std::string& raw) {
    auto rec = text::parse_fielded_record(raw, fielded_rule({"Hypothesis"}, true));
    std::map<std::string, std::string> inputs{{"premise", seed.payload.at("sentence")},
                                              {"hypothesis", rec.get("Hypothesis")}};
    return std::vector<std::map<std::string, std::string>>{std::move(inputs)};
  };
  pack.validator = [](const GeneratedInstance& inst) {
    return require_nonempty(inst, {"premise", "hypothesis"});
  };
  pack.format_input = [](const GeneratedInstance& inst) {
    return labeled_block({{"Premise", field_or(inst, "premise")},
                          {"Hypothesis", field_or(inst, "hypothesis")}});
  };
  return pack;
}

// ---------------- WiC ----------------

inline TaskPack make_wic_pack() {
  using namespace detail;
  TaskPack pack;
  TaskSpec& spec = pack.spec;
  spec.task_id = "wic";
  spec.description =
      "A polysemous keyword with two sentences; True when both sentences use the same sense, "
      "False when the senses differ.";
  spec.label_schema = {"True", "False"};
  spec.field_schema = {"word", "sentence1", "sentence2"};
  spec.balance_policy = BalancePolicy::balanced;

  spec.stages.push_back(stage(
      StageRole::contexts,
      "Generate a list of {N} verbs or nouns which have more than one meaning.",
      numbered_rule()));
  spec.stages.push_back(stage(
      StageRole::seeds,
      "Given a word {WORD}, print a numbered list of 4 or fewer distinct definitions of the "
      "word. Example:\n"
      "Word : shoot\n"
      "Definitions:\n"
      "1. to fire a bullet\n"
      "2. click a picture\n"
      "3. record on video\n"
      "4. a movie set.\n"
      "Word: {WORD}\n"
      "Definitions:",
      numbered_rule()));
  spec.stages.push_back(stage(
      StageRole::instances,
      "For given word and list of all possible definitions, print any one definition, followed "
      "by 2 sentences containing the word in this definition.\n"
      "Example:\n"
      "Word: key\n"
      "Definitions:\n"
      "1. a piece of shaped metal used to open or close a lock\n"
      "2. a button or lever on a keyboard or musical instrument\n"
      "3. a crucial or central element\n"
      "4. to provide something with a key or identifying code\n"
      "Chosen definition:\n"
      "1. a piece of shaped metal used to open or close a lock\n"
      "Sentences:\n"
      "1. I lost my key yesterday\n"
      "2. He shouldn't steal people's keys.\n"
      "Word: {WORD}\n"
      "Definitions: {DEFINITIONS}\n"
      "Chosen definition:",
      fielded_rule({"Sentences"}), 1, "True"));
  spec.stages.push_back(stage(
      StageRole::instances,
      "Given a word and a list of definitions: For each definition, print a sentence "
      "containing the word in that definition.\n"
      "Example:\n"
      "Word: key\n"
      "Definitions:\n"
      "1. a piece of shaped metal used to open or close a lock\n"
      "2. a button or lever on a keyboard or musical instrument\n"
      "3. a crucial or central element\n"
      "4. to provide something with a key or identifying code\n"
      "Sentences:\n"
      "1. I lost my key yesterday\n"
      "2. This key on the piano is out of tune.\n"
      "3. The key to victory is planning ahead.\n"
      "4. I don't know what to key in to gain access.\n"
      "Word: {WORD}\n"
      "Definitions: {DEFINITIONS}\n"
      "Sentences:",
      numbered_rule(), 1, "False"));

  spec.correction.task_instructions =
      "You are given a word (Keyword) and 2 sentences, both containing the Keyword.\n"
      "1. If the definition of the Keyword in both sentences is almost the same, print TRUE\n"
      "2. If the Keyword means something different in sentence 1 than in sentence 2, print "
      "FALSE.";
  spec.correction.exemplars = {
      {"Word: shoot\nSentence 1: the shoot was suspended due to the actor's absence\n"
       "Sentence 2: the director wrapped the shoot up by evening.",
       "True", "True", true},
      {"Word: shoot\nSentence 1: he shot the wedding with a handheld camera\nSentence 2: he "
       "shot me with a gun",
       "False", "True", false},
  };

  pack.seed_assembler = [](const std::string& context, const std::string& raw) {
    auto definitions = text::parse_numbered_list(raw);
    if (definitions.size() < 2)
      throw ParseFailure(ParseErrorKind::empty_result,
                         "word '" + context + "' needs at least 2 definitions");
    std::map<std::string, std::string> payload{{"word", trim(context)},
                                               {"definitions", render_numbered(definitions)}};
    return std::vector<std::map<std::string, std::string>>{std::move(payload)};
  };
  pack.instance_assembler = [](const std::string& label, const InstanceSeed& seed,
                               const std::string& raw) {
    std::vector<std::string> sentences;
    if (fold_label(label) == "true") {
      // Reply: a chosen definition, then "Sentences:" with two sentences.
      try {
        auto rec = text::parse_fielded_record(raw, fielded_rule({"Sentences"}));
        sentences = text::parse_numbered_list(rec.get("Sentences"));
      } catch (const ParseFailure&) {
        auto items = text::parse_numbered_list(raw);
        if (items.size() < 2)
          throw ParseFailure(ParseErrorKind::bad_format, "expected two sentences");
        sentences = {items[items.size() - 2], items.back()};
      }
      if (sentences.size() < 2)
        throw ParseFailure(ParseErrorKind::bad_format, "expected two sentences");
      sentences = {sentences[sentences.size() - 2], sentences.back()};
    } else {
      // Reply: one sentence per definition; any two use different senses.
      auto items = text::parse_numbered_list(raw);
      if (items.size() < 2)
        throw ParseFailure(ParseErrorKind::bad_format,
                           "expected one sentence per definition, got " +
                               std::to_string(items.size()));
      sentences = {items[0], items[1]};
    }
    std::map<std::string, std::string> inputs{{"word", seed.payload.at("word")},
                                              {"sentence1", sentences[0]},
                                              {"sentence2", sentences[1]}};
    return std::vector<std::map<std::string, std::string>>{std::move(inputs)};
  };
  pack.validator = [](const GeneratedInstance& inst) {
    auto issues = require_nonempty(inst, {"word", "sentence1", "sentence2"});
    std::string word = field_or(inst, "word");
    if (!word.empty()) {
      if (!sentence_has_keyword(field_or(inst, "sentence1"), word))
        issues.push_back("sentence1 does not contain the keyword '" + word + "'");
      if (!sentence_has_keyword(field_or(inst, "sentence2"), word))
        issues.push_back("sentence2 does not contain the keyword '" + word + "'");
    }
    return issues;
  };
  pack.format_input = [](const GeneratedInstance& inst) {
    return labeled_block({{"Word", field_or(inst, "word")},
                          {"Sentence 1", field_or(inst, "sentence1")},
                          {"Sentence 2", field_or(inst, "sentence2")}});
  };
  return pack;
}

// ---------------- WSC ----------------

inline const std::vector<std::string>& wsc_pronoun_palette() {
  static const std::vector<std::string> palette = {"He/him", "She/her", "They/them"};
  return palette;
}

namespace detail {

struct PronounAnnotation {
  std::string pronoun;
  std::string referent;
};

// "[he=teacher]" markers; flattened() is the passage with each marker
// replaced by its pronoun.
struct AnnotatedPassage {
  std::string flattened;
  std::vector<PronounAnnotation> annotations;
};

inline AnnotatedPassage parse_annotated_passage(const std::string& text) {
  AnnotatedPassage out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '[') {
      std::size_t close = text.find(']', i + 1);
      std::size_t eq = text.find('=', i + 1);
      if (close != std::string::npos && eq != std::string::npos && eq < close) {
        std::string pronoun = trim(text.substr(i + 1, eq - i - 1));
        std::string referent = trim(text.substr(eq + 1, close - eq - 1));
        if (!pronoun.empty() && !referent.empty()) {
          out.annotations.push_back({pronoun, referent});
          out.flattened += pronoun;
          i = close + 1;
          continue;
        }
      }
    }
    out.flattened.push_back(text[i]);
    ++i;
  }
  return out;
}

}  // namespace detail

inline TaskPack make_wsc_pack() {
  using namespace detail;
  TaskPack pack;
  TaskSpec& spec = pack.spec;
  spec.task_id = "wsc";
  spec.description =
      "Coreference passages over a subject pair; True when the chosen pronoun refers to "
      "subject 1, False when it refers to subject 2.";
  spec.label_schema = {"True", "False"};
  spec.field_schema = {"text", "subject1", "subject2", "pronoun"};
  spec.balance_policy = BalancePolicy::balanced;

  spec.stages.push_back(stage(
      StageRole::contexts,
      "Generate a list of {N} domains or settings in which events can take place and where "
      "people can interact.",
      numbered_rule()));
  spec.stages.push_back(stage(
      StageRole::seeds,
      "Identify a pair of subjects (Subject 1, Subject 2) in the context of {DOMAIN}. For "
      "example, in the context of \"a classroom\", a pair of subjects could be (Subject 1: "
      "teacher, Subject 2: student), or (Subject 1: students, Subject 2: rivals). For the "
      "given domain, generate {N} such subject pairs.\n"
      "For 5 pairs, both subjects must be singular.\n"
      "For 5 pairs, both subjects must be plural.\n"
      "Both subjects must be humans or groups of humans.\n"
      "Output all {N} pairs in a numbered list.",
      numbered_rule()));
  spec.stages.push_back(stage(
      StageRole::instances,
      "For a given subject pair (Subject 1, Subject 2), generate 2 passages, S1 and S2. Each "
      "passage must be 2 sentences or fewer. You are also given the gender of both subjects.\n"
      "For every pronoun in the sentences, identify which subject is being referred to.\n"
      "Example:\n"
      "Input:\n"
      "Subject 1: Teacher, Subject 2: Student\n"
      "Pronouns: He/him\n"
      "Output:\n"
      "S1: The teacher was disappointed in the student because [he=teacher] had high hopes "
      "for [him=student].\n"
      "S2: The teacher and the student are not on good terms. [He=student] is very rebellious, "
      "and does not show up to classes.\n"
      "Input:\n"
      "Subject 1: {SUBJECT 1}, Subject 2: {SUBJECT 2}\n"
      "Pronouns: {PRONOUNS}\n"
      "Output:",
      fielded_rule({"S1", "S2"})));

  spec.correction.task_instructions =
      "The given input talks about 2 noun phrases (Subject 1 and Subject 2). You are given "
      "Subject 1 and a Pronoun that occurs in the input.\n"
      "Rules:\n"
      "1. If the pronoun refers to the noun phrase Subject 1, output LABEL: TRUE.\n"
      "2. If the pronoun refers to the noun phrase Subject 2, output LABEL: FALSE.";
  spec.correction.exemplars = {
      {"The city councilmen refused the demonstrators a permit because they feared violence. "
       "Subject 1: The city councilmen. Pronoun: They.",
       "True", "True", true},
      {"The scientist studied the lion because he was paid to do so. Subject 1: lion. "
       "Pronoun: he",
       "False", "True", false},
  };

  pack.seed_assembler = [](const std::string&, const std::string& raw) {
    auto items = text::parse_numbered_list(raw);
    std::vector<std::map<std::string, std::string>> seeds;
    for (const auto& item : items) {
      // Items arrive as "teacher, student" or "(Subject 1: teacher, Subject 2: student)".
      std::string cleaned;
      for (char c : item)
        if (c != '(' && c != ')') cleaned.push_back(c);
      for (const char* marker : {"Subject 1", "Subject 2", "Subject1", "Subject2"}) {
        std::size_t at;
        while ((at = text::detail::find_word(cleaned, marker, 0)) != std::string::npos) {
          std::size_t end = at + std::string(marker).size();
          while (end < cleaned.size() && (cleaned[end] == ' ' || cleaned[end] == ':')) ++end;
          cleaned.erase(at, end - at);
        }
      }
      std::size_t comma = cleaned.find(',');
      if (comma == std::string::npos) continue;
      std::string s1 = trim(cleaned.substr(0, comma));
      std::string s2 = trim(cleaned.substr(comma + 1));
      if (s1.empty() || s2.empty()) continue;
      const auto& palette = wsc_pronoun_palette();
      std::map<std::string, std::string> payload{
          {"subject_1", s1},
          {"subject_2", s2},
          {"pronouns", palette[seeds.size() % palette.size()]}};
      seeds.push_back(std::move(payload));
    }
    if (seeds.empty())
      throw ParseFailure(ParseErrorKind::empty_result, "no subject pairs found in reply");
    return seeds;
  };
  pack.instance_assembler = [](const std::string& label, const InstanceSeed& seed,
                               const std::string& raw) {
    auto rec = text::parse_fielded_record(raw, fielded_rule({"S1", "S2"}));
    const std::string& s1 = seed.payload.at("subject_1");
    const std::string& s2 = seed.payload.at("subject_2");
    bool want_true = fold_label(label) == "true";
    std::vector<std::map<std::string, std::string>> out;
    for (const auto& passage_text : {rec.get("S1"), rec.get("S2")}) {
      auto passage = parse_annotated_passage(passage_text);
      for (const auto& ann : passage.annotations) {
        bool refers_first = contains_word_fold(ann.referent, s1) || fold_label(ann.referent) == fold_label(s1);
        bool refers_second = contains_word_fold(ann.referent, s2) || fold_label(ann.referent) == fold_label(s2);
        if (refers_first == refers_second) continue;  // ambiguous or unknown referent
        // True asks about the actual referent; False asks about the other one.
        std::string queried = refers_first ? s1 : s2;
        std::string other = refers_first ? s2 : s1;
        std::map<std::string, std::string> inputs{
            {"text", trim(passage.flattened)},
            {"subject1", want_true ? queried : other},
            {"subject2", want_true ? other : queried},
            {"pronoun", ann.pronoun}};
        out.push_back(std::move(inputs));
      }
    }
    if (out.empty())
      throw ParseFailure(ParseErrorKind::empty_result,
                         "no usable pronoun annotations in the generated passages");
    return out;
  };
  pack.validator = [](const GeneratedInstance& inst) {
    auto issues = require_nonempty(inst, {"text", "subject1", "subject2", "pronoun"});
    const std::string text_field = field_or(inst, "text");
    for (const char* f : {"subject1", "subject2"}) {
      std::string subject = field_or(inst, f);
      if (!subject.empty() && !contains_fold(text_field, subject))
        issues.push_back(std::string("text does not contain ") + f + " '" + subject + "'");
    }
    std::string pronoun = field_or(inst, "pronoun");
    if (!pronoun.empty() && !contains_word_fold(text_field, pronoun))
      issues.push_back("text does not contain the pronoun '" + pronoun + "'");
    return issues;
  };
  pack.format_input = [](const GeneratedInstance& inst) {
    std::string text_field = trim(field_or(inst, "text"));
    return text_field + " Subject 1: " + field_or(inst, "subject1") +
           ". Pronoun: " + field_or(inst, "pronoun");
  };
  return pack;
}

// ---------------- BoolQ ----------------

inline TaskPack make_boolq_pack() {
  using namespace detail;
  TaskPack pack;
  TaskSpec& spec = pack.spec;
  spec.task_id = "boolq";
  spec.description =
      "Passage plus a yes/no question; True when the passage confirms the queried fact, "
      "False when it does not.";
  spec.label_schema = {"True", "False"};
  spec.field_schema = {"passage", "question"};
  spec.balance_policy = BalancePolicy::balanced;

  spec.stages.push_back(stage(StageRole::contexts,
                              "Generate a list of {N} domains to write an article in.",
                              numbered_rule()));
  spec.stages.push_back(stage(
      StageRole::seeds,
      "Generate {N} unique topics or titles in the category {DOMAIN}. For each topic, "
      "generate one short paragraph on the topic. Output the paragraphs in a numbered list.",
      numbered_rule()));
  spec.stages.push_back(stage(
      StageRole::instances,
      "You are given a passage. Generate a boolean query. The answer to this query, based on "
      "the passage, must be YES.\n"
      "Example:\n"
      "Passage: The Millennium Falcon, a legendary starship piloted by Han Solo and Chewbacca, "
      "has become an iconic symbol of rebellion and hope in the struggle against the "
      "oppressive Galactic Empire. May the Force be with you, as the epic adventures of Luke "
      "Skywalker, Princess Leia, and Darth Vader remind us that even in the darkest times, "
      "there is always a glimmer of light and a chance for redemption in the Star Wars "
      "universe.\n"
      "Query: Does Han Solo work with Chewbacca? Answer: YES, Han Solo and Chewbacca pilot "
      "the Falcon together.\n"
      "Similarly, generate a query for the following passage.\n"
      "Passage: {PASSAGE}\n"
      "Query:",
      fielded_rule({"Query"}, true), 1, "True"));
  spec.stages.push_back(stage(
      StageRole::instances,
      "You are given a passage. Generate a boolean query. The answer to this query, based on "
      "the passage, must be NO.\n"
      "Example:\n"
      "Passage: The Millennium Falcon, a legendary starship piloted by Han Solo and Chewbacca, "
      "has become an iconic symbol of rebellion and hope in the struggle against the "
      "oppressive Galactic Empire. May the Force be with you, as the epic adventures of Luke "
      "Skywalker, Princess Leia, and Darth Vader remind us that even in the darkest times, "
      "there is always a glimmer of light and a chance for redemption in the Star Wars "
      "universe.\n"
      "Query: Does Han Solo work alone? Answer: NO, Han Solo works with Chewbacca\n"
      "Similarly, generate a query for the following passage.\n"
      "Passage: {PASSAGE}\n"
      "Query:",
      fielded_rule({"Query"}, true), 1, "False"));

  spec.correction.task_instructions =
      "You are given a passage followed by a question. The questions ask for confirmation of "
      "a fact that may or not be present in the passage. If the passage explicitly confirms "
      "the fact being asked in the question, output TRUE as the answer to the question. If "
      "the passage offers no information that explicitly confirms the fact, and the fact has "
      "no logical basis or strong evidence in the passage, output FALSE as the answer to the "
      "question.";
  spec.correction.exemplars = {
      {"Passage: The Millennium Falcon, a legendary starship piloted by Han Solo and "
       "Chewbacca, has become an iconic symbol of rebellion and hope.\nQuestion: Does Han "
       "Solo work with Chewbacca?",
       "True", "True", true},
      {"Passage: The Millennium Falcon, a legendary starship piloted by Han Solo and "
       "Chewbacca, has become an iconic symbol of rebellion and hope.\nQuestion: Does Han "
       "Solo work alone?",
       "False", "True", false},
  };

  pack.seed_assembler = [](const std::string&, const std::string& raw) {
    return one_item_seeds("passage", raw);
  };
  pack.instance_assembler = [](const std::string&, const InstanceSeed& seed,
                               const std::string& raw) {
    std::string reply = trim(raw);
    // Reply shape: "<question>? Answer: YES, ..."; the justification after
    // "Answer:" never becomes part of the instance.
    std::size_t query_label = text::detail::find_word(reply, "Query", 0);
    if (query_label == 0) {
      std::size_t colon = reply.find(':');
      if (colon != std::string::npos) reply = trim(reply.substr(colon + 1));
    }
    std::size_t answer_at = text::detail::find_word(reply, "Answer", 0);
    std::string question =
        answer_at == std::string::npos ? reply : trim(reply.substr(0, answer_at));
    if (!question.empty() && question.back() == ':') question.pop_back();
    question = trim(question);
    if (question.empty())
      throw ParseFailure(ParseErrorKind::empty_result, "no query text in reply");
    std::map<std::string, std::string> inputs{{"passage", seed.payload.at("passage")},
                                              {"question", question}};
    return std::vector<std::map<std::string, std::string>>{std::move(inputs)};
  };
  pack.validator = [](const GeneratedInstance& inst) {
    return require_nonempty(inst, {"passage", "question"});
  };
  pack.format_input = [](const GeneratedInstance& inst) {
    return labeled_block({{"Passage", field_or(inst, "passage")},
                          {"Question", field_or(inst, "question")}});
  };
  return pack;
}

// ---------------- ReCoRD ----------------

inline TaskPack make_record_pack() {
  using namespace detail;
  TaskPack pack;
  TaskSpec& spec = pack.spec;
  spec.task_id = "record";
  spec.description =
      "Passage with a cloze-style query masking one entity as [X] and the entity that fills "
      "it; instances assert the answer fills the mask (label True).";
  spec.label_schema = {"True", "False"};
  spec.field_schema = {"passage", "query", "answer"};
  spec.balance_policy = BalancePolicy::explicit_counts;
  spec.explicit_counts = {{"True", 200}, {"False", 0}};

  spec.stages.push_back(stage(StageRole::contexts,
                              "Generate a list of {N} domains to write an article in.",
                              numbered_rule()));
  spec.stages.push_back(stage(
      StageRole::seeds,
      "Generate {N} unique topics or titles in the category {DOMAIN}. For each topic, "
      "generate one short paragraph on the topic. Output the paragraphs in a numbered list.",
      numbered_rule()));
  spec.stages.push_back(stage(
      StageRole::instances,
      "Example:\n"
      "As a spring breeze wafted into his trench French commander Georges Lamour saw something "
      "surreal drift his way - a yellow-green cloud. 'All my trenches are choked,' he cried "
      "into the field telephone to headquarters. 'I am falling myself!' Chlorine gas - carried "
      "by favourable winds over Flanders Fields from German positions - had been used for the "
      "first time. It was April 22, 1915. German forces launched first attack using gas on "
      "April 22, 1915. 150,000 tons of gas were used by German and Allied forces in WW1.\n"
      "Query: Had they been able to peer a bit further across no-man's land they would have "
      "seen how [X] troops had dug in, under cover of night, more than 5,000 gas cylinders "
      "with tubes pointing their way.\n"
      "Answer: German\n"
      "Instruction: Generate a complex sentence that fits the context of the given paragraph.\n"
      "The generated query must be a statement about the events in the paragraph. Put [X] in "
      "place of any one entity mention. The query must not contain any events mentioned in "
      "the paragraph. The answer must contain the entity mention that can replace [X].\n"
      "Paragraph: {PASSAGE}\n"
      "Query:",
      fielded_rule({"Query", "Answer"}, true)));

  spec.correction.task_instructions =
      "You are given a passage, followed by a query. The query contains [X] in place of any "
      "one entity mentioned. Output the entity that could logically replace [X] in the query.";
  spec.correction.exemplars = {
      {"Passage: German forces launched first attack using gas on April 22, 1915.\nQuery: The "
       "war records describe how [X] troops had dug in with gas cylinders.\nAnswer given: "
       "German",
       "German", "German", true},
      {"Passage: German forces launched first attack using gas on April 22, 1915.\nQuery: The "
       "war records describe how [X] troops had dug in with gas cylinders.\nAnswer given: "
       "French",
       "German", "French", false},
  };

  pack.seed_assembler = [](const std::string&, const std::string& raw) {
    return one_item_seeds("passage", raw);
  };
  pack.instance_assembler = [](const std::string&, const InstanceSeed& seed,
                               const std::string& raw) {
    auto rec = text::parse_fielded_record(raw, fielded_rule({"Query", "Answer"}, true));
    std::map<std::string, std::string> inputs{{"passage", seed.payload.at("passage")},
                                              {"query", rec.get("Query")},
                                              {"answer", rec.get("Answer")}};
    return std::vector<std::map<std::string, std::string>>{std::move(inputs)};
  };
  pack.validator = [](const GeneratedInstance& inst) {
    auto issues = require_nonempty(inst, {"passage", "query", "answer"});
    const std::string query = field_or(inst, "query");
    std::size_t masks = 0, at = 0;
    while ((at = query.find("[X]", at)) != std::string::npos) {
      ++masks;
      at += 3;
    }
    if (masks == 0) issues.push_back("query lacks the [X] mask");
    if (masks > 1) issues.push_back("query contains multiple [X] masks");
    const std::string answer = field_or(inst, "answer");
    if (!answer.empty() && field_or(inst, "passage").find(answer) == std::string::npos)
      issues.push_back("answer '" + answer + "' does not occur verbatim in the passage");
    return issues;
  };
  pack.format_input = [](const GeneratedInstance& inst) {
    return labeled_block({{"Passage", field_or(inst, "passage")},
                          {"Query", field_or(inst, "query")},
                          {"Answer given", field_or(inst, "answer")}});
  };
  return pack;
}

// ---------------- AX-g ----------------

inline TaskPack make_axg_pack() {
  using namespace detail;
  TaskPack pack;
  TaskSpec& spec = pack.spec;
  spec.task_id = "axg";
  spec.description =
      "Gender-balanced coreference entailment: a premise whose dependent clause refers to one "
      "subject, paired with a gender-agnostic hypothesis about that subject.";
  spec.label_schema = {"entailment", "not entailment"};
  spec.field_schema = {"premise", "hypothesis"};
  spec.balance_policy = BalancePolicy::balanced;

  spec.stages.push_back(stage(
      StageRole::contexts,
      "Generate a list of {N} domains or settings in which events can take place and where "
      "people can interact.",
      numbered_rule()));
  spec.stages.push_back(stage(
      StageRole::seeds,
      "Identify a pair of subjects (Subject 1, Subject 2) in the context of {DOMAIN}. For the "
      "given domain, generate {N} such subject pairs. For each pair, generate 4 sentences "
      "with the following specifications:\n"
      "Initial clause: A clause containing Subject 1 and Subject 2\n"
      "Sentence 1: Initial clause with a dependent clause containing a gendered pronoun. "
      "Dependent clause should refer to Subject 1, not Subject 2.\n"
      "Sentence 2: Completely identical to sentence 1 but with a different gendered pronoun\n"
      "Sentence 3: Initial clause with a dependent clause containing a gendered pronoun. "
      "Dependent clause should refer to Subject 2, not Subject 1.\n"
      "Sentence 4: Identical to sentence 3 but with a different gendered pronoun\n"
      "Sentences 1 to 4 must start with the same clause. Only one gendered pronoun must be "
      "present in the dependent clauses. All sentences should make logical sense.\n"
      "Output each pair as a numbered block of the form:\n"
      "Subject 1: ...\n"
      "Subject 2: ...\n"
      "Sentence 1: ...\n"
      "Sentence 2: ...\n"
      "Sentence 3: ...\n"
      "Sentence 4: ...",
      fielded_rule({"Subject 1", "Subject 2", "Sentence 1", "Sentence 2", "Sentence 3",
                    "Sentence 4"})));
  spec.stages.push_back(stage(
      StageRole::instances,
      "Given a sentence (independent clause + dependent clause), and the subject being "
      "referred to in its dependent clause: generate a sentence containing the subject, which "
      "logically follows the sentence. This generated sentence should have no gendered "
      "pronouns.\n"
      "Sentence: {SENTENCE}\n"
      "Subject: {SUBJECT}\n"
      "Hypothesis:",
      fielded_rule({"Hypothesis"}, true), 1, "entailment"));
  spec.stages.push_back(stage(
      StageRole::instances,
      "Given a sentence (independent clause + dependent clause), and the subject being "
      "referred to in its dependent clause: generate a sentence containing the subject, which "
      "does not logically follow the sentence. This generated sentence should have no "
      "gendered pronouns.\n"
      "Sentence: {SENTENCE}\n"
      "Subject: {SUBJECT}\n"
      "Hypothesis:",
      fielded_rule({"Hypothesis"}, true), 1, "not entailment"));

  spec.correction.task_instructions =
      "You are given a premise and a hypothesis. If the hypothesis logically follows from the "
      "premise, output entailment. If the hypothesis cannot be logically derived from the "
      "information in the premise, output not entailment.";
  spec.correction.exemplars = {
      {"Premise: The teacher praised the student because he improved.\nHypothesis: The "
       "student improved.",
       "entailment", "entailment", true},
      {"Premise: The teacher praised the student because he improved.\nHypothesis: The "
       "student quit the class.",
       "not entailment", "entailment", false},
  };

  pack.seed_assembler = [](const std::string&, const std::string& raw) {
    ParseRule rule = fielded_rule(
        {"Subject 1", "Subject 2", "Sentence 1", "Sentence 2", "Sentence 3", "Sentence 4"});
    std::vector<std::map<std::string, std::string>> seeds;
    for (const auto& rec : text::parse_fielded_records(raw, rule)) {
      seeds.push_back({{"subject", rec.get("Subject 1")}, {"sentence", rec.get("Sentence 1")}});
      seeds.push_back({{"subject", rec.get("Subject 2")}, {"sentence", rec.get("Sentence 3")}});
    }
    return seeds;
  };
  pack.instance_assembler = [](const std::string&, const InstanceSeed& seed,
                               const std::string& raw) {
    auto rec = text::parse_fielded_record(raw, fielded_rule({"Hypothesis"}, true));
    std::map<std::string, std::string> inputs{{"premise", seed.payload.at("sentence")},
                                              {"hypothesis", rec.get("Hypothesis")}};
    return std::vector<std::map<std::string, std::string>>{std::move(inputs)};
  };
  pack.validator = [](const GeneratedInstance& inst) {
    return require_nonempty(inst, {"premise", "hypothesis"});
  };
  pack.format_input = [](const GeneratedInstance& inst) {
    return labeled_block({{"Premise", field_or(inst, "premise")},
                          {"Hypothesis", field_or(inst, "hypothesis")}});
  };
  return pack;
}

// ---------------- MultiRC ----------------

inline TaskPack make_multirc_pack() {
  using namespace detail;
  TaskPack pack;
  TaskSpec& spec = pack.spec;
  spec.task_id = "multirc";
  spec.description =
      "Multi-sentence reading comprehension: a paragraph, a question spanning several "
      "sentences, candidate options, and the subset forming the correct answer.";
  spec.label_schema = {"True", "False"};
  spec.field_schema = {"paragraph", "question", "options", "answers"};
  spec.balance_policy = BalancePolicy::explicit_counts;
  spec.explicit_counts = {{"True", 350}, {"False", 0}};

  pack.fixed_contexts = {
      "News",
      "Wikipedia",
      "History and anthropology",
      "Society, law, and justice",
      "Elementary school science textbooks",
      "9/11 reports",
      "Fiction - literature or movie plots",
      "art",
      "computer science",
      "biological processes",
      "physics",
      "chemistry",
      "linguistics",
      "psychiatry and psychology",
      "supernatural phenomena",
  };

  spec.stages.push_back(stage(
      StageRole::seeds,
      "Generate {N} unique topics or titles in the category {CATEGORY}. For each topic, "
      "generate one short paragraph of at least four sentences on the topic. Output the "
      "paragraphs in a numbered list.",
      numbered_rule()));
  spec.stages.push_back(stage(
      StageRole::instances,
      "Given a paragraph, frame a question that requires information from multiple sentences "
      "of the paragraph to be answered correctly. Then, generate a set of options. The "
      "correct answer may be a combination of one, some, or all options. Also include options "
      "that do not answer the above question. Finally, output the combination of options that "
      "form the correct answer.\n"
      "Use the form:\n"
      "Question: ...\n"
      "Options:\n"
      "1. ...\n"
      "2. ...\n"
      "Answer: the numbers of the correct options\n"
      "Paragraph: {PARAGRAPH}",
      fielded_rule({"Question", "Options", "Answer"})));

  spec.correction.task_instructions =
      "You are given a passage followed by a question and a list of options. Based on the "
      "information in the passage, output all the options that can answer the question. The "
      "output must not include options that do not answer the question. The output must not "
      "lack any options that answer the question.";
  spec.correction.exemplars = {
      {"Paragraph: The river flooded in spring. Farms along the bank lost their seedlings. "
       "The town organized volunteers, and by summer the fields were replanted.\nQuestion: "
       "What happened to the farms after the flood?\nOptions:\n1. They lost seedlings\n2. "
       "They were abandoned\n3. Their fields were replanted\nAnswer given: 1, 3",
       "1, 3", "1, 3", true},
      {"Paragraph: The river flooded in spring. Farms along the bank lost their seedlings. "
       "The town organized volunteers, and by summer the fields were replanted.\nQuestion: "
       "What happened to the farms after the flood?\nOptions:\n1. They lost seedlings\n2. "
       "They were abandoned\n3. Their fields were replanted\nAnswer given: 2",
       "1, 3", "2", false},
  };

  pack.seed_assembler = [](const std::string&, const std::string& raw) {
    return one_item_seeds("paragraph", raw);
  };
  pack.instance_assembler = [](const std::string&, const InstanceSeed& seed,
                               const std::string& raw) {
    auto rec = text::parse_fielded_record(raw, fielded_rule({"Question", "Options", "Answer"}));
    auto options = text::parse_numbered_list(rec.get("Options"));
    if (options.size() < 2)
      throw ParseFailure(ParseErrorKind::bad_format, "need at least 2 options");

    // Answer text references options by number ("1, 3") or by content.
    std::string answer_text = rec.get("Answer");
    std::vector<std::string> answers;
    std::string digits;
    auto flush = [&] {
      if (digits.empty()) return;
      std::size_t idx = static_cast<std::size_t>(std::stoul(digits));
      if (idx >= 1 && idx <= options.size()) {
        const std::string& opt = options[idx - 1];
        bool dup = false;
        for (const auto& a : answers) dup = dup || a == opt;
        if (!dup) answers.push_back(opt);
      }
      digits.clear();
    };
    for (char c : answer_text) {
      if (std::isdigit(static_cast<unsigned char>(c)))
        digits.push_back(c);
      else
        flush();
    }
    flush();
    if (answers.empty()) {
      for (const auto& opt : options)
        if (contains_fold(answer_text, opt)) answers.push_back(opt);
    }
    if (answers.empty())
      throw ParseFailure(ParseErrorKind::bad_format,
                         "answer does not reference any option: " + answer_text);

    auto join = [](const std::vector<std::string>& xs) {
      std::string out;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += "\n";
        out += xs[i];
      }
      return out;
    };
    std::map<std::string, std::string> inputs{{"paragraph", seed.payload.at("paragraph")},
                                              {"question", rec.get("Question")},
                                              {"options", join(options)},
                                              {"answers", join(answers)}};
    return std::vector<std::map<std::string, std::string>>{std::move(inputs)};
  };
  pack.validator = [](const GeneratedInstance& inst) {
    auto issues = require_nonempty(inst, {"paragraph", "question", "options", "answers"});
    auto split_lines = [](const std::string& s) {
      std::vector<std::string> out;
      std::size_t pos = 0;
      while (pos <= s.size()) {
        std::size_t end = s.find('\n', pos);
        if (end == std::string::npos) end = s.size();
        std::string line = trim(s.substr(pos, end - pos));
        if (!line.empty()) out.push_back(line);
        pos = end + 1;
      }
      return out;
    };
    auto options = split_lines(field_or(inst, "options"));
    auto answers = split_lines(field_or(inst, "answers"));
    if (options.size() < 2) issues.push_back("fewer than 2 options");
    for (const auto& a : answers) {
      bool found = false;
      for (const auto& o : options) found = found || o == a;
      if (!found) issues.push_back("answer '" + a + "' is not one of the options");
    }
    return issues;
  };
  pack.format_input = [](const GeneratedInstance& inst) {
    return labeled_block({{"Paragraph", field_or(inst, "paragraph")},
                          {"Question", field_or(inst, "question")},
                          {"Options", "\n" + field_or(inst, "options")},
                          {"Answer given", field_or(inst, "answers")}});
  };
  return pack;
}

// ---------------- registry ----------------

inline const std::vector<std::string>& builtin_task_ids() {
  static const std::vector<std::string> ids = {"cb",    "copa",   "rte",  "wic", "wsc",
                                               "boolq", "record", "axg",  "multirc"};
  return ids;
}

inline TaskPack builtin_task(const std::string& task_id) {
  std::string id = fold_label(task_id);
  if (id == "cb") return make_cb_pack();
  if (id == "copa") return make_copa_pack();
  if (id == "rte") return make_rte_pack();
  if (id == "wic") return make_wic_pack();
  if (id == "wsc") return make_wsc_pack();
  if (id == "boolq") return make_boolq_pack();
  if (id == "record") return make_record_pack();
  if (id == "axg") return make_axg_pack();
  if (id == "multirc") return make_multirc_pack();
  throw ValidationError("unknown task '" + task_id + "'; built-in tasks: cb, copa, rte, wic, "
                        "wsc, boolq, record, axg, multirc");
}

// Declarative pack for specs loaded from task-spec files: numbered seed
// items, parsed fields mapped through parse_field_map / seed_field_map,
// nonempty-field validation, and generic input formatting.
inline TaskPack make_generic_pack(TaskSpec spec) {
  TaskPack pack;
  pack.spec = spec;
  auto s_ptr = std::make_shared<TaskSpec>(std::move(spec));

  pack.seed_assembler = [](const std::string&, const std::string& raw) {
    return detail::one_item_seeds("seed", raw);
  };
  pack.instance_assembler = [s_ptr](const std::string& label, const InstanceSeed& seed,
                                    const std::string& raw) {
    const TaskSpec& s = *s_ptr;
    const PromptStage* st = s.instance_stage_for(label);
    if (!st) throw ValidationError("no instances stage for label '" + label + "'");
    std::vector<std::map<std::string, std::string>> out;
    auto target_field = [&](const std::string& parsed_label) -> std::string {
      auto it = s.parse_field_map.find(fold_label(parsed_label));
      if (it != s.parse_field_map.end()) return it->second;
      for (const auto& f : s.field_schema)
        if (fold_label(f) == fold_label(parsed_label)) return f;
      return "";
    };
    std::vector<text::ParsedRecord> records;
    if (st->parser.kind == ParseKind::fielded_record) {
      records = text::parse_fielded_records(raw, st->parser);
    } else {
      for (const auto& item : text::parse_numbered_list(raw)) {
        text::ParsedRecord rec;
        rec.fields.emplace_back("item", item);
        records.push_back(std::move(rec));
      }
    }
    for (const auto& rec : records) {
      std::map<std::string, std::string> inputs;
      for (const auto& [k, v] : rec.fields) {
        std::string f = k == "item" && !s.field_schema.empty() && s.parse_field_map.empty()
                            ? s.field_schema.back()
                            : target_field(k);
        if (!f.empty()) inputs[f] = v;
      }
      for (const auto& [payload_key, field] : s.seed_field_map) {
        auto it = seed.payload.find(payload_key);
        if (it != seed.payload.end()) inputs[field] = it->second;
      }
      out.push_back(std::move(inputs));
    }
    return out;
  };
  pack.validator = [s_ptr](const GeneratedInstance& inst) {
    return detail::require_nonempty(inst, s_ptr->field_schema);
  };
  pack.format_input = [s_ptr](const GeneratedInstance& inst) {
    std::string out;
    for (const auto& f : s_ptr->field_schema) {
      if (!out.empty()) out += "\n";
      std::string name = f;
      if (!name.empty()) name[0] = static_cast<char>(std::toupper(name[0]));
      out += name + ": " + detail::field_or(inst, f);
    }
    return out;
  };
  return pack;
}

}  // namespace targen::packs
