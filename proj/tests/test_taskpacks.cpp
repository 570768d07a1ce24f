#include <algorithm>

#include "catch2/catch_amalgamated.hpp"
#include "targen/taskpacks.hpp"

using namespace targen;
using namespace targen::packs;

namespace {

GeneratedInstance instance_of(const TaskPack& pack,
                              std::map<std::string, std::string> inputs,
                              const std::string& label) {
  return make_instance(pack.spec, pack.spec.task_id + "-000001", std::move(inputs), label, {});
}

InstanceSeed seed_with(std::map<std::string, std::string> payload) {
  InstanceSeed seed;
  seed.seed_id = "seed-0";
  seed.payload = std::move(payload);
  return seed;
}

}  // namespace

TEST_CASE("every built-in task spec validates cleanly", "[taskpacks]") {
  REQUIRE(builtin_task_ids().size() == 9);
  for (const auto& id : builtin_task_ids()) {
    auto pack = builtin_task(id);
    CAPTURE(id);
    REQUIRE(pack.spec.task_id == id);
    auto issues = validate_task_spec(pack.spec);
    for (const auto& i : issues) UNSCOPED_INFO(i);
    REQUIRE(issues.empty());
    REQUIRE(pack.instance_assembler);
    REQUIRE(pack.validator);
    REQUIRE(pack.format_input);
  }
}

TEST_CASE("unknown task ids are rejected with the known list", "[taskpacks]") {
  try {
    builtin_task("nope");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    REQUIRE(std::string(e.what()).find("unknown task 'nope'") != std::string::npos);
  }
}

TEST_CASE("cb schema and explicit counts", "[taskpacks]") {
  auto pack = builtin_task("cb");
  std::vector<std::string> expected = {"entailment", "contradiction", "neutral"};
  REQUIRE(pack.spec.label_schema.labels == expected);
  REQUIRE(pack.spec.balance_policy == BalancePolicy::explicit_counts);
  REQUIRE(pack.spec.explicit_counts.at("contradiction") == 119);
  REQUIRE(pack.spec.explicit_counts.at("entailment") == 115);
  REQUIRE(pack.spec.explicit_counts.at("neutral") == 16);
}

TEST_CASE("cb assembler splits batched sentence pairs", "[taskpacks]") {
  auto pack = builtin_task("cb");
  auto seed = seed_with({{"domain", "music"}});
  std::string raw =
      "Sentence 1: The singer was very nervous.\n"
      "Sentence 2: The singer saw critics in the front row.\n"
      "Sentence 1: The band played late.\n"
      "Sentence 2: The venue stayed open past midnight.";
  auto batches = pack.instance_assembler("entailment", seed, raw);
  REQUIRE(batches.size() == 2);
  REQUIRE(batches[0].at("premise") == "The singer was very nervous.");
  REQUIRE(batches[0].at("hypothesis") == "The singer saw critics in the front row.");
  REQUIRE(batches[1].at("premise") == "The band played late.");

  auto inst = instance_of(pack, batches[0], "entailment");
  REQUIRE(validate_instance(pack, inst).empty());
}

TEST_CASE("copa affixes the relation query and swaps choices by label", "[taskpacks]") {
  auto pack = builtin_task("copa");
  REQUIRE(pack.spec.field_schema ==
          std::vector<std::string>{"premise", "choice1", "choice2"});
  REQUIRE(pack.spec.balance_policy == BalancePolicy::alternating);

  auto cause_seed = seed_with({{"sentence", "I cast a long shadow."}, {"relation", "CAUSE"}});
  std::string raw =
      "Hypothesis 1: The sun was low in the sky.\n"
      "Hypothesis 2: The grass was tall.";

  auto first = pack.instance_assembler("Choice 1", cause_seed, raw);
  REQUIRE(first.size() == 1);
  REQUIRE(first[0].at("choice1") == "The sun was low in the sky.");
  REQUIRE(first[0].at("choice2") == "The grass was tall.");

  auto second = pack.instance_assembler("Choice 2", cause_seed, raw);
  REQUIRE(second[0].at("choice1") == "The grass was tall.");
  REQUIRE(second[0].at("choice2") == "The sun was low in the sky.");

  auto inst = instance_of(pack, first[0], "Choice 1");
  REQUIRE(pack.post_processors.size() == 1);
  REQUIRE(pack.post_processors[0].first == "copa_affix_query");
  pack.post_processors[0].second(inst, cause_seed);
  REQUIRE(inst.inputs.at("premise") == "I cast a long shadow. What was the CAUSE of this?");
  REQUIRE(validate_instance(pack, inst).empty());

  auto result_seed = seed_with({{"sentence", "I fell down the stairs."}, {"relation", "RESULT"}});
  std::string raw2 = "Hypothesis 1: I injured myself.\nHypothesis 2: My mother bought a new car.";
  auto third = pack.instance_assembler("Choice 1", result_seed, raw2);
  auto inst2 = instance_of(pack, third[0], "Choice 1");
  pack.post_processors[0].second(inst2, result_seed);
  REQUIRE(inst2.inputs.at("premise") ==
          "I fell down the stairs. What was the RESULT of this?");
  REQUIRE(validate_instance(pack, inst2).empty());
}

TEST_CASE("copa seeds alternate cause and result with exemplar payloads", "[taskpacks]") {
  auto pack = builtin_task("copa");
  auto seeds = pack.seed_assembler(
      "a kitchen", "1. The kettle whistled.\n2. The bread burned.\n3. A plate shattered.");
  REQUIRE(seeds.size() == 3);
  REQUIRE(seeds[0].at("relation") == "CAUSE");
  REQUIRE(seeds[1].at("relation") == "RESULT");
  REQUIRE(seeds[2].at("relation") == "CAUSE");
  REQUIRE(seeds[0].at("sentence") == "The kettle whistled.");
  REQUIRE(seeds[0].at("example_sentence") == "I cast a long shadow.");
  REQUIRE(seeds[1].at("example_sentence") == "I fell down the stairs.");
  REQUIRE(seeds[1].at("example_hypothesis_1") == "I injured myself.");
}

TEST_CASE("copa rejects identical or empty choices", "[taskpacks]") {
  auto pack = builtin_task("copa");
  auto same = instance_of(
      pack,
      {{"premise", "It rained. What was the RESULT of this?"},
       {"choice1", "The ground got wet."},
       {"choice2", "The ground got wet."}},
      "Choice 1");
  auto issues = validate_instance(pack, same);
  REQUIRE(issues.size() == 1);
  REQUIRE(issues[0].find("identical") != std::string::npos);

  auto blank = instance_of(
      pack, {{"premise", "It rained."}, {"choice1", ""}, {"choice2", "x"}}, "Choice 2");
  issues = validate_instance(pack, blank);
  REQUIRE(issues.size() == 1);
  REQUIRE(issues[0].find("choice1") != std::string::npos);
}

TEST_CASE("rte hypothesis parses with or without its marker", "[taskpacks]") {
  auto pack = builtin_task("rte");
  REQUIRE(pack.spec.label_schema.labels ==
          std::vector<std::string>{"entailment", "not entailment"});
  auto seed = seed_with({{"sentence", "The bridge opened in 1932 after eight years of work."}});

  for (const char* raw : {"Hypothesis: The bridge took eight years to build.",
                          "The bridge took eight years to build."}) {
    auto got = pack.instance_assembler("entailment", seed, raw);
    REQUIRE(got.size() == 1);
    REQUIRE(got[0].at("premise") == "The bridge opened in 1932 after eight years of work.");
    REQUIRE(got[0].at("hypothesis") == "The bridge took eight years to build.");
    auto inst = instance_of(pack, got[0], "entailment");
    REQUIRE(validate_instance(pack, inst).empty());
  }
}

TEST_CASE("wic field schema and seed definitions", "[taskpacks]") {
  auto pack = builtin_task("wic");
  REQUIRE(pack.spec.field_schema ==
          std::vector<std::string>{"word", "sentence1", "sentence2"});

  auto seeds = pack.seed_assembler(
      "key",
      "1. a piece of shaped metal used to open or close a lock\n"
      "2. a button or lever on a keyboard or musical instrument\n"
      "3. a crucial or central element");
  REQUIRE(seeds.size() == 1);
  REQUIRE(seeds[0].at("word") == "key");
  REQUIRE(seeds[0].at("definitions") ==
          "1. a piece of shaped metal used to open or close a lock\n"
          "2. a button or lever on a keyboard or musical instrument\n"
          "3. a crucial or central element");

  REQUIRE_THROWS_AS(pack.seed_assembler("flat", "1. level and smooth"), ParseFailure);
}

TEST_CASE("wic true and false assemblers pick sentences by sense", "[taskpacks]") {
  auto pack = builtin_task("wic");
  auto seed = seed_with({{"word", "key"},
                         {"definitions", "1. shaped metal for a lock\n2. a crucial element"}});

  std::string true_raw =
      "1. a piece of shaped metal used to open or close a lock\n"
      "Sentences:\n"
      "1. I lost my key yesterday\n"
      "2. He shouldn't steal people's keys.";
  auto got = pack.instance_assembler("True", seed, true_raw);
  REQUIRE(got.size() == 1);
  REQUIRE(got[0].at("sentence1") == "I lost my key yesterday");
  REQUIRE(got[0].at("sentence2") == "He shouldn't steal people's keys.");
  auto inst = instance_of(pack, got[0], "True");
  REQUIRE(validate_instance(pack, inst).empty());

  std::string false_raw =
      "1. I lost my key yesterday\n"
      "2. This key on the piano is out of tune.\n"
      "3. The key to victory is planning ahead.";
  got = pack.instance_assembler("False", seed, false_raw);
  REQUIRE(got[0].at("sentence1") == "I lost my key yesterday");
  REQUIRE(got[0].at("sentence2") == "This key on the piano is out of tune.");
  auto inst2 = instance_of(pack, got[0], "False");
  REQUIRE(validate_instance(pack, inst2).empty());
}

TEST_CASE("wic keyword check tolerates inflection but not stem changes", "[taskpacks]") {
  auto pack = builtin_task("wic");
  auto good = instance_of(pack,
                          {{"word", "shoot"},
                           {"sentence1", "They are shooting a documentary."},
                           {"sentence2", "The shoot was suspended."}},
                          "True");
  REQUIRE(validate_instance(pack, good).empty());

  auto bad = instance_of(pack,
                         {{"word", "shoot"},
                          {"sentence1", "He shot the wedding with a camera."},
                          {"sentence2", "The shoot was suspended."}},
                         "False");
  auto issues = validate_instance(pack, bad);
  REQUIRE(issues.size() == 1);
  REQUIRE(issues[0].find("sentence1") != std::string::npos);
  REQUIRE(issues[0].find("shoot") != std::string::npos);
}

TEST_CASE("wsc seeds parse subject pairs in several shapes", "[taskpacks]") {
  auto pack = builtin_task("wsc");
  auto seeds = pack.seed_assembler(
      "a classroom",
      "1. (Subject 1: teacher, Subject 2: student)\n"
      "2. students, rivals\n"
      "3. Subject1: principal, Subject2: janitor");
  REQUIRE(seeds.size() == 3);
  REQUIRE(seeds[0].at("subject_1") == "teacher");
  REQUIRE(seeds[0].at("subject_2") == "student");
  REQUIRE(seeds[1].at("subject_1") == "students");
  REQUIRE(seeds[1].at("subject_2") == "rivals");
  REQUIRE(seeds[2].at("subject_1") == "principal");
  REQUIRE(seeds[2].at("subject_2") == "janitor");
  REQUIRE(seeds[0].at("pronouns") == "He/him");
  REQUIRE(seeds[1].at("pronouns") == "She/her");
  REQUIRE(seeds[2].at("pronouns") == "They/them");

  REQUIRE_THROWS_AS(pack.seed_assembler("x", "1. no pair here"), ParseFailure);
}

TEST_CASE("wsc assembler reads pronoun annotations per requested label", "[taskpacks]") {
  auto pack = builtin_task("wsc");
  auto seed = seed_with({{"subject_1", "teacher"},
                         {"subject_2", "student"},
                         {"pronouns", "He/him"}});
  std::string raw =
      "S1: The teacher was disappointed in the student because [he=teacher] had high hopes "
      "for [him=student].\n"
      "S2: The teacher and the student are not on good terms. [He=student] is very "
      "rebellious, and does not show up to classes.";

  auto truths = pack.instance_assembler("True", seed, raw);
  REQUIRE(truths.size() == 3);
  REQUIRE(truths[0].at("text") ==
          "The teacher was disappointed in the student because he had high hopes for him.");
  REQUIRE(truths[0].at("subject1") == "teacher");
  REQUIRE(truths[0].at("subject2") == "student");
  REQUIRE(truths[0].at("pronoun") == "he");
  REQUIRE(truths[1].at("subject1") == "student");
  REQUIRE(truths[1].at("pronoun") == "him");
  REQUIRE(truths[2].at("subject1") == "student");
  REQUIRE(truths[2].at("pronoun") == "He");

  auto falses = pack.instance_assembler("False", seed, raw);
  REQUIRE(falses.size() == 3);
  REQUIRE(falses[0].at("subject1") == "student");
  REQUIRE(falses[0].at("subject2") == "teacher");
  REQUIRE(falses[0].at("pronoun") == "he");

  for (auto& inputs : truths) {
    auto inst = instance_of(pack, inputs, "True");
    REQUIRE(validate_instance(pack, inst).empty());
  }
  for (auto& inputs : falses) {
    auto inst = instance_of(pack, inputs, "False");
    REQUIRE(validate_instance(pack, inst).empty());
  }
}

TEST_CASE("wsc validator needs both phrases and the pronoun in the text", "[taskpacks]") {
  auto pack = builtin_task("wsc");
  auto good = instance_of(
      pack,
      {{"text",
        "The city councilmen refused the demonstrators a permit because they feared "
        "violence."},
       {"subject1", "The city councilmen"},
       {"subject2", "demonstrators"},
       {"pronoun", "They"}},
      "True");
  REQUIRE(validate_instance(pack, good).empty());

  auto missing_subject = instance_of(pack,
                                     {{"text", "The crowd cheered because they won."},
                                      {"subject1", "the players"},
                                      {"subject2", "the crowd"},
                                      {"pronoun", "they"}},
                                     "True");
  auto issues = validate_instance(pack, missing_subject);
  REQUIRE(issues.size() == 1);
  REQUIRE(issues[0].find("subject1") != std::string::npos);

  auto missing_pronoun = instance_of(pack,
                                     {{"text", "The teacher praised the student."},
                                      {"subject1", "teacher"},
                                      {"subject2", "student"},
                                      {"pronoun", "she"}},
                                     "False");
  issues = validate_instance(pack, missing_pronoun);
  REQUIRE(issues.size() == 1);
  REQUIRE(issues[0].find("pronoun") != std::string::npos);
}

TEST_CASE("boolq strips the answer tail from generated queries", "[taskpacks]") {
  auto pack = builtin_task("boolq");
  std::string falcon =
      "The Millennium Falcon, a legendary starship piloted by Han Solo and Chewbacca, has "
      "become an iconic symbol of rebellion and hope in the struggle against the oppressive "
      "Galactic Empire.";
  auto seed = seed_with({{"passage", falcon}});

  auto got = pack.instance_assembler(
      "True", seed,
      "Does Han Solo work with Chewbacca? Answer: YES, Han Solo and Chewbacca pilot the "
      "Falcon together.");
  REQUIRE(got.size() == 1);
  REQUIRE(got[0].at("passage") == falcon);
  REQUIRE(got[0].at("question") == "Does Han Solo work with Chewbacca?");
  auto inst = instance_of(pack, got[0], "True");
  REQUIRE(validate_instance(pack, inst).empty());

  got = pack.instance_assembler("False", seed,
                                "Query: Does Han Solo work alone?\nAnswer: NO, Han Solo works "
                                "with Chewbacca");
  REQUIRE(got[0].at("question") == "Does Han Solo work alone?");

  REQUIRE_THROWS_AS(pack.instance_assembler("True", seed, "Answer: YES"), ParseFailure);
}

TEST_CASE("record masks exactly one entity and keeps the answer verbatim", "[taskpacks]") {
  auto pack = builtin_task("record");
  std::string passage =
      "Chlorine gas had been used for the first time. It was April 22, 1915. German forces "
      "launched first attack using gas on April 22, 1915. 150,000 tons of gas were used by "
      "German and Allied forces in WW1.";
  std::string query =
      "Had they been able to peer a bit further across no-man's land they would have seen how "
      "[X] troops had dug in, under cover of night, more than 5,000 gas cylinders with tubes "
      "pointing their way.";

  auto good = instance_of(
      pack, {{"passage", passage}, {"query", query}, {"answer", "German"}}, "True");
  REQUIRE(validate_instance(pack, good).empty());

  auto two_masks = instance_of(
      pack,
      {{"passage", passage},
       {"query", "Both [X] and [X] forces deployed cylinders."},
       {"answer", "German"}},
      "True");
  auto issues = validate_instance(pack, two_masks);
  REQUIRE(issues.size() == 1);
  REQUIRE(issues[0].find("multiple [X] masks") != std::string::npos);

  auto no_mask = instance_of(
      pack, {{"passage", passage}, {"query", "The troops dug in."}, {"answer", "German"}},
      "True");
  issues = validate_instance(pack, no_mask);
  REQUIRE(issues.size() == 1);
  REQUIRE(issues[0].find("lacks the [X] mask") != std::string::npos);

  // Case-sensitive: "german" never appears verbatim in the passage.
  auto wrong_case = instance_of(
      pack, {{"passage", passage}, {"query", query}, {"answer", "german"}}, "True");
  issues = validate_instance(pack, wrong_case);
  REQUIRE(issues.size() == 1);
  REQUIRE(issues[0].find("verbatim") != std::string::npos);
}

TEST_CASE("record assembler reads query and answer from the reply", "[taskpacks]") {
  auto pack = builtin_task("record");
  auto seed = seed_with({{"passage", "German forces launched first attack using gas."}});
  auto got = pack.instance_assembler(
      "True", seed,
      "The records describe how [X] troops had dug in with gas cylinders.\nAnswer: German");
  REQUIRE(got.size() == 1);
  REQUIRE(got[0].at("query") ==
          "The records describe how [X] troops had dug in with gas cylinders.");
  REQUIRE(got[0].at("answer") == "German");
}

TEST_CASE("axg seeds yield one seed per referenced subject", "[taskpacks]") {
  auto pack = builtin_task("axg");
  std::string raw =
      "Subject 1: taxpayer\n"
      "Subject 2: auditor\n"
      "Sentence 1: The taxpayer met the auditor because he had filed late.\n"
      "Sentence 2: The taxpayer met the auditor because she had filed late.\n"
      "Sentence 3: The taxpayer met the auditor because he requested the meeting.\n"
      "Sentence 4: The taxpayer met the auditor because she requested the meeting.";
  auto seeds = pack.seed_assembler("an office", raw);
  REQUIRE(seeds.size() == 2);
  REQUIRE(seeds[0].at("subject") == "taxpayer");
  REQUIRE(seeds[0].at("sentence") ==
          "The taxpayer met the auditor because he had filed late.");
  REQUIRE(seeds[1].at("subject") == "auditor");
  REQUIRE(seeds[1].at("sentence") ==
          "The taxpayer met the auditor because he requested the meeting.");

  auto got = pack.instance_assembler("entailment", seed_with(seeds[0]),
                                     "Hypothesis: The taxpayer filed late.");
  REQUIRE(got[0].at("premise") == "The taxpayer met the auditor because he had filed late.");
  REQUIRE(got[0].at("hypothesis") == "The taxpayer filed late.");
  auto inst = instance_of(pack, got[0], "entailment");
  REQUIRE(validate_instance(pack, inst).empty());
}

TEST_CASE("multirc options and answers stay consistent", "[taskpacks]") {
  auto pack = builtin_task("multirc");
  REQUIRE(pack.fixed_contexts.size() == 15);
  REQUIRE(pack.fixed_contexts[0] == "News");
  REQUIRE(std::find(pack.fixed_contexts.begin(), pack.fixed_contexts.end(),
                    "Elementary school science textbooks") != pack.fixed_contexts.end());

  auto seed = seed_with({{"paragraph",
                          "The river flooded in spring. Farms along the bank lost their "
                          "seedlings. The town organized volunteers, and by summer the fields "
                          "were replanted."}});
  std::string raw =
      "Question: What happened to the farms after the flood?\n"
      "Options:\n"
      "1. They lost seedlings\n"
      "2. They were abandoned\n"
      "3. Their fields were replanted\n"
      "Answer: 1, 3";
  auto got = pack.instance_assembler("True", seed, raw);
  REQUIRE(got.size() == 1);
  REQUIRE(got[0].at("options") ==
          "They lost seedlings\nThey were abandoned\nTheir fields were replanted");
  REQUIRE(got[0].at("answers") == "They lost seedlings\nTheir fields were replanted");
  auto inst = instance_of(pack, got[0], "True");
  REQUIRE(validate_instance(pack, inst).empty());

  auto stray = instance_of(pack,
                           {{"paragraph", "p"},
                            {"question", "q"},
                            {"options", "a\nb"},
                            {"answers", "c"}},
                           "True");
  auto issues = validate_instance(pack, stray);
  REQUIRE(issues.size() == 1);
  REQUIRE(issues[0].find("not one of the options") != std::string::npos);

  auto thin = instance_of(
      pack,
      {{"paragraph", "p"}, {"question", "q"}, {"options", "a"}, {"answers", "a"}}, "True");
  issues = validate_instance(pack, thin);
  REQUIRE(issues.size() == 1);
  REQUIRE(issues[0].find("fewer than 2 options") != std::string::npos);
}

TEST_CASE("multirc answers referenced by content instead of number", "[taskpacks]") {
  auto pack = builtin_task("multirc");
  auto seed = seed_with({{"paragraph", "Some paragraph."}});
  std::string raw =
      "Question: Which staples were stocked?\n"
      "Options:\n"
      "1. Rice\n"
      "2. Sand\n"
      "Answer: Rice";
  auto got = pack.instance_assembler("True", seed, raw);
  REQUIRE(got[0].at("answers") == "Rice");
}

TEST_CASE("correction specs carry both verdict polarities", "[taskpacks]") {
  for (const auto& id : builtin_task_ids()) {
    auto pack = builtin_task(id);
    CAPTURE(id);
    REQUIRE_FALSE(pack.spec.correction.task_instructions.empty());
    REQUIRE(pack.spec.correction.issues().empty());
    bool any_correct = false, any_incorrect = false;
    for (const auto& e : pack.spec.correction.exemplars) {
      (e.correct ? any_correct : any_incorrect) = true;
      REQUIRE_FALSE(e.input.empty());
      REQUIRE_FALSE(e.actual.empty());
      REQUIRE_FALSE(e.predicted.empty());
    }
    REQUIRE(any_correct);
    REQUIRE(any_incorrect);
  }
}

TEST_CASE("format_input renders every schema field", "[taskpacks]") {
  auto pack = builtin_task("wic");
  auto inst = instance_of(pack,
                          {{"word", "key"},
                           {"sentence1", "I lost my key yesterday"},
                           {"sentence2", "The key to victory is planning ahead."}},
                          "False");
  REQUIRE(pack.format_input(inst) ==
          "Word: key\nSentence 1: I lost my key yesterday\nSentence 2: The key to victory is "
          "planning ahead.");

  auto wsc = builtin_task("wsc");
  auto winst = instance_of(
      wsc,
      {{"text",
        "The city councilmen refused the demonstrators a permit because they feared "
        "violence."},
       {"subject1", "The city councilmen"},
       {"subject2", "demonstrators"},
       {"pronoun", "They"}},
      "True");
  REQUIRE(wsc.format_input(winst) ==
          "The city councilmen refused the demonstrators a permit because they feared "
          "violence. Subject 1: The city councilmen. Pronoun: They");
}

TEST_CASE("generic packs map parsed and seed fields onto the schema", "[taskpacks]") {
  TaskSpec spec;
  spec.task_id = "demo";
  spec.label_schema = {"yes", "no"};
  spec.field_schema = {"premise", "hypothesis"};
  spec.balance_policy = BalancePolicy::balanced;
  {
    PromptStage s;
    s.role = StageRole::contexts;
    s.template_text = "Generate a list of {N} domains.";
    s.parser.kind = ParseKind::numbered_list;
    spec.stages.push_back(s);
  }
  {
    PromptStage s;
    s.role = StageRole::seeds;
    s.template_text = "Generate {N} sentences about {DOMAIN}.";
    s.parser.kind = ParseKind::numbered_list;
    spec.stages.push_back(s);
  }
  {
    PromptStage s;
    s.role = StageRole::instances;
    s.template_text = "For {SEED}, produce a {LABEL} hypothesis.\nHypothesis:";
    s.parser.kind = ParseKind::fielded_record;
    s.parser.fields = {"Hypothesis"};
    s.parser.implicit_first_field = true;
    spec.stages.push_back(s);
  }
  spec.correction.task_instructions = "Judge the pair.";
  spec.correction.exemplars = {{"Premise: a\nHypothesis: b", "yes", "yes", true},
                               {"Premise: a\nHypothesis: c", "no", "yes", false}};
  spec.parse_field_map = {{"hypothesis", "hypothesis"}};
  spec.seed_field_map = {{"seed", "premise"}};
  REQUIRE(validate_task_spec(spec).empty());

  auto pack = make_generic_pack(spec);
  auto seeds = pack.seed_assembler("ctx", "1. The sky is blue.\n2. Water boils at 100 C.");
  REQUIRE(seeds.size() == 2);
  REQUIRE(seeds[0].at("seed") == "The sky is blue.");

  auto got = pack.instance_assembler("yes", seed_with(seeds[0]),
                                     "Hypothesis: The sky has a color.");
  REQUIRE(got.size() == 1);
  REQUIRE(got[0].at("premise") == "The sky is blue.");
  REQUIRE(got[0].at("hypothesis") == "The sky has a color.");

  auto inst = instance_of(pack, got[0], "yes");
  REQUIRE(validate_instance(pack, inst).empty());
  REQUIRE(pack.format_input(inst) ==
          "Premise: The sky is blue.\nHypothesis: The sky has a color.");
}
