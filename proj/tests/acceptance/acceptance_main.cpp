// Acceptance suite. Each invocation runs one named criterion and prints a
// single PASS/FAIL line; with no argument every criterion runs in sequence.
// The robustness criterion spawns the CLI named by $TARGEN_CLI; the lexical
// anchor needs $TARGEN_WSC_JSONL pointing at the original benchmark file and
// reports an honest failure when the corpus is not available.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "targen/analysis.hpp"
#include "targen/backend.hpp"
#include "targen/core.hpp"
#include "targen/errors.hpp"
#include "targen/pipeline.hpp"
#include "targen/pvi.hpp"
#include "targen/selfcorrect.hpp"
#include "targen/store.hpp"
#include "targen/taskpacks.hpp"

namespace {

using targen::Dataset;
using targen::GeneratedInstance;
using targen::InstanceSeed;
namespace fs = std::filesystem;

struct Check {
  bool ok = true;
  std::ostringstream detail;

  void expect(bool cond, const std::string& what) {
    if (cond) return;
    if (!ok) detail << "; ";
    ok = false;
    detail << what;
  }

  void note(const std::string& what) {
    if (ok && detail.tellp() > 0) detail << ", ";
    if (ok) detail << what;
  }
};

fs::path fresh_temp_dir() {
  std::random_device rd;
  fs::path dir = fs::temp_directory_path() /
                 ("targen-accept-" + std::to_string(rd() % 1000000));
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

GeneratedInstance labeled_text(const std::string& id, const std::string& text,
                               const std::string& label) {
  GeneratedInstance inst;
  inst.instance_id = id;
  inst.task_id = "task";
  inst.inputs = {{"text", text}};
  inst.original_label = label;
  return inst;
}

InstanceSeed seed_with(std::map<std::string, std::string> payload) {
  InstanceSeed seed;
  seed.seed_id = "seed-0";
  seed.payload = std::move(payload);
  return seed;
}

GeneratedInstance instance_of(const targen::packs::TaskPack& pack,
                              std::map<std::string, std::string> inputs,
                              const std::string& label) {
  return targen::make_instance(pack.spec, pack.spec.task_id + "-000001", std::move(inputs),
                               label, {});
}

// Deterministic stand-in for a live model during recorded pipeline runs.
std::string rte_responder(const targen::backend::ChatRequest& request) {
  const std::string& prompt = request.messages.back().content;
  if (prompt.find("topics or domains") != std::string::npos)
    return "1. history\n2. science\n3. sports\n4. art";
  if (prompt.find("complex sentences") != std::string::npos) {
    std::size_t at = prompt.find("domain ");
    std::size_t comma = prompt.find(',', at);
    std::string domain = prompt.substr(at + 7, comma - at - 7);
    std::string out;
    for (int i = 1; i <= 4; ++i)
      out += std::to_string(i) + ". Fact " + std::to_string(i) + " about " + domain +
             " was recorded.\n";
    return out;
  }
  std::size_t at = prompt.rfind("Premise: ");
  std::string premise = targen::trim(prompt.substr(at + 9));
  bool sound = prompt.find("logically sound") != std::string::npos;
  return "Hypothesis: A " + std::string(sound ? "supported" : "contradicting") +
         " claim derived from \"" + premise + "\"";
}

// ---------------- replay determinism ----------------

bool run_replay_determinism(Check& check) {
  auto started = std::chrono::steady_clock::now();
  fs::path dir = fresh_temp_dir();
  fs::path transcript_path = dir / "transcript.jsonl";

  auto pack = targen::packs::builtin_task("rte");
  targen::pipeline::PipelineConfig cfg;
  cfg.contexts = 2;
  cfg.seeds_per_context = 2;
  cfg.total = 20;

  {
    targen::backend::MockBackend mock(rte_responder);
    targen::backend::ChatTranscript transcript;
    targen::backend::RecordingBackend recorder(mock, transcript);
    Dataset recorded = targen::pipeline::run_pipeline(pack, recorder, cfg);
    check.expect(recorded.instances.size() == 20,
                 "recorded run produced " + std::to_string(recorded.instances.size()) +
                     " instances, wanted 20");
    transcript.save(transcript_path.string());
  }

  fs::path out_a = dir / "replay_a.jsonl";
  fs::path out_b = dir / "replay_b.jsonl";
  for (const fs::path& out : {out_a, out_b}) {
    targen::backend::ReplayBackend replay(
        targen::backend::ChatTranscript::load(transcript_path.string()));
    Dataset ds = targen::pipeline::run_pipeline(pack, replay, cfg);
    targen::store::write_dataset(ds, out.string());
  }

  std::string a = slurp(out_a);
  std::string b = slurp(out_b);
  check.expect(!a.empty(), "first replay wrote an empty file");
  check.expect(a == b, "replayed dataset files differ");

  auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                     std::chrono::steady_clock::now() - started)
                     .count();
  check.expect(elapsed < 5000, "took " + std::to_string(elapsed) + " ms, budget is 5000");
  check.note("20 instances byte-identical across two replays in " + std::to_string(elapsed) +
             " ms");
  fs::remove_all(dir);
  return check.ok;
}

// ---------------- label planning ----------------

bool run_label_planning(Check& check) {
  using targen::pipeline::plan_labels;

  struct BalancedCase {
    const char* task;
    int total;
  };
  for (const BalancedCase& c : {BalancedCase{"rte", 2490}, BalancedCase{"wic", 4843},
                                BalancedCase{"wsc", 544}}) {
    auto pack = targen::packs::builtin_task(c.task);
    auto plan = plan_labels(pack.spec.label_schema, c.total, targen::BalancePolicy::balanced);
    check.expect(plan.total() == c.total,
                 std::string(c.task) + " plan total " + std::to_string(plan.total()) +
                     " != " + std::to_string(c.total));
    int lo = c.total, hi = 0, sum = 0;
    for (const auto& [label, n] : plan.counts) {
      lo = std::min(lo, n);
      hi = std::max(hi, n);
      sum += n;
    }
    check.expect(sum == c.total, std::string(c.task) + " counts sum mismatch");
    check.expect(hi - lo <= 1, std::string(c.task) + " per-label spread " +
                                   std::to_string(hi - lo) + " exceeds 1");
  }

  auto cb = targen::packs::builtin_task("cb");
  auto plan = plan_labels(cb.spec.label_schema, 250, cb.spec.balance_policy,
                          cb.spec.explicit_counts);
  check.expect(plan.counts.at("contradiction") == 119,
               "cb contradiction " + std::to_string(plan.counts.at("contradiction")));
  check.expect(plan.counts.at("entailment") == 115,
               "cb entailment " + std::to_string(plan.counts.at("entailment")));
  check.expect(plan.counts.at("neutral") == 16,
               "cb neutral " + std::to_string(plan.counts.at("neutral")));
  check.expect(plan.total() == 250, "cb plan total != 250");

  check.note("rte 2490, wic 4843, wsc 544 balanced within 1; cb {119, 115, 16} exact");
  return check.ok;
}

// ---------------- worked-exemplar fixtures ----------------

bool run_fixture_suite(Check& check) {
  int fixtures = 0;
  auto valid = [&](const targen::packs::TaskPack& pack, const GeneratedInstance& inst,
                   const std::string& name) {
    ++fixtures;
    auto issues = targen::packs::validate_instance(pack, inst);
    std::string joined;
    for (const auto& i : issues) joined += (joined.empty() ? "" : "; ") + i;
    check.expect(issues.empty(), name + " failed validation: " + joined);
  };

  {
    auto pack = targen::packs::builtin_task("cb");
    auto seed = seed_with({{"domain", "music"}});
    auto batches = pack.instance_assembler(
        "entailment", seed,
        "Sentence 1: The singer was very nervous.\n"
        "Sentence 2: The singer saw critics in the front row.");
    check.expect(batches.size() == 1 &&
                     batches[0].at("premise") == "The singer was very nervous.",
                 "cb singer pair did not parse");
    if (!batches.empty()) valid(pack, instance_of(pack, batches[0], "entailment"), "cb singer");
  }

  {
    auto pack = targen::packs::builtin_task("copa");
    auto cause_seed = seed_with({{"sentence", "I cast a long shadow."}, {"relation", "CAUSE"}});
    auto got = pack.instance_assembler(
        "Choice 1", cause_seed,
        "Hypothesis 1: The sun was low in the sky.\nHypothesis 2: The grass was tall.");
    check.expect(got.size() == 1, "copa shadow reply did not parse");
    if (!got.empty()) {
      auto inst = instance_of(pack, got[0], "Choice 1");
      for (const auto& [_, fn] : pack.post_processors) fn(inst, cause_seed);
      check.expect(inst.inputs.at("premise") ==
                       "I cast a long shadow. What was the CAUSE of this?",
                   "copa cause query was not affixed");
      valid(pack, inst, "copa shadow");
    }

    auto result_seed =
        seed_with({{"sentence", "I fell down the stairs."}, {"relation", "RESULT"}});
    got = pack.instance_assembler(
        "Choice 1", result_seed,
        "Hypothesis 1: I injured myself.\nHypothesis 2: My mother bought a new car.");
    if (!got.empty()) {
      auto inst = instance_of(pack, got[0], "Choice 1");
      for (const auto& [_, fn] : pack.post_processors) fn(inst, result_seed);
      check.expect(inst.inputs.at("premise") ==
                       "I fell down the stairs. What was the RESULT of this?",
                   "copa result query was not affixed");
      valid(pack, inst, "copa stairs");
    }
  }

  {
    auto pack = targen::packs::builtin_task("boolq");
    std::string falcon =
        "The Millennium Falcon, a legendary starship piloted by Han Solo and Chewbacca, has "
        "become an iconic symbol of rebellion and hope in the struggle against the oppressive "
        "Galactic Empire.";
    auto got = pack.instance_assembler(
        "True", seed_with({{"passage", falcon}}),
        "Does Han Solo work with Chewbacca? Answer: YES, Han Solo and Chewbacca pilot the "
        "Falcon together.");
    check.expect(got.size() == 1 &&
                     got[0].at("question") == "Does Han Solo work with Chewbacca?",
                 "boolq answer tail was not stripped");
    if (!got.empty()) valid(pack, instance_of(pack, got[0], "True"), "boolq falcon");
  }

  {
    auto pack = targen::packs::builtin_task("record");
    std::string passage =
        "Chlorine gas had been used for the first time. It was April 22, 1915. German forces "
        "launched first attack using gas on April 22, 1915. 150,000 tons of gas were used by "
        "German and Allied forces in WW1.";
    auto got = pack.instance_assembler(
        "True", seed_with({{"passage", passage}}),
        "Had they been able to peer a bit further across no-man's land they would have seen "
        "how [X] troops had dug in, under cover of night, more than 5,000 gas cylinders with "
        "tubes pointing their way.\nAnswer: German");
    check.expect(got.size() == 1 && got[0].at("answer") == "German",
                 "record reply did not parse into query and answer");
    if (!got.empty()) valid(pack, instance_of(pack, got[0], "True"), "record german troops");
  }

  {
    auto pack = targen::packs::builtin_task("wic");
    auto seed = seed_with(
        {{"word", "key"}, {"definitions", "1. shaped metal for a lock\n2. a crucial element"}});
    auto got = pack.instance_assembler("True", seed,
                                       "1. a piece of shaped metal used to open or close a "
                                       "lock\nSentences:\n1. I lost my key yesterday\n2. He "
                                       "shouldn't steal people's keys.");
    check.expect(got.size() == 1, "wic key reply did not parse");
    if (!got.empty()) valid(pack, instance_of(pack, got[0], "True"), "wic key");

    valid(pack,
          instance_of(pack,
                      {{"word", "shoot"},
                       {"sentence1", "They are shooting a documentary."},
                       {"sentence2", "The shoot was suspended."}},
                      "True"),
          "wic shoot");
  }

  {
    auto pack = targen::packs::builtin_task("wsc");
    valid(pack,
          instance_of(pack,
                      {{"text",
                        "The city councilmen refused the demonstrators a permit because they "
                        "feared violence."},
                       {"subject1", "The city councilmen"},
                       {"subject2", "demonstrators"},
                       {"pronoun", "They"}},
                      "True"),
          "wsc councilmen");

    auto seed = seed_with(
        {{"subject_1", "teacher"}, {"subject_2", "student"}, {"pronouns", "He/him"}});
    auto truths = pack.instance_assembler(
        "True", seed,
        "S1: The teacher was disappointed in the student because [he=teacher] had high hopes "
        "for [him=student].\n"
        "S2: The teacher and the student are not on good terms. [He=student] is very "
        "rebellious, and does not show up to classes.");
    check.expect(!truths.empty(), "wsc annotated sentence did not parse");
    if (!truths.empty()) valid(pack, instance_of(pack, truths[0], "True"), "wsc teacher");
  }

  check.note(std::to_string(fixtures) + " exemplar instances validate cleanly");
  return check.ok;
}

// ---------------- self-correction conservation ----------------

Dataset rte_fixture_dataset(const targen::packs::TaskPack& pack, int n_entail, int n_not) {
  Dataset ds;
  ds.task_id = pack.spec.task_id;
  targen::backend::MockBackend manifest_backend(std::vector<std::string>{});
  ds.manifest = targen::pipeline::detail::make_manifest(
      pack, manifest_backend, targen::pipeline::PipelineConfig{},
      targen::pipeline::plan_labels(pack.spec.label_schema, n_entail + n_not,
                                    targen::BalancePolicy::balanced));
  for (int i = 0; i < n_entail + n_not; ++i) {
    std::string label = i < n_entail ? "entailment" : "not entailment";
    ds.instances.push_back(targen::make_instance(
        pack.spec, targen::format_instance_id(pack.spec.task_id, i + 1),
        {{"premise", "Premise sentence number " + std::to_string(i) + "."},
         {"hypothesis", "Hypothesis " + std::to_string(i) + " about the premise."}},
        label, {}));
  }
  return ds;
}

bool run_correction_conservation(Check& check) {
  auto pack = targen::packs::builtin_task("rte");

  {
    Dataset ds = rte_fixture_dataset(pack, 6, 4);
    std::map<std::string, int> before;
    for (const auto& inst : ds.instances) ++before[inst.original_label];

    targen::backend::MockBackend mock([](const targen::backend::ChatRequest& request) {
      const std::string& content = request.messages.back().content;
      for (const char* marker : {"number 0.", "number 2.", "number 4."})
        if (content.find(marker) != std::string::npos)
          return std::string(
              "Actual result: not entailment. The stated output does not match, so the "
              "output is INCORRECT.");
      return std::string("Actual result: matches the output, so the output is CORRECT.");
    });

    auto outcome = targen::correct::self_correct_dataset(pack, mock, std::move(ds));
    check.expect(outcome.matrix.off_diagonal_total() == 3,
                 "off-diagonal sum " + std::to_string(outcome.matrix.off_diagonal_total()) +
                     " != 3 flips");
    for (const auto& label : outcome.matrix.labels) {
      int row = outcome.matrix.row_sum(label) + outcome.matrix.unverified.at(label);
      check.expect(row == before[label],
                   "row '" + label + "' sums to " + std::to_string(row) + ", had " +
                       std::to_string(before[label]) + " before correction");
    }
    check.expect(outcome.matrix.grand_total() == 10, "grand total != dataset size");
  }

  {
    Dataset ds = rte_fixture_dataset(pack, 5, 5);
    targen::backend::MockBackend mock([](const targen::backend::ChatRequest&) {
      return std::string("Actual result: as stated, so the output is CORRECT.");
    });
    auto outcome = targen::correct::self_correct_dataset(pack, mock, std::move(ds));
    check.expect(outcome.matrix.off_diagonal_total() == 0,
                 "all-CORRECT run left off-diagonal entries");
    check.expect(outcome.matrix.cell("entailment", "entailment") == 5 &&
                     outcome.matrix.cell("not entailment", "not entailment") == 5,
                 "all-CORRECT run does not reproduce the diagonal");
  }

  check.note("3 scripted flips conserved across rows; all-CORRECT stays diagonal");
  return check.ok;
}

// ---------------- lexical diversity anchor ----------------

bool run_lexical_anchor(Check& check) {
  check.expect(targen::analysis::vocab_count({}) == 0, "empty corpus vocabulary is not 0");

  const char* path = std::getenv("TARGEN_WSC_JSONL");
  if (path == nullptr || std::string(path).empty()) {
    check.expect(false,
                 "TARGEN_WSC_JSONL is not set; point it at the original benchmark WSC "
                 "train.jsonl to check the 8.8k vocabulary anchor (empty-corpus half passed)");
    return check.ok;
  }

  std::ifstream in(path);
  check.expect(in.good(), std::string("cannot open '") + path + "'");
  if (!in.good()) return check.ok;

  std::vector<std::string> texts;
  std::string line;
  while (std::getline(in, line)) {
    if (targen::trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line);
    if (j.contains("text")) texts.push_back(j.at("text").get<std::string>());
    if (j.contains("target")) {
      for (const char* key : {"span1_text", "span2_text"})
        if (j.at("target").contains(key))
          texts.push_back(j.at("target").at(key).get<std::string>());
    }
  }
  std::size_t vocab = targen::analysis::vocab_count(texts);
  check.expect(vocab >= 7480 && vocab <= 10120,
               "vocabulary " + std::to_string(vocab) + " outside 8800 +/- 15% [7480, 10120]");
  check.note("vocabulary " + std::to_string(vocab) + " within 8800 +/- 15%");
  return check.ok;
}

// ---------------- semantic diversity oracle ----------------

bool run_semantic_diversity(Check& check) {
  std::vector<std::string> corpus = {
      "The committee approved the annual budget after a long debate.",
      "Rivers in the northern valley flood almost every spring.",
      "A new species of beetle was described by field biologists.",
      "The orchestra rehearsed the overture twice before the premiere.",
      "Local bakeries report rising flour costs this quarter.",
      "The satellite entered a stable orbit on the third attempt.",
      "Chess clubs across the city are recruiting younger players.",
      "The museum restored a collection of nineteenth-century maps.",
      "Volunteers cleared the hiking trail after the storm.",
      "The court postponed the hearing until further notice.",
      "Engineers tested the bridge sensors under heavy load.",
      "A documentary about deep-sea vents won the festival prize.",
      "The library extended its opening hours during exams.",
      "Farmers rotated crops to keep the soil productive.",
      "The startup shipped its first batch of solar chargers.",
      "Historians debated the origin of the coastal fortress.",
      "The clinic vaccinated two hundred patients in one day.",
      "City planners proposed a car-free zone downtown.",
      "The observatory tracked a comet visible at dawn.",
      "Students built a weather balloon for the science fair."};

  targen::analysis::HashedNgramEmbedding provider;
  targen::analysis::SimilarityOptions options;
  options.max_pairs = corpus.size() * (corpus.size() - 1) / 2;
  auto stats = targen::analysis::pairwise_similarity_stats(corpus, provider, options);

  std::vector<targen::analysis::SparseVector> vectors;
  vectors.reserve(corpus.size());
  for (const auto& text : corpus) vectors.push_back(provider.embed(text));
  double sum = 0.0, sum_sq = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < vectors.size(); ++i)
    for (std::size_t j = i + 1; j < vectors.size(); ++j) {
      double s = targen::analysis::cosine(vectors[i], vectors[j]);
      sum += s;
      sum_sq += s * s;
      ++pairs;
    }
  double mean = sum / static_cast<double>(pairs);
  double variance = sum_sq / static_cast<double>(pairs) - mean * mean;
  double stdev = std::sqrt(std::max(0.0, variance));

  check.expect(stats.pairs == pairs,
               "pair count " + std::to_string(stats.pairs) + " != C(n,2) = " +
                   std::to_string(pairs));
  check.expect(std::abs(stats.mean - mean) < 1e-9, "mean deviates from brute force");
  check.expect(std::abs(stats.stdev - stdev) < 1e-9, "stdev deviates from brute force");

  std::vector<std::string> clones = {"An identical sentence.", "An identical sentence.",
                                     "An identical sentence."};
  auto clone_stats = targen::analysis::pairwise_similarity_stats(clones, provider);
  check.expect(std::abs(clone_stats.mean - 1.0) < 1e-6,
               "identical texts score " + std::to_string(clone_stats.mean) + ", not 1.0");

  std::ostringstream mean_text;
  mean_text.precision(4);
  mean_text << "20-text mean " << mean << " matches brute force to 1e-9; clones score 1.0";
  check.note(mean_text.str());
  return check.ok;
}

// ---------------- pvi suite ----------------

Dataset coin_flip_dataset(int n, std::uint64_t seed) {
  Dataset ds;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> word(0, 49);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int i = 0; i < n; ++i) {
    std::string text = "w" + std::to_string(word(rng)) + " w" + std::to_string(word(rng)) +
                       " w" + std::to_string(word(rng));
    ds.instances.push_back(
        labeled_text("c-" + std::to_string(i), text, coin(rng) ? "heads" : "tails"));
  }
  return ds;
}

Dataset separable_dataset(int n) {
  Dataset ds;
  for (int i = 0; i < n; ++i) {
    bool pos = i % 2 == 0;
    ds.instances.push_back(labeled_text("s-" + std::to_string(i),
                                        pos ? "blimmer" : "quorfal",
                                        pos ? "positive" : "negative"));
  }
  return ds;
}

bool run_pvi_suite(Check& check) {
  auto started = std::chrono::steady_clock::now();

  {
    targen::pvi::ModelFamily family =
        targen::pvi::train_model_family(separable_dataset(100));
    auto p = family.null_model.predict_proba(targen::analysis::SparseVector{});
    double entropy = 0.0;
    for (double v : p)
      if (v > 0.0) entropy -= v * std::log2(v);
    check.expect(std::abs(entropy - 1.0) < 0.01,
                 "balanced null entropy " + std::to_string(entropy) + " != 1.0 +/- 0.01");
  }

  {
    auto summary = targen::pvi::pvi_dataset(coin_flip_dataset(2000, 20260817));
    check.expect(summary.mean_bits >= -0.05 && summary.mean_bits <= 0.05,
                 "coin-flip mean " + std::to_string(summary.mean_bits) +
                     " outside [-0.05, 0.05]");
  }

  {
    auto summary = targen::pvi::pvi_dataset(separable_dataset(500));
    check.expect(summary.mean_bits >= 0.9, "separable mean " +
                                               std::to_string(summary.mean_bits) +
                                               " below 0.9 bits");
  }

  {
    const std::size_t dim = 32, classes = 3;
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick_class(0, classes - 1);
    std::uniform_int_distribution<std::uint32_t> pick_index(0, dim - 1);

    std::vector<targen::analysis::SparseVector> xs;
    std::vector<std::size_t> ys;
    for (int i = 0; i < 24; ++i) {
      targen::analysis::SparseVector v;
      std::set<std::uint32_t> used;
      while (used.size() < 4) used.insert(pick_index(rng));
      for (auto idx : used) v.entries.emplace_back(idx, unit(rng) + 2.0);
      xs.push_back(std::move(v));
      ys.push_back(pick_class(rng));
    }

    std::vector<double> theta(classes * dim + classes);
    for (auto& t : theta) t = unit(rng);
    std::vector<double> grad;
    targen::pvi::detail::loss_and_gradient(theta, xs, ys, classes, dim, 0.05, &grad);

    double worst = 0.0;
    const double eps = 1e-5;
    std::uniform_int_distribution<std::size_t> pick_coord(0, theta.size() - 1);
    for (int trial = 0; trial < 40; ++trial) {
      std::size_t k = pick_coord(rng);
      std::vector<double> plus = theta, minus = theta;
      plus[k] += eps;
      minus[k] -= eps;
      double numeric =
          (targen::pvi::detail::loss_and_gradient(plus, xs, ys, classes, dim, 0.05, nullptr) -
           targen::pvi::detail::loss_and_gradient(minus, xs, ys, classes, dim, 0.05,
                                                  nullptr)) /
          (2 * eps);
      double rel = std::abs(numeric - grad[k]) / std::max(1.0, std::abs(grad[k]));
      worst = std::max(worst, rel);
    }
    check.expect(worst < 1e-4, "gradient mismatch, worst relative error " +
                                   std::to_string(worst));
  }

  auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                     std::chrono::steady_clock::now() - started)
                     .count();
  check.expect(elapsed < 60000, "took " + std::to_string(elapsed) + " ms, budget is 60000");
  check.note("null entropy, coin-flip, separable, and gradient checks in " +
             std::to_string(elapsed) + " ms");
  return check.ok;
}

// ---------------- bias and leakage oracles ----------------

bool run_bias_and_leakage(Check& check) {
  const std::vector<std::pair<std::string, int>> planted = {
      {"atlantis", 37}, {"elbonia", 24}, {"latveria", 18}, {"genovia", 12}, {"wakanda", 9}};

  std::vector<std::string> corpus;
  {
    int total = 0;
    for (const auto& [place, count] : planted) total += count;
    std::vector<std::string> mentions;
    for (const auto& [place, count] : planted)
      for (int i = 0; i < count; ++i) mentions.push_back(place);
    // Deterministic interleave so mentions of one place spread across the corpus.
    std::mt19937_64 rng(4242);
    std::shuffle(mentions.begin(), mentions.end(), rng);
    for (int i = 0; i < 100; ++i) {
      std::string name = mentions[i];
      name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
      corpus.push_back("Sentence " + std::to_string(i) + " mentions " + name +
                       " in passing.");
    }
    check.expect(total == 100, "planted corpus is not 100 sentences");
  }

  std::vector<std::pair<std::string, std::string>> entries;
  for (const auto& [place, _] : planted) entries.emplace_back(place, "GPE");
  targen::analysis::GazetteerTagger tagger(entries);
  auto ranked = targen::analysis::entity_distribution(corpus, tagger, "GPE");
  check.expect(ranked == planted, "entity counts do not match the planted distribution");

  std::vector<std::string> dataset_texts, reference_texts;
  for (int i = 0; i < 1000; ++i)
    dataset_texts.push_back("Dataset sentence " + std::to_string(i) + " stands alone.");
  for (int j = 0; j < 1000; ++j)
    reference_texts.push_back("Reference sentence " + std::to_string(j) + " stands apart.");
  const std::vector<std::pair<std::size_t, std::size_t>> duplicates = {
      {100, 13}, {200, 117}, {300, 240}, {400, 555}, {500, 612}, {600, 808}, {700, 931}};
  for (const auto& [i, j] : duplicates) {
    std::string shared = "Shared passage " + std::to_string(i) + " copied verbatim.";
    dataset_texts[i] = shared;
    reference_texts[j] = "  " + shared + " ";
  }

  auto pairs = targen::analysis::leakage_check(dataset_texts, reference_texts);
  check.expect(pairs.size() == 7,
               "found " + std::to_string(pairs.size()) + " leaked pairs, planted 7");
  std::set<std::pair<std::size_t, std::size_t>> found;
  for (const auto& p : pairs) found.emplace(p.dataset_index, p.reference_index);
  check.expect(found == std::set<std::pair<std::size_t, std::size_t>>(duplicates.begin(),
                                                                      duplicates.end()),
               "leaked pair indices differ from the planted ones");

  auto disjoint = targen::analysis::leakage_check(
      {"Wholly original first text.", "Wholly original second text."},
      {"Unrelated reference one.", "Unrelated reference two."});
  check.expect(disjoint.empty(), "disjoint corpora report leakage");

  check.note("planted counts exact; 7 of 7 duplicates found in 1000x1000; disjoint clean");
  return check.ok;
}

// ---------------- robustness: CLI exit codes ----------------

int run_cli(const std::string& cli, const std::string& args) {
  std::string command = "\"" + cli + "\" " + args + " >/dev/null 2>&1";
  int status = std::system(command.c_str());
  if (status == -1 || !WIFEXITED(status)) return -1;
  return WEXITSTATUS(status);
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

bool run_robustness(Check& check) {
  const char* cli = std::getenv("TARGEN_CLI");
  if (cli == nullptr || std::string(cli).empty()) {
    check.expect(false, "TARGEN_CLI is not set; point it at the built CLI binary");
    return check.ok;
  }
  fs::path dir = fresh_temp_dir();

  {
    write_text(dir / "starve.json",
               "[\"1. history\",\n"
               " \"1. The committee approved the budget in 1998.\",\n"
               " \"Hypothesis: One good instance derived from the premise.\",\n"
               " \"\", \"\", \"\"]");
    int code = run_cli(cli, "generate --task rte --contexts 1 --seeds-per-context 1 --total 4"
                            " --backend mock:" + (dir / "starve.json").string() +
                            " --out " + (dir / "partial.jsonl").string());
    check.expect(code == 4, "plan-unfulfilled run exited " + std::to_string(code) +
                                ", expected 4");
    Dataset partial = targen::store::read_dataset((dir / "partial.jsonl").string());
    check.expect(partial.instances.size() == 1,
                 "partial dataset holds " + std::to_string(partial.instances.size()) +
                     " instances, expected the 1 good one");
  }

  {
    write_text(dir / "stubborn.json",
               "[\"1. a lively rock concert\", \"1. a lively rock concert\","
               " \"1. a lively rock concert\"]");
    int code = run_cli(cli, "generate --task wsc --contexts 3 --total 4 --backend mock:" +
                                (dir / "stubborn.json").string() + " --out " +
                                (dir / "never.jsonl").string());
    check.expect(code == 4,
                 "budget-exhausted run exited " + std::to_string(code) + ", expected 4");
  }

  {
    write_text(dir / "empty_transcript.jsonl", "");
    int code = run_cli(cli, "replay --transcript " + (dir / "empty_transcript.jsonl").string() +
                                " --task rte --total 2 --out " + (dir / "x.jsonl").string());
    check.expect(code == 3, "replay-miss run exited " + std::to_string(code) + ", expected 3");
  }

  {
    write_text(dir / "corrupt.jsonl",
               "{\"run_id\":\"r\",\"count\":1}\nnot json at all\n");
    int code = run_cli(cli, "stats --in " + (dir / "corrupt.jsonl").string());
    check.expect(code == 2,
                 "schema-violation run exited " + std::to_string(code) + ", expected 2");
  }

  check.note("exit codes 4 (plan), 4 (budget), 3 (replay miss), 2 (schema) as documented");
  fs::remove_all(dir);
  return check.ok;
}

// ---------------- driver ----------------

const std::map<std::string, std::function<bool(Check&)>>& criteria() {
  static const std::map<std::string, std::function<bool(Check&)>> table = {
      {"replay_determinism", run_replay_determinism},
      {"label_planning", run_label_planning},
      {"fixture_suite", run_fixture_suite},
      {"correction_conservation", run_correction_conservation},
      {"lexical_anchor", run_lexical_anchor},
      {"semantic_diversity", run_semantic_diversity},
      {"pvi", run_pvi_suite},
      {"bias_and_leakage", run_bias_and_leakage},
      {"robustness", run_robustness},
  };
  return table;
}

bool run_criterion(const std::string& name, const std::function<bool(Check&)>& fn) {
  Check check;
  try {
    fn(check);
  } catch (const std::exception& e) {
    check.expect(false, std::string("unexpected exception: ") + e.what());
  }
  std::cout << (check.ok ? "PASS: " : "FAIL: ") << name;
  std::string detail = check.detail.str();
  if (!detail.empty()) std::cout << " - " << detail;
  std::cout << "\n";
  return check.ok;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 2) {
    std::cerr << "usage: " << argv[0] << " [criterion]\n";
    return 2;
  }
  if (argc == 2) {
    auto it = criteria().find(argv[1]);
    if (it == criteria().end()) {
      std::cerr << "unknown criterion '" << argv[1] << "'; known:";
      for (const auto& [name, _] : criteria()) std::cerr << " " << name;
      std::cerr << "\n";
      return 2;
    }
    return run_criterion(it->first, it->second) ? 0 : 1;
  }
  bool all_ok = true;
  for (const auto& [name, fn] : criteria()) all_ok = run_criterion(name, fn) && all_ok;
  return all_ok ? 0 : 1;
}
