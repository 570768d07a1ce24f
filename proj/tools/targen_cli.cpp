// Command-line surface: generate datasets through the four-step pipeline,
// self-correct them, analyze quality, and replay recorded runs offline.
// Exit codes: 0 success, 2 validation failure, 3 backend/transport failure,
// 4 plan unfulfilled or budget exhausted (partial output written when one
// exists).

#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "targen/backend.hpp"
#include "targen/backend_http.hpp"
#include "targen/core.hpp"
#include "targen/errors.hpp"
#include "targen/pipeline.hpp"
#include "targen/selfcorrect.hpp"
#include "targen/store.hpp"
#include "targen/taskpacks.hpp"
#include "targen/taskspec_io.hpp"
#include "targen/version.hpp"

namespace {

using targen::store::json;

targen::packs::TaskPack resolve_task(const std::string& task) {
  std::ifstream probe(task);
  if (probe.good()) {
    targen::TaskSpec spec = targen::load_task_spec_file(task);
    return targen::packs::make_generic_pack(std::move(spec));
  }
  return targen::packs::builtin_task(task);
}

// Owns whichever backend the --backend flag selected, plus the optional
// recording wrapper. The transcript is saved explicitly on success paths and
// best-effort if an error unwinds the command.
struct BackendBundle {
  std::unique_ptr<targen::backend::ChatBackend> owned;
  std::unique_ptr<targen::backend::RecordingBackend> recorder;
  targen::backend::ChatTranscript transcript;
  std::string record_path;
  bool saved = false;

  BackendBundle() = default;
  BackendBundle(const BackendBundle&) = delete;
  BackendBundle& operator=(const BackendBundle&) = delete;

  targen::backend::ChatBackend& use() { return recorder ? *recorder : *owned; }

  void finish() {
    if (record_path.empty() || saved) return;
    transcript.save(record_path);
    saved = true;
  }

  ~BackendBundle() {
    try {
      finish();
    } catch (...) {
    }
  }
};

void make_backend(const std::string& spec, const std::string& record_path,
                  BackendBundle& bundle) {
  if (spec == "live") {
    bundle.owned = std::make_unique<targen::backend::HttpBackend>(
        targen::backend::http_backend_from_environment());
  } else if (spec.rfind("mock:", 0) == 0) {
    std::string path = spec.substr(5);
    std::ifstream in(path);
    if (!in) throw targen::ValidationError("cannot open mock script '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    json script;
    try {
      script = json::parse(buffer.str());
    } catch (const nlohmann::json::exception& e) {
      throw targen::ValidationError("mock script '" + path + "' is not valid JSON: " + e.what());
    }
    if (!script.is_array())
      throw targen::ValidationError("mock script '" + path + "' must be a JSON array of strings");
    std::vector<std::string> replies;
    for (const auto& entry : script) {
      if (!entry.is_string())
        throw targen::ValidationError("mock script '" + path + "' must contain only strings");
      replies.push_back(entry.get<std::string>());
    }
    bundle.owned = std::make_unique<targen::backend::MockBackend>(std::move(replies));
  } else if (spec.rfind("replay:", 0) == 0) {
    bundle.owned = std::make_unique<targen::backend::ReplayBackend>(
        targen::backend::ChatTranscript::load(spec.substr(7)));
  } else {
    throw targen::ValidationError("unknown backend '" + spec +
                                  "' (expected live, mock:FILE, or replay:FILE)");
  }
  bundle.record_path = record_path;
  if (!record_path.empty())
    bundle.recorder =
        std::make_unique<targen::backend::RecordingBackend>(*bundle.owned, bundle.transcript);
}

struct GenerateArgs {
  std::string task;
  std::string backend = "live";
  std::string record_path;
  std::string out;
  std::string checkpoint_path;
  std::string resume_path;
  targen::pipeline::PipelineConfig cfg;
};

int run_generation(const GenerateArgs& args) {
  targen::packs::TaskPack pack = resolve_task(args.task);
  BackendBundle backend;
  make_backend(args.backend, args.record_path, backend);

  targen::pipeline::RunState state;
  if (!args.resume_path.empty()) state = targen::store::read_run_state(args.resume_path);

  targen::pipeline::CheckpointFn on_checkpoint = nullptr;
  if (!args.checkpoint_path.empty())
    on_checkpoint = [&](const targen::pipeline::RunState& snapshot, const std::string&) {
      targen::store::write_run_state(snapshot, args.checkpoint_path);
    };

  try {
    targen::Dataset ds =
        targen::pipeline::run_pipeline(pack, backend.use(), args.cfg, std::move(state),
                                       on_checkpoint);
    targen::store::write_dataset(ds, args.out);
    backend.finish();
    std::cout << "wrote " << ds.instances.size() << " instances to " << args.out << " ("
              << ds.manifest.run_id << ")\n";
    return 0;
  } catch (const targen::pipeline::PlanUnfulfilled& e) {
    targen::store::write_dataset(e.partial(), args.out);
    backend.finish();
    std::cerr << "plan unfulfilled: " << e.what() << "\n";
    std::cerr << "wrote partial dataset (" << e.partial().instances.size() << " instances) to "
              << args.out << "\n";
    return 4;
  }
}

int cmd_correct(const std::string& in, const std::string& task, const std::string& backend_spec,
                const std::string& record_path, const std::string& out,
                const std::string& matrix_path, targen::correct::CorrectionConfig cfg) {
  targen::Dataset ds = targen::store::read_dataset(in);
  targen::packs::TaskPack pack =
      task.empty() ? targen::packs::builtin_task(ds.task_id) : resolve_task(task);
  if (targen::fold_label(pack.spec.task_id) != targen::fold_label(ds.task_id))
    throw targen::ValidationError("dataset task '" + ds.task_id + "' does not match task '" +
                                  pack.spec.task_id + "'");

  BackendBundle backend;
  make_backend(backend_spec, record_path, backend);
  auto checkpoint = [&](const targen::Dataset& snapshot) {
    targen::store::write_dataset(snapshot, out);
  };
  targen::correct::CorrectionOutcome outcome =
      targen::correct::self_correct_dataset(pack, backend.use(), std::move(ds), cfg, checkpoint);

  json matrix{{"labels", outcome.matrix.labels},
              {"cells", outcome.matrix.cells},
              {"unverified", outcome.matrix.unverified}};
  json extra{{"confusion_matrix", matrix}};
  targen::store::write_dataset(outcome.dataset, out, &extra);
  if (!matrix_path.empty())
    targen::store::write_file_atomic(matrix_path, outcome.matrix.to_csv());
  backend.finish();

  std::map<std::string, int> statuses;
  for (const auto& inst : outcome.dataset.instances)
    ++statuses[targen::instance_status_name(inst.status)];
  std::cout << "corrected " << outcome.dataset.instances.size() << " instances ("
            << statuses["confirmed"] << " confirmed, " << statuses["relabeled"]
            << " relabeled, " << statuses["unverified"] << " unverified) to " << out << "\n";
  return 0;
}

int cmd_analyze(const std::string& in, const std::string& reference_path,
                const std::vector<std::string>& reference_map,
                const std::vector<std::string>& gazetteers, const std::string& report_path,
                const std::vector<std::string>& text_fields, std::size_t max_pairs,
                std::uint64_t seed, bool exclude_duplicates, bool no_pvi) {
  targen::Dataset ds = targen::store::read_dataset(in);

  targen::store::ReportOptions options;
  options.text_fields = text_fields;
  options.similarity.max_pairs = max_pairs;
  options.similarity.seed = seed;
  options.similarity.exclude_exact_duplicates = exclude_duplicates;
  options.run_pvi = !no_pvi;

  for (const auto& entry : gazetteers) {
    std::size_t eq = entry.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == entry.size())
      throw targen::ValidationError("--gazetteer expects TAG=FILE, got '" + entry + "'");
    options.taggers.emplace_back(entry.substr(0, eq),
                                 targen::analysis::load_gazetteer_file(entry.substr(eq + 1)));
  }

  if (!reference_path.empty()) {
    std::map<std::string, std::string> key_map;
    for (const auto& entry : reference_map) {
      std::size_t eq = entry.find('=');
      if (eq == std::string::npos || eq == 0 || eq + 1 == entry.size())
        throw targen::ValidationError("--reference-map expects KEY=TARGET, got '" + entry + "'");
      key_map[entry.substr(0, eq)] = entry.substr(eq + 1);
    }
    options.reference = targen::store::import_reference(reference_path, key_map);
  }

  json report = targen::store::build_analysis_report(ds, options);
  targen::store::write_file_atomic(report_path, report.dump(2) + "\n");

  std::cout << "report written to " << report_path << "\n";
  std::cout << "  unique tokens: " << report.at("lexical").at("unique_tokens") << "\n";
  if (report.at("semantic").contains("mean"))
    std::cout << "  similarity mean: " << report.at("semantic").at("mean") << "\n";
  if (report.at("pvi").contains("mean_bits"))
    std::cout << "  mean pvi bits: " << report.at("pvi").at("mean_bits") << "\n";
  if (report.at("leakage").at("checked").get<bool>())
    std::cout << "  leaked pairs: " << report.at("leakage").at("pairs") << "\n";
  return 0;
}

int cmd_stats(const std::string& in) {
  targen::Dataset ds = targen::store::read_dataset(in);
  targen::analysis::LabelDistribution dist = targen::analysis::label_distribution(ds);

  std::cout << "task: " << ds.task_id << "\n";
  std::cout << "run: " << ds.manifest.run_id << "\n";
  std::cout << "instances: " << ds.instances.size() << "\n";
  std::cout << "labels (original -> corrected):\n";
  std::set<std::string> labels;
  for (const auto& [label, _] : dist.original) labels.insert(label);
  for (const auto& [label, _] : dist.corrected) labels.insert(label);
  for (const auto& label : labels) {
    int before = dist.original.count(label) ? dist.original.at(label) : 0;
    int after = dist.corrected.count(label) ? dist.corrected.at(label) : 0;
    std::cout << "  " << label << ": " << before << " -> " << after << "\n";
  }
  std::map<std::string, int> statuses;
  for (const auto& inst : ds.instances) ++statuses[targen::instance_status_name(inst.status)];
  std::cout << "statuses:";
  for (const auto& [status, n] : statuses) std::cout << " " << status << "=" << n;
  std::cout << "\n";
  return 0;
}

int cmd_export_task(const std::string& id, const std::string& out) {
  targen::packs::TaskPack pack = targen::packs::builtin_task(id);
  targen::store::write_file_atomic(out, targen::serialize_task_spec(pack.spec));
  std::cout << "task '" << pack.spec.task_id << "' exported to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic dataset generation, self-correction, and quality analysis"};
  app.set_version_flag("--version", targen::kToolVersion);
  app.set_config("--config", "", "read option defaults from an INI/TOML file");
  app.require_subcommand(1);

  int rc = 0;

  GenerateArgs gen;
  CLI::App* generate = app.add_subcommand("generate", "run the four-step generation pipeline");
  generate->add_option("--task", gen.task, "built-in task id or task spec file")->required();
  generate->add_option("--total", gen.cfg.total,
                       "instances to generate (-1 derives from the task)");
  generate->add_option("--contexts", gen.cfg.contexts, "contexts to request");
  generate->add_option("--seeds-per-context", gen.cfg.seeds_per_context,
                       "instance seeds per context");
  generate->add_option("--backend", gen.backend, "live, mock:FILE, or replay:FILE");
  generate->add_option("--record", gen.record_path, "record exchanges to this transcript");
  generate->add_option("--out", gen.out, "dataset output path")->required();
  generate->add_option("--model", gen.cfg.model, "model name sent to the backend");
  generate->add_option("--temperature", gen.cfg.temperature, "sampling temperature");
  generate->add_option("--max-tokens", gen.cfg.max_tokens, "completion token cap");
  generate->add_option("--per-seed-capacity", gen.cfg.per_seed_capacity,
                       "max instances drawn from one seed (0 = unbounded)");
  generate->add_option("--parse-retry-budget", gen.cfg.parse_retry_budget,
                       "extra attempts after an unparseable reply");
  generate->add_option("--checkpoint-every", gen.cfg.checkpoint_every,
                       "instances between progress checkpoints");
  generate->add_flag("--strict-seeds", gen.cfg.strict_seeds,
                     "fail when a context yields no seeds");
  generate->add_option("--checkpoint", gen.checkpoint_path, "write progress to this file");
  generate->add_option("--resume-from", gen.resume_path, "resume from a checkpoint file");
  generate->callback([&] { rc = run_generation(gen); });

  struct {
    std::string in, task, backend = "live", record, out, matrix;
    targen::correct::CorrectionConfig cfg;
  } cor;
  CLI::App* correct = app.add_subcommand("correct", "self-correct labels with a meta-prompt");
  correct->add_option("--in", cor.in, "dataset to correct")->required();
  correct->add_option("--task", cor.task, "task id or spec file (defaults to the dataset's)");
  correct->add_option("--backend", cor.backend, "live, mock:FILE, or replay:FILE");
  correct->add_option("--record", cor.record, "record exchanges to this transcript");
  correct->add_option("--out", cor.out, "corrected dataset output path")->required();
  correct->add_option("--matrix", cor.matrix, "write the confusion matrix CSV here");
  correct->add_option("--model", cor.cfg.model, "model name sent to the backend");
  correct->add_option("--max-tokens", cor.cfg.max_tokens, "completion token cap");
  correct->add_option("--checkpoint-every", cor.cfg.checkpoint_every,
                      "instances between progress checkpoints");
  correct->callback([&] {
    rc = cmd_correct(cor.in, cor.task, cor.backend, cor.record, cor.out, cor.matrix, cor.cfg);
  });

  struct {
    std::string in, reference, report;
    std::vector<std::string> reference_map, gazetteers, text_fields;
    std::size_t max_pairs = 100000;
    std::uint64_t seed = 0;
    bool exclude_duplicates = false;
    bool no_pvi = false;
  } ana;
  CLI::App* analyze = app.add_subcommand("analyze", "write a dataset quality report");
  analyze->add_option("--in", ana.in, "dataset to analyze")->required();
  analyze->add_option("--reference", ana.reference, "reference corpus for leakage checks");
  analyze->add_option("--reference-map", ana.reference_map,
                      "KEY=TARGET mappings for generic reference files (TARGET is label or "
                      "inputs.<field>)");
  analyze->add_option("--gazetteer", ana.gazetteers,
                      "TAG=FILE gazetteer for entity distributions (repeatable)");
  analyze->add_option("--report", ana.report, "report JSON output path")->required();
  analyze->add_option("--text-field", ana.text_fields,
                      "input fields to analyze (default: all fields)");
  analyze->add_option("--max-pairs", ana.max_pairs, "similarity pair sample cap");
  analyze->add_option("--seed", ana.seed, "similarity sampling seed");
  analyze->add_flag("--exclude-duplicates", ana.exclude_duplicates,
                    "skip identical-text pairs in similarity stats");
  analyze->add_flag("--no-pvi", ana.no_pvi, "skip the PVI section");
  analyze->callback([&] {
    rc = cmd_analyze(ana.in, ana.reference, ana.reference_map, ana.gazetteers, ana.report,
                     ana.text_fields, ana.max_pairs, ana.seed, ana.exclude_duplicates,
                     ana.no_pvi);
  });

  struct {
    std::string in;
  } st;
  CLI::App* stats = app.add_subcommand("stats", "print dataset label statistics");
  stats->add_option("--in", st.in, "dataset to summarize")->required();
  stats->callback([&] { rc = cmd_stats(st.in); });

  struct {
    std::string id, out;
  } exp;
  CLI::App* export_task = app.add_subcommand("export-task", "write a built-in task spec file");
  export_task->add_option("id", exp.id, "built-in task id")->required();
  export_task->add_option("--out", exp.out, "spec file output path")->required();
  export_task->callback([&] { rc = cmd_export_task(exp.id, exp.out); });

  GenerateArgs rep;
  CLI::App* replay = app.add_subcommand("replay", "regenerate from a transcript, no network");
  std::string transcript;
  replay->add_option("--transcript", transcript, "recorded transcript file")->required();
  replay->add_option("--task", rep.task, "built-in task id or task spec file")->required();
  replay->add_option("--total", rep.cfg.total, "instances to generate");
  replay->add_option("--contexts", rep.cfg.contexts, "contexts to request");
  replay->add_option("--seeds-per-context", rep.cfg.seeds_per_context,
                     "instance seeds per context");
  replay->add_option("--out", rep.out, "dataset output path")->required();
  replay->add_option("--model", rep.cfg.model, "model name sent to the backend");
  replay->add_option("--temperature", rep.cfg.temperature, "sampling temperature");
  replay->add_option("--max-tokens", rep.cfg.max_tokens, "completion token cap");
  replay->callback([&] {
    rep.backend = "replay:" + transcript;
    rc = run_generation(rep);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const targen::BudgetExhausted& e) {
    std::cerr << "budget exhausted: " << e.what() << "\n";
    return 4;
  } catch (const targen::TransportError& e) {
    std::cerr << "backend failure: " << e.what() << "\n";
    return 3;
  } catch (const targen::ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    for (const auto& issue : e.issues()) std::cerr << "  - " << issue << "\n";
    return 2;
  } catch (const targen::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return rc;
}
