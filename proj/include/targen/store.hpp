#pragma once

// Dataset files and analysis reports. A dataset file is JSON lines: the
// first line is the run manifest, every following line is one instance.
// Writes go through a temp file and rename, so a crash never leaves a
// partial file at the target path.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "targen/analysis.hpp"
#include "targen/core.hpp"
#include "targen/errors.hpp"
#include "targen/pipeline.hpp"
#include "targen/pvi.hpp"
#include "targen/sha256.hpp"

namespace targen::store {

using json = nlohmann::ordered_json;

// ---------------- atomic file output ----------------

inline void write_file_atomic(const std::string& path, const std::string& content) {
  std::string temp = path + ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write to '" + path + "'");
    out << content;
    out.flush();
    if (!out) {
      std::remove(temp.c_str());
      throw ValidationError("write failed for '" + path + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(temp, path, ec);
  if (ec) {
    std::remove(temp.c_str());
    throw ValidationError("cannot move temp file onto '" + path + "': " + ec.message());
  }
}

// ---------------- manifest and instance serialization ----------------

inline json manifest_to_json(const Manifest& m, std::uint64_t count) {
  json targets = json::object();
  for (const auto& [label, n] : m.label_targets) targets[label] = n;
  return json{{"run_id", m.run_id},
              {"tool_version", m.tool_version},
              {"task", m.task_id},
              {"spec_hash", m.spec_hash},
              {"backend", m.backend_id},
              {"temperature_generate", m.temperature_generate},
              {"temperature_correct", m.temperature_correct},
              {"max_tokens", m.max_tokens},
              {"labels", m.labels},
              {"fields", m.fields},
              {"label_targets", targets},
              {"completed_steps", m.completed_steps},
              {"created_at", m.created_at},
              {"deterministic_time", m.deterministic_time},
              {"count", count}};
}

inline Manifest manifest_from_json(const json& j) {
  Manifest m;
  m.run_id = j.value("run_id", "");
  m.tool_version = j.value("tool_version", "");
  m.task_id = j.at("task").get<std::string>();
  m.spec_hash = j.value("spec_hash", "");
  m.backend_id = j.value("backend", "");
  m.temperature_generate = j.value("temperature_generate", 1.0);
  m.temperature_correct = j.value("temperature_correct", 0.0);
  m.max_tokens = j.value("max_tokens", 1024);
  if (j.contains("labels")) m.labels = j.at("labels").get<std::vector<std::string>>();
  if (j.contains("fields")) m.fields = j.at("fields").get<std::vector<std::string>>();
  if (j.contains("label_targets"))
    for (const auto& [label, n] : j.at("label_targets").items())
      m.label_targets[label] = n.get<int>();
  if (j.contains("completed_steps"))
    m.completed_steps = j.at("completed_steps").get<std::vector<std::string>>();
  m.created_at = j.value("created_at", std::int64_t{0});
  m.deterministic_time = j.value("deterministic_time", false);
  m.instance_count = j.value("count", std::uint64_t{0});
  return m;
}

inline json instance_to_json(const GeneratedInstance& inst) {
  json meta = json::object();
  if (inst.provenance.context_id) meta["context_id"] = *inst.provenance.context_id;
  if (inst.provenance.seed_id) meta["seed_id"] = *inst.provenance.seed_id;
  json hashes = json::object();
  for (const auto& [stage, hash] : inst.provenance.prompt_hashes) hashes[stage] = hash;
  meta["prompt_hashes"] = hashes;
  meta["backend"] = inst.provenance.backend_id;
  meta["timestamp"] = inst.provenance.timestamp;

  json inputs = json::object();
  for (const auto& [field, value] : inst.inputs) inputs[field] = value;

  return json{{"id", inst.instance_id},
              {"task", inst.task_id},
              {"inputs", inputs},
              {"label", inst.final_label()},
              {"original_label", inst.original_label},
              {"status", instance_status_name(inst.status)},
              {"meta", meta}};
}

namespace detail {

inline ValidationError line_error(std::size_t line, const std::string& message) {
  return ValidationError("line " + std::to_string(line) + ": " + message);
}

}  // namespace detail

inline GeneratedInstance instance_from_json(const json& j, std::size_t line,
                                            const LabelSchema& schema) {
  for (const char* key : {"id", "task", "inputs", "label", "original_label", "status"})
    if (!j.contains(key)) throw detail::line_error(line, "missing key '" + std::string(key) + "'");

  GeneratedInstance inst;
  inst.instance_id = j.at("id").get<std::string>();
  inst.task_id = j.at("task").get<std::string>();
  for (const auto& [field, value] : j.at("inputs").items())
    inst.inputs[field] = value.get<std::string>();
  inst.original_label = j.at("original_label").get<std::string>();
  std::string label = j.at("label").get<std::string>();

  std::string status_text = j.at("status").get<std::string>();
  auto status = instance_status_from(status_text);
  if (!status) throw detail::line_error(line, "unknown status '" + status_text + "'");
  inst.status = *status;

  if (!schema.labels.empty()) {
    if (!schema.contains(inst.original_label))
      throw detail::line_error(
          line, "original_label '" + inst.original_label + "' is not in the declared schema");
    if (!schema.contains(label))
      throw detail::line_error(line, "label '" + label + "' is not in the declared schema");
  }

  bool relabeled = fold_label(label) != fold_label(inst.original_label);
  if (relabeled) inst.corrected_label = label;
  if (relabeled != (inst.status == InstanceStatus::relabeled))
    throw detail::line_error(line, "status '" + status_text +
                                       "' is inconsistent with label '" + label +
                                       "' and original_label '" + inst.original_label + "'");

  if (j.contains("meta")) {
    const json& meta = j.at("meta");
    if (meta.contains("context_id"))
      inst.provenance.context_id = meta.at("context_id").get<std::string>();
    if (meta.contains("seed_id"))
      inst.provenance.seed_id = meta.at("seed_id").get<std::string>();
    if (meta.contains("prompt_hashes"))
      for (const auto& [stage, hash] : meta.at("prompt_hashes").items())
        inst.provenance.prompt_hashes[stage] = hash.get<std::string>();
    inst.provenance.backend_id = meta.value("backend", "");
    inst.provenance.timestamp = meta.value("timestamp", std::int64_t{0});
  }
  return inst;
}

// ---------------- dataset files ----------------

inline void write_dataset(const Dataset& ds, const std::string& path,
                          const json* manifest_extra = nullptr) {
  auto issues = ds.issues();
  if (!issues.empty()) throw ValidationError("dataset is not valid", issues);

  json header = manifest_to_json(ds.manifest, ds.instances.size());
  if (manifest_extra)
    for (const auto& [key, value] : manifest_extra->items()) header[key] = value;

  std::string content = header.dump() + "\n";
  for (const auto& inst : ds.instances) content += instance_to_json(inst).dump() + "\n";
  write_file_atomic(path, content);
}

inline Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open dataset file '" + path + "'");

  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  LabelSchema schema;
  std::set<std::string> seen_ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw detail::line_error(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (line_no == 1) {
      try {
        ds.manifest = manifest_from_json(j);
      } catch (const nlohmann::json::exception& e) {
        throw detail::line_error(1, std::string("invalid manifest: ") + e.what());
      }
      ds.task_id = ds.manifest.task_id;
      schema = LabelSchema(ds.manifest.labels);
      continue;
    }
    GeneratedInstance inst = instance_from_json(j, line_no, schema);
    if (fold_label(inst.task_id) != fold_label(ds.task_id))
      throw detail::line_error(line_no, "instance task '" + inst.task_id +
                                            "' does not match manifest task '" + ds.task_id + "'");
    if (!seen_ids.insert(inst.instance_id).second)
      throw detail::line_error(line_no, "duplicate instance id '" + inst.instance_id + "'");
    ds.instances.push_back(std::move(inst));
  }
  if (line_no == 0) throw ValidationError("dataset file '" + path + "' is empty");
  if (ds.instances.size() != ds.manifest.instance_count)
    throw ValidationError("dataset declares " + std::to_string(ds.manifest.instance_count) +
                          " instances but contains " + std::to_string(ds.instances.size()));
  return ds;
}

// Content identity of the instances alone: manifest and per-instance
// timestamps stay out, so recording time never changes the hash.
inline std::string dataset_content_hash(const Dataset& ds) {
  std::string canon;
  for (const auto& inst : ds.instances) {
    json j = instance_to_json(inst);
    j["meta"].erase("timestamp");
    canon += j.dump() + "\n";
  }
  return sha256_hex(canon);
}

// ---------------- checkpoint files ----------------

inline json run_state_to_json(const pipeline::RunState& state) {
  json seeds = json::array();
  for (const auto& seed : state.seeds) {
    json s{{"seed_id", seed.seed_id}};
    if (seed.context_id) s["context_id"] = *seed.context_id;
    json payload = json::object();
    for (const auto& [k, v] : seed.payload) payload[k] = v;
    s["payload"] = payload;
    seeds.push_back(std::move(s));
  }
  json instances = json::array();
  for (const auto& inst : state.instances) instances.push_back(instance_to_json(inst));
  return json{{"completed_steps",
               std::vector<std::string>(state.completed_steps.begin(),
                                        state.completed_steps.end())},
              {"contexts", state.contexts},
              {"seeds", seeds},
              {"instances", instances}};
}

inline pipeline::RunState run_state_from_json(const json& j) {
  pipeline::RunState state;
  for (const auto& step : j.value("completed_steps", std::vector<std::string>{}))
    state.completed_steps.insert(step);
  if (j.contains("contexts"))
    state.contexts = j.at("contexts").get<std::vector<std::string>>();
  if (j.contains("seeds")) {
    for (const auto& s : j.at("seeds")) {
      InstanceSeed seed;
      seed.seed_id = s.at("seed_id").get<std::string>();
      if (s.contains("context_id")) seed.context_id = s.at("context_id").get<std::string>();
      for (const auto& [k, v] : s.at("payload").items()) seed.payload[k] = v.get<std::string>();
      state.seeds.push_back(std::move(seed));
    }
  }
  if (j.contains("instances")) {
    std::size_t line = 0;
    for (const auto& inst : j.at("instances"))
      state.instances.push_back(instance_from_json(inst, ++line, LabelSchema{}));
  }
  return state;
}

inline void write_run_state(const pipeline::RunState& state, const std::string& path) {
  write_file_atomic(path, run_state_to_json(state).dump(2) + "\n");
}

inline pipeline::RunState read_run_state(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return run_state_from_json(json::parse(buffer.str()));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("invalid checkpoint file '" + path + "': " + e.what());
  }
}

// ---------------- reference corpora ----------------

struct ReferenceRecord {
  std::map<std::string, std::string> inputs;
  std::string label;
};

// Generic JSON-lines import: key_map sends source keys to "label" or
// "inputs.<field>". An empty map reads the file as one of this tool's own
// dataset files.
inline std::vector<ReferenceRecord> import_reference(
    const std::string& path, const std::map<std::string, std::string>& key_map = {}) {
  std::vector<ReferenceRecord> records;
  if (key_map.empty()) {
    Dataset ds = read_dataset(path);
    for (const auto& inst : ds.instances) records.push_back({inst.inputs, inst.final_label()});
    return records;
  }

  for (const auto& [source, target] : key_map)
    if (target != "label" && target.rfind("inputs.", 0) != 0)
      throw ValidationError("mapping target for key '" + source +
                            "' must be 'label' or 'inputs.<field>', got '" + target + "'");

  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open reference file '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw detail::line_error(line_no, std::string("invalid JSON: ") + e.what());
    }
    ReferenceRecord rec;
    for (const auto& [source, target] : key_map) {
      if (!j.contains(source)) {
        std::string available;
        for (const auto& [key, _] : j.items()) available += (available.empty() ? "" : ", ") + key;
        throw detail::line_error(line_no, "key '" + source +
                                              "' not found; available keys: " + available);
      }
      std::string value = j.at(source).is_string() ? j.at(source).get<std::string>()
                                                   : j.at(source).dump();
      if (target == "label") rec.label = value;
      else rec.inputs[target.substr(7)] = value;
    }
    records.push_back(std::move(rec));
  }
  return records;
}

inline std::vector<std::string> reference_texts(const std::vector<ReferenceRecord>& records) {
  std::vector<std::string> texts;
  texts.reserve(records.size());
  for (const auto& rec : records) {
    std::string text;
    for (const auto& [_, value] : rec.inputs) {
      if (!text.empty()) text += " ";
      text += value;
    }
    texts.push_back(std::move(text));
  }
  return texts;
}

// ---------------- analysis reports ----------------

struct ReportOptions {
  std::optional<std::vector<ReferenceRecord>> reference;
  std::vector<std::pair<std::string, analysis::GazetteerTagger>> taggers;
  std::vector<std::string> text_fields;
  analysis::SimilarityOptions similarity;
  pvi::ModelFamilyConfig pvi_config;
  bool run_pvi = true;
};

inline json build_analysis_report(const Dataset& ds, const ReportOptions& options = {}) {
  std::vector<std::string> texts = analysis::dataset_texts(ds, options.text_fields);
  analysis::HashedNgramEmbedding provider;

  json report;
  report["task"] = ds.task_id;
  report["run_id"] = ds.manifest.run_id;
  report["instances"] = ds.instances.size();

  report["lexical"] = json{{"unique_tokens", analysis::vocab_count(texts)},
                           {"texts", texts.size()}};

  if (texts.size() < 2) {
    report["semantic"] = json{{"skipped", "needs at least 2 texts"}};
  } else {
    analysis::SimilarityStats stats =
        analysis::pairwise_similarity_stats(texts, provider, options.similarity);
    json bins = json::array();
    for (int b = 0; b < analysis::SimilarityStats::kBins; ++b)
      bins.push_back(json::array(
          {analysis::SimilarityStats::bin_lower(b), stats.histogram[static_cast<std::size_t>(b)]}));
    report["semantic"] = json{{"provider", provider.name()},
                              {"mean", stats.mean},
                              {"stdev", stats.stdev},
                              {"pairs", stats.pairs},
                              {"histogram", bins}};
  }

  std::set<std::string> labels_present;
  for (const auto& inst : ds.instances) labels_present.insert(inst.final_label());
  if (!options.run_pvi) {
    report["pvi"] = json{{"skipped", "disabled"}};
  } else if (labels_present.size() < 2) {
    report["pvi"] = json{{"skipped", "needs at least 2 labels present"}};
  } else {
    pvi::ModelFamilyConfig cfg = options.pvi_config;
    cfg.text_fields = options.text_fields;
    pvi::PviSummary summary = pvi::pvi_dataset(ds, cfg);
    json records = json::array();
    for (const auto& rec : summary.records)
      records.push_back(json{{"id", rec.instance_id},
                             {"log2_conditional", rec.log2_conditional},
                             {"log2_null", rec.log2_null},
                             {"pvi_bits", rec.pvi_bits}});
    report["pvi"] = json{{"mean_bits", summary.mean_bits},
                         {"mean_log2_conditional", summary.mean_log2_conditional},
                         {"mean_log2_null", summary.mean_log2_null},
                         {"eval_instances", summary.records.size()},
                         {"records", records}};
  }

  json bias = json::object();
  for (const auto& [tag, tagger] : options.taggers) {
    json ranked = json::array();
    for (const auto& [surface, count] : analysis::entity_distribution(texts, tagger, tag))
      ranked.push_back(json::array({surface, count}));
    bias[tag] = ranked;
  }
  report["bias"] = bias;

  if (options.reference) {
    std::vector<std::string> ref_texts = reference_texts(*options.reference);
    auto pairs = analysis::leakage_check(texts, ref_texts);
    json matches = json::array();
    for (const auto& pair : pairs)
      matches.push_back(json::array({pair.dataset_index, pair.reference_index}));
    report["leakage"] = json{{"checked", true},
                             {"reference_size", ref_texts.size()},
                             {"pairs", pairs.size()},
                             {"matches", matches}};
  } else {
    report["leakage"] = json{{"checked", false}};
  }

  analysis::LabelDistribution dist = analysis::label_distribution(ds);
  json original = json::object(), corrected = json::object(), statuses = json::object();
  for (const auto& [label, n] : dist.original) original[label] = n;
  for (const auto& [label, n] : dist.corrected) corrected[label] = n;
  std::map<std::string, int> status_counts;
  for (const auto& inst : ds.instances) ++status_counts[instance_status_name(inst.status)];
  for (const auto& [status, n] : status_counts) statuses[status] = n;
  report["labels"] =
      json{{"original", original}, {"corrected", corrected}, {"statuses", statuses}};
  return report;
}

}  // namespace targen::store
