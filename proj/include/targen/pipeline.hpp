#pragma once

// Four-step generation pipeline: plan labels, generate contexts (Step 1),
// instance seeds (Step 2), and label-constrained instances (Step 3), with
// checkpointing and resumption. Self-correction (Step 4) lives in
// selfcorrect.hpp and consumes the Dataset produced here.

#include <deque>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "targen/backend.hpp"
#include "targen/clock.hpp"
#include "targen/core.hpp"
#include "targen/taskpacks.hpp"
#include "targen/taskspec_io.hpp"
#include "targen/version.hpp"

namespace targen::pipeline {

struct PipelineConfig {
  int contexts = 10;
  int seeds_per_context = 10;
  // -1 derives the total: explicit policies use the sum of their counts,
  // anything else falls back to 100. 0 is an explicit empty run.
  int total = -1;
  int parse_retry_budget = 2;  // extra attempts after the first reply
  int per_seed_capacity = 0;   // max instances drawn from one seed; 0 = unbounded
  int checkpoint_every = 50;
  bool strict_seeds = false;
  std::string model = "default";
  double temperature = 1.0;
  int max_tokens = 1024;
};

struct LabelPlan {
  std::vector<std::string> sequence;  // one canonical label per planned instance
  std::map<std::string, int> counts;

  int total() const { return static_cast<int>(sequence.size()); }
};

struct RunState {
  std::set<std::string> completed_steps;  // "contexts", "seeds", "instances"
  std::vector<std::string> contexts;
  std::vector<InstanceSeed> seeds;
  std::vector<GeneratedInstance> instances;

  bool completed(const std::string& step) const { return completed_steps.count(step) > 0; }
};

// Thrown when the seeds cannot fulfil the plan; carries the dataset built so
// far (a fulfilled prefix of the plan).
class PlanUnfulfilled : public Error {
 public:
  PlanUnfulfilled(std::string message, Dataset partial)
      : Error(std::move(message)), partial_(std::move(partial)) {}
  const Dataset& partial() const { return partial_; }

 private:
  Dataset partial_;
};

using CheckpointFn = std::function<void(const RunState&, const std::string& step)>;

// ---------------- template rendering ----------------

namespace detail {

inline std::string normalize_key(const std::string& s) {
  std::string out;
  for (char c : s)
    if (std::isalnum(static_cast<unsigned char>(c)))
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return out;
}

}  // namespace detail

// Substitutes {PLACEHOLDER} occurrences; keys are matched after stripping
// non-alphanumerics and case, so payload key "subject_1" serves {SUBJECT 1}.
inline std::string render_template(const std::string& tmpl,
                                   const std::map<std::string, std::string>& values) {
  std::map<std::string, std::string> normalized;
  for (const auto& [k, v] : values) normalized[detail::normalize_key(k)] = v;
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      std::size_t j = tmpl.find('}', i + 1);
      if (j != std::string::npos) {
        std::string name = tmpl.substr(i + 1, j - i - 1);
        auto it = normalized.find(detail::normalize_key(name));
        if (it == normalized.end())
          throw ValidationError("unresolved template placeholder {" + name + "}");
        out += it->second;
        i = j + 1;
        continue;
      }
    }
    out.push_back(tmpl[i]);
    ++i;
  }
  return out;
}

// ---------------- label planning ----------------

inline LabelPlan plan_labels(const LabelSchema& schema, int total, BalancePolicy policy,
                             const std::map<std::string, int>& explicit_counts = {}) {
  if (total < 0) throw ValidationError("plan total must be non-negative");
  if (schema.labels.empty()) throw ValidationError("label schema is empty");
  LabelPlan plan;
  for (const auto& l : schema.labels) plan.counts[l] = 0;

  switch (policy) {
    case BalancePolicy::balanced:
    case BalancePolicy::alternating: {
      // Round-robin over schema order; for two labels this is the strict
      // alternation the alternating policy asks for.
      for (int i = 0; i < total; ++i) {
        const std::string& label = schema.labels[i % schema.labels.size()];
        plan.sequence.push_back(label);
        ++plan.counts[label];
      }
      break;
    }
    case BalancePolicy::explicit_counts: {
      int sum = 0;
      std::map<std::string, int> canon;
      for (const auto& [raw, n] : explicit_counts) {
        auto label = schema.canonical(raw);
        if (!label) throw ValidationError("explicit count for unknown label '" + raw + "'");
        if (n < 0) throw ValidationError("explicit count for '" + raw + "' is negative");
        canon[*label] += n;
        sum += n;
      }
      if (sum != total)
        throw ValidationError("explicit counts sum to " + std::to_string(sum) +
                              " but the requested total is " + std::to_string(total));
      for (const auto& label : schema.labels) {
        int n = canon.count(label) ? canon[label] : 0;
        plan.counts[label] = n;
        for (int i = 0; i < n; ++i) plan.sequence.push_back(label);
      }
      break;
    }
  }
  return plan;
}

// ---------------- step driver ----------------

namespace detail {

struct Caller {
  backend::ChatBackend& backend;
  const PipelineConfig& cfg;

  backend::ChatResponse call(const std::vector<backend::ChatMessage>& messages,
                             std::string* request_hash = nullptr) const {
    backend::ChatRequest req;
    req.model = cfg.model;
    req.messages = messages;
    req.temperature = cfg.temperature;
    req.max_tokens = cfg.max_tokens;
    if (request_hash) *request_hash = backend::request_hash(req);
    return backend.complete(req);
  }
};

inline std::map<std::string, std::string> context_values(const std::string& context, int n) {
  return {{"N", std::to_string(n)}, {"CONTEXT", context}, {"DOMAIN", context},
          {"CATEGORY", context}, {"WORD", context},       {"TOPIC", context}};
}

inline std::string nudge_text(const std::string& reason) {
  return "The previous reply could not be used (" + reason +
         "). Follow the requested format exactly and reply again.";
}

}  // namespace detail

// Step 1. Packs with fixed context lists return them without backend calls.
inline std::vector<std::string> generate_contexts(const packs::TaskPack& pack,
                                                  backend::ChatBackend& backend, int k,
                                                  const PipelineConfig& cfg = {}) {
  if (k == 0) return {};
  if (k < 0) throw ValidationError("requested context count is negative");
  if (!pack.fixed_contexts.empty()) return pack.fixed_contexts;

  const PromptStage* st = pack.spec.stage_for(StageRole::contexts);
  if (!st) throw ValidationError("task '" + pack.spec.task_id + "' has no contexts stage");

  detail::Caller caller{backend, cfg};
  std::vector<backend::ChatMessage> messages{
      {"user", render_template(st->template_text, {{"N", std::to_string(k)}})}};

  std::vector<std::string> unique;
  std::set<std::string> seen;
  int attempts_left = 1 + cfg.parse_retry_budget;
  while (attempts_left-- > 0) {
    auto response = caller.call(messages);
    messages.push_back({"assistant", response.content});
    try {
      for (const auto& item : text::parse_numbered_list(response.content)) {
        if (static_cast<int>(unique.size()) >= k) break;
        if (seen.insert(fold_label(item)).second) unique.push_back(trim(item));
      }
    } catch (const ParseFailure&) {
      // No usable items in this reply; the continuation below asks again.
    }
    if (static_cast<int>(unique.size()) >= k) return unique;
    int remaining = k - static_cast<int>(unique.size());
    messages.push_back(
        {"user", "Generate " + std::to_string(remaining) +
                     " more, different from all of the above. Output a numbered list."});
  }
  throw BudgetExhausted("could not collect " + std::to_string(k) + " unique contexts for task '" +
                            pack.spec.task_id + "' within the retry budget",
                        unique);
}

// Step 2. Tasks without a seeds stage pass contexts through as degenerate
// seeds whose payload carries the context text.
inline std::vector<InstanceSeed> generate_seeds(const packs::TaskPack& pack,
                                                backend::ChatBackend& backend,
                                                const std::vector<std::string>& contexts,
                                                int n_per_context,
                                                const PipelineConfig& cfg = {}) {
  std::vector<InstanceSeed> seeds;
  std::set<std::string> seen_payloads;
  auto add_seed = [&](const std::string& context_id,
                      std::map<std::string, std::string> payload) {
    std::string key;
    for (const auto& [k, v] : payload) key += k + "\x1f" + v + "\x1e";
    if (!seen_payloads.insert(key).second) return;  // exact duplicate of an earlier seed
    InstanceSeed seed;
    seed.seed_id = "seed-" + std::to_string(seeds.size() + 1);
    seed.context_id = context_id;
    seed.payload = std::move(payload);
    seeds.push_back(std::move(seed));
  };

  const PromptStage* st = pack.spec.stage_for(StageRole::seeds);
  detail::Caller caller{backend, cfg};
  for (std::size_t ci = 0; ci < contexts.size(); ++ci) {
    const std::string& context = contexts[ci];
    std::string context_id = "ctx-" + std::to_string(ci + 1);
    if (!st) {
      add_seed(context_id, {{"context", context}, {"domain", context}});
      continue;
    }
    std::vector<backend::ChatMessage> messages{
        {"user", render_template(st->template_text,
                                 detail::context_values(context, n_per_context))}};
    std::size_t before = seeds.size();
    int attempts_left = 1 + cfg.parse_retry_budget;
    while (attempts_left-- > 0) {
      auto response = caller.call(messages);
      messages.push_back({"assistant", response.content});
      try {
        auto payloads = pack.seed_assembler
                            ? pack.seed_assembler(context, response.content)
                            : packs::detail::one_item_seeds("seed", response.content);
        for (auto& p : payloads) add_seed(context_id, std::move(p));
        break;
      } catch (const ParseFailure& e) {
        if (attempts_left == 0) break;  // context skipped
        messages.push_back({"user", detail::nudge_text(e.what())});
      }
    }
    if (cfg.strict_seeds && seeds.size() == before)
      throw BudgetExhausted(
          "context '" + context + "' yielded no seeds within the retry budget", {});
  }
  return seeds;
}

namespace detail {

struct Candidate {
  std::map<std::string, std::string> inputs;
  std::size_t seed_index;
  std::string request_hash;
};

}  // namespace detail

// Step 3. Walks the plan in order; each planned label draws from a per-label
// candidate buffer refilled by round-robin seed calls.
inline std::vector<GeneratedInstance> generate_instances(
    const packs::TaskPack& pack, backend::ChatBackend& backend,
    const std::vector<InstanceSeed>& seeds, const LabelPlan& plan,
    const PipelineConfig& cfg = {}, std::size_t plan_offset = 0,
    std::size_t id_offset = 0,
    const std::function<void(const std::vector<GeneratedInstance>&)>& on_progress = nullptr) {
  const TaskSpec& spec = pack.spec;
  std::vector<GeneratedInstance> out;
  if (plan_offset >= plan.sequence.size()) return out;
  if (seeds.empty()) {
    Dataset empty;
    empty.task_id = spec.task_id;
    throw PlanUnfulfilled("no seeds available for task '" + spec.task_id + "'",
                          std::move(empty));
  }

  detail::Caller caller{backend, cfg};
  std::map<std::string, std::deque<detail::Candidate>> buffers;
  std::vector<bool> dead(seeds.size(), false);
  std::vector<int> used(seeds.size(), 0);
  std::size_t cursor = 0;

  auto seed_alive = [&](std::size_t i) {
    if (dead[i]) return false;
    return cfg.per_seed_capacity <= 0 || used[i] < cfg.per_seed_capacity;
  };
  auto next_seed = [&]() -> std::optional<std::size_t> {
    for (std::size_t step = 0; step < seeds.size(); ++step) {
      std::size_t i = (cursor + step) % seeds.size();
      if (seed_alive(i)) {
        cursor = (i + 1) % seeds.size();
        return i;
      }
    }
    return std::nullopt;
  };

  std::int64_t timestamp = backend.deterministic() ? 0 : SystemClock().unix_seconds();

  // Refills the label's buffer from one seed; false when the seed died.
  auto refill_from_seed = [&](const std::string& label, std::size_t seed_index) {
    const InstanceSeed& seed = seeds[seed_index];
    const PromptStage* st = spec.instance_stage_for(label);
    if (!st) throw ValidationError("no instances stage for label '" + label + "'");
    std::map<std::string, std::string> values = seed.payload;
    values["N"] = std::to_string(st->count);
    values["LABEL"] = label;
    std::vector<backend::ChatMessage> messages{
        {"user", render_template(st->template_text, values)}};
    int attempts_left = 1 + cfg.parse_retry_budget;
    while (attempts_left-- > 0) {
      std::string hash;
      auto response = caller.call(messages, &hash);
      messages.push_back({"assistant", response.content});
      std::string reason;
      try {
        auto batches = pack.instance_assembler(label, seed, response.content);
        std::size_t accepted = 0;
        for (auto& inputs : batches) {
          GeneratedInstance probe = make_instance(spec, "probe", inputs, label, {});
          for (const auto& [name, fn] : pack.post_processors) fn(probe, seed);
          if (!packs::validate_instance(pack, probe).empty()) continue;
          buffers[fold_label(label)].push_back({probe.inputs, seed_index, hash});
          ++accepted;
        }
        if (accepted > 0) return true;
        reason = "every parsed candidate failed validation";
      } catch (const ParseFailure& e) {
        reason = e.what();
      }
      if (attempts_left == 0) break;
      messages.push_back({"user", detail::nudge_text(reason)});
    }
    dead[seed_index] = true;
    return false;
  };

  for (std::size_t p = plan_offset; p < plan.sequence.size(); ++p) {
    const std::string& label = plan.sequence[p];
    GeneratedInstance* committed = nullptr;
    while (!committed) {
      auto& buffer = buffers[fold_label(label)];
      while (!buffer.empty() && !seed_alive(buffer.front().seed_index)) buffer.pop_front();
      if (!buffer.empty()) {
        detail::Candidate cand = std::move(buffer.front());
        buffer.pop_front();
        const InstanceSeed& seed = seeds[cand.seed_index];
        Provenance prov;
        prov.context_id = seed.context_id;
        prov.seed_id = seed.seed_id;
        prov.prompt_hashes["instances"] = cand.request_hash;
        prov.backend_id = backend.id();
        prov.timestamp = timestamp;
        GeneratedInstance inst =
            make_instance(spec, format_instance_id(spec.task_id, id_offset + out.size() + 1),
                          std::move(cand.inputs), label, std::move(prov));
        ++used[cand.seed_index];
        out.push_back(std::move(inst));
        committed = &out.back();
        break;
      }
      auto seed_index = next_seed();
      if (!seed_index) {
        Dataset partial;
        partial.task_id = spec.task_id;
        partial.instances = out;
        throw PlanUnfulfilled("seeds exhausted after " +
                                  std::to_string(id_offset + out.size()) + " of " +
                                  std::to_string(plan.sequence.size()) + " planned instances",
                              std::move(partial));
      }
      refill_from_seed(label, *seed_index);
    }
    if (on_progress && cfg.checkpoint_every > 0 &&
        out.size() % static_cast<std::size_t>(cfg.checkpoint_every) == 0)
      on_progress(out);
  }
  return out;
}

// ---------------- end-to-end run ----------------

namespace detail {

inline int derive_total(const TaskSpec& spec, const PipelineConfig& cfg) {
  if (cfg.total >= 0) return cfg.total;
  if (spec.balance_policy == BalancePolicy::explicit_counts) {
    int sum = 0;
    for (const auto& [_, n] : spec.explicit_counts) sum += n;
    return sum;
  }
  return 100;
}

inline Manifest make_manifest(const packs::TaskPack& pack, backend::ChatBackend& backend,
                              const PipelineConfig& cfg, const LabelPlan& plan) {
  const TaskSpec& spec = pack.spec;
  Manifest m;
  m.tool_version = kToolVersion;
  m.task_id = spec.task_id;
  m.spec_hash = task_spec_content_hash(serialize_task_spec(spec));
  m.backend_id = backend.id();
  m.temperature_generate = cfg.temperature;
  m.temperature_correct = 0.0;
  m.max_tokens = cfg.max_tokens;
  m.labels = spec.label_schema.labels;
  m.fields = spec.field_schema;
  m.label_targets = plan.counts;
  m.deterministic_time = backend.deterministic();
  m.created_at = m.deterministic_time ? 0 : SystemClock().unix_seconds();
  std::string key = m.spec_hash + "|" + m.backend_id + "|" + std::to_string(plan.total()) + "|" +
                    balance_policy_name(spec.balance_policy) + "|" + cfg.model + "|" +
                    std::to_string(cfg.contexts) + "|" + std::to_string(cfg.seeds_per_context);
  m.run_id = "run-" + sha256_hex(key).substr(0, 12);
  return m;
}

}  // namespace detail

inline Dataset run_pipeline(const packs::TaskPack& pack, backend::ChatBackend& backend,
                            const PipelineConfig& cfg = {}, RunState state = {},
                            const CheckpointFn& on_checkpoint = nullptr) {
  auto spec_issues = validate_task_spec(pack.spec);
  if (!spec_issues.empty()) throw ValidationError("task spec is invalid", spec_issues);

  int total = detail::derive_total(pack.spec, cfg);
  LabelPlan plan =
      plan_labels(pack.spec.label_schema, total, pack.spec.balance_policy,
                  pack.spec.explicit_counts);

  Dataset dataset;
  dataset.task_id = pack.spec.task_id;
  dataset.manifest = detail::make_manifest(pack, backend, cfg, plan);

  auto checkpoint = [&](const std::string& step) {
    state.completed_steps.insert(step);
    dataset.manifest.completed_steps.assign(state.completed_steps.begin(),
                                            state.completed_steps.end());
    if (on_checkpoint) on_checkpoint(state, step);
  };

  if (total == 0) {
    checkpoint("contexts");
    checkpoint("seeds");
    checkpoint("instances");
    dataset.manifest.instance_count = 0;
    return dataset;
  }

  if (!state.completed("contexts")) {
    state.contexts = generate_contexts(pack, backend, cfg.contexts, cfg);
    checkpoint("contexts");
  }
  if (!state.completed("seeds")) {
    state.seeds = generate_seeds(pack, backend, state.contexts, cfg.seeds_per_context, cfg);
    checkpoint("seeds");
  }

  std::size_t done = state.instances.size();
  if (done < plan.sequence.size()) {
    auto on_progress = [&](const std::vector<GeneratedInstance>& so_far) {
      RunState snapshot = state;
      snapshot.instances.insert(snapshot.instances.end(), so_far.begin(), so_far.end());
      if (on_checkpoint) on_checkpoint(snapshot, "instances-progress");
    };
    try {
      auto fresh =
          generate_instances(pack, backend, state.seeds, plan, cfg, done, done, on_progress);
      state.instances.insert(state.instances.end(), fresh.begin(), fresh.end());
    } catch (PlanUnfulfilled& e) {
      Dataset partial = dataset;
      partial.instances = state.instances;
      partial.instances.insert(partial.instances.end(), e.partial().instances.begin(),
                               e.partial().instances.end());
      partial.manifest.instance_count = partial.instances.size();
      throw PlanUnfulfilled(e.what(), std::move(partial));
    }
  }
  checkpoint("instances");

  dataset.instances = state.instances;
  dataset.manifest.instance_count = dataset.instances.size();
  return dataset;
}

}  // namespace targen::pipeline
