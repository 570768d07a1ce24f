#pragma once

// Pointwise V-information over a dataset: a small multinomial logistic
// regression family on hashed text features, trained full-batch, against a
// bias-only null model. PVI of an instance is log2 p_cond(y|x) minus
// log2 p_null(y), so positive values mark easier-than-chance instances.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "targen/analysis.hpp"
#include "targen/core.hpp"
#include "targen/errors.hpp"

namespace targen::pvi {

struct PviRecord {
  std::string instance_id;
  double log2_conditional = 0.0;
  double log2_null = 0.0;
  double pvi_bits = 0.0;
};

struct ModelFamilyConfig {
  std::size_t feature_dim = 1u << 16;
  double learning_rate = 1.0;
  int epochs = 400;
  double l2 = 1e-4;
  double train_fraction = 0.8;
  std::uint64_t seed = 7;
  std::vector<std::string> text_fields;  // empty: every input field in key order
};

// Hashed unigram + bigram counts at the configured dimension.
inline analysis::SparseVector text_features(const std::string& text, std::size_t dim) {
  std::map<std::uint32_t, double> counts;
  auto bump = [&](const std::string& feature) {
    counts[static_cast<std::uint32_t>(analysis::detail::fnv1a(feature) % dim)] += 1.0;
  };
  std::vector<std::string> tokens = analysis::tokenize(text);
  for (const auto& tok : tokens) bump("u:" + tok);
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i)
    bump("b:" + tokens[i] + "\x1f" + tokens[i + 1]);
  analysis::SparseVector v;
  v.entries.assign(counts.begin(), counts.end());
  return v;
}

struct LogisticModel {
  std::size_t dim = 0;
  std::vector<std::string> classes;      // sorted label names
  std::vector<double> weights;           // classes x dim, row-major
  std::vector<double> bias;              // classes

  std::vector<double> predict_proba(const analysis::SparseVector& x) const {
    std::vector<double> logits = bias;
    for (std::size_t c = 0; c < classes.size(); ++c) {
      const double* row = weights.data() + c * dim;
      for (const auto& [idx, value] : x.entries) logits[c] += row[idx] * value;
    }
    double top = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double& z : logits) {
      z = std::exp(z - top);
      sum += z;
    }
    for (double& z : logits) z /= sum;
    return logits;
  }

  std::size_t class_index(const std::string& label) const {
    for (std::size_t c = 0; c < classes.size(); ++c)
      if (fold_label(classes[c]) == fold_label(label)) return c;
    throw ValidationError("label '" + label + "' is not a model class");
  }
};

struct SplitAssignment {
  std::vector<std::size_t> train;
  std::vector<std::size_t> eval;
};

struct ModelFamily {
  LogisticModel conditional;
  LogisticModel null_model;
  SplitAssignment split;
};

namespace detail {

// Mean negative log likelihood in nats plus (l2/2)·|W|^2, and its gradient
// in the flat layout [weights (K x dim), bias (K)]. The bias block is not
// penalized, which lets the null model converge to exact label priors.
inline double loss_and_gradient(const std::vector<double>& theta,
                                const std::vector<analysis::SparseVector>& xs,
                                const std::vector<std::size_t>& ys, std::size_t classes,
                                std::size_t dim, double l2, std::vector<double>* gradient) {
  if (gradient) gradient->assign(theta.size(), 0.0);
  const double* weights = theta.data();
  const double* bias = theta.data() + classes * dim;
  double n = static_cast<double>(xs.size());
  double loss = 0.0;

  std::vector<double> logits(classes);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t c = 0; c < classes; ++c) {
      double z = bias[c];
      const double* row = weights + c * dim;
      for (const auto& [idx, value] : xs[i].entries) z += row[idx] * value;
      logits[c] = z;
    }
    double top = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double& z : logits) {
      z = std::exp(z - top);
      sum += z;
    }
    for (double& z : logits) z /= sum;
    loss += -std::log(std::max(logits[ys[i]], 1e-300));

    if (gradient) {
      for (std::size_t c = 0; c < classes; ++c) {
        double delta = (logits[c] - (c == ys[i] ? 1.0 : 0.0)) / n;
        double* grad_row = gradient->data() + c * dim;
        for (const auto& [idx, value] : xs[i].entries) grad_row[idx] += delta * value;
        (*gradient)[classes * dim + c] += delta;
      }
    }
  }
  loss /= n;

  double penalty = 0.0;
  for (std::size_t k = 0; k < classes * dim; ++k) penalty += weights[k] * weights[k];
  loss += 0.5 * l2 * penalty;
  if (gradient)
    for (std::size_t k = 0; k < classes * dim; ++k) (*gradient)[k] += l2 * weights[k];
  return loss;
}

inline LogisticModel train_logistic(const std::vector<analysis::SparseVector>& xs,
                                    const std::vector<std::size_t>& ys,
                                    std::vector<std::string> classes,
                                    const ModelFamilyConfig& cfg) {
  LogisticModel model;
  model.dim = cfg.feature_dim;
  model.classes = std::move(classes);
  std::size_t k = model.classes.size();
  std::vector<double> theta(k * cfg.feature_dim + k, 0.0);
  std::vector<double> gradient;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    loss_and_gradient(theta, xs, ys, k, cfg.feature_dim, cfg.l2, &gradient);
    for (std::size_t p = 0; p < theta.size(); ++p)
      theta[p] -= cfg.learning_rate * gradient[p];
  }
  model.weights.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(k * cfg.feature_dim));
  model.bias.assign(theta.begin() + static_cast<std::ptrdiff_t>(k * cfg.feature_dim), theta.end());
  return model;
}

}  // namespace detail

// Mean cross-entropy of the model on (xs, ys), in bits, without the L2 term.
inline double mean_nll_bits(const LogisticModel& model,
                            const std::vector<analysis::SparseVector>& xs,
                            const std::vector<std::size_t>& ys) {
  double total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double p = std::max(model.predict_proba(xs[i])[ys[i]], 1e-300);
    total += -std::log2(p);
  }
  return xs.empty() ? 0.0 : total / static_cast<double>(xs.size());
}

namespace detail {

struct PreparedDataset {
  std::vector<analysis::SparseVector> features;
  std::vector<std::size_t> class_ids;
  std::vector<std::string> classes;
};

inline PreparedDataset prepare(const Dataset& ds, const ModelFamilyConfig& cfg) {
  PreparedDataset prep;
  std::set<std::string> labels;
  for (const auto& inst : ds.instances) labels.insert(inst.final_label());
  prep.classes.assign(labels.begin(), labels.end());
  if (prep.classes.size() < 2)
    throw ValidationError("model family needs at least 2 labels present, got " +
                          std::to_string(prep.classes.size()));

  std::map<std::string, std::size_t> index;
  for (std::size_t c = 0; c < prep.classes.size(); ++c) index[prep.classes[c]] = c;
  for (const auto& inst : ds.instances) {
    prep.features.push_back(
        text_features(analysis::instance_text(inst, cfg.text_fields), cfg.feature_dim));
    prep.class_ids.push_back(index.at(inst.final_label()));
  }
  return prep;
}

// Stratified split: per label (in class order), shuffle and reserve at least
// one train and, when the group has two or more members, one eval instance.
inline SplitAssignment stratified_split(const PreparedDataset& prep,
                                        const ModelFamilyConfig& cfg) {
  SplitAssignment split;
  std::mt19937_64 rng(cfg.seed);
  for (std::size_t c = 0; c < prep.classes.size(); ++c) {
    std::vector<std::size_t> group;
    for (std::size_t i = 0; i < prep.class_ids.size(); ++i)
      if (prep.class_ids[i] == c) group.push_back(i);
    std::shuffle(group.begin(), group.end(), rng);
    std::size_t n = group.size();
    auto want = static_cast<std::size_t>(std::lround(cfg.train_fraction * static_cast<double>(n)));
    std::size_t train_count = n < 2 ? n : std::clamp<std::size_t>(want, 1, n - 1);
    for (std::size_t i = 0; i < n; ++i)
      (i < train_count ? split.train : split.eval).push_back(group[i]);
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.eval.begin(), split.eval.end());
  return split;
}

}  // namespace detail

inline ModelFamily train_model_family(const Dataset& ds, const ModelFamilyConfig& cfg = {}) {
  detail::PreparedDataset prep = detail::prepare(ds, cfg);
  ModelFamily family;
  family.split = detail::stratified_split(prep, cfg);

  std::vector<analysis::SparseVector> train_x;
  std::vector<std::size_t> train_y;
  for (std::size_t i : family.split.train) {
    train_x.push_back(prep.features[i]);
    train_y.push_back(prep.class_ids[i]);
  }

  family.conditional = detail::train_logistic(train_x, train_y, prep.classes, cfg);
  std::vector<analysis::SparseVector> zeroed(train_x.size());
  family.null_model = detail::train_logistic(zeroed, train_y, prep.classes, cfg);
  return family;
}

struct PviSummary {
  std::vector<PviRecord> records;
  double mean_bits = 0.0;
  double mean_log2_conditional = 0.0;
  double mean_log2_null = 0.0;
  SplitAssignment split;
};

inline PviSummary pvi_dataset(const Dataset& ds, const ModelFamilyConfig& cfg = {}) {
  detail::PreparedDataset prep = detail::prepare(ds, cfg);
  ModelFamily family = train_model_family(ds, cfg);

  PviSummary summary;
  summary.split = family.split;
  std::vector<double> null_proba = family.null_model.predict_proba({});
  for (std::size_t i : family.split.eval) {
    std::vector<double> cond = family.conditional.predict_proba(prep.features[i]);
    PviRecord rec;
    rec.instance_id = ds.instances[i].instance_id;
    rec.log2_conditional = std::log2(std::max(cond[prep.class_ids[i]], 1e-300));
    rec.log2_null = std::log2(std::max(null_proba[prep.class_ids[i]], 1e-300));
    rec.pvi_bits = rec.log2_conditional - rec.log2_null;
    summary.records.push_back(std::move(rec));
  }
  if (!summary.records.empty()) {
    double n = static_cast<double>(summary.records.size());
    for (const auto& rec : summary.records) {
      summary.mean_bits += rec.pvi_bits / n;
      summary.mean_log2_conditional += rec.log2_conditional / n;
      summary.mean_log2_null += rec.log2_null / n;
    }
  }
  return summary;
}

}  // namespace targen::pvi
