// Copyright 2026 The srpo Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SRPO_POLICY_HPP_
#define SRPO_POLICY_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <fmt/format.h>

#include "srpo/error.hpp"
#include "srpo/random.hpp"

namespace srpo {

struct SlotSpec {
  std::string name;
  std::vector<std::string> choices;
  std::vector<std::string> contexts;
};

/// Ordered decision slots, each a categorical choice conditioned on one of a
/// finite set of contexts. A (slot, context) pair is a "row" of logits.
class DecisionSchema {
 public:
  explicit DecisionSchema(std::vector<SlotSpec> slots) : slots_(std::move(slots)) {
    if (slots_.empty()) throw InvalidConfig("schema: no slots");
    for (const SlotSpec& s : slots_) {
      if (s.choices.empty() || s.contexts.empty()) {
        throw InvalidConfig("schema: slot '" + s.name + "' has an empty vocabulary");
      }
      row_base_.push_back(num_rows_);
      param_base_.push_back(num_params_);
      for (std::size_t c = 0; c < s.contexts.size(); ++c) {
        row_slot_.push_back(row_base_.size() - 1);
        row_offset_.push_back(num_params_ + c * s.choices.size());
      }
      num_rows_ += s.contexts.size();
      num_params_ += s.contexts.size() * s.choices.size();
    }
  }

  std::size_t num_slots() const { return slots_.size(); }
  std::size_t num_rows() const { return num_rows_; }
  std::size_t num_params() const { return num_params_; }
  const SlotSpec& slot(std::size_t i) const { return slots_.at(i); }
  std::span<const SlotSpec> slots() const { return slots_; }

  std::size_t slot_index(std::string_view name) const {
    for (std::size_t i = 0; i < slots_.size(); ++i)
      if (slots_[i].name == name) return i;
    throw InvalidConfig("schema: no slot named '" + std::string(name) + "'");
  }

  std::size_t row(std::size_t slot, std::size_t context) const {
    if (slot >= slots_.size() || context >= slots_[slot].contexts.size()) {
      throw UnknownContext(fmt::format("slot {} has no context {}", slot, context));
    }
    return row_base_[slot] + context;
  }

  std::size_t row(std::size_t slot, std::string_view context) const {
    const auto& ctx = slots_.at(slot).contexts;
    for (std::size_t c = 0; c < ctx.size(); ++c)
      if (ctx[c] == context) return row_base_[slot] + c;
    throw UnknownContext(fmt::format("slot '{}' has no context '{}'",
                                     slots_[slot].name, context));
  }

  std::size_t row_slot(std::size_t row) const { return row_slot_.at(row); }
  std::size_t row_context(std::size_t row) const {
    return row - row_base_[row_slot(row)];
  }
  std::size_t row_offset(std::size_t row) const { return row_offset_.at(row); }
  std::size_t row_width(std::size_t row) const {
    return slots_[row_slot(row)].choices.size();
  }

  /// FNV-1a over names, contexts and choices; checkpoints carry it.
  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::string_view s) {
      for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
      }
      h ^= 0xff;
      h *= 0x100000001b3ULL;
    };
    for (const SlotSpec& s : slots_) {
      mix(s.name);
      for (const auto& c : s.contexts) mix(c);
      mix("|");
      for (const auto& c : s.choices) mix(c);
      mix("#");
    }
    return h;
  }

 private:
  std::vector<SlotSpec> slots_;
  std::vector<std::size_t> row_base_;
  std::vector<std::size_t> param_base_;
  std::vector<std::size_t> row_slot_;
  std::vector<std::size_t> row_offset_;
  std::size_t num_rows_ = 0;
  std::size_t num_params_ = 0;
};

/// One sampled decision: the row it was drawn from, the chosen index, and
/// its log-probability under the policy that drew it.
struct Decision {
  std::size_t row = 0;
  std::size_t choice = 0;
  double logp = 0.0;
};

/// Factored categorical policy: one softmax(logits / temperature) per row.
/// Copying yields an independent snapshot.
class TabularPolicy {
 public:
  explicit TabularPolicy(std::shared_ptr<const DecisionSchema> schema,
                         double temperature = 1.0)
      : schema_(std::move(schema)),
        logits_(schema_->num_params(), 0.0),
        temperature_(temperature) {
    if (!(temperature_ > 0.0)) throw InvalidConfig("policy: temperature must be positive");
  }

  const DecisionSchema& schema() const { return *schema_; }
  const std::shared_ptr<const DecisionSchema>& schema_ptr() const { return schema_; }

  double temperature() const { return temperature_; }
  void set_temperature(double t) {
    if (!(t > 0.0)) throw InvalidConfig("policy: temperature must be positive");
    temperature_ = t;
  }

  std::size_t num_params() const { return logits_.size(); }
  std::span<const double> params() const { return logits_; }
  std::span<double> mutable_params() { return logits_; }

  std::span<const double> row_logits(std::size_t row) const {
    return std::span<const double>(logits_).subspan(schema_->row_offset(row),
                                                    schema_->row_width(row));
  }

  void set_logit(std::size_t row, std::size_t choice, double value) {
    check_choice(row, choice);
    logits_[schema_->row_offset(row) + choice] = value;
  }

  std::vector<double> probabilities(std::size_t row) const {
    const auto z = row_logits(row);
    const double hi = *std::max_element(z.begin(), z.end());
    std::vector<double> p(z.size());
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      p[i] = std::exp((z[i] - hi) / temperature_);
      total += p[i];
    }
    for (double& v : p) v /= total;
    return p;
  }

  double log_prob(std::size_t row, std::size_t choice) const {
    check_choice(row, choice);
    const auto z = row_logits(row);
    const double hi = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (double v : z) total += std::exp((v - hi) / temperature_);
    return (z[choice] - hi) / temperature_ - std::log(total);
  }

  /// grad[offset + c] += weight * (1[c == choice] - p_c) / temperature.
  void accumulate_grad_log_prob(std::size_t row, std::size_t choice,
                                double weight, std::span<double> grad) const {
    check_choice(row, choice);
    if (grad.size() != logits_.size()) throw ShapeMismatch("gradient size mismatch");
    const std::vector<double> p = probabilities(row);
    const std::size_t off = schema_->row_offset(row);
    for (std::size_t c = 0; c < p.size(); ++c) {
      const double indicator = c == choice ? 1.0 : 0.0;
      grad[off + c] += weight * (indicator - p[c]) / temperature_;
    }
  }

  std::size_t sample_choice(std::size_t row, Rng& rng) const {
    const std::vector<double> p = probabilities(row);
    double u = rng.uniform();
    for (std::size_t c = 0; c + 1 < p.size(); ++c) {
      if (u < p[c]) return c;
      u -= p[c];
    }
    return p.size() - 1;
  }

  // Lowest index among the maxima.
  std::size_t greedy_choice(std::size_t row) const {
    const auto z = row_logits(row);
    return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
  }

 private:
  void check_choice(std::size_t row, std::size_t choice) const {
    if (row >= schema_->num_rows()) throw UnknownContext(fmt::format("no row {}", row));
    if (choice >= schema_->row_width(row)) {
      throw UnknownChoice(fmt::format("row {} has no choice {}", row, choice));
    }
  }

  std::shared_ptr<const DecisionSchema> schema_;
  std::vector<double> logits_;
  double temperature_;
};

/// Samples each slot in schema order. `context_of(slot, decisions_so_far)`
/// returns the context index to condition on, or nullopt to skip the slot.
/// With `greedy` set, every slot takes its argmax.
template <class ContextFn>
std::vector<Decision> sample(const TabularPolicy& policy, ContextFn&& context_of,
                             Rng& rng, bool greedy = false) {
  const DecisionSchema& schema = policy.schema();
  std::vector<Decision> out;
  out.reserve(schema.num_slots());
  for (std::size_t s = 0; s < schema.num_slots(); ++s) {
    const std::optional<std::size_t> ctx =
        context_of(s, std::span<const Decision>(out));
    if (!ctx) continue;
    const std::size_t row = schema.row(s, *ctx);
    const std::size_t choice =
        greedy ? policy.greedy_choice(row) : policy.sample_choice(row, rng);
    out.push_back({row, choice, policy.log_prob(row, choice)});
  }
  return out;
}

inline std::vector<double> log_prob(const TabularPolicy& policy,
                                    std::span<const Decision> decisions) {
  std::vector<double> out;
  out.reserve(decisions.size());
  for (const Decision& d : decisions) out.push_back(policy.log_prob(d.row, d.choice));
  return out;
}

using SparseGradient = std::vector<std::pair<std::size_t, double>>;

/// Nonzero entries of d log pi(choice | row) / d logits.
inline SparseGradient grad_log_prob(const TabularPolicy& policy, const Decision& d) {
  const std::vector<double> p = policy.probabilities(d.row);
  if (d.choice >= p.size()) throw UnknownChoice(fmt::format("row {} has no choice {}", d.row, d.choice));
  const std::size_t off = policy.schema().row_offset(d.row);
  SparseGradient g;
  g.reserve(p.size());
  for (std::size_t c = 0; c < p.size(); ++c) {
    g.emplace_back(off + c, ((c == d.choice ? 1.0 : 0.0) - p[c]) / policy.temperature());
  }
  return g;
}

// Both optimizers minimize: params -= step(gradient).

class SgdOptimizer {
 public:
  explicit SgdOptimizer(double learning_rate) : lr_(learning_rate) {}

  void step(TabularPolicy& policy, std::span<const double> gradient) {
    if (gradient.size() != policy.num_params()) throw ShapeMismatch("sgd: gradient size mismatch");
    auto params = policy.mutable_params();
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr_ * gradient[i];
  }

  double learning_rate() const { return lr_; }

 private:
  double lr_;
};

class AdamOptimizer {
 public:
  explicit AdamOptimizer(double learning_rate, double beta1 = 0.9,
                         double beta2 = 0.999, double epsilon = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

  void step(TabularPolicy& policy, std::span<const double> gradient) {
    if (gradient.size() != policy.num_params()) throw ShapeMismatch("adam: gradient size mismatch");
    if (m_.empty()) {
      m_.assign(gradient.size(), 0.0);
      v_.assign(gradient.size(), 0.0);
    } else if (m_.size() != gradient.size()) {
      throw ShapeMismatch("adam: state size mismatch");
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    auto params = policy.mutable_params();
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * gradient[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * gradient[i] * gradient[i];
      params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
  }

  std::size_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

enum class OptimizerKind { kSgd, kAdam };

inline std::optional<OptimizerKind> parse_optimizer_kind(std::string_view s) {
  if (s == "sgd") return OptimizerKind::kSgd;
  if (s == "adam") return OptimizerKind::kAdam;
  return std::nullopt;
}

/// Either optimizer behind one interface.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate) {
    if (kind == OptimizerKind::kSgd) {
      impl_.emplace<SgdOptimizer>(learning_rate);
    } else {
      impl_.emplace<AdamOptimizer>(learning_rate);
    }
  }

  void step(TabularPolicy& policy, std::span<const double> gradient) {
    std::visit([&](auto& opt) { opt.step(policy, gradient); }, impl_);
  }

 private:
  std::variant<SgdOptimizer, AdamOptimizer> impl_{std::in_place_type<SgdOptimizer>, 0.0};
};

// Checkpoint format:
//   # srpo tabular policy v1
//   schema_hash = <16 hex digits>
//   temperature = <value>
//   <slot> <context> <choice> <logit>     (one line per parameter)

inline void save_policy(const TabularPolicy& policy, std::ostream& out) {
  const DecisionSchema& schema = policy.schema();
  out << "# srpo tabular policy v1\n";
  out << fmt::format("schema_hash = {:016x}\n", schema.hash());
  out << fmt::format("temperature = {:.17g}\n", policy.temperature());
  for (std::size_t r = 0; r < schema.num_rows(); ++r) {
    const SlotSpec& s = schema.slot(schema.row_slot(r));
    const std::string& ctx = s.contexts[schema.row_context(r)];
    const auto z = policy.row_logits(r);
    for (std::size_t c = 0; c < z.size(); ++c) {
      out << fmt::format("{} {} {} {:.17g}\n", s.name, ctx, s.choices[c], z[c]);
    }
  }
}

inline TabularPolicy load_policy(std::istream& in,
                                 std::shared_ptr<const DecisionSchema> schema) {
  auto header_value = [&in](std::string_view key) {
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos || std::string_view(line).substr(0, eq).find(key) == std::string_view::npos) {
        throw DataError("checkpoint: expected header '" + std::string(key) + "'");
      }
      std::string value = line.substr(eq + 1);
      value.erase(0, value.find_first_not_of(" \t"));
      return value;
    }
    throw DataError("checkpoint: truncated header");
  };
  const std::string hash_text = header_value("schema_hash");
  const std::string expected = fmt::format("{:016x}", schema->hash());
  if (hash_text != expected) {
    throw DataError("checkpoint: schema hash " + hash_text + " does not match " + expected);
  }
  const double temperature = std::strtod(header_value("temperature").c_str(), nullptr);
  TabularPolicy policy(schema, temperature > 0.0 ? temperature : 1.0);

  std::vector<bool> seen(policy.num_params(), false);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string slot, ctx, choice, value;
    if (!(fields >> slot >> ctx >> choice >> value)) {
      throw DataError("checkpoint: malformed line '" + line + "'");
    }
    std::size_t s = 0;
    std::size_t row = 0;
    try {
      s = schema->slot_index(slot);
      row = schema->row(s, ctx);
    } catch (const Error& e) {
      throw DataError(std::string("checkpoint: ") + e.what());
    }
    const auto& choices = schema->slot(s).choices;
    const auto it = std::find(choices.begin(), choices.end(), choice);
    if (it == choices.end()) throw DataError("checkpoint: unknown choice '" + choice + "'");
    const std::size_t c = static_cast<std::size_t>(it - choices.begin());
    char* end = nullptr;
    const double logit = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || !std::isfinite(logit)) {
      throw DataError("checkpoint: bad logit '" + value + "'");
    }
    policy.set_logit(row, c, logit);
    seen[schema->row_offset(row) + c] = true;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw DataError("checkpoint: parameter table is incomplete");
  }
  return policy;
}

}  // namespace srpo

#endif  // SRPO_POLICY_HPP_
