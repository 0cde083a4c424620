// SPDX-License-Identifier: Apache-2.0
#include "scalaw/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "scalaw/errors.hpp"

namespace scalaw {

namespace {

EvalReport score(const ScaledFamily& targets, const std::function<double(const CheckpointRecord&)>& predict,
                 std::string predictor) {
  if (targets.empty()) throw DataError("empty target set");
  EvalReport rep;
  rep.predictor = std::move(predictor);
  double sum = 0.0;
  for (const auto& r : targets.records()) {
    TargetError t;
    t.model_id = r.model_id;
    t.seed = r.seed_or_default();
    t.num_params = r.num_params;
    t.tokens_seen = r.tokens_seen;
    t.observed = r.loss;
    t.predicted = predict(r);
    t.relative_error = (t.predicted - t.observed) / t.observed;
    sum += std::fabs(t.relative_error);
    rep.per_target.push_back(std::move(t));
  }
  rep.n_targets = rep.per_target.size();
  rep.are = sum / static_cast<double>(rep.n_targets);
  return rep;
}

}  // namespace

EvalReport are(const LawParams& params, const ScaledFamily& targets) {
  return score(
      targets,
      [&](const CheckpointRecord& r) {
        return eval_law(params, static_cast<double>(r.num_params),
                        static_cast<double>(r.tokens_seen));
      },
      "law");
}

EvalReport baseline_best_performance(const ScaledFamily& train, const ScaledFamily& targets) {
  if (train.empty()) throw DataError("empty training set");
  double best = train.records().front().loss;
  for (const auto& r : train.records()) best = std::min(best, r.loss);
  return score(targets, [best](const CheckpointRecord&) { return best; }, "best_performance");
}

EvalReport baseline_most_trained(const ScaledFamily& train, const ScaledFamily& targets) {
  if (train.empty()) throw DataError("empty training set");
  using Wide = unsigned __int128;
  const CheckpointRecord* pick = nullptr;
  Wide pick_compute = 0;
  // Records are in canonical order, so strict comparisons keep the first.
  for (const auto& r : train.records()) {
    const Wide compute = static_cast<Wide>(r.num_params) * static_cast<Wide>(r.tokens_seen);
    if (!pick || compute > pick_compute || (compute == pick_compute && r.loss < pick->loss)) {
      pick = &r;
      pick_compute = compute;
    }
  }
  const double value = pick->loss;
  return score(targets, [value](const CheckpointRecord&) { return value; }, "most_trained");
}

}  // namespace scalaw
