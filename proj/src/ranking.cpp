#include "deepida/ranking.hpp"

#include "deepida/classifier.hpp"
#include "deepida/log.hpp"
#include "deepida/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

namespace deepida::ranking {

namespace {

constexpr int kMaxAttempts = 100;

std::uint64_t tag(auto v) { return static_cast<std::uint64_t>(v); }

bool draw_rows(const std::vector<std::vector<int>>& members, Eigen::Index n, Rng& rng,
               std::vector<int>& in_bag, std::vector<int>& oob) {
  in_bag.clear();
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (const std::vector<int>& rows : members) {
    std::uniform_int_distribution<std::size_t> pick(0, rows.size() - 1);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const int r = rows[pick(rng)];
      in_bag.push_back(r);
      seen[static_cast<std::size_t>(r)] = true;
    }
  }
  std::sort(in_bag.begin(), in_bag.end());
  oob.clear();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!seen[static_cast<std::size_t>(i)]) oob.push_back(static_cast<int>(i));
  }
  return !oob.empty();
}

}  // namespace

void RankingConfig::validate() const {
  if (pairs < 1) fail(ErrorKind::InvalidConfig, "number of bootstrap pairs must be at least 1");
  if (!(feature_fraction > 0.0 && feature_fraction <= 1.0)) {
    fail(ErrorKind::InvalidConfig, "feature_fraction must lie in (0, 1]");
  }
  if (permutations_per_feature < 1) {
    fail(ErrorKind::InvalidConfig, "permutations_per_feature must be at least 1");
  }
  if (workers < 0) fail(ErrorKind::InvalidConfig, "workers must be non-negative");
}

std::vector<BootstrapPair> draw_pairs(const MultiViewDataset& data, int count,
                                      double feature_fraction, std::uint64_t seed) {
  data.validate();
  if (count < 1) fail(ErrorKind::InvalidConfig, "number of bootstrap pairs must be at least 1");
  if (!(feature_fraction > 0.0 && feature_fraction <= 1.0)) {
    fail(ErrorKind::InvalidConfig, "feature_fraction must lie in (0, 1]");
  }
  const Eigen::Index n = data.num_samples();
  std::vector<std::vector<int>> members(static_cast<std::size_t>(data.labels.num_classes));
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    members[static_cast<std::size_t>(data.labels.ids[i])].push_back(static_cast<int>(i));
  }
  for (std::size_t k = 0; k < members.size(); ++k) {
    if (members[k].size() < 2) {
      fail(ErrorKind::StratificationFailure,
           "class " + std::to_string(k + 1) + " has fewer than 2 samples");
    }
  }

  std::vector<BootstrapPair> pairs;
  for (int m = 0; m < count; ++m) {
    BootstrapPair pair;
    pair.index = m;
    bool drawn = false;
    for (int attempt = 0; attempt < kMaxAttempts && !drawn; ++attempt) {
      Rng rng(derive_seed(seed, {1, tag(m), tag(attempt)}));
      drawn = draw_rows(members, n, rng, pair.in_bag, pair.out_of_bag);
    }
    if (!drawn) {
      fail(ErrorKind::StratificationFailure,
           "pair " + std::to_string(m + 1) + ": no out-of-bag sample after " +
               std::to_string(kMaxAttempts) + " attempts");
    }
    Rng feature_rng(derive_seed(seed, {2, tag(m)}));
    for (const Matrix& view : data.views) {
      const Eigen::Index p = view.cols();
      const auto keep = std::clamp<Eigen::Index>(
          std::llround(feature_fraction * static_cast<double>(p)), 1, p);
      std::vector<int> all(static_cast<std::size_t>(p));
      std::iota(all.begin(), all.end(), 0);
      std::shuffle(all.begin(), all.end(), feature_rng);
      all.resize(static_cast<std::size_t>(keep));
      std::sort(all.begin(), all.end());
      pair.features.push_back(std::move(all));
    }
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

PairResult run_pair(const BootstrapPair& pair, const MultiViewDataset& data,
                    const std::vector<trainer::NetworkShape>& shapes,
                    const trainer::TrainConfig& train, const RankingConfig& config) {
  PairResult out;
  out.index = pair.index;
  out.features = pair.features;
  try {
    const MultiViewDataset restricted = data.select_features(pair.features);
    const MultiViewDataset in_bag = restricted.subset_rows(pair.in_bag);
    const MultiViewDataset oob = restricted.subset_rows(pair.out_of_bag);
    trainer::TrainConfig cfg = train;
    cfg.seed = derive_seed(train.seed, {3, tag(pair.index)});
    cfg.validation = trainer::Validation::None;
    const trainer::TrainedDeepIda model =
        trainer::fit(in_bag, trainer::specs_for(shapes, in_bag.feature_counts()), cfg);

    std::vector<Matrix> scores = trainer::project(model, oob);
    out.baseline_accuracy =
        classifier::accuracy(trainer::predict(model, scores), oob.labels.ids);
    const auto n_oob = static_cast<Eigen::Index>(pair.out_of_bag.size());
    for (std::size_t d = 0; d < data.num_views(); ++d) {
      std::vector<bool> flags;
      const Matrix original = scores[d];
      const Matrix& a = model.projection.projection_matrix(d);
      for (std::size_t i = 0; i < pair.features[d].size(); ++i) {
        const int column = pair.features[d][i];
        int votes = 0;
        for (int r = 0; r < config.permutations_per_feature; ++r) {
          Rng rng(derive_seed(config.seed, {4, tag(pair.index), tag(d), tag(column), tag(r)}));
          std::vector<Eigen::Index> perm(static_cast<std::size_t>(n_oob));
          std::iota(perm.begin(), perm.end(), 0);
          std::shuffle(perm.begin(), perm.end(), rng);
          Matrix x = oob.views[d];
          const auto col = static_cast<Eigen::Index>(i);
          const Vector source = x.col(col);
          for (Eigen::Index row = 0; row < n_oob; ++row) x(row, col) = source(perm[static_cast<std::size_t>(row)]);
          scores[d] = net::predict(model.models[d], x) * a;
          const double acc = classifier::accuracy(trainer::predict(model, scores), oob.labels.ids);
          votes += acc < out.baseline_accuracy ? 1 : 0;
        }
        scores[d] = original;
        flags.push_back(2 * votes > config.permutations_per_feature);
      }
      out.flags.push_back(std::move(flags));
    }
    out.ok = true;
  } catch (const Error& e) {
    out.ok = false;
    out.error = e.kind();
    out.message = e.what();
    out.flags.clear();
    log::warn("pair " + std::to_string(pair.index + 1) + " failed: " + out.message);
  }
  return out;
}

RankingReport aggregate(const std::vector<PairResult>& results,
                        const std::vector<Eigen::Index>& feature_counts) {
  RankingReport report;
  for (std::size_t d = 0; d < feature_counts.size(); ++d) {
    std::vector<FeatureStat> stats(static_cast<std::size_t>(feature_counts[d]));
    for (std::size_t k = 0; k < stats.size(); ++k) stats[k].index = static_cast<int>(k);
    report.views.push_back(std::move(stats));
  }
  std::vector<const PairResult*> sorted;
  for (const PairResult& r : results) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(),
            [](const PairResult* a, const PairResult* b) { return a->index < b->index; });
  for (const PairResult* r : sorted) {
    if (!r->ok) {
      report.failed.push_back(r->index);
      continue;
    }
    if (r->features.size() != feature_counts.size() || r->flags.size() != feature_counts.size()) {
      fail(ErrorKind::ShapeMismatch, "pair result view count differs from the data");
    }
    report.succeeded.push_back(r->index);
    report.baseline_accuracy.push_back(r->baseline_accuracy);
    for (std::size_t d = 0; d < feature_counts.size(); ++d) {
      for (std::size_t i = 0; i < r->features[d].size(); ++i) {
        const int k = r->features[d][i];
        if (k < 0 || k >= feature_counts[d]) {
          fail(ErrorKind::ShapeMismatch, "pair result feature index out of range");
        }
        FeatureStat& s = report.views[d][static_cast<std::size_t>(k)];
        ++s.drawn;
        s.flagged += r->flags[d][i] ? 1 : 0;
      }
    }
  }
  if (report.succeeded.empty()) fail(ErrorKind::NoResults, "every bootstrap pair failed");
  for (std::vector<FeatureStat>& stats : report.views) {
    std::vector<int> order;
    for (FeatureStat& s : stats) {
      if (s.drawn == 0) continue;
      s.proportion = static_cast<double>(s.flagged) / static_cast<double>(s.drawn);
      order.push_back(s.index);
    }
    std::stable_sort(order.begin(), order.end(), [&stats](int a, int b) {
      return stats[static_cast<std::size_t>(a)].proportion >
             stats[static_cast<std::size_t>(b)].proportion;
    });
    for (std::size_t r = 0; r < order.size(); ++r) {
      stats[static_cast<std::size_t>(order[r])].rank = static_cast<int>(r + 1);
    }
    report.order.push_back(std::move(order));
  }
  return report;
}

RankingReport rank_features(const MultiViewDataset& data,
                            const std::vector<trainer::NetworkShape>& shapes,
                            const trainer::TrainConfig& train, const RankingConfig& config) {
  config.validate();
  train.validate();
  const std::vector<BootstrapPair> pairs =
      draw_pairs(data, config.pairs, config.feature_fraction, config.seed);
  std::vector<PairResult> results(pairs.size());
  const unsigned hardware = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(
      pairs.size(), config.workers > 0 ? static_cast<std::size_t>(config.workers) : hardware);
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (std::size_t i = next.fetch_add(1); i < pairs.size(); i = next.fetch_add(1)) {
      results[i] = run_pair(pairs[i], data, shapes, train, config);
      log::info("pair " + std::to_string(i + 1) + "/" + std::to_string(pairs.size()) + " done");
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  return aggregate(results, data.feature_counts());
}

Eigen::Index Selection::resolve(Eigen::Index p) const {
  if (!(value > 0.0)) fail(ErrorKind::InvalidSelection, "selection size must be positive");
  if (kind == Kind::Count) {
    if (value != std::floor(value)) fail(ErrorKind::InvalidSelection, "feature count must be an integer");
    return static_cast<Eigen::Index>(value);
  }
  if (value > 100.0) fail(ErrorKind::InvalidSelection, "percentage above 100");
  // tolerate round-off such as 10% of 70 evaluating to 7.000000000000001
  return static_cast<Eigen::Index>(std::ceil(value * static_cast<double>(p) / 100.0 - 1e-9));
}

std::vector<std::vector<int>> top_features(const RankingReport& report, const Selection& selection) {
  std::vector<std::vector<int>> out;
  for (std::size_t d = 0; d < report.views.size(); ++d) {
    const Eigen::Index p = static_cast<Eigen::Index>(report.views[d].size());
    const Eigen::Index keep = selection.resolve(p);
    if (keep < 1 || keep > static_cast<Eigen::Index>(report.order[d].size())) {
      fail(ErrorKind::InvalidSelection,
           "view " + std::to_string(d + 1) + ": cannot keep " + std::to_string(keep) +
               " features, " + std::to_string(report.order[d].size()) + " are ranked");
    }
    std::vector<int> top(report.order[d].begin(), report.order[d].begin() + keep);
    std::sort(top.begin(), top.end());
    out.push_back(std::move(top));
  }
  return out;
}

trainer::TrainedDeepIda select_and_retrain(const MultiViewDataset& data,
                                           const RankingReport& report, const Selection& selection,
                                           const std::vector<trainer::NetworkShape>& shapes,
                                           const trainer::TrainConfig& train) {
  if (report.views.size() != data.num_views()) {
    fail(ErrorKind::ShapeMismatch, "ranking view count differs from the data");
  }
  for (std::size_t d = 0; d < data.num_views(); ++d) {
    if (static_cast<Eigen::Index>(report.views[d].size()) != data.views[d].cols()) {
      fail(ErrorKind::ShapeMismatch,
           "ranking for view " + std::to_string(d + 1) + " covers a different feature count");
    }
  }
  const std::vector<std::vector<int>> kept = top_features(report, selection);
  const MultiViewDataset restricted = data.select_features(kept);
  trainer::TrainedDeepIda model =
      trainer::fit(restricted, trainer::specs_for(shapes, restricted.feature_counts()), train);
  model.kept_features = kept;
  model.source_dims = data.feature_counts();
  return model;
}

}  // namespace deepida::ranking
