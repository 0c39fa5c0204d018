// Library walk-through: generate a corrupted long-tail dataset, hold out the
// most severe groups, prune the training split and compare models trained on
// the full and the pruned data.
//
//   prune_synthetic [seed]

#include <cstdio>
#include <cstdlib>
#include <set>

#include "paris/data.hpp"
#include "paris/features.hpp"
#include "paris/metrics.hpp"
#include "paris/pruning.hpp"

using namespace paris;

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 0;

  data::SyntheticSpec spec;
  spec.seed = seed;
  spec.n = 5000;
  spec.corrupt_fraction = 0.3;
  const auto syn = data::generate_synthetic_longtail(spec);

  // Fold 0: the most severe group is the test set, the next 20 validate.
  const auto plans = data::build_fold_plans(syn.data, 1, 20);
  const auto raw = data::split_fold(syn.data, plans[0]);
  const auto stats = data::Normalization::fit(raw.train.inputs, raw.train.targets);

  // Score held-out groups against the clean labels.
  auto clean = [&](data::GroupedDataset ds) {
    for (std::size_t i = 0; i < ds.size(); ++i) ds.targets[i] = syn.clean_targets[ds.original_indices[i]];
    return ds.normalized(stats);
  };
  const auto train = raw.train.normalized(stats);
  const auto val = clean(raw.val);
  const auto test = clean(raw.test);

  features::MlpConfig mlp;
  mlp.hidden_sizes = {64, 64, 32};
  mlp.max_epochs = 300;
  mlp.patience = 20;
  mlp.seed = seed + 1;

  pruning::PruneConfig prune;
  prune.prune_fraction_per_cycle = 0.25;
  prune.total_prune_fraction = 0.5;

  const auto result = pruning::run_paris(train, val, prune, pruning::MlpExtractorFactory{mlp, false});
  std::printf("pruned %zu of %zu training samples in %zu cycle(s)\n", result.pruned_indices.size(),
              result.n_original, result.cycles.size());
  for (const auto& c : result.cycles)
    std::printf("  cycle %zu: removed %zu, lambda %.3g%s, ridge val MSE %.4f -> %.4f\n", c.cycle, c.pruned, c.lambda,
                c.lambda_fallback ? " (floor)" : "", c.val_mse_before, c.val_mse_after);

  // How many removed points had corrupted labels?
  std::size_t corrupted = 0;
  for (auto id : result.pruned_indices) corrupted += syn.corrupted[id] ? 1 : 0;
  std::printf("corrupted among removed: %.1f%% (base rate %.0f%%)\n",
              100.0 * corrupted / std::max<std::size_t>(1, result.pruned_indices.size()),
              100.0 * spec.corrupt_fraction);

  auto score = [&](const char* name, const data::GroupedDataset& ds) {
    const auto model = features::train_mlp(ds, val, mlp).model;
    for (const auto* split : {&val, &test}) {
      const auto y = stats.denormalize_targets(split->targets);
      const auto p = stats.denormalize_targets(model.predict(split->inputs));
      const auto tail = metrics::conditional_rmse_percentile(y, p, 20.0);
      std::printf("  %-6s %-4s rmse %7.4f  lower-20%% cRMSE %7.4f\n", name, split == &val ? "val" : "test",
                  metrics::rmse(y, p), tail.crmse.value.value_or(NAN));
    }
  };
  score("full", train);
  score("paris", result.pruned);
  return 0;
}
