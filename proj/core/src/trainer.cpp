#include "uai/trainer.hpp"

#include <cmath>
#include <string>

#include "uai/error.hpp"

namespace uai {
namespace {

void CheckFinite(const LossReport& r, std::size_t epoch, const char* step) {
  const std::pair<const char*, double> parts[] = {
      {"l_pred", r.l_pred}, {"l_recon", r.l_recon}, {"l_dis1", r.l_dis1},
      {"l_dis2", r.l_dis2}, {"l_main", r.l_main},   {"l_adv", r.l_adv}};
  for (const auto& [name, value] : parts) {
    if (!std::isfinite(value)) {
      throw NumericError(std::string("non-finite ") + name + " (" +
                         std::to_string(value) + ") during " + step +
                         " update in epoch " + std::to_string(epoch));
    }
  }
}

void Accumulate(LossReport& sum, const LossReport& r) {
  sum.l_pred += r.l_pred;
  sum.l_recon += r.l_recon;
  sum.l_dis1 += r.l_dis1;
  sum.l_dis2 += r.l_dis2;
  sum.l_main += r.l_main;
  sum.l_adv += r.l_adv;
}

LossReport Mean(const LossReport& sum, std::size_t n, const UaiConfig& c) {
  const double k = 1.0 / static_cast<double>(n);
  LossReport m;
  m.l_pred = sum.l_pred * k;
  m.l_recon = sum.l_recon * k;
  m.l_dis1 = sum.l_dis1 * k;
  m.l_dis2 = sum.l_dis2 * k;
  // Keep the loss identities exact on the averages as well.
  m.l_main = MainObjective(c, m.l_pred, m.l_recon);
  m.l_adv = m.l_dis1 + m.l_dis2;
  return m;
}

}  // namespace

LossReport AdversarialStep(UaiModel& model, const Matrix& x) {
  return AdversarialStep(model, Encode(model, x));
}

LossReport AdversarialStep(UaiModel& model, EmbeddingPairs latents) {
  AdvForward adv = ForwardAdv(model, std::move(latents));
  Gradients grads = AdversarialGradients(model, adv);
  auto views = grads.Views();
  auto params = model.AdversarialParameters();
  nn::AdamStep(model.adv_optimizer, params, views);
  return adv.report;
}

LossReport MainStep(UaiModel& model, const Matrix& x, std::span<const Label> y,
                    Rng& dropout_rng) {
  MainPass main = ForwardMain(model, x, y, dropout_rng);
  AdversarialPass adv = ForwardDisentanglers(
      model, EmbeddingPairs{main.encoder.h1, main.encoder.h2});
  const LossReport report = CombineReports(main, adv);
  Gradients grads = MainGradients(model, main, adv);
  auto views = grads.Views();
  auto params = model.MainParameters();
  nn::AdamStep(model.main_optimizer, params, views);
  return report;
}

std::vector<LossReport> Train(UaiModel& model,
                              const data::EmbeddingDataset& dataset,
                              const TrainObserver& observer) {
  const UaiConfig& c = model.config;
  model.CheckShapes();
  dataset.Validate();
  if (dataset.dim() != c.input_dim) {
    throw InputError("dataset dim " + std::to_string(dataset.dim()) +
                     " does not match model input_dim " +
                     std::to_string(c.input_dim));
  }
  if (dataset.size() < c.batch_size) {
    throw ConfigError("dataset has " + std::to_string(dataset.size()) +
                      " items, fewer than batch_size " +
                      std::to_string(c.batch_size));
  }
  for (Label y : dataset.speaker_labels) {
    if (static_cast<std::size_t>(y) >= c.num_speakers) {
      throw InputError("speaker label " + std::to_string(y) +
                       " exceeds num_speakers " +
                       std::to_string(c.num_speakers));
    }
  }

  data::BatchIterator main_batches(dataset, c.batch_size,
                                   DeriveSeed(c.seed, "main-batches"));
  data::BatchIterator adv_batches(dataset, c.batch_size,
                                  DeriveSeed(c.seed, "adv-batches"));
  std::vector<LossReport> run_history;
  data::Batch batch;
  std::vector<std::size_t> adv_indices;
  // The encoder is frozen during a run of adversarial steps, so the whole
  // training set is encoded once per run and batches are gathered from it.
  const Matrix all_rows = dataset.AllRows();
  for (std::size_t epoch = model.epochs_completed; epoch < c.epochs; ++epoch) {
    main_batches.StartEpoch(epoch);
    // The adversarial stream reshuffles whenever it runs dry; each pass gets
    // its own permutation key.
    std::uint64_t adv_pass = 0;
    auto adv_key = [&] { return (static_cast<std::uint64_t>(epoch) << 24) | adv_pass; };
    adv_batches.StartEpoch(adv_key());
    Rng dropout_rng(DeriveSeed(c.seed, "dropout", epoch));

    LossReport sum;
    std::size_t main_step = 0;
    while (main_batches.Next(batch)) {
      EmbeddingPairs latents;
      if (c.adv_steps_per_main > 0) latents = Encode(model, all_rows);
      for (std::size_t a = 0; a < c.adv_steps_per_main; ++a) {
        if (!adv_batches.NextIndices(adv_indices)) {
          ++adv_pass;
          adv_batches.StartEpoch(adv_key());
          adv_batches.NextIndices(adv_indices);
        }
        const LossReport r =
            AdversarialStep(model, GatherRows(latents, adv_indices));
        CheckFinite(r, epoch, "adversarial");
        if (observer.on_update) {
          observer.on_update(
              UpdateEvent{UpdateKind::kAdversarial, epoch, main_step, a, r},
              model);
        }
      }
      const LossReport r = MainStep(model, batch.x, batch.y, dropout_rng);
      CheckFinite(r, epoch, "main");
      Accumulate(sum, r);
      if (observer.on_update) {
        observer.on_update(UpdateEvent{UpdateKind::kMain, epoch, main_step, 0, r},
                           model);
      }
      ++main_step;
    }
    const LossReport mean = Mean(sum, main_step, c);
    model.history.push_back(mean);
    model.epochs_completed = epoch + 1;
    run_history.push_back(mean);
    if (observer.on_epoch) observer.on_epoch(epoch, mean);
  }
  return run_history;
}

}  // namespace uai
