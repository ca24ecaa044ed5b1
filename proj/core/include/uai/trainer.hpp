#ifndef UAI_TRAINER_HPP_
#define UAI_TRAINER_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "uai/dataset.hpp"
#include "uai/model.hpp"

namespace uai {

enum class UpdateKind : std::uint8_t { kAdversarial, kMain };

struct UpdateEvent {
  UpdateKind kind;
  std::size_t epoch;
  std::size_t main_step;  // index of the main batch within the epoch
  std::size_t adv_step;   // index within the adversarial run (0 for main)
  LossReport report;      // losses measured before the update
};

struct TrainObserver {
  // Called after every parameter update.
  std::function<void(const UpdateEvent&, const UaiModel&)> on_update;
  // Called after each epoch with the epoch's mean losses.
  std::function<void(std::size_t epoch, const LossReport&)> on_epoch;
};

// Alternating minimax schedule. For each main batch, adv_steps_per_main
// disentangler updates (drawn from a second, independently shuffled stream
// over the same data) precede one main update. Runs from
// model.epochs_completed up to model.config.epochs; every epoch appends the
// mean of the main-step loss reports to model.history.
//
// Every random draw is keyed on (seed, epoch), so a run resumed from a
// checkpoint reproduces the uninterrupted run exactly.
//
// Throws NumericError naming the component and epoch on a non-finite loss.
std::vector<LossReport> Train(UaiModel& model,
                              const data::EmbeddingDataset& dataset,
                              const TrainObserver& observer = {});

// One adversarial update on x. Returns the pre-update losses.
LossReport AdversarialStep(UaiModel& model, const Matrix& x);
// Same, on latents from Encode (valid while the main group is unchanged).
LossReport AdversarialStep(UaiModel& model, EmbeddingPairs latents);

// One main update on (x, y). Returns the pre-update losses.
LossReport MainStep(UaiModel& model, const Matrix& x, std::span<const Label> y,
                    Rng& dropout_rng);

}  // namespace uai

#endif  // UAI_TRAINER_HPP_
