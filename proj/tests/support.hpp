#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "groundchat/fixtures.hpp"
#include "groundchat/model/stack.hpp"
#include "groundchat/training/trainer.hpp"

namespace groundchat::testing {

/// Unique scratch directory removed on destruction.
class TempDir {
  public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

  private:
    std::filesystem::path path_;
};

const fixtures::FixtureSet& fixture_set();

/// Four stage-2 samples: three related, one negative pair (image + audio,
/// relatedness instruction, "The image ... The audio ..." target).
std::vector<training::TrainingExample> overfit_examples();
inline constexpr std::size_t kNegativeIndex = 0;

struct OverfitOutcome {
    std::size_t steps = 0; // first checked step with exact reproduction, 0 if never reached
    std::vector<std::string> replies;
    double seconds = 0.0;
};

/// Full-batch stage-2 steps, checking greedy replies every `check_every`.
OverfitOutcome run_overfit(model::MultimodalModel& model, const std::vector<training::TrainingExample>& data,
                           std::size_t max_steps = 500, std::size_t check_every = 10);

/// Central finite difference of the stage-2 loss w.r.t. one projection
/// entry of `kind`. `row < 0` selects the bias.
double projection_fd(model::MultimodalModel& model, const training::TrainingExample& example, ModalityKind kind,
                     int row, int col, double h);

std::string read_file(const std::filesystem::path& path);

} // namespace groundchat::testing
