#include "support.hpp"

#include <chrono>
#include <fstream>
#include <random>
#include <sstream>

#include "groundchat/media/synthetic.hpp"
#include "groundchat/prompting/prompt.hpp"

namespace groundchat::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
    std::random_device rd;
    for (;;) {
        path_ = fs::temp_directory_path() / ("groundchat-test-" + std::to_string(rd()));
        if (fs::create_directory(path_)) break;
    }
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

const fixtures::FixtureSet& fixture_set() {
    static const fixtures::FixtureSet set = fixtures::make_fixtures();
    return set;
}

std::vector<training::TrainingExample> overfit_examples() {
    const char* replies[] = {"The image shows a red car. The audio is a dog barking.", "A man plays the guitar.",
                             "Rain falls on a roof.", "Two birds sing in a tree."};
    std::vector<training::TrainingExample> data;
    for (int i = 0; i < 4; ++i) {
        training::TrainingExample ex;
        ex.image = ModalityInput::from_bytes(ModalityKind::image, media::synthetic_png(static_cast<std::uint64_t>(i)));
        if (i != 1) ex.audio = ModalityInput::from_bytes(ModalityKind::audio, media::synthetic_wav(static_cast<std::uint64_t>(i)));
        ex.instruction = "Describe the inputs.";
        ex.response = replies[i];
        data.push_back(ex);
    }
    data[kNegativeIndex].instruction = std::string(prompting::kAskRelatedness);
    data[kNegativeIndex].related = false;
    return data;
}

OverfitOutcome run_overfit(model::MultimodalModel& model, const std::vector<training::TrainingExample>& data,
                           std::size_t max_steps, std::size_t check_every) {
    const auto start = std::chrono::steady_clock::now();
    const auto plan = training::plan_for_stage(training::Stage::stage2);
    training::TrainState state;
    const training::OptimizerConfig config;
    OverfitOutcome out;
    for (std::size_t step = 1; step <= max_steps; ++step) {
        training::stage2_step(data, model, plan, state, config);
        if (step % check_every != 0 && step != max_steps) continue;
        out.replies.clear();
        bool exact = true;
        for (const auto& ex : data) {
            out.replies.push_back(training::decode_reply(model, ex));
            exact = exact && out.replies.back() == ex.response;
        }
        if (exact) {
            out.steps = step;
            break;
        }
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

double projection_fd(model::MultimodalModel& model, const training::TrainingExample& example, ModalityKind kind,
                     int row, int col, double h) {
    auto& proj = model.stack(kind).projection;
    double& x = row < 0 ? proj.bias(0, col) : proj.weight(row, col);
    const auto plan = training::plan_for_stage(training::Stage::stage2);
    const double saved = x;
    x = saved + h;
    const double plus = training::stage2_loss(model, example, plan, false).loss;
    x = saved - h;
    const double minus = training::stage2_loss(model, example, plan, false).loss;
    x = saved;
    return (plus - minus) / (2.0 * h);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace groundchat::testing
