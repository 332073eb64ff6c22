// groundchat: operator entry point.
//   groundchat ground IMAGE [--text T] --out DIR
//   groundchat train --stage S --data MANIFEST... --media DIR --out DIR
//   groundchat dataset build-clotho-detail|build-vggss|build-negatives|validate ...
//   groundchat serve [--host H] [--port P]
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <pthread.h>
#include <thread>

#include <CLI11.hpp>

#include "groundchat/cli/config.hpp"
#include "groundchat/core/serialization.hpp"
#include "groundchat/datasets/builders.hpp"
#include "groundchat/error.hpp"
#include "groundchat/grounding/pipeline.hpp"
#include "groundchat/media/image.hpp"
#include "groundchat/model/checkpoint.hpp"
#include "groundchat/service/http.hpp"

namespace fs = std::filesystem;
using namespace groundchat;

namespace {

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;

    // ground
    std::string image;
    std::optional<std::string> text;
    std::string out;
    std::string mocks;
    std::string segmenter;
    std::optional<double> tag_threshold;
    std::optional<double> box_threshold;

    // train
    std::string stage;
    std::vector<std::string> data;
    std::string media;
    std::optional<std::size_t> steps;
    std::optional<std::size_t> batch_size;
    std::optional<double> lr;
    std::optional<std::size_t> warmup;
    std::optional<std::size_t> checkpoint_every;
    std::string init;
    bool train_vision_qformer = false;
    double negative_ratio = 1.0;

    // dataset
    std::string bundles;
    std::string llm = "merge";
    std::string scripted_reply;
    std::string pairs;
    std::string templates;
    std::string audio;
    std::string images;
    std::size_t count = 0;
    std::string name;
    std::string manifest;
    std::string raw;
    std::optional<std::size_t> expected;
    bool strict = false;
    bool as_json = false;

    // serve
    std::string host;
    std::optional<int> port;
    std::string checkpoint;
    std::string persist;
    std::optional<double> max_upload_mb;
    std::string llm_kind;
};

int exit_code_for(const Error& e) {
    switch (e.kind()) {
    case ErrorKind::config:
    case ErrorKind::input:
    case ErrorKind::precondition:
    case ErrorKind::not_found: return 2;
    default: return 1;
    }
}

void report(const Error& e) {
    std::cerr << "groundchat: " << to_string(e.kind()) << " error";
    if (!e.stage().empty()) std::cerr << " [" << e.stage() << "]";
    std::cerr << ": " << e.what() << '\n';
}

cli::CliConfig load_config(const Options& o) {
    cli::CliConfig c = o.config_path.empty() ? cli::CliConfig{} : cli::load_cli_config(o.config_path);
    if (o.seed) c.seed = o.seed;
    if (!o.mocks.empty()) c.adapters.mocks = o.mocks;
    if (!o.segmenter.empty()) {
        (void)grounding::MockSegmenter::parse_mode(o.segmenter);
        c.adapters.segmenter = o.segmenter;
    }
    if (o.tag_threshold) c.grounding.tag_threshold = *o.tag_threshold;
    if (o.box_threshold) c.grounding.box_threshold = *o.box_threshold;
    grounding::validate(c.grounding);
    if (o.steps) c.steps = *o.steps;
    if (o.batch_size) c.batch_size = *o.batch_size;
    if (o.lr) c.optimizer.learning_rate = *o.lr;
    if (o.warmup) c.optimizer.warmup_steps = *o.warmup;
    if (o.checkpoint_every) c.checkpoint_every = *o.checkpoint_every;
    if (o.train_vision_qformer) c.train_vision_qformer = true;
    if (!o.host.empty()) c.service.host = o.host;
    if (o.port) c.service.port = *o.port;
    if (!o.checkpoint.empty()) c.checkpoint = o.checkpoint;
    if (!o.persist.empty()) c.service.persistence_dir = o.persist;
    if (o.max_upload_mb) c.service.max_upload_mb = *o.max_upload_mb;
    if (!o.llm_kind.empty()) {
        if (o.llm_kind != "echo" && o.llm_kind != "toy") throw ConfigError("--llm must be echo or toy", "config");
        c.adapters.llm = o.llm_kind;
    }
    return c;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    out << text;
    if (!out) throw InputError("cannot write " + path.string(), "output");
}

void write_binary(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InputError("cannot write " + path.string(), "output");
}

int cmd_ground(const Options& o) {
    const auto config = load_config(o);
    if (!fs::is_regular_file(o.image)) throw InputError("cannot read image " + o.image, "input");
    const ModalityInput image = ModalityInput::from_file(ModalityKind::image, o.image);
    const auto backend = cli::make_backend(config);
    std::optional<std::string_view> text;
    if (o.text) text = *o.text;
    const auto result = grounding::run_pipeline(image, text, backend.grounding, config.grounding);
    const fs::path out(o.out);
    write_text(out / "grounding.json", grounding::to_json(result).dump(2) + "\n");
    write_binary(out / "overlay.png", grounding::render_overlay(media::decode_image(image), result));
    std::cout << "tags " << result.tags.size() << ", entities " << result.entities.size() << ", matches "
              << result.matches.size() << '\n';
    for (const auto& e : result.errors) std::cerr << "warning: " << e.stage << " stage failed: " << e.message << '\n';
    return 0;
}

std::vector<datasets::LoadedDataset> load_all(const std::vector<std::string>& manifests) {
    std::vector<datasets::LoadedDataset> out;
    for (const auto& m : manifests) out.push_back(datasets::load_dataset(m));
    return out;
}

int cmd_train(const Options& o) {
    const auto config = load_config(o);
    const auto stage = training::parse_stage(o.stage);
    training::TrainConfig tc;
    tc.stage = stage;
    tc.optimizer = config.optimizer;
    tc.steps = config.steps;
    tc.batch_size = config.batch_size;
    tc.seed = config.seed.value_or(0);
    tc.checkpoint_every = config.checkpoint_every;
    tc.overrides.stage2_train_vision_qformer = config.train_vision_qformer;
    training::validate(tc);
    if (o.media.empty()) throw ConfigError("--media is required", "config");
    const datasets::MediaStore store(o.media);

    auto model = model::MultimodalModel::build_toy(config.model);
    const std::string init = !o.init.empty() ? o.init : config.checkpoint ? config.checkpoint->string() : std::string{};
    if (!init.empty()) {
        model::apply_heads(model::load_checkpoint(init), model);
    } else if (stage == training::Stage::stage2) {
        std::cerr << "warning: no stage-1 checkpoint given; stage-2 heads start from random init\n";
    }

    const fs::path out(o.out);
    fs::create_directories(out);
    std::ofstream log(out / "train_log.jsonl", std::ios::trunc);
    training::TrainHooks hooks;
    hooks.log = &log;
    hooks.checkpoint = [&](std::size_t step) {
        model::save_checkpoint((out / ("checkpoint-" + std::to_string(step) + ".gchk")).string(),
                               model::capture_heads(model, {std::string(training::to_string(stage)), step}));
    };

    training::TrainReport report;
    if (stage == training::Stage::stage2) {
        std::vector<InstructionSample> positives;
        std::vector<InstructionSample> negatives;
        for (const auto& ds : load_all(o.data)) {
            if (ds.manifest.record_type != "instruction") {
                throw ConfigError(ds.manifest.name + " is not an instruction dataset", "config");
            }
            for (const auto& s : datasets::from_records<InstructionSample>(ds.records)) {
                (s.related ? positives : negatives).push_back(s);
            }
        }
        const auto mixed = negatives.empty() || positives.empty()
                               ? (positives.empty() ? negatives : positives)
                               : datasets::mix_stage2(positives, negatives, o.negative_ratio, tc.seed);
        std::vector<training::TrainingExample> examples;
        for (const auto& s : mixed) examples.push_back(datasets::resolve_example(s, store));
        report = training::train_stage2(tc, model, examples, hooks);
    } else {
        const auto want = stage == training::Stage::stage1_vision ? datasets::DatasetKind::image_text
                                                                   : datasets::DatasetKind::audio_text;
        std::vector<training::CaptionPair> pairs;
        for (const auto& ds : load_all(o.data)) {
            if (ds.manifest.record_type != "caption" || ds.manifest.kind != want) {
                throw ConfigError(ds.manifest.name + " is not a " + std::string(datasets::to_string(want)) +
                                      " caption dataset",
                                  "config");
            }
            for (const auto& r : datasets::from_records<datasets::CaptionRecord>(ds.records)) {
                pairs.push_back(datasets::resolve_caption(r, store));
            }
        }
        report = training::train_stage1(tc, model, pairs, hooks);
    }
    model::save_checkpoint((out / "final.gchk").string(),
                           model::capture_heads(model, {std::string(training::to_string(stage)), report.steps}));

    const auto plan = training::plan_for_stage(stage, tc.overrides);
    std::size_t frozen_changed = 0;
    for (const auto g : model::kAllParamGroups) {
        if (!plan.trainable(g) && report.hashes_before.at(g) != report.hashes_after.at(g)) ++frozen_changed;
    }
    std::printf("stage %s: %zu steps, loss %.6f -> %.6f, frozen groups changed: %zu\n",
                std::string(training::to_string(stage)).c_str(), report.steps, report.initial_loss,
                report.final_loss, frozen_changed);
    return frozen_changed == 0 ? 0 : 1;
}

datasets::DatasetManifest manifest_for(std::string name, datasets::DatasetKind kind, std::string record_type,
                                       std::vector<std::string> sources) {
    datasets::DatasetManifest m;
    m.name = std::move(name);
    m.kind = kind;
    m.record_type = std::move(record_type);
    m.sources = std::move(sources);
    return m;
}

int cmd_build_clotho(const Options& o) {
    (void)load_config(o);
    const auto ds = datasets::load_dataset(o.bundles);
    const auto bundles = datasets::from_records<datasets::CaptionBundle>(ds.records);
    std::unique_ptr<grounding::TextLLMAdapter> llm;
    if (o.llm == "merge") llm = std::make_unique<grounding::CaptionMergeLLM>();
    else if (o.llm == "scripted") llm = std::make_unique<grounding::ScriptedTextLLM>(o.scripted_reply);
    else throw ConfigError("--llm must be merge or scripted", "config");
    const auto build = datasets::build_clotho_detail(bundles, *llm);
    const auto name = o.name.empty() ? std::string("clotho-detail-build") : o.name;
    const auto path = datasets::write_dataset(
        o.out, manifest_for(name, datasets::DatasetKind::audio_text, "described", {ds.manifest.name}),
        datasets::to_records(build.items));
    for (const auto& f : build.flagged) std::cerr << "flagged bundle " << f.index << ": " << f.reason << '\n';
    std::cout << "wrote " << build.items.size() << " descriptions (" << build.flagged.size() << " flagged) to "
              << path.string() << '\n';
    return 0;
}

int cmd_build_vggss(const Options& o) {
    const auto config = load_config(o);
    const auto ds = datasets::load_dataset(o.pairs);
    const auto pairs = datasets::from_records<datasets::LabeledPair>(ds.records);
    std::vector<std::string> templates;
    if (o.templates.empty()) {
        for (auto t : datasets::default_label_templates()) templates.emplace_back(t);
    } else {
        std::ifstream in(o.templates);
        if (!in) throw InputError("cannot read templates " + o.templates, "input");
        for (std::string line; std::getline(in, line);) {
            if (!line.empty()) templates.push_back(line);
        }
    }
    const auto samples = datasets::build_vggss_instructions(pairs, templates, config.seed.value_or(0));
    const auto name = o.name.empty() ? std::string("vggss-build") : o.name;
    const auto path = datasets::write_dataset(
        o.out, manifest_for(name, datasets::DatasetKind::audio_image_text, "instruction", {ds.manifest.name}),
        datasets::to_records(samples));
    std::cout << "wrote " << samples.size() << " samples to " << path.string() << '\n';
    return 0;
}

int cmd_build_negatives(const Options& o) {
    const auto config = load_config(o);
    const auto audio = datasets::load_dataset(o.audio);
    const auto images = datasets::load_dataset(o.images);
    const auto samples = datasets::build_negative_pairs(datasets::from_records<datasets::CaptionRecord>(audio.records),
                                                        datasets::from_records<datasets::CaptionRecord>(images.records),
                                                        o.count, config.seed.value_or(0));
    const auto name = o.name.empty() ? std::string("negative-pairs") : o.name;
    const auto path = datasets::write_dataset(
        o.out,
        manifest_for(name, datasets::DatasetKind::audio_image_text, "instruction",
                     {audio.manifest.name, images.manifest.name}),
        datasets::to_records(samples));
    std::cout << "wrote " << samples.size() << " samples to " << path.string() << '\n';
    return 0;
}

int cmd_validate(const Options& o) {
    (void)load_config(o);
    datasets::ValidationReport report;
    if (!o.raw.empty()) {
        if (o.name.empty()) throw ConfigError("--raw needs --name", "config");
        report = datasets::validate_raw_corpus(o.name, datasets::load_raw_corpus(o.raw));
    } else if (!o.manifest.empty()) {
        const auto ds = datasets::load_dataset(o.manifest);
        report = datasets::validate_manifest(ds.manifest, o.expected, &ds.records);
    } else {
        throw ConfigError("validate needs --manifest or --raw", "config");
    }
    if (o.as_json) std::cout << report.to_json().dump(2) << '\n';
    else std::cout << report.to_text();
    return report.pass() || !o.strict ? 0 : 1;
}

int cmd_serve(const Options& o) {
    const auto config = load_config(o);
    service::ChatService chat(cli::make_backend(config), cli::service_config(config));
    service::HttpServer server(chat);

    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGTERM);
    sigaddset(&signals, SIGINT);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    if (!server.bind(config.service.host, config.service.port)) {
        std::cerr << "groundchat: cannot bind " << config.service.host << ":" << config.service.port << '\n';
        return 1;
    }
    std::thread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        server.stop();
    });
    std::cout << "listening on " << config.service.host << ":" << server.port() << std::endl;
    server.serve();
    chat.flush();
    // serve() also returns on internal failure; wake the waiter either way.
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    std::cout << "shutdown" << std::endl;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    Options o;
    CLI::App app{"Grounded multimodal chat: grounding, training, datasets and serving"};
    app.require_subcommand(1);
    app.add_option("--config", o.config_path, "JSON config file (strict keys)")->envname("GROUNDCHAT_CONFIG");
    app.add_option("--seed", o.seed, "Seed for shuffling, sampling and session ids")->envname("GROUNDCHAT_SEED");

    auto* ground = app.add_subcommand("ground", "Tag, detect, segment and match entities in an image");
    ground->add_option("image", o.image, "Image file (PNG or JPEG)")->required();
    ground->add_option("--text", o.text, "Response text to match entities against");
    ground->add_option("--out", o.out, "Output directory")->required();
    ground->add_option("--mocks", o.mocks, "Mock adapter table")->envname("GROUNDCHAT_MOCKS");
    ground->add_option("--segmenter", o.segmenter, "Mock segmenter mode: box, ellipse or faulty");
    ground->add_option("--tag-threshold", o.tag_threshold, "Minimum tag score");
    ground->add_option("--box-threshold", o.box_threshold, "Minimum detection score");

    auto* train = app.add_subcommand("train", "Train the Q-Former and projection heads");
    train->add_option("--stage", o.stage, "stage1-vision, stage1-audio or stage2")->required();
    train->add_option("--data", o.data, "Dataset manifest(s)")->required();
    train->add_option("--media", o.media, "Media store directory")->envname("GROUNDCHAT_MEDIA");
    train->add_option("--out", o.out, "Output directory for the log and checkpoints")->required();
    train->add_option("--steps", o.steps, "Optimizer steps");
    train->add_option("--batch-size", o.batch_size, "Samples per step");
    train->add_option("--lr", o.lr, "Peak learning rate");
    train->add_option("--warmup", o.warmup, "Linear warmup steps");
    train->add_option("--checkpoint-every", o.checkpoint_every, "Save a checkpoint every K steps (0 disables)");
    train->add_option("--init", o.init, "Checkpoint to start from");
    train->add_flag("--train-vision-qformer", o.train_vision_qformer, "Also train the vision Q-Former in stage 2");
    train->add_option("--negative-ratio", o.negative_ratio, "Negatives per positive when mixing stage-2 data");

    auto* dataset = app.add_subcommand("dataset", "Build and validate datasets");
    dataset->require_subcommand(1);
    auto* clotho = dataset->add_subcommand("build-clotho-detail", "Rewrite caption bundles into long descriptions");
    clotho->add_option("--bundles", o.bundles, "Caption bundle manifest")->required();
    clotho->add_option("--out", o.out, "Output directory")->required();
    clotho->add_option("--name", o.name, "Dataset name");
    clotho->add_option("--llm", o.llm, "Text LLM: merge or scripted");
    clotho->add_option("--reply", o.scripted_reply, "Fixed reply for --llm scripted");
    auto* vggss = dataset->add_subcommand("build-vggss", "Wrap labeled audio-image pairs into instructions");
    vggss->add_option("--pairs", o.pairs, "Labeled pair manifest")->required();
    vggss->add_option("--out", o.out, "Output directory")->required();
    vggss->add_option("--templates", o.templates, "File with one {label} template per line");
    vggss->add_option("--name", o.name, "Dataset name");
    auto* negatives = dataset->add_subcommand("build-negatives", "Sample unrelated audio-image pairs");
    negatives->add_option("--audio", o.audio, "Audio caption manifest")->required();
    negatives->add_option("--images", o.images, "Image caption manifest")->required();
    negatives->add_option("--count", o.count, "Number of pairs")->required()->check(CLI::PositiveNumber);
    negatives->add_option("--out", o.out, "Output directory")->required();
    negatives->add_option("--name", o.name, "Dataset name");
    auto* validate = dataset->add_subcommand("validate", "Check a dataset against expected counts");
    validate->add_option("--manifest", o.manifest, "Dataset manifest");
    validate->add_option("--expected", o.expected, "Expected record count");
    validate->add_option("--raw", o.raw, "Released annotation JSON file");
    validate->add_option("--name", o.name, "Reference name for --raw (e.g. clotho-detail)");
    validate->add_flag("--strict", o.strict, "Exit 1 on any mismatch");
    validate->add_flag("--json", o.as_json, "Print the report as JSON");

    auto* serve = app.add_subcommand("serve", "Run the chat service");
    serve->add_option("--host", o.host, "Bind address")->envname("GROUNDCHAT_HOST");
    serve->add_option("--port", o.port, "Port (0 picks a free one)")->envname("GROUNDCHAT_PORT");
    serve->add_option("--mocks", o.mocks, "Mock adapter table")->envname("GROUNDCHAT_MOCKS");
    serve->add_option("--checkpoint", o.checkpoint, "Head checkpoint")->envname("GROUNDCHAT_CHECKPOINT");
    serve->add_option("--persist", o.persist, "Session persistence directory");
    serve->add_option("--max-upload-mb", o.max_upload_mb, "Upload size cap in MB");
    serve->add_option("--llm", o.llm_kind, "echo or toy");
    serve->add_option("--segmenter", o.segmenter, "Mock segmenter mode");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (ground->parsed()) return cmd_ground(o);
        if (train->parsed()) return cmd_train(o);
        if (clotho->parsed()) return cmd_build_clotho(o);
        if (vggss->parsed()) return cmd_build_vggss(o);
        if (negatives->parsed()) return cmd_build_negatives(o);
        if (validate->parsed()) return cmd_validate(o);
        if (serve->parsed()) return cmd_serve(o);
    } catch (const Error& e) {
        report(e);
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "groundchat: error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
