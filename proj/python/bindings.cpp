#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "groundchat/cli/config.hpp"
#include "groundchat/core/serialization.hpp"
#include "groundchat/datasets/builders.hpp"
#include "groundchat/error.hpp"
#include "groundchat/fixtures.hpp"
#include "groundchat/grounding/pipeline.hpp"
#include "groundchat/model/checkpoint.hpp"
#include "groundchat/prompting/prompt.hpp"
#include "groundchat/service/chat.hpp"
#include "groundchat/training/trainer.hpp"

namespace py = pybind11;
using namespace groundchat;
using nlohmann::json;

namespace {

py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }
json from_py(const py::handle& obj) { return json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>()); }

std::vector<std::uint8_t> bytes_of(const py::bytes& b) {
    const std::string s = b;
    return {s.begin(), s.end()};
}

std::optional<ModalityInput> input_of(ModalityKind kind, const std::optional<py::bytes>& b) {
    if (!b) return std::nullopt;
    return ModalityInput::from_bytes(kind, bytes_of(*b));
}

py::bytes to_bytes(const std::vector<std::uint8_t>& v) { return {reinterpret_cast<const char*>(v.data()), v.size()}; }

model::ModelConfig model_config(const py::dict& overrides) {
    json j = json::object();
    if (!overrides.empty()) j["model"] = from_py(overrides);
    return cli::parse_cli_config(j).model;
}

std::vector<datasets::CaptionRecord> caption_records(ModalityKind kind, const py::list& items) {
    std::vector<datasets::CaptionRecord> out;
    for (const auto& item : items) {
        const auto d = item.cast<py::dict>();
        const auto input = ModalityInput::from_bytes(kind, bytes_of(d["media"].cast<py::bytes>()));
        out.push_back({MediaRef::of(input), d["caption"].cast<std::string>(), d["source_id"].cast<std::string>()});
    }
    return out;
}

training::TrainingExample training_example(const py::dict& d) {
    training::TrainingExample ex;
    if (d.contains("image") && !d["image"].is_none()) ex.image = ModalityInput::from_bytes(ModalityKind::image, bytes_of(d["image"]));
    if (d.contains("audio") && !d["audio"].is_none()) ex.audio = ModalityInput::from_bytes(ModalityKind::audio, bytes_of(d["audio"]));
    ex.instruction = d["instruction"].cast<std::string>();
    ex.response = d["response"].cast<std::string>();
    if (d.contains("related")) ex.related = d["related"].cast<bool>();
    return ex;
}

py::dict hashes_dict(const std::map<model::ParamGroup, std::string>& hashes) {
    py::dict out;
    for (const auto& [g, h] : hashes) out[py::str(std::string(model::to_string(g)))] = h;
    return out;
}

/// Owns a toy model for training and inference from Python.
class PyModel {
  public:
    explicit PyModel(const py::dict& config) : model_(model::MultimodalModel::build_toy(model_config(config))) {}

    py::dict group_hashes() const { return hashes_dict(model_.group_hashes()); }

    std::string respond(const std::string& instruction, const std::optional<py::bytes>& image,
                        const std::optional<py::bytes>& audio, std::size_t max_new_tokens) const {
        training::TrainingExample ex;
        ex.image = input_of(ModalityKind::image, image);
        ex.audio = input_of(ModalityKind::audio, audio);
        ex.instruction = instruction;
        py::gil_scoped_release release;
        return training::decode_reply(model_, ex, max_new_tokens);
    }

    py::dict train(const std::string& stage, const py::list& data, std::size_t steps, std::size_t batch_size,
                   double learning_rate, std::uint64_t seed, bool train_vision_qformer) {
        training::TrainConfig cfg;
        cfg.stage = training::parse_stage(stage);
        cfg.steps = steps;
        cfg.batch_size = batch_size;
        cfg.seed = seed;
        cfg.optimizer.learning_rate = learning_rate;
        cfg.overrides.stage2_train_vision_qformer = train_vision_qformer;
        training::TrainReport report;
        std::ostringstream log;
        training::TrainHooks hooks;
        hooks.log = &log;
        if (cfg.stage == training::Stage::stage2) {
            std::vector<training::TrainingExample> examples;
            for (const auto& item : data) examples.push_back(training_example(item.cast<py::dict>()));
            py::gil_scoped_release release;
            report = training::train_stage2(cfg, model_, examples, hooks);
        } else {
            const auto kind = cfg.stage == training::Stage::stage1_vision ? ModalityKind::image : ModalityKind::audio;
            std::vector<training::CaptionPair> pairs;
            for (const auto& item : data) {
                const auto d = item.cast<py::dict>();
                pairs.push_back({ModalityInput::from_bytes(kind, bytes_of(d["media"].cast<py::bytes>())),
                                 d["caption"].cast<std::string>()});
            }
            py::gil_scoped_release release;
            report = training::train_stage1(cfg, model_, pairs, hooks);
        }
        py::list records;
        std::istringstream in(log.str());
        for (std::string line; std::getline(in, line);) records.append(to_py(json::parse(line)));
        py::dict out;
        out["steps"] = report.steps;
        out["initial_loss"] = report.initial_loss;
        out["final_loss"] = report.final_loss;
        out["hashes_before"] = hashes_dict(report.hashes_before);
        out["hashes_after"] = hashes_dict(report.hashes_after);
        out["log"] = records;
        return out;
    }

    void save(const std::string& path) const { model::save_checkpoint(path, model::capture_heads(model_)); }
    void load(const std::string& path) { model::apply_heads(model::load_checkpoint(path), model_); }

  private:
    model::MultimodalModel model_;
};

/// Chat service over mock grounding adapters, configured like the CLI.
class PyChat {
  public:
    explicit PyChat(const py::dict& config) {
        const auto cfg = cli::parse_cli_config(from_py(config), std::filesystem::current_path());
        service_ = std::make_unique<service::ChatService>(cli::make_backend(cfg), cli::service_config(cfg));
    }

    std::string create_session() { return service_->create_session().id; }
    py::object get_session(const std::string& id) const { return to_py(service::session_json(service_->get_session(id))); }

    py::object post_message(const std::string& id, const std::string& text, const std::optional<py::bytes>& image,
                            const std::optional<py::bytes>& audio) {
        service::MessageRequest req;
        req.text = text;
        if (image) req.image = service::Upload{bytes_of(*image), "image"};
        if (audio) req.audio = service::Upload{bytes_of(*audio), "audio"};
        service::Reply reply;
        {
            py::gil_scoped_release release;
            reply = service_->post_message(id, req);
        }
        return to_py(service::reply_json(id, reply));
    }

    py::bytes get_mask(const std::string& id, const std::string& mask_id) const {
        return to_bytes(service_->get_mask(id, mask_id));
    }

    void set_llm_available(bool available) {
        auto* llm = dynamic_cast<const model::SwitchableLLM*>(&service_->backend().model->llm());
        if (!llm) throw ConfigError("the service LLM cannot be switched", "service");
        llm->set_available(available);
    }

  private:
    std::unique_ptr<service::ChatService> service_;
};

} // namespace

PYBIND11_MODULE(_groundchat, m) {
    m.doc() = "Grounded multimodal chat core";

    static py::exception<Error> error(m, "GroundchatError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object exc = py::reinterpret_borrow<py::object>(error)(e.what());
            exc.attr("kind") = std::string(to_string(e.kind()));
            exc.attr("stage") = e.stage();
            exc.attr("status") = service::http_status(e);
            PyErr_SetObject(error.ptr(), exc.ptr());
        }
    });

    m.def("render_chat_prompt", [](const std::string& instruction, bool image, bool audio, bool allow_text_only) {
        prompting::ChatPromptOptions opts;
        opts.allow_text_only = allow_text_only;
        return prompting::build_chat_prompt({}, instruction, image, audio, opts).render();
    }, py::arg("instruction"), py::arg("image") = false, py::arg("audio") = false, py::arg("allow_text_only") = false);

    m.def("matching_prompt", [](const std::vector<std::string>& labels, const std::string& text) {
        const auto p = prompting::build_matching_prompt(labels, text);
        return py::make_tuple(p.system, p.user);
    }, py::arg("labels"), py::arg("text"));

    m.def("response_loss_boundary", [](const std::vector<std::string>& tokens, const std::string& marker) {
        return prompting::response_loss_boundary(tokens, marker);
    }, py::arg("tokens"), py::arg("marker") = std::string(prompting::kAssistantMarker));

    m.def("mask_to_runs", [](int width, int height, const py::bytes& bitmap) {
        const auto bits = bytes_of(bitmap);
        return SegmentMask::from_bitmap(width, height, bits).runs();
    }, py::arg("width"), py::arg("height"), py::arg("bitmap"));

    m.def("mask_from_runs", [](int width, int height, std::vector<std::uint32_t> runs) {
        return to_bytes(SegmentMask::from_runs(width, height, std::move(runs)).to_bitmap());
    }, py::arg("width"), py::arg("height"), py::arg("runs"));

    m.def("write_fixtures", [](const std::string& dir) {
        const auto p = fixtures::write_fixtures(fixtures::make_fixtures(), dir);
        py::dict out;
        out["root"] = p.root.string();
        out["media"] = p.media.string();
        out["mocks"] = p.mocks.string();
        out["config"] = p.config.string();
        out["dog_image"] = p.dog_image.string();
        out["blank_image"] = p.blank_image.string();
        out["audio"] = p.audio.string();
        out["image_captions"] = p.image_captions.string();
        out["audio_captions"] = p.audio_captions.string();
        out["bundles"] = p.bundles.string();
        out["pairs"] = p.pairs.string();
        return out;
    }, py::arg("dir"));

    m.def("ground", [](const py::bytes& image, const std::optional<std::string>& text, const std::string& mocks,
                       const std::string& segmenter, bool include_timings) {
        const auto input = ModalityInput::from_bytes(ModalityKind::image, bytes_of(image));
        const auto adapters = grounding::make_mock_adapters(
            std::make_shared<const grounding::MockTable>(grounding::MockTable::load(mocks)),
            grounding::MockSegmenter::parse_mode(segmenter));
        std::optional<std::string_view> response;
        if (text) response = *text;
        grounding::ResultJsonOptions opts;
        opts.include_timings = include_timings;
        return to_py(grounding::to_json(grounding::run_pipeline(input, response, adapters), opts));
    }, py::arg("image"), py::arg("text") = std::nullopt, py::arg("mocks"), py::arg("segmenter") = "box",
       py::arg("include_timings") = false);

    m.def("build_negative_pairs", [](const py::list& audio, const py::list& images, std::size_t count, std::uint64_t seed) {
        const auto a = caption_records(ModalityKind::audio, audio);
        const auto i = caption_records(ModalityKind::image, images);
        return to_py(json(datasets::build_negative_pairs(a, i, count, seed)));
    }, py::arg("audio"), py::arg("images"), py::arg("count"), py::arg("seed"));

    m.def("validate_sample", [](const py::dict& sample) {
        return validate_sample(from_py(sample).get<InstructionSample>());
    }, py::arg("sample"));

    py::class_<PyModel>(m, "Model")
        .def(py::init<const py::dict&>(), py::arg("config") = py::dict())
        .def("group_hashes", &PyModel::group_hashes)
        .def("respond", &PyModel::respond, py::arg("instruction"), py::arg("image") = std::nullopt,
             py::arg("audio") = std::nullopt, py::arg("max_new_tokens") = 64)
        .def("train", &PyModel::train, py::arg("stage"), py::arg("data"), py::arg("steps") = 100,
             py::arg("batch_size") = 4, py::arg("learning_rate") = 1e-2, py::arg("seed") = 0,
             py::arg("train_vision_qformer") = false)
        .def("save", &PyModel::save, py::arg("path"))
        .def("load", &PyModel::load, py::arg("path"));

    py::class_<PyChat>(m, "ChatService")
        .def(py::init<const py::dict&>(), py::arg("config"))
        .def("create_session", &PyChat::create_session)
        .def("get_session", &PyChat::get_session, py::arg("session_id"))
        .def("post_message", &PyChat::post_message, py::arg("session_id"), py::arg("text"),
             py::arg("image") = std::nullopt, py::arg("audio") = std::nullopt)
        .def("get_mask", &PyChat::get_mask, py::arg("session_id"), py::arg("mask_id"))
        .def("set_llm_available", &PyChat::set_llm_available, py::arg("available"));
}
