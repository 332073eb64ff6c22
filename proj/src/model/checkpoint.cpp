#include "groundchat/model/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

#include "groundchat/core/digest.hpp"
#include "groundchat/error.hpp"

namespace groundchat::model {

namespace {

constexpr char kMagic[4] = {'G', 'C', 'H', 'K'};

template <typename T>
void write_le(std::ostream& out, T value) {
    unsigned char bytes[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>(value >> (8 * i));
    out.write(reinterpret_cast<const char*>(bytes), sizeof bytes);
}

template <typename T>
T read_le(std::istream& in) {
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof bytes)) throw FormatError("truncated checkpoint", "checkpoint");
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
    return value;
}

struct Slot {
    const char* name;
    ModalityKind kind;
    enum { queries, w_key, w_value, weight, bias } field;
};

constexpr Slot kSlots[] = {
    {"vision.qformer.queries", ModalityKind::image, Slot::queries},
    {"vision.qformer.w_key", ModalityKind::image, Slot::w_key},
    {"vision.qformer.w_value", ModalityKind::image, Slot::w_value},
    {"vision.projection.weight", ModalityKind::image, Slot::weight},
    {"vision.projection.bias", ModalityKind::image, Slot::bias},
    {"audio.qformer.queries", ModalityKind::audio, Slot::queries},
    {"audio.qformer.w_key", ModalityKind::audio, Slot::w_key},
    {"audio.qformer.w_value", ModalityKind::audio, Slot::w_value},
    {"audio.projection.weight", ModalityKind::audio, Slot::weight},
    {"audio.projection.bias", ModalityKind::audio, Slot::bias},
};

Matrix get(const ModalityStack& s, const Slot& slot) {
    switch (slot.field) {
    case Slot::queries: return s.qformer.queries;
    case Slot::w_key: return s.qformer.w_key;
    case Slot::w_value: return s.qformer.w_value;
    case Slot::weight: return s.projection.weight;
    case Slot::bias: return s.projection.bias;
    }
    return {};
}

void set(ModalityStack& s, const Slot& slot, const Matrix& m) {
    auto assign = [&](Matrix& target) {
        if (target.rows() != m.rows() || target.cols() != m.cols()) {
            throw FormatError(std::string("tensor ") + slot.name + " has the wrong shape", "checkpoint");
        }
        target = m;
    };
    switch (slot.field) {
    case Slot::queries: assign(s.qformer.queries); break;
    case Slot::w_key: assign(s.qformer.w_key); break;
    case Slot::w_value: assign(s.qformer.w_value); break;
    case Slot::weight: assign(s.projection.weight); break;
    case Slot::bias:
        if (m.rows() != 1 || m.cols() != s.projection.bias.cols()) {
            throw FormatError(std::string("tensor ") + slot.name + " has the wrong shape", "checkpoint");
        }
        s.projection.bias = m.row(0);
        break;
    }
}

} // namespace

HeadsCheckpoint capture_heads(const MultimodalModel& model, CheckpointMeta meta) {
    HeadsCheckpoint ckpt{model.config(), std::move(meta), {}};
    for (const auto& slot : kSlots) ckpt.tensors.emplace(slot.name, get(model.stack(slot.kind), slot));
    return ckpt;
}

void write_checkpoint(std::ostream& out, const HeadsCheckpoint& checkpoint) {
    std::vector<double> payload;
    nlohmann::json table = nlohmann::json::array();
    for (const auto& [name, m] : checkpoint.tensors) {
        table.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"offset", payload.size()}});
        payload.insert(payload.end(), m.data(), m.data() + m.size());
    }
    const std::span bytes(reinterpret_cast<const std::uint8_t*>(payload.data()), payload.size() * sizeof(double));
    const nlohmann::json header = {
        {"format", "groundchat-heads"},
        {"version", kCheckpointVersion},
        {"config", checkpoint.config},
        {"meta", {{"stage", checkpoint.meta.stage}, {"step", checkpoint.meta.step}}},
        {"tensors", table},
        {"payload_sha256", sha256_hex(bytes)},
    };
    const std::string text = header.dump();
    out.write(kMagic, sizeof kMagic);
    write_le<std::uint32_t>(out, kCheckpointVersion);
    write_le<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("checkpoint write failed", "checkpoint");
}

HeadsCheckpoint read_checkpoint(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw FormatError("not a checkpoint file", "checkpoint");
    const auto version = read_le<std::uint32_t>(in);
    if (version != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version), "checkpoint");
    }
    const auto header_len = read_le<std::uint64_t>(in);
    if (header_len > (1u << 24)) throw FormatError("checkpoint header too large", "checkpoint");
    std::string text(header_len, '\0');
    if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) throw FormatError("truncated checkpoint", "checkpoint");

    HeadsCheckpoint ckpt;
    std::vector<double> payload;
    try {
        const auto header = nlohmann::json::parse(text);
        ckpt.config = header.at("config").get<ModelConfig>();
        ckpt.meta.stage = header.at("meta").at("stage").get<std::string>();
        ckpt.meta.step = header.at("meta").at("step").get<std::size_t>();
        std::size_t doubles = 0;
        for (const auto& t : header.at("tensors")) {
            doubles = std::max(doubles, t.at("offset").get<std::size_t>() +
                                            t.at("rows").get<std::size_t>() * t.at("cols").get<std::size_t>());
        }
        payload.resize(doubles);
        if (!in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(doubles * sizeof(double)))) {
            throw FormatError("truncated checkpoint payload", "checkpoint");
        }
        const std::span bytes(reinterpret_cast<const std::uint8_t*>(payload.data()), payload.size() * sizeof(double));
        if (sha256_hex(bytes) != header.at("payload_sha256").get<std::string>()) {
            throw FormatError("checkpoint payload hash mismatch", "checkpoint");
        }
        for (const auto& t : header.at("tensors")) {
            const auto rows = t.at("rows").get<Eigen::Index>();
            const auto cols = t.at("cols").get<Eigen::Index>();
            const auto offset = t.at("offset").get<std::size_t>();
            ckpt.tensors.emplace(t.at("name").get<std::string>(),
                                 Eigen::Map<const Matrix>(payload.data() + offset, rows, cols));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed checkpoint header: ") + e.what(), "checkpoint");
    }
    return ckpt;
}

void save_checkpoint(const std::string& path, const HeadsCheckpoint& checkpoint) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write checkpoint " + path, "checkpoint");
    write_checkpoint(out, checkpoint);
}

HeadsCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("cannot read checkpoint " + path, "checkpoint");
    return read_checkpoint(in);
}

void apply_heads(const HeadsCheckpoint& checkpoint, MultimodalModel& model) {
    if (!(checkpoint.config == model.config())) throw ConfigError("checkpoint config does not match the model", "checkpoint");
    for (const auto& slot : kSlots) {
        const auto it = checkpoint.tensors.find(slot.name);
        if (it == checkpoint.tensors.end()) throw FormatError(std::string("checkpoint lacks ") + slot.name, "checkpoint");
        set(model.stack(slot.kind), slot, it->second);
    }
}

} // namespace groundchat::model
