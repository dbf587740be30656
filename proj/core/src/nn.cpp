#include "collossl/nn.hpp"

#include <fstream>

#include <json.hpp>

namespace collossl::nn {

FreezeMode freeze_mode_from_string(const std::string& s) {
    if (s == "finetune_last_conv") return FreezeMode::finetune_last_conv;
    if (s == "all_trainable") return FreezeMode::all_trainable;
    if (s == "head_only") return FreezeMode::head_only;
    throw ConfigError("unknown freeze mode '" + s +
                      "' (expected finetune_last_conv|all_trainable|head_only)");
}

std::string to_string(FreezeMode m) {
    switch (m) {
        case FreezeMode::finetune_last_conv: return "finetune_last_conv";
        case FreezeMode::all_trainable: return "all_trainable";
        case FreezeMode::head_only: return "head_only";
    }
    return "?";
}

OptimizerKind optimizer_from_string(const std::string& s) {
    if (s == "adam") return OptimizerKind::adam;
    if (s == "sgd") return OptimizerKind::sgd;
    throw ConfigError("unknown optimizer '" + s + "' (expected adam|sgd)");
}

std::string to_string(OptimizerKind k) {
    return k == OptimizerKind::adam ? "adam" : "sgd";
}

const TensorBlob& Checkpoint::find(const std::string& name) const {
    for (const auto& t : tensors) {
        if (t.name == name) return t;
    }
    throw DataError("checkpoint is missing tensor '" + name + "'");
}

namespace {
constexpr char kMagic[] = "CLSLCKPT1\n";
constexpr size_t kMagicLen = sizeof(kMagic) - 1;
}  // namespace

void save_checkpoint(const std::string& path, const std::string& architecture, std::uint64_t seed,
                     std::int64_t step, const std::vector<TensorBlob>& tensors) {
    nlohmann::json manifest;
    manifest["architecture"] = architecture;
    manifest["seed"] = seed;
    manifest["step"] = step;
    manifest["dtype"] = "f32";
    std::uint64_t offset = 0;
    nlohmann::json tlist = nlohmann::json::array();
    for (const auto& t : tensors) {
        nlohmann::json entry;
        entry["name"] = t.name;
        entry["shape"] = t.shape;
        entry["offset"] = offset;
        entry["count"] = t.data.size();
        tlist.push_back(entry);
        offset += t.data.size();
    }
    manifest["tensors"] = tlist;
    const std::string header = manifest.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out.write(kMagic, static_cast<std::streamsize>(kMagicLen));
    const std::uint64_t header_len = header.size();
    out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (const auto& t : tensors) {
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    }
    if (!out) throw DataError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path, const std::string& expect_architecture) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[kMagicLen];
    in.read(magic, static_cast<std::streamsize>(kMagicLen));
    if (in.gcount() != static_cast<std::streamsize>(kMagicLen) ||
        std::string_view(magic, kMagicLen) != kMagic) {
        throw DataError(path + ": not a checkpoint file");
    }
    std::uint64_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
    std::string header(header_len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw DataError(path + ": truncated checkpoint header");

    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": bad checkpoint manifest: " + e.what());
    }

    Checkpoint ckpt;
    ckpt.architecture = manifest.at("architecture").get<std::string>();
    ckpt.seed = manifest.at("seed").get<std::uint64_t>();
    ckpt.step = manifest.at("step").get<std::int64_t>();
    if (!expect_architecture.empty() && ckpt.architecture != expect_architecture) {
        throw DataError(path + ": architecture mismatch: checkpoint has '" + ckpt.architecture +
                        "', expected '" + expect_architecture + "'");
    }
    for (const auto& entry : manifest.at("tensors")) {
        TensorBlob t;
        t.name = entry.at("name").get<std::string>();
        t.shape = entry.at("shape").get<std::vector<std::int64_t>>();
        const auto count = entry.at("count").get<std::uint64_t>();
        t.data.resize(count);
        in.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(count * sizeof(float)));
        if (static_cast<std::uint64_t>(in.gcount()) != count * sizeof(float)) {
            throw DataError(path + ": truncated tensor '" + t.name + "'");
        }
        ckpt.tensors.push_back(std::move(t));
    }
    return ckpt;
}

}  // namespace collossl::nn
