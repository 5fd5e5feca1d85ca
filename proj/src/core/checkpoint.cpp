#include "core/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

namespace hoigen {

namespace {

void write_f32_le(std::ofstream& out, const std::vector<float>& vals) {
    std::vector<unsigned char> buf(vals.size() * 4);
    for (size_t i = 0; i < vals.size(); ++i) {
        uint32_t u;
        std::memcpy(&u, &vals[i], 4);
        buf[i * 4 + 0] = static_cast<unsigned char>(u & 0xff);
        buf[i * 4 + 1] = static_cast<unsigned char>((u >> 8) & 0xff);
        buf[i * 4 + 2] = static_cast<unsigned char>((u >> 16) & 0xff);
        buf[i * 4 + 3] = static_cast<unsigned char>((u >> 24) & 0xff);
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

void read_f32_le(std::ifstream& in, std::vector<float>& vals) {
    std::vector<unsigned char> buf(vals.size() * 4);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!in) tensor_fail("checkpoint", "weights blob truncated");
    for (size_t i = 0; i < vals.size(); ++i) {
        const uint32_t u = static_cast<uint32_t>(buf[i * 4 + 0]) |
                           (static_cast<uint32_t>(buf[i * 4 + 1]) << 8) |
                           (static_cast<uint32_t>(buf[i * 4 + 2]) << 16) |
                           (static_cast<uint32_t>(buf[i * 4 + 3]) << 24);
        std::memcpy(&vals[i], &u, 4);
    }
}

}  // namespace

void save_checkpoint(const ParamStore& store, const std::string& prefix,
                     const nlohmann::json& meta) {
    nlohmann::json manifest;
    manifest["meta"] = meta;
    auto& tensors = manifest["tensors"] = nlohmann::json::array();

    std::ofstream blob(prefix + ".weights.bin", std::ios::binary | std::ios::trunc);
    if (!blob) tensor_fail("checkpoint", "cannot open " + prefix + ".weights.bin for writing");
    int64_t offset = 0;
    for (const auto& [name, t] : store.all()) {
        tensors.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
        write_f32_le(blob, t.values());
        offset += t.size() * 4;
    }
    blob.close();
    if (!blob) tensor_fail("checkpoint", "failed writing " + prefix + ".weights.bin");

    std::ofstream mf(prefix + ".manifest.json", std::ios::trunc);
    if (!mf) tensor_fail("checkpoint", "cannot open " + prefix + ".manifest.json for writing");
    mf << manifest.dump(1) << "\n";
}

nlohmann::json load_checkpoint(ParamStore& store, const std::string& prefix) {
    std::ifstream mf(prefix + ".manifest.json");
    if (!mf) tensor_fail("checkpoint", "cannot open " + prefix + ".manifest.json");
    nlohmann::json manifest = nlohmann::json::parse(mf);

    std::ifstream blob(prefix + ".weights.bin", std::ios::binary);
    if (!blob) tensor_fail("checkpoint", "cannot open " + prefix + ".weights.bin");

    for (const auto& entry : manifest.at("tensors")) {
        const std::string name = entry.at("name").get<std::string>();
        const std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
        const int64_t offset = entry.at("offset").get<int64_t>();
        std::vector<float> vals(static_cast<size_t>(shape_numel(shape)));
        blob.seekg(offset);
        read_f32_le(blob, vals);
        if (store.contains(name)) {
            Tensor& t = store.get(name);
            if (t.shape() != shape)
                tensor_fail("checkpoint", "tensor '" + name + "' has shape " + shape_str(t.shape()) +
                                              " but manifest says " + shape_str(shape));
            t.values() = std::move(vals);
        } else {
            store.all().emplace(name, Tensor::from_values(shape, std::move(vals), true));
        }
    }
    return manifest.value("meta", nlohmann::json::object());
}

bool checkpoint_exists(const std::string& prefix) {
    return std::filesystem::exists(prefix + ".manifest.json") &&
           std::filesystem::exists(prefix + ".weights.bin");
}

}  // namespace hoigen
