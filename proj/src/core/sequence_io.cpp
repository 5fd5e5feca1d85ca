#include "core/sequence_io.hpp"

#include <fstream>

namespace hoigen {

namespace {

nlohmann::json matrix_to_json(const std::vector<float>& flat, int rows, int cols) {
    nlohmann::json out = nlohmann::json::array();
    for (int i = 0; i < rows; ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < cols; ++j) row.push_back(flat[static_cast<size_t>(i) * cols + j]);
        out.push_back(std::move(row));
    }
    return out;
}

std::vector<float> matrix_from_json(const nlohmann::json& j, int cols, const std::string& what) {
    std::vector<float> flat;
    flat.reserve(j.size() * static_cast<size_t>(cols));
    for (const auto& row : j) {
        if (static_cast<int>(row.size()) != cols)
            throw ReprError(what + ": expected row width " + std::to_string(cols) + ", got " +
                            std::to_string(row.size()));
        for (const auto& v : row) flat.push_back(v.get<float>());
    }
    return flat;
}

}  // namespace

nlohmann::json sequence_to_json(const SequenceRecord& rec) {
    nlohmann::json j;
    j["fps"] = rec.fps;
    j["text"] = rec.text;
    j["sub_actions"] = rec.sub_actions;
    j["atomic_id"] = rec.atomic_id;
    j["human"] = matrix_to_json(rec.human, rec.frames, kHumanWidth);
    auto& objs = j["objects"] = nlohmann::json::array();
    for (const auto& o : rec.objects) objs.push_back(matrix_to_json(o, rec.frames, kObjectWidth));
    auto& geoms = j["geometry"] = nlohmann::json::array();
    for (const auto& g : rec.geometry) {
        nlohmann::json gj;
        gj["points"] = matrix_to_json(g.points, g.cloud_size(), 3);
        gj["keypoints"] = matrix_to_json(g.keypoints, kNumKeypoints, 3);
        geoms.push_back(std::move(gj));
    }
    return j;
}

SequenceRecord sequence_from_json(const nlohmann::json& j) {
    SequenceRecord rec;
    rec.fps = j.at("fps").get<float>();
    rec.text = j.at("text").get<std::string>();
    if (j.contains("sub_actions")) rec.sub_actions = j.at("sub_actions").get<std::vector<std::string>>();
    rec.atomic_id = j.value("atomic_id", -1);
    rec.human = matrix_from_json(j.at("human"), kHumanWidth, "human");
    rec.frames = static_cast<int>(j.at("human").size());
    for (const auto& oj : j.at("objects")) {
        auto flat = matrix_from_json(oj, kObjectWidth, "object");
        if (static_cast<int>(oj.size()) != rec.frames)
            throw ReprError("sequence: object frame count does not match human frame count");
        rec.objects.push_back(std::move(flat));
    }
    for (const auto& gj : j.at("geometry")) {
        ObjectGeometry g;
        g.points = matrix_from_json(gj.at("points"), 3, "geometry points");
        g.keypoints = matrix_from_json(gj.at("keypoints"), 3, "geometry keypoints");
        if (g.keypoints.size() != kNumKeypoints * 3)
            throw ReprError("geometry: expected 51 keypoints");
        rec.geometry.push_back(std::move(g));
    }
    if (rec.geometry.size() != rec.objects.size())
        throw ReprError("sequence: geometry count does not match object count");
    return rec;
}

void write_sequence(const SequenceRecord& rec, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ReprError("write_sequence: cannot open " + path);
    out << sequence_to_json(rec).dump() << "\n";
    if (!out) throw ReprError("write_sequence: failed writing " + path);
}

SequenceRecord read_sequence(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ReprError("read_sequence: cannot open " + path);
    return sequence_from_json(nlohmann::json::parse(in));
}

void validate_sequence(const SequenceRecord& rec) {
    if (rec.frames < 2) throw ReprError("sequence: fewer than 2 frames");
    if (rec.objects.empty()) throw ReprError("sequence: at least one object required");
    if (static_cast<int>(rec.human.size()) != rec.frames * kHumanWidth)
        throw ReprError("sequence: human matrix size mismatch");
    validate_human(unflatten_human(Tensor::from_values({rec.frames, kHumanWidth}, rec.human)));
    for (size_t i = 0; i < rec.objects.size(); ++i) {
        if (static_cast<int>(rec.objects[i].size()) != rec.frames * kObjectWidth)
            throw ReprError("sequence: object matrix size mismatch");
        validate_object(
            unflatten_object(Tensor::from_values({rec.frames, kObjectWidth}, rec.objects[i])));
        validate_geometry(rec.geometry[i]);
    }
}

}  // namespace hoigen
