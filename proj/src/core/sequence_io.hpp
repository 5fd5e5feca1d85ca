#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "core/motion.hpp"

namespace hoigen {

/// One HOI sequence in the interchange format shared by data generation,
/// training, and evaluation. Motion matrices are stored flattened row-major.
struct SequenceRecord {
    float fps = 30.0f;
    std::string text;
    std::vector<std::string> sub_actions;
    int frames = 0;
    std::vector<float> human;                // frames * 471
    std::vector<std::vector<float>> objects; // per object, frames * 170
    std::vector<ObjectGeometry> geometry;    // per object
    int atomic_id = -1;

    int num_objects() const { return static_cast<int>(objects.size()); }
};

nlohmann::json sequence_to_json(const SequenceRecord& rec);
SequenceRecord sequence_from_json(const nlohmann::json& j);

void write_sequence(const SequenceRecord& rec, const std::string& path);
SequenceRecord read_sequence(const std::string& path);

/// Width checks plus human/object motion validation.
void validate_sequence(const SequenceRecord& rec);

}  // namespace hoigen
