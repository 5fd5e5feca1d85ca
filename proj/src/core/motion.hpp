#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/rotation.hpp"
#include "core/tensor.hpp"

namespace hoigen {

// representation layout constants
inline constexpr int kNumJoints = 52;
inline constexpr int kHumanWidth = kNumJoints * 3 + kNumJoints * 6 + 3;  // 471
inline constexpr int kNumKeypoints = 51;                                 // 50 samples + centroid
inline constexpr int kObjectWidth = 6 + 3 + 3 + 3 + kNumKeypoints * 3 + 2;  // 170
inline constexpr int kRawObjectWidth = 9;
inline constexpr int kDefaultCloudSize = 1024;
inline constexpr int kCentroidKeypoint = kNumKeypoints - 1;

// flattened object-frame channel offsets
inline constexpr int kObjRotOff = 0;
inline constexpr int kObjTransOff = 6;
inline constexpr int kObjVtOff = 9;
inline constexpr int kObjVaOff = 12;
inline constexpr int kObjKeypointOff = 15;
inline constexpr int kObjContactOff = 15 + kNumKeypoints * 3;  // 168

class ReprError : public std::runtime_error {
public:
    explicit ReprError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Per-frame human state: 52 global joint positions, 52 continuous 6D joint
/// rotations, root translation. Flattened width 471.
struct HumanMotion {
    int frames = 0;
    std::vector<float> joints;            // frames * 52 * 3
    std::vector<float> rotations;         // frames * 52 * 6
    std::vector<float> root_translation;  // frames * 3

    Vec3 joint(int frame, int j) const {
        const size_t base = (static_cast<size_t>(frame) * kNumJoints + j) * 3;
        return {joints[base], joints[base + 1], joints[base + 2]};
    }
};

/// Plain object track: world rotation (6D) + global translation per frame.
/// The source material leaves "relative rotation" ambiguous; this stores the
/// absolute world rotation.
struct RawObjectMotion {
    int frames = 0;
    std::vector<float> rotation;     // frames * 6
    std::vector<float> translation;  // frames * 3
};

/// Canonical-frame geometry: K points plus 51 keypoints (50 farthest-point
/// samples and the cloud centroid last).
struct ObjectGeometry {
    std::vector<float> points;     // K * 3
    std::vector<float> keypoints;  // 51 * 3

    int cloud_size() const { return static_cast<int>(points.size() / 3); }
    Vec3 point(int i) const {
        return {points[static_cast<size_t>(i) * 3], points[static_cast<size_t>(i) * 3 + 1],
                points[static_cast<size_t>(i) * 3 + 2]};
    }
    Vec3 keypoint(int i) const {
        return {keypoints[static_cast<size_t>(i) * 3], keypoints[static_cast<size_t>(i) * 3 + 1],
                keypoints[static_cast<size_t>(i) * 3 + 2]};
    }
};

/// Enriched per-frame object state (width 170): 6D rotation, translation,
/// translational/angular velocity, 51 global keypoint positions, left/right
/// hand contact labels.
struct EnhancedObjectMotion {
    int frames = 0;
    std::vector<float> rotation;            // frames * 6
    std::vector<float> translation;         // frames * 3
    std::vector<float> v_t;                 // frames * 3
    std::vector<float> v_a;                 // frames * 3
    std::vector<float> keypoint_positions;  // frames * 51 * 3
    std::vector<float> contact;             // frames * 2

    Vec3 centroid(int frame) const {
        const size_t base =
            (static_cast<size_t>(frame) * kNumKeypoints + kCentroidKeypoint) * 3;
        return {keypoint_positions[base], keypoint_positions[base + 1],
                keypoint_positions[base + 2]};
    }
};

/// Builds geometry keypoints: 50 deterministic farthest-point samples (start
/// chosen by seed) plus the centroid.
ObjectGeometry make_object_geometry(std::vector<float> points, uint64_t seed);

void validate_geometry(const ObjectGeometry& geom);

/// Derives velocities, global keypoints, and hand-contact labels from a raw
/// object track. Final-frame velocities copy the penultimate value. Contact
/// label h is 1 when hand h is within `contact_threshold` of the centroid.
EnhancedObjectMotion derive_enhanced(const RawObjectMotion& raw, const ObjectGeometry& geom,
                                     const std::vector<float>& left_hand,
                                     const std::vector<float>& right_hand, float fps,
                                     float contact_threshold);

// flatten layout: positions, rotations, translation (human);
// rotation, translation, v_t, v_a, keypoints, contacts (object)
Tensor flatten_human(const HumanMotion& h);
HumanMotion unflatten_human(const Tensor& t);
Tensor flatten_object(const EnhancedObjectMotion& o);
EnhancedObjectMotion unflatten_object(const Tensor& t);

/// Checks widths and that every 6D block decodes to a proper rotation
/// (det = +1 within 1e-4). Throws ReprError on violation.
void validate_human(const HumanMotion& h);
void validate_object(const EnhancedObjectMotion& o);

}  // namespace hoigen
