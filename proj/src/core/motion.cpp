#include "core/motion.hpp"

#include <algorithm>
#include <cmath>

#include "core/rng.hpp"

namespace hoigen {

namespace {

std::array<double, 6> rot6d_at(const std::vector<float>& rot, int frame) {
    std::array<double, 6> r;
    for (int i = 0; i < 6; ++i) r[static_cast<size_t>(i)] = rot[static_cast<size_t>(frame) * 6 + i];
    return r;
}

Vec3 vec3_at(const std::vector<float>& v, int i) {
    return {v[static_cast<size_t>(i) * 3], v[static_cast<size_t>(i) * 3 + 1],
            v[static_cast<size_t>(i) * 3 + 2]};
}

void put_vec3(std::vector<float>& v, int i, const Vec3& p) {
    v[static_cast<size_t>(i) * 3] = static_cast<float>(p.x);
    v[static_cast<size_t>(i) * 3 + 1] = static_cast<float>(p.y);
    v[static_cast<size_t>(i) * 3 + 2] = static_cast<float>(p.z);
}

}  // namespace

ObjectGeometry make_object_geometry(std::vector<float> points, uint64_t seed) {
    const int k = static_cast<int>(points.size() / 3);
    if (k < 1 || points.size() % 3 != 0)
        throw ReprError("make_object_geometry: point cloud must be K x 3 with K >= 1");
    ObjectGeometry geom;
    geom.points = std::move(points);

    Vec3 centroid{0, 0, 0};
    for (int i = 0; i < k; ++i) centroid = centroid + geom.point(i);
    centroid = centroid * (1.0 / k);

    // farthest-point sampling, deterministic start from the seed
    Rng rng(seed);
    std::vector<int> selected;
    selected.push_back(static_cast<int>(rng.below(static_cast<uint64_t>(k))));
    std::vector<double> dist(static_cast<size_t>(k), std::numeric_limits<double>::infinity());
    const int n_samples = std::min(kNumKeypoints - 1, k);
    while (static_cast<int>(selected.size()) < n_samples) {
        const Vec3 last = geom.point(selected.back());
        int best = 0;
        double best_d = -1.0;
        for (int i = 0; i < k; ++i) {
            const double d = (geom.point(i) - last).norm();
            dist[static_cast<size_t>(i)] = std::min(dist[static_cast<size_t>(i)], d);
            if (dist[static_cast<size_t>(i)] > best_d) {
                best_d = dist[static_cast<size_t>(i)];
                best = i;
            }
        }
        selected.push_back(best);
    }
    geom.keypoints.assign(kNumKeypoints * 3, 0.0f);
    for (int s = 0; s < kNumKeypoints - 1; ++s)
        put_vec3(geom.keypoints, s, geom.point(selected[static_cast<size_t>(s) % selected.size()]));
    put_vec3(geom.keypoints, kCentroidKeypoint, centroid);
    return geom;
}

void validate_geometry(const ObjectGeometry& geom) {
    if (geom.keypoints.size() != kNumKeypoints * 3)
        throw ReprError("geometry: expected " + std::to_string(kNumKeypoints) + " keypoints, got " +
                        std::to_string(geom.keypoints.size() / 3));
    const int k = geom.cloud_size();
    if (k < 1) throw ReprError("geometry: empty point cloud");
    Vec3 centroid{0, 0, 0};
    for (int i = 0; i < k; ++i) centroid = centroid + geom.point(i);
    centroid = centroid * (1.0 / k);
    if ((centroid - geom.keypoint(kCentroidKeypoint)).norm() > 1e-6 * std::max(1.0, centroid.norm()))
        throw ReprError("geometry: keypoint 51 does not equal the cloud centroid");
}

EnhancedObjectMotion derive_enhanced(const RawObjectMotion& raw, const ObjectGeometry& geom,
                                     const std::vector<float>& left_hand,
                                     const std::vector<float>& right_hand, float fps,
                                     float contact_threshold) {
    const int s = raw.frames;
    if (s < 2) throw ReprError("derive_enhanced: need at least 2 frames, got " + std::to_string(s));
    if (fps <= 0) throw ReprError("derive_enhanced: fps must be positive");
    if (contact_threshold <= 0) throw ReprError("derive_enhanced: contact threshold must be positive");
    if (static_cast<int>(left_hand.size()) != s * 3 || static_cast<int>(right_hand.size()) != s * 3)
        throw ReprError("derive_enhanced: hand tracks must be S x 3");

    EnhancedObjectMotion out;
    out.frames = s;
    out.rotation = raw.rotation;
    out.translation = raw.translation;
    out.v_t.assign(static_cast<size_t>(s) * 3, 0.0f);
    out.v_a.assign(static_cast<size_t>(s) * 3, 0.0f);
    out.keypoint_positions.assign(static_cast<size_t>(s) * kNumKeypoints * 3, 0.0f);
    out.contact.assign(static_cast<size_t>(s) * 2, 0.0f);

    std::vector<Mat3> rots(static_cast<size_t>(s));
    for (int i = 0; i < s; ++i) rots[static_cast<size_t>(i)] = rot6d_to_matrix(rot6d_at(raw.rotation, i));

    for (int i = 0; i < s; ++i) {
        const int a = std::min(i, s - 2);  // final frame copies the penultimate velocity
        const Vec3 dv = (vec3_at(raw.translation, a + 1) - vec3_at(raw.translation, a)) * fps;
        put_vec3(out.v_t, i, dv);
        const Mat3 rel = rots[static_cast<size_t>(a)].transposed() * rots[static_cast<size_t>(a) + 1];
        put_vec3(out.v_a, i, matrix_to_rotvec(rel) * fps);
    }

    for (int i = 0; i < s; ++i) {
        const Vec3 t = vec3_at(raw.translation, i);
        const Mat3& r = rots[static_cast<size_t>(i)];
        for (int kp = 0; kp < kNumKeypoints; ++kp)
            put_vec3(out.keypoint_positions, i * kNumKeypoints + kp,
                     r.apply(geom.keypoint(kp)) + t);
        const Vec3 centroid = out.centroid(i);
        const double dl = (vec3_at(left_hand, i) - centroid).norm();
        const double dr = (vec3_at(right_hand, i) - centroid).norm();
        out.contact[static_cast<size_t>(i) * 2] = dl < contact_threshold ? 1.0f : 0.0f;
        out.contact[static_cast<size_t>(i) * 2 + 1] = dr < contact_threshold ? 1.0f : 0.0f;
    }
    return out;
}

Tensor flatten_human(const HumanMotion& h) {
    const int s = h.frames;
    Tensor t = Tensor::zeros({s, kHumanWidth});
    auto& v = t.values();
    for (int i = 0; i < s; ++i) {
        float* row = v.data() + static_cast<size_t>(i) * kHumanWidth;
        std::copy_n(h.joints.data() + static_cast<size_t>(i) * kNumJoints * 3, kNumJoints * 3, row);
        std::copy_n(h.rotations.data() + static_cast<size_t>(i) * kNumJoints * 6, kNumJoints * 6,
                    row + kNumJoints * 3);
        std::copy_n(h.root_translation.data() + static_cast<size_t>(i) * 3, 3,
                    row + kNumJoints * 9);
    }
    return t;
}

HumanMotion unflatten_human(const Tensor& t) {
    if (t.rank() != 2 || t.cols() != kHumanWidth)
        throw ReprError("unflatten_human: expected width " + std::to_string(kHumanWidth) + ", got " +
                        shape_str(t.shape()));
    HumanMotion h;
    h.frames = t.rows();
    h.joints.resize(static_cast<size_t>(h.frames) * kNumJoints * 3);
    h.rotations.resize(static_cast<size_t>(h.frames) * kNumJoints * 6);
    h.root_translation.resize(static_cast<size_t>(h.frames) * 3);
    const auto& v = t.values();
    for (int i = 0; i < h.frames; ++i) {
        const float* row = v.data() + static_cast<size_t>(i) * kHumanWidth;
        std::copy_n(row, kNumJoints * 3, h.joints.data() + static_cast<size_t>(i) * kNumJoints * 3);
        std::copy_n(row + kNumJoints * 3, kNumJoints * 6,
                    h.rotations.data() + static_cast<size_t>(i) * kNumJoints * 6);
        std::copy_n(row + kNumJoints * 9, 3, h.root_translation.data() + static_cast<size_t>(i) * 3);
    }
    return h;
}

Tensor flatten_object(const EnhancedObjectMotion& o) {
    const int s = o.frames;
    Tensor t = Tensor::zeros({s, kObjectWidth});
    auto& v = t.values();
    for (int i = 0; i < s; ++i) {
        float* row = v.data() + static_cast<size_t>(i) * kObjectWidth;
        std::copy_n(o.rotation.data() + static_cast<size_t>(i) * 6, 6, row + kObjRotOff);
        std::copy_n(o.translation.data() + static_cast<size_t>(i) * 3, 3, row + kObjTransOff);
        std::copy_n(o.v_t.data() + static_cast<size_t>(i) * 3, 3, row + kObjVtOff);
        std::copy_n(o.v_a.data() + static_cast<size_t>(i) * 3, 3, row + kObjVaOff);
        std::copy_n(o.keypoint_positions.data() + static_cast<size_t>(i) * kNumKeypoints * 3,
                    kNumKeypoints * 3, row + kObjKeypointOff);
        std::copy_n(o.contact.data() + static_cast<size_t>(i) * 2, 2, row + kObjContactOff);
    }
    return t;
}

EnhancedObjectMotion unflatten_object(const Tensor& t) {
    if (t.rank() != 2 || t.cols() != kObjectWidth)
        throw ReprError("unflatten_object: expected width " + std::to_string(kObjectWidth) +
                        ", got " + shape_str(t.shape()));
    EnhancedObjectMotion o;
    o.frames = t.rows();
    o.rotation.resize(static_cast<size_t>(o.frames) * 6);
    o.translation.resize(static_cast<size_t>(o.frames) * 3);
    o.v_t.resize(static_cast<size_t>(o.frames) * 3);
    o.v_a.resize(static_cast<size_t>(o.frames) * 3);
    o.keypoint_positions.resize(static_cast<size_t>(o.frames) * kNumKeypoints * 3);
    o.contact.resize(static_cast<size_t>(o.frames) * 2);
    const auto& v = t.values();
    for (int i = 0; i < o.frames; ++i) {
        const float* row = v.data() + static_cast<size_t>(i) * kObjectWidth;
        std::copy_n(row + kObjRotOff, 6, o.rotation.data() + static_cast<size_t>(i) * 6);
        std::copy_n(row + kObjTransOff, 3, o.translation.data() + static_cast<size_t>(i) * 3);
        std::copy_n(row + kObjVtOff, 3, o.v_t.data() + static_cast<size_t>(i) * 3);
        std::copy_n(row + kObjVaOff, 3, o.v_a.data() + static_cast<size_t>(i) * 3);
        std::copy_n(row + kObjKeypointOff, kNumKeypoints * 3,
                    o.keypoint_positions.data() + static_cast<size_t>(i) * kNumKeypoints * 3);
        std::copy_n(row + kObjContactOff, 2, o.contact.data() + static_cast<size_t>(i) * 2);
    }
    return o;
}

namespace {

void check_rot6d_blocks(const std::vector<float>& rot, int count, const char* what) {
    for (int b = 0; b < count; ++b) {
        std::array<double, 6> r;
        for (int i = 0; i < 6; ++i) r[static_cast<size_t>(i)] = rot[static_cast<size_t>(b) * 6 + i];
        Mat3 m = rot6d_to_matrix(r);
        if (std::fabs(m.det() - 1.0) > 1e-4)
            throw ReprError(std::string(what) + ": 6D block " + std::to_string(b) +
                            " does not decode to a proper rotation");
    }
}

}  // namespace

void validate_human(const HumanMotion& h) {
    const size_t s = static_cast<size_t>(h.frames);
    if (h.joints.size() != s * kNumJoints * 3 || h.rotations.size() != s * kNumJoints * 6 ||
        h.root_translation.size() != s * 3)
        throw ReprError("human motion: field sizes do not match frame count");
    check_rot6d_blocks(h.rotations, h.frames * kNumJoints, "human motion");
}

void validate_object(const EnhancedObjectMotion& o) {
    const size_t s = static_cast<size_t>(o.frames);
    if (o.rotation.size() != s * 6 || o.translation.size() != s * 3 || o.v_t.size() != s * 3 ||
        o.v_a.size() != s * 3 || o.keypoint_positions.size() != s * kNumKeypoints * 3 ||
        o.contact.size() != s * 2)
        throw ReprError("object motion: field sizes do not match frame count");
    check_rot6d_blocks(o.rotation, o.frames, "object motion");
}

}  // namespace hoigen
