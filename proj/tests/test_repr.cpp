#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "core/motion.hpp"
#include "core/rng.hpp"
#include "core/sequence_io.hpp"

using namespace hoigen;

namespace {

std::vector<float> random_cloud(int k, Rng& rng) {
    std::vector<float> pts(static_cast<size_t>(k) * 3);
    for (auto& v : pts) v = static_cast<float>(rng.uniform(-0.2, 0.2));
    return pts;
}

RawObjectMotion identity_track(int frames) {
    RawObjectMotion raw;
    raw.frames = frames;
    raw.rotation.assign(static_cast<size_t>(frames) * 6, 0.0f);
    for (int i = 0; i < frames; ++i) {
        raw.rotation[static_cast<size_t>(i) * 6 + 0] = 1.0f;  // identity 6D: (1,0,0, 0,1,0)
        raw.rotation[static_cast<size_t>(i) * 6 + 4] = 1.0f;
    }
    raw.translation.assign(static_cast<size_t>(frames) * 3, 0.0f);
    return raw;
}

std::vector<float> far_hands(int frames) {
    std::vector<float> h(static_cast<size_t>(frames) * 3, 100.0f);
    return h;
}

}  // namespace

TEST_CASE("rot6d identity columns decode to identity") {
    Mat3 r = rot6d_to_matrix({1, 0, 0, 0, 1, 0});
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(r(i, j) == doctest::Approx(i == j ? 1.0 : 0.0));
}

TEST_CASE("rot6d decode is orthonormal with det +1 on random input") {
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        std::array<double, 6> enc;
        for (auto& v : enc) v = rng.gaussian();
        Mat3 r = rot6d_to_matrix(enc);
        Mat3 rtr = r.transposed() * r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                CHECK(rtr(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-6));
        CHECK(r.det() == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("rot6d Gram-Schmidt matches the hand-computed 90 degree z-rotation") {
    // columns a1=(0,1,0), a2=(-1,0,0): b1=(0,1,0), b2=(-1,0,0), b3=b1xb2=(0,0,1)
    Mat3 r = rot6d_to_matrix({0, 1, 0, -1, 0, 0});
    const double expect[9] = {0, -1, 0, 1, 0, 0, 0, 0, 1};
    for (int i = 0; i < 9; ++i) CHECK(r.m[static_cast<size_t>(i)] == doctest::Approx(expect[i]));
}

TEST_CASE("rot6d degenerate input raises") {
    CHECK_THROWS_AS(rot6d_to_matrix({0, 0, 0, 1, 0, 0}), RotationError);
    CHECK_THROWS_AS(rot6d_to_matrix({1, 0, 0, 2, 0, 0}), RotationError);
}

TEST_CASE("rotvec round trip") {
    Rng rng(77);
    for (int trial = 0; trial < 30; ++trial) {
        Vec3 w{rng.gaussian(), rng.gaussian(), rng.gaussian()};
        // principal range only: the rotation-vector form wraps beyond pi
        w = w * (rng.uniform(0.0, 3.0) / std::max(1e-9, w.norm()));
        Mat3 r = axis_angle_to_matrix(w);
        Vec3 back = matrix_to_rotvec(r);
        CHECK((back - w).norm() < 1e-7 * std::max(1.0, w.norm()));
    }
}

TEST_CASE("geometry centroid keypoint equals the cloud mean") {
    Rng rng(3);
    auto geom = make_object_geometry(random_cloud(1024, rng), 9);
    validate_geometry(geom);
    Vec3 mean{0, 0, 0};
    for (int i = 0; i < geom.cloud_size(); ++i) mean = mean + geom.point(i);
    mean = mean * (1.0 / geom.cloud_size());
    CHECK((mean - geom.keypoint(kCentroidKeypoint)).norm() < 1e-6);
}

TEST_CASE("derive_enhanced: constant translation gives zero velocity") {
    Rng rng(5);
    auto geom = make_object_geometry(random_cloud(64, rng), 1);
    auto raw = identity_track(6);
    auto enh = derive_enhanced(raw, geom, far_hands(6), far_hands(6), 30.0f, 0.12f);
    for (float v : enh.v_t) CHECK(v == 0.0f);
    for (float v : enh.v_a) CHECK(std::fabs(v) < 1e-6f);
}

TEST_CASE("derive_enhanced: +0.1 m per frame at fps 30 gives v_t = (3,0,0)") {
    Rng rng(6);
    auto geom = make_object_geometry(random_cloud(64, rng), 1);
    auto raw = identity_track(5);
    for (int i = 0; i < 5; ++i) raw.translation[static_cast<size_t>(i) * 3] = 0.1f * i;
    auto enh = derive_enhanced(raw, geom, far_hands(5), far_hands(5), 30.0f, 0.12f);
    for (int i = 0; i < 5; ++i) {
        CHECK(enh.v_t[static_cast<size_t>(i) * 3] == doctest::Approx(3.0f).epsilon(1e-5));
        CHECK(enh.v_t[static_cast<size_t>(i) * 3 + 1] == 0.0f);
    }
}

TEST_CASE("derive_enhanced: identity rotation keeps keypoints at canonical + t") {
    Rng rng(7);
    auto geom = make_object_geometry(random_cloud(64, rng), 1);
    auto raw = identity_track(3);
    raw.translation = {0.5f, -0.25f, 2.0f, 0.5f, -0.25f, 2.0f, 0.5f, -0.25f, 2.0f};
    auto enh = derive_enhanced(raw, geom, far_hands(3), far_hands(3), 30.0f, 0.12f);
    for (int kp = 0; kp < kNumKeypoints; ++kp) {
        const Vec3 expect = geom.keypoint(kp) + Vec3{0.5, -0.25, 2.0};
        const size_t base = static_cast<size_t>(kp) * 3;
        CHECK(enh.keypoint_positions[base] == doctest::Approx(expect.x).epsilon(1e-5));
        CHECK(enh.keypoint_positions[base + 1] == doctest::Approx(expect.y).epsilon(1e-5));
        CHECK(enh.keypoint_positions[base + 2] == doctest::Approx(expect.z).epsilon(1e-5));
    }
}

TEST_CASE("derive_enhanced: flattened width is 170 and contact labels are self-consistent") {
    Rng rng(8);
    auto geom = make_object_geometry(random_cloud(128, rng), 2);
    const int s = 10;
    auto raw = identity_track(s);
    for (int i = 0; i < s; ++i) raw.translation[static_cast<size_t>(i) * 3 + 1] = 0.05f * i;
    // left hand tracks the centroid for the first half, right hand stays far
    std::vector<float> left(static_cast<size_t>(s) * 3, 50.0f), right = far_hands(s);
    auto enh0 = derive_enhanced(raw, geom, far_hands(s), right, 30.0f, 0.12f);
    for (int i = 0; i < s / 2; ++i) {
        const Vec3 c = enh0.centroid(i);
        left[static_cast<size_t>(i) * 3] = static_cast<float>(c.x) + 0.01f;
        left[static_cast<size_t>(i) * 3 + 1] = static_cast<float>(c.y);
        left[static_cast<size_t>(i) * 3 + 2] = static_cast<float>(c.z);
    }
    auto enh = derive_enhanced(raw, geom, left, right, 30.0f, 0.12f);
    CHECK(flatten_object(enh).cols() == 170);
    for (int i = 0; i < s; ++i) {
        // recompute the labels from positions: exact agreement required
        const Vec3 c = enh.centroid(i);
        const Vec3 lh{left[static_cast<size_t>(i) * 3], left[static_cast<size_t>(i) * 3 + 1],
                      left[static_cast<size_t>(i) * 3 + 2]};
        const float expect = (lh - c).norm() < 0.12 ? 1.0f : 0.0f;
        CHECK(enh.contact[static_cast<size_t>(i) * 2] == expect);
        CHECK(enh.contact[static_cast<size_t>(i) * 2 + 1] == 0.0f);
    }
}

TEST_CASE("derive_enhanced rejects single-frame tracks") {
    Rng rng(9);
    auto geom = make_object_geometry(random_cloud(32, rng), 3);
    auto raw = identity_track(1);
    CHECK_THROWS_AS(derive_enhanced(raw, geom, far_hands(1), far_hands(1), 30.0f, 0.12f),
                    ReprError);
}

TEST_CASE("flatten/unflatten round-trips bit-exactly") {
    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const int s = 2 + static_cast<int>(rng.below(6));
        HumanMotion h;
        h.frames = s;
        h.joints.resize(static_cast<size_t>(s) * kNumJoints * 3);
        h.rotations.resize(static_cast<size_t>(s) * kNumJoints * 6);
        h.root_translation.resize(static_cast<size_t>(s) * 3);
        for (auto& v : h.joints) v = static_cast<float>(rng.gaussian());
        for (auto& v : h.rotations) v = static_cast<float>(rng.gaussian());
        for (auto& v : h.root_translation) v = static_cast<float>(rng.gaussian());

        Tensor t = flatten_human(h);
        CHECK(t.cols() == 471);
        HumanMotion back = unflatten_human(t);
        CHECK(back.joints == h.joints);
        CHECK(back.rotations == h.rotations);
        CHECK(back.root_translation == h.root_translation);

        EnhancedObjectMotion o;
        o.frames = s;
        o.rotation.resize(static_cast<size_t>(s) * 6);
        o.translation.resize(static_cast<size_t>(s) * 3);
        o.v_t.resize(static_cast<size_t>(s) * 3);
        o.v_a.resize(static_cast<size_t>(s) * 3);
        o.keypoint_positions.resize(static_cast<size_t>(s) * kNumKeypoints * 3);
        o.contact.resize(static_cast<size_t>(s) * 2);
        for (auto& v : o.rotation) v = static_cast<float>(rng.gaussian());
        for (auto& v : o.translation) v = static_cast<float>(rng.gaussian());
        for (auto& v : o.v_t) v = static_cast<float>(rng.gaussian());
        for (auto& v : o.v_a) v = static_cast<float>(rng.gaussian());
        for (auto& v : o.keypoint_positions) v = static_cast<float>(rng.gaussian());
        for (auto& v : o.contact) v = rng.uniform() < 0.5 ? 0.0f : 1.0f;

        Tensor to = flatten_object(o);
        CHECK(to.cols() == 170);
        EnhancedObjectMotion backo = unflatten_object(to);
        CHECK(backo.rotation == o.rotation);
        CHECK(backo.translation == o.translation);
        CHECK(backo.v_t == o.v_t);
        CHECK(backo.v_a == o.v_a);
        CHECK(backo.keypoint_positions == o.keypoint_positions);
        CHECK(backo.contact == o.contact);
    }
}

TEST_CASE("unflatten rejects wrong widths with a descriptive error") {
    CHECK_THROWS_WITH_AS(unflatten_human(Tensor::zeros({4, 470})), doctest::Contains("471"),
                         ReprError);
    CHECK_THROWS_WITH_AS(unflatten_object(Tensor::zeros({4, 171})), doctest::Contains("170"),
                         ReprError);
}

TEST_CASE("sequence json round trip preserves all values") {
    namespace fs = std::filesystem;
    Rng rng(21);
    SequenceRecord rec;
    rec.fps = 30.0f;
    rec.text = "a person pushes the box";
    rec.sub_actions = {"reach toward the box", "push the box forward"};
    rec.atomic_id = 2;
    rec.frames = 4;
    rec.human.resize(static_cast<size_t>(rec.frames) * kHumanWidth);
    for (auto& v : rec.human) v = static_cast<float>(rng.gaussian());
    rec.objects.emplace_back(static_cast<size_t>(rec.frames) * kObjectWidth);
    for (auto& v : rec.objects[0]) v = static_cast<float>(rng.gaussian());
    rec.geometry.push_back(make_object_geometry(random_cloud(64, rng), 4));

    const std::string path = (fs::temp_directory_path() / "hoigen_seq_test.json").string();
    write_sequence(rec, path);
    auto back = read_sequence(path);
    CHECK(back.fps == rec.fps);
    CHECK(back.text == rec.text);
    CHECK(back.sub_actions == rec.sub_actions);
    CHECK(back.atomic_id == rec.atomic_id);
    CHECK(back.human == rec.human);
    CHECK(back.objects == rec.objects);
    CHECK(back.geometry[0].points == rec.geometry[0].points);
    CHECK(back.geometry[0].keypoints == rec.geometry[0].keypoints);
    fs::remove(path);
}
