#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "core/priors.hpp"

using namespace hoigen;

namespace {

using DStore = ParamStoreT<double>;
using DTextEncoder = TextEncoderT<double>;

Vocabulary test_vocab() {
    Vocabulary v;
    for (const char* w : {"a", "person", "picks", "up", "the", "box", "places", "pushes",
                          "lifts", "carries", "puts", "down", "holds", "releases", "reaches"})
        v.add(w);
    return v;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / std::sqrt(na * nb);
}

}  // namespace

TEST_CASE("encode_text is deterministic and self-similar") {
    auto vocab = test_vocab();
    DStore ps(11);
    DTextEncoder enc(ps, "text", vocab.size(), 16, 2, 4, 24);
    auto ids = encode_text_ids(vocab, "a person picks up the box", 24);
    auto f1 = enc.encode(ids);
    auto f2 = enc.encode(ids);
    CHECK(f1.pooled.values() == f2.pooled.values());
    std::vector<double> a(f1.pooled.values().begin(), f1.pooled.values().end());
    CHECK(cosine(a, a) == doctest::Approx(1.0));
}

TEST_CASE("empty prompt maps to the learned null embedding") {
    auto vocab = test_vocab();
    DStore ps(13);
    DTextEncoder enc(ps, "text", vocab.size(), 16, 2, 4, 24);
    auto out = enc.encode({});
    CHECK(out.tokens.rows() == 1);
    CHECK(out.pooled.values() == ps.get("text.null").values());
}

TEST_CASE("encode_text rejects unknown token ids") {
    auto vocab = test_vocab();
    DStore ps(13);
    DTextEncoder enc(ps, "text", vocab.size(), 16, 2, 4, 24);
    CHECK_THROWS_AS(enc.encode({vocab.size()}), PriorError);
}

TEST_CASE("retrieve_atomic: verbatim label query returns that entry") {
    auto vocab = test_vocab();
    DStore ps(17);
    DTextEncoder enc(ps, "text", vocab.size(), 16, 2, 4, 24);
    std::vector<std::string> labels = {"picks up the box", "pushes the box", "puts down the box"};
    std::vector<std::vector<double>> keys;
    for (const auto& l : labels) {
        auto f = enc.encode(encode_text_ids(vocab, l, 24));
        keys.emplace_back(f.pooled.values().begin(), f.pooled.values().end());
    }
    for (size_t q = 0; q < labels.size(); ++q) {
        auto f = enc.encode(encode_text_ids(vocab, labels[q], 24));
        std::vector<double> qrow(f.pooled.values().begin(), f.pooled.values().end());
        CHECK(retrieve_atomic(qrow, keys) == static_cast<int>(q));
    }
}

TEST_CASE("retrieve_atomic: single-entry library returns index 0") {
    std::vector<std::vector<double>> keys = {{0.2, -1.0, 0.4}};
    CHECK(retrieve_atomic({1.0, 1.0, 1.0}, keys) == 0);
}

TEST_CASE("retrieve_atomic matches a brute-force cosine scan on an 8-entry library") {
    Rng rng(23);
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<std::vector<double>> keys(8, std::vector<double>(12));
        for (auto& k : keys)
            for (auto& v : k) v = rng.gaussian();
        std::vector<double> q(12);
        for (auto& v : q) v = rng.gaussian();

        int best = 0;
        double best_sim = -2.0;
        for (int i = 0; i < 8; ++i) {
            const double sim = cosine(q, keys[static_cast<size_t>(i)]);
            if (sim > best_sim) {
                best_sim = sim;
                best = i;
            }
        }
        CHECK(retrieve_atomic(q, keys) == best);
    }
}

TEST_CASE("retrieve_atomic is invariant under positive rescaling of embeddings") {
    Rng rng(29);
    std::vector<std::vector<double>> keys(6, std::vector<double>(8));
    for (auto& k : keys)
        for (auto& v : k) v = rng.gaussian();
    std::vector<double> q(8);
    for (auto& v : q) v = rng.gaussian();
    const int base = retrieve_atomic(q, keys);

    auto scaled_keys = keys;
    for (size_t i = 0; i < keys.size(); ++i) {
        const double s = rng.uniform(0.1, 9.0);
        for (auto& v : scaled_keys[i]) v *= s;
    }
    std::vector<double> sq = q;
    for (auto& v : sq) v *= rng.uniform(0.1, 9.0);
    CHECK(retrieve_atomic(sq, scaled_keys) == base);
}

TEST_CASE("encode_points is exactly permutation invariant") {
    Rng rng(31);
    DStore ps(31);
    PointNetT<double> pn(ps, "pn", 8, 12);
    ObjectGeometry geom = make_object_geometry(
        [&] {
            std::vector<float> pts(96 * 3);
            for (auto& v : pts) v = static_cast<float>(rng.gaussian() * 0.1);
            return pts;
        }(),
        5);
    auto base = pn.encode(geom).values();
    for (int perm = 0; perm < 20; ++perm) {
        ObjectGeometry shuffled = geom;
        // Fisher-Yates on points
        const int k = geom.cloud_size();
        for (int i = k - 1; i > 0; --i) {
            const int j = static_cast<int>(rng.below(static_cast<uint64_t>(i + 1)));
            for (int c = 0; c < 3; ++c)
                std::swap(shuffled.points[static_cast<size_t>(i) * 3 + c],
                          shuffled.points[static_cast<size_t>(j) * 3 + c]);
        }
        CHECK(pn.encode(shuffled).values() == base);
    }
}

TEST_CASE("encode_points on a repeated single point equals that point's MLP output") {
    DStore ps(37);
    PointNetT<double> pn(ps, "pn", 8, 12);
    ObjectGeometry one;
    one.points = {0.3f, -0.2f, 0.5f};
    one.keypoints.assign(kNumKeypoints * 3, 0.0f);
    ObjectGeometry many;
    for (int i = 0; i < 17; ++i) many.points.insert(many.points.end(), {0.3f, -0.2f, 0.5f});
    many.keypoints.assign(kNumKeypoints * 3, 0.0f);
    CHECK(pn.encode(one).values() == pn.encode(many).values());
}

TEST_CASE("build_bundle produces the spec'd shapes and rejects zero objects") {
    auto vocab = test_vocab();
    DStore ps(41);
    DTextEncoder enc(ps, "text", vocab.size(), 16, 2, 4, 24);
    PriorDims dims{16, 10, 12, 14};
    PriorBuilderT<double> builder(ps, "priors", &enc, dims, 8);

    AtomicMotionLibrary lib;
    for (const char* label : {"picks up the box", "pushes the box"}) {
        AtomicEntry e;
        e.label = label;
        e.tokens = encode_text_ids(vocab, label, 24);
        e.pose.assign(kHumanWidth, 0.1f);
        lib.entries.push_back(std::move(e));
    }
    Rng rng(43);
    std::vector<float> pts(32 * 3);
    for (auto& v : pts) v = static_cast<float>(rng.gaussian() * 0.1);
    auto geom = make_object_geometry(pts, 1);

    ProceduralVisualProvider visual(7);
    std::vector<std::vector<int>> sub_tokens = {
        encode_text_ids(vocab, "reaches the box", 24),
        encode_text_ids(vocab, "picks up the box", 24),
        encode_text_ids(vocab, "puts down the box", 24)};
    std::vector<std::string> sub_texts = {"reaches the box", "picks up the box",
                                          "puts down the box"};

    auto bundle = builder.build(sub_tokens, sub_texts, &visual, lib, {&geom});
    CHECK(bundle.text_feats.shape() == std::vector<int>{3, 16});
    CHECK(bundle.visual_feats.shape() == std::vector<int>{3, 10});
    CHECK(bundle.atomic_feats.shape() == std::vector<int>{3, 12});
    CHECK(bundle.point_feats.shape() == std::vector<int>{1, 14});
    CHECK(bundle.atomic_indices.size() == 3);

    CHECK_THROWS_AS(builder.build(sub_tokens, sub_texts, &visual, lib, {}), PriorError);

    // procedural visual features are reproducible
    auto bundle2 = builder.build(sub_tokens, sub_texts, &visual, lib, {&geom});
    CHECK(bundle.visual_feats.values() == bundle2.visual_feats.values());
}

TEST_CASE("feature files round trip and missing files raise with the path") {
    namespace fs = std::filesystem;
    const std::string dir = fs::temp_directory_path().string();
    const std::string path = FileVisualProvider::feature_path(dir, "wash the apple");
    write_feature_file(path, "visual", {{1.0f, 2.0f, 3.0f}});
    FileVisualProvider provider(dir);
    CHECK(provider.features("wash the apple", 3) == std::vector<float>{1.0f, 2.0f, 3.0f});
    CHECK_THROWS_WITH_AS(provider.features("never written", 3), doctest::Contains("visual_"),
                         PriorError);
    fs::remove(path);
}

TEST_CASE("atomic library json round trip") {
    namespace fs = std::filesystem;
    auto vocab = test_vocab();
    AtomicMotionLibrary lib;
    AtomicEntry e;
    e.label = "picks up the box";
    e.pose.assign(kHumanWidth, 0.25f);
    lib.entries.push_back(e);
    const std::string path = (fs::temp_directory_path() / "hoigen_atomic_test.json").string();
    save_atomic_library(lib, path);
    auto back = load_atomic_library(path, vocab, 24);
    CHECK(back.size() == 1);
    CHECK(back.entries[0].label == e.label);
    CHECK(back.entries[0].pose == e.pose);
    CHECK(back.entries[0].tokens == encode_text_ids(vocab, e.label, 24));
    fs::remove(path);
}

TEST_CASE("derive_sub_actions splits prompts to the requested count") {
    auto subs = derive_sub_actions("pick up the box, carry it to the table then put it down", 3);
    REQUIRE(subs.size() == 3);
    CHECK(subs[0] == "pick up the box");
    CHECK(subs[1] == "carry it to the table");
    CHECK(subs[2] == "put it down");
    CHECK(derive_sub_actions("push the cart", 2).size() == 2);
}
