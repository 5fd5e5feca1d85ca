#pragma once

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "core/motion.hpp"
#include "core/nn.hpp"
#include "core/tokenizer.hpp"

namespace hoigen {

class PriorError : public std::runtime_error {
public:
    explicit PriorError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Token encoder replacing the external frozen text model: embedding table,
/// sinusoidal positions, two self-attention blocks, final layer norm. The
/// empty prompt maps to a learned null embedding (the classifier-free
/// guidance unconditional branch).
template <class T>
class TextEncoderT {
public:
    struct Output {
        TensorT<T> tokens;  // [L, dim] (L >= 1; null prompt gives 1 row)
        TensorT<T> pooled;  // [1, dim]
    };

    TextEncoderT(ParamStoreT<T>& ps, const std::string& prefix, int vocab_size, int dim,
                 int n_layers, int n_heads, int max_len)
        : vocab_size_(vocab_size),
          max_len_(max_len),
          table_(ps.table(prefix + ".embed", vocab_size, dim)),
          null_embed_(ps.table(prefix + ".null", 1, dim)),
          positions_(sinusoidal_table<T>(max_len, dim).detach()),
          ln_out_(LayerNormT<T>::create(ps, prefix + ".ln_out", dim)) {
        for (int l = 0; l < n_layers; ++l)
            blocks_.push_back(EncoderBlockT<T>::create(ps, prefix + ".block" + std::to_string(l),
                                                       dim, n_heads, dim * 2));
    }

    Output encode(const std::vector<int>& token_ids) const {
        if (token_ids.empty()) return {null_embed_, null_embed_};
        if (static_cast<int>(token_ids.size()) > max_len_)
            throw PriorError("encode_text: prompt longer than max length " +
                             std::to_string(max_len_));
        for (int id : token_ids)
            if (id < 0 || id >= vocab_size_)
                throw PriorError("encode_text: unknown token id " + std::to_string(id));
        TensorT<T> x = gather_rows(table_, token_ids);
        x = add(x, slice_rows(positions_, 0, static_cast<int>(token_ids.size())));
        for (const auto& block : blocks_) x = block(x);
        x = ln_out_(x);
        return {x, mean_axis(x, 0)};
    }

private:
    int vocab_size_;
    int max_len_;
    TensorT<T> table_;
    TensorT<T> null_embed_;
    TensorT<T> positions_;
    std::vector<EncoderBlockT<T>> blocks_;
    LayerNormT<T> ln_out_;
};

/// Shared per-point MLP followed by max pooling over points; exactly
/// permutation invariant.
template <class T>
class PointNetT {
public:
    PointNetT(ParamStoreT<T>& ps, const std::string& prefix, int hidden, int out_dim)
        : fc1_(LinearT<T>::create(ps, prefix + ".fc1", 3, hidden)),
          fc2_(LinearT<T>::create(ps, prefix + ".fc2", hidden, out_dim)) {}

    TensorT<T> encode(const ObjectGeometry& geom) const {
        const int k = geom.cloud_size();
        if (k < 1) throw PriorError("encode_points: empty point cloud");
        TensorT<T> pts = TensorT<T>::zeros({k, 3});
        for (size_t i = 0; i < geom.points.size(); ++i)
            pts.values()[i] = static_cast<T>(geom.points[i]);
        return max_pool_rows(fc2_(gelu(fc1_(pts))));
    }

private:
    LinearT<T> fc1_, fc2_;
};

/// Single representative pose per canonical action, retrieved by text
/// similarity.
struct AtomicEntry {
    std::string label;
    std::vector<int> tokens;
    std::vector<float> pose;  // 471
};

struct AtomicMotionLibrary {
    std::vector<AtomicEntry> entries;

    int size() const { return static_cast<int>(entries.size()); }
};

AtomicMotionLibrary load_atomic_library(const std::string& path, const Vocabulary& vocab,
                                        int max_len);
void save_atomic_library(const AtomicMotionLibrary& lib, const std::string& path);

/// Argmax of cosine similarity, ties resolved to the lowest index. Inputs are
/// plain feature rows (retrieval itself is not differentiated).
int retrieve_atomic(const std::vector<double>& query, const std::vector<std::vector<double>>& keys);

/// Source of the visual (2D) prior features. The file-backed implementation
/// loads precomputed rows; the procedural one derives deterministic
/// pseudo-features from the hashed sub-action text.
class VisualPriorProvider {
public:
    virtual ~VisualPriorProvider() = default;
    virtual std::vector<float> features(const std::string& sub_action, int dim) = 0;
};

class ProceduralVisualProvider : public VisualPriorProvider {
public:
    explicit ProceduralVisualProvider(uint64_t seed = 0) : seed_(seed) {}
    std::vector<float> features(const std::string& sub_action, int dim) override;

private:
    uint64_t seed_;
};

class FileVisualProvider : public VisualPriorProvider {
public:
    explicit FileVisualProvider(std::string dir) : dir_(std::move(dir)) {}
    std::vector<float> features(const std::string& sub_action, int dim) override;

    /// Deterministic per-text file path used by both reader and writer.
    static std::string feature_path(const std::string& dir, const std::string& sub_action);

private:
    std::string dir_;
};

/// {kind, rows, dim, values} feature file helpers.
void write_feature_file(const std::string& path, const std::string& kind,
                        const std::vector<std::vector<float>>& rows);
std::vector<std::vector<float>> read_feature_file(const std::string& path,
                                                  const std::string& expected_kind);

/// Splits a prompt into up to n_actions sub-action texts (desk-scale stand-in
/// for external language-model parsing; training data carries generator
/// sub-actions instead).
std::vector<std::string> derive_sub_actions(const std::string& prompt, int n_actions);

/// Encoded multimodal condition features.
template <class T>
struct PriorBundleT {
    TensorT<T> text_feats;    // [N_a, D_t]
    TensorT<T> visual_feats;  // [N_a, D_v]
    TensorT<T> atomic_feats;  // [N_a, D_a]
    TensorT<T> point_feats;   // [N_b, D_p]
    std::vector<int> atomic_indices;
};

struct PriorDims {
    int d_text = 512;
    int d_visual = 512;
    int d_atomic = 512;
    int d_point = 256;
};

/// Assembles the prior bundle from sub-action texts, the atomic library, and
/// object geometries. Disabled modalities produce zero features of the right
/// shape.
template <class T>
class PriorBuilderT {
public:
    PriorBuilderT(ParamStoreT<T>& ps, const std::string& prefix, const TextEncoderT<T>* text_enc,
                  PriorDims dims, int pointnet_hidden)
        : dims_(dims),
          text_enc_(text_enc),
          pose_fc1_(LinearT<T>::create(ps, prefix + ".pose.fc1", kHumanWidth, dims.d_atomic)),
          pose_fc2_(LinearT<T>::create(ps, prefix + ".pose.fc2", dims.d_atomic, dims.d_atomic)),
          pointnet_(ps, prefix + ".pointnet", pointnet_hidden, dims.d_point) {}

    /// Pose encoder: 2-layer MLP 471 -> D_a.
    TensorT<T> encode_pose(const std::vector<float>& pose471) const {
        if (pose471.size() != kHumanWidth)
            throw PriorError("encode_pose: expected width 471, got " +
                             std::to_string(pose471.size()));
        TensorT<T> x = TensorT<T>::zeros({1, kHumanWidth});
        for (size_t i = 0; i < pose471.size(); ++i) x.values()[i] = static_cast<T>(pose471[i]);
        return pose_fc2_(gelu(pose_fc1_(x)));
    }

    /// Encoded label features for retrieval, one row per library entry.
    std::vector<std::vector<double>> label_features(const AtomicMotionLibrary& lib) const {
        std::vector<std::vector<double>> keys;
        keys.reserve(static_cast<size_t>(lib.size()));
        for (const auto& e : lib.entries) {
            auto enc = text_enc_->encode(e.tokens);
            std::vector<double> row(enc.pooled.values().begin(), enc.pooled.values().end());
            keys.push_back(std::move(row));
        }
        return keys;
    }

    PriorBundleT<T> build(const std::vector<std::vector<int>>& sub_action_tokens,
                          const std::vector<std::string>& sub_action_texts,
                          VisualPriorProvider* visual, const AtomicMotionLibrary& lib,
                          const std::vector<const ObjectGeometry*>& geoms,
                          bool enable_text = true, bool enable_visual = true,
                          bool enable_spatial = true) const {
        const int n_a = static_cast<int>(sub_action_tokens.size());
        if (n_a < 1) throw PriorError("build_bundle: need at least one sub-action");
        if (geoms.empty()) throw PriorError("build_bundle: need at least one object geometry");
        if (sub_action_texts.size() != sub_action_tokens.size())
            throw PriorError("build_bundle: sub-action texts/tokens length mismatch");

        PriorBundleT<T> bundle;

        if (enable_text) {
            std::vector<TensorT<T>> rows;
            for (const auto& toks : sub_action_tokens) rows.push_back(text_enc_->encode(toks).pooled);
            bundle.text_feats = concat(rows, 0);
        } else {
            bundle.text_feats = TensorT<T>::zeros({n_a, dims_.d_text});
        }

        if (enable_visual && visual != nullptr) {
            TensorT<T> vf = TensorT<T>::zeros({n_a, dims_.d_visual});
            for (int i = 0; i < n_a; ++i) {
                auto row = visual->features(sub_action_texts[static_cast<size_t>(i)], dims_.d_visual);
                if (static_cast<int>(row.size()) != dims_.d_visual)
                    throw PriorError("build_bundle: visual provider returned dim " +
                                     std::to_string(row.size()) + ", expected " +
                                     std::to_string(dims_.d_visual));
                for (int j = 0; j < dims_.d_visual; ++j)
                    vf.values()[static_cast<size_t>(i) * dims_.d_visual + j] =
                        static_cast<T>(row[static_cast<size_t>(j)]);
            }
            bundle.visual_feats = vf;
        } else {
            bundle.visual_feats = TensorT<T>::zeros({n_a, dims_.d_visual});
        }

        if (enable_spatial && lib.size() > 0) {
            auto keys = label_features(lib);
            std::vector<TensorT<T>> rows;
            for (const auto& toks : sub_action_tokens) {
                auto q = text_enc_->encode(toks);
                std::vector<double> qrow(q.pooled.values().begin(), q.pooled.values().end());
                const int idx = retrieve_atomic(qrow, keys);
                bundle.atomic_indices.push_back(idx);
                rows.push_back(encode_pose(lib.entries[static_cast<size_t>(idx)].pose));
            }
            bundle.atomic_feats = concat(rows, 0);
        } else {
            bundle.atomic_feats = TensorT<T>::zeros({n_a, dims_.d_atomic});
        }

        if (enable_spatial) {
            std::vector<TensorT<T>> rows;
            for (const auto* g : geoms) rows.push_back(pointnet_.encode(*g));
            bundle.point_feats = concat(rows, 0);
        } else {
            bundle.point_feats = TensorT<T>::zeros({static_cast<int>(geoms.size()), dims_.d_point});
        }
        return bundle;
    }

    const PointNetT<T>& pointnet() const { return pointnet_; }
    const PriorDims& dims() const { return dims_; }

private:
    PriorDims dims_;
    const TextEncoderT<T>* text_enc_;
    LinearT<T> pose_fc1_, pose_fc2_;
    PointNetT<T> pointnet_;
};

}  // namespace hoigen
