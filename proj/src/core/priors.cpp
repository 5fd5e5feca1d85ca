#include "core/priors.hpp"

#include <cmath>
#include <fstream>

#include "core/rng.hpp"

namespace hoigen {

AtomicMotionLibrary load_atomic_library(const std::string& path, const Vocabulary& vocab,
                                        int max_len) {
    std::ifstream in(path);
    if (!in) throw PriorError("atomic library: cannot open " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    AtomicMotionLibrary lib;
    for (const auto& e : j) {
        AtomicEntry entry;
        entry.label = e.at("label").get<std::string>();
        entry.pose = e.at("pose").get<std::vector<float>>();
        if (entry.pose.size() != kHumanWidth)
            throw PriorError("atomic library: pose width " + std::to_string(entry.pose.size()) +
                             " != 471 for label '" + entry.label + "'");
        entry.tokens = encode_text_ids(vocab, entry.label, max_len);
        for (const auto& other : lib.entries)
            if (other.label == entry.label)
                throw PriorError("atomic library: duplicate label '" + entry.label + "'");
        lib.entries.push_back(std::move(entry));
    }
    if (lib.entries.empty()) throw PriorError("atomic library: empty library at " + path);
    return lib;
}

void save_atomic_library(const AtomicMotionLibrary& lib, const std::string& path) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& e : lib.entries) j.push_back({{"label", e.label}, {"pose", e.pose}});
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw PriorError("atomic library: cannot open " + path + " for writing");
    out << j.dump() << "\n";
}

int retrieve_atomic(const std::vector<double>& query,
                    const std::vector<std::vector<double>>& keys) {
    if (keys.empty()) throw PriorError("retrieve_atomic: empty library");
    double qn = 0.0;
    for (double v : query) qn += v * v;
    qn = std::sqrt(qn);
    int best = 0;
    double best_sim = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < keys.size(); ++i) {
        const auto& k = keys[i];
        if (k.size() != query.size())
            throw PriorError("retrieve_atomic: feature dim mismatch");
        double dot = 0.0, kn = 0.0;
        for (size_t j = 0; j < k.size(); ++j) {
            dot += query[j] * k[j];
            kn += k[j] * k[j];
        }
        const double sim = dot / std::max(1e-12, qn * std::sqrt(kn));
        if (sim > best_sim) {
            best_sim = sim;
            best = static_cast<int>(i);
        }
    }
    return best;
}

std::vector<float> ProceduralVisualProvider::features(const std::string& sub_action, int dim) {
    Rng rng(Rng::hash64(sub_action, seed_ ^ 0x5f4dcc3b5aa765d6ull));
    std::vector<float> out(static_cast<size_t>(dim));
    for (auto& v : out) v = static_cast<float>(rng.gaussian());
    return out;
}

std::string FileVisualProvider::feature_path(const std::string& dir, const std::string& sub_action) {
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(Rng::hash64(sub_action)));
    return dir + "/visual_" + hex + ".json";
}

std::vector<float> FileVisualProvider::features(const std::string& sub_action, int dim) {
    const std::string path = feature_path(dir_, sub_action);
    auto rows = read_feature_file(path, "visual");
    if (rows.size() != 1 || static_cast<int>(rows[0].size()) != dim)
        throw PriorError("visual feature file " + path + " has wrong shape");
    return rows[0];
}

void write_feature_file(const std::string& path, const std::string& kind,
                        const std::vector<std::vector<float>>& rows) {
    nlohmann::json j;
    j["kind"] = kind;
    j["rows"] = rows.size();
    j["dim"] = rows.empty() ? 0 : rows[0].size();
    auto& vals = j["values"] = nlohmann::json::array();
    for (const auto& r : rows)
        for (float v : r) vals.push_back(v);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw PriorError("feature file: cannot open " + path + " for writing");
    out << j.dump() << "\n";
}

std::vector<std::vector<float>> read_feature_file(const std::string& path,
                                                  const std::string& expected_kind) {
    std::ifstream in(path);
    if (!in) throw PriorError("feature file missing: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    if (j.at("kind").get<std::string>() != expected_kind)
        throw PriorError("feature file " + path + " has kind '" +
                         j.at("kind").get<std::string>() + "', expected '" + expected_kind + "'");
    const size_t rows = j.at("rows").get<size_t>();
    const size_t dim = j.at("dim").get<size_t>();
    const auto vals = j.at("values").get<std::vector<float>>();
    if (vals.size() != rows * dim) throw PriorError("feature file " + path + " value count mismatch");
    std::vector<std::vector<float>> out(rows, std::vector<float>(dim));
    for (size_t i = 0; i < rows; ++i)
        for (size_t d = 0; d < dim; ++d) out[i][d] = vals[i * dim + d];
    return out;
}

std::vector<std::string> derive_sub_actions(const std::string& prompt, int n_actions) {
    // split on connective markers, then pad/merge to exactly n_actions
    std::vector<std::string> parts;
    std::string cur;
    const auto flush = [&]() {
        // trim
        size_t b = cur.find_first_not_of(" \t");
        size_t e = cur.find_last_not_of(" \t");
        if (b != std::string::npos) parts.push_back(cur.substr(b, e - b + 1));
        cur.clear();
    };
    for (size_t i = 0; i < prompt.size(); ++i) {
        if (prompt[i] == ',' || prompt[i] == ';') {
            flush();
            continue;
        }
        cur.push_back(prompt[i]);
        for (const char* conn : {" then ", " and then "}) {
            const size_t len = std::string(conn).size();
            if (cur.size() >= len && cur.compare(cur.size() - len, len, conn) == 0) {
                cur.resize(cur.size() - len);
                flush();
                break;
            }
        }
    }
    flush();
    if (parts.empty()) parts.push_back(prompt);
    while (static_cast<int>(parts.size()) > n_actions) {
        parts[parts.size() - 2] += " " + parts.back();
        parts.pop_back();
    }
    while (static_cast<int>(parts.size()) < n_actions) parts.push_back(parts.back());
    return parts;
}

}  // namespace hoigen
