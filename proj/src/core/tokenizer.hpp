#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace hoigen {

/// Word-level vocabulary. Id 0 is reserved for unknown words; known words
/// start at 1.
struct Vocabulary {
    static constexpr int kUnknownId = 0;

    std::map<std::string, int> word_to_id;
    std::vector<std::string> id_to_word{"<unk>"};

    int size() const { return static_cast<int>(id_to_word.size()); }

    int add(const std::string& word) {
        auto it = word_to_id.find(word);
        if (it != word_to_id.end()) return it->second;
        const int id = size();
        word_to_id.emplace(word, id);
        id_to_word.push_back(word);
        return id;
    }

    int lookup(const std::string& word) const {
        auto it = word_to_id.find(word);
        return it == word_to_id.end() ? kUnknownId : it->second;
    }

    nlohmann::json to_json() const;
    static Vocabulary from_json(const nlohmann::json& j);
};

/// Lowercased alphanumeric word split.
std::vector<std::string> split_words(const std::string& text);

/// Token ids for a prompt, truncated to max_len. Empty text gives an empty
/// id list (callers map that to the learned null-prompt embedding).
std::vector<int> encode_text_ids(const Vocabulary& vocab, const std::string& text, int max_len);

}  // namespace hoigen
