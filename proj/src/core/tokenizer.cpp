#include "core/tokenizer.hpp"

#include <cctype>

namespace hoigen {

nlohmann::json Vocabulary::to_json() const {
    return nlohmann::json{{"words", id_to_word}};
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
    Vocabulary v;
    v.id_to_word = j.at("words").get<std::vector<std::string>>();
    v.word_to_id.clear();
    for (int i = 0; i < v.size(); ++i) v.word_to_id[v.id_to_word[static_cast<size_t>(i)]] = i;
    return v;
}

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> words;
    std::string cur;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!cur.empty()) {
            words.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(cur);
    return words;
}

std::vector<int> encode_text_ids(const Vocabulary& vocab, const std::string& text, int max_len) {
    std::vector<int> ids;
    for (const auto& w : split_words(text)) {
        if (static_cast<int>(ids.size()) >= max_len) break;
        ids.push_back(vocab.lookup(w));
    }
    return ids;
}

}  // namespace hoigen
