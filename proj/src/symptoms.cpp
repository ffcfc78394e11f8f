#include "symscope/symptoms.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_map>

namespace symscope {

const std::array<std::string, kNumSymptoms>& symptom_names() {
    static const std::array<std::string, kNumSymptoms> names = {
        "Anhedonia",
        "Depressed Mood",
        "Insomnia or Hypersomnia",
        "Fatigue",
        "Poor Appetite or Overeating",
        "Worthlessness or Guilt",
        "Difficulty Concentrating",
        "Psychomotor Agitation or Retardation",
        "Suicidal Ideation",
    };
    return names;
}

const std::array<std::string, kNumSymptoms>& symptom_keys() {
    static const std::array<std::string, kNumSymptoms> keys = {
        "anhedonia",
        "depressed_mood",
        "sleep",
        "fatigue",
        "appetite",
        "worthlessness_guilt",
        "concentration",
        "psychomotor",
        "suicidal_ideation",
    };
    return keys;
}

namespace {

std::string fold_name(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    for (char ch : raw) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

struct AliasTable {
    std::unordered_map<std::string, int> canonical;
    std::unordered_map<std::string, SymptomLookup> mapped;

    AliasTable() {
        for (int i = 0; i < kNumSymptoms; ++i) {
            canonical.emplace(fold_name(symptom_names()[i]), i);
        }
        auto alias = [this](std::string_view name, Symptom s) {
            mapped.emplace(fold_name(name), SymptomLookup{static_cast<int>(s), NameMatch::Alias});
        };
        auto aspect = [this](std::string_view name, Symptom s) {
            mapped.emplace(fold_name(name), SymptomLookup{static_cast<int>(s), NameMatch::Aspect});
        };

        // Reworded abbreviations observed in replies (repair case: alias_map).
        alias("Loss of Interest or Pleasure", Symptom::Anhedonia);
        alias("Depression", Symptom::DepressedMood);
        alias("Depressed", Symptom::DepressedMood);
        alias("Low Mood", Symptom::DepressedMood);
        alias("Sleep Disturbance", Symptom::Sleep);
        alias("Sleep Problems", Symptom::Sleep);
        alias("Fatigue or Loss of Energy", Symptom::Fatigue);
        alias("Low Energy", Symptom::Fatigue);
        alias("Appetite Changes", Symptom::Appetite);
        alias("Changes in Appetite", Symptom::Appetite);
        alias("Psychomotor Agitation/Retardation", Symptom::Psychomotor);
        alias("Psychomotor Changes", Symptom::Psychomotor);
        alias("Suicidal Thoughts", Symptom::SuicidalIdeation);
        alias("Thoughts of Self-Harm", Symptom::SuicidalIdeation);

        // Specific aspects of an item (repair case: aspect_map).
        aspect("Insomnia", Symptom::Sleep);
        aspect("Hypersomnia", Symptom::Sleep);
        aspect("Trouble Sleeping", Symptom::Sleep);
        aspect("Poor Appetite", Symptom::Appetite);
        aspect("Overeating", Symptom::Appetite);
        aspect("Worthlessness", Symptom::WorthlessnessGuilt);
        aspect("Guilt", Symptom::WorthlessnessGuilt);
        aspect("Psychomotor Agitation", Symptom::Psychomotor);
        aspect("Psychomotor Retardation", Symptom::Psychomotor);
    }
};

const AliasTable& alias_table() {
    static const AliasTable table;
    return table;
}

} // namespace

std::optional<SymptomLookup> resolve_symptom_name(std::string_view raw) {
    std::string folded = fold_name(raw);
    bool stripped_feelings = false;
    constexpr std::string_view prefix = "feelings of ";
    if (folded.size() > prefix.size() && folded.compare(0, prefix.size(), prefix) == 0) {
        folded.erase(0, prefix.size());
        stripped_feelings = true;
    }
    const auto& table = alias_table();
    if (auto it = table.canonical.find(folded); it != table.canonical.end()) {
        // "Feelings of <canonical>" is one of the reworded-abbreviation cases.
        NameMatch match = stripped_feelings ? NameMatch::Alias : NameMatch::Canonical;
        return SymptomLookup{it->second, match};
    }
    if (auto it = table.mapped.find(folded); it != table.mapped.end()) {
        return it->second;
    }
    return std::nullopt;
}

const std::array<std::string, 5>& category_names() {
    static const std::array<std::string, 5> names = {
        "None", "Mild", "Moderate", "Moderately Severe", "Severe",
    };
    return names;
}

std::string category_standard(int total_score) {
    if (total_score <= 4) return "None";
    if (total_score <= 9) return "Mild";
    if (total_score <= 14) return "Moderate";
    if (total_score <= 19) return "Moderately Severe";
    return "Severe";
}

bool is_valid_category(std::string_view name) {
    const auto& names = category_names();
    return std::find(names.begin(), names.end(), name) != names.end();
}

} // namespace symscope
