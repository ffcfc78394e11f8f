#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace symscope {

inline constexpr int kNumSymptoms = 9;

// Canonical PHQ-9 item order. All score matrices index symptoms 0..8 in
// this order; it is also the order items appear in the assessment prompt.
enum class Symptom : int {
    Anhedonia = 0,
    DepressedMood = 1,
    Sleep = 2,
    Fatigue = 3,
    Appetite = 4,
    WorthlessnessGuilt = 5,
    Concentration = 6,
    Psychomotor = 7,
    SuicidalIdeation = 8,
};

// Canonical abbreviation as it appears in the assessment instruction.
const std::array<std::string, kNumSymptoms>& symptom_names();

// Short machine-friendly names used in CSV headers and JSON keys.
const std::array<std::string, kNumSymptoms>& symptom_keys();

// Outcome of resolving a reply's symptom label against the registry.
enum class NameMatch {
    Canonical,  // exact canonical abbreviation (case/whitespace-insensitive)
    Alias,      // reworded abbreviation, e.g. "Feelings of Worthlessness or Guilt"
    Aspect,     // specific facet of an item, e.g. "Insomnia", "Poor Appetite"
};

struct SymptomLookup {
    int index;
    NameMatch match;
};

// Case-insensitive lookup; collapses whitespace and tolerates a leading
// "Feelings of". Returns nullopt for names outside the PHQ-9 (repair case:
// entry dropped and logged).
std::optional<SymptomLookup> resolve_symptom_name(std::string_view raw);

// Severity categories named in the assessment instruction's STEP 3.
const std::array<std::string, 5>& category_names();

// Standard PHQ-9 severity banding: 0-4 / 5-9 / 10-14 / 15-19 / 20-27.
std::string category_standard(int total_score);

bool is_valid_category(std::string_view name);

} // namespace symscope
