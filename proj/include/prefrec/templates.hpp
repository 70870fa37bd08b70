#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "prefrec/corpus.hpp"

namespace prefrec {

// A prompt template with `{placeholder}` slots. required_vars always equals
// the set of placeholders found in the body.
struct PromptTemplate {
    std::string name;
    std::string body;
    std::set<std::string> required_vars;

    // Derives required_vars by scanning the body.
    static PromptTemplate parse(std::string name, std::string body);
};

// Substitutes every `{placeholder}` slot. Missing variable -> TemplateError
// naming the slot. Substitution is single-pass: slots inside substituted
// values are not re-expanded.
std::string render_prompt(const PromptTemplate& tpl, const std::map<std::string, std::string>& vars);

// True if the text still contains a `{identifier}` slot.
bool has_unsubstituted_slot(const std::string& text);

// Section headers shared between the default templates and the mock backend's
// prompt classifier.
inline constexpr const char* kDialogueHistoryMarker = "[Dialogue History]";
inline constexpr const char* kFinalSummarySourceMarker = "[Source Text for Summarization]";
inline constexpr const char* kItemDescriptionMarker = "[Item Description]";

// The three stage templates for one corpus profile.
struct TemplateSet {
    PromptTemplate partial_summary;  // var: short_dialogue
    PromptTemplate final_summary;    // var: all_short_dialogue_summary
    PromptTemplate rec_info;         // var: item_description
};

// Built-in defaults per corpus profile ("tabidachi", "chatrec", "synthetic").
// Unknown profile -> ConfigError.
TemplateSet builtin_templates(const std::string& profile);

// Loads <profile>_partial.txt / <profile>_final.txt / <profile>_recinfo.txt
// from a directory, falling back to the built-ins for missing files.
TemplateSet load_templates(const std::string& dir, const std::string& profile);

// "Operator: ...\nCustomer: ..." rendering used to fill {short_dialogue}.
std::string render_dialogue(const std::vector<Utterance>& history);

}  // namespace prefrec
