#include "prefrec/templates.hpp"

#include <cctype>
#include <filesystem>

#include "prefrec/errors.hpp"
#include "prefrec/util.hpp"

namespace prefrec {

namespace {

bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Finds the `{identifier}` slot starting at or after `from`. Returns
// (slot_begin, name) or npos.
std::pair<std::size_t, std::string> next_slot(const std::string& s, std::size_t from) {
    for (std::size_t i = from; i < s.size(); ++i) {
        if (s[i] != '{') continue;
        std::size_t j = i + 1;
        while (j < s.size() && ident_char(s[j])) ++j;
        if (j > i + 1 && j < s.size() && s[j] == '}') return {i, s.substr(i + 1, j - i - 1)};
    }
    return {std::string::npos, {}};
}

}  // namespace

PromptTemplate PromptTemplate::parse(std::string name, std::string body) {
    PromptTemplate tpl;
    tpl.name = std::move(name);
    tpl.body = std::move(body);
    std::size_t pos = 0;
    for (;;) {
        auto [at, var] = next_slot(tpl.body, pos);
        if (at == std::string::npos) break;
        tpl.required_vars.insert(var);
        pos = at + var.size() + 2;
    }
    return tpl;
}

std::string render_prompt(const PromptTemplate& tpl, const std::map<std::string, std::string>& vars) {
    std::string out;
    out.reserve(tpl.body.size());
    std::size_t pos = 0;
    for (;;) {
        auto [at, var] = next_slot(tpl.body, pos);
        if (at == std::string::npos) {
            out.append(tpl.body, pos, std::string::npos);
            break;
        }
        out.append(tpl.body, pos, at - pos);
        auto it = vars.find(var);
        if (it == vars.end())
            throw TemplateError("template \"" + tpl.name + "\": missing variable {" + var + "}", var);
        out += it->second;
        pos = at + var.size() + 2;
    }
    return out;
}

bool has_unsubstituted_slot(const std::string& text) {
    return next_slot(text, 0).first != std::string::npos;
}

namespace {

const char* kTabidachiPartial = R"([TASK]
Summarize the customer's hobbies, preferences, habits, and profile regarding travel destinations based on the dialogue history between the operator and the customer.
- Extract the conditions the customer seeks in a destination.
- The output must be a single sentence without line breaks.
- Do not include information not mentioned in the dialogue.

[Dialogue History]
{short_dialogue}

[Summary]
)";

const char* kTabidachiFinal = R"(Based on the following content, summarize the customer's hobbies and experiences regarding travel destinations in a single sentence.
Please generate a summary sentence that includes as much information as possible.

[Source Text for Summarization]
{all_short_dialogue_summary}

[Summary Sentence]
)";

const char* kChatRecPartial = R"(You are an analytical assistant. Extract and concisely summarize the customer's preferences, experiences, and hobbies from the dialogue history.
- Include favorite activities, places, foods, and interests.
- Do not include personality traits or communication style.

[Dialogue History]
{short_dialogue}

[Summary]
)";

const char* kRecInfo = R"(Generate recommendation information for the item below. Explain in a single sentence what kind of visitor the item suits, based only on the item description.

[Item Description]
{item_description}

[Recommendation Information]
)";

}  // namespace

TemplateSet builtin_templates(const std::string& profile) {
    TemplateSet set;
    set.rec_info = PromptTemplate::parse(profile + "_recinfo", kRecInfo);
    set.final_summary = PromptTemplate::parse(profile + "_final", kTabidachiFinal);
    if (profile == "tabidachi" || profile == "synthetic") {
        set.partial_summary = PromptTemplate::parse(profile + "_partial", kTabidachiPartial);
    } else if (profile == "chatrec") {
        set.partial_summary = PromptTemplate::parse(profile + "_partial", kChatRecPartial);
    } else {
        throw ConfigError("unknown corpus profile: " + profile);
    }
    return set;
}

TemplateSet load_templates(const std::string& dir, const std::string& profile) {
    TemplateSet set = builtin_templates(profile);
    namespace fs = std::filesystem;
    auto maybe_load = [&](const std::string& stage, PromptTemplate& slot) {
        fs::path p = fs::path(dir) / (profile + "_" + stage + ".txt");
        if (fs::exists(p)) slot = PromptTemplate::parse(profile + "_" + stage, read_file(p.string()));
    };
    maybe_load("partial", set.partial_summary);
    maybe_load("final", set.final_summary);
    maybe_load("recinfo", set.rec_info);
    return set;
}

std::string render_dialogue(const std::vector<Utterance>& history) {
    std::vector<std::string> lines;
    lines.reserve(history.size());
    for (const auto& u : history)
        lines.push_back((u.speaker == Speaker::Operator ? "Operator: " : "Customer: ") + u.text);
    return join(lines, "\n");
}

}  // namespace prefrec
