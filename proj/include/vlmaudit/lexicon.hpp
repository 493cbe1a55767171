#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vlmaudit {

enum class KeywordSet { Traits, Adjectives, Occupations };
enum class Subclass { Positive, Negative, Masculine, Feminine, MaleDominated, FemaleDominated };

inline constexpr std::array<KeywordSet, 3> kAllSets = {KeywordSet::Traits, KeywordSet::Adjectives,
                                                       KeywordSet::Occupations};

std::string_view to_string(KeywordSet s);
std::string_view to_string(Subclass s);
std::optional<KeywordSet> parse_keyword_set(std::string_view s);
std::optional<Subclass> parse_subclass(std::string_view s);

// The two subclasses that partition a set, in table order
// (positive/negative, masculine/feminine, male/female-dominated).
std::array<Subclass, 2> subclasses_of(KeywordSet s);
KeywordSet set_of(Subclass s);

struct Keyword {
    std::string text;
    KeywordSet set;
    Subclass subclass;

    bool operator==(const Keyword&) const = default;
};

class Lexicon {
public:
    Lexicon() = default;
    // Throws ConfigError if a keyword is empty, not lowercase, repeated, or
    // has a subclass that does not belong to its set.
    explicit Lexicon(std::vector<Keyword> keywords);

    const std::vector<Keyword>& keywords() const { return keywords_; }
    std::vector<Keyword> select(KeywordSet set, Subclass subclass) const;
    std::vector<Keyword> select(KeywordSet set) const;
    const Keyword* find(std::string_view text) const;

private:
    std::vector<Keyword> keywords_;
};

Lexicon builtin_lexicon();

// `text,set,subclass`
Lexicon load_lexicon(const std::filesystem::path& path);

inline constexpr std::string_view kDefaultTemplate = "An image of ";

struct Prompt {
    Keyword keyword;
    std::string template_text;
    std::string full_text;

    // Prompts are identified by their keyword text.
    const std::string& id() const { return keyword.text; }
};

// Raw concatenation: no article insertion, no case changes.
std::vector<Prompt> build_prompts(const std::vector<Keyword>& keywords,
                                  std::string_view template_text = kDefaultTemplate);

}  // namespace vlmaudit
