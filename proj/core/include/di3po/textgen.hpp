#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace di3po {

enum class EditKind { Substitute, Duplicate, Delete };

struct EditOp {
    int position = 0;  // index into the original word
    EditKind kind = EditKind::Substitute;
    char ch = '\0';  // replacement char for Substitute, unused otherwise

    bool operator==(const EditOp&) const = default;
};

struct WordPair {
    std::string correct;
    std::string misspelled;
    std::vector<EditOp> edits;

    bool operator==(const WordPair&) const = default;
};

/// Misspell by editing max(1, round(rate * len)) distinct positions, with
/// edit kinds drawn uniformly from {substitute, duplicate, delete}.
/// Deterministic given the seed; the edit log replays to the misspelling.
WordPair make_misspelling(const std::string& word, double rate, uint64_t rng_seed);

/// Replays an edit-op log against the original word.
std::string apply_edits(const std::string& word, const std::vector<EditOp>& edits);

enum class Orientation { LeftCorrect, RightCorrect };

/// Instantiates the background-designer meta-prompt for a word pair.
std::string compose_background_request(const WordPair& pair);

/// Instantiates the two-panel T2I prompt. Slot values are inserted in a
/// single pass over the template, so braces inside the background text
/// cannot corrupt other slots.
std::string compose_diptych_prompt(const std::string& background, const WordPair& pair, Orientation orientation);

/// The fixed verifier prompt (constant).
std::string compose_verification_prompt();

}  // namespace di3po
