#include "di3po/textgen.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "di3po/rng.hpp"

namespace di3po {

namespace {

constexpr const char* kAlphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

constexpr const char* kBackgroundTemplate =
    R"(You are a graphic designer responsible
for high-quality text based graphics. You need to write a prompt for
a text to image model to generate backgrounds for text to be generated on.
The prompt needs to be as detailed as possible. Describe the background
on which you expect the text to appear. Include specific details of the
background, such as its color, shape, material, texture, or style.
Make sure your description is very clear and creative. Do not include
{right_input} or {misspelling} in the background description.

Then output an answer in the following format:

generated_background: the background for the image to render, make sure
not to include the word {right_input} or the word {misspelling} in the
background description.

Here is an example of a good answer:

generated_background: The font of the text is an elegant font, such as a
delicate script or a bold serif. The text should be the focal point of the
image, with a size and placement that commands attention. For the background,
create a scene of a serene, misty forest at dawn. The color palette
should be soft and ethereal, with pale blues, greens, and pinks blending
seamlessly. Sunlight filters through the mist, creating beams of light that
illuminate the scene. Dewdrops cling to leaves and spiderwebs, catching the
light and adding a touch of sparkle. The overall atmosphere should evoke a
sense of tranquility and wonder. The word should be rendered in a color that
complements the background, perhaps a warm gold or a shimmering silver.
It should appear as if it's part of the scene, perhaps nestled among the
leaves or rising with the mist. The text should have a subtle texture,
perhaps resembling dewdrops or etched metal, to further integrate it with the
background. This image should capture the essence of beauty in both its
visual and textual form, creating a captivating and memorable graphic.)";

constexpr const char* kDiptychTemplate =
    R"(Two images with a left and right panel, placed
side by side. Both images are fundamentally identical in terms of their
backdrop, lighting, and color palettes.
The left and right panel have this background.

{first_orientation} Image: Create an image with this background below.
On this image render the word {right_input}. The word {right_input} is
placed on the same background as the second image.

{second_orientation} Image: Create an identical image to the first image
with the exact same background. The word {misspelling} is placed on the
same background as the first image. It is extremely important to spell
the word as **{misspelling}**.

Background: {generated_background}
)";

constexpr const char* kVerificationPrompt =
    R"(You are a rigorous human rater for text on
image rendering graphics company. You are given two images, and you need
to verify that they are identical. The first image should be showcasing
text in the same background as the second image. You must check to make
sure that the background is identical, and that the text is rendered in
the same background as the second image. You must carefully attend to
even tiny details to make sure every single detail of the background,
such as color, shape, design, and style, is the same. You must also
check to make sure that the text in the first image is only slightly
different from the text in the second image. Both images should have
text in them. But, the text should not be the same in both images.

Then output an answer in the following format:

explanation: thought process and statement to justify your decision
passing: true or false indicating whether both checks are passed or not
confidence: a confidence score in your above decision of passing, out of 100

Some examples of the output given two images are as follows:
explanation: "The text on both the images is the different but there are
minor differences in the background. The background has slightly
different color."
passing: true
confidence: 80

explanation: "The text in the images are the same but the background is
different."
passing: false
confidence: 10

explanation: "The text in the second image is completely missing."
passing: false
confidence: 0

explanation: "The text in both the images is different. The backgrounds
are the same and the text in both images has been rendered clearly."
passing: true
confidence: 100
)";

/// Single-pass slot substitution: scans the template once and replaces
/// {name} occurrences with the bound values. Braces inside inserted values
/// are never re-scanned.
std::string fill_slots(const std::string& tmpl,
                       const std::vector<std::pair<std::string, std::string>>& slots) {
    std::string out;
    out.reserve(tmpl.size());
    size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            size_t close = tmpl.find('}', i + 1);
            if (close != std::string::npos) {
                std::string name = tmpl.substr(i + 1, close - i - 1);
                bool matched = false;
                for (const auto& [key, value] : slots) {
                    if (key == name) {
                        out += value;
                        matched = true;
                        break;
                    }
                }
                if (matched) {
                    i = close + 1;
                    continue;
                }
            }
        }
        out += tmpl[i++];
    }
    return out;
}

WordPair misspell_once(const std::string& word, double rate, uint64_t seed) {
    std::mt19937_64 eng(seed);
    int len = static_cast<int>(word.size());
    int k = std::max(1, static_cast<int>(std::lround(rate * len)));
    k = std::min(k, len);

    // k distinct positions via partial Fisher-Yates.
    std::vector<int> positions(len);
    for (int i = 0; i < len; ++i) positions[i] = i;
    for (int i = 0; i < k; ++i) {
        std::uniform_int_distribution<int> pick(i, len - 1);
        std::swap(positions[i], positions[pick(eng)]);
    }
    positions.resize(k);
    std::sort(positions.begin(), positions.end());

    std::vector<EditOp> edits;
    std::uniform_int_distribution<int> kind_dist(0, 2);
    std::uniform_int_distribution<int> char_dist(0, 35);
    for (int pos : positions) {
        EditOp op;
        op.position = pos;
        // A 1-char word must not be deleted into the empty string.
        int kind = len == 1 ? kind_dist(eng) % 2 : kind_dist(eng);
        op.kind = static_cast<EditKind>(kind);
        if (op.kind == EditKind::Substitute) {
            char c;
            do {
                c = kAlphabet[char_dist(eng)];
            } while (c == word[static_cast<size_t>(pos)]);
            op.ch = c;
        }
        edits.push_back(op);
    }

    WordPair pair;
    pair.correct = word;
    pair.edits = std::move(edits);
    pair.misspelled = apply_edits(word, pair.edits);
    return pair;
}

}  // namespace

std::string apply_edits(const std::string& word, const std::vector<EditOp>& edits) {
    std::string out;
    out.reserve(word.size() + edits.size());
    size_t e = 0;
    for (size_t i = 0; i < word.size(); ++i) {
        if (e < edits.size() && edits[e].position == static_cast<int>(i)) {
            switch (edits[e].kind) {
                case EditKind::Substitute:
                    out += edits[e].ch;
                    break;
                case EditKind::Duplicate:
                    out += word[i];
                    out += word[i];
                    break;
                case EditKind::Delete:
                    break;
            }
            ++e;
        } else {
            out += word[i];
        }
    }
    return out;
}

WordPair make_misspelling(const std::string& word, double rate, uint64_t rng_seed) {
    if (word.empty()) throw std::invalid_argument("cannot misspell an empty word");
    if (!(rate > 0.0 && rate <= 1.0)) throw std::invalid_argument("rate must be in (0, 1]");
    // Duplicate-then-delete combinations can reproduce the original string;
    // re-roll on a derived seed until the pair genuinely differs.
    for (uint64_t attempt = 0;; ++attempt) {
        WordPair pair = misspell_once(word, rate, derive_seed(rng_seed, attempt));
        if (pair.misspelled != pair.correct) return pair;
    }
}

std::string compose_background_request(const WordPair& pair) {
    return fill_slots(kBackgroundTemplate, {{"right_input", pair.correct}, {"misspelling", pair.misspelled}});
}

std::string compose_diptych_prompt(const std::string& background, const WordPair& pair, Orientation orientation) {
    if (background.empty()) throw std::invalid_argument("background description must be nonempty");
    const char* first = orientation == Orientation::LeftCorrect ? "Left" : "Right";
    const char* second = orientation == Orientation::LeftCorrect ? "Right" : "Left";
    return fill_slots(kDiptychTemplate, {{"first_orientation", first},
                                         {"second_orientation", second},
                                         {"right_input", pair.correct},
                                         {"misspelling", pair.misspelled},
                                         {"generated_background", background}});
}

std::string compose_verification_prompt() { return kVerificationPrompt; }

}  // namespace di3po
