#include "di3po/clients.hpp"

#include <cmath>
#include <cstdlib>
#include <random>
#include <sstream>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "di3po/font.hpp"
#include "di3po/rng.hpp"
#include "di3po/verify.hpp"

namespace di3po {

void InflightLimiter::acquire() {
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [&] { return in_use_ < capacity_; });
    ++in_use_;
}

void InflightLimiter::release() {
    {
        std::lock_guard<std::mutex> lock(mu_);
        --in_use_;
    }
    cv_.notify_one();
}

namespace {

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

/// Runs fn with up to max_retries additional attempts on retryable errors.
template <typename Fn>
auto with_retries(int max_retries, int& attempts_out, Fn&& fn) {
    int attempts = 0;
    for (;;) {
        ++attempts;
        try {
            auto result = fn();
            attempts_out = attempts;
            return result;
        } catch (const ClientError&) {
            if (attempts > max_retries) {
                attempts_out = attempts;
                throw;
            }
        }
    }
}

struct PromptSlots {
    std::string correct;
    std::string misspelled;
    std::string background;
    bool left_correct = true;
};

std::string find_between(const std::string& text, const std::string& before, const std::string& after) {
    size_t a = text.find(before);
    if (a == std::string::npos) return "";
    a += before.size();
    size_t b = text.find(after, a);
    if (b == std::string::npos) return "";
    return text.substr(a, b - a);
}

PromptSlots parse_diptych_prompt(const std::string& prompt) {
    PromptSlots s;
    s.correct = find_between(prompt, "render the word ", ".");
    s.misspelled = find_between(prompt, "**", "**");
    size_t bg = prompt.find("Background: ");
    if (bg != std::string::npos) s.background = prompt.substr(bg + 12);
    // The first stanza always describes the correct word's panel.
    size_t left_pos = prompt.find("Left Image: Create an image with this background below.");
    s.left_correct = left_pos != std::string::npos;
    return s;
}

// ---------------------------------------------------------------------------
// Mocks
// ---------------------------------------------------------------------------

class MockBase : public FailureInjectable {
public:
    explicit MockBase(const ClientConfig& cfg) : cfg_(cfg), limiter_(cfg.max_inflight) {}
    void inject_failures(int n) override { pending_failures_ = n; }

protected:
    void maybe_fail() {
        if (pending_failures_ > 0) {
            --pending_failures_;
            throw ClientError(ClientErrorKind::Transport, "injected transport failure");
        }
    }

    ClientConfig cfg_;
    InflightLimiter limiter_;
    std::atomic<int> pending_failures_{0};
    int last_attempts_ = 0;
};

class MockTextModel final : public TextModelClient, public MockBase {
public:
    using MockBase::MockBase;

    std::string generate(const std::string& prompt) override {
        if (prompt.empty()) throw std::invalid_argument("empty prompt");
        InflightLimiter::Token token(limiter_);
        return with_retries(cfg_.max_retries, last_attempts_, [&] {
            maybe_fail();
            return render(prompt);
        });
    }

    int last_attempts() const override { return last_attempts_; }

private:
    std::string render(const std::string& prompt) const {
        static const char* kMaterials[] = {"brushed steel", "aged parchment", "polished marble", "woven linen",
                                           "frosted glass", "weathered oak"};
        static const char* kPalettes[] = {"deep teal and amber", "muted rose and slate", "ochre and midnight blue",
                                          "sage green and cream", "charcoal and copper"};
        static const char* kMotifs[] = {"drifting geometric shapes", "soft diagonal light beams",
                                        "a faint honeycomb lattice", "scattered ink-wash clouds",
                                        "concentric ripple rings"};
        std::mt19937_64 eng(derive_seed(cfg_.mock_seed, fnv1a(prompt)));
        auto pick = [&](auto& arr) { return arr[eng() % std::size(arr)]; };
        std::ostringstream out;
        out << "generated_background: A " << pick(kMaterials) << " surface washed in " << pick(kPalettes)
            << ", decorated with " << pick(kMotifs)
            << ". The lighting is even and diffuse, leaving an uncluttered focal area for lettering.";
        return out.str();
    }

};

class MockImageModel final : public ImageModelClient, public MockBase {
public:
    MockImageModel(const ClientConfig& cfg, const MockDiptychLayout& layout) : MockBase(cfg), layout_(layout) {}

    Raster generate_diptych(const std::string& prompt, uint64_t rng_seed) override {
        if (prompt.empty()) throw std::invalid_argument("empty prompt");
        InflightLimiter::Token token(limiter_);
        return with_retries(cfg_.max_retries, last_attempts_, [&] {
            maybe_fail();
            return render(prompt, rng_seed);
        });
    }

    int last_attempts() const override { return last_attempts_; }

private:
    Raster render(const std::string& prompt, uint64_t rng_seed) const {
        PromptSlots slots = parse_diptych_prompt(prompt);
        const int pw = layout_.panel_width(), H = layout_.height, W = layout_.width;
        uint64_t bg_seed = derive_seed(cfg_.mock_seed, rng_seed);

        Raster tile = mock_background_tile(pw, H, bg_seed);
        Raster right_tile =
            cfg_.corruption == "different-background" ? mock_background_tile(pw, H, bg_seed + 1) : tile;

        Raster img(W, H, 3);
        auto blit = [&](const Raster& src, int x0) {
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < src.width; ++x)
                    for (int c = 0; c < 3; ++c) img.at(x0 + x, y, c) = src.at(x, y, c);
        };
        blit(tile, 0);
        blit(right_tile, pw + MockDiptychLayout::seam_width);

        if (cfg_.corruption == "no-seam") {
            // Continue the tile through the gap so no vertical edge exists.
            for (int y = 0; y < H; ++y)
                for (int k = 0; k < MockDiptychLayout::seam_width; ++k)
                    for (int c = 0; c < 3; ++c) img.at(pw + k, y, c) = tile.at(pw - 1, y, c);
        } else {
            for (int y = 0; y < H; ++y)
                for (int k = 0; k < MockDiptychLayout::seam_width; ++k)
                    for (int c = 0; c < 3; ++c) img.at(pw + k, y, c) = 5;
        }

        if (cfg_.corruption != "no-text") {
            std::string left_word = slots.left_correct ? slots.correct : slots.misspelled;
            std::string right_word = slots.left_correct ? slots.misspelled : slots.correct;
            if (cfg_.corruption == "same-text") right_word = left_word;
            auto place = [&](const std::string& word, int panel_x0) {
                if (word.empty() || !font::supported_text(word)) return;
                int bw = font::box_width(static_cast<int>(word.size()));
                if (bw > pw) return;
                int x0 = panel_x0 + (pw - bw) / 2;
                int y0 = H / 2 - font::box_height() / 2;
                font::render_text(img, word, x0, y0);
            };
            place(left_word, 0);
            place(right_word, pw + MockDiptychLayout::seam_width);
        }
        return img;
    }

    MockDiptychLayout layout_;
};

class MockVerifier final : public VerifierClient, public MockBase {
public:
    using MockBase::MockBase;

    std::string verify(const Raster& image_w, const Raster& image_l, const std::string& prompt) override {
        (void)prompt;
        InflightLimiter::Token token(limiter_);
        return with_retries(cfg_.max_retries, last_attempts_, [&] {
            maybe_fail();
            return judge(image_w, image_l);
        });
    }

    int last_attempts() const override { return last_attempts_; }

private:
    std::string judge(const Raster& a, const Raster& b) const {
        VerificationResult r;
        auto box_a = font::find_text_box(a);
        auto box_b = font::find_text_box(b);
        if (!box_a || box_a->text.empty()) {
            r.explanation = "The text in the first image is completely missing.";
            return format_verifier_response(fail(r, 0));
        }
        if (!box_b || box_b->text.empty()) {
            r.explanation = "The text in the second image is completely missing.";
            return format_verifier_response(fail(r, 0));
        }
        if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
            r.explanation = "The two images have different dimensions, so the backgrounds cannot match.";
            return format_verifier_response(fail(r, 10));
        }

        // Pixel-wise background comparison outside both text boxes.
        auto inside = [](const font::TextBox& box, int x, int y) {
            return x >= box.x && x < box.x + box.w && y >= box.y && y < box.y + box.h;
        };
        size_t compared = 0, differing = 0;
        for (int y = 0; y < a.height; ++y)
            for (int x = 0; x < a.width; ++x) {
                if (inside(*box_a, x, y) || inside(*box_b, x, y)) continue;
                ++compared;
                for (int c = 0; c < a.channels; ++c)
                    if (a.at(x, y, c) != b.at(x, y, c)) {
                        ++differing;
                        break;
                    }
            }
        double diff_frac = compared ? static_cast<double>(differing) / compared : 0.0;
        if (diff_frac > 0.01) {
            r.explanation = "The background, while sharing a similar style, has significantly different colors.";
            return format_verifier_response(fail(r, 10));
        }
        if (box_a->text == box_b->text) {
            r.explanation = "The text '" + box_a->text + "' is present in both. The text itself is identical in both images.";
            return format_verifier_response(fail(r, 10));
        }
        r.explanation = "The text in both the images is different. The backgrounds are the same and the text in both images has been rendered clearly.";
        r.passing = true;
        r.confidence = 100;
        return format_verifier_response(r);
    }

    static VerificationResult fail(VerificationResult r, int confidence) {
        r.passing = false;
        r.confidence = confidence;
        return r;
    }

};

class MockOcr final : public OcrClient, public MockBase {
public:
    using MockBase::MockBase;

    std::string read(const Raster& image) override {
        InflightLimiter::Token token(limiter_);
        return with_retries(cfg_.max_retries, last_attempts_, [&] {
            maybe_fail();
            return decode(image);
        });
    }

    int last_attempts() const override { return last_attempts_; }

private:
    std::string decode(const Raster& image) const {
        auto box = font::find_text_box(image);
        std::string text = box ? box->text : "";
        if (text.empty() || cfg_.ocr_noise <= 0.0) return text;

        // Character-noise knob: flip round(noise * len) decoded characters,
        // deterministically per image content.
        int flips = static_cast<int>(std::lround(cfg_.ocr_noise * static_cast<double>(text.size())));
        if (flips <= 0) return text;
        std::string content(image.pixels.begin(), image.pixels.end());
        std::mt19937_64 eng(derive_seed(cfg_.mock_seed, fnv1a(content)));
        static const char* kAlphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
        std::vector<size_t> positions(text.size());
        for (size_t i = 0; i < positions.size(); ++i) positions[i] = i;
        for (int f = 0; f < flips && !positions.empty(); ++f) {
            size_t pi = eng() % positions.size();
            size_t pos = positions[pi];
            positions.erase(positions.begin() + static_cast<long>(pi));
            char replacement;
            do {
                replacement = kAlphabet[eng() % 36];
            } while (replacement == text[pos]);
            text[pos] = replacement;
        }
        return text;
    }

};

// ---------------------------------------------------------------------------
// HTTP-backed clients. Wire format is JSON over HTTP(S); the API key named
// by credential_env is sent as a bearer token. See the config reference in
// the README for per-endpoint request/response bodies.
// ---------------------------------------------------------------------------

const char kB64Table[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const std::vector<uint8_t>& data) {
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    for (size_t i = 0; i < data.size(); i += 3) {
        uint32_t v = data[i] << 16;
        if (i + 1 < data.size()) v |= data[i + 1] << 8;
        if (i + 2 < data.size()) v |= data[i + 2];
        out += kB64Table[(v >> 18) & 63];
        out += kB64Table[(v >> 12) & 63];
        out += i + 1 < data.size() ? kB64Table[(v >> 6) & 63] : '=';
        out += i + 2 < data.size() ? kB64Table[v & 63] : '=';
    }
    return out;
}

std::vector<uint8_t> base64_decode(const std::string& text) {
    auto val = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    std::vector<uint8_t> out;
    int buf = 0, bits = 0;
    for (char c : text) {
        if (c == '=' || c == '\n' || c == '\r') continue;
        int v = val(c);
        if (v < 0) throw ClientError(ClientErrorKind::MalformedResponse, "invalid base64 payload");
        buf = (buf << 6) | v;
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<uint8_t>((buf >> bits) & 0xff));
        }
    }
    return out;
}

class HttpJsonClient {
public:
    explicit HttpJsonClient(const ClientConfig& cfg) : cfg_(cfg), limiter_(cfg.max_inflight) {
        auto scheme_end = cfg.endpoint.find("://");
        if (scheme_end == std::string::npos) throw std::invalid_argument("endpoint must include scheme: " + cfg.endpoint);
        auto path_start = cfg.endpoint.find('/', scheme_end + 3);
        host_ = path_start == std::string::npos ? cfg.endpoint : cfg.endpoint.substr(0, path_start);
        path_ = path_start == std::string::npos ? "/" : cfg.endpoint.substr(path_start);
    }

    nlohmann::json post(const nlohmann::json& body, int& attempts_out) {
        InflightLimiter::Token token(limiter_);
        return with_retries(cfg_.max_retries, attempts_out, [&] { return post_once(body); });
    }

private:
    nlohmann::json post_once(const nlohmann::json& body) {
        httplib::Client client(host_);
        client.set_connection_timeout(static_cast<time_t>(cfg_.timeout_s), 0);
        client.set_read_timeout(static_cast<time_t>(cfg_.timeout_s), 0);
        httplib::Headers headers;
        if (!cfg_.credential_env.empty()) {
            const char* key = std::getenv(cfg_.credential_env.c_str());
            if (key) headers.emplace("Authorization", std::string("Bearer ") + key);
        }
        auto res = client.Post(path_, headers, body.dump(), "application/json");
        if (!res) {
            auto err = res.error();
            if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
                err == httplib::Error::Write)
                throw ClientError(ClientErrorKind::Timeout, "request timed out: " + host_ + path_);
            throw ClientError(ClientErrorKind::Transport, "transport failure: " + httplib::to_string(err));
        }
        if (res->status < 200 || res->status >= 300)
            throw ClientError(ClientErrorKind::Transport, "HTTP " + std::to_string(res->status) + " from " + host_);
        try {
            return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            throw ClientError(ClientErrorKind::MalformedResponse, std::string("bad JSON response: ") + e.what());
        }
    }

    ClientConfig cfg_;
    InflightLimiter limiter_;
    std::string host_;
    std::string path_;
};

std::string require_string(const nlohmann::json& j, const char* field) {
    if (!j.contains(field) || !j[field].is_string())
        throw ClientError(ClientErrorKind::MalformedResponse, std::string("response missing string field: ") + field);
    return j[field].get<std::string>();
}

class HttpTextModel final : public TextModelClient {
public:
    explicit HttpTextModel(const ClientConfig& cfg) : http_(cfg) {}
    std::string generate(const std::string& prompt) override {
        if (prompt.empty()) throw std::invalid_argument("empty prompt");
        auto res = http_.post({{"prompt", prompt}}, last_attempts_);
        return require_string(res, "text");
    }
    int last_attempts() const override { return last_attempts_; }

private:
    HttpJsonClient http_;
    int last_attempts_ = 0;
};

class HttpImageModel final : public ImageModelClient {
public:
    explicit HttpImageModel(const ClientConfig& cfg) : http_(cfg) {}
    Raster generate_diptych(const std::string& prompt, uint64_t rng_seed) override {
        if (prompt.empty()) throw std::invalid_argument("empty prompt");
        auto res = http_.post({{"prompt", prompt}, {"seed", rng_seed}}, last_attempts_);
        try {
            return decode_png(base64_decode(require_string(res, "image_png_b64")));
        } catch (const std::runtime_error& e) {
            throw ClientError(ClientErrorKind::MalformedResponse, e.what());
        }
    }
    int last_attempts() const override { return last_attempts_; }

private:
    HttpJsonClient http_;
    int last_attempts_ = 0;
};

class HttpVerifier final : public VerifierClient {
public:
    explicit HttpVerifier(const ClientConfig& cfg) : http_(cfg) {}
    std::string verify(const Raster& image_w, const Raster& image_l, const std::string& prompt) override {
        auto res = http_.post({{"prompt", prompt},
                               {"image_w_png_b64", base64_encode(encode_png(image_w))},
                               {"image_l_png_b64", base64_encode(encode_png(image_l))}},
                              last_attempts_);
        return require_string(res, "text");
    }
    int last_attempts() const override { return last_attempts_; }

private:
    HttpJsonClient http_;
    int last_attempts_ = 0;
};

class HttpOcr final : public OcrClient {
public:
    explicit HttpOcr(const ClientConfig& cfg) : http_(cfg) {}
    std::string read(const Raster& image) override {
        auto res = http_.post({{"image_png_b64", base64_encode(encode_png(image))}}, last_attempts_);
        return require_string(res, "text");
    }
    int last_attempts() const override { return last_attempts_; }

private:
    HttpJsonClient http_;
    int last_attempts_ = 0;
};

}  // namespace

Raster mock_background_tile(int width, int height, uint64_t seed) {
    std::mt19937_64 eng(seed);
    std::uniform_int_distribution<int> level(30, 220);
    Raster tile(width, height, 3);

    int c00[3], c11[3];
    for (int c = 0; c < 3; ++c) {
        c00[c] = level(eng);
        c11[c] = level(eng);
    }
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double fx = width > 1 ? static_cast<double>(x) / (width - 1) : 0.0;
            double fy = height > 1 ? static_cast<double>(y) / (height - 1) : 0.0;
            double f = 0.5 * (fx + fy);
            for (int c = 0; c < 3; ++c)
                tile.at(x, y, c) = static_cast<uint8_t>(std::lround(c00[c] * (1.0 - f) + c11[c] * f));
        }

    std::uniform_int_distribution<int> px(0, width - 1), py(0, height - 1);
    std::uniform_int_distribution<int> radius(3, std::max(4, width / 6));
    for (int shape = 0; shape < 4; ++shape) {
        int cx = px(eng), cy = py(eng), r = radius(eng);
        int fill[3] = {level(eng), level(eng), level(eng)};
        bool circle = shape % 2 == 0;
        for (int y = std::max(0, cy - r); y <= std::min(height - 1, cy + r); ++y)
            for (int x = std::max(0, cx - r); x <= std::min(width - 1, cx + r); ++x) {
                if (circle && (x - cx) * (x - cx) + (y - cy) * (y - cy) > r * r) continue;
                for (int c = 0; c < 3; ++c)
                    tile.at(x, y, c) = static_cast<uint8_t>((tile.at(x, y, c) + fill[c]) / 2);
            }
    }

    // Backgrounds stay strictly inside [10, 245]; 0 and 255 are reserved for
    // the rendered text box.
    for (auto& p : tile.pixels) p = std::clamp<uint8_t>(p, 10, 245);
    return tile;
}

std::unique_ptr<TextModelClient> make_text_model_client(const ClientConfig& cfg) {
    if (cfg.mock) return std::make_unique<MockTextModel>(cfg);
    return std::make_unique<HttpTextModel>(cfg);
}

std::unique_ptr<ImageModelClient> make_image_model_client(const ClientConfig& cfg, const MockDiptychLayout& layout) {
    if (cfg.mock) return std::make_unique<MockImageModel>(cfg, layout);
    return std::make_unique<HttpImageModel>(cfg);
}

std::unique_ptr<VerifierClient> make_verifier_client(const ClientConfig& cfg) {
    if (cfg.mock) return std::make_unique<MockVerifier>(cfg);
    return std::make_unique<HttpVerifier>(cfg);
}

std::unique_ptr<OcrClient> make_ocr_client(const ClientConfig& cfg) {
    if (cfg.mock) return std::make_unique<MockOcr>(cfg);
    return std::make_unique<HttpOcr>(cfg);
}

}  // namespace di3po
