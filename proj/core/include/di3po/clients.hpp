#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>

#include "di3po/raster.hpp"

namespace di3po {

enum class ClientErrorKind { Timeout, Transport, MalformedResponse };

/// Typed, retryable client failure.
class ClientError : public std::runtime_error {
public:
    ClientError(ClientErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ClientErrorKind kind() const { return kind_; }

private:
    ClientErrorKind kind_;
};

struct ClientConfig {
    std::string endpoint;
    std::string credential_env;  // env var holding the API key
    double timeout_s = 30.0;
    int max_retries = 3;
    int max_inflight = 4;
    bool mock = true;
    uint64_t mock_seed = 0;
    /// Mock corruption knobs: "no-seam", "same-text", "different-background",
    /// "no-text" (image model) and OCR character-noise fraction.
    std::string corruption;
    double ocr_noise = 0.0;
};

/// Bounded concurrency gate shared by a client's callers.
class InflightLimiter {
public:
    explicit InflightLimiter(int max_inflight) : capacity_(max_inflight > 0 ? max_inflight : 1) {}

    class Token {
    public:
        explicit Token(InflightLimiter& l) : limiter_(l) { limiter_.acquire(); }
        ~Token() { limiter_.release(); }
        Token(const Token&) = delete;
        Token& operator=(const Token&) = delete;

    private:
        InflightLimiter& limiter_;
    };

private:
    void acquire();
    void release();

    std::mutex mu_;
    std::condition_variable cv_;
    int capacity_;
    int in_use_ = 0;
};

class TextModelClient {
public:
    virtual ~TextModelClient() = default;
    virtual std::string generate(const std::string& prompt) = 0;
    /// Attempts made by the most recent call (including the success).
    virtual int last_attempts() const = 0;
};

class ImageModelClient {
public:
    virtual ~ImageModelClient() = default;
    virtual Raster generate_diptych(const std::string& prompt, uint64_t rng_seed) = 0;
    virtual int last_attempts() const = 0;
};

class VerifierClient {
public:
    virtual ~VerifierClient() = default;
    virtual std::string verify(const Raster& image_w, const Raster& image_l, const std::string& prompt) = 0;
    virtual int last_attempts() const = 0;
};

class OcrClient {
public:
    virtual ~OcrClient() = default;
    virtual std::string read(const Raster& image) = 0;
    virtual int last_attempts() const = 0;
};

/// Geometry of the mock diptych raster.
struct MockDiptychLayout {
    int width = 128;
    int height = 64;
    static constexpr int seam_width = 2;
    int panel_width() const { return (width - seam_width) / 2; }
};

/// Factories: mock or HTTP-backed depending on cfg.mock.
std::unique_ptr<TextModelClient> make_text_model_client(const ClientConfig& cfg);
std::unique_ptr<ImageModelClient> make_image_model_client(const ClientConfig& cfg,
                                                          const MockDiptychLayout& layout = {});
std::unique_ptr<VerifierClient> make_verifier_client(const ClientConfig& cfg);
std::unique_ptr<OcrClient> make_ocr_client(const ClientConfig& cfg);

/// Test hook available on every mock client: fail the next n calls with a
/// transport error before succeeding.
class FailureInjectable {
public:
    virtual ~FailureInjectable() = default;
    virtual void inject_failures(int n) = 0;
};

/// Seeded procedural background tile with values confined to [10, 245]
/// so the pure 0/255 text box stays recoverable.
Raster mock_background_tile(int width, int height, uint64_t seed);

}  // namespace di3po
