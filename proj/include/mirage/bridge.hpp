#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "mirage/backend.hpp"
#include "mirage/segmenter.hpp"
#include "mirage/toy_denoiser.hpp"

namespace httplib {
class Server;
}

namespace mirage {

BackendDescriptor descriptor_from_json(const nlohmann::json& j);
nlohmann::json descriptor_to_json(const BackendDescriptor& d);

/// DenoiserBackend served over HTTP by a model sidecar.
///
///   POST /descriptor                                   -> descriptor
///   POST /encode   {image}                             -> {latent}
///   POST /decode   {latent}                            -> {image}
///   POST /velocity {latent, s, image, instruction}     -> {velocity}
///
/// `image` in requests is a base64 PNG; latents, velocities and decoded
/// images travel as {"shape", "data"} little-endian float32 tensors.
/// Transport failures and non-200 replies raise service errors.
class BridgeBackend final : public DenoiserBackend {
public:
    explicit BridgeBackend(std::string url, double timeout_s = 60.0);

    LatentGrid predict_velocity(const LatentGrid& latent, double s, const Condition& condition) const override;
    LatentGrid encode(const PixelImage& image) const override;
    PixelImage decode(const LatentGrid& latent) const override;
    BackendDescriptor descriptor() const override { return descriptor_; }

    const std::string& url() const { return url_; }

private:
    nlohmann::json post(const std::string& path, const nlohmann::json& body) const;

    std::string url_;
    double timeout_s_;
    BackendDescriptor descriptor_;
};

/// POST /segment {image, boxes: [[x0, y0, x1, y1], ...]} -> {masks: [base64 PNG]}
class BridgeSegmenter final : public Segmenter {
public:
    explicit BridgeSegmenter(std::string url, double timeout_s = 60.0);
    std::vector<PixelMask> segment(const PixelImage& image, const std::vector<BoundingBox>& boxes) override;

private:
    std::string url_;
    double timeout_s_;
};

struct ConformanceCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Descriptor stability, encode/decode/velocity shape closure, declared
/// round-trip tolerance, error codes and concurrent requests.
std::vector<ConformanceCheck> run_bridge_conformance(const std::string& url, double timeout_s = 30.0);

/// In-process sidecar implementing the wire protocol. Velocities come from the
/// oracle (`oracle`) or are all zero (`zeros`). Model calls are serialized.
class EchoBridgeServer {
public:
    enum class VelocityMode { oracle, zeros };

    explicit EchoBridgeServer(OracleOptions options = {}, VelocityMode mode = VelocityMode::oracle);
    ~EchoBridgeServer();
    EchoBridgeServer(const EchoBridgeServer&) = delete;
    EchoBridgeServer& operator=(const EchoBridgeServer&) = delete;

    /// Binds 127.0.0.1 on `port` (0 picks a free one) and serves in a
    /// background thread. Returns the bound port.
    int start(int port = 0);
    void stop();
    std::string url() const;

    BackendDescriptor descriptor() const;

private:
    OracleBackend oracle_;
    VelocityMode mode_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = 0;
    std::mutex model_mutex_;
};

}  // namespace mirage
