#include "mirage/bridge.hpp"

#include <algorithm>
#include <cmath>
#include <future>

#include "http_util.hpp"
#include "mirage/codec.hpp"
#include "mirage/image_io.hpp"
#include "mirage/scene.hpp"

namespace mirage {
namespace {

using nlohmann::json;

std::string png_b64(const PixelImage& image) { return base64_encode(encode_png(image)); }

PixelImage image_from_wire(const json& j) {
    const auto grid = latent_from_wire(j);
    if (grid.channels() != PixelImage::kChannels) {
        throw Error(ErrorKind::service, "decoded image must have 3 channels, got " + std::to_string(grid.channels()));
    }
    std::vector<double> v(grid.values().begin(), grid.values().end());
    for (auto& x : v) x = std::clamp(x, 0.0, 1.0);
    return PixelImage(grid.height(), grid.width(), std::move(v));
}

json image_to_wire(const PixelImage& image) {
    return latent_to_wire(LatentGrid(image.shape(), std::vector<double>(image.values().begin(), image.values().end())));
}

struct HttpReply {
    int status = 0;
    std::string body;
};

HttpReply raw_post(const std::string& base, const std::string& path, const std::string& body, double timeout_s) {
    auto url = http::split_url(base);
    auto client = http::make_client(url, timeout_s);
    auto res = client->Post(url.path + path, body, "application/json");
    if (!res) {
        throw Error(ErrorKind::service, "bridge " + base + path + " unreachable (" + httplib::to_string(res.error()) + ")");
    }
    return {res->status, res->body};
}

json post_json(const std::string& base, const std::string& path, const json& body, double timeout_s) {
    const auto reply = raw_post(base, path, body.dump(), timeout_s);
    if (reply.status != 200) {
        std::string message;
        try {
            message = json::parse(reply.body).value("error", std::string());
        } catch (const json::exception&) {
        }
        throw Error(ErrorKind::service, "bridge " + path + " returned HTTP " + std::to_string(reply.status) +
                                            (message.empty() ? std::string() : ": " + message));
    }
    try {
        return json::parse(reply.body);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::service, "bridge " + path + " returned invalid JSON: " + e.what());
    }
}

void reply_error(httplib::Response& res, int status, const std::string& message) {
    res.status = status;
    res.set_content(json{{"error", message}}.dump(), "application/json");
}

void reply_json(httplib::Response& res, const json& body) {
    res.status = 200;
    res.set_content(body.dump(), "application/json");
}

}  // namespace

BackendDescriptor descriptor_from_json(const json& j) {
    BackendDescriptor d;
    try {
        d.name = j.at("name").get<std::string>();
        d.vae_factor = j.at("vae_factor").get<int>();
        d.patch = j.at("patch").get<int>();
        d.supports_variable_size = j.value("supports_variable_size", true);
        d.schedule = j.value("schedule", std::string("uniform"));
        d.dtype = j.value("dtype", std::string("float32"));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::service, std::string("malformed bridge descriptor: ") + e.what());
    }
    if (d.vae_factor < 1 || d.patch < 1) throw Error(ErrorKind::service, "bridge descriptor factors must be positive");
    return d;
}

json descriptor_to_json(const BackendDescriptor& d) {
    return {{"name", d.name},
            {"vae_factor", d.vae_factor},
            {"patch", d.patch},
            {"supports_variable_size", d.supports_variable_size},
            {"schedule", d.schedule},
            {"dtype", d.dtype}};
}

BridgeBackend::BridgeBackend(std::string url, double timeout_s) : url_(std::move(url)), timeout_s_(timeout_s) {
    http::split_url(url_);
    descriptor_ = descriptor_from_json(post("/descriptor", json::object()));
    if (descriptor_.schedule != "uniform") {
        throw Error(ErrorKind::validation, "bridge schedule '" + descriptor_.schedule + "' is not supported; only uniform");
    }
}

json BridgeBackend::post(const std::string& path, const json& body) const {
    return post_json(url_, path, body, timeout_s_);
}

LatentGrid BridgeBackend::predict_velocity(const LatentGrid& latent, double s, const Condition& condition) const {
    const auto reply = post("/velocity", {{"latent", latent_to_wire(latent)},
                                          {"s", s},
                                          {"image", png_b64(condition.image)},
                                          {"instruction", condition.instruction}});
    try {
        auto v = latent_from_wire(reply.at("velocity"));
        if (!(v.shape() == latent.shape())) throw Error(ErrorKind::service, "bridge velocity shape differs from the latent");
        return v;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::service, std::string("bridge /velocity reply: ") + e.what());
    }
}

LatentGrid BridgeBackend::encode(const PixelImage& image) const {
    const auto reply = post("/encode", {{"image", png_b64(image)}});
    try {
        return latent_from_wire(reply.at("latent"));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::service, std::string("bridge /encode reply: ") + e.what());
    }
}

PixelImage BridgeBackend::decode(const LatentGrid& latent) const {
    const auto reply = post("/decode", {{"latent", latent_to_wire(latent)}});
    try {
        return image_from_wire(reply.at("image"));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::service, std::string("bridge /decode reply: ") + e.what());
    }
}

std::vector<PixelMask> BoxFillSegmenter::segment(const PixelImage& image, const std::vector<BoundingBox>& boxes) {
    std::vector<PixelMask> out;
    for (const auto& b : boxes) out.push_back(rasterize_box(b, image.height(), image.width()));
    return out;
}

BridgeSegmenter::BridgeSegmenter(std::string url, double timeout_s) : url_(std::move(url)), timeout_s_(timeout_s) {
    http::split_url(url_);
}

std::vector<PixelMask> BridgeSegmenter::segment(const PixelImage& image, const std::vector<BoundingBox>& boxes) {
    json jboxes = json::array();
    for (const auto& b : boxes) jboxes.push_back({b.x0, b.y0, b.x1, b.y1});
    const auto reply = post_json(url_, "/segment", {{"image", png_b64(image)}, {"boxes", jboxes}}, timeout_s_);
    std::vector<PixelMask> masks;
    try {
        for (const auto& m : reply.at("masks")) masks.push_back(decode_mask_png(base64_decode(m.get<std::string>())));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::service, std::string("bridge /segment reply: ") + e.what());
    }
    if (masks.size() != boxes.size()) throw Error(ErrorKind::service, "bridge /segment returned the wrong mask count");
    for (const auto& m : masks) {
        if (m.height != image.height() || m.width != image.width()) {
            throw Error(ErrorKind::service, "bridge /segment mask size differs from the image");
        }
    }
    return masks;
}

std::vector<ConformanceCheck> run_bridge_conformance(const std::string& url, double timeout_s) {
    std::vector<ConformanceCheck> checks;
    auto check = [&](const std::string& name, auto&& fn) {
        ConformanceCheck c{name, false, {}};
        try {
            c.detail = fn();
            c.passed = true;
        } catch (const std::exception& e) {
            c.detail = e.what();
        }
        checks.push_back(c);
    };

    json first;
    check("descriptor", [&] {
        first = post_json(url, "/descriptor", json::object(), timeout_s);
        const auto d = descriptor_from_json(first);
        return d.name + " f=" + std::to_string(d.vae_factor) + " p=" + std::to_string(d.patch);
    });
    if (!checks.back().passed) return checks;
    const auto desc = descriptor_from_json(first);

    check("descriptor stable", [&] {
        if (post_json(url, "/descriptor", json::object(), timeout_s) != first) throw std::runtime_error("descriptor changed between calls");
        return std::string("identical bodies");
    });

    const int f = desc.vae_factor;
    const auto image = make_square_scene({16 * f, 16 * f, 3}).image;
    const BridgeBackend backend(url, timeout_s);
    LatentGrid latent;
    check("encode shape", [&] {
        latent = backend.encode(image);
        const GridShape want{latent.channels(), image.height() / f, image.width() / f};
        if (!(latent.shape() == want)) throw std::runtime_error("latent shape does not match [C, H/f, W/f]");
        return "[" + std::to_string(latent.channels()) + ", " + std::to_string(latent.height()) + ", " +
               std::to_string(latent.width()) + "]";
    });
    if (!checks.back().passed) return checks;

    check("decode round trip", [&] {
        const auto back = backend.decode(latent);
        if (back.height() != image.height() || back.width() != image.width()) throw std::runtime_error("decoded size differs");
        if (!first.contains("roundtrip_tolerance")) return std::string("shape only; no tolerance declared");
        const double tol = first["roundtrip_tolerance"].get<double>();
        double worst = 0.0;
        for (std::size_t i = 0; i < image.values().size(); ++i) {
            worst = std::max(worst, std::abs(back.values()[i] - image.values()[i]));
        }
        if (worst > tol) throw std::runtime_error("max error " + std::to_string(worst) + " exceeds declared " + std::to_string(tol));
        return "max error " + std::to_string(worst);
    });

    check("velocity shape", [&] {
        const auto v = backend.predict_velocity(latent, 0.5, {image, "noop"});
        if (!(v.shape() == latent.shape())) throw std::runtime_error("velocity shape differs from the latent");
        return std::string("matches latent");
    });

    check("velocity shape mismatch -> 400", [&] {
        const LatentGrid wrong({latent.channels(), latent.height() + 1, latent.width()});
        const auto r = raw_post(url, "/velocity",
                                json{{"latent", latent_to_wire(wrong)}, {"s", 0.5}, {"image", png_b64(image)}, {"instruction", "noop"}}.dump(),
                                timeout_s);
        if (r.status != 400) throw std::runtime_error("expected 400, got " + std::to_string(r.status));
        return std::string("400");
    });

    check("malformed encode -> 400", [&] {
        const auto r = raw_post(url, "/encode", "{\"image\": 17}", timeout_s);
        if (r.status != 400) throw std::runtime_error("expected 400, got " + std::to_string(r.status));
        return std::string("400");
    });

    check("concurrent velocity", [&] {
        auto call = [&] { return backend.predict_velocity(latent, 0.5, {image, "noop"}); };
        auto a = std::async(std::launch::async, call);
        auto b = std::async(std::launch::async, call);
        const auto va = a.get();
        const auto vb = b.get();
        if (!(va == vb)) throw std::runtime_error("concurrent replies differ");
        return std::string("both succeeded");
    });

    check("segment empty boxes", [&] {
        const auto r = raw_post(url, "/segment", json{{"image", png_b64(image)}, {"boxes", json::array()}}.dump(), timeout_s);
        if (r.status == 501) return std::string("segmenter not loaded (501)");
        if (r.status != 200) throw std::runtime_error("expected 200 or 501, got " + std::to_string(r.status));
        if (!json::parse(r.body).at("masks").empty()) throw std::runtime_error("expected an empty mask list");
        return std::string("empty list");
    });
    return checks;
}

EchoBridgeServer::EchoBridgeServer(OracleOptions options, VelocityMode mode)
    : oracle_(std::move(options)), mode_(mode), server_(std::make_unique<httplib::Server>()) {
    auto& srv = *server_;
    auto parse_body = [](const httplib::Request& req, httplib::Response& res, json& out) {
        try {
            out = json::parse(req.body.empty() ? std::string("{}") : req.body);
            return true;
        } catch (const json::exception& e) {
            reply_error(res, 400, std::string("malformed JSON: ") + e.what());
            return false;
        }
    };
    auto decode_image = [](const json& body) {
        if (!body.contains("image") || !body["image"].is_string()) throw std::invalid_argument("field 'image' must be a base64 PNG");
        return decode_png(base64_decode(body["image"].get<std::string>()));
    };

    srv.Post("/descriptor", [this](const httplib::Request&, httplib::Response& res) {
        auto j = descriptor_to_json(descriptor());
        j["roundtrip_tolerance"] = 1e-6;
        reply_json(res, j);
    });
    srv.Post("/encode", [=, this](const httplib::Request& req, httplib::Response& res) {
        json body;
        if (!parse_body(req, res, body)) return;
        try {
            const auto img = decode_image(body);
            const auto f = static_cast<std::size_t>(oracle_.options().vae_factor);
            if (img.height() % f != 0 || img.width() % f != 0) return reply_error(res, 422, "image size must be a multiple of the codec factor");
            std::lock_guard lock(model_mutex_);
            reply_json(res, {{"latent", latent_to_wire(oracle_.encode(img))}});
        } catch (const std::exception& e) {
            reply_error(res, 400, e.what());
        }
    });
    srv.Post("/decode", [=, this](const httplib::Request& req, httplib::Response& res) {
        json body;
        if (!parse_body(req, res, body)) return;
        try {
            const auto latent = latent_from_wire(body.at("latent"));
            std::lock_guard lock(model_mutex_);
            reply_json(res, {{"image", image_to_wire(oracle_.decode(latent))}});
        } catch (const std::exception& e) {
            reply_error(res, 400, e.what());
        }
    });
    srv.Post("/velocity", [=, this](const httplib::Request& req, httplib::Response& res) {
        json body;
        if (!parse_body(req, res, body)) return;
        try {
            const auto latent = latent_from_wire(body.at("latent"));
            const double s = body.at("s").get<double>();
            const Condition cond{decode_image(body), body.value("instruction", std::string())};
            const auto f = static_cast<std::size_t>(oracle_.options().vae_factor);
            if (latent.height() * f != cond.image.height() || latent.width() * f != cond.image.width()) {
                return reply_error(res, 400, "latent shape does not match the condition image");
            }
            std::lock_guard lock(model_mutex_);
            const auto v = mode_ == VelocityMode::zeros ? LatentGrid(latent.shape())
                                                        : oracle_.predict_velocity(latent, s, cond);
            reply_json(res, {{"velocity", latent_to_wire(v)}});
        } catch (const std::exception& e) {
            reply_error(res, 400, e.what());
        }
    });
    srv.Post("/segment", [=](const httplib::Request& req, httplib::Response& res) {
        json body;
        if (!parse_body(req, res, body)) return;
        try {
            const auto img = decode_image(body);
            json masks = json::array();
            for (const auto& b : body.at("boxes")) {
                const BoundingBox box{b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()};
                masks.push_back(base64_encode(encode_mask_png(rasterize_box(box, img.height(), img.width()))));
            }
            reply_json(res, {{"masks", masks}});
        } catch (const std::exception& e) {
            reply_error(res, 400, e.what());
        }
    });
}

EchoBridgeServer::~EchoBridgeServer() { stop(); }

int EchoBridgeServer::start(int port) {
    if (thread_.joinable()) return port_;
    if (port == 0) {
        port_ = server_->bind_to_any_port("127.0.0.1");
    } else {
        port_ = server_->bind_to_port("127.0.0.1", port) ? port : -1;
    }
    if (port_ <= 0) throw Error(ErrorKind::service, "echo bridge could not bind a port");
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port_;
}

void EchoBridgeServer::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

std::string EchoBridgeServer::url() const { return "http://127.0.0.1:" + std::to_string(port_); }

BackendDescriptor EchoBridgeServer::descriptor() const {
    auto d = oracle_.descriptor();
    d.name = "echo-stub";
    d.dtype = "float32";
    return d;
}

}  // namespace mirage
