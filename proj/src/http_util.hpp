#pragma once

#include <memory>
#include <string>
#include <string_view>

#include <httplib.h>

#include "mirage/error.hpp"

namespace mirage::http {

struct Url {
    std::string origin;  // scheme://host[:port]
    std::string path;    // leading '/', may be empty
};

inline Url split_url(std::string_view url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string_view::npos) {
        throw Error(ErrorKind::validation, "URL needs an http:// or https:// scheme: " + std::string(url));
    }
    const auto scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") {
        throw Error(ErrorKind::validation, "unsupported URL scheme: " + std::string(scheme));
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string_view::npos) return {std::string(url), ""};
    std::string path(url.substr(path_start));
    while (path.size() > 1 && path.back() == '/') path.pop_back();
    if (path == "/") path.clear();
    return {std::string(url.substr(0, path_start)), path};
}

inline std::unique_ptr<httplib::Client> make_client(const Url& url, double timeout_s) {
    auto client = std::make_unique<httplib::Client>(url.origin);
    const auto sec = static_cast<time_t>(timeout_s);
    const auto usec = static_cast<time_t>((timeout_s - static_cast<double>(sec)) * 1e6);
    client->set_connection_timeout(sec, usec);
    client->set_read_timeout(sec, usec);
    client->set_write_timeout(sec, usec);
    return client;
}

}  // namespace mirage::http
