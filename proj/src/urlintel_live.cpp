// Network resolver, kept apart so the HTTP client only compiles here.
#include <httplib.h>

#include "phishtriage/urlintel.hpp"

namespace phishtriage::urlintel {

namespace {

std::string resolve_location(const UrlParts& base, const std::string& loc) {
    if (split_url(loc) && loc.find("://") != std::string::npos) return loc;
    if (loc.starts_with("//")) return base.scheme + ":" + loc;
    if (loc.starts_with("/")) {
        const auto slash = base.rest.find('/');
        const std::string port = base.rest.substr(0, slash == std::string::npos ? base.rest.size() : slash);
        return base.scheme + "://" + base.host + (port.starts_with(":") ? port : "") + loc;
    }
    // Relative to the current directory.
    std::string path = base.rest;
    const auto q = path.find('?');
    if (q != std::string::npos) path.erase(q);
    const auto slash = path.rfind('/');
    path = slash == std::string::npos ? std::string("/") : path.substr(0, slash + 1);
    return base.scheme + "://" + base.host + path + loc;
}

}  // namespace

Resolver live_resolver(const LiveOptions& opts) {
    return [opts](const std::string& url, std::size_t) -> std::string {
        std::string cur = url;
        std::set<std::string> seen;
        for (int hop = 0; hop <= opts.max_depth; ++hop) {
            if (!seen.insert(canonicalize(cur)).second) return std::string(kUnresolved);
            auto parts = split_url(cur);
            if (!parts || (parts->scheme != "http" && parts->scheme != "https"))
                return std::string(kUnresolved);
            std::string authority = parts->host;
            std::string path = parts->rest;
            if (path.starts_with(":")) {
                const auto slash = path.find_first_of("/?");
                authority += path.substr(0, slash);
                path = slash == std::string::npos ? "" : path.substr(slash);
            }
            if (path.empty() || path[0] != '/') path = "/" + path;

            // A fresh client per hop: no cookies or connections carry over.
            httplib::Client cli(parts->scheme + "://" + authority);
            cli.set_follow_location(false);
            cli.set_connection_timeout(opts.timeout);
            cli.set_read_timeout(opts.timeout);
            cli.enable_server_certificate_verification(false);
            const auto res = cli.Get(path, {{"User-Agent", opts.user_agent}});
            if (!res) return std::string(kUnresolved);
            if (res->status >= 300 && res->status < 400 && res->has_header("Location")) {
                cur = resolve_location(*parts, res->get_header_value("Location"));
                continue;
            }
            return canonicalize(cur);
        }
        return std::string(kUnresolved);
    };
}

}  // namespace phishtriage::urlintel
