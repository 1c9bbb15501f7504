#pragma once

#include <memory>
#include <string>

#include "quarry/error.hpp"
#include "quarry/project.hpp"

namespace quarry {

/// HTTP status for an error code.
int http_status(ErrorCode code) noexcept;

/// JSON API over one project. Responses are compact JSON with sorted keys;
/// errors are {"error": {"code", "message"}}.
class Service {
public:
    explicit Service(Project& project);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds and serves until stop(). Returns false when binding fails.
    bool listen(const std::string& host, int port);
    /// Binds to a free port and returns it; follow with run().
    int bind_any_port(const std::string& host);
    void run();
    void stop();
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace quarry
