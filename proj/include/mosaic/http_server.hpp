#pragma once

#include "mosaic/service.hpp"

#include <memory>
#include <string>

namespace httplib {
class Server;
}

namespace mosaic {

// Routes:
//   POST /annotate      multipart: transcript (file), prompt, codebook (files), config, agents, gold, verify
//   POST /verify        multipart: gold (file), job_id | predictions (file)
//   POST /codebooks     multipart: codebook (file), name
//   POST /corrections   JSON CorrectionEvent
//   GET  /jobs/{id}, /jobs/{id}/artifacts/{name}, /codebooks, /library, /health
class HttpServer {
public:
    explicit HttpServer(Service& service);
    ~HttpServer();

    // Blocks until stop(). Returns false if the socket could not be bound.
    bool listen(const std::string& host, int port);
    // Binds to an ephemeral port and returns it; pair with listen_after_bind.
    int bind_any(const std::string& host);
    bool listen_after_bind();
    void stop();
    void wait_until_ready() const;

private:
    Service& service_;
    std::unique_ptr<httplib::Server> server_;
};

} // namespace mosaic
