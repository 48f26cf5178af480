#include "mosaic/http_server.hpp"

#include "mosaic/error.hpp"
#include "mosaic/text_util.hpp"

#include <httplib.h>

#include <filesystem>

namespace mosaic {

namespace {

void send(httplib::Response& res, const ServiceResponse& r) {
    res.status = r.status;
    if (r.raw) res.set_content(*r.raw, r.content_type);
    else res.set_content(r.body.dump(2), "application/json");
}

void send_error(httplib::Response& res, const Error& e) { send(res, error_response(e)); }

bool truthy(const std::string& v) {
    std::string s = to_lower(trim(v));
    return s == "1" || s == "true" || s == "yes" || s == "on";
}

std::optional<std::string> part(const httplib::Request& req, const std::string& key) {
    if (!req.has_file(key)) return std::nullopt;
    return req.get_file_value(key).content;
}

std::vector<std::string> split_csv_list(const std::string& s) {
    std::vector<std::string> out;
    size_t start = 0;
    while (start <= s.size()) {
        size_t comma = s.find(',', start);
        if (comma == std::string::npos) comma = s.size();
        std::string item = trim(s.substr(start, comma - start));
        if (!item.empty()) out.push_back(item);
        start = comma + 1;
    }
    return out;
}

nlohmann::json parse_json_body(const std::string& body, const std::string& what) {
    try {
        return nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidArgument, what + " is not valid JSON: " + e.what());
    }
}

std::string codebook_name_of(const httplib::MultipartFormData& f) {
    std::string stem = std::filesystem::path(f.filename).stem().string();
    return stem.empty() ? "Uploaded" : stem;
}

AnnotateRequest annotate_request(const httplib::Request& req) {
    AnnotateRequest a;
    if (!req.is_multipart_form_data()) {
        nlohmann::json j = parse_json_body(req.body, "annotate request");
        try {
            a.transcript = j.at("transcript").get<std::string>();
            a.transcript_name = j.value("transcript_name", a.transcript_name);
            a.prompt = j.value("prompt", "");
            for (const auto& cb : j.value("codebooks", nlohmann::json::array()))
                a.codebooks.push_back({cb.at("name").get<std::string>(), cb.at("document").get<std::string>()});
            if (j.contains("config")) a.config = j["config"];
            if (j.contains("agents")) a.agents = j["agents"].get<std::vector<std::string>>();
            if (j.contains("gold") && !j["gold"].is_null()) a.gold = j["gold"].get<std::string>();
            a.verify = j.value("verify", false);
            a.training = j.value("training", false);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::InvalidArgument, std::string("bad annotate request: ") + e.what());
        }
        return a;
    }
    if (!req.has_file("transcript")) throw Error(ErrorKind::InvalidArgument, "missing transcript part");
    const auto tf = req.get_file_value("transcript");
    a.transcript = tf.content;
    if (!tf.filename.empty()) a.transcript_name = tf.filename;
    a.prompt = part(req, "prompt").value_or("");
    for (const auto& f : req.get_file_values("codebook")) a.codebooks.push_back({codebook_name_of(f), f.content});
    if (auto c = part(req, "config"); c && !trim(*c).empty()) a.config = parse_json_body(*c, "config");
    if (auto ag = part(req, "agents")) a.agents = split_csv_list(*ag);
    if (auto g = part(req, "gold")) a.gold = *g;
    a.verify = truthy(part(req, "verify").value_or(""));
    a.training = truthy(part(req, "training").value_or(""));
    return a;
}

VerifyRequest verify_request(const httplib::Request& req) {
    VerifyRequest v;
    if (!req.is_multipart_form_data()) {
        nlohmann::json j = parse_json_body(req.body, "verify request");
        try {
            v.gold = j.at("gold").get<std::string>();
            if (j.contains("job_id")) v.job_id = j["job_id"].get<std::string>();
            if (j.contains("predictions"))
                v.predictions = j["predictions"].is_string() ? j["predictions"].get<std::string>()
                                                             : j["predictions"].dump();
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::InvalidArgument, std::string("bad verify request: ") + e.what());
        }
        return v;
    }
    auto gold = part(req, "gold");
    if (!gold) throw Error(ErrorKind::InvalidArgument, "missing gold part");
    v.gold = *gold;
    if (auto id = part(req, "job_id")) v.job_id = trim(*id);
    v.predictions = part(req, "predictions");
    return v;
}

} // namespace

HttpServer::HttpServer(Service& service) : service_(service), server_(std::make_unique<httplib::Server>()) {
    auto& s = *server_;
    s.set_payload_max_length(64u << 20);

    s.Post("/annotate", [this](const httplib::Request& req, httplib::Response& res) {
        try {
            send(res, service_.annotate(annotate_request(req)));
        } catch (const Error& e) {
            send_error(res, e);
        }
    });
    s.Post("/verify", [this](const httplib::Request& req, httplib::Response& res) {
        try {
            send(res, service_.verify(verify_request(req)));
        } catch (const Error& e) {
            send_error(res, e);
        }
    });
    s.Post("/codebooks", [this](const httplib::Request& req, httplib::Response& res) {
        try {
            std::string name, doc;
            if (req.is_multipart_form_data()) {
                if (!req.has_file("codebook")) throw Error(ErrorKind::InvalidArgument, "missing codebook part");
                const auto f = req.get_file_value("codebook");
                doc = f.content;
                name = part(req, "name").value_or(codebook_name_of(f));
            } else {
                nlohmann::json j = parse_json_body(req.body, "codebook upload");
                if (!j.contains("name") || !j.contains("document"))
                    throw Error(ErrorKind::InvalidArgument, "codebook upload needs name and document");
                name = j["name"].get<std::string>();
                doc = j["document"].get<std::string>();
            }
            send(res, service_.upload_codebook(name, doc));
        } catch (const Error& e) {
            send_error(res, e);
        }
    });
    s.Post("/corrections", [this](const httplib::Request& req, httplib::Response& res) {
        try {
            send(res, service_.correction(correction_from_json(parse_json_body(req.body, "correction"))));
        } catch (const Error& e) {
            send_error(res, e);
        }
    });
    s.Get(R"(/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        send(res, service_.job(req.matches[1]));
    });
    s.Get(R"(/jobs/([^/]+)/artifacts/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        send(res, service_.artifact(req.matches[1], req.matches[2]));
    });
    s.Get("/codebooks", [this](const httplib::Request&, httplib::Response& res) { send(res, service_.codebooks()); });
    s.Get("/library", [this](const httplib::Request& req, httplib::Response& res) {
        send(res, service_.library(req.get_param_value("codebook")));
    });
    s.Get("/health", [this](const httplib::Request&, httplib::Response& res) { send(res, service_.health()); });
    s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
            std::rethrow_exception(ep);
        } catch (const Error& e) {
            send_error(res, e);
        } catch (const std::exception& e) {
            send_error(res, Error(ErrorKind::IoError, e.what()));
        }
    });
}

HttpServer::~HttpServer() = default;

bool HttpServer::listen(const std::string& host, int port) { return server_->listen(host, port); }

int HttpServer::bind_any(const std::string& host) { return server_->bind_to_any_port(host); }

bool HttpServer::listen_after_bind() { return server_->listen_after_bind(); }

void HttpServer::stop() { server_->stop(); }

void HttpServer::wait_until_ready() const { server_->wait_until_ready(); }

} // namespace mosaic
