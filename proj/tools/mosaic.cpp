#include "mosaic/error.hpp"
#include "mosaic/http_server.hpp"
#include "mosaic/service.hpp"
#include "mosaic/text_util.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace mosaic;

namespace {

struct Common {
    std::string config_path;
    std::string data_dir;
    std::string chat_fixture;
    bool null_backend = false;
};

std::unique_ptr<Runtime> make_runtime(const Common& c) {
    ServiceConfig cfg = c.config_path.empty() ? ServiceConfig{} : ServiceConfig::load(c.config_path);
    cfg.apply_env();
    if (!c.data_dir.empty()) cfg.data_dir = c.data_dir;
    if (!c.chat_fixture.empty()) cfg.chat_fixture = c.chat_fixture;
    std::unique_ptr<ChatBackend> chat;
    if (c.null_backend) chat = std::make_unique<NullChatBackend>();
    return Runtime::create(cfg, std::move(chat));
}

// Copies a job's artifacts into out_dir.
void export_artifacts(Service& svc, const nlohmann::json& job, const std::string& out_dir) {
    if (out_dir.empty() || !job.contains("artifacts")) return;
    fs::create_directories(out_dir);
    const std::string id = job.at("job_id").get<std::string>();
    for (const auto& name : job["artifacts"]) {
        auto body = svc.jobs().read_artifact(id, name.get<std::string>());
        if (body) write_file((fs::path(out_dir) / name.get<std::string>()).string(), *body);
    }
}

int finish(const ServiceResponse& r) {
    if (r.status >= 400) {
        std::cerr << "error: " << r.body.value("message", r.body.dump()) << '\n';
        return r.status == 503 ? 3 : 2;
    }
    std::cout << r.body.dump(2) << '\n';
    if (r.body.value("state", "") == "failed") {
        std::cerr << "error: " << r.body.value("error", "job failed") << '\n';
        return 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-agent annotation of clinical conversation transcripts"};
    app.require_subcommand(1);
    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", common.config_path, "Service config JSON");
        sub->add_option("--data-dir", common.data_dir, "Directory for jobs, codebooks and the example library");
        sub->add_option("--chat-fixture", common.chat_fixture, "Scripted chat responses (JSON)");
        sub->add_flag("--null-backend", common.null_backend, "Chat backend that answers every batch with no labels");
    };

    AnnotateRequest areq;
    std::string transcript_path, gold_path, out_dir, agents, run_json;
    std::vector<std::string> codebook_paths;
    auto* annotate = app.add_subcommand("annotate", "Annotate a transcript");
    add_common(annotate);
    annotate->add_option("-t,--transcript", transcript_path, "Transcript file")->required()->check(CLI::ExistingFile);
    annotate->add_option("-p,--prompt", areq.prompt, "Annotation request in plain language");
    annotate->add_option("--codebook", codebook_paths, "Codebook file to register or update")->check(CLI::ExistingFile);
    annotate->add_option("--agents", agents, "Comma-separated codebooks, bypassing routing");
    annotate->add_option("--gold", gold_path, "Annotated gold transcript for verification")->check(CLI::ExistingFile);
    annotate->add_flag("--verify", areq.verify, "Flag uncertain labels when no gold is given");
    annotate->add_flag("--train", areq.training, "Feed verified disagreements into the example library");
    annotate->add_option("--run", run_json, "Run settings as a JSON object");
    annotate->add_option("-o,--out", out_dir, "Directory to copy job artifacts into");

    VerifyRequest vreq;
    std::string vgold, vpred, vout;
    auto* verify = app.add_subcommand("verify", "Score predictions against an annotated gold transcript");
    add_common(verify);
    verify->add_option("-g,--gold", vgold, "Annotated gold transcript")->required()->check(CLI::ExistingFile);
    auto* pred_opt = verify->add_option("-p,--predictions", vpred, "annotations.json from an annotate run")
                         ->check(CLI::ExistingFile);
    auto* job_opt = verify->add_option("--job", vreq.job_id, "Stored annotate job id");
    pred_opt->excludes(job_opt);
    verify->add_option("-o,--out", vout, "Directory to copy reports into");

    std::string update_path, update_name;
    auto* update = app.add_subcommand("update", "Register or update a codebook");
    add_common(update);
    update->add_option("-f,--file", update_path, "Codebook file")->required()->check(CLI::ExistingFile);
    update->add_option("--name", update_name, "Codebook name (default: file stem)");

    auto* codebooks = app.add_subcommand("codebooks", "List registered codebooks");
    add_common(codebooks);

    std::string host;
    int port = 0;
    auto* serve = app.add_subcommand("serve", "Run the HTTP service");
    add_common(serve);
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Port");

    CLI11_PARSE(app, argc, argv);

    try {
        Service svc(make_runtime(common));
        if (*annotate) {
            areq.transcript = read_file(transcript_path);
            areq.transcript_name = fs::path(transcript_path).filename().string();
            for (const auto& p : codebook_paths) areq.codebooks.push_back({fs::path(p).stem().string(), read_file(p)});
            if (!agents.empty()) {
                std::string spaced = agents;
                for (char& ch : spaced)
                    if (ch == ',') ch = ' ';
                areq.agents = split_whitespace(spaced);
            }
            if (!gold_path.empty()) areq.gold = read_file(gold_path);
            if (!run_json.empty()) areq.config = nlohmann::json::parse(run_json);
            ServiceResponse r = svc.annotate(areq);
            if (r.status < 400) export_artifacts(svc, r.body, out_dir);
            return finish(r);
        }
        if (*verify) {
            vreq.gold = read_file(vgold);
            if (!vpred.empty()) vreq.predictions = read_file(vpred);
            ServiceResponse r = svc.verify(vreq);
            if (r.status < 400) {
                export_artifacts(svc, r.body, vout);
                r.body.erase("verification");
            }
            return finish(r);
        }
        if (*update) {
            std::string name = update_name.empty() ? fs::path(update_path).stem().string() : update_name;
            return finish(svc.upload_codebook(name, read_file(update_path)));
        }
        if (*codebooks) return finish(svc.codebooks());
        if (*serve) {
            const ServiceConfig& cfg = svc.runtime().config;
            HttpServer server(svc);
            const std::string h = host.empty() ? cfg.host : host;
            const int p = port ? port : cfg.port;
            std::cerr << "listening on " << h << ":" << p << '\n';
            if (!server.listen(h, p)) {
                std::cerr << "error: cannot bind " << h << ":" << p << '\n';
                return 1;
            }
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
