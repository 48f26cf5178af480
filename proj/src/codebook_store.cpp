#include "mosaic/codebook_store.hpp"

#include "mosaic/builtin_codebooks.hpp"
#include "mosaic/error.hpp"
#include "mosaic/routing.hpp"
#include "mosaic/text_util.hpp"

#include <filesystem>

namespace mosaic {

namespace fs = std::filesystem;

nlohmann::json UpdateReceipt::to_json() const {
    nlohmann::json j = {{"codebook", codebook},           {"old_version", old_version.empty() ? nlohmann::json(nullptr) : nlohmann::json(old_version)},
                        {"new_version", new_version},     {"changed", changed},
                        {"index_rebuilt", index_rebuilt}, {"chunks", chunks}};
    if (!changed) j["status"] = "no change";
    else j["status"] = old_version.empty() ? "registered" : "updated";
    return j;
}

CodebookStore::CodebookStore(Embedder& embedder, ChunkingParams chunking, RetrievalCache* cache,
                             std::string persist_dir)
    : embedder_(embedder), chunking_(chunking), cache_(cache), persist_dir_(std::move(persist_dir)) {}

std::shared_ptr<const CodebookSnapshot> CodebookStore::build(const Codebook& cb) const {
    auto snap = std::make_shared<CodebookSnapshot>();
    snap->codebook = cb;
    snap->registry = label_registry(cb);
    auto chunks = chunk_codebook(cb, chunking_.window, chunking_.stride);
    std::string idx_path;
    if (!persist_dir_.empty()) {
        idx_path = (fs::path(persist_dir_) / (cb.name + ".idx")).string();
        if (fs::exists(idx_path)) {
            try {
                VectorIndex saved = VectorIndex::load(idx_path);
                if (saved.key() == IndexKey{cb.name, cb.version} && saved.dimension() == embedder_.dimension() &&
                    saved.size() == chunks.size()) {
                    snap->index.vectors = std::move(saved);
                    snap->index.chunks = std::move(chunks);
                    return snap;
                }
            } catch (const Error&) {
                // unreadable index files are rebuilt below
            }
        }
    }
    snap->index = ChunkIndex::build(cb, std::move(chunks), embedder_);
    if (!idx_path.empty()) {
        snap->index.vectors.save(idx_path);
        write_file((fs::path(persist_dir_) / (cb.name + ".codebook")).string(), cb.source);
    }
    return snap;
}

void CodebookStore::install_builtins() {
    // Read persisted uploads first; installing a builtin rewrites its file.
    std::vector<Codebook> persisted;
    if (!persist_dir_.empty() && fs::exists(persist_dir_)) {
        for (const auto& entry : fs::directory_iterator(persist_dir_)) {
            if (entry.path().extension() != ".codebook") continue;
            persisted.push_back(parse_codebook(read_file(entry.path().string()), entry.path().stem().string()));
        }
    }
    for (const auto& cb : builtin_codebooks()) apply_update(cb);
    for (const auto& cb : persisted) apply_update(cb);
}

std::shared_ptr<const CodebookSnapshot> CodebookStore::snapshot(const std::string& name) const {
    std::shared_lock lock(mu_);
    auto it = snapshots_.find(name);
    if (it == snapshots_.end()) throw Error(ErrorKind::NotFound, "unknown codebook '" + name + "'");
    return it->second;
}

bool CodebookStore::contains(const std::string& name) const {
    std::shared_lock lock(mu_);
    return snapshots_.count(name) > 0;
}

std::optional<std::string> CodebookStore::version(const std::string& name) const {
    std::shared_lock lock(mu_);
    auto it = snapshots_.find(name);
    if (it == snapshots_.end()) return std::nullopt;
    return it->second->version();
}

std::vector<std::string> CodebookStore::names() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> out;
    for (const auto& [name, _] : snapshots_) out.push_back(name);
    return canonical_order(std::move(out));
}

std::map<std::string, LabelRegistry> CodebookStore::registries() const {
    std::shared_lock lock(mu_);
    std::map<std::string, LabelRegistry> out;
    for (const auto& [name, snap] : snapshots_) out[name] = snap->registry;
    return out;
}

UpdateReceipt CodebookStore::apply_update(const Codebook& cb) {
    std::lock_guard serial(update_mu_);
    UpdateReceipt r;
    r.codebook = cb.name;
    r.new_version = cb.version;
    if (auto old = version(cb.name)) {
        r.old_version = *old;
        if (*old == cb.version) {
            r.chunks = snapshot(cb.name)->index.chunks.size();
            return r;
        }
    }
    auto snap = build(cb);
    r.changed = true;
    r.index_rebuilt = true;
    r.chunks = snap->index.chunks.size();
    {
        std::unique_lock lock(mu_);
        snapshots_[cb.name] = std::move(snap);
    }
    if (cache_) cache_->invalidate(cb.name);
    return r;
}

bool detect_codebook_update(const std::optional<Codebook>& uploaded, const CodebookStore& store) {
    if (!uploaded) return false;
    auto current = store.version(uploaded->name);
    return !current || *current != uploaded->version;
}

} // namespace mosaic
