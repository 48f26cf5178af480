#include "mosaic/vector_index.hpp"

#include "mosaic/error.hpp"
#include "mosaic/text_util.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

namespace mosaic {

namespace {

constexpr char kMagic[8] = {'M', 'O', 'S', 'A', 'I', 'C', 'I', 'X'};
constexpr std::uint32_t kFormat = 1;

static_assert(std::endian::native == std::endian::little, "index persistence assumes a little-endian host");

template <class T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

void put_string(std::string& out, const std::string& s) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out += s;
}

class Reader {
public:
    explicit Reader(std::string_view data) : data_(data) {}

    template <class T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string get_string() {
        auto n = get<std::uint32_t>();
        need(n);
        std::string s(data_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    std::string_view raw(size_t n) {
        need(n);
        auto v = data_.substr(pos_, n);
        pos_ += n;
        return v;
    }
    bool done() const { return pos_ == data_.size(); }

private:
    void need(size_t n) const {
        if (pos_ + n > data_.size()) throw Error(ErrorKind::IoError, "truncated index file");
    }
    std::string_view data_;
    size_t pos_ = 0;
};

} // namespace

VectorIndex::VectorIndex(IndexKey key, size_t dimension) : key_(std::move(key)), dimension_(dimension) {}

const EmbeddingVector* VectorIndex::find(int chunk_id) const {
    for (const auto& e : entries_)
        if (e.chunk_id == chunk_id) return &e.vector;
    return nullptr;
}

void VectorIndex::add(int chunk_id, EmbeddingVector v) {
    if (v.dimension() != dimension_)
        throw Error(ErrorKind::DimensionMismatch, "vector has " + std::to_string(v.dimension()) +
                                                      " dims, index expects " + std::to_string(dimension_));
    entries_.push_back({chunk_id, std::move(v)});
}

std::vector<SearchHit> VectorIndex::search(const EmbeddingVector& query, int k) const {
    if (k < 1) throw Error(ErrorKind::InvalidArgument, "k must be >= 1");
    if (query.dimension() != dimension_)
        throw Error(ErrorKind::DimensionMismatch, "query has " + std::to_string(query.dimension()) +
                                                      " dims, index expects " + std::to_string(dimension_));
    std::vector<SearchHit> hits;
    hits.reserve(entries_.size());
    for (const auto& e : entries_) hits.push_back({e.chunk_id, e.vector.dot(query)});
    auto better = [](const SearchHit& a, const SearchHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.chunk_id < b.chunk_id;
    };
    size_t take = std::min(hits.size(), static_cast<size_t>(k));
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(take), hits.end(), better);
    hits.resize(take);
    return hits;
}

std::string VectorIndex::serialize() const {
    std::string out(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kFormat);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(dimension_));
    put_string(out, key_.codebook);
    put_string(out, key_.version);
    put<std::uint64_t>(out, entries_.size());
    for (const auto& e : entries_) {
        put<std::int32_t>(out, e.chunk_id);
        auto vals = e.vector.values();
        out.append(reinterpret_cast<const char*>(vals.data()), vals.size() * sizeof(float));
    }
    return out;
}

VectorIndex VectorIndex::deserialize(std::string_view bytes) {
    Reader r(bytes);
    if (r.raw(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic))
        throw Error(ErrorKind::IoError, "not a vector index file");
    if (r.get<std::uint32_t>() != kFormat) throw Error(ErrorKind::IoError, "unsupported index format");
    size_t dim = r.get<std::uint32_t>();
    IndexKey key;
    key.codebook = r.get_string();
    key.version = r.get_string();
    VectorIndex idx(key, dim);
    auto count = r.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < count; ++i) {
        int id = r.get<std::int32_t>();
        auto raw = r.raw(dim * sizeof(float));
        std::vector<float> vals(dim);
        std::memcpy(vals.data(), raw.data(), raw.size());
        idx.add(id, EmbeddingVector::from_unit(std::move(vals)));
    }
    if (!r.done()) throw Error(ErrorKind::IoError, "trailing bytes in index file");
    return idx;
}

void VectorIndex::save(const std::string& path) const { write_file(path, serialize()); }

VectorIndex VectorIndex::load(const std::string& path) { return deserialize(read_file(path)); }

} // namespace mosaic
