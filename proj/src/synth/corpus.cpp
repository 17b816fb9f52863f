#include "scenegen/synth/corpus.hpp"

#include <cstring>

namespace scenegen {

namespace {

constexpr char kMagic[4] = {'S', 'G', 'E', 'N'};
constexpr char kIndexMagic[8] = {'S', 'G', 'E', 'N', 'I', 'D', 'X', '\0'};
constexpr uint32_t kVersion = 1;

template <class T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw FormatError("corpus: truncated record");
    return v;
}

void put_f4(std::ostream& os, const real* p, size_t n) {
    std::vector<float> buf(n);
    for (size_t i = 0; i < n; ++i) buf[i] = static_cast<float>(p[i]);
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(n * sizeof(float)));
}

void get_f4(std::istream& is, real* p, size_t n) {
    std::vector<float> buf(n);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * sizeof(float)));
    if (!is) throw FormatError("corpus: truncated record");
    for (size_t i = 0; i < n; ++i) p[i] = static_cast<real>(buf[i]);
}

void write_record(std::ostream& os, const SceneSample& s) {
    put<uint64_t>(os, s.scene_id);
    put<double>(os, static_cast<double>(s.d_scene));
    put<uint32_t>(os, static_cast<uint32_t>(s.assets.size()));
    for (size_t i = 0; i < s.assets.size(); ++i) {
        const Asset& a = s.assets[i];
        put<uint8_t>(os, static_cast<uint8_t>(a.kind));
        put<uint32_t>(os, static_cast<uint32_t>(a.params.size()));
        for (real v : a.params) put<double>(os, static_cast<double>(v));
        for (real v : s.poses[i].to8()) put<double>(os, static_cast<double>(v));
        put<uint16_t>(os, static_cast<uint16_t>(a.latent.res));
        put<uint32_t>(os, static_cast<uint32_t>(a.latent.coords.size()));
        for (const auto& c : a.latent.coords)
            for (int k = 0; k < 3; ++k) put<uint8_t>(os, static_cast<uint8_t>(c[k]));
        put_f4(os, a.latent.feats.data(), a.latent.feats.size());
        put<uint32_t>(os, static_cast<uint32_t>(a.surface.size()));
        for (const auto& p : a.surface.pts) put_f4(os, p.data(), 3);
    }
    put<uint32_t>(os, static_cast<uint32_t>(s.views.size()));
    for (const auto& v : s.views) {
        put<double>(os, static_cast<double>(v.azimuth));
        put<uint32_t>(os, static_cast<uint32_t>(v.size));
        put_f4(os, v.image.data(), v.image.size());
        for (const auto& m : v.masks)
            for (real x : m) put<uint8_t>(os, x > 0 ? 1 : 0);
    }
}

SceneSample read_record(std::istream& is) {
    SceneSample s;
    s.scene_id = get<uint64_t>(is);
    s.d_scene = static_cast<real>(get<double>(is));
    const uint32_t n = get<uint32_t>(is);
    s.assets.resize(n);
    s.poses.resize(n);
    for (uint32_t i = 0; i < n; ++i) {
        Asset& a = s.assets[i];
        a.kind = static_cast<ShapeKind>(get<uint8_t>(is));
        a.params.resize(get<uint32_t>(is));
        for (real& v : a.params) v = static_cast<real>(get<double>(is));
        std::array<real, 8> p8;
        for (real& v : p8) v = static_cast<real>(get<double>(is));
        s.poses[i] = Pose::from8(p8);
        a.latent.res = get<uint16_t>(is);
        const uint32_t ncells = get<uint32_t>(is);
        a.latent.coords.resize(ncells);
        for (auto& c : a.latent.coords)
            for (int k = 0; k < 3; ++k) c[k] = get<uint8_t>(is);
        a.latent.feats.resize(static_cast<size_t>(ncells) * kLatentFeatDim);
        get_f4(is, a.latent.feats.data(), a.latent.feats.size());
        const uint32_t nsurf = get<uint32_t>(is);
        a.surface.pts.resize(nsurf);
        for (auto& p : a.surface.pts) get_f4(is, p.data(), 3);
    }
    const uint32_t nviews = get<uint32_t>(is);
    s.views.resize(nviews);
    for (auto& v : s.views) {
        v.azimuth = static_cast<real>(get<double>(is));
        v.size = static_cast<int>(get<uint32_t>(is));
        v.image.resize(static_cast<size_t>(2) * v.size * v.size);
        get_f4(is, v.image.data(), v.image.size());
        v.masks.assign(n, std::vector<real>(static_cast<size_t>(v.size) * v.size));
        for (auto& m : v.masks)
            for (real& x : m) x = get<uint8_t>(is) ? real(1) : real(0);
    }
    return s;
}

}  // namespace

CorpusWriter::CorpusWriter(const std::string& path, const nlohmann::json& meta)
    : os_(path, std::ios::binary), path_(path) {
    if (!os_) throw FormatError("corpus: cannot open for write: " + path);
    os_.write(kMagic, 4);
    put<uint32_t>(os_, kVersion);
    const std::string ms = meta.dump();
    put<uint64_t>(os_, ms.size());
    os_.write(ms.data(), static_cast<std::streamsize>(ms.size()));
}

CorpusWriter::~CorpusWriter() {
    if (!finalized_) {
        try {
            finalize();
        } catch (...) {
            // Destructors must not throw; a failed finalize leaves a file that
            // the reader will reject via the missing index trailer.
        }
    }
}

void CorpusWriter::append(const SceneSample& s) {
    SG_CHECK(!finalized_, "corpus: append after finalize");
    offsets_.push_back(static_cast<uint64_t>(os_.tellp()));
    write_record(os_, s);
    if (!os_) throw FormatError("corpus: write failed: " + path_);
}

void CorpusWriter::finalize() {
    if (finalized_) return;
    for (uint64_t off : offsets_) put<uint64_t>(os_, off);
    put<uint64_t>(os_, offsets_.size());
    os_.write(kIndexMagic, 8);
    os_.flush();
    if (!os_) throw FormatError("corpus: finalize failed: " + path_);
    finalized_ = true;
}

CorpusReader::CorpusReader(const std::string& path) : is_(path, std::ios::binary), path_(path) {
    if (!is_) throw FormatError("corpus: cannot open: " + path);
    char magic[4];
    is_.read(magic, 4);
    if (!is_ || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("corpus: bad magic in " + path);
    const uint32_t version = get<uint32_t>(is_);
    if (version != kVersion)
        throw FormatError("corpus: unsupported version " + std::to_string(version));
    const uint64_t mlen = get<uint64_t>(is_);
    std::string ms(mlen, '\0');
    is_.read(ms.data(), static_cast<std::streamsize>(mlen));
    if (!is_) throw FormatError("corpus: truncated meta in " + path);
    try {
        meta_ = nlohmann::json::parse(ms);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("corpus: meta is not valid JSON: ") + e.what());
    }

    is_.seekg(-16, std::ios::end);
    const uint64_t count = get<uint64_t>(is_);
    char trailer[8];
    is_.read(trailer, 8);
    if (!is_ || std::memcmp(trailer, kIndexMagic, 8) != 0)
        throw FormatError("corpus: missing index trailer in " + path);
    is_.seekg(-16 - static_cast<std::streamoff>(count * 8), std::ios::end);
    offsets_.resize(count);
    for (auto& off : offsets_) off = get<uint64_t>(is_);
}

SceneSample CorpusReader::read(size_t idx) {
    SG_CHECK(idx < offsets_.size(), "corpus: record index out of range");
    is_.clear();
    is_.seekg(static_cast<std::streamoff>(offsets_[idx]));
    return read_record(is_);
}

void save_corpus(const std::string& path, const std::vector<SceneSample>& scenes,
                 const nlohmann::json& meta) {
    CorpusWriter w(path, meta);
    for (const SceneSample& s : scenes) w.append(s);
    w.finalize();
}

std::vector<SceneSample> load_corpus(const std::string& path) {
    CorpusReader r(path);
    std::vector<SceneSample> scenes;
    scenes.reserve(r.size());
    for (size_t i = 0; i < r.size(); ++i) scenes.push_back(r.read(i));
    return scenes;
}

}  // namespace scenegen
