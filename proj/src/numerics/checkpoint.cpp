#include "scenegen/numerics/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace scenegen {

namespace {

constexpr char kMagic[4] = {'S', 'G', 'C', 'K'};
constexpr uint32_t kVersion = 1;

size_t dtype_size(const std::string& dtype) {
    if (dtype == "f4") return 4;
    if (dtype == "f8") return 8;
    throw FormatError("checkpoint: unsupported dtype '" + dtype + "'");
}

template <class T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw FormatError("checkpoint: truncated file");
    return v;
}

}  // namespace

int64_t ArrayRecord::numel() const {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

void Checkpoint::add(const std::string& name, std::vector<int> shape,
                     const std::vector<real>& data, const std::string& dtype) {
    dtype_size(dtype);
    ArrayRecord rec;
    rec.name = name;
    rec.dtype = dtype;
    rec.shape = std::move(shape);
    rec.data = data;
    SG_CHECK(rec.numel() == static_cast<int64_t>(data.size()),
             "checkpoint: shape/data size mismatch for " + name);
    arrays.push_back(std::move(rec));
}

const ArrayRecord* Checkpoint::find(const std::string& name) const {
    for (const auto& a : arrays)
        if (a.name == name) return &a;
    return nullptr;
}

const ArrayRecord& Checkpoint::at(const std::string& name) const {
    const ArrayRecord* rec = find(name);
    if (!rec) throw FormatError("checkpoint: missing array '" + name + "'");
    return *rec;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    nlohmann::json header;
    header["arrays"] = nlohmann::json::array();
    uint64_t offset = 0;
    for (const auto& a : ck.arrays) {
        const uint64_t nbytes = static_cast<uint64_t>(a.numel()) * dtype_size(a.dtype);
        header["arrays"].push_back({{"name", a.name},
                                    {"dtype", a.dtype},
                                    {"shape", a.shape},
                                    {"offset", offset},
                                    {"nbytes", nbytes}});
        offset += nbytes;
    }
    header["meta"] = ck.meta;
    const std::string hs = header.dump();

    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("checkpoint: cannot open for write: " + path);
    os.write(kMagic, 4);
    write_pod<uint32_t>(os, kVersion);
    write_pod<uint64_t>(os, hs.size());
    os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& a : ck.arrays) {
        if (a.dtype == "f4") {
            std::vector<float> buf(a.data.size());
            for (size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(a.data[i]);
            os.write(reinterpret_cast<const char*>(buf.data()),
                     static_cast<std::streamsize>(buf.size() * sizeof(float)));
        } else {
            std::vector<double> buf(a.data.size());
            for (size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<double>(a.data[i]);
            os.write(reinterpret_cast<const char*>(buf.data()),
                     static_cast<std::streamsize>(buf.size() * sizeof(double)));
        }
    }
    if (!os) throw FormatError("checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("checkpoint: cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("checkpoint: bad magic in " + path);
    const uint32_t version = read_pod<uint32_t>(is);
    if (version != kVersion)
        throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    const uint64_t hlen = read_pod<uint64_t>(is);
    std::string hs(hlen, '\0');
    is.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!is) throw FormatError("checkpoint: truncated header in " + path);

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(hs);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint: header is not valid JSON: ") + e.what());
    }

    Checkpoint ck;
    ck.meta = header.value("meta", nlohmann::json::object());
    const std::streampos payload_start = is.tellg();
    for (const auto& j : header.at("arrays")) {
        ArrayRecord rec;
        rec.name = j.at("name").get<std::string>();
        rec.dtype = j.at("dtype").get<std::string>();
        rec.shape = j.at("shape").get<std::vector<int>>();
        const uint64_t offset = j.at("offset").get<uint64_t>();
        const size_t n = static_cast<size_t>(rec.numel());
        is.seekg(payload_start + static_cast<std::streamoff>(offset));
        rec.data.resize(n);
        if (rec.dtype == "f4") {
            std::vector<float> buf(n);
            is.read(reinterpret_cast<char*>(buf.data()),
                    static_cast<std::streamsize>(n * sizeof(float)));
            for (size_t i = 0; i < n; ++i) rec.data[i] = static_cast<real>(buf[i]);
        } else if (rec.dtype == "f8") {
            std::vector<double> buf(n);
            is.read(reinterpret_cast<char*>(buf.data()),
                    static_cast<std::streamsize>(n * sizeof(double)));
            for (size_t i = 0; i < n; ++i) rec.data[i] = static_cast<real>(buf[i]);
        } else {
            throw FormatError("checkpoint: unsupported dtype '" + rec.dtype + "'");
        }
        if (!is) throw FormatError("checkpoint: truncated payload in " + path);
        ck.arrays.push_back(std::move(rec));
    }
    return ck;
}

}  // namespace scenegen
