#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "scenegen/synth/scene.hpp"

namespace scenegen {

// Scene corpus container: magic "SGEN", version, JSON meta block, then
// back-to-back binary scene records, then an offset-table footer so records
// can be appended in a stream and still read back by index.
class CorpusWriter {
 public:
    CorpusWriter(const std::string& path, const nlohmann::json& meta);
    ~CorpusWriter();

    void append(const SceneSample& s);
    void finalize();
    size_t count() const { return offsets_.size(); }

 private:
    std::ofstream os_;
    std::string path_;
    std::vector<uint64_t> offsets_;
    bool finalized_ = false;
};

class CorpusReader {
 public:
    explicit CorpusReader(const std::string& path);

    const nlohmann::json& meta() const { return meta_; }
    size_t size() const { return offsets_.size(); }
    SceneSample read(size_t idx);

 private:
    mutable std::ifstream is_;
    std::string path_;
    nlohmann::json meta_;
    std::vector<uint64_t> offsets_;
};

// Whole-corpus convenience wrappers for callers that keep every scene in
// memory anyway (training, sampling, evaluation).
void save_corpus(const std::string& path, const std::vector<SceneSample>& scenes,
                 const nlohmann::json& meta = nlohmann::json::object());
std::vector<SceneSample> load_corpus(const std::string& path);

}  // namespace scenegen
