#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "scenegen/common.hpp"

namespace scenegen {

// Named-array container: magic "SGCK", u32 version, u64 header length, JSON
// header describing each array (name/dtype/shape/offset), then a little-endian
// payload. dtype "f4" is the interchange default; "f8" round-trips `real`
// exactly and is used for resumable training state.
struct ArrayRecord {
    std::string name;
    std::string dtype;  // "f4" or "f8"
    std::vector<int> shape;
    std::vector<real> data;

    int64_t numel() const;
};

struct Checkpoint {
    std::vector<ArrayRecord> arrays;
    nlohmann::json meta = nlohmann::json::object();

    void add(const std::string& name, std::vector<int> shape, const std::vector<real>& data,
             const std::string& dtype = "f4");
    const ArrayRecord* find(const std::string& name) const;
    const ArrayRecord& at(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace scenegen
