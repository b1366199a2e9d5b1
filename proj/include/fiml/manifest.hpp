#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace fiml {

/// FNV-1a content hash of a file, as a hex string.
std::string hash_file(const std::string& path);
std::string hash_bytes(const std::string& bytes);

/// Per-stage provenance record.
struct StageRecord {
    std::string name;
    std::string params_hash;                       // hash of the stage's resolved config
    std::map<std::string, std::string> inputs;     // path -> content hash
    std::vector<std::string> outputs;
    std::map<std::string, std::string> output_hashes;
    std::uint64_t seed = 0;
    double wall_time_s = 0.0;
    std::string outcome = "ok";
};

/// Append-only run manifest persisted as JSON in the output directory.
/// Stages are skipped when a matching record exists and every recorded
/// output still matches its hash.
class RunManifest {
public:
    explicit RunManifest(const std::string& directory);

    /// True when a stage with identical name/params/inputs already ran and
    /// its outputs are intact on disk.
    bool up_to_date(const std::string& name, const std::string& params_hash,
                    const std::map<std::string, std::string>& inputs) const;

    void append(StageRecord record);
    void save() const;

    const nlohmann::json& document() const { return doc_; }

private:
    std::string path_;
    nlohmann::json doc_;
};

}  // namespace fiml
