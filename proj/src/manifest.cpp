#include "fiml/manifest.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fiml/errors.hpp"

namespace fiml {

namespace {

std::uint64_t fnv1a(const char* data, std::size_t len, std::uint64_t h) {
    for (std::size_t i = 0; i < len; ++i) {
        h ^= static_cast<unsigned char>(data[i]);
        h *= 1099511628211ULL;
    }
    return h;
}

std::string to_hex(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace

std::string hash_bytes(const std::string& bytes) {
    return to_hex(fnv1a(bytes.data(), bytes.size(), 14695981039346656037ULL));
}

std::string hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("hash_file: cannot open " + path);
    std::uint64_t h = 14695981039346656037ULL;
    char buf[65536];
    while (in) {
        in.read(buf, sizeof(buf));
        h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
    }
    return to_hex(h);
}

RunManifest::RunManifest(const std::string& directory)
    : path_(directory + "/manifest.json") {
    std::filesystem::create_directories(directory);
    std::ifstream in(path_);
    if (in) {
        try {
            in >> doc_;
        } catch (const nlohmann::json::exception&) {
            doc_ = nlohmann::json::object();
        }
    }
    if (!doc_.is_object()) doc_ = nlohmann::json::object();
    if (!doc_.contains("format_version")) doc_["format_version"] = 1;
    if (!doc_.contains("stages")) doc_["stages"] = nlohmann::json::array();
}

bool RunManifest::up_to_date(const std::string& name, const std::string& params_hash,
                             const std::map<std::string, std::string>& inputs) const {
    // scan newest-first so reruns see the latest record of the stage
    const auto& stages = doc_.at("stages");
    for (auto it = stages.rbegin(); it != stages.rend(); ++it) {
        const nlohmann::json& rec = *it;
        if (rec.value("name", "") != name) continue;
        if (rec.value("params_hash", "") != params_hash) return false;
        if (rec.value("outcome", "") != "ok") return false;
        const auto rec_inputs =
            rec.value("inputs", std::map<std::string, std::string>{});
        if (rec_inputs != inputs) return false;
        const auto outputs = rec.value("outputs", std::vector<std::string>{});
        const auto hashes =
            rec.value("output_hashes", std::map<std::string, std::string>{});
        for (const std::string& out : outputs) {
            if (!std::filesystem::exists(out)) return false;
            auto hit = hashes.find(out);
            if (hit == hashes.end() || hash_file(out) != hit->second) return false;
        }
        return true;
    }
    return false;
}

void RunManifest::append(StageRecord record) {
    nlohmann::json rec;
    rec["name"] = record.name;
    rec["params_hash"] = record.params_hash;
    rec["inputs"] = record.inputs;
    rec["outputs"] = record.outputs;
    for (const std::string& out : record.outputs) {
        if (std::filesystem::exists(out))
            record.output_hashes[out] = hash_file(out);
    }
    rec["output_hashes"] = record.output_hashes;
    rec["seed"] = record.seed;
    rec["wall_time_s"] = record.wall_time_s;
    rec["outcome"] = record.outcome;
    doc_["stages"].push_back(std::move(rec));
    save();
}

void RunManifest::save() const {
    std::ofstream out(path_);
    if (!out) throw IoError("manifest: cannot write " + path_);
    out << doc_.dump(2) << '\n';
}

}  // namespace fiml
