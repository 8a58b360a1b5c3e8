#pragma once

#include <cstdlib>
#include <ctime>
#include <map>
#include <string>

#include <json.hpp>

#include "nca/util.hpp"

namespace nca {

// Reproducibility record written alongside every output artifact. Runs with
// equal config, input digests, and seed produce byte-identical outputs.
// SOURCE_DATE_EPOCH overrides the wall clock so whole manifests can be
// compared byte for byte.
struct RunManifest {
    std::string command;
    nlohmann::json config;
    std::map<std::string, std::string> input_digests;  // path -> fnv1a digest
    std::uint64_t seed = 0;

    void add_input(const std::string& path) { input_digests[path] = file_digest(path); }

    nlohmann::json to_json() const {
        std::int64_t timestamp = 0;
        if (const char* sde = std::getenv("SOURCE_DATE_EPOCH"))
            timestamp = std::atoll(sde);
        else
            timestamp = static_cast<std::int64_t>(std::time(nullptr));
        return nlohmann::json{{"tool", "nca"},
                              {"version", kToolVersion},
                              {"command", command},
                              {"config", config},
                              {"inputs", input_digests},
                              {"seed", seed},
                              {"timestamp", timestamp}};
    }

    void write(const std::string& artifact_path) const {
        write_file(artifact_path + ".manifest.json", to_json().dump(2) + "\n");
    }
};

}  // namespace nca
