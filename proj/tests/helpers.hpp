#pragma once

#include <unistd.h>

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "nexus/backend.hpp"
#include "nexus/env.hpp"
#include "nexus/errors.hpp"

namespace testutil {

inline std::string data_dir() { return NEXUS_DATA_DIR; }
inline std::string apps_dir() { return data_dir() + "/apps"; }
inline std::string suite_path() { return data_dir() + "/suites/main.json"; }
inline std::string oracle_script_path() { return data_dir() + "/scripts/oracle.json"; }

inline nexus::DeviceConfigPtr device() {
    static nexus::DeviceConfigPtr d = nexus::load_device_config(apps_dir());
    return d;
}

// Fresh temp directory under the build tree; unique per call.
inline std::string fresh_dir(const std::string& tag) {
    static int counter = 0;
    const std::string path =
        (std::filesystem::temp_directory_path() /
         ("nexus_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++)))
            .string();
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
    return path;
}

// Canned response sequence, optionally cycling; records every prompt.
class SeqBackend : public nexus::TextBackend {
  public:
    SeqBackend(std::vector<std::string> responses, bool cycle = false,
               std::string identity = "test")
        : responses_(std::move(responses)), cycle_(cycle), identity_(std::move(identity)) {}

    nexus::BackendResponse complete(const std::string& prompt) override {
        prompts.push_back(prompt);
        size_t idx = cursor_;
        if (idx >= responses_.size()) {
            if (!cycle_) throw nexus::Error("SeqBackend exhausted");
            idx = cursor_ % responses_.size();
        }
        ++cursor_;
        return {responses_[idx], 0.0, 0, 0};
    }

    std::string identity() const override { return identity_; }

    std::vector<std::string> prompts;

  private:
    std::vector<std::string> responses_;
    bool cycle_ = false;
    std::string identity_;
    size_t cursor_ = 0;
};

// Random action over the full alphabet, including invalid targets.
inline nexus::Action random_action(std::mt19937& rng, const std::vector<std::string>& ids) {
    std::uniform_int_distribution<int> kind(0, 5);
    std::uniform_int_distribution<size_t> pick(0, ids.empty() ? 0 : ids.size() - 1);
    switch (kind(rng)) {
        case 0: return nexus::Action::tap(ids.empty() ? "nothing" : ids[pick(rng)]);
        case 1: return nexus::Action::type_text("t" + std::to_string(rng() % 1000));
        case 2: return nexus::Action::swipe(static_cast<nexus::SwipeDir>(rng() % 4));
        case 3: return nexus::Action::back();
        case 4: return nexus::Action::home();
        default: return rng() % 2 ? nexus::Action::stop("a" + std::to_string(rng() % 10))
                                  : nexus::Action::stop();
    }
}

// Element ids currently observable plus a few invalid ones.
inline std::vector<std::string> candidate_ids(const nexus::EnvState& s) {
    std::vector<std::string> ids;
    for (const auto& e : nexus::observe(s).elements) ids.push_back(e.id);
    ids.push_back("ghost.element");
    ids.push_back("icon.unknown_app");
    return ids;
}

}  // namespace testutil
