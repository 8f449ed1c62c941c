#pragma once

// Helpers shared by the unit tests and the acceptance binary.

#include <hsbench/hsbench.hpp>

#include <filesystem>
#include <string>

namespace test_support {

inline std::filesystem::path fixtures() { return HSBENCH_FIXTURES; }

inline hsbench::Json fixture_json(const std::string& rel) {
    return hsbench::io_detail::read_json_file(fixtures() / rel);
}

inline hsbench::StudyBundle fixture_bundle(const std::string& name) {
    return hsbench::load_bundle(fixtures() / "bundles" / name);
}

inline hsbench::AgentTranscript synth_fixture(const std::string& name, std::uint64_t seed) {
    return hsbench::synthesize_transcript(fixture_json("synth/" + name + ".json"), seed);
}

} // namespace test_support
